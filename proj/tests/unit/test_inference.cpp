#include <doctest.h>

#include <atomic>
#include <random>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/inference.hpp"

using namespace ehrpheno;

TEST_SUITE("inference") {
    TEST_CASE("generation defaults and validation") {
        GenerationParams p;
        CHECK(p.temperature == 0.5);
        CHECK(p.top_p == 0.9);
        CHECK(p.top_k == 50);
        CHECK_NOTHROW(p.validate());
        CHECK(p.deterministic().temperature == 0.0);
        auto bad = p;
        bad.temperature = 1.5;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = p;
        bad.top_p = 0.0;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = p;
        bad.top_k = 1;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = p;
        bad.max_new_tokens = 0;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        CHECK(GenerationParams::from_json(p.to_json()) == p);
        CHECK(p.canonical() != p.deterministic().canonical());
    }

    TEST_CASE("greedy chunk packing") {
        const std::string s1(39, 'a'), s2(39, 'b'), s3(39, 'c');
        const std::string text = s1 + ". " + s2 + ". " + s3 + ".";
        // Pieces are 41, 41 and 40 characters.
        const auto chunks = chunk_text(text, 100);
        REQUIRE(chunks.size() == 2);
        CHECK(chunks[0].text == s1 + ". " + s2 + ". ");
        CHECK(chunks[1].text == s3 + ".");
        CHECK(chunks[1].offset == 82);
    }

    TEST_CASE("text within budget is one chunk") {
        const auto chunks = chunk_text("short text. two.", 100);
        REQUIRE(chunks.size() == 1);
        CHECK(chunks[0].text == "short text. two.");
        CHECK_FALSE(chunks[0].oversized);
    }

    TEST_CASE("oversized sentence becomes its own flagged chunk") {
        const std::string big(500, 'x');
        const auto chunks = chunk_text(big + ".", 100);
        REQUIRE(chunks.size() == 1);
        CHECK(chunks[0].oversized);
        const auto mixed = chunk_text("small. " + big + ". tail.", 100);
        REQUIRE(mixed.size() == 3);
        CHECK(mixed[1].oversized);
        CHECK_FALSE(mixed[0].oversized);
    }

    TEST_CASE("chunk concatenation reproduces the input") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 300; ++trial) {
            std::string text;
            const auto n = rng() % 20;
            for (std::size_t i = 0; i < n; ++i) {
                text += std::string(1 + rng() % 80, static_cast<char>('a' + rng() % 26));
                const char* ends[] = {". ", "! ", "?\n", "\n", ".  "};
                text += ends[rng() % 5];
            }
            const std::size_t budget = 20 + rng() % 200;
            std::string rebuilt;
            for (const auto& c : chunk_text(text, budget)) {
                CHECK(c.offset == rebuilt.size());
                if (!c.oversized) CHECK(c.text.size() <= budget);
                rebuilt += c.text;
            }
            CHECK(rebuilt == text);
        }
    }

    TEST_CASE("scripted backend") {
        ScriptedBackend b({{"a", "Yes"}}, "fallback");
        b.fail_on("boom");
        CHECK(complete(b, {"a", {}}).text == "Yes");
        CHECK(complete(b, {"zzz", {}}).text == "fallback");
        CHECK_THROWS_AS(complete(b, {"boom", {}}), BackendError);
        CHECK(b.calls() == 3);
    }

    TEST_CASE("parallel_for visits every index once and propagates errors") {
        std::vector<std::atomic<int>> seen(1000);
        parallel_for(seen.size(), 4, [&](std::size_t i) { ++seen[i]; });
        for (auto& s : seen) CHECK(s.load() == 1);
        CHECK_THROWS_AS(parallel_for(100, 4,
                                     [](std::size_t i) {
                                         if (i == 37) throw BackendError("x");
                                     }),
                        BackendError);
        parallel_for(0, 4, [](std::size_t) { FAIL("should not run"); });
    }
}
