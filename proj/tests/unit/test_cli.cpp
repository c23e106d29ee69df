#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ehrpheno/cli.hpp"
#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"
#include "helpers.hpp"

using namespace ehrpheno;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> base(const testing::TempDir& dir) {
    return {"--out", dir.path().string(), "--mock", "--seed", "5", "--n-patients", "80", "--m", "50"};
}

Run stage(const testing::TempDir& dir, const std::string& cmd, std::vector<std::string> extra = {}) {
    auto args = base(dir);
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back(cmd);
    return run(args);
}

nlohmann::json manifest(const testing::TempDir& dir, const std::string& cmd) {
    return nlohmann::json::parse(io::read_file(dir / ("manifest_" + cmd + ".json")));
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("full pipeline on a synthetic cohort") {
        testing::TempDir dir("cli");
        for (const char* cmd : {"synth", "profile", "preprocess", "detect", "evaluate", "trend", "bench"}) {
            const auto r = stage(dir, cmd);
            INFO(cmd, " ", r.err);
            REQUIRE(r.code == 0);
        }
        for (const char* f : {"documents.jsonl", "patients.jsonl", "labels.jsonl", "profile_ami.csv",
                              "consolidated_diabetes.jsonl", "consolidation_hypertension.csv", "detections.jsonl",
                              "evaluation.csv", "evaluation.txt", "cohort_summary.csv", "trend.csv", "trend.svg",
                              "bench.csv", "manifest_detect.json"}) {
            INFO(f);
            CHECK(fs::exists(dir / f));
        }
        const auto eval = io::read_file(dir / "evaluation.csv");
        for (const char* row : {"icd10", "prompt1", "prompt2", "merged", "pipeline+icd"}) {
            CHECK(eval.find(std::string(",") + row + ",") != std::string::npos);
        }
        const auto m = manifest(dir, "detect");
        CHECK(m.at("backend_id").get<std::string>().find("mock") != std::string::npos);
        CHECK(m.at("config_hash").get<std::string>().size() == 64);
        CHECK(m.at("config").at("backend").count("api_key") == 0);
    }

    TEST_CASE("warm cache rerun is byte identical with no backend calls") {
        testing::TempDir dir("cli");
        for (const char* cmd : {"synth", "profile", "preprocess", "detect"}) REQUIRE(stage(dir, cmd).code == 0);
        const auto first = io::read_file(dir / "detections.jsonl");
        CHECK(manifest(dir, "detect").at("backend_calls").get<long>() > 0);
        REQUIRE(stage(dir, "detect").code == 0);
        CHECK(manifest(dir, "detect").at("backend_calls").get<long>() == 0);
        CHECK(io::read_file(dir / "detections.jsonl") == first);
    }

    TEST_CASE("deleting an intermediate and rerunning reproduces downstream artifacts") {
        testing::TempDir dir("cli");
        for (const char* cmd : {"synth", "profile", "preprocess", "detect"}) REQUIRE(stage(dir, cmd).code == 0);
        const auto consolidated = io::read_file(dir / "consolidated_ami.jsonl");
        const auto detections = io::read_file(dir / "detections.jsonl");
        fs::remove(dir / "consolidated_ami.jsonl");
        fs::remove(dir / "detections.jsonl");
        REQUIRE(stage(dir, "preprocess", {"--no-cache"}).code == 0);
        REQUIRE(stage(dir, "detect", {"--no-cache"}).code == 0);
        CHECK(io::read_file(dir / "consolidated_ami.jsonl") == consolidated);
        CHECK(io::read_file(dir / "detections.jsonl") == detections);
    }

    TEST_CASE("detect without a preprocess artifact names it") {
        testing::TempDir dir("cli");
        REQUIRE(stage(dir, "synth").code == 0);
        const auto r = stage(dir, "detect");
        CHECK(r.code == 1);
        CHECK(r.err.find("consolidated_") != std::string::npos);
        CHECK(stage(dir, "detect", {"--no-preprocess"}).code == 0);
    }

    TEST_CASE("backend failure exits with 2") {
        testing::TempDir dir("cli");
        REQUIRE(stage(dir, "synth").code == 0);
        const auto r = run({"--out", dir.path().string(), "--backend-url", "http://127.0.0.1:1", "--max-retries", "0",
                            "--timeout", "1", "--no-cache", "--condition", "ami", "--m", "2", "profile"});
        CHECK(r.code == 2);
    }

    TEST_CASE("print-config shows the resolved configuration") {
        testing::TempDir dir("cli");
        std::ofstream(dir / "cfg.json") << R"({"m": 17, "percentile": "q2", "backend": {"api_key": "secret"}})";
        const auto r = run({"--config", (dir / "cfg.json").string(), "--percentile", "0", "--print-config", "detect"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j.at("m") == 17);
        CHECK(j.at("percentile") == "0");
        CHECK(r.out.find("secret") == std::string::npos);
    }

    TEST_CASE("invalid input exits with 1") {
        testing::TempDir dir("cli");
        CHECK(run({"--m", "0", "--out", dir.path().string(), "profile"}).code == 1);
        CHECK(run({"nonsense"}).code == 1);
        CHECK(run({}).code == 1);
        CHECK(run({"--out", dir.path().string(), "--condition", "gout", "--mock", "detect"}).code == 1);
        std::ofstream(dir / "bad.json") << R"({"unknown_key": 1})";
        CHECK(run({"--config", (dir / "bad.json").string(), "--print-config", "detect"}).code == 1);
        CHECK(run({"--help"}).code == 0);
    }

    TEST_CASE("config round trips through json") {
        RunConfig c;
        c.m = 33;
        c.conditions = {"ami"};
        c.synth.prevalence = {{"ami", 0.2}};
        RunConfig d;
        d.merge_json(c.to_json());
        CHECK(d.to_json() == c.to_json());
        CHECK_THROWS_AS(d.merge_json({{"nope", 1}}), ValidationError);
    }
}
