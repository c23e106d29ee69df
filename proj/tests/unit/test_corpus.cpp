#include <doctest.h>

#include <fstream>

#include "ehrpheno/corpus.hpp"
#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"
#include "ehrpheno/synth.hpp"
#include "helpers.hpp"

using namespace ehrpheno;

namespace {

void put(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("corpus") {
    TEST_CASE("timestamps accept dates with and without time") {
        const auto a = parse_timestamp("2015-03-04");
        const auto b = parse_timestamp("2015-03-04T00:00:00");
        REQUIRE(a);
        REQUIRE(b);
        CHECK(*a == *b);
        CHECK(format_timestamp(*parse_timestamp("2015-03-04 07:08:09Z")) == "2015-03-04T07:08:09");
        CHECK_FALSE(parse_timestamp("2015-02-30"));
        CHECK_FALSE(parse_timestamp("2015-3-4"));
        CHECK_FALSE(parse_timestamp("2015-03-04T25:00"));
        CHECK(format_month(*parse_date("2015-11-30")) == "2015-11");
    }

    TEST_CASE("load a well-formed cohort") {
        testing::TempDir dir;
        put(dir / "d.jsonl",
            R"({"patient_id":"P1","doc_id":"D1","doc_type":"DischargeSummary","timestamp":"2015-01-02T10:00:00","text":"a"})"
            "\n"
            R"({"patient_id":"P1","doc_id":"D2","doc_type":"EDHandover","timestamp":"2015-01-02","text":""})"
            "\n"
            R"({"patient_id":"P2","doc_id":"D3","doc_type":"EDHandover","timestamp":"2015-01-05T01:00:00","text":"c"})"
            "\n");
        put(dir / "p.jsonl",
            R"({"patient_id":"P1","admit_date":"2015-01-01","attributes":{"age":"60"}})"
            "\n"
            R"({"patient_id":"P2","admit_date":"2015-02-01"})"
            "\n");
        put(dir / "l.jsonl",
            R"({"patient_id":"P1","condition":"ami","registry_label":1,"icd_label":0})"
            "\n"
            R"({"patient_id":"P2","condition":"ami","registry_label":0})"
            "\n");
        const auto c = load_cohort(dir / "d.jsonl", dir / "p.jsonl", dir / "l.jsonl");
        CHECK(c.documents().size() == 3);
        CHECK(c.patients().size() == 2);
        CHECK(c.documents_of("P1").size() == 2);
        CHECK(c.registry_labels("ami") == LabelMap{{"P1", 1}, {"P2", 0}});
        CHECK(c.icd_labels("ami") == LabelMap{{"P1", 0}});
    }

    TEST_CASE("empty documents file is valid") {
        testing::TempDir dir;
        put(dir / "d.jsonl", "");
        put(dir / "p.jsonl", R"({"patient_id":"P1","admit_date":"2015-01-01","attributes":{}})" "\n");
        put(dir / "l.jsonl", "");
        const auto c = load_cohort(dir / "d.jsonl", dir / "p.jsonl", dir / "l.jsonl");
        CHECK(c.documents().empty());
        CHECK(c.patients().size() == 1);
    }

    TEST_CASE("dangling patient reference names the patient and line") {
        testing::TempDir dir;
        put(dir / "d.jsonl",
            R"({"patient_id":"P1","doc_id":"D1","doc_type":"X","timestamp":"2015-01-02","text":"a"})"
            "\n"
            R"({"patient_id":"P9","doc_id":"D2","doc_type":"X","timestamp":"2015-01-02","text":"a"})"
            "\n");
        put(dir / "p.jsonl", R"({"patient_id":"P1","admit_date":"2015-01-01","attributes":{}})" "\n");
        put(dir / "l.jsonl", "");
        const auto msg = error_of([&] { load_cohort(dir / "d.jsonl", dir / "p.jsonl", dir / "l.jsonl"); });
        CHECK(msg.find("P9") != std::string::npos);
        CHECK(msg.find(":2") != std::string::npos);
    }

    TEST_CASE("malformed records report file and line") {
        testing::TempDir dir;
        put(dir / "p.jsonl",
            R"({"patient_id":"P1","admit_date":"2015-01-01"})"
            "\n{not json\n");
        CHECK(error_of([&] { read_patients(dir / "p.jsonl"); }).find("p.jsonl:2") != std::string::npos);
        put(dir / "q.jsonl", R"({"patient_id":"P1","admit_date":"2015-13-01"})" "\n");
        CHECK_FALSE(error_of([&] { read_patients(dir / "q.jsonl"); }).empty());
        put(dir / "l.jsonl", R"({"patient_id":"P1","condition":"ami","registry_label":2})" "\n");
        CHECK_FALSE(error_of([&] { read_labels(dir / "l.jsonl"); }).empty());
    }

    TEST_CASE("uniqueness is enforced") {
        const Patient p{"P1", parse_date("2015-01-01").value(), {}};
        const ClinicalDocument d{"P1", "D1", "X", {}, "t"};
        CHECK_THROWS_AS(Cohort::build({p, p}, {}, {}), ValidationError);
        CHECK_THROWS_AS(Cohort::build({p}, {d, d}, {}), ValidationError);
        const ReferenceLabel l{"P1", "ami", 1, std::nullopt};
        CHECK_THROWS_AS(Cohort::build({p}, {}, {l, l}), ValidationError);
        CHECK_THROWS_AS(Cohort::build({p}, {{"P1", "D2", "", {}, "t"}}, {}), ValidationError);
    }

    TEST_CASE("write then load round-trips synthetic cohorts") {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            SynthSpec spec;
            spec.n_patients = 40;
            spec.seed = seed;
            spec.prevalence = {{"ami", 0.3}, {"diabetes", 0.4}, {"hypertension", 0.5}};
            const auto c = generate_synthetic(spec, builtin_profiles()).cohort;
            testing::TempDir dir;
            write_cohort(c, dir.path());
            const auto back = load_cohort(dir / "documents.jsonl", dir / "patients.jsonl", dir / "labels.jsonl");
            CHECK(back == c);
        }
    }

    TEST_CASE("text with quotes, newlines and unicode survives the file format") {
        const Patient p{"P1", parse_date("2015-06-01").value(), {{"sex", "F"}}};
        const ClinicalDocument d{"P1", "D1", "X", parse_timestamp("2015-06-01T08:30:00").value(),
                                 "He said \"ok\".\nTemp 37\xC2\xB0" "C\ttab"};
        const auto c = Cohort::build({p}, {d}, {});
        testing::TempDir dir;
        write_cohort(c, dir.path());
        CHECK(load_cohort(dir / "documents.jsonl", dir / "patients.jsonl", dir / "labels.jsonl") == c);
    }

    TEST_CASE("default document-type vocabulary") {
        const auto& t = default_doc_types();
        CHECK(t.size() == 45);
        CHECK(std::find(t.begin(), t.end(), "DischargeSummary") != t.end());
    }
}
