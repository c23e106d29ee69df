// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "ehrpheno/adjudication.hpp"
#include "ehrpheno/bench.hpp"
#include "ehrpheno/cli.hpp"
#include "ehrpheno/evaluation.hpp"
#include "ehrpheno/io.hpp"
#include "ehrpheno/mock_backend.hpp"
#include "ehrpheno/pipeline.hpp"
#include "ehrpheno/preprocess.hpp"
#include "ehrpheno/synth.hpp"
#include "../unit/helpers.hpp"

using namespace ehrpheno;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

const ConditionProfile& profile(const char* name) { return find_profile(builtin_profiles(), name); }

LabelMap random_labels(std::mt19937_64& rng, int n, int pct) {
    LabelMap m;
    for (int i = 0; i < n; ++i) m["p" + std::to_string(i)] = static_cast<int>(rng() % 100) < pct;
    return m;
}

bool close(const Metric& m, long num, long den) {
    if (den == 0) return !m.value;
    return m.value && std::fabs(*m.value - static_cast<double>(num) / static_cast<double>(den)) <= 1e-12;
}

Outcome metric_correctness() {
    Outcome o;
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto p = random_labels(rng, 200, 1 + static_cast<int>(rng() % 98));
        const auto r = random_labels(rng, 200, 1 + static_cast<int>(rng() % 98));
        long tp = 0, fp = 0, fn = 0, tn = 0;
        for (const auto& [id, a] : p) {
            const int b = r.at(id);
            tp += a && b;
            fp += a && !b;
            fn += !a && b;
            tn += !a && !b;
        }
        const auto m = metrics(confusion(p, r));
        if (!(close(m.sensitivity, tp, tp + fn) && close(m.specificity, tn, tn + fp) && close(m.ppv, tp, tp + fp) &&
              close(m.npv, tn, tn + fn))) {
            o.require(false, "mismatch on trial " + std::to_string(trial));
            break;
        }
    }
    const auto f = metrics({84, 13, 16, 87});
    o.require(std::fabs(*f.sensitivity.value - 0.840) < 1e-12, "fixture sensitivity");
    o.require(std::fabs(*f.specificity.value - 0.870) < 1e-12, "fixture specificity");
    if (o.pass) o.detail = "1000 random vectors exact; fixture sens 0.840 spec 0.870";
    return o;
}

Outcome parsing_fixtures() {
    Outcome o;
    const auto trop = parse_extraction_response("troponin level: 1.16 ng/mL.", Analyte::Troponin);
    o.require(trop.size() == 1 && trop[0].normalized_value == 1160.0, "troponin 1.16 ng/mL -> 1160 ng/L");

    const std::string glucose =
        "1. glucose - mmol/l breakfast: 24.8 mmol/l 2. glucose - mmol/l breakfast: 20.1 mmol/l 3. glucose - "
        "mmol/l breakfast: 16.6 mmol/l 4. poct blood glucose - mmol/l lunch: 12 mmol/l 5. glucose - mmol/l "
        "lunch: 9.7 mmol/l 6. glucose - mmol/l lunch: 8.9 mmol/l 18. weight kg: 54.9 kg 19. height cm: 158 cm "
        "20. insulin (humulin r): 20 units given now 21. blood pressure systolic: 140 22. blood pressure "
        "diastolic: 66 23. blood pressure mean: (not provided)";
    std::vector<double> got;
    for (const auto& m : parse_extraction_response(glucose, Analyte::Glucose)) got.push_back(m.normalized_value);
    for (double v : {24.8, 20.1, 16.6, 12.0, 9.7, 8.9}) {
        o.require(std::find(got.begin(), got.end(), v) != got.end(), "glucose " + io::format_double(v, 1));
    }

    const auto bp = parse_extraction_response(glucose, Analyte::BloodPressure);
    o.require(bp.size() == 1 && bp[0].systolic == 140.0 && bp[0].diastolic == 66.0, "bp (140, 66) extracted");
    o.require(apply_clinical_rule(bp, profile("hypertension").rule) == InferredStatus::Yes, "bp (140, 66) -> Yes");

    o.require(parse_inference_response("No, there is no clear mention of hypertension or high blood pressure in the "
                                       "given clinical text.") == InferredStatus::No,
              "hypertension response -> No");
    o.require(parse_inference_response("Yes, the text identifies acute myocardial infarction (AMI) as the patient has "
                                       "been diagnosed with AMI).") == InferredStatus::Yes,
              "AMI response -> Yes");
    if (o.pass) o.detail = "troponin 1160 ng/L; glucose list; bp (140,66) Yes; No/Yes responses";
    return o;
}

LabMeasurement single(Analyte a, double v) { return {a, v, std::string(canonical_unit(a)), v, {}, {}}; }

LabMeasurement pressure(double s, double d) { return {Analyte::BloodPressure, s, "mmHg", s, s, d}; }

Outcome boundary_semantics() {
    Outcome o;
    const auto t0 = Clock::now();
    auto is = [](const std::vector<LabMeasurement>& ms, const char* cond, InferredStatus s) {
        return apply_clinical_rule(ms, profile(cond).rule) == s;
    };
    o.require(is({single(Analyte::Glucose, 11.1)}, "diabetes", InferredStatus::Yes), "glucose 11.1");
    o.require(is({single(Analyte::Troponin, 14.0)}, "ami", InferredStatus::No), "troponin 14.0");
    o.require(is({single(Analyte::Troponin, 14.01)}, "ami", InferredStatus::Yes), "troponin 14.01");
    o.require(is({pressure(139.9, 89.9)}, "hypertension", InferredStatus::No), "bp (139.9, 89.9)");
    o.require(is({pressure(140, 89)}, "hypertension", InferredStatus::Yes), "bp (140, 89)");
    // Also through text, so unit handling is covered.
    o.require(apply_clinical_rule(parse_extraction_response("glucose: 11.1 mmol/l", Analyte::Glucose),
                                  profile("diabetes").rule) == InferredStatus::Yes,
              "glucose 11.1 from text");
    o.require(apply_clinical_rule(parse_extraction_response("troponin: 0.014 ng/mL", Analyte::Troponin),
                                  profile("ami").rule) == InferredStatus::No,
              "troponin 0.014 ng/mL from text");
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "took longer than a minute");
    if (o.pass) o.detail = "all five boundaries hold in " + io::format_double(secs * 1000.0, 2) + " ms";
    return o;
}

struct SeedRun {
    std::map<std::string, DetectionResult> detections;
    std::map<std::string, LabelMap> truth;
    std::map<std::string, LabelMap> icd;
    double seconds = 0.0;
};

SeedRun synthetic_run(std::uint64_t seed) {
    const auto t0 = Clock::now();
    SynthSpec spec;
    spec.n_patients = 2000;
    spec.prevalence = {{"ami", 0.3}, {"diabetes", 0.3}, {"hypertension", 0.3}};
    spec.distractor_rate = 1.0;
    spec.evidence_fraction = 1.0;
    spec.seed = seed;
    const auto synth = generate_synthetic(spec, builtin_profiles());

    auto cfg = MockConfig::defaults();
    cfg.fn_rate = 0.05;
    cfg.fp_rate = 0.10;
    cfg.flip_seed = seed;
    MockBackend mock(builtin_profiles(), cfg);
    PipelineOptions opts;
    opts.parallelism = 4;

    SeedRun run;
    for (const auto& p : builtin_profiles()) {
        const auto prof = run_profiling(synth.cohort, p, mock, opts, 200, seed);
        const auto plan = filter_document_types(prof.profiles, parse_percentile("q1"), p.name);
        const auto corpus = consolidate(synth.cohort, plan, p).first;
        run.detections.emplace(p.name, run_detection(synth.cohort, p, &corpus, mock, opts));
        run.truth[p.name] = synth.truth.at(p.name);
        run.icd[p.name] = synth.cohort.icd_labels(p.name);
    }
    run.seconds = seconds_since(t0);
    return run;
}

Outcome synthetic_recovery(std::vector<SeedRun>& runs) {
    Outcome o;
    int good = 0;
    double slowest = 0.0;
    std::string worst;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        runs.push_back(synthetic_run(seed));
        const auto& run = runs.back();
        slowest = std::max(slowest, run.seconds);
        bool ok = run.seconds < 60.0;
        for (const auto& [cond, det] : run.detections) {
            const auto m = metrics(confusion(det.labels(MergeMode::Prompt1), run.truth.at(cond)));
            const double sens = m.sensitivity.value.value_or(-1), spec = m.specificity.value.value_or(-1);
            const bool in = std::fabs(sens - 0.95) <= 0.03 && std::fabs(spec - 0.90) <= 0.03;
            if (!in) {
                worst += " seed " + std::to_string(seed) + " " + cond + " sens " + io::format_double(sens, 3) +
                         " spec " + io::format_double(spec, 3);
            }
            ok = ok && in;
        }
        good += ok;
    }
    o.require(good >= 18, std::to_string(good) + "/20 seeds in range:" + worst);
    o.require(slowest < 60.0, "slowest run " + io::format_double(slowest, 1) + " s");
    if (o.pass) {
        o.detail = std::to_string(good) + "/20 seeds in range, slowest run " + io::format_double(slowest, 1) + " s";
    }
    return o;
}

Outcome or_algebra(const std::vector<SeedRun>& runs) {
    Outcome o;
    long instances = 0;
    for (const auto& run : runs) {
        for (const auto& [cond, det] : run.detections) {
            const auto p1 = det.labels(MergeMode::Prompt1), p2 = det.labels(MergeMode::Prompt2);
            const auto merged = det.labels(MergeMode::Merged);
            for (const auto& [id, l] : merged) {
                if (l != (p1.at(id) | p2.at(id))) o.require(false, "merged != prompt1 | prompt2 for " + id);
            }
            const auto& ref = run.truth.at(cond);
            const auto& icd = run.icd.at(cond);
            const auto both = metrics(confusion(combine_or(merged, icd), ref));
            for (const auto* part : {&merged, &icd}) {
                const auto m = metrics(confusion(*part, ref));
                o.require(*both.sensitivity.value >= *m.sensitivity.value, "pipeline+icd sensitivity dropped");
                o.require(*both.specificity.value <= *m.specificity.value, "pipeline+icd specificity rose");
            }
            ++instances;
        }
    }
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial, ++instances) {
        const auto ref = random_labels(rng, 100, 5 + static_cast<int>(rng() % 90));
        const auto a = random_labels(rng, 100, static_cast<int>(rng() % 100));
        const auto b = random_labels(rng, 100, static_cast<int>(rng() % 100));
        const auto both = metrics(confusion(combine_or(a, b), ref));
        for (const auto* part : {&a, &b}) {
            const auto m = metrics(confusion(*part, ref));
            if (m.sensitivity.value) {
                o.require(*both.sensitivity.value >= *m.sensitivity.value, "random: sensitivity dropped");
            }
            if (m.specificity.value) {
                o.require(*both.specificity.value <= *m.specificity.value, "random: specificity rose");
            }
        }
    }
    if (o.pass) o.detail = std::to_string(instances) + " instances";
    return o;
}

std::string random_note(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {
        "Troponin 30 ng/L measured",  "Family history noted",        "BP 150/95 mmHg",
        "Glucose 12.4 mmol/L",        "Started metformin",           "Walked the ward",
        "ECG shows sinus rhythm",     "Known HTN on amlodipine",     "No chest pain",
        "Diagnosed with STEMI",       "Insulin titrated",            "Systolic 160, diastolic 95",
        "Reviewed by cardiology",     "Weight 82 kg",                "Ate well today"};
    static const std::vector<std::string> ends = {".", "!", "?", ".\n", "\n", ". "};
    std::string out;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
        out += pieces[rng() % pieces.size()] + ends[rng() % ends.size()];
        if (rng() % 3 == 0) out += " ";
    }
    return out;
}

Outcome preprocessing() {
    Outcome o;
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<DocTypeProfile> ps;
        const int n = 1 + static_cast<int>(rng() % 45);
        for (int i = 0; i < n; ++i) {
            const int sampled = 1 + static_cast<int>(rng() % 200);
            const int pos = rng() % 3 == 0 ? 0 : static_cast<int>(rng() % (sampled + 1));
            ps.push_back({"T" + std::to_string(i), sampled, pos, static_cast<double>(pos) / sampled});
        }
        const auto k0 = filter_document_types(ps, 0).kept_types;
        const auto k1 = filter_document_types(ps, 25).kept_types;
        const auto k2 = filter_document_types(ps, 50).kept_types;
        if (!std::includes(k1.begin(), k1.end(), k2.begin(), k2.end()) ||
            !std::includes(k0.begin(), k0.end(), k1.begin(), k1.end())) {
            o.require(false, "monotonicity broken on trial " + std::to_string(trial));
            break;
        }
    }

    std::vector<Patient> patients;
    std::vector<ClinicalDocument> docs;
    for (int i = 0; i < 500; ++i) {
        const auto pid = "P" + std::to_string(i % 100);
        if (i < 100) patients.push_back({pid, *parse_date("2015-01-01"), {}});
        docs.push_back({pid, "D" + std::to_string(i), i % 2 ? "Lab" : "Nursing",
                        *parse_timestamp("2015-01-0" + std::to_string(1 + rng() % 9)), random_note(rng)});
    }
    const auto cohort = Cohort::build(patients, docs, {});
    std::map<std::string, const ClinicalDocument*> by_id;
    for (const auto& d : cohort.documents()) by_id[d.doc_id] = &d;
    std::size_t spans = 0;
    for (const auto& p : builtin_profiles()) {
        const auto corpus = consolidate(cohort, {p.name, 0, 0, {"Lab", "Nursing"}}, p).first;
        try {
            verify_provenance(cohort, corpus);
        } catch (const std::exception& e) {
            o.require(false, e.what());
        }
        for (const auto& m : corpus.documents) {
            for (const auto& s : m.provenance) {
                const auto& src = by_id.at(s.doc_id)->text;
                o.require(src.compare(s.source_offset, s.length, m.text, s.merged_offset, s.length) == 0,
                          "span mismatch in " + s.doc_id);
                ++spans;
            }
        }
    }

    SynthSpec spec;
    spec.n_patients = 500;
    spec.prevalence = {{"ami", 0.3}, {"diabetes", 0.3}, {"hypertension", 0.3}};
    spec.evidence_fraction = 1.0;
    spec.seed = 6;
    const auto synth = generate_synthetic(spec, builtin_profiles());
    for (const auto& p : builtin_profiles()) {
        const auto& e = eligible_doc_types(p.name);
        const auto stats = consolidate(synth.cohort, {p.name, 25, 0, {e.begin(), e.end()}}, p).second;
        o.require(stats.positive_retention && *stats.positive_retention == 1.0, p.name + " retention below 100%");
    }
    if (o.pass) {
        o.detail = "200 IR maps monotone; " + std::to_string(spans) +
                   " provenance spans over 500 notes verified; retention 100% for all conditions";
    }
    return o;
}

Outcome benchmark_harness() {
    Outcome o;
    std::map<std::string, std::string> canned;
    const auto& qs = builtin_questions();
    for (std::size_t i = 0; i < qs.size(); ++i) canned[qs[i].prompt] = i < 8 ? qs[i].expected : "I do not know.";
    ScriptedBackend backend(canned);
    const auto r = run_benchmark(backend, qs, GenerationParams{});
    o.require(r.correct == 8 && r.accuracy == 0.8, "scored " + std::to_string(r.correct) + "/10");
    const std::vector<std::pair<std::string, std::string>> fixtures = {
        {"Q1", "No, those are diabetes tests."}, {"Q3", "The systolic blood pressure is 119."}};
    for (const auto& q : qs) {
        o.require(q.matcher.matches(q.expected), q.id + " rejects its reference answer");
        for (const auto& [id, answer] : fixtures) {
            if (id == q.id) o.require(q.matcher.matches(answer), id + " rejects \"" + answer + "\"");
        }
        if (q.id == "Q6") o.require(!q.matcher.matches("Myocardial infarction and hypertension."), "Q6 accepts two");
    }
    if (o.pass) o.detail = "8/10 canned answers score 80%; all ten reference answers accepted";
    return o;
}

Outcome determinism() {
    Outcome o;
    testing::TempDir dir("accept");
    std::ostringstream sink;
    auto cli = [&](const std::string& cmd) {
        return run_cli({"--out", dir.path().string(), "--mock", "--seed", "8", "--n-patients", "300", cmd}, sink,
                       sink);
    };
    for (const char* cmd : {"synth", "profile", "preprocess", "detect"}) {
        if (cli(cmd) != 0) {
            o.require(false, std::string(cmd) + " failed: " + sink.str());
            return o;
        }
    }
    const auto first = io::read_file(dir / "detections.jsonl");
    const auto cold = nlohmann::json::parse(io::read_file(dir / "manifest_detect.json")).at("backend_calls").get<long>();
    o.require(cli("detect") == 0, "warm detect failed");
    const auto warm = nlohmann::json::parse(io::read_file(dir / "manifest_detect.json")).at("backend_calls").get<long>();
    o.require(warm == 0, std::to_string(warm) + " backend calls on warm rerun");
    o.require(io::read_file(dir / "detections.jsonl") == first, "label file changed");
    if (o.pass) {
        o.detail = "cold run " + std::to_string(cold) + " calls, warm run 0 calls, detections.jsonl byte-identical";
    }
    return o;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.pass;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
    };
    std::vector<SeedRun> runs;
    report(1, "metric correctness", metric_correctness);
    report(2, "parsing fixtures", parsing_fixtures);
    report(3, "boundary semantics", boundary_semantics);
    report(4, "synthetic recovery", [&] { return synthetic_recovery(runs); });
    report(5, "or-mode algebra", [&] { return or_algebra(runs); });
    report(6, "preprocessing", preprocessing);
    report(7, "benchmark harness", benchmark_harness);
    report(8, "determinism and resumability", determinism);
    return failures == 0 ? 0 : 1;
}
