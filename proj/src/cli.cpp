#include "ehrpheno/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ehrpheno/bench.hpp"
#include "ehrpheno/cache.hpp"
#include "ehrpheno/errors.hpp"
#include "ehrpheno/evaluation.hpp"
#include "ehrpheno/io.hpp"
#include "ehrpheno/mock_backend.hpp"
#include "ehrpheno/pipeline.hpp"
#include "ehrpheno/preprocess.hpp"

namespace ehrpheno {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
    if (output_dir.empty()) throw ValidationError("output directory must not be empty");
    if (m < 1) throw ValidationError("m must be at least 1");
    parse_percentile(percentile);
    if (ir_denominator != "sampled" && ir_denominator != "m") {
        throw ValidationError("ir_denominator must be 'sampled' or 'm'");
    }
    params.validate();
    if (chunk_chars < 100) throw ValidationError("chunk_chars must be at least 100");
    if (parallelism < 1 || parallelism > 256) throw ValidationError("parallelism must be in [1, 256]");
    if (backend.kind != "http" && backend.kind != "mock") {
        throw ValidationError("backend kind must be 'http' or 'mock'");
    }
    for (double r : {backend.mock_fn_rate, backend.mock_fp_rate}) {
        if (r < 0.0 || r > 1.0) throw ValidationError("mock flip rates must be in [0, 1]");
    }
    if (backend.http.max_retries < 0) throw ValidationError("max_retries must be >= 0");
    if (backend.http.timeout_seconds < 1) throw ValidationError("timeout_seconds must be >= 1");
    if (!merge_mode_from_string(mode)) throw ValidationError("mode must be prompt1, prompt2 or merged");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw ValidationError("ci_level must be in (0, 1)");
    synth.validate();
}

json RunConfig::to_json() const {
    // The API key is left out so that dumps and manifests carry no secret.
    return {{"corpus", corpus_dir},
            {"output", output_dir},
            {"profiles", profiles_path},
            {"conditions", conditions},
            {"m", m},
            {"seed", seed},
            {"percentile", percentile},
            {"ir_denominator", ir_denominator},
            {"params", params.to_json()},
            {"deterministic", deterministic},
            {"chunk_chars", chunk_chars},
            {"parallelism", parallelism},
            {"evidence", evidence},
            {"backend",
             {{"kind", backend.kind},
              {"url", backend.http.base_url},
              {"route", backend.http.route},
              {"auth_header", backend.http.auth_header},
              {"max_retries", backend.http.max_retries},
              {"initial_backoff_ms", backend.http.initial_backoff_ms},
              {"timeout_seconds", backend.http.timeout_seconds},
              {"context_budget_chars", backend.http.context_budget_chars},
              {"mock_fn_rate", backend.mock_fn_rate},
              {"mock_fp_rate", backend.mock_fp_rate},
              {"mock_seed", backend.mock_seed}}},
            {"cache_dir", cache_dir},
            {"cache", cache_enabled},
            {"mode", mode},
            {"ci_level", ci_level},
            {"no_preprocess", no_preprocess},
            {"svg", svg},
            {"synth", synth.to_json()},
            {"bench_matchers", bench_matchers}};
}

void RunConfig::merge_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    static const std::set<std::string> known = {
        "corpus", "output",   "profiles",    "conditions", "m",     "seed",          "percentile",
        "ir_denominator",     "params",      "deterministic",       "chunk_chars",   "parallelism",
        "evidence", "backend", "cache_dir",  "cache",      "mode",  "ci_level",      "no_preprocess",
        "svg",    "synth",    "bench_matchers"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ValidationError("unknown config key '" + k + "'");
    }
    try {
        corpus_dir = j.value("corpus", corpus_dir);
        output_dir = j.value("output", output_dir);
        profiles_path = j.value("profiles", profiles_path);
        if (j.contains("conditions")) conditions = j.at("conditions").get<std::vector<std::string>>();
        m = j.value("m", m);
        seed = j.value("seed", seed);
        if (j.contains("percentile")) {
            const auto& p = j.at("percentile");
            percentile = p.is_number() ? io::format_double(p.get<double>(), 4) : p.get<std::string>();
        }
        ir_denominator = j.value("ir_denominator", ir_denominator);
        if (j.contains("params")) {
            json merged = params.to_json();
            merged.update(j.at("params"));
            params = GenerationParams::from_json(merged);
        }
        deterministic = j.value("deterministic", deterministic);
        chunk_chars = j.value("chunk_chars", chunk_chars);
        parallelism = j.value("parallelism", parallelism);
        evidence = j.value("evidence", evidence);
        if (j.contains("backend")) {
            const auto& b = j.at("backend");
            backend.kind = b.value("kind", backend.kind);
            backend.http.base_url = b.value("url", backend.http.base_url);
            backend.http.route = b.value("route", backend.http.route);
            backend.http.auth_header = b.value("auth_header", backend.http.auth_header);
            backend.http.api_key = b.value("api_key", backend.http.api_key);
            backend.http.max_retries = b.value("max_retries", backend.http.max_retries);
            backend.http.initial_backoff_ms = b.value("initial_backoff_ms", backend.http.initial_backoff_ms);
            backend.http.timeout_seconds = b.value("timeout_seconds", backend.http.timeout_seconds);
            backend.http.context_budget_chars = b.value("context_budget_chars", backend.http.context_budget_chars);
            backend.mock_fn_rate = b.value("mock_fn_rate", backend.mock_fn_rate);
            backend.mock_fp_rate = b.value("mock_fp_rate", backend.mock_fp_rate);
            backend.mock_seed = b.value("mock_seed", backend.mock_seed);
        }
        cache_dir = j.value("cache_dir", cache_dir);
        cache_enabled = j.value("cache", cache_enabled);
        mode = j.value("mode", mode);
        ci_level = j.value("ci_level", ci_level);
        no_preprocess = j.value("no_preprocess", no_preprocess);
        svg = j.value("svg", svg);
        if (j.contains("synth")) {
            json merged = synth.to_json();
            merged.update(j.at("synth"));
            synth = SynthSpec::from_json(merged);
        }
        if (j.contains("bench_matchers")) bench_matchers = j.at("bench_matchers");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

void RunConfig::merge_env() {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    if (auto v = env("EHRPHENO_BACKEND_URL")) backend.http.base_url = *v;
    if (auto v = env("EHRPHENO_BACKEND_ROUTE")) backend.http.route = *v;
    if (auto v = env("EHRPHENO_API_KEY")) backend.http.api_key = *v;
    if (auto v = env("EHRPHENO_CACHE_DIR")) cache_dir = *v;
    if (auto v = env("EHRPHENO_PARALLELISM")) {
        try {
            parallelism = static_cast<std::size_t>(std::stoul(*v));
        } catch (const std::exception&) {
            throw ValidationError("EHRPHENO_PARALLELISM is not a number: " + *v);
        }
    }
}

// ---------------------------------------------------------------------------
// Command plumbing

namespace {

class CountingBackend : public CompletionBackend {
public:
    explicit CountingBackend(std::shared_ptr<CompletionBackend> inner) : inner_(std::move(inner)) {}
    CompletionResponse complete(const CompletionRequest& r) override {
        ++calls_;
        return inner_->complete(r);
    }
    std::string id() const override { return inner_->id(); }
    std::size_t calls() const { return calls_.load(); }

private:
    std::shared_ptr<CompletionBackend> inner_;
    std::atomic<std::size_t> calls_{0};
};

struct BackendStack {
    std::shared_ptr<CountingBackend> counter;
    std::shared_ptr<CachingBackend> caching;
    CompletionBackend* top = nullptr;

    std::size_t backend_calls() const { return counter->calls(); }
    std::size_t cache_hits() const { return caching ? caching->hits() : 0; }
};

using Clock = std::chrono::steady_clock;

struct Context {
    RunConfig cfg;
    std::string command;
    std::vector<ConditionProfile> profiles;
    std::ostream& out;
    std::ostream& err;
    Clock::time_point started = Clock::now();
    json timings = json::object();
    std::optional<BackendStack> backend;

    fs::path output() const { return cfg.output_dir; }
    fs::path corpus_dir() const { return cfg.corpus_dir.empty() ? output() : fs::path(cfg.corpus_dir); }
    fs::path cache_root() const { return cfg.cache_dir.empty() ? output() / "cache" : fs::path(cfg.cache_dir); }

    PipelineOptions pipeline_options() const {
        PipelineOptions o;
        o.params = cfg.deterministic ? cfg.params.deterministic() : cfg.params;
        o.chunk_chars = cfg.chunk_chars;
        o.parallelism = cfg.parallelism;
        o.evidence = cfg.evidence;
        return o;
    }

    /// Profiles selected by `conditions`, in profile order.
    std::vector<ConditionProfile> selected() const {
        if (cfg.conditions.empty()) return profiles;
        std::vector<ConditionProfile> out;
        for (const auto& c : cfg.conditions) out.push_back(find_profile(profiles, c));
        return out;
    }

    BackendStack& make_backend(const fs::path& cache_dir) {
        std::shared_ptr<CompletionBackend> base;
        if (cfg.backend.kind == "mock") {
            auto mc = MockConfig::defaults();
            mc.fn_rate = cfg.backend.mock_fn_rate;
            mc.fp_rate = cfg.backend.mock_fp_rate;
            mc.flip_seed = cfg.backend.mock_seed;
            base = std::make_shared<MockBackend>(profiles, mc);
        } else {
            if (cfg.backend.http.base_url.empty()) {
                throw ValidationError("no backend configured: pass --mock or --backend-url (or set EHRPHENO_BACKEND_URL)");
            }
            base = std::make_shared<HttpBackend>(cfg.backend.http);
        }
        BackendStack s;
        s.counter = std::make_shared<CountingBackend>(base);
        s.top = s.counter.get();
        if (cfg.cache_enabled) {
            s.caching = std::make_shared<CachingBackend>(s.counter, cache_dir);
            s.top = s.caching.get();
        }
        backend = std::move(s);
        return *backend;
    }

    Cohort cohort() const {
        const auto dir = corpus_dir();
        for (const char* f : {"documents.jsonl", "patients.jsonl", "labels.jsonl"}) {
            if (!fs::exists(dir / f)) throw ValidationError("missing corpus file " + (dir / f).string());
        }
        return load_cohort(dir / "documents.jsonl", dir / "patients.jsonl", dir / "labels.jsonl");
    }

    template <typename Fn>
    auto timed(const std::string& stage, Fn&& fn) {
        const auto t0 = Clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            timings[stage] = std::chrono::duration<double>(Clock::now() - t0).count();
        } else {
            auto r = fn();
            timings[stage] = std::chrono::duration<double>(Clock::now() - t0).count();
            return r;
        }
    }

    void write(const std::string& name, const std::string& content) {
        io::write_file_atomic(output() / name, content);
        out << "wrote " << (output() / name).string() << "\n";
    }

    void write_manifest() {
        const auto cfg_json = cfg.to_json();
        json m = {{"command", command},
                  {"config_hash", io::sha256_hex(cfg_json.dump())},
                  {"config", cfg_json},
                  {"seeds",
                   {{"seed", cfg.seed}, {"mock_seed", cfg.backend.mock_seed}}},
                  {"timings_seconds", timings},
                  {"total_seconds", std::chrono::duration<double>(Clock::now() - started).count()}};
        if (backend) {
            m["backend_id"] = backend->top->id();
            m["backend_calls"] = backend->backend_calls();
            m["cache_hits"] = backend->cache_hits();
        }
        io::write_file_atomic(output() / ("manifest_" + command + ".json"), m.dump(2) + "\n");
    }
};

std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string profile_csv(const std::vector<DocTypeProfile>& profiles) {
    auto sorted = profiles;
    std::sort(sorted.begin(), sorted.end(), [](const DocTypeProfile& a, const DocTypeProfile& b) {
        return a.ir != b.ir ? a.ir > b.ir : a.doc_type < b.doc_type;
    });
    std::string out = "doc_type,sampled_count,positive_count,ir\n";
    for (const auto& p : sorted) {
        out += io::csv_field(p.doc_type) + "," + std::to_string(p.sampled_count) + "," +
               std::to_string(p.positive_count) + "," + io::format_double(p.ir, 6) + "\n";
    }
    return out;
}

std::vector<DocTypeProfile> read_profile_csv(const fs::path& path) {
    std::istringstream in(io::read_file(path));
    std::string line;
    std::vector<DocTypeProfile> out;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (++n == 1 || line.empty()) continue;
        const auto f = parse_csv_line(line);
        if (f.size() != 4) throw ValidationError(path.string() + ":" + std::to_string(n) + ": expected 4 fields");
        try {
            DocTypeProfile p{f[0], std::stoi(f[1]), std::stoi(f[2]), 0.0};
            if (p.sampled_count < 0 || p.positive_count < 0 || p.positive_count > p.sampled_count) {
                throw ValidationError("inconsistent counts");
            }
            p.ir = p.sampled_count > 0 ? std::stod(f[3]) : 0.0;
            out.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string opt_fraction(const std::optional<double>& v) {
    return v ? io::format_double(*v, 6) : "undefined";
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_synth(Context& ctx) {
    auto spec = ctx.cfg.synth;
    spec.seed = ctx.cfg.seed;
    if (spec.prevalence.empty()) {
        for (const auto& p : ctx.selected()) spec.prevalence[p.name] = 0.3;
    }
    auto result = ctx.timed("generate", [&] { return generate_synthetic(spec, ctx.selected()); });
    fs::create_directories(ctx.output());
    write_cohort(result.cohort, ctx.output());
    ctx.out << "synthetic cohort: " << result.cohort.patients().size() << " patients, "
            << result.cohort.documents().size() << " documents in " << ctx.output().string() << "\n";
}

void cmd_profile(Context& ctx) {
    const auto cohort = ctx.timed("load", [&] { return ctx.cohort(); });
    auto& backend = ctx.make_backend(ctx.cache_root());
    const auto denom = ctx.cfg.ir_denominator == "m" ? IrDenominator::RequestedM : IrDenominator::Sampled;
    for (const auto& profile : ctx.selected()) {
        auto result = ctx.timed("profile_" + profile.name, [&] {
            return run_profiling(cohort, profile, *backend.top, ctx.pipeline_options(), ctx.cfg.m, ctx.cfg.seed,
                                 denom);
        });
        ctx.write("profile_" + profile.name + ".csv", profile_csv(result.profiles));
    }
}

void cmd_preprocess(Context& ctx) {
    const auto cohort = ctx.timed("load", [&] { return ctx.cohort(); });
    const double p = parse_percentile(ctx.cfg.percentile);
    for (const auto& profile : ctx.selected()) {
        const auto path = ctx.output() / ("profile_" + profile.name + ".csv");
        if (!fs::exists(path)) {
            throw ValidationError("missing profiling artifact " + path.string() + "; run the profile command first");
        }
        const auto plan = filter_document_types(read_profile_csv(path), p, profile.name);
        auto [corpus, stats] = ctx.timed("consolidate_" + profile.name,
                                         [&] { return consolidate(cohort, plan, profile); });
        ctx.write("consolidated_" + profile.name + ".jsonl", serialize_consolidated(corpus));
        std::string kept;
        for (const auto& t : plan.kept_types) kept += (kept.empty() ? "" : ";") + t;
        std::string csv =
            "condition,percentile,threshold,kept_type_count,kept_types,merged_documents,condition_free,"
            "words_before,words_after,words_fraction_remaining,positives_before,positives_retained,"
            "positive_retention\n";
        csv += io::csv_field(profile.name) + "," + io::format_double(p, 2) + "," +
               io::format_double(plan.threshold_value, 6) + "," + std::to_string(stats.kept_type_count) + "," +
               io::csv_field(kept) + "," + std::to_string(corpus.documents.size()) + "," +
               std::to_string(corpus.condition_free.size()) + "," + std::to_string(stats.words_before) + "," +
               std::to_string(stats.words_after) + "," + io::format_double(stats.words_fraction_remaining, 6) +
               "," + std::to_string(stats.positives_before) + "," + std::to_string(stats.positives_retained) +
               "," + opt_fraction(stats.positive_retention) + "\n";
        ctx.write("consolidation_" + profile.name + ".csv", csv);
    }
}

void cmd_detect(Context& ctx) {
    const auto cohort = ctx.timed("load", [&] { return ctx.cohort(); });
    const auto mode = *merge_mode_from_string(ctx.cfg.mode);
    std::vector<std::pair<ConditionProfile, std::optional<ConsolidatedCorpus>>> jobs;
    for (const auto& profile : ctx.selected()) {
        std::optional<ConsolidatedCorpus> corpus;
        if (!ctx.cfg.no_preprocess) {
            const auto path = ctx.output() / ("consolidated_" + profile.name + ".jsonl");
            if (!fs::exists(path)) {
                throw ValidationError("missing preprocess artifact " + path.string() +
                                      "; run the preprocess command first or pass --no-preprocess");
            }
            corpus = read_consolidated(path, profile.name);
            verify_provenance(cohort, *corpus);
        }
        jobs.emplace_back(profile, std::move(corpus));
    }
    std::sort(jobs.begin(), jobs.end(), [](const auto& a, const auto& b) { return a.first.name < b.first.name; });

    auto& backend = ctx.make_backend(ctx.cache_root());
    std::vector<json> records;
    for (const auto& [profile, corpus] : jobs) {
        auto result = ctx.timed("detect_" + profile.name, [&] {
            return run_detection(cohort, profile, corpus ? &*corpus : nullptr, *backend.top,
                                 ctx.pipeline_options());
        });
        auto recs = detection_records(result, mode);
        const auto positives = result.labels(mode);
        long n_pos = 0;
        for (const auto& [pid, l] : positives) n_pos += l;
        ctx.out << profile.name << ": " << n_pos << " of " << positives.size() << " patients positive ("
                << to_string(mode) << ")\n";
        records.insert(records.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    ctx.write("detections.jsonl", io::to_jsonl(records));
}

std::map<std::string, std::map<MergeMode, LabelMap>> load_detections(Context& ctx) {
    const auto path = ctx.output() / "detections.jsonl";
    if (!fs::exists(path)) throw ValidationError("missing detection artifact " + path.string() + "; run detect first");
    auto all = read_detection_labels(path);
    if (!ctx.cfg.conditions.empty()) {
        std::map<std::string, std::map<MergeMode, LabelMap>> picked;
        for (const auto& c : ctx.cfg.conditions) {
            auto it = all.find(c);
            if (it == all.end()) throw ValidationError("no detections for condition '" + c + "'");
            picked.insert(*it);
        }
        return picked;
    }
    return all;
}

LabelMap restrict_to(const LabelMap& m, const LabelMap& keys) {
    LabelMap out;
    for (const auto& [k, v] : keys) {
        auto it = m.find(k);
        if (it != m.end()) out[k] = it->second;
    }
    return out;
}

void cmd_evaluate(Context& ctx) {
    const auto cohort = ctx.timed("load", [&] { return ctx.cohort(); });
    const auto detections = load_detections(ctx);
    const auto mode = *merge_mode_from_string(ctx.cfg.mode);

    std::string csv = "condition,method,n,tp,fp,fn,tn";
    for (const char* m : {"sensitivity", "specificity", "ppv", "npv"}) {
        csv += std::string(",") + m + "," + m + "_low," + m + "_high";
    }
    csv += "\n";
    std::ostringstream txt;
    txt << "Detection accuracy against registry labels (" << io::format_double(ctx.cfg.ci_level * 100, 0)
        << "% Wilson intervals)\n";

    std::map<std::string, LabelMap> reference_by_condition;
    for (const auto& [cond, modes] : detections) {
        const auto reference = cohort.registry_labels(cond);
        reference_by_condition[cond] = reference;
        const auto icd = cohort.icd_labels(cond);
        std::vector<std::pair<std::string, ConfusionMatrix>> rows;
        if (!icd.empty()) rows.emplace_back("icd10", confusion(icd, restrict_to(reference, icd)));
        for (auto m : {MergeMode::Prompt1, MergeMode::Prompt2, MergeMode::Merged}) {
            rows.emplace_back(std::string(to_string(m)), confusion(restrict_to(modes.at(m), reference), reference));
        }
        if (!icd.empty()) {
            const auto ref_icd = restrict_to(reference, icd);
            const auto combined = combine_or(restrict_to(modes.at(mode), ref_icd), restrict_to(icd, ref_icd));
            rows.emplace_back("pipeline+icd", confusion(combined, ref_icd));
        }

        txt << "\n" << cond << " (pipeline mode " << to_string(mode) << ")\n";
        char head[160];
        std::snprintf(head, sizeof head, "  %-13s %6s  %-22s %-22s %-22s %-22s\n", "method", "n", "sensitivity",
                      "specificity", "ppv", "npv");
        txt << head;
        for (const auto& [name, cm] : rows) {
            const auto ms = metrics(cm, ctx.cfg.ci_level);
            csv += io::csv_field(cond) + "," + name + "," + std::to_string(cm.total()) + "," + std::to_string(cm.tp) +
                   "," + std::to_string(cm.fp) + "," + std::to_string(cm.fn) + "," + std::to_string(cm.tn);
            for (const auto* metric : {&ms.sensitivity, &ms.specificity, &ms.ppv, &ms.npv}) {
                if (metric->value) {
                    csv += "," + io::format_double(*metric->value, 6) + "," + io::format_double(metric->ci.low, 6) +
                           "," + io::format_double(metric->ci.high, 6);
                } else {
                    csv += ",undefined,,";
                }
            }
            csv += "\n";
            char row[256];
            std::snprintf(row, sizeof row, "  %-13s %6ld  %-22s %-22s %-22s %-22s\n", name.c_str(), cm.total(),
                          format_metric(ms.sensitivity).c_str(), format_metric(ms.specificity).c_str(),
                          format_metric(ms.ppv).c_str(), format_metric(ms.npv).c_str());
            txt << row;
        }
    }
    ctx.write("evaluation.csv", csv);
    ctx.write("evaluation.txt", txt.str());
    ctx.out << txt.str();

    std::string summary = "group,n,field,value\n";
    for (const auto& g : cohort_summary(cohort, reference_by_condition)) {
        const auto prefix = io::csv_field(g.name) + "," + std::to_string(g.n) + ",";
        for (const auto& [cond, prev] : g.prevalence) {
            summary += prefix + io::csv_field("prevalence:" + cond) + "," + io::format_double(prev, 4) + "\n";
        }
        for (const auto& [attr, s] : g.numeric) {
            summary += prefix + io::csv_field(attr + ":median (IQR)") + "," +
                       io::csv_field(io::format_double(s.median, 1) + " (" + io::format_double(s.q1, 1) + "-" +
                                     io::format_double(s.q3, 1) + ")") +
                       "\n";
        }
        for (const auto& [attr, counts] : g.categorical) {
            for (const auto& [cat, count] : counts) {
                summary += prefix + io::csv_field(attr + "=" + cat) + "," + std::to_string(count) + "\n";
            }
        }
    }
    ctx.write("cohort_summary.csv", summary);
}

std::string trend_svg(const std::map<std::string, std::vector<TrendPoint>>& trends) {
    const int width = 720, panel = 240, left = 60, right = 20, top = 36, plot_h = 160;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << panel * std::max<std::size_t>(1, trends.size()) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    int k = 0;
    for (const auto& [cond, points] : trends) {
        const int y0 = k++ * panel;
        double ymax = 0.0;
        for (const auto& p : points) ymax = std::max({ymax, p.reference_pct, p.predicted_pct});
        ymax = std::max(0.1, std::ceil(ymax * 10.0 + 1e-9) / 10.0);
        const double plot_w = width - left - right;
        auto x = [&](std::size_t i) {
            return left + (points.size() > 1 ? plot_w * static_cast<double>(i) / (points.size() - 1) : plot_w / 2);
        };
        auto y = [&](double v) { return y0 + top + plot_h * (1.0 - v / ymax); };
        s << "<text x=\"" << left << "\" y=\"" << y0 + 20 << "\" font-size=\"13\">" << cond
          << ": monthly share of admissions with the condition</text>\n";
        s << "<line x1=\"" << left << "\" y1=\"" << y(0) << "\" x2=\"" << width - right << "\" y2=\"" << y(0)
          << "\" stroke=\"#444\"/>\n";
        s << "<line x1=\"" << left << "\" y1=\"" << y(0) << "\" x2=\"" << left << "\" y2=\"" << y(ymax)
          << "\" stroke=\"#444\"/>\n";
        for (double t : {0.0, ymax / 2, ymax}) {
            s << "<text x=\"" << left - 6 << "\" y=\"" << y(t) + 4 << "\" text-anchor=\"end\">"
              << io::format_double(t * 100, 0) << "%</text>\n";
        }
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points.size() > 12 && i % 2) continue;
            s << "<text x=\"" << x(i) << "\" y=\"" << y(0) + 14 << "\" text-anchor=\"middle\">" << points[i].month
              << "</text>\n";
        }
        auto series = [&](bool predicted, const char* colour, const char* dash) {
            s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"" << dash << " points=\"";
            for (std::size_t i = 0; i < points.size(); ++i) {
                s << (i ? " " : "") << io::format_double(x(i), 1) << ","
                  << io::format_double(y(predicted ? points[i].predicted_pct : points[i].reference_pct), 1);
            }
            s << "\"/>\n";
        };
        series(false, "#1f77b4", "");
        series(true, "#d62728", " stroke-dasharray=\"5,3\"");
        s << "<text x=\"" << width - right - 220 << "\" y=\"" << y0 + 20 << "\" fill=\"#1f77b4\">reference</text>\n";
        s << "<text x=\"" << width - right - 140 << "\" y=\"" << y0 + 20 << "\" fill=\"#d62728\">pipeline</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void cmd_trend(Context& ctx) {
    const auto cohort = ctx.timed("load", [&] { return ctx.cohort(); });
    const auto detections = load_detections(ctx);
    const auto mode = *merge_mode_from_string(ctx.cfg.mode);
    std::string csv = "condition,month,n,reference_pct,predicted_pct\n";
    std::map<std::string, std::vector<TrendPoint>> trends;
    for (const auto& [cond, modes] : detections) {
        auto points = monthly_trend(cohort, modes.at(mode), cohort.registry_labels(cond));
        for (const auto& p : points) {
            csv += io::csv_field(cond) + "," + p.month + "," + std::to_string(p.n) + "," +
                   io::format_double(p.reference_pct, 6) + "," + io::format_double(p.predicted_pct, 6) + "\n";
        }
        trends[cond] = std::move(points);
    }
    ctx.write("trend.csv", csv);
    if (ctx.cfg.svg) ctx.write("trend.svg", trend_svg(trends));
}

void cmd_bench(Context& ctx) {
    auto& backend = ctx.make_backend(ctx.cache_root() / "bench");
    const auto questions = with_matcher_overrides(builtin_questions(), ctx.cfg.bench_matchers);
    const auto result = ctx.timed("bench", [&] {
        return run_benchmark(*backend.top, questions, ctx.pipeline_options().params);
    });
    fs::create_directories(ctx.output());
    ctx.write("bench.csv", bench_csv(result));
    ctx.out << "bench: " << result.correct << "/" << questions.size() << " correct ("
            << io::format_double(result.accuracy * 100, 0) << "%) in " << io::format_double(result.elapsed_seconds, 2)
            << " s against " << result.backend_id << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Condition phenotyping from clinical notes with a text-completion model", "ehrpheno"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    bool print_config = false;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");

    RunConfig flags;
    std::vector<std::string> prevalence;
    std::string percentile;
    bool mock = false, no_cache = false, no_svg = false;
    std::map<std::string, CLI::Option*> o;
    o["corpus"] = app.add_option("--corpus", flags.corpus_dir, "Directory with the three corpus files");
    o["output"] = app.add_option("--out", flags.output_dir, "Output directory");
    o["profiles"] = app.add_option("--profiles", flags.profiles_path, "Condition-profile JSON file");
    o["conditions"] = app.add_option("--condition", flags.conditions, "Condition to run (repeatable)");
    o["m"] = app.add_option("--m", flags.m, "Notes sampled per document type");
    o["seed"] = app.add_option("--seed", flags.seed, "Seed for sampling and synthetic generation");
    o["percentile"] = app.add_option("--percentile", percentile, "IR threshold: 0, q1, q2 or a number");
    o["ir_denominator"] = app.add_option("--ir-denominator", flags.ir_denominator, "sampled or m");
    o["temperature"] = app.add_option("--temperature", flags.params.temperature);
    o["top_p"] = app.add_option("--top-p", flags.params.top_p);
    o["top_k"] = app.add_option("--top-k", flags.params.top_k);
    o["max_tokens"] = app.add_option("--max-tokens", flags.params.max_new_tokens);
    o["model"] = app.add_option("--model", flags.params.model_id);
    o["deterministic"] = app.add_flag("--deterministic", flags.deterministic, "Force temperature 0");
    o["chunk_chars"] = app.add_option("--chunk-chars", flags.chunk_chars, "Character budget per chunk");
    o["parallelism"] = app.add_option("--parallelism", flags.parallelism, "Concurrent backend requests");
    o["evidence"] = app.add_flag("--evidence", flags.evidence, "Request highlighted evidence");
    o["mock"] = app.add_flag("--mock", mock, "Use the built-in mock backend");
    o["url"] = app.add_option("--backend-url", flags.backend.http.base_url, "http://host:port");
    o["route"] = app.add_option("--backend-route", flags.backend.http.route);
    o["api_key"] = app.add_option("--api-key", flags.backend.http.api_key);
    o["max_retries"] = app.add_option("--max-retries", flags.backend.http.max_retries);
    o["timeout"] = app.add_option("--timeout", flags.backend.http.timeout_seconds, "Seconds per request");
    o["fn_rate"] = app.add_option("--mock-fn-rate", flags.backend.mock_fn_rate);
    o["fp_rate"] = app.add_option("--mock-fp-rate", flags.backend.mock_fp_rate);
    o["mock_seed"] = app.add_option("--mock-seed", flags.backend.mock_seed);
    o["cache_dir"] = app.add_option("--cache-dir", flags.cache_dir);
    o["no_cache"] = app.add_flag("--no-cache", no_cache, "Disable the response cache");
    o["mode"] = app.add_option("--mode", flags.mode, "prompt1, prompt2 or merged");
    o["ci_level"] = app.add_option("--ci-level", flags.ci_level);
    o["no_preprocess"] = app.add_flag("--no-preprocess", flags.no_preprocess, "Detect over raw notes");
    o["no_svg"] = app.add_flag("--no-svg", no_svg, "Skip the trend chart");
    o["n_patients"] = app.add_option("--n-patients", flags.synth.n_patients);
    o["prevalence"] = app.add_option("--prevalence", prevalence, "condition=fraction (repeatable)");
    o["evidence_fraction"] = app.add_option("--evidence-fraction", flags.synth.evidence_fraction);
    o["distractor_rate"] = app.add_option("--distractor-rate", flags.synth.distractor_rate);
    o["docs_min"] = app.add_option("--docs-min", flags.synth.min_docs_per_patient);
    o["docs_max"] = app.add_option("--docs-max", flags.synth.max_docs_per_patient);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "Generate a synthetic cohort"},
        {"profile", "Score document types by information relevance"},
        {"preprocess", "Filter document types and merge keyword sentences"},
        {"detect", "Run both prompt paths and label patients"},
        {"evaluate", "Compare labels with the reference standard"},
        {"trend", "Monthly share of positives"},
        {"bench", "Run the ten-question benchmark"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        Context ctx{RunConfig{}, app.get_subcommands().front()->get_name(), {}, out, err};
        auto& cfg = ctx.cfg;
        if (!config_path.empty()) {
            try {
                cfg.merge_json(json::parse(io::read_file(config_path)));
            } catch (const json::parse_error& e) {
                throw ValidationError(config_path + ": " + e.what());
            }
        }
        cfg.merge_env();
        auto set = [&](const char* key) { return o.at(key)->count() > 0; };
        if (set("corpus")) cfg.corpus_dir = flags.corpus_dir;
        if (set("output")) cfg.output_dir = flags.output_dir;
        if (set("profiles")) cfg.profiles_path = flags.profiles_path;
        if (set("conditions")) cfg.conditions = flags.conditions;
        if (set("m")) cfg.m = flags.m;
        if (set("seed")) cfg.seed = flags.seed;
        if (set("percentile")) cfg.percentile = percentile;
        if (set("ir_denominator")) cfg.ir_denominator = flags.ir_denominator;
        if (set("temperature")) cfg.params.temperature = flags.params.temperature;
        if (set("top_p")) cfg.params.top_p = flags.params.top_p;
        if (set("top_k")) cfg.params.top_k = flags.params.top_k;
        if (set("max_tokens")) cfg.params.max_new_tokens = flags.params.max_new_tokens;
        if (set("model")) cfg.params.model_id = flags.params.model_id;
        if (set("deterministic")) cfg.deterministic = true;
        if (set("chunk_chars")) cfg.chunk_chars = flags.chunk_chars;
        if (set("parallelism")) cfg.parallelism = flags.parallelism;
        if (set("evidence")) cfg.evidence = true;
        if (set("mock")) cfg.backend.kind = "mock";
        if (set("url")) {
            cfg.backend.http.base_url = flags.backend.http.base_url;
            if (!set("mock")) cfg.backend.kind = "http";
        }
        if (set("route")) cfg.backend.http.route = flags.backend.http.route;
        if (set("api_key")) cfg.backend.http.api_key = flags.backend.http.api_key;
        if (set("max_retries")) cfg.backend.http.max_retries = flags.backend.http.max_retries;
        if (set("timeout")) cfg.backend.http.timeout_seconds = flags.backend.http.timeout_seconds;
        if (set("fn_rate")) cfg.backend.mock_fn_rate = flags.backend.mock_fn_rate;
        if (set("fp_rate")) cfg.backend.mock_fp_rate = flags.backend.mock_fp_rate;
        if (set("mock_seed")) cfg.backend.mock_seed = flags.backend.mock_seed;
        if (set("cache_dir")) cfg.cache_dir = flags.cache_dir;
        if (set("no_cache")) cfg.cache_enabled = false;
        if (set("mode")) cfg.mode = flags.mode;
        if (set("ci_level")) cfg.ci_level = flags.ci_level;
        if (set("no_preprocess")) cfg.no_preprocess = true;
        if (set("no_svg")) cfg.svg = false;
        if (set("n_patients")) cfg.synth.n_patients = flags.synth.n_patients;
        if (set("evidence_fraction")) cfg.synth.evidence_fraction = flags.synth.evidence_fraction;
        if (set("distractor_rate")) cfg.synth.distractor_rate = flags.synth.distractor_rate;
        if (set("docs_min")) cfg.synth.min_docs_per_patient = flags.synth.min_docs_per_patient;
        if (set("docs_max")) cfg.synth.max_docs_per_patient = flags.synth.max_docs_per_patient;
        for (const auto& kv : prevalence) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ValidationError("--prevalence expects condition=fraction, got " + kv);
            try {
                cfg.synth.prevalence[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
            } catch (const std::exception&) {
                throw ValidationError("--prevalence fraction is not a number: " + kv);
            }
        }
        cfg.validate();

        if (print_config) {
            out << cfg.to_json().dump(2) << "\n";
            return 0;
        }

        ctx.profiles = cfg.profiles_path.empty() ? builtin_profiles() : load_profiles(cfg.profiles_path);
        for (const auto& c : cfg.conditions) find_profile(ctx.profiles, c);
        fs::create_directories(ctx.output());

        const std::map<std::string, void (*)(Context&)> handlers = {
            {"synth", cmd_synth},       {"profile", cmd_profile},   {"preprocess", cmd_preprocess},
            {"detect", cmd_detect},     {"evaluate", cmd_evaluate}, {"trend", cmd_trend},
            {"bench", cmd_bench}};
        handlers.at(ctx.command)(ctx);
        ctx.write_manifest();
        if (ctx.backend) {
            out << "backend calls: " << ctx.backend->backend_calls() << ", cache hits: " << ctx.backend->cache_hits()
                << "\n";
        }
        return 0;
    } catch (const BackendError& e) {
        err << "backend error";
        if (e.status()) err << " (status " << e.status() << ")";
        err << ": " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ehrpheno
