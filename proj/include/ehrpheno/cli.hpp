#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehrpheno/http_backend.hpp"
#include "ehrpheno/inference.hpp"
#include "ehrpheno/synth.hpp"

namespace ehrpheno {

struct BackendSettings {
    /// "http" or "mock"
    std::string kind = "http";
    HttpBackendConfig http;
    double mock_fn_rate = 0.0;
    double mock_fp_rate = 0.0;
    std::uint64_t mock_seed = 0;
};

/// Resolved settings shared by every subcommand. Precedence, lowest first:
/// built-in defaults, config file, environment, command-line flags.
struct RunConfig {
    /// Directory holding documents.jsonl, patients.jsonl and labels.jsonl.
    /// Defaults to the output directory.
    std::string corpus_dir;
    std::string output_dir = "out";
    /// Condition-profile file; empty means the built-in profiles.
    std::string profiles_path;
    /// Conditions to run; empty means every profile.
    std::vector<std::string> conditions;
    int m = 200;
    std::uint64_t seed = 0;
    std::string percentile = "q1";
    /// "sampled" or "m"
    std::string ir_denominator = "sampled";
    GenerationParams params;
    bool deterministic = false;
    std::size_t chunk_chars = kDefaultChunkChars;
    std::size_t parallelism = 4;
    bool evidence = false;
    BackendSettings backend;
    /// Empty means <output_dir>/cache.
    std::string cache_dir;
    bool cache_enabled = true;
    /// Mode written as "label" in detections and used for pipeline+icd.
    std::string mode = "merged";
    double ci_level = 0.95;
    bool no_preprocess = false;
    bool svg = true;
    SynthSpec synth;
    /// Bench matcher overrides keyed by question id.
    nlohmann::json bench_matchers = nlohmann::json::object();

    /// Throws ValidationError on out-of-range values.
    void validate() const;
    nlohmann::json to_json() const;
    /// Fields absent from `j` keep their current value.
    void merge_json(const nlohmann::json& j);
    /// EHRPHENO_BACKEND_URL, EHRPHENO_BACKEND_ROUTE, EHRPHENO_API_KEY,
    /// EHRPHENO_PARALLELISM and EHRPHENO_CACHE_DIR.
    void merge_env();
};

/// Entry point behind the executable. Returns 0 on success, 1 on invalid
/// input or configuration, 2 when the completion backend fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ehrpheno
