#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ehrpheno/inference.hpp"

namespace ehrpheno {

/// Grading rule for a free-text answer. Term groups are lists of
/// alternatives; a group is present when any alternative matches
/// (case-insensitive, word-bounded).
struct AnswerMatcher {
    enum class Kind {
        /// First standalone yes/no in the answer equals `polarity`.
        LeadingPolarity,
        /// `number` appears as a standalone number.
        Number,
        /// Every group in `required` is present.
        RequiredTerms,
        /// Every group in `required` is present, the answer does not open
        /// with "no" and it carries an affirmative cue ("likely", "yes", ...).
        AffirmativeTerms,
        /// Every group in `required` appears in some clause free of
        /// negation, and every group in `negated` in a negated clause.
        MixedPolarity,
    };
    Kind kind = Kind::RequiredTerms;
    std::string polarity;
    double number = 0.0;
    std::vector<std::vector<std::string>> required;
    std::vector<std::vector<std::string>> negated;

    /// Total: any input string yields true or false.
    bool matches(std::string_view response) const;

    nlohmann::json to_json() const;
    static AnswerMatcher from_json(const nlohmann::json& j);
};

struct BenchQuestion {
    std::string id;
    std::string prompt;
    std::string expected;
    AnswerMatcher matcher;
};

/// The ten built-in questions with their reference answers.
const std::vector<BenchQuestion>& builtin_questions();

/// Replaces matchers by question id from {"Q3": {matcher}, ...}. Throws
/// ValidationError on an unknown id or malformed matcher.
std::vector<BenchQuestion> with_matcher_overrides(std::vector<BenchQuestion> questions,
                                                  const nlohmann::json& overrides);

struct QuestionResult {
    std::string id;
    bool correct = false;
    double latency_ms = 0.0;
    std::string response;
    /// Backend failure message; empty on success.
    std::string error;
};

struct BenchResult {
    std::vector<QuestionResult> questions;
    int correct = 0;
    double accuracy = 0.0;
    double elapsed_seconds = 0.0;
    std::string backend_id;
};

/// Asks the questions one at a time. A backend failure marks that question
/// incorrect and the run continues.
BenchResult run_benchmark(CompletionBackend& backend, const std::vector<BenchQuestion>& questions,
                          const GenerationParams& params);

/// One row per question plus a summary row.
std::string bench_csv(const BenchResult& result);

}  // namespace ehrpheno
