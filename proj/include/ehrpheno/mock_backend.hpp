#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "ehrpheno/inference.hpp"
#include "ehrpheno/prompting.hpp"

namespace ehrpheno {

/// One key-value shape echoed back for extraction prompts. `format` uses
/// std::regex_replace syntax ($1, $2, ...).
struct LabEchoPattern {
    std::string regex;
    std::string format;
};

struct MockTrigger {
    /// Word-bounded, case-insensitive tokens that make an inference prompt
    /// answer "Yes".
    std::vector<std::string> positive_tokens;
    /// Cheap prefilter: a sentence is scanned with `lab_patterns` only when it
    /// contains one of these (lower-case) substrings.
    std::vector<std::string> lab_cues;
    std::vector<LabEchoPattern> lab_patterns;
    /// Used in the "There are no key-value pairs of ..." reply.
    std::string analyte_phrase;
};

struct MockConfig {
    std::map<std::string, MockTrigger> triggers;
    /// Probability that an inference answer which should be "Yes" comes back
    /// "No", and the reverse. Flips are a pure function of the prompt bytes
    /// and `flip_seed`.
    double fn_rate = 0.0;
    double fp_rate = 0.0;
    std::uint64_t flip_seed = 0;

    /// Triggers for the built-in conditions.
    static MockConfig defaults();
};

/// Deterministic stand-in for a language model. It recognises prompts
/// rendered from the given profiles, pulls the embedded note text back out
/// and answers in the shapes a real model produces:
///   inference:  "Yes, the clinical text identified <condition>..." or
///               "No, there is no clear mention of <condition>..."
///   extraction: one "key: value unit" line per lab match, or
///               "There are no key-value pairs of <analyte> in the given text."
///   evidence:   the inference answer plus quoted supporting sentences.
class MockBackend : public CompletionBackend {
public:
    MockBackend(std::vector<ConditionProfile> profiles, MockConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string id() const override { return "mock"; }

    std::string respond(const std::string& prompt) const;
    std::size_t calls() const { return calls_.load(); }

private:
    struct Compiled {
        std::vector<std::string> tokens;
        std::vector<std::string> cues;
        std::vector<std::pair<std::regex, std::string>> patterns;
        std::string analyte_phrase;
    };

    struct Match {
        const ConditionProfile* profile;
        PromptKind kind;
        std::string text;
    };

    std::optional<Match> identify(const std::string& prompt) const;
    bool truth(const Compiled& c, const std::string& lowered) const;
    bool flipped(const std::string& prompt, double rate) const;
    std::string inference_answer(const Match& m, const std::string& prompt) const;
    std::string extraction_answer(const Match& m) const;
    const Compiled& compiled_for(const ConditionProfile& p) const;

    std::vector<ConditionProfile> profiles_;
    MockConfig config_;
    std::map<std::string, Compiled> compiled_;
    mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace ehrpheno
