#include "ehrpheno/mock_backend.hpp"

#include <algorithm>

#include "ehrpheno/rng.hpp"
#include "ehrpheno/text.hpp"

namespace ehrpheno {

MockConfig MockConfig::defaults() {
    MockConfig c;
    c.triggers["ami"] = {
        {"acute myocardial infarction", "myocardial infarction", "ami", "stemi", "nstemi",
         "non-stemi"},
        {"troponin"},
        {{R"(\b(troponin[a-z ]*?)\s*:?\s*(\d+(?:\.\d+)?)\s*(ng/ml|ng/l)\b)", "$1: $2 $3"}},
        "troponin level"};
    c.triggers["diabetes"] = {
        {"diabetes", "diabetic", "dm", "metformin", "insulin"},
        {"glucose", "sugar"},
        {{R"(\b((?:poct |blood |random |fasting )*(?:glucose|sugar)[^:.\n\d]*?)\s*:?\s*(\d+(?:\.\d+)?)\s*(mmol/l)\b)",
          "$1: $2 $3"}},
        "blood sugar/glucose levels"};
    c.triggers["hypertension"] = {
        {"hypertension", "htn", "hypertensive", "high blood pressure"},
        {"systolic", "diastolic", "bp", "pressure"},
        {{R"(\b(systolic|diastolic)\s*:?\s*(\d{2,3})\b)", "blood pressure $1: $2"},
         {R"(\b(?:bp|blood pressure)\s*:?\s*(\d{2,3})\s*/\s*(\d{2,3})\b)",
          "blood pressure: $1/$2 mmHg"}},
        "blood pressure"};
    return c;
}

MockBackend::MockBackend(std::vector<ConditionProfile> profiles, MockConfig config)
    : profiles_(std::move(profiles)), config_(std::move(config)) {
    for (const auto& p : profiles_) {
        Compiled c;
        auto it = config_.triggers.find(p.name);
        if (it != config_.triggers.end()) {
            c.tokens = it->second.positive_tokens;
            c.cues = it->second.lab_cues;
            c.analyte_phrase = it->second.analyte_phrase;
            for (const auto& pat : it->second.lab_patterns) {
                c.patterns.emplace_back(
                    std::regex(pat.regex, std::regex::ECMAScript | std::regex::icase), pat.format);
            }
        } else {
            c.tokens = p.abbreviation_hints;
            c.tokens.push_back(p.name);
            c.tokens.push_back(p.display_name);
            c.analyte_phrase = std::string(to_string(p.rule.analyte));
        }
        for (auto& t : c.tokens) t = text::to_lower(t);
        for (auto& t : c.cues) t = text::to_lower(t);
        compiled_.emplace(p.name, std::move(c));
    }
}

const MockBackend::Compiled& MockBackend::compiled_for(const ConditionProfile& p) const {
    return compiled_.at(p.name);
}

std::optional<MockBackend::Match> MockBackend::identify(const std::string& prompt) const {
    // Evidence first: its frame extends the inference frame.
    for (auto kind : {PromptKind::Evidence, PromptKind::Inference, PromptKind::Extraction}) {
        for (const auto& p : profiles_) {
            auto [prefix, suffix] = template_frame(p, kind);
            if (prompt.size() < prefix.size() + suffix.size()) continue;
            if (prompt.compare(0, prefix.size(), prefix) != 0) continue;
            if (prompt.compare(prompt.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
            return Match{&p, kind,
                         prompt.substr(prefix.size(), prompt.size() - prefix.size() - suffix.size())};
        }
    }
    return std::nullopt;
}

bool MockBackend::truth(const Compiled& c, const std::string& lowered) const {
    return std::any_of(c.tokens.begin(), c.tokens.end(),
                       [&](const std::string& t) { return text::contains_bounded(lowered, t); });
}

bool MockBackend::flipped(const std::string& prompt, double rate) const {
    if (rate <= 0.0) return false;
    return unit_interval(splitmix64(fnv1a64(prompt) ^ config_.flip_seed)) < rate;
}

std::string MockBackend::inference_answer(const Match& m, const std::string& prompt) const {
    const auto& c = compiled_for(*m.profile);
    const auto lowered = text::to_lower(m.text);
    const bool actual = truth(c, lowered);
    const bool positive = actual ? !flipped(prompt, config_.fn_rate) : flipped(prompt, config_.fp_rate);
    if (!positive) {
        return "No, there is no clear mention of " + m.profile->display_name +
               " in the given clinical text.";
    }
    std::string out = "Yes, the clinical text identified " + m.profile->display_name + ".";
    if (m.kind == PromptKind::Evidence && actual) {
        for (const auto& s : text::split_sentences(m.text)) {
            auto sentence = m.text.substr(s.offset, s.length);
            if (truth(c, text::to_lower(sentence))) out += "\nSupporting text: \"" + sentence + "\"";
        }
    }
    return out;
}

std::string MockBackend::extraction_answer(const Match& m) const {
    const auto& c = compiled_for(*m.profile);
    std::vector<std::string> lines;
    for (const auto& s : text::split_sentences(m.text)) {
        const auto sentence = m.text.substr(s.offset, s.length);
        const auto lowered = text::to_lower(sentence);
        if (std::none_of(c.cues.begin(), c.cues.end(), [&](const std::string& cue) {
                return lowered.find(cue) != std::string::npos;
            })) {
            continue;
        }
        std::vector<std::pair<std::size_t, std::string>> found;
        for (const auto& [re, fmt] : c.patterns) {
            for (std::sregex_iterator it(sentence.begin(), sentence.end(), re), end; it != end; ++it) {
                found.emplace_back(static_cast<std::size_t>(it->position()), it->format(fmt));
            }
        }
        std::stable_sort(found.begin(), found.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& f : found) lines.push_back(std::move(f.second));
    }
    if (lines.empty()) {
        return "There are no key-value pairs of " + c.analyte_phrase + " in the given text.";
    }
    return text::join(lines, "\n");
}

std::string MockBackend::respond(const std::string& prompt) const {
    auto m = identify(prompt);
    if (!m) return "I am not able to answer that from the given text.";
    if (m->kind == PromptKind::Extraction) return extraction_answer(*m);
    return inference_answer(*m, prompt);
}

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
    ++calls_;
    return {respond(request.prompt), 0.0, id()};
}

}  // namespace ehrpheno
