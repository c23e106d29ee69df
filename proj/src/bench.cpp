#include "ehrpheno/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"
#include "ehrpheno/text.hpp"

namespace ehrpheno {

using nlohmann::json;

namespace {

using Kind = AnswerMatcher::Kind;

bool group_present(std::string_view lowered, const std::vector<std::string>& alternatives) {
    for (const auto& a : alternatives) {
        if (text::keyword_matches(lowered, text::to_lower(a))) return true;
    }
    return false;
}

std::optional<std::string> first_polarity(std::string_view lowered) {
    const auto yes = text::find_bounded(lowered, "yes");
    const auto no = text::find_bounded(lowered, "no");
    if (yes.empty() && no.empty()) return std::nullopt;
    if (no.empty() || (!yes.empty() && yes.front() < no.front())) return "yes";
    return "no";
}

bool has_number(std::string_view s, double target) {
    std::size_t i = 0;
    while (i < s.size()) {
        const bool starts = std::isdigit(static_cast<unsigned char>(s[i])) &&
                            (i == 0 || !(text::is_word_char(s[i - 1]) || s[i - 1] == '.'));
        if (!starts) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
        while (j > i && s[j - 1] == '.') --j;
        const std::string token(s.substr(i, j - i));
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() + token.size() && std::fabs(v - target) < 1e-9) return true;
        i = j;
    }
    return false;
}

const std::vector<std::string>& negation_cues() {
    static const std::vector<std::string> cues = {"no",      "not",    "without", "absence", "absent",
                                                  "denies",  "negative", "ruled out", "none", "never"};
    return cues;
}

const std::vector<std::string>& affirmative_cues() {
    static const std::vector<std::string> cues = {"yes",       "likely",    "highly",   "probable",
                                                  "probably",  "certainly", "certain",  "suggests",
                                                  "suggest",   "consistent with", "indicative",
                                                  "indicates", "high likelihood"};
    return cues;
}

std::vector<std::string> clauses(std::string_view lowered) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto t = text::trim(cur);
        if (!t.empty()) out.emplace_back(t);
        cur.clear();
    };
    for (std::size_t i = 0; i < lowered.size(); ++i) {
        const char c = lowered[i];
        if (c == '.' || c == ';' || c == ',' || c == '\n') {
            flush();
        } else if (lowered.compare(i, 5, " but ") == 0) {
            flush();
            i += 3;
        } else {
            cur += c;
        }
    }
    flush();
    return out;
}

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::LeadingPolarity: return "leading_polarity";
        case Kind::Number: return "number";
        case Kind::RequiredTerms: return "required_terms";
        case Kind::AffirmativeTerms: return "affirmative_terms";
        case Kind::MixedPolarity: return "mixed_polarity";
    }
    return "?";
}

AnswerMatcher polarity(std::string p) {
    AnswerMatcher m;
    m.kind = Kind::LeadingPolarity;
    m.polarity = std::move(p);
    return m;
}

AnswerMatcher terms(Kind k, std::vector<std::vector<std::string>> required,
                    std::vector<std::vector<std::string>> negated = {}) {
    AnswerMatcher m;
    m.kind = k;
    m.required = std::move(required);
    m.negated = std::move(negated);
    return m;
}

}  // namespace

bool AnswerMatcher::matches(std::string_view response) const {
    const auto lowered = text::to_lower(response);
    switch (kind) {
        case Kind::LeadingPolarity: {
            auto p = first_polarity(lowered);
            return p && *p == text::to_lower(polarity);
        }
        case Kind::Number:
            return has_number(lowered, number);
        case Kind::RequiredTerms:
            for (const auto& g : required) {
                if (!group_present(lowered, g)) return false;
            }
            return true;
        case Kind::AffirmativeTerms: {
            for (const auto& g : required) {
                if (!group_present(lowered, g)) return false;
            }
            if (first_polarity(lowered) == std::optional<std::string>("no") &&
                text::find_bounded(lowered, "no").front() < 10) {
                return false;
            }
            return group_present(lowered, affirmative_cues());
        }
        case Kind::MixedPolarity: {
            const auto parts = clauses(lowered);
            auto negated_clause = [&](const std::string& c) { return group_present(c, negation_cues()); };
            for (const auto& g : required) {
                bool ok = false;
                for (const auto& c : parts) ok = ok || (group_present(c, g) && !negated_clause(c));
                if (!ok) return false;
            }
            for (const auto& g : negated) {
                bool ok = false;
                for (const auto& c : parts) ok = ok || (group_present(c, g) && negated_clause(c));
                if (!ok) return false;
            }
            return true;
        }
    }
    return false;
}

json AnswerMatcher::to_json() const {
    json j = {{"kind", kind_name(kind)}};
    if (kind == Kind::LeadingPolarity) j["polarity"] = polarity;
    if (kind == Kind::Number) j["number"] = number;
    if (!required.empty()) j["required"] = required;
    if (!negated.empty()) j["negated"] = negated;
    return j;
}

AnswerMatcher AnswerMatcher::from_json(const json& j) {
    AnswerMatcher m;
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "leading_polarity") m.kind = Kind::LeadingPolarity;
        else if (kind == "number") m.kind = Kind::Number;
        else if (kind == "required_terms") m.kind = Kind::RequiredTerms;
        else if (kind == "affirmative_terms") m.kind = Kind::AffirmativeTerms;
        else if (kind == "mixed_polarity") m.kind = Kind::MixedPolarity;
        else throw ValidationError("unknown matcher kind '" + kind + "'");
        m.polarity = j.value("polarity", std::string());
        m.number = j.value("number", 0.0);
        if (j.contains("required")) m.required = j.at("required").get<std::vector<std::vector<std::string>>>();
        if (j.contains("negated")) m.negated = j.at("negated").get<std::vector<std::vector<std::string>>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad matcher: ") + e.what());
    }
    if (m.kind == Kind::LeadingPolarity && m.polarity != "yes" && m.polarity != "no") {
        throw ValidationError("leading_polarity matcher needs polarity yes or no");
    }
    return m;
}

const std::vector<BenchQuestion>& builtin_questions() {
    static const std::vector<BenchQuestion> qs = [] {
        const std::vector<std::string> mi = {"myocardial infarction", "heart attack", "mi", "ami"};
        const std::vector<std::string> htn = {"hypertension", "high blood pressure"};
        const std::vector<std::string> dm = {"diabetes"};
        AnswerMatcher q3;
        q3.kind = Kind::Number;
        q3.number = 119;
        return std::vector<BenchQuestion>{
            {"Q1",
             "Imagine you are a physician, does the following text contain lab tests used to detect sepsis: "
             "fasting plasma glucose (FPG) test, oral glucose tolerance test (OGTT), hemoglobin A1c (HbA1c) "
             "test, and random plasma glucose (RPG) test?",
             "No", polarity("no")},
            {"Q2",
             "Imagine you are a physician, does the following text contain lab tests used to detect diabetes: "
             "fasting plasma glucose (FPG) test, oral glucose tolerance test (OGTT), hemoglobin A1c (HbA1c) "
             "test, and random plasma glucose (RPG) test?",
             "Yes", polarity("yes")},
            {"Q3",
             "What is the systolic blood pressure from the given text: Temperature Degrees C 36.2 degrees "
             "CPulse Pulse bpm : 72 bpm Blood Pressure Blood Pressure Systolic : 119 Blood Pressure Diastolic "
             ": 71 Blood Pressure Mean : 87 mmHg Blood Pressure Patient Position?",
             "Systolic: 119", q3},
            {"Q4",
             "The clinical note states: 'The patient has a history of high blood sugar and is currently on "
             "insulin therapy.' Can you identify if the patient has diabetes?",
             "Yes", polarity("yes")},
            {"Q5",
             "'The patient was diagnosed with hypertension 5 years ago and has been on lisinopril since. No "
             "signs of improvement. Can you extract the diagnosis of hypertension and recognize when it "
             "occurred?",
             "Hypertension 5 years ago",
             terms(Kind::RequiredTerms, {{"hypertension"}, {"5 years", "five years"}})},
            {"Q6",
             "'The patient was admitted with acute chest pain, later confirmed to be a myocardial infarction. "
             "They also have a long-standing history of hypertension and are managing diabetes with "
             "metformin.' Can you identify the three conditions: myocardial infarction, hypertension, and "
             "diabetes?",
             "Myocardial infarction, diabetes, and hypertension", terms(Kind::RequiredTerms, {mi, htn, dm})},
            {"Q7",
             "'Patient reported severe chest pain radiating to the left arm, with nausea and shortness of "
             "breath. EKG confirmed ST elevation.' Can you identify if this patient is likely suffering from "
             "an acute myocardial infarction based on the symptoms and test results?",
             "Yes", polarity("yes")},
            {"Q8",
             "'The patient is obese, with a family history of diabetes and hypertension. Fasting glucose "
             "levels are elevated, and blood pressure remains uncontrolled despite medication.' Based on the "
             "risk factors and medical history, can you infer the likelihood of diabetes and hypertension in "
             "this patient?",
             "Highly likely that the patient has diabetes; almost certainly has hypertension.",
             terms(Kind::AffirmativeTerms, {dm, htn})},
            {"Q9",
             "'The patient is currently on metformin, atorvastatin, and hydrochlorothiazide.' Can you "
             "identify which conditions these medications are most likely treating?",
             "Type 2 diabetes and hypertension", terms(Kind::RequiredTerms, {dm, htn})},
            {"Q10",
             "'The patient was evaluated for chest pain, but there is no evidence of myocardial infarction. "
             "He has diabetes but no signs of hypertension.' Can you correctly identify the presence of "
             "diabetes while acknowledging that there is no myocardial infarction or hypertension?",
             "Yes, the patient has diabetes but no MI or hypertension.",
             terms(Kind::MixedPolarity, {dm}, {mi, htn})},
        };
    }();
    return qs;
}

std::vector<BenchQuestion> with_matcher_overrides(std::vector<BenchQuestion> questions, const json& overrides) {
    if (overrides.is_null()) return questions;
    if (!overrides.is_object()) throw ValidationError("matcher overrides must be an object keyed by question id");
    for (const auto& [id, m] : overrides.items()) {
        auto it = std::find_if(questions.begin(), questions.end(),
                               [&](const BenchQuestion& q) { return q.id == id; });
        if (it == questions.end()) throw ValidationError("matcher override for unknown question " + id);
        it->matcher = AnswerMatcher::from_json(m);
    }
    return questions;
}

BenchResult run_benchmark(CompletionBackend& backend, const std::vector<BenchQuestion>& questions,
                          const GenerationParams& params) {
    BenchResult r;
    r.backend_id = backend.id();
    const auto start = std::chrono::steady_clock::now();
    for (const auto& q : questions) {
        QuestionResult qr;
        qr.id = q.id;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto resp = complete(backend, {q.prompt, params});
            qr.response = resp.text;
            qr.correct = q.matcher.matches(resp.text);
        } catch (const std::exception& e) {
            qr.error = e.what();
        }
        qr.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (qr.correct) ++r.correct;
        r.questions.push_back(std::move(qr));
    }
    r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.accuracy = questions.empty() ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(questions.size());
    return r;
}

std::string bench_csv(const BenchResult& result) {
    std::string out = "question,correct,latency_ms,error,response\n";
    for (const auto& q : result.questions) {
        out += io::csv_field(q.id) + "," + (q.correct ? "1" : "0") + "," + io::format_double(q.latency_ms, 1) +
               "," + io::csv_field(q.error) + "," + io::csv_field(q.response) + "\n";
    }
    out += "total," + std::to_string(result.correct) + "," + io::format_double(result.elapsed_seconds * 1000.0, 1) +
           ",," + io::csv_field("backend=" + result.backend_id + " accuracy=" +
                                io::format_double(result.accuracy * 100.0, 1) + "%") +
           "\n";
    return out;
}

}  // namespace ehrpheno
