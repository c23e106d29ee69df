#include "ehrpheno/prompting.hpp"

#include <algorithm>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"

using nlohmann::json;

namespace ehrpheno {

std::string_view to_string(Analyte a) {
    switch (a) {
        case Analyte::Glucose: return "glucose";
        case Analyte::BloodPressure: return "blood_pressure";
        case Analyte::Troponin: return "troponin";
    }
    return "?";
}

std::string_view to_string(Comparator c) { return c == Comparator::Greater ? ">" : ">="; }

std::string_view canonical_unit(Analyte a) {
    switch (a) {
        case Analyte::Glucose: return "mmol/L";
        case Analyte::BloodPressure: return "mmHg";
        case Analyte::Troponin: return "ng/L";
    }
    return "";
}

std::string_view to_string(PromptKind k) {
    switch (k) {
        case PromptKind::Inference: return "inference";
        case PromptKind::Extraction: return "extraction";
        case PromptKind::Evidence: return "evidence";
    }
    return "?";
}

namespace {

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos;
         pos = hay.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

Analyte analyte_from(const std::string& s) {
    if (s == "glucose") return Analyte::Glucose;
    if (s == "blood_pressure") return Analyte::BloodPressure;
    if (s == "troponin") return Analyte::Troponin;
    throw ValidationError("unknown analyte '" + s + "'");
}

Comparator comparator_from(const std::string& s) {
    if (s == ">=" || s == "≥") return Comparator::GreaterEqual;
    if (s == ">") return Comparator::Greater;
    throw ValidationError("unknown comparator '" + s + "'");
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto j = s.find(' ', i);
        if (j == std::string_view::npos) j = s.size();
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

std::vector<ConditionProfile> make_builtins() {
    ConditionProfile ami;
    ami.name = "ami";
    ami.display_name = "acute myocardial infarction";
    ami.keywords = {"age",       "weight",     "wt",         "myocardial infarction",
                    "myocardial", "heart",     "mi",         "acute coronary",
                    "coronary",  "ischemic",   "cardiac",    "myocardium",
                    "infarct",   "ecg",        "troponin",   "artery",
                    "pci",       "stemi",      "nSTEMI",     "cardiogenic",
                    "aneurysm",  "medication"};
    ami.inference_template =
        "Analyze the clinical text: '{text}', and answer yes or no if you identify acute "
        "myocardial infarction. Be careful with some abbreviations for acute myocardial "
        "infarction, including ami, mi, stemi, and non-stemi.";
    ami.extraction_template = "Find all the key-value pairs of troponin level from the given text: {text}.";
    ami.abbreviation_hints = {"ami", "mi", "stemi", "non-stemi"};
    ami.rule = {Analyte::Troponin, Comparator::Greater, 14.0, "ng/L", 0.0, 0.0, BpAggregation::Mean};

    ConditionProfile diabetes;
    diabetes.name = "diabetes";
    diabetes.display_name = "diabetes";
    diabetes.keywords = {"age",        "weight",     "wt",         "non-alcoholic fatty liver",
                         "dyslipidemia", "sugar",    "dyslipidemia", "hypertension",
                         "blood pressure", "glycemia", "glucose",  "fasting",
                         "fpg",        "ogtt",       "hba1c",      "a1c",
                         "mmtt",       "hemoglobin", "insulin",    "diabetes",
                         "diabetic",   "dm",         "tolerance",  "inhibitor",
                         "peptide",    "tzds",       "glp-1",      "inhibitors",
                         "dpp-4",      "metformin",  "medication"};
    diabetes.inference_template =
        "Analyze the clinical text: '{text}', answer yes or no if you identify diabetes. Look "
        "for relevant information, including elevated blood glucose levels, mentions of "
        "diabetes diagnosis, or references to anti-diabetic medications.";
    diabetes.extraction_template =
        "Find all the key-value pairs of blood sugar/glucose levels from the given text: {text}.";
    diabetes.rule = {Analyte::Glucose, Comparator::GreaterEqual, 11.1, "mmol/L", 0.0, 0.0,
                     BpAggregation::Mean};

    ConditionProfile hypertension;
    hypertension.name = "hypertension";
    hypertension.display_name = "hypertension";
    hypertension.keywords = {"age",      "weight",  "wt",  "hypertension", "blood pressure", "systolic",
                             "diastolic", "htn",    "dash", "hypertensive", "medication"};
    hypertension.inference_template =
        "Analyze the clinical text: '{text}', answer yes or no if you identify hypertension "
        "(high blood pressure). Look for relevant information, including high blood pressure "
        "readings or symptoms, mentions of hypertension diagnosis, or references to "
        "antihypertensive medications.";
    hypertension.extraction_template =
        "Find all the key-value pairs of blood pressure from the given text: {text}.";
    hypertension.rule = {Analyte::BloodPressure, Comparator::GreaterEqual, 140.0, "mmHg", 140.0,
                         90.0, BpAggregation::Mean};

    return {ami, diabetes, hypertension};
}

}  // namespace

void validate_profile(const ConditionProfile& p) {
    const std::string who = "condition profile '" + p.name + "': ";
    if (p.name.empty()) throw ValidationError("condition profile with empty name");
    if (p.keywords.empty()) throw ValidationError(who + "keywords are empty");
    if (count_occurrences(p.inference_template, kTextPlaceholder) != 1) {
        throw ValidationError(who + "inference template must contain {text} exactly once");
    }
    if (count_occurrences(p.extraction_template, kTextPlaceholder) != 1) {
        throw ValidationError(who + "extraction template must contain {text} exactly once");
    }
    const auto& r = p.rule;
    if (r.unit != canonical_unit(r.analyte)) {
        throw ValidationError(who + "unit '" + r.unit + "' does not match analyte " +
                              std::string(to_string(r.analyte)));
    }
    if (r.analyte == Analyte::BloodPressure) {
        if (!(r.systolic_threshold > 0) || !(r.diastolic_threshold > 0)) {
            throw ValidationError(who + "blood pressure thresholds must be positive");
        }
    } else if (!(r.threshold > 0)) {
        throw ValidationError(who + "threshold must be positive");
    }
}

const std::vector<ConditionProfile>& builtin_profiles() {
    static const std::vector<ConditionProfile> profiles = make_builtins();
    return profiles;
}

const ConditionProfile& find_profile(const std::vector<ConditionProfile>& profiles,
                                     std::string_view name) {
    auto it = std::find_if(profiles.begin(), profiles.end(),
                           [&](const ConditionProfile& p) { return p.name == name; });
    if (it == profiles.end()) throw ValidationError("unknown condition '" + std::string(name) + "'");
    return *it;
}

json profiles_to_json(const std::vector<ConditionProfile>& profiles) {
    json arr = json::array();
    for (const auto& p : profiles) {
        json rule = {{"analyte", to_string(p.rule.analyte)},
                     {"comparator", to_string(p.rule.comparator)},
                     {"unit", p.rule.unit}};
        if (p.rule.analyte == Analyte::BloodPressure) {
            rule["systolic_threshold"] = p.rule.systolic_threshold;
            rule["diastolic_threshold"] = p.rule.diastolic_threshold;
            rule["aggregation"] = p.rule.bp_aggregation == BpAggregation::Mean ? "mean" : "any";
        } else {
            rule["threshold"] = p.rule.threshold;
        }
        arr.push_back({{"name", p.name},
                       {"display_name", p.display_name},
                       {"keywords", p.keywords},
                       {"inference_template", p.inference_template},
                       {"extraction_template", p.extraction_template},
                       {"abbreviation_hints", p.abbreviation_hints},
                       {"rule", rule}});
    }
    return json{{"conditions", arr}};
}

std::vector<ConditionProfile> profiles_from_json(const json& j) {
    std::vector<ConditionProfile> out;
    try {
        for (const auto& c : j.at("conditions")) {
            ConditionProfile p;
            p.name = c.at("name").get<std::string>();
            p.display_name = c.value("display_name", p.name);
            const auto& kw = c.at("keywords");
            // A single string is accepted as a space-separated list of words.
            p.keywords = kw.is_string() ? split_words(kw.get<std::string>())
                                        : kw.get<std::vector<std::string>>();
            p.inference_template = c.at("inference_template").get<std::string>();
            p.extraction_template = c.at("extraction_template").get<std::string>();
            p.abbreviation_hints = c.value("abbreviation_hints", std::vector<std::string>{});
            const auto& r = c.at("rule");
            p.rule.analyte = analyte_from(r.at("analyte").get<std::string>());
            p.rule.comparator = comparator_from(r.value("comparator", std::string(">=")));
            p.rule.unit = r.value("unit", std::string(canonical_unit(p.rule.analyte)));
            if (p.rule.analyte == Analyte::BloodPressure) {
                p.rule.systolic_threshold = r.at("systolic_threshold").get<double>();
                p.rule.diastolic_threshold = r.at("diastolic_threshold").get<double>();
                p.rule.threshold = p.rule.systolic_threshold;
                const auto agg = r.value("aggregation", std::string("mean"));
                if (agg != "mean" && agg != "any") {
                    throw ValidationError("unknown blood pressure aggregation '" + agg + "'");
                }
                p.rule.bp_aggregation = agg == "mean" ? BpAggregation::Mean : BpAggregation::AnyReading;
            } else {
                p.rule.threshold = r.at("threshold").get<double>();
            }
            validate_profile(p);
            out.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad condition profile config: ") + e.what());
    }
    if (out.empty()) throw ValidationError("condition profile config lists no conditions");
    return out;
}

std::vector<ConditionProfile> load_profiles(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return profiles_from_json(j);
}

std::pair<std::string, std::string> template_frame(const ConditionProfile& profile,
                                                   PromptKind kind) {
    const std::string& tmpl =
        kind == PromptKind::Extraction ? profile.extraction_template : profile.inference_template;
    const auto pos = tmpl.find(kTextPlaceholder);
    if (pos == std::string::npos) {
        throw ValidationError("template for '" + profile.name + "' lacks {text}");
    }
    std::string suffix = tmpl.substr(pos + kTextPlaceholder.size());
    if (kind == PromptKind::Evidence) suffix += kEvidenceInstruction;
    return {tmpl.substr(0, pos), std::move(suffix)};
}

RenderedPrompt render_prompt(const ConditionProfile& profile, PromptKind kind,
                             std::string_view text, PromptSource source) {
    if (text.empty()) {
        throw ValidationError("cannot render a " + std::string(to_string(kind)) +
                              " prompt for '" + profile.name + "' over empty text");
    }
    auto [prefix, suffix] = template_frame(profile, kind);
    RenderedPrompt out;
    out.condition = profile.name;
    out.kind = kind;
    out.source = std::move(source);
    out.text.reserve(prefix.size() + text.size() + suffix.size());
    out.text.append(prefix).append(text).append(suffix);
    return out;
}

}  // namespace ehrpheno
