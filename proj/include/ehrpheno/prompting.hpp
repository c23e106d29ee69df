#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ehrpheno {

enum class Analyte { Glucose, BloodPressure, Troponin };
enum class Comparator { GreaterEqual, Greater };
/// How a document's blood-pressure readings are reduced before comparison.
enum class BpAggregation { Mean, AnyReading };

std::string_view to_string(Analyte a);
std::string_view to_string(Comparator c);
std::string_view canonical_unit(Analyte a);

/// Guideline threshold for one analyte. Blood pressure uses the systolic and
/// diastolic thresholds with OR semantics; `threshold` mirrors the systolic
/// one for that analyte.
struct ClinicalRule {
    Analyte analyte = Analyte::Glucose;
    Comparator comparator = Comparator::GreaterEqual;
    double threshold = 0.0;
    std::string unit;
    double systolic_threshold = 0.0;
    double diastolic_threshold = 0.0;
    BpAggregation bp_aggregation = BpAggregation::Mean;

    bool compare(double value, double limit) const {
        return comparator == Comparator::Greater ? value > limit : value >= limit;
    }

    bool operator==(const ClinicalRule&) const = default;
};

struct ConditionProfile {
    std::string name;
    /// Human wording used in responses and reports ("acute myocardial infarction").
    std::string display_name;
    std::vector<std::string> keywords;
    std::string inference_template;
    std::string extraction_template;
    std::vector<std::string> abbreviation_hints;
    ClinicalRule rule;

    bool operator==(const ConditionProfile&) const = default;
};

inline constexpr std::string_view kTextPlaceholder = "{text}";
inline constexpr std::string_view kEvidenceInstruction =
    " Please highlight all the original text that supports your judgement.";

enum class PromptKind { Inference, Extraction, Evidence };
std::string_view to_string(PromptKind k);

struct PromptSource {
    std::string patient_id;
    std::size_t chunk_index = 0;
};

struct RenderedPrompt {
    std::string condition;
    PromptKind kind = PromptKind::Inference;
    std::string text;
    PromptSource source;
};

/// Throws ValidationError unless both templates hold exactly one placeholder,
/// keywords are non-empty and the rule is consistent with its analyte.
void validate_profile(const ConditionProfile& profile);

/// AMI, diabetes and hypertension, in that order.
const std::vector<ConditionProfile>& builtin_profiles();

const ConditionProfile& find_profile(const std::vector<ConditionProfile>& profiles,
                                     std::string_view name);

nlohmann::json profiles_to_json(const std::vector<ConditionProfile>& profiles);
std::vector<ConditionProfile> profiles_from_json(const nlohmann::json& j);
std::vector<ConditionProfile> load_profiles(const std::filesystem::path& path);

/// The part of a template before and after its placeholder. Evidence prompts
/// use the inference template with the highlight instruction appended.
std::pair<std::string, std::string> template_frame(const ConditionProfile& profile,
                                                        PromptKind kind);

/// Substitutes `text` at the template's placeholder. Braces inside `text`
/// are left alone. Throws ValidationError when `text` is empty.
RenderedPrompt render_prompt(const ConditionProfile& profile, PromptKind kind,
                             std::string_view text, PromptSource source = {});

}  // namespace ehrpheno
