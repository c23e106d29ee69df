#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ehrpheno/corpus.hpp"
#include "ehrpheno/prompting.hpp"

namespace ehrpheno {

struct SynthSpec {
    int n_patients = 200;
    /// condition -> probability of being positive
    std::map<std::string, double> prevalence;
    int min_docs_per_patient = 3;
    int max_docs_per_patient = 8;
    /// Probability that a positive patient's evidence note has a type from
    /// eligible_doc_types() rather than an unrelated type.
    double evidence_fraction = 1.0;
    /// Per note and condition, probability of a keyword sentence that is
    /// not evidence (normal-range labs, routine cardiac or glucose checks).
    double distractor_rate = 0.2;
    /// Probability that the evidence note also carries an over-threshold lab.
    double lab_evidence_rate = 0.5;
    double icd_sensitivity = 0.85;
    double icd_specificity = 0.95;
    int admit_year = 2015;
    std::uint64_t seed = 0;

    /// Throws ValidationError when a field is out of range.
    void validate() const;
    nlohmann::json to_json() const;
    static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthResult {
    Cohort cohort;
    /// condition -> patient -> planted label
    std::map<std::string, LabelMap> truth;
};

/// Deterministic synthetic cohort. Every note starts with routine sentences
/// that contain no keyword of any built-in profile; positives get one extra
/// evidence note with a diagnosis sentence and sometimes an over-threshold
/// lab. Every patient has a DischargeSummary. Registry labels equal the
/// planted truth; ICD labels are the truth seen through the configured
/// sensitivity and specificity.
SynthResult generate_synthetic(const SynthSpec& spec, const std::vector<ConditionProfile>& profiles);

/// Document types where a condition's evidence is planted.
const std::vector<std::string>& eligible_doc_types(std::string_view condition);

/// Sentences the generator uses as filler, exposed for tests.
const std::vector<std::string>& routine_sentences();

}  // namespace ehrpheno
