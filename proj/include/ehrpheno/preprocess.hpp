#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ehrpheno/adjudication.hpp"
#include "ehrpheno/corpus.hpp"
#include "ehrpheno/prompting.hpp"

namespace ehrpheno {

using DocTypeSamples = std::map<std::string, std::vector<ClinicalDocument>>;

/// Up to `m` documents of every type, drawn uniformly without replacement.
/// Each type has its own stream derived from `seed` and the type name, so
/// adding a type leaves the other samples unchanged. Samples are returned
/// sorted by doc_id. Throws ValidationError when m < 1.
DocTypeSamples sample_document_types(const Cohort& cohort, int m, std::uint64_t seed);

struct DocTypeProfile {
    std::string doc_type;
    int sampled_count = 0;
    int positive_count = 0;
    double ir = 0.0;
    bool operator==(const DocTypeProfile&) const = default;
};

enum class IrDenominator {
    /// Documents actually sampled for the type.
    Sampled,
    /// The requested sample size m, even for types with fewer documents.
    RequestedM,
};

/// IR per type: documents judged Yes over the denominator. Throws
/// ValidationError naming the first sampled document without a verdict.
std::vector<DocTypeProfile> compute_information_relevance(
    const DocTypeSamples& samples, const std::map<std::string, InferredStatus>& verdicts,
    IrDenominator denominator = IrDenominator::Sampled, int m = 0);

/// "0", "q1", "q2" or a number in [0, 100].
double parse_percentile(std::string_view s);

/// Nearest-rank percentile over every value (zeros included):
/// the ceil(p/100 * N)-th smallest, at least the first. p = 0 gives 0, so
/// filtering keeps every type with a nonzero IR.
double nearest_rank_percentile(std::vector<double> values, double p);

struct FilterPlan {
    std::string condition;
    double percentile = 25.0;
    double threshold_value = 0.0;
    std::set<std::string> kept_types;
};

/// Keeps the types whose IR is strictly above the percentile threshold.
/// Throws ValidationError on an empty profile list.
FilterPlan filter_document_types(const std::vector<DocTypeProfile>& profiles, double percentile,
                                 std::string condition = {});

struct ProvenanceSpan {
    std::string doc_id;
    std::size_t source_offset = 0;
    std::size_t length = 0;
    std::size_t merged_offset = 0;
    bool operator==(const ProvenanceSpan&) const = default;
};

/// Keyword sentences of one patient's kept-type notes, one per line.
struct MergedDocument {
    std::string patient_id;
    std::string condition;
    Timestamp timestamp{};
    std::string text;
    std::vector<ProvenanceSpan> provenance;

    std::string doc_id() const { return patient_id + "::" + condition; }
    /// Distinct source doc_ids in order of first appearance.
    std::vector<std::string> source_doc_ids() const;
    bool operator==(const MergedDocument&) const = default;
};

struct ConsolidatedCorpus {
    std::string condition;
    /// Sorted by patient_id.
    std::vector<MergedDocument> documents;
    /// Patients owning no document of a kept type.
    std::set<std::string> condition_free;

    const MergedDocument* find(std::string_view patient_id) const;
    bool operator==(const ConsolidatedCorpus&) const = default;
};

struct ConsolidationStats {
    std::size_t words_before = 0;
    std::size_t words_after = 0;
    double words_fraction_remaining = 0.0;
    int positives_before = 0;
    int positives_retained = 0;
    /// Undefined when the cohort has no positives for the condition.
    std::optional<double> positive_retention;
    int kept_type_count = 0;
};

/// Word share and positive retention of `after` relative to the whole cohort,
/// using the cohort's registry labels for the corpus condition.
ConsolidationStats retention_report(const Cohort& before, const ConsolidatedCorpus& after,
                                    int kept_type_count);

/// Splits kept-type notes into sentences and keeps those matching a profile
/// keyword, merged per patient in (timestamp, doc_id) order. Patients with no
/// matching sentence are absent.
std::pair<ConsolidatedCorpus, ConsolidationStats> consolidate(const Cohort& cohort,
                                                              const FilterPlan& plan,
                                                              const ConditionProfile& profile);

/// Line records in the documents format with doc_type "__merged__" plus
/// "condition" and "provenance" fields.
inline constexpr std::string_view kMergedDocType = "__merged__";
std::string serialize_consolidated(const ConsolidatedCorpus& corpus);
ConsolidatedCorpus read_consolidated(const std::filesystem::path& path, std::string_view condition);

/// Throws ValidationError unless every provenance span matches its source
/// note and merged text byte for byte.
void verify_provenance(const Cohort& cohort, const ConsolidatedCorpus& corpus);

}  // namespace ehrpheno
