#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ehrpheno/prompting.hpp"
#include "ehrpheno/text.hpp"

namespace ehrpheno {

enum class InferredStatus { Yes, No, NoMention };

std::string_view to_string(InferredStatus s);
std::optional<InferredStatus> status_from_string(std::string_view s);

struct LabMeasurement {
    Analyte analyte = Analyte::Glucose;
    /// Value and unit as written. For blood pressure, the systolic reading
    /// (or diastolic when only that was given).
    double raw_value = 0.0;
    std::string raw_unit;
    /// Value in the analyte's canonical unit.
    double normalized_value = 0.0;
    std::optional<double> systolic;
    std::optional<double> diastolic;

    bool operator==(const LabMeasurement&) const = default;
};

enum class VerdictPath { Inference, Extraction };
std::string_view to_string(VerdictPath p);

struct DocumentVerdict {
    std::string patient_id;
    std::string condition;
    /// The document (or merged document) the verdict was issued for.
    std::string doc_ref;
    /// Original notes behind doc_ref; equal to {doc_ref} for raw notes.
    std::vector<std::string> source_doc_ids;
    VerdictPath path = VerdictPath::Inference;
    InferredStatus status = InferredStatus::NoMention;
    std::vector<LabMeasurement> measurements;
    /// Highlighted supporting fragments, verified against the source text.
    /// Advisory only.
    std::vector<std::string> evidence_spans;
};

/// prompt1 = inference path only, prompt2 = extraction path only,
/// merged = either.
enum class MergeMode { Prompt1, Prompt2, Merged };
std::string_view to_string(MergeMode m);
std::optional<MergeMode> merge_mode_from_string(std::string_view s);

struct PatientVerdict {
    std::string patient_id;
    std::string condition;
    int label = 0;
    MergeMode mode = MergeMode::Merged;
    /// doc_refs of the verdicts that voted Yes, sorted and unique.
    std::vector<std::string> contributing;
    /// Source notes behind the Yes verdicts, sorted and unique.
    std::vector<std::string> evidence_doc_ids;
};

/// Maps a free-text inference answer onto Yes / No / NoMention.
///
/// Only the first 200 characters are examined, since models often restate
/// the question further down. Within that head the exact phrase "no mention"
/// wins over a standalone "yes", which wins over a standalone "no"; with none
/// of them present the answer is NoMention. "no clear mention" is not the
/// phrase, so "No, there is no clear mention of ..." reads as No.
InferredStatus parse_inference_response(std::string_view response);

inline constexpr std::size_t kInferenceHeadChars = 200;

/// Pulls lab readings for one analyte out of an extraction answer.
///
///  glucose        number followed by mmol/L, kept in (0.5, 100]
///  troponin       number followed by ng/L or ng/mL (ng/mL scaled by 1000),
///                 kept in (0, 1e6] ng/L
///  blood pressure "systolic : N" / "diastolic : N" cues paired in order of
///                 appearance, or "N/M" next to a pressure cue or mmHg;
///                 systolic kept in [50, 300], diastolic in [20, 200]
///
/// Readings whose key names a different analyte (potassium, BNP, ...) are
/// skipped. Rejected values are described in `warnings` when given.
std::vector<LabMeasurement> parse_extraction_response(std::string_view response, Analyte analyte,
                                                      std::vector<std::string>* warnings = nullptr);

/// Compares a document's readings with the rule. No readings gives
/// NoMention. Throws ValidationError if a reading is for another analyte.
InferredStatus apply_clinical_rule(const std::vector<LabMeasurement>& measurements,
                                   const ClinicalRule& rule);

/// Any-positive merge over the verdicts the mode considers. NoMention
/// contributes nothing; an empty list gives label 0. Throws ValidationError
/// when a verdict belongs to another patient or condition.
PatientVerdict merge_patient(std::string_view patient_id, std::string_view condition,
                             const std::vector<DocumentVerdict>& verdicts, MergeMode mode);

/// Quoted fragments of `response` found verbatim (ignoring case) in
/// `source`, as source offsets. Fragments that cannot be found are dropped.
std::vector<text::Span> parse_evidence_highlights(std::string_view response, std::string_view source);

}  // namespace ehrpheno
