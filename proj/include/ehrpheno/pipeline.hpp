#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehrpheno/adjudication.hpp"
#include "ehrpheno/corpus.hpp"
#include "ehrpheno/inference.hpp"
#include "ehrpheno/preprocess.hpp"
#include "ehrpheno/prompting.hpp"

namespace ehrpheno {

struct PipelineOptions {
    GenerationParams params;
    std::size_t chunk_chars = kDefaultChunkChars;
    std::size_t parallelism = 4;
    /// Also ask for highlighted evidence on inference-path verdicts.
    bool evidence = false;
};

/// A note (or merged note) to classify.
struct DocumentInput {
    std::string patient_id;
    std::string doc_ref;
    std::vector<std::string> source_doc_ids;
    std::string text;
};

/// chunk -> render -> complete -> parse for one document and one path.
class DocumentInferrer {
public:
    DocumentInferrer(CompletionBackend& backend, PipelineOptions options);

    /// Inference path: Yes if any chunk says Yes, NoMention if every chunk
    /// does, No otherwise. Extraction path: readings from all chunks go
    /// through the profile's rule together. Blank text gives NoMention
    /// without a backend call.
    DocumentVerdict infer(const ConditionProfile& profile, const DocumentInput& input, VerdictPath path) const;

    InferredStatus inference_status(const ConditionProfile& profile, std::string_view text) const;

    const PipelineOptions& options() const { return options_; }

private:
    std::string ask(const ConditionProfile& profile, PromptKind kind, const std::string& patient_id,
                    std::size_t chunk_index, std::string_view text) const;

    CompletionBackend& backend_;
    PipelineOptions options_;
};

struct ProfilingResult {
    DocTypeSamples samples;
    std::map<std::string, InferredStatus> verdicts;
    std::vector<DocTypeProfile> profiles;
};

/// Samples up to m notes per type and scores each type's IR with the
/// inference prompt.
ProfilingResult run_profiling(const Cohort& cohort, const ConditionProfile& profile,
                              CompletionBackend& backend, const PipelineOptions& options, int m,
                              std::uint64_t seed, IrDenominator denominator = IrDenominator::Sampled);

struct PatientDetection {
    std::string patient_id;
    std::map<MergeMode, PatientVerdict> by_mode;
    std::vector<DocumentVerdict> verdicts;
};

struct DetectionResult {
    std::string condition;
    /// Every cohort patient, sorted by id.
    std::vector<PatientDetection> patients;

    LabelMap labels(MergeMode mode) const;
};

/// Runs both prompt paths over the merged notes of `corpus`, or over every
/// raw note when `corpus` is null. Patients without input are negative.
DetectionResult run_detection(const Cohort& cohort, const ConditionProfile& profile,
                              const ConsolidatedCorpus* corpus, CompletionBackend& backend,
                              const PipelineOptions& options);

/// One record per patient: labels for all modes, the label of `mode`,
/// evidence doc_ids and extracted readings. Byte-stable for equal input.
std::vector<nlohmann::json> detection_records(const DetectionResult& result, MergeMode mode);

/// Reads detections.jsonl back as condition -> mode -> labels.
std::map<std::string, std::map<MergeMode, LabelMap>> read_detection_labels(const std::filesystem::path& path);

}  // namespace ehrpheno
