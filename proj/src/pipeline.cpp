#include "ehrpheno/pipeline.hpp"

#include <algorithm>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"
#include "ehrpheno/text.hpp"

namespace ehrpheno {

using nlohmann::json;

DocumentInferrer::DocumentInferrer(CompletionBackend& backend, PipelineOptions options)
    : backend_(backend), options_(std::move(options)) {
    options_.params.validate();
    if (options_.chunk_chars == 0) throw ValidationError("chunk size must be positive");
}

std::string DocumentInferrer::ask(const ConditionProfile& profile, PromptKind kind, const std::string& patient_id,
                                  std::size_t chunk_index, std::string_view text) const {
    const auto prompt = render_prompt(profile, kind, text, {patient_id, chunk_index});
    return complete(backend_, {prompt.text, options_.params}).text;
}

InferredStatus DocumentInferrer::inference_status(const ConditionProfile& profile, std::string_view text) const {
    DocumentInput input{"", "", {}, std::string(text)};
    return infer(profile, input, VerdictPath::Inference).status;
}

DocumentVerdict DocumentInferrer::infer(const ConditionProfile& profile, const DocumentInput& input,
                                        VerdictPath path) const {
    DocumentVerdict v;
    v.patient_id = input.patient_id;
    v.condition = profile.name;
    v.doc_ref = input.doc_ref;
    v.source_doc_ids = input.source_doc_ids;
    v.path = path;
    v.status = InferredStatus::NoMention;
    if (text::trim(input.text).empty()) return v;

    const auto chunks = chunk_text(input.text, options_.chunk_chars);
    if (path == VerdictPath::Inference) {
        bool any_yes = false, any_no = false;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (text::trim(chunks[i].text).empty()) continue;
            const auto s = parse_inference_response(
                ask(profile, PromptKind::Inference, input.patient_id, i, chunks[i].text));
            any_yes = any_yes || s == InferredStatus::Yes;
            any_no = any_no || s == InferredStatus::No;
            if (options_.evidence) {
                const auto answer = ask(profile, PromptKind::Evidence, input.patient_id, i, chunks[i].text);
                for (const auto& span : parse_evidence_highlights(answer, chunks[i].text)) {
                    v.evidence_spans.push_back(chunks[i].text.substr(span.offset, span.length));
                }
            }
        }
        v.status = any_yes ? InferredStatus::Yes : any_no ? InferredStatus::No : InferredStatus::NoMention;
        return v;
    }

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (text::trim(chunks[i].text).empty()) continue;
        auto found = parse_extraction_response(
            ask(profile, PromptKind::Extraction, input.patient_id, i, chunks[i].text), profile.rule.analyte);
        v.measurements.insert(v.measurements.end(), found.begin(), found.end());
    }
    v.status = apply_clinical_rule(v.measurements, profile.rule);
    return v;
}

ProfilingResult run_profiling(const Cohort& cohort, const ConditionProfile& profile, CompletionBackend& backend,
                              const PipelineOptions& options, int m, std::uint64_t seed,
                              IrDenominator denominator) {
    ProfilingResult r;
    r.samples = sample_document_types(cohort, m, seed);
    std::vector<const ClinicalDocument*> docs;
    for (const auto& [type, list] : r.samples) {
        for (const auto& d : list) docs.push_back(&d);
    }
    std::vector<InferredStatus> statuses(docs.size(), InferredStatus::NoMention);
    DocumentInferrer inferrer(backend, options);
    parallel_for(docs.size(), options.parallelism, [&](std::size_t i) {
        const auto* d = docs[i];
        statuses[i] = inferrer.infer(profile, {d->patient_id, d->doc_id, {d->doc_id}, d->text},
                                     VerdictPath::Inference)
                          .status;
    });
    for (std::size_t i = 0; i < docs.size(); ++i) r.verdicts[docs[i]->doc_id] = statuses[i];
    r.profiles = compute_information_relevance(r.samples, r.verdicts, denominator, m);
    return r;
}

LabelMap DetectionResult::labels(MergeMode mode) const {
    LabelMap out;
    for (const auto& p : patients) out[p.patient_id] = p.by_mode.at(mode).label;
    return out;
}

DetectionResult run_detection(const Cohort& cohort, const ConditionProfile& profile,
                              const ConsolidatedCorpus* corpus, CompletionBackend& backend,
                              const PipelineOptions& options) {
    if (corpus && corpus->condition != profile.name) {
        throw ValidationError("consolidated corpus for '" + corpus->condition + "' used to detect '" +
                              profile.name + "'");
    }
    std::vector<std::string> ids;
    for (const auto& p : cohort.patients()) ids.push_back(p.patient_id);
    std::sort(ids.begin(), ids.end());

    std::vector<DocumentInput> inputs;
    std::vector<std::size_t> owner;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (corpus) {
            if (const auto* m = corpus->find(ids[k])) {
                inputs.push_back({m->patient_id, m->doc_id(), m->source_doc_ids(), m->text});
                owner.push_back(k);
            }
            continue;
        }
        std::vector<const ClinicalDocument*> docs;
        for (auto idx : cohort.documents_of(ids[k])) docs.push_back(&cohort.documents()[idx]);
        std::sort(docs.begin(), docs.end(), [](const ClinicalDocument* a, const ClinicalDocument* b) {
            return std::tie(a->timestamp, a->doc_id) < std::tie(b->timestamp, b->doc_id);
        });
        for (const auto* d : docs) {
            if (text::trim(d->text).empty()) continue;
            inputs.push_back({d->patient_id, d->doc_id, {d->doc_id}, d->text});
            owner.push_back(k);
        }
    }

    const VerdictPath paths[] = {VerdictPath::Inference, VerdictPath::Extraction};
    std::vector<DocumentVerdict> verdicts(inputs.size() * 2);
    DocumentInferrer inferrer(backend, options);
    parallel_for(verdicts.size(), options.parallelism, [&](std::size_t i) {
        verdicts[i] = inferrer.infer(profile, inputs[i / 2], paths[i % 2]);
    });

    DetectionResult result;
    result.condition = profile.name;
    result.patients.resize(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) result.patients[k].patient_id = ids[k];
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        result.patients[owner[i / 2]].verdicts.push_back(std::move(verdicts[i]));
    }
    for (auto& p : result.patients) {
        for (auto mode : {MergeMode::Prompt1, MergeMode::Prompt2, MergeMode::Merged}) {
            p.by_mode.emplace(mode, merge_patient(p.patient_id, profile.name, p.verdicts, mode));
        }
    }
    return result;
}

namespace {

json measurement_json(const LabMeasurement& m, const std::string& doc_ref) {
    json j = {{"doc_ref", doc_ref},
              {"analyte", to_string(m.analyte)},
              {"raw_value", m.raw_value},
              {"raw_unit", m.raw_unit},
              {"normalized_value", m.normalized_value}};
    if (m.systolic) j["systolic"] = *m.systolic;
    if (m.diastolic) j["diastolic"] = *m.diastolic;
    return j;
}

}  // namespace

std::vector<json> detection_records(const DetectionResult& result, MergeMode mode) {
    std::vector<json> out;
    for (const auto& p : result.patients) {
        const auto& chosen = p.by_mode.at(mode);
        json labels = json::object();
        for (const auto& [m, v] : p.by_mode) labels[std::string(to_string(m))] = v.label;
        json measurements = json::array();
        json statuses = json::array();
        json evidence = json::array();
        for (const auto& v : p.verdicts) {
            for (const auto& m : v.measurements) measurements.push_back(measurement_json(m, v.doc_ref));
            statuses.push_back({{"doc_ref", v.doc_ref}, {"path", to_string(v.path)}, {"status", to_string(v.status)}});
            for (const auto& e : v.evidence_spans) evidence.push_back({{"doc_ref", v.doc_ref}, {"text", e}});
        }
        json rec = {{"patient_id", p.patient_id},
                    {"condition", result.condition},
                    {"mode", to_string(mode)},
                    {"label", chosen.label},
                    {"labels", labels},
                    {"evidence_doc_ids", chosen.evidence_doc_ids},
                    {"measurements", measurements},
                    {"document_statuses", statuses}};
        if (!evidence.empty()) rec["evidence_spans"] = evidence;
        out.push_back(std::move(rec));
    }
    return out;
}

std::map<std::string, std::map<MergeMode, LabelMap>> read_detection_labels(const std::filesystem::path& path) {
    std::map<std::string, std::map<MergeMode, LabelMap>> out;
    for (const auto& [line, rec] : io::read_jsonl(path)) {
        try {
            const auto pid = rec.at("patient_id").get<std::string>();
            const auto cond = rec.at("condition").get<std::string>();
            for (const auto& [name, label] : rec.at("labels").items()) {
                const auto mode = merge_mode_from_string(name);
                if (!mode) throw ValidationError("unknown mode '" + name + "'");
                const int l = label.get<int>();
                if (l != 0 && l != 1) throw ValidationError("label must be 0 or 1");
                out[cond][*mode][pid] = l;
            }
        } catch (const std::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ehrpheno
