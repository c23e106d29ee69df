#include "ehrpheno/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"
#include "ehrpheno/rng.hpp"
#include "ehrpheno/text.hpp"

namespace ehrpheno {

using nlohmann::json;

DocTypeSamples sample_document_types(const Cohort& cohort, int m, std::uint64_t seed) {
    if (m < 1) throw ValidationError("sample size m must be at least 1, got " + std::to_string(m));
    std::map<std::string, std::vector<const ClinicalDocument*>> by_type;
    for (const auto& d : cohort.documents()) by_type[d.doc_type].push_back(&d);

    DocTypeSamples out;
    for (auto& [type, docs] : by_type) {
        std::sort(docs.begin(), docs.end(),
                  [](const ClinicalDocument* a, const ClinicalDocument* b) { return a->doc_id < b->doc_id; });
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(m), docs.size());
        Rng rng(seed ^ fnv1a64(type));
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                    static_cast<std::int64_t>(docs.size() - 1)));
            std::swap(docs[i], docs[j]);
        }
        std::vector<ClinicalDocument> picked;
        picked.reserve(take);
        for (std::size_t i = 0; i < take; ++i) picked.push_back(*docs[i]);
        std::sort(picked.begin(), picked.end(),
                  [](const ClinicalDocument& a, const ClinicalDocument& b) { return a.doc_id < b.doc_id; });
        out.emplace(type, std::move(picked));
    }
    return out;
}

std::vector<DocTypeProfile> compute_information_relevance(
    const DocTypeSamples& samples, const std::map<std::string, InferredStatus>& verdicts,
    IrDenominator denominator, int m) {
    if (denominator == IrDenominator::RequestedM && m < 1) {
        throw ValidationError("IR over m needs m >= 1");
    }
    std::vector<DocTypeProfile> out;
    for (const auto& [type, docs] : samples) {
        DocTypeProfile p;
        p.doc_type = type;
        p.sampled_count = static_cast<int>(docs.size());
        for (const auto& d : docs) {
            auto it = verdicts.find(d.doc_id);
            if (it == verdicts.end()) {
                throw ValidationError("no profiling verdict for sampled document " + d.doc_id);
            }
            if (it->second == InferredStatus::Yes) ++p.positive_count;
        }
        const int denom = denominator == IrDenominator::Sampled ? p.sampled_count
                                                                : std::max(m, p.sampled_count);
        p.ir = denom > 0 ? static_cast<double>(p.positive_count) / denom : 0.0;
        out.push_back(std::move(p));
    }
    return out;
}

double parse_percentile(std::string_view s) {
    const auto lowered = text::to_lower(text::trim(s));
    if (lowered == "q1") return 25.0;
    if (lowered == "q2") return 50.0;
    if (lowered == "q3") return 75.0;
    try {
        std::size_t used = 0;
        const double p = std::stod(lowered, &used);
        if (used == lowered.size() && p >= 0.0 && p <= 100.0) return p;
    } catch (const std::exception&) {
    }
    throw ValidationError("percentile must be 0, q1, q2 or a number in [0, 100], got '" +
                          std::string(s) + "'");
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of an empty set");
    if (p <= 0.0) return 0.0;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

FilterPlan filter_document_types(const std::vector<DocTypeProfile>& profiles, double percentile,
                                 std::string condition) {
    if (profiles.empty()) throw ValidationError("no document-type profiles to filter");
    if (percentile < 0.0 || percentile > 100.0) {
        throw ValidationError("percentile out of [0, 100]: " + io::format_double(percentile));
    }
    FilterPlan plan;
    plan.condition = std::move(condition);
    plan.percentile = percentile;
    std::vector<double> irs;
    irs.reserve(profiles.size());
    for (const auto& p : profiles) irs.push_back(p.ir);
    plan.threshold_value = nearest_rank_percentile(std::move(irs), percentile);
    for (const auto& p : profiles) {
        if (p.ir > plan.threshold_value) plan.kept_types.insert(p.doc_type);
    }
    return plan;
}

std::vector<std::string> MergedDocument::source_doc_ids() const {
    std::vector<std::string> out;
    for (const auto& s : provenance) {
        if (std::find(out.begin(), out.end(), s.doc_id) == out.end()) out.push_back(s.doc_id);
    }
    return out;
}

const MergedDocument* ConsolidatedCorpus::find(std::string_view patient_id) const {
    auto it = std::lower_bound(documents.begin(), documents.end(), patient_id,
                               [](const MergedDocument& d, std::string_view id) { return d.patient_id < id; });
    return it != documents.end() && it->patient_id == patient_id ? &*it : nullptr;
}

ConsolidationStats retention_report(const Cohort& before, const ConsolidatedCorpus& after,
                                    int kept_type_count) {
    ConsolidationStats s;
    s.kept_type_count = kept_type_count;
    for (const auto& d : before.documents()) s.words_before += text::count_words(d.text);
    for (const auto& d : after.documents) s.words_after += text::count_words(d.text);
    s.words_fraction_remaining =
        s.words_before > 0 ? static_cast<double>(s.words_after) / static_cast<double>(s.words_before) : 1.0;
    s.words_fraction_remaining = std::min(1.0, s.words_fraction_remaining);
    for (const auto& [pid, label] : before.registry_labels(after.condition)) {
        if (label != 1) continue;
        ++s.positives_before;
        if (after.find(pid)) ++s.positives_retained;
    }
    if (s.positives_before > 0) {
        s.positive_retention = static_cast<double>(s.positives_retained) / s.positives_before;
    }
    return s;
}

std::pair<ConsolidatedCorpus, ConsolidationStats> consolidate(const Cohort& cohort,
                                                              const FilterPlan& plan,
                                                              const ConditionProfile& profile) {
    if (!plan.condition.empty() && plan.condition != profile.name) {
        throw ValidationError("filter plan for '" + plan.condition + "' applied to profile '" +
                              profile.name + "'");
    }
    std::vector<std::string> keywords;
    for (const auto& k : profile.keywords) keywords.push_back(text::to_lower(k));

    ConsolidatedCorpus corpus;
    corpus.condition = profile.name;
    for (const auto& patient : cohort.patients()) {
        std::vector<const ClinicalDocument*> kept;
        for (auto idx : cohort.documents_of(patient.patient_id)) {
            const auto& d = cohort.documents()[idx];
            if (plan.kept_types.count(d.doc_type)) kept.push_back(&d);
        }
        if (kept.empty()) {
            corpus.condition_free.insert(patient.patient_id);
            continue;
        }
        std::sort(kept.begin(), kept.end(), [](const ClinicalDocument* a, const ClinicalDocument* b) {
            return std::tie(a->timestamp, a->doc_id) < std::tie(b->timestamp, b->doc_id);
        });

        MergedDocument merged;
        merged.patient_id = patient.patient_id;
        merged.condition = profile.name;
        for (const auto* d : kept) {
            const auto lowered = text::to_lower(d->text);
            for (const auto& span : text::split_sentences(d->text)) {
                const auto sentence = std::string_view(lowered).substr(span.offset, span.length);
                const bool hit = std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
                    return text::keyword_matches(sentence, k);
                });
                if (!hit) continue;
                if (merged.provenance.empty()) merged.timestamp = d->timestamp;
                if (!merged.text.empty()) merged.text += '\n';
                merged.provenance.push_back({d->doc_id, span.offset, span.length, merged.text.size()});
                merged.text.append(d->text, span.offset, span.length);
            }
        }
        if (!merged.provenance.empty()) corpus.documents.push_back(std::move(merged));
    }
    std::sort(corpus.documents.begin(), corpus.documents.end(),
              [](const MergedDocument& a, const MergedDocument& b) { return a.patient_id < b.patient_id; });
    auto stats = retention_report(cohort, corpus, static_cast<int>(plan.kept_types.size()));
    return {std::move(corpus), stats};
}

std::string serialize_consolidated(const ConsolidatedCorpus& corpus) {
    std::vector<json> recs;
    recs.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) {
        json prov = json::array();
        for (const auto& s : d.provenance) {
            prov.push_back({{"doc_id", s.doc_id},
                            {"offset", s.source_offset},
                            {"length", s.length},
                            {"merged_offset", s.merged_offset}});
        }
        recs.push_back({{"patient_id", d.patient_id},
                        {"doc_id", d.doc_id()},
                        {"doc_type", kMergedDocType},
                        {"timestamp", format_timestamp(d.timestamp)},
                        {"text", d.text},
                        {"condition", d.condition},
                        {"provenance", prov}});
    }
    return io::to_jsonl(recs);
}

ConsolidatedCorpus read_consolidated(const std::filesystem::path& path, std::string_view condition) {
    ConsolidatedCorpus corpus;
    corpus.condition = condition;
    for (const auto& [line, rec] : io::read_jsonl(path)) {
        const auto where = path.string() + ":" + std::to_string(line);
        try {
            MergedDocument d;
            d.patient_id = rec.at("patient_id").get<std::string>();
            d.condition = rec.at("condition").get<std::string>();
            d.text = rec.at("text").get<std::string>();
            const auto ts = parse_timestamp(rec.at("timestamp").get<std::string>());
            if (!ts) throw ValidationError(where + ": bad timestamp");
            d.timestamp = *ts;
            if (d.condition != condition) {
                throw ValidationError(where + ": record for condition '" + d.condition + "', expected '" +
                                      std::string(condition) + "'");
            }
            for (const auto& s : rec.at("provenance")) {
                d.provenance.push_back({s.at("doc_id").get<std::string>(), s.at("offset").get<std::size_t>(),
                                        s.at("length").get<std::size_t>(),
                                        s.at("merged_offset").get<std::size_t>()});
            }
            corpus.documents.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    std::sort(corpus.documents.begin(), corpus.documents.end(),
              [](const MergedDocument& a, const MergedDocument& b) { return a.patient_id < b.patient_id; });
    return corpus;
}

void verify_provenance(const Cohort& cohort, const ConsolidatedCorpus& corpus) {
    std::map<std::string_view, const ClinicalDocument*> by_id;
    for (const auto& d : cohort.documents()) by_id.emplace(d.doc_id, &d);
    for (const auto& m : corpus.documents) {
        for (const auto& s : m.provenance) {
            auto it = by_id.find(s.doc_id);
            if (it == by_id.end()) throw ValidationError("provenance names unknown document " + s.doc_id);
            const auto& src = it->second->text;
            if (s.source_offset + s.length > src.size() || s.merged_offset + s.length > m.text.size() ||
                src.compare(s.source_offset, s.length, m.text, s.merged_offset, s.length) != 0) {
                throw ValidationError("merged text of " + m.doc_id() + " does not match " + s.doc_id +
                                      " at offset " + std::to_string(s.source_offset));
            }
        }
    }
}

}  // namespace ehrpheno
