#include "ehrpheno/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"
#include "ehrpheno/rng.hpp"

namespace ehrpheno {

using nlohmann::json;

namespace {

bool is_fraction(double v) { return v >= 0.0 && v <= 1.0; }

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

std::string pick(Rng& rng, const std::vector<std::string>& xs) {
    return xs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(xs.size()) - 1))];
}

double tenths(Rng& rng, int lo, int hi) { return static_cast<double>(rng.uniform_int(lo, hi)) / 10.0; }

// Value ranges straddle each rule's threshold: glucose 11.1 mmol/L,
// troponin 14 ng/L, blood pressure 140/90 mmHg.
std::string lab_sentence(std::string_view condition, bool positive, Rng& rng) {
    if (condition == "ami") {
        const auto v = positive ? rng.uniform_int(15, 400) : rng.uniform_int(2, 14);
        return fmt(positive ? "Troponin %.0f ng/L, rising on repeat." : "Troponin %.0f ng/L on repeat testing.",
                   static_cast<double>(v));
    }
    if (condition == "diabetes") {
        const auto v = positive ? tenths(rng, 111, 250) : tenths(rng, 35, 110);
        return fmt(positive ? "Random glucose %.1f mmol/L." : "Fasting glucose %.1f mmol/L this morning.", v);
    }
    if (condition == "hypertension") {
        const auto s = positive ? rng.uniform_int(140, 185) : rng.uniform_int(100, 139);
        const auto d = positive ? rng.uniform_int(90, 115) : rng.uniform_int(55, 89);
        if (rng.bernoulli(0.5)) {
            return fmt("Blood pressure %.0f/%.0f mmHg.", static_cast<double>(s), static_cast<double>(d));
        }
        return fmt("Systolic %.0f, diastolic %.0f on the evening check.", static_cast<double>(s),
                   static_cast<double>(d));
    }
    return {};
}

std::string diagnosis_sentence(const ConditionProfile& p, Rng& rng) {
    const auto years = static_cast<double>(rng.uniform_int(1, 30));
    if (p.name == "ami") {
        static const std::vector<std::string> forms = {
            "Admitted with acute myocardial infarction, onset %.0f hours before arrival.",
            "Diagnosed with NSTEMI, cardiology consulted after %.0f hours.",
            "Inferior STEMI treated with primary PCI within %.0f hours."};
        return fmt(pick(rng, forms).c_str(), years);
    }
    if (p.name == "diabetes") {
        static const std::vector<std::string> forms = {
            "Known type 2 diabetes for %.0f years, continues metformin.",
            "Diabetic for %.0f years, on basal insulin.",
            "Type 1 diabetes diagnosed %.0f years ago."};
        return fmt(pick(rng, forms).c_str(), years);
    }
    if (p.name == "hypertension") {
        static const std::vector<std::string> forms = {
            "Long-standing hypertension for %.0f years on amlodipine.",
            "HTN for %.0f years, blood pressure tablets continued.",
            "Hypertensive for %.0f years, reviewed by the family doctor."};
        return fmt(pick(rng, forms).c_str(), years);
    }
    return "Diagnosed with " + p.display_name + fmt(" %.0f years ago.", years);
}

std::string distractor_sentence(const ConditionProfile& p, Rng& rng) {
    if (p.name == "ami") {
        if (rng.bernoulli(0.5)) return lab_sentence("ami", false, rng);
        return fmt("ECG reviewed at %02.0f:%02.0f, sinus rhythm.", static_cast<double>(rng.uniform_int(0, 23)),
                   static_cast<double>(rng.uniform_int(0, 59)));
    }
    if (p.name == "diabetes" || p.name == "hypertension") return lab_sentence(p.name, false, rng);
    // Custom profiles: mention a keyword without a diagnosis.
    return "Checked " + p.keywords.front() + fmt(" at %.0f hours.", static_cast<double>(rng.uniform_int(0, 23)));
}

const std::vector<std::string>& off_target_types() {
    static const std::vector<std::string> types = [] {
        std::set<std::string> eligible;
        for (auto c : {"ami", "diabetes", "hypertension"}) {
            for (const auto& t : eligible_doc_types(c)) eligible.insert(t);
        }
        std::vector<std::string> out;
        for (const auto& t : default_doc_types()) {
            if (!eligible.count(t)) out.push_back(t);
        }
        return out;
    }();
    return types;
}

}  // namespace

const std::vector<std::string>& routine_sentences() {
    static const std::vector<std::string> s = {
        "Patient seen on the ward round this morning.",
        "Slept well overnight and eating normally.",
        "Mobilising with physiotherapy support.",
        "Family updated at the bedside.",
        "Plan reviewed with the nursing team.",
        "Observations stable during the shift.",
        "Pain controlled with regular analgesia.",
        "Wound dressing changed, site clean and dry.",
        "Bowels opened, no nausea reported.",
        "Discussed discharge planning with social work.",
        "Chest clear on auscultation.",
        "Afebrile, no new concerns raised.",
        "Tolerating oral fluids without difficulty.",
        "Reviewed by the occupational therapist.",
    };
    return s;
}

const std::vector<std::string>& eligible_doc_types(std::string_view condition) {
    // Not DischargeSummary: every patient has one, so planted evidence there is
    // too dilute to lift the type's IR.
    static const std::vector<std::string> common = {"CardiacDischarge", "TransferSummary"};
    static const std::map<std::string, std::vector<std::string>, std::less<>> by_condition = {
        {"ami", {"CardiacDischarge", "TransferSummary", "PatientCare", "EDHandover"}},
        {"diabetes",
         {"CardiacDischarge", "TransferSummary", "OutpatientConsultR", "GoalFlowsheet"}},
        {"hypertension",
         {"CardiacDischarge", "TransferSummary", "GoalAssessment", "AlcoholAssessment"}},
    };
    auto it = by_condition.find(condition);
    return it == by_condition.end() ? common : it->second;
}

void SynthSpec::validate() const {
    if (n_patients < 1) throw ValidationError("n_patients must be at least 1");
    if (min_docs_per_patient < 1 || max_docs_per_patient < min_docs_per_patient) {
        throw ValidationError("docs per patient must satisfy 1 <= min <= max");
    }
    for (const auto& [c, p] : prevalence) {
        if (!is_fraction(p)) throw ValidationError("prevalence of " + c + " outside [0, 1]");
    }
    const std::pair<const char*, double> fractions[] = {
        {"evidence_fraction", evidence_fraction}, {"distractor_rate", distractor_rate},
        {"lab_evidence_rate", lab_evidence_rate}, {"icd_sensitivity", icd_sensitivity},
        {"icd_specificity", icd_specificity}};
    for (const auto& [name, v] : fractions) {
        if (!is_fraction(v)) throw ValidationError(std::string(name) + " outside [0, 1]");
    }
    if (admit_year < 1900 || admit_year > 2200) throw ValidationError("admit_year out of range");
}

json SynthSpec::to_json() const {
    return {{"n_patients", n_patients},
            {"prevalence", prevalence},
            {"min_docs_per_patient", min_docs_per_patient},
            {"max_docs_per_patient", max_docs_per_patient},
            {"evidence_fraction", evidence_fraction},
            {"distractor_rate", distractor_rate},
            {"lab_evidence_rate", lab_evidence_rate},
            {"icd_sensitivity", icd_sensitivity},
            {"icd_specificity", icd_specificity},
            {"admit_year", admit_year},
            {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const json& j) {
    SynthSpec s;
    try {
        s.n_patients = j.value("n_patients", s.n_patients);
        if (j.contains("prevalence")) s.prevalence = j.at("prevalence").get<std::map<std::string, double>>();
        s.min_docs_per_patient = j.value("min_docs_per_patient", s.min_docs_per_patient);
        s.max_docs_per_patient = j.value("max_docs_per_patient", s.max_docs_per_patient);
        s.evidence_fraction = j.value("evidence_fraction", s.evidence_fraction);
        s.distractor_rate = j.value("distractor_rate", s.distractor_rate);
        s.lab_evidence_rate = j.value("lab_evidence_rate", s.lab_evidence_rate);
        s.icd_sensitivity = j.value("icd_sensitivity", s.icd_sensitivity);
        s.icd_specificity = j.value("icd_specificity", s.icd_specificity);
        s.admit_year = j.value("admit_year", s.admit_year);
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("synth config: ") + e.what());
    }
    s.validate();
    return s;
}

SynthResult generate_synthetic(const SynthSpec& spec, const std::vector<ConditionProfile>& profiles) {
    spec.validate();
    if (profiles.empty()) throw ValidationError("synthetic generation needs at least one profile");
    for (const auto& [c, p] : spec.prevalence) {
        const bool known = std::any_of(profiles.begin(), profiles.end(),
                                       [&](const ConditionProfile& pr) { return pr.name == c; });
        if (!known) throw ValidationError("prevalence given for unknown condition '" + c + "'");
    }

    Rng rng(spec.seed);
    const auto& types = default_doc_types();
    const int width = std::max<int>(5, static_cast<int>(std::to_string(spec.n_patients).size()));
    const auto year_start = std::chrono::sys_days{std::chrono::year{spec.admit_year} / 1 / 1};
    const auto year_days =
        (std::chrono::sys_days{std::chrono::year{spec.admit_year + 1} / 1 / 1} - year_start).count();

    std::vector<Patient> patients;
    std::vector<ClinicalDocument> documents;
    std::vector<ReferenceLabel> labels;
    SynthResult result;

    for (int i = 1; i <= spec.n_patients; ++i) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "P%0*d", width, i);
        const std::string pid = idbuf;

        Patient patient;
        patient.patient_id = pid;
        const auto admit = year_start + std::chrono::days{rng.uniform_int(0, year_days - 1)};
        patient.admit_date = std::chrono::year_month_day{admit};
        const auto los = rng.uniform_int(1, 20);
        patient.attributes["sex"] = rng.bernoulli(0.5) ? "F" : "M";
        patient.attributes["age"] = std::to_string(rng.uniform_int(40, 90));
        patient.attributes["los"] = std::to_string(los);
        patients.push_back(patient);

        std::map<std::string, int> planted;
        for (const auto& p : profiles) {
            auto it = spec.prevalence.find(p.name);
            const double prev = it == spec.prevalence.end() ? 0.0 : it->second;
            planted[p.name] = rng.bernoulli(prev) ? 1 : 0;
        }

        int doc_no = 0;
        auto routine_text = [&] {
            std::vector<std::string> sentences;
            const auto k = rng.uniform_int(2, 6);
            for (int s = 0; s < k; ++s) sentences.push_back(pick(rng, routine_sentences()));
            return sentences;
        };
        auto emit = [&](const std::string& type, std::vector<std::string> sentences) {
            for (const auto& p : profiles) {
                if (!rng.bernoulli(spec.distractor_rate)) continue;
                const auto at = rng.uniform_int(0, static_cast<std::int64_t>(sentences.size()));
                sentences.insert(sentences.begin() + at, distractor_sentence(p, rng));
            }
            std::string body;
            for (const auto& s : sentences) {
                if (!body.empty()) body += rng.bernoulli(0.2) ? "\n" : " ";
                body += s;
            }
            char docbuf[48];
            std::snprintf(docbuf, sizeof docbuf, "%s-%02d", pid.c_str(), ++doc_no);
            const auto offset = std::chrono::seconds{rng.uniform_int(0, los * 86400 - 1)};
            documents.push_back({pid, docbuf, type,
                                 std::chrono::time_point_cast<std::chrono::seconds>(
                                     std::chrono::sys_days{admit}) + offset,
                                 std::move(body)});
        };

        const auto n_docs = rng.uniform_int(spec.min_docs_per_patient, spec.max_docs_per_patient);
        for (int d = 0; d < n_docs; ++d) {
            emit(d == 0 ? std::string("DischargeSummary") : pick(rng, types), routine_text());
        }
        for (const auto& p : profiles) {
            if (!planted[p.name]) continue;
            const bool eligible = rng.bernoulli(spec.evidence_fraction);
            const auto type = pick(rng, eligible ? eligible_doc_types(p.name) : off_target_types());
            auto sentences = routine_text();
            const auto at = rng.uniform_int(0, static_cast<std::int64_t>(sentences.size()));
            sentences.insert(sentences.begin() + at, diagnosis_sentence(p, rng));
            if (rng.bernoulli(spec.lab_evidence_rate)) {
                auto lab = lab_sentence(p.name, true, rng);
                if (!lab.empty()) sentences.push_back(std::move(lab));
            }
            emit(type, std::move(sentences));
        }

        for (const auto& p : profiles) {
            const int truth = planted[p.name];
            const int icd = truth ? (rng.bernoulli(spec.icd_sensitivity) ? 1 : 0)
                                  : (rng.bernoulli(spec.icd_specificity) ? 0 : 1);
            labels.push_back({pid, p.name, truth, icd});
            result.truth[p.name][pid] = truth;
        }
    }

    result.cohort = Cohort::build(std::move(patients), std::move(documents), std::move(labels));
    return result;
}

}  // namespace ehrpheno
