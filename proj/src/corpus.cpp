#include "ehrpheno/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ehrpheno {

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return true;
}

}  // namespace

std::optional<Date> parse_date(std::string_view s) {
    int y = 0, m = 0, d = 0;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!read_int(s, 0, 4, y) || !read_int(s, 5, 2, m) || !read_int(s, 8, 2, d)) {
        return std::nullopt;
    }
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

std::optional<Timestamp> parse_timestamp(std::string_view s) {
    auto date = parse_date(s);
    if (!date) return std::nullopt;
    std::string_view rest = s.substr(10);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
    int hh = 0, mm = 0, ss = 0;
    if (!rest.empty()) {
        if (rest[0] != 'T' && rest[0] != ' ') return std::nullopt;
        rest.remove_prefix(1);
        if (rest.size() != 5 && rest.size() != 8) return std::nullopt;
        if (!read_int(rest, 0, 2, hh) || rest[2] != ':' || !read_int(rest, 3, 2, mm)) {
            return std::nullopt;
        }
        if (rest.size() == 8 && (rest[5] != ':' || !read_int(rest, 6, 2, ss))) {
            return std::nullopt;
        }
        if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    }
    return std::chrono::sys_days{*date} + std::chrono::hours{hh} + std::chrono::minutes{mm} +
           std::chrono::seconds{ss};
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::string format_month(Date d) { return format_date(d).substr(0, 7); }

std::string format_timestamp(Timestamp t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::hh_mm_ss hms{t - day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return format_date(Date{day}) + buf;
}

// ---------------------------------------------------------------------------
// Cohort

Cohort Cohort::build(std::vector<Patient> patients, std::vector<ClinicalDocument> documents,
                     std::vector<ReferenceLabel> labels) {
    Cohort c;
    for (std::size_t i = 0; i < patients.size(); ++i) {
        if (patients[i].patient_id.empty()) throw ValidationError("patient with empty patient_id");
        if (!c.patient_index_.emplace(patients[i].patient_id, i).second) {
            throw ValidationError("duplicate patient_id " + patients[i].patient_id);
        }
    }
    std::set<std::string_view> doc_ids;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        const auto& d = documents[i];
        if (!c.patient_index_.count(d.patient_id)) {
            throw ValidationError("document " + d.doc_id + " references unknown patient " +
                                  d.patient_id);
        }
        if (d.doc_type.empty()) throw ValidationError("document " + d.doc_id + " has empty doc_type");
        if (!doc_ids.insert(d.doc_id).second) {
            throw ValidationError("duplicate doc_id " + d.doc_id);
        }
        c.docs_by_patient_[d.patient_id].push_back(i);
    }
    std::set<std::pair<std::string_view, std::string_view>> label_keys;
    for (const auto& l : labels) {
        if (!c.patient_index_.count(l.patient_id)) {
            throw ValidationError("label references unknown patient " + l.patient_id);
        }
        if (!label_keys.emplace(l.patient_id, l.condition).second) {
            throw ValidationError("duplicate label for (" + l.patient_id + ", " + l.condition + ")");
        }
        if ((l.registry_label != 0 && l.registry_label != 1) ||
            (l.icd_label && *l.icd_label != 0 && *l.icd_label != 1)) {
            throw ValidationError("non-binary label for (" + l.patient_id + ", " + l.condition + ")");
        }
    }
    c.patients_ = std::move(patients);
    c.documents_ = std::move(documents);
    c.labels_ = std::move(labels);
    return c;
}

const Patient* Cohort::find_patient(std::string_view patient_id) const {
    auto it = patient_index_.find(std::string(patient_id));
    return it == patient_index_.end() ? nullptr : &patients_[it->second];
}

const std::vector<std::size_t>& Cohort::documents_of(std::string_view patient_id) const {
    static const std::vector<std::size_t> none;
    auto it = docs_by_patient_.find(std::string(patient_id));
    return it == docs_by_patient_.end() ? none : it->second;
}

LabelMap Cohort::registry_labels(std::string_view condition) const {
    LabelMap out;
    for (const auto& l : labels_) {
        if (l.condition == condition) out[l.patient_id] = l.registry_label;
    }
    return out;
}

LabelMap Cohort::icd_labels(std::string_view condition) const {
    LabelMap out;
    for (const auto& l : labels_) {
        if (l.condition == condition && l.icd_label) out[l.patient_id] = *l.icd_label;
    }
    return out;
}

std::vector<std::string> Cohort::conditions() const {
    std::set<std::string> s;
    for (const auto& l : labels_) s.insert(l.condition);
    return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// File format

namespace {

[[noreturn]] void bad_record(const fs::path& path, std::size_t line, const std::string& what) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::string string_field(const json& rec, const char* name, const fs::path& path,
                         std::size_t line, bool allow_empty = false) {
    auto it = rec.find(name);
    if (it == rec.end()) bad_record(path, line, std::string("missing field '") + name + "'");
    if (!it->is_string()) bad_record(path, line, std::string("field '") + name + "' is not a string");
    auto value = it->get<std::string>();
    if (!allow_empty && value.empty()) {
        bad_record(path, line, std::string("field '") + name + "' is empty");
    }
    return value;
}

int binary_field(const json& value, const char* name, const fs::path& path, std::size_t line) {
    if (value.is_boolean()) return value.get<bool>() ? 1 : 0;
    if (value.is_number_integer()) {
        auto v = value.get<long long>();
        if (v == 0 || v == 1) return static_cast<int>(v);
    }
    bad_record(path, line, std::string("field '") + name + "' must be 0 or 1");
}

std::vector<ClinicalDocument> read_documents_impl(const fs::path& path,
                                                  std::vector<std::size_t>* lines) {
    std::vector<ClinicalDocument> out;
    for (const auto& [line, rec] : io::read_jsonl(path)) {
        if (lines) lines->push_back(line);
        ClinicalDocument d;
        d.patient_id = string_field(rec, "patient_id", path, line);
        d.doc_id = string_field(rec, "doc_id", path, line);
        d.doc_type = string_field(rec, "doc_type", path, line);
        auto ts = string_field(rec, "timestamp", path, line);
        auto parsed = parse_timestamp(ts);
        if (!parsed) bad_record(path, line, "field 'timestamp' is not ISO 8601: " + ts);
        d.timestamp = *parsed;
        d.text = string_field(rec, "text", path, line, true);
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<ReferenceLabel> read_labels_impl(const fs::path& path,
                                             std::vector<std::size_t>* lines) {
    std::vector<ReferenceLabel> out;
    for (const auto& [line, rec] : io::read_jsonl(path)) {
        if (lines) lines->push_back(line);
        ReferenceLabel l;
        l.patient_id = string_field(rec, "patient_id", path, line);
        l.condition = string_field(rec, "condition", path, line);
        auto reg = rec.find("registry_label");
        if (reg == rec.end()) bad_record(path, line, "missing field 'registry_label'");
        l.registry_label = binary_field(*reg, "registry_label", path, line);
        if (auto icd = rec.find("icd_label"); icd != rec.end() && !icd->is_null()) {
            l.icd_label = binary_field(*icd, "icd_label", path, line);
        }
        out.push_back(std::move(l));
    }
    return out;
}

}  // namespace

std::vector<ClinicalDocument> read_documents(const fs::path& path) {
    return read_documents_impl(path, nullptr);
}

std::vector<ReferenceLabel> read_labels(const fs::path& path) {
    return read_labels_impl(path, nullptr);
}

std::vector<Patient> read_patients(const fs::path& path) {
    std::vector<Patient> out;
    for (const auto& [line, rec] : io::read_jsonl(path)) {
        Patient p;
        p.patient_id = string_field(rec, "patient_id", path, line);
        auto admit = string_field(rec, "admit_date", path, line);
        auto date = parse_date(admit.substr(0, 10));
        if (!date || (admit.size() > 10 && !parse_timestamp(admit))) {
            bad_record(path, line, "field 'admit_date' is not a valid date: " + admit);
        }
        p.admit_date = *date;
        if (auto it = rec.find("attributes"); it != rec.end() && !it->is_null()) {
            if (!it->is_object()) bad_record(path, line, "field 'attributes' is not an object");
            for (const auto& [k, v] : it->items()) {
                p.attributes[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

Cohort load_cohort(const fs::path& documents_path, const fs::path& patients_path,
                   const fs::path& labels_path) {
    auto patients = read_patients(patients_path);
    std::set<std::string> ids;
    for (const auto& p : patients) ids.insert(p.patient_id);

    // Dangling references are reported here, where the line number is known.
    std::vector<std::size_t> doc_lines;
    auto documents = read_documents_impl(documents_path, &doc_lines);
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (!ids.count(documents[i].patient_id)) {
            bad_record(documents_path, doc_lines[i],
                       "unknown patient_id " + documents[i].patient_id);
        }
    }
    std::vector<std::size_t> label_lines;
    auto labels = read_labels_impl(labels_path, &label_lines);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!ids.count(labels[i].patient_id)) {
            bad_record(labels_path, label_lines[i], "unknown patient_id " + labels[i].patient_id);
        }
    }
    return Cohort::build(std::move(patients), std::move(documents), std::move(labels));
}

std::string serialize_documents(const std::vector<ClinicalDocument>& docs) {
    std::vector<json> recs;
    recs.reserve(docs.size());
    for (const auto& d : docs) {
        recs.push_back({{"patient_id", d.patient_id},
                        {"doc_id", d.doc_id},
                        {"doc_type", d.doc_type},
                        {"timestamp", format_timestamp(d.timestamp)},
                        {"text", d.text}});
    }
    return io::to_jsonl(recs);
}

std::string serialize_patients(const std::vector<Patient>& patients) {
    std::vector<json> recs;
    for (const auto& p : patients) {
        json attrs = json::object();
        for (const auto& [k, v] : p.attributes) attrs[k] = v;
        recs.push_back({{"patient_id", p.patient_id},
                        {"admit_date", format_date(p.admit_date)},
                        {"attributes", attrs}});
    }
    return io::to_jsonl(recs);
}

std::string serialize_labels(const std::vector<ReferenceLabel>& labels) {
    std::vector<json> recs;
    for (const auto& l : labels) {
        json r = {{"patient_id", l.patient_id},
                  {"condition", l.condition},
                  {"registry_label", l.registry_label}};
        if (l.icd_label) r["icd_label"] = *l.icd_label;
        recs.push_back(std::move(r));
    }
    return io::to_jsonl(recs);
}

void write_cohort(const Cohort& cohort, const fs::path& dir) {
    io::write_file_atomic(dir / "documents.jsonl", serialize_documents(cohort.documents()));
    io::write_file_atomic(dir / "patients.jsonl", serialize_patients(cohort.patients()));
    io::write_file_atomic(dir / "labels.jsonl", serialize_labels(cohort.labels()));
}

const std::vector<std::string>& default_doc_types() {
    static const std::vector<std::string> types = {
        "PainSummary",       "TraumaReport",       "AdultTriage",        "BloodLog",
        "CardiacDiagnostic", "ClinicalRecord",     "SurgeryRecord",      "CardiacDischarge",
        "GeneralDischarge",  "HospitalistSummary", "MedicalSummary",     "OrthopedicSummary",
        "StrokeSummary",     "ShortSummary",       "ThoracicSummary",    "DischargeSummary",
        "EDHandover",        "GoalAssessment",     "GoalFlowsheet",      "ComprehensiveExam",
        "HistorySummary",    "InpatientConsultLog", "InpatientConsult",  "OperativeReport",
        "PsychiatricReview", "SurgOutcome",        "SurgFlowsheet",      "MentalOutcome",
        "HealthFlowsheet",   "NeuroDiagnostic",    "EDTransfer",         "InpatientTransfer",
        "HealthTransfer",    "PACUTransfer",       "OutpatientConsultR", "OutpatientConsult",
        "OutpatientProceLog", "VascularAccess",    "NueroAssessment",    "PatientCare",
        "PharmacyPlan",      "SocialWork",         "NursingAssessment",  "TransferSummary",
        "AlcoholAssessment",
    };
    return types;
}

}  // namespace ehrpheno
