#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ehrpheno {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

/// Accepts "YYYY-MM-DD", optionally followed by 'T' or ' ' and "HH:MM[:SS]"
/// and an optional trailing 'Z'. Missing time components are midnight.
std::optional<Timestamp> parse_timestamp(std::string_view s);
std::optional<Date> parse_date(std::string_view s);
std::string format_timestamp(Timestamp t);
std::string format_date(Date d);
/// "YYYY-MM"
std::string format_month(Date d);

struct ClinicalDocument {
    std::string patient_id;
    std::string doc_id;
    std::string doc_type;
    Timestamp timestamp{};
    std::string text;

    bool operator==(const ClinicalDocument&) const = default;
};

struct Patient {
    std::string patient_id;
    Date admit_date{};
    std::map<std::string, std::string> attributes;

    bool operator==(const Patient&) const = default;
};

struct ReferenceLabel {
    std::string patient_id;
    std::string condition;
    int registry_label = 0;
    std::optional<int> icd_label;

    bool operator==(const ReferenceLabel&) const = default;
};

/// patient_id -> label
using LabelMap = std::map<std::string, int>;

/// Validated, immutable set of patients, their documents and reference
/// labels. Construct through Cohort::build, which enforces referential
/// integrity and uniqueness.
class Cohort {
public:
    Cohort() = default;

    static Cohort build(std::vector<Patient> patients, std::vector<ClinicalDocument> documents,
                        std::vector<ReferenceLabel> labels);

    const std::vector<Patient>& patients() const { return patients_; }
    const std::vector<ClinicalDocument>& documents() const { return documents_; }
    const std::vector<ReferenceLabel>& labels() const { return labels_; }

    const Patient* find_patient(std::string_view patient_id) const;
    /// Indices into documents(), in file order.
    const std::vector<std::size_t>& documents_of(std::string_view patient_id) const;

    /// Registry labels for one condition (patients without a label are absent).
    LabelMap registry_labels(std::string_view condition) const;
    /// ICD labels for one condition; patients lacking an ICD label are absent.
    LabelMap icd_labels(std::string_view condition) const;
    std::vector<std::string> conditions() const;

    bool operator==(const Cohort& other) const {
        return patients_ == other.patients_ && documents_ == other.documents_ &&
               labels_ == other.labels_;
    }

private:
    std::vector<Patient> patients_;
    std::vector<ClinicalDocument> documents_;
    std::vector<ReferenceLabel> labels_;
    std::unordered_map<std::string, std::size_t> patient_index_;
    std::unordered_map<std::string, std::vector<std::size_t>> docs_by_patient_;
};

std::vector<ClinicalDocument> read_documents(const std::filesystem::path& path);
std::vector<Patient> read_patients(const std::filesystem::path& path);
std::vector<ReferenceLabel> read_labels(const std::filesystem::path& path);

Cohort load_cohort(const std::filesystem::path& documents_path,
                   const std::filesystem::path& patients_path,
                   const std::filesystem::path& labels_path);

std::string serialize_documents(const std::vector<ClinicalDocument>& docs);
std::string serialize_patients(const std::vector<Patient>& patients);
std::string serialize_labels(const std::vector<ReferenceLabel>& labels);

/// Writes documents.jsonl, patients.jsonl and labels.jsonl into `dir`.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

/// Shortened document-type names shipped as the default vocabulary. Not
/// enforced on load.
const std::vector<std::string>& default_doc_types();

}  // namespace ehrpheno
