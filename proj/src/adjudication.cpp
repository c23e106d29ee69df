#include "ehrpheno/adjudication.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "ehrpheno/errors.hpp"

namespace ehrpheno {

std::string_view to_string(InferredStatus s) {
    switch (s) {
        case InferredStatus::Yes: return "Yes";
        case InferredStatus::No: return "No";
        case InferredStatus::NoMention: return "NoMention";
    }
    return "?";
}

std::optional<InferredStatus> status_from_string(std::string_view s) {
    if (s == "Yes") return InferredStatus::Yes;
    if (s == "No") return InferredStatus::No;
    if (s == "NoMention") return InferredStatus::NoMention;
    return std::nullopt;
}

std::string_view to_string(VerdictPath p) {
    return p == VerdictPath::Inference ? "inference" : "extraction";
}

std::string_view to_string(MergeMode m) {
    switch (m) {
        case MergeMode::Prompt1: return "prompt1";
        case MergeMode::Prompt2: return "prompt2";
        case MergeMode::Merged: return "merged";
    }
    return "?";
}

std::optional<MergeMode> merge_mode_from_string(std::string_view s) {
    if (s == "prompt1") return MergeMode::Prompt1;
    if (s == "prompt2") return MergeMode::Prompt2;
    if (s == "merged") return MergeMode::Merged;
    return std::nullopt;
}

InferredStatus parse_inference_response(std::string_view response) {
    const auto head = text::to_lower(response.substr(0, std::min(response.size(), kInferenceHeadChars)));
    if (text::contains_bounded(head, "no mention")) return InferredStatus::NoMention;
    if (text::contains_bounded(head, "yes")) return InferredStatus::Yes;
    if (text::contains_bounded(head, "no")) return InferredStatus::No;
    return InferredStatus::NoMention;
}

// ---------------------------------------------------------------------------
// Extraction parsing

namespace {

struct NumberToken {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string raw;
    double value = 0.0;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::optional<double> to_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Numbers not glued to a preceding word character ("a1c" and "hba1c" hold
/// no numbers) and with at most one decimal point.
std::vector<NumberToken> scan_numbers(std::string_view s) {
    std::vector<NumberToken> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_digit(s[i]) || (i > 0 && (text::is_word_char(s[i - 1]) || s[i - 1] == '.'))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && is_digit(s[j])) ++j;
        if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
            ++j;
            while (j < s.size() && is_digit(s[j])) ++j;
        }
        if (j < s.size() && (text::is_word_char(s[j]) && !std::isalpha(static_cast<unsigned char>(s[j])))) {
            // Digits glued to non-ASCII text.
            i = j;
            continue;
        }
        NumberToken t{i, j, std::string(s.substr(i, j - i)), 0.0};
        t.value = to_double(t.raw).value_or(0.0);
        out.push_back(std::move(t));
        i = j;
    }
    return out;
}

/// If `s` at `pos` (after optional spaces) starts with one of `units` as a
/// whole token, returns the unit as written and sets `end`.
std::optional<std::string> unit_after(std::string_view s, std::string_view lowered, std::size_t pos,
                                      std::initializer_list<std::string_view> units, std::size_t& end) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    for (auto u : units) {
        if (lowered.compare(pos, u.size(), u) != 0) continue;
        const auto e = pos + u.size();
        if (e < s.size() && text::is_word_char(s[e])) continue;
        end = e;
        return std::string(s.substr(pos, u.size()));
    }
    return std::nullopt;
}

/// Decimal-point shift on the written digits, so "1.16" ng/mL becomes
/// exactly 1160 ng/L with no binary rounding from a multiply.
double shift_decimal(std::string_view raw, int places) {
    std::string int_part(raw.substr(0, raw.find('.')));
    std::string frac_part = raw.find('.') == std::string_view::npos
                                ? std::string()
                                : std::string(raw.substr(raw.find('.') + 1));
    while (static_cast<int>(frac_part.size()) < places) frac_part += '0';
    std::string digits = int_part + frac_part.substr(0, places);
    std::string rest = frac_part.substr(places);
    std::string shifted = digits + (rest.empty() ? "" : "." + rest);
    return to_double(shifted).value_or(0.0);
}

const std::vector<std::string_view>& foreign_analytes(Analyte a) {
    static const std::vector<std::string_view> chemistry = {
        "potassium", "sodium",  "chloride", "creatinine",   "urea",        "cholesterol",
        "ldl",       "hdl",     "triglyceride", "lactate",  "bicarbonate", "calcium",
        "magnesium", "phosphate", "ketone", "osmolality"};
    static const std::vector<std::string_view> cardiac = {"bnp",   "probnp",   "nt-probnp", "ck-mb",
                                                          "ckmb",  "d-dimer",  "ferritin",
                                                          "procalcitonin", "myoglobin"};
    static const std::vector<std::string_view> none;
    switch (a) {
        case Analyte::Glucose: return chemistry;
        case Analyte::Troponin: return cardiac;
        case Analyte::BloodPressure: return none;
    }
    return none;
}

bool names_other_analyte(std::string_view lowered_context, Analyte a) {
    for (auto name : foreign_analytes(a)) {
        if (text::contains_bounded(lowered_context, name)) return true;
    }
    return false;
}

void warn(std::vector<std::string>* warnings, std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
}

std::vector<LabMeasurement> parse_unit_values(std::string_view s, Analyte analyte,
                                              std::vector<std::string>* warnings) {
    const auto lowered = text::to_lower(s);
    std::vector<LabMeasurement> out;
    std::size_t context_start = 0;
    for (const auto& num : scan_numbers(s)) {
        if (num.begin < context_start) continue;
        std::size_t unit_end = 0;
        std::optional<std::string> unit =
            analyte == Analyte::Glucose
                ? unit_after(s, lowered, num.end, {"mmol/l"}, unit_end)
                : unit_after(s, lowered, num.end, {"ng/ml", "ng/l"}, unit_end);
        if (!unit) continue;
        const auto context = std::string_view(lowered).substr(context_start, num.begin - context_start);
        context_start = unit_end;
        if (names_other_analyte(context, analyte)) continue;

        LabMeasurement m;
        m.analyte = analyte;
        m.raw_value = num.value;
        m.raw_unit = *unit;
        if (analyte == Analyte::Troponin && text::to_lower(*unit) == "ng/ml") {
            m.normalized_value = shift_decimal(num.raw, 3);
        } else {
            m.normalized_value = num.value;
        }
        const bool plausible = analyte == Analyte::Glucose
                                   ? m.normalized_value > 0.5 && m.normalized_value <= 100.0
                                   : m.normalized_value > 0.0 && m.normalized_value <= 1e6;
        if (!plausible) {
            warn(warnings, "dropped implausible " + std::string(to_string(analyte)) + " value " +
                               num.raw + " " + *unit);
            continue;
        }
        out.push_back(std::move(m));
    }
    return out;
}

struct BpEvent {
    std::size_t pos = 0;
    enum Kind { Systolic, Diastolic, Pair } kind = Pair;
    double first = 0.0;
    double second = 0.0;
};

/// After a systolic/diastolic cue: skip spaces, an optional "bp" or
/// "blood pressure", and separators, then expect a number.
std::optional<NumberToken> number_after_cue(std::string_view lowered, std::size_t pos,
                                            const std::vector<NumberToken>& numbers) {
    auto skip = [&](std::size_t p) {
        while (p < lowered.size() && (lowered[p] == ' ' || lowered[p] == '\t' || lowered[p] == ':' ||
                                      lowered[p] == '=' || lowered[p] == '-')) {
            ++p;
        }
        return p;
    };
    pos = skip(pos);
    for (std::string_view filler : {"blood pressure", "bp", "pressure", "reading", "is", "was", "of"}) {
        if (lowered.compare(pos, filler.size(), filler) == 0 &&
            (pos + filler.size() == lowered.size() || !text::is_word_char(lowered[pos + filler.size()]))) {
            pos = skip(pos + filler.size());
        }
    }
    for (const auto& n : numbers) {
        if (n.begin == pos) return n;
    }
    return std::nullopt;
}

std::vector<LabMeasurement> parse_blood_pressure(std::string_view s, std::vector<std::string>* warnings) {
    const auto lowered = text::to_lower(s);
    const auto numbers = scan_numbers(s);
    std::vector<BpEvent> events;

    const std::pair<std::string_view, BpEvent::Kind> cues[] = {
        {"systolic", BpEvent::Systolic}, {"sbp", BpEvent::Systolic},
        {"diastolic", BpEvent::Diastolic}, {"dbp", BpEvent::Diastolic}};
    for (const auto& [cue, kind] : cues) {
        for (auto pos : text::find_bounded(lowered, cue)) {
            if (auto n = number_after_cue(lowered, pos + cue.size(), numbers)) {
                events.push_back({pos, kind, n->value, 0.0});
            }
        }
    }

    // "N/M" readings next to a pressure cue or followed by mmHg.
    std::size_t context_start = 0;
    for (std::size_t k = 0; k + 1 < numbers.size(); ++k) {
        const auto& a = numbers[k];
        const auto& b = numbers[k + 1];
        if (a.begin < context_start) continue;
        std::size_t p = a.end;
        while (p < s.size() && s[p] == ' ') ++p;
        if (p >= s.size() || s[p] != '/') continue;
        ++p;
        while (p < s.size() && s[p] == ' ') ++p;
        if (p != b.begin) continue;
        std::size_t unit_end = 0;
        const bool has_unit = unit_after(s, lowered, b.end, {"mmhg", "mm hg"}, unit_end).has_value();
        const auto window_begin = a.begin > 40 ? std::max(context_start, a.begin - 40) : context_start;
        const auto context = std::string_view(lowered).substr(window_begin, a.begin - window_begin);
        const bool has_cue = text::contains_bounded(context, "bp") ||
                             context.find("pressure") != std::string_view::npos ||
                             context.find("b/p") != std::string_view::npos;
        if (!has_unit && !has_cue) continue;
        events.push_back({a.begin, BpEvent::Pair, a.value, b.value});
        context_start = has_unit ? unit_end : b.end;
    }

    std::sort(events.begin(), events.end(),
              [](const BpEvent& x, const BpEvent& y) { return x.pos < y.pos; });

    std::vector<LabMeasurement> out;
    auto make = [&](std::optional<double> sys, std::optional<double> dia) {
        if (sys && (*sys < 50.0 || *sys > 300.0)) {
            warn(warnings, "dropped implausible systolic value " + std::to_string(*sys));
            sys.reset();
        }
        if (dia && (*dia < 20.0 || *dia > 200.0)) {
            warn(warnings, "dropped implausible diastolic value " + std::to_string(*dia));
            dia.reset();
        }
        if (!sys && !dia) return;
        LabMeasurement m;
        m.analyte = Analyte::BloodPressure;
        m.raw_value = sys ? *sys : *dia;
        m.raw_unit = "mmHg";
        m.normalized_value = m.raw_value;
        m.systolic = sys;
        m.diastolic = dia;
        out.push_back(std::move(m));
    };

    std::optional<double> sys, dia;
    auto flush = [&] {
        if (sys || dia) make(sys, dia);
        sys.reset();
        dia.reset();
    };
    for (const auto& e : events) {
        switch (e.kind) {
            case BpEvent::Systolic:
                if (sys) flush();
                sys = e.first;
                break;
            case BpEvent::Diastolic:
                if (dia) flush();
                dia = e.first;
                break;
            case BpEvent::Pair:
                flush();
                make(e.first, e.second);
                break;
        }
    }
    flush();
    return out;
}

}  // namespace

std::vector<LabMeasurement> parse_extraction_response(std::string_view response, Analyte analyte,
                                                      std::vector<std::string>* warnings) {
    if (analyte == Analyte::BloodPressure) return parse_blood_pressure(response, warnings);
    return parse_unit_values(response, analyte, warnings);
}

InferredStatus apply_clinical_rule(const std::vector<LabMeasurement>& measurements,
                                   const ClinicalRule& rule) {
    if (measurements.empty()) return InferredStatus::NoMention;
    for (const auto& m : measurements) {
        if (m.analyte != rule.analyte) {
            throw ValidationError("measurement of " + std::string(to_string(m.analyte)) +
                                  " checked against a " + std::string(to_string(rule.analyte)) +
                                  " rule");
        }
    }
    if (rule.analyte != Analyte::BloodPressure) {
        const bool any = std::any_of(measurements.begin(), measurements.end(), [&](const LabMeasurement& m) {
            return rule.compare(m.normalized_value, rule.threshold);
        });
        return any ? InferredStatus::Yes : InferredStatus::No;
    }

    if (rule.bp_aggregation == BpAggregation::AnyReading) {
        const bool any = std::any_of(measurements.begin(), measurements.end(), [&](const LabMeasurement& m) {
            return (m.systolic && rule.compare(*m.systolic, rule.systolic_threshold)) ||
                   (m.diastolic && rule.compare(*m.diastolic, rule.diastolic_threshold));
        });
        return any ? InferredStatus::Yes : InferredStatus::No;
    }

    double sys_sum = 0.0, dia_sum = 0.0;
    int sys_n = 0, dia_n = 0;
    for (const auto& m : measurements) {
        if (m.systolic) {
            sys_sum += *m.systolic;
            ++sys_n;
        }
        if (m.diastolic) {
            dia_sum += *m.diastolic;
            ++dia_n;
        }
    }
    const bool high_sys = sys_n > 0 && rule.compare(sys_sum / sys_n, rule.systolic_threshold);
    const bool high_dia = dia_n > 0 && rule.compare(dia_sum / dia_n, rule.diastolic_threshold);
    return high_sys || high_dia ? InferredStatus::Yes : InferredStatus::No;
}

PatientVerdict merge_patient(std::string_view patient_id, std::string_view condition,
                             const std::vector<DocumentVerdict>& verdicts, MergeMode mode) {
    PatientVerdict out;
    out.patient_id = patient_id;
    out.condition = condition;
    out.mode = mode;
    std::set<std::string> refs, sources;
    for (const auto& v : verdicts) {
        if (v.patient_id != patient_id || v.condition != condition) {
            throw ValidationError("verdict for (" + v.patient_id + ", " + v.condition +
                                  ") merged into (" + std::string(patient_id) + ", " +
                                  std::string(condition) + ")");
        }
        const bool considered = mode == MergeMode::Merged ||
                                (mode == MergeMode::Prompt1 && v.path == VerdictPath::Inference) ||
                                (mode == MergeMode::Prompt2 && v.path == VerdictPath::Extraction);
        if (!considered || v.status != InferredStatus::Yes) continue;
        refs.insert(v.doc_ref);
        sources.insert(v.source_doc_ids.begin(), v.source_doc_ids.end());
    }
    out.label = refs.empty() ? 0 : 1;
    out.contributing.assign(refs.begin(), refs.end());
    out.evidence_doc_ids.assign(sources.begin(), sources.end());
    return out;
}

// ---------------------------------------------------------------------------
// Evidence highlights

namespace {

std::vector<std::string_view> quoted_fragments(std::string_view r) {
    std::vector<std::string_view> out;
    static constexpr std::string_view kOpenCurly = "\xE2\x80\x9C";
    static constexpr std::string_view kCloseCurly = "\xE2\x80\x9D";
    std::size_t i = 0;
    while (i < r.size()) {
        if (r[i] == '"') {
            auto j = r.find('"', i + 1);
            if (j == std::string_view::npos) break;
            out.push_back(r.substr(i + 1, j - i - 1));
            i = j + 1;
        } else if (r.compare(i, kOpenCurly.size(), kOpenCurly) == 0) {
            auto j = r.find(kCloseCurly, i + kOpenCurly.size());
            if (j == std::string_view::npos) break;
            out.push_back(r.substr(i + kOpenCurly.size(), j - i - kOpenCurly.size()));
            i = j + kCloseCurly.size();
        } else if (r[i] == '\'' && (i == 0 || !text::is_word_char(r[i - 1]))) {
            // Single quotes only count when they open at a word start and
            // close before a non-word character, so apostrophes are skipped.
            std::size_t j = i + 1;
            std::optional<std::size_t> close;
            while ((j = r.find('\'', j)) != std::string_view::npos) {
                if (j + 1 == r.size() || !text::is_word_char(r[j + 1])) {
                    close = j;
                    break;
                }
                ++j;
            }
            if (!close) {
                ++i;
                continue;
            }
            out.push_back(r.substr(i + 1, *close - i - 1));
            i = *close + 1;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace

std::vector<text::Span> parse_evidence_highlights(std::string_view response, std::string_view source) {
    std::vector<text::Span> spans;
    const auto lowered_source = text::to_lower(source);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto frag : quoted_fragments(response)) {
        frag = text::trim(frag);
        while (!frag.empty() && (frag.back() == '.' || frag.back() == ',' || frag.back() == ';')) {
            frag.remove_suffix(1);
        }
        if (frag.size() < 3) continue;
        const auto pos = lowered_source.find(text::to_lower(frag));
        if (pos == std::string::npos) continue;
        if (seen.emplace(pos, frag.size()).second) spans.push_back({pos, frag.size()});
    }
    std::sort(spans.begin(), spans.end(),
              [](const text::Span& a, const text::Span& b) { return a.offset < b.offset; });
    return spans;
}

}  // namespace ehrpheno
