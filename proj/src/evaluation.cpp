#include "ehrpheno/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/io.hpp"

namespace ehrpheno {

namespace {

void check_same_keys(const LabelMap& a, const LabelMap& b, std::string_view what) {
    std::vector<std::string> only;
    for (const auto& [k, v] : a) {
        if (!b.count(k)) only.push_back(k);
    }
    for (const auto& [k, v] : b) {
        if (!a.count(k)) only.push_back(k);
    }
    if (only.empty()) return;
    std::sort(only.begin(), only.end());
    std::string list;
    for (std::size_t i = 0; i < only.size() && i < 20; ++i) list += (i ? ", " : "") + only[i];
    if (only.size() > 20) list += ", ... (" + std::to_string(only.size()) + " in total)";
    throw ValidationError(std::string(what) + ": patient sets differ: " + list);
}

void check_binary(const LabelMap& m, std::string_view what) {
    for (const auto& [k, v] : m) {
        if (v != 0 && v != 1) {
            throw ValidationError(std::string(what) + ": label of " + k + " is " + std::to_string(v));
        }
    }
}

Metric ratio(long num, long den, double level) {
    Metric m;
    m.numerator = num;
    m.denominator = den;
    if (den > 0) {
        m.value = static_cast<double>(num) / static_cast<double>(den);
        m.ci = wilson_interval(num, den, level);
    }
    return m;
}

}  // namespace

ConfusionMatrix confusion(const LabelMap& predicted, const LabelMap& reference) {
    check_same_keys(predicted, reference, "confusion");
    check_binary(predicted, "predicted");
    check_binary(reference, "reference");
    ConfusionMatrix cm;
    for (const auto& [pid, pred] : predicted) {
        const int ref = reference.at(pid);
        if (pred && ref) ++cm.tp;
        else if (pred) ++cm.fp;
        else if (ref) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

Interval wilson_interval(long k, long n, double level) {
    if (n <= 0 || k < 0 || k > n) {
        throw ValidationError("wilson interval needs 0 <= k <= n and n > 0");
    }
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must be in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    Interval ci{std::max(0.0, centre - half), std::min(1.0, centre + half)};
    // Rounding can leave the point estimate a hair outside at k = 0 or k = n.
    if (k == 0) ci.low = 0.0;
    if (k == n) ci.high = 1.0;
    ci.low = std::min(ci.low, p);
    ci.high = std::max(ci.high, p);
    return ci;
}

MetricSet metrics(const ConfusionMatrix& cm, double ci_level) {
    MetricSet s;
    s.ci_level = ci_level;
    s.sensitivity = ratio(cm.tp, cm.tp + cm.fn, ci_level);
    s.specificity = ratio(cm.tn, cm.tn + cm.fp, ci_level);
    s.ppv = ratio(cm.tp, cm.tp + cm.fp, ci_level);
    s.npv = ratio(cm.tn, cm.tn + cm.fn, ci_level);
    return s;
}

LabelMap combine_or(const LabelMap& a, const LabelMap& b) {
    check_same_keys(a, b, "combine_or");
    LabelMap out;
    for (const auto& [k, v] : a) out[k] = (v || b.at(k)) ? 1 : 0;
    return out;
}

std::vector<TrendPoint> monthly_trend(const Cohort& cohort, const LabelMap& predicted,
                                      const LabelMap& reference) {
    struct Acc {
        long n = 0, pred = 0, ref = 0;
    };
    std::map<std::string, Acc> months;
    for (const auto& p : cohort.patients()) {
        auto pi = predicted.find(p.patient_id);
        auto ri = reference.find(p.patient_id);
        if (pi == predicted.end() || ri == reference.end()) continue;
        if (!p.admit_date.ok()) throw ValidationError("invalid admit_date for " + p.patient_id);
        auto& acc = months[format_month(p.admit_date)];
        ++acc.n;
        acc.pred += pi->second;
        acc.ref += ri->second;
    }
    std::vector<TrendPoint> out;
    for (const auto& [month, acc] : months) {
        const double n = static_cast<double>(acc.n);
        out.push_back({month, acc.ref / n, acc.pred / n, acc.n});
    }
    return out;
}

NumericSummary summarize_numeric(std::vector<double> values) {
    NumericSummary s;
    s.n = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    s.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
    auto nearest = [&](double p) {
        auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
        return values[std::clamp<std::size_t>(rank, 1, n) - 1];
    };
    s.q1 = nearest(0.25);
    s.q3 = nearest(0.75);
    return s;
}

std::vector<GroupSummary> cohort_summary(const Cohort& cohort,
                                         const std::map<std::string, LabelMap>& labels) {
    std::set<std::string> attribute_names;
    std::set<std::string> numeric;
    for (const auto& p : cohort.patients()) {
        for (const auto& [k, v] : p.attributes) attribute_names.insert(k);
    }
    for (const auto& name : attribute_names) {
        bool all_numeric = true, any = false;
        for (const auto& p : cohort.patients()) {
            auto it = p.attributes.find(name);
            if (it == p.attributes.end() || it->second.empty()) continue;
            any = true;
            char* end = nullptr;
            std::strtod(it->second.c_str(), &end);
            if (end != it->second.c_str() + it->second.size()) all_numeric = false;
        }
        if (any && all_numeric) numeric.insert(name);
    }

    auto summarize = [&](std::string name, const std::vector<const Patient*>& members) {
        GroupSummary g;
        g.name = std::move(name);
        g.n = members.size();
        for (const auto& [cond, m] : labels) {
            long pos = 0, n = 0;
            for (const auto* p : members) {
                auto it = m.find(p->patient_id);
                if (it == m.end()) continue;
                ++n;
                pos += it->second;
            }
            if (n > 0) g.prevalence[cond] = static_cast<double>(pos) / static_cast<double>(n);
        }
        for (const auto& attr : attribute_names) {
            std::vector<double> xs;
            std::map<std::string, std::size_t> counts;
            for (const auto* p : members) {
                auto it = p->attributes.find(attr);
                if (it == p->attributes.end() || it->second.empty()) continue;
                if (numeric.count(attr)) xs.push_back(std::strtod(it->second.c_str(), nullptr));
                else ++counts[it->second];
            }
            if (!xs.empty()) g.numeric[attr] = summarize_numeric(std::move(xs));
            if (!counts.empty()) g.categorical[attr] = std::move(counts);
        }
        return g;
    };

    std::vector<GroupSummary> out;
    std::vector<const Patient*> all;
    for (const auto& p : cohort.patients()) all.push_back(&p);
    out.push_back(summarize("total", all));
    for (const auto& [cond, m] : labels) {
        std::vector<const Patient*> members;
        for (const auto* p : all) {
            auto it = m.find(p->patient_id);
            if (it != m.end() && it->second == 1) members.push_back(p);
        }
        out.push_back(summarize(cond, members));
    }
    return out;
}

std::string format_metric(const Metric& m, int precision) {
    if (!m.value) return "undefined";
    return io::format_double(*m.value, precision) + " (" + io::format_double(m.ci.low, precision) + "-" +
           io::format_double(m.ci.high, precision) + ")";
}

}  // namespace ehrpheno
