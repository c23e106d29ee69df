#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ehrpheno/corpus.hpp"

namespace ehrpheno {

struct ConfusionMatrix {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;
    long total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws ValidationError listing patients present in only one map, or
/// labels other than 0 and 1.
ConfusionMatrix confusion(const LabelMap& predicted, const LabelMap& reference);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

/// Wilson score interval for k successes in n trials at a two-sided
/// confidence level. Requires 0 <= k <= n, n > 0 and level in (0, 1).
Interval wilson_interval(long k, long n, double level = 0.95);

struct Metric {
    /// Undefined when the denominator is zero.
    std::optional<double> value;
    Interval ci;
    long numerator = 0;
    long denominator = 0;
};

struct MetricSet {
    Metric sensitivity;
    Metric specificity;
    Metric ppv;
    Metric npv;
    double ci_level = 0.95;
};

MetricSet metrics(const ConfusionMatrix& cm, double ci_level = 0.95);

/// Pointwise OR. Throws ValidationError when the key sets differ.
LabelMap combine_or(const LabelMap& a, const LabelMap& b);

struct TrendPoint {
    std::string month;
    double reference_pct = 0.0;
    double predicted_pct = 0.0;
    long n = 0;
};

/// Share of positives per admission month among patients present in both
/// maps. Months without patients are omitted.
std::vector<TrendPoint> monthly_trend(const Cohort& cohort, const LabelMap& predicted,
                                      const LabelMap& reference);

struct NumericSummary {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::size_t n = 0;
};

/// Median is the middle order statistic (mean of the two middles for even
/// n); quartiles are nearest-rank.
NumericSummary summarize_numeric(std::vector<double> values);

struct GroupSummary {
    std::string name;
    std::size_t n = 0;
    /// condition -> positives / n
    std::map<std::string, double> prevalence;
    std::map<std::string, NumericSummary> numeric;
    /// attribute -> category -> count
    std::map<std::string, std::map<std::string, std::size_t>> categorical;
};

/// Summary for the whole cohort followed by one group per condition's
/// positives. An attribute is numeric when every non-empty value parses as a
/// number; attributes with no values are left out.
std::vector<GroupSummary> cohort_summary(const Cohort& cohort,
                                         const std::map<std::string, LabelMap>& labels);

/// "0.840 (0.755-0.899)" or "undefined".
std::string format_metric(const Metric& m, int precision = 3);

}  // namespace ehrpheno
