#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oar/metrics.hpp"

namespace oar::report {

/// Five-number summary using Tukey hinges: for odd n the median belongs to
/// both halves, so [1,2,3,4,5] gives (1, 2, 3, 4, 5).
struct Quartiles {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

inline constexpr const char* kQuartileRule = "tukey_hinges";

double median(std::span<const double> values);
/// Throws ValidationError on an empty list.
Quartiles quartiles(std::span<const double> values);

struct MetricStats {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    Quartiles quartiles;
};

struct OrganSummary {
    std::string organ;
    std::size_t n_evaluated = 0;  // evaluated or masked rows
    std::size_t n_excluded = 0;
    std::size_t n_empty_prediction = 0;
    std::optional<MetricStats> dsc;   // evaluated + empty_prediction rows
    std::optional<MetricStats> hd95;  // evaluated rows only
    std::optional<MetricStats> msd;   // evaluated rows only
};

/// Per-organ statistics in first-seen organ order.
std::vector<OrganSummary> summarize(const std::vector<MetricRow>& rows);

std::string summary_csv(const std::vector<OrganSummary>& summaries);
std::string summary_json(const std::vector<OrganSummary>& summaries);

/// A metric table tagged with the model and dataset it came from.
struct TaggedTable {
    std::string model;
    std::string dataset;
    std::vector<MetricRow> rows;
};

enum class GroupKey { model, dataset, organ };
GroupKey group_key_from_string(const std::string& name);

struct BoxGroup {
    std::vector<std::pair<std::string, std::string>> keys;
    std::size_t n = 0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_lo = 0.0;  // smallest value >= q1 - 1.5 IQR
    double whisker_hi = 0.0;  // largest value <= q3 + 1.5 IQR
    std::vector<double> outliers;
};

struct BoxPlotData {
    std::string metric;
    std::vector<BoxGroup> groups;
    std::vector<std::string> notes;

    std::string to_json() const;
};

BoxGroup box_stats(std::span<const double> values);

/// One box per distinct combination of the requested keys. Combinations
/// with no values for the metric are omitted and noted.
BoxPlotData boxplot_export(const std::vector<TaggedTable>& tables, const std::vector<GroupKey>& group_by,
                           MetricKind metric);

}  // namespace oar::report
