#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "oar/manifest.hpp"
#include "oar/metrics.hpp"

namespace oar::stats {

/// Paired observations aligned by index.
struct PairedSample {
    std::vector<std::string> labels;
    std::vector<double> a;
    std::vector<double> b;
};

enum class TestMethod { signed_rank_exact, signed_rank_normal, rank_sum_exact, rank_sum_normal };
std::string to_string(TestMethod m);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    TestMethod method = TestMethod::signed_rank_exact;
    std::size_t n_effective = 0;
};

/// Largest effective sample size that still uses the exact null distribution.
inline constexpr std::size_t kSignedRankExactMax = 25;
/// Largest n + m that still uses the exact null distribution.
inline constexpr std::size_t kRankSumExactMax = 20;

/// Mid-ranks (1-based, ties averaged).
std::vector<double> midranks(std::span<const double> values);

/// Two-sided Wilcoxon signed-rank test on a - b. Zero differences are
/// dropped; statistic is min(W+, W-). Exact sign-flip distribution (with the
/// observed mid-ranks) up to kSignedRankExactMax pairs, otherwise the normal
/// approximation with tie-corrected variance and 0.5 continuity correction.
TestResult wilcoxon_signed_rank(const PairedSample& sample);
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

/// Two-sided Wilcoxon rank-sum (Mann-Whitney U) test; statistic is
/// min(U_x, U_y). Exact over all group assignments while n + m <=
/// kRankSumExactMax, otherwise normal approximation with tie correction and
/// 0.5 continuity correction.
TestResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y);

/// min(1, p * m) for each p. m defaults to the list size and must not be smaller.
std::vector<double> bonferroni(std::span<const double> p_values, std::optional<std::size_t> m = std::nullopt);

/// "****" (p <= 1e-4), "***" (<= 1e-3), "**" (<= 1e-2), "*" (<= 0.05), else "ns".
std::string stars(double p);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // sample SD, 0 when n == 1
};
MeanSd mean_sd(std::span<const double> values);

enum class SubgroupDimension { sex, tumor_type, iv_contrast, age_group };
std::string to_string(SubgroupDimension d);
SubgroupDimension dimension_from_string(const std::string& name);

/// "0-2", "3-4", "5-6" or ">=7" by floor(age_years).
std::string age_group(double age_years);

/// Group name of a case along a dimension; nullopt for unknown values.
std::optional<std::string> group_of(const CaseRecord& c, SubgroupDimension d);
/// All groups of a dimension in reporting order.
std::vector<std::string> groups_of(SubgroupDimension d);

struct SubgroupSpec {
    SubgroupDimension dimension = SubgroupDimension::age_group;
    /// Smallest group size that is tested.
    std::size_t min_n = 3;
    std::set<SubgroupDimension> descriptive_only{SubgroupDimension::iv_contrast};
};

struct GroupSummary {
    std::string name;
    std::size_t n = 0;
    std::optional<double> mean;
    std::optional<double> sd;
};

struct Comparison {
    std::string group_a;
    std::string group_b;
    double statistic = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    std::string stars;
    TestMethod method = TestMethod::rank_sum_exact;
    std::size_t n_effective = 0;
    /// mean(a) - mean(b); for paired tests, mean of the paired differences.
    std::optional<double> mean_difference;
};

struct OrganComparison {
    std::string organ;
    std::vector<GroupSummary> groups;
    std::vector<Comparison> comparisons;
    std::size_t family_size = 0;
    std::vector<std::string> notes;
};

struct ComparisonReport {
    std::string metric;
    std::string dimension;
    std::vector<OrganComparison> organs;
    std::size_t family_size = 0;
    std::vector<std::string> convention_notes;

    std::string to_json() const;
};

/// Per organ: groups along spec.dimension, a rank-sum test for every pair of
/// groups that both reach min_n, Bonferroni over the tests run for that organ.
/// Throws ValidationError when a metric row's case is not in the manifest.
ComparisonReport subgroup_analysis(const std::vector<MetricRow>& rows, const Manifest& manifest,
                                   const SubgroupSpec& spec, MetricKind metric);

/// Model comparison between two metric tables: signed-rank on rows matched
/// by (case_id, organ) when `paired`, rank-sum on all rows otherwise.
ComparisonReport compare_tables(const std::vector<MetricRow>& a, const std::vector<MetricRow>& b, MetricKind metric,
                                bool paired, const std::string& name_a = "A", const std::string& name_b = "B");

}  // namespace oar::stats
