#include "oar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

namespace oar::stats {

std::string to_string(TestMethod m) {
    switch (m) {
        case TestMethod::signed_rank_exact: return "signed_rank_exact";
        case TestMethod::signed_rank_normal: return "signed_rank_normal";
        case TestMethod::rank_sum_exact: return "rank_sum_exact";
        case TestMethod::rank_sum_normal: return "rank_sum_normal";
    }
    return "unknown";
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

// Sum of t^3 - t over tie groups of the sorted values.
double tie_term(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double term = 0.0;
    std::size_t i = 0;
    while (i < values.size()) {
        std::size_t j = i;
        while (j + 1 < values.size() && values[j + 1] == values[i]) ++j;
        const auto t = static_cast<double>(j - i + 1);
        term += t * t * t - t;
        i = j + 1;
    }
    return term;
}

double clamp_p(double p) {
    if (!(p > 0.0)) return std::numeric_limits<double>::min();
    return std::min(1.0, p);
}

// Two-sided normal tail with continuity correction.
double normal_p(double deviation, double variance) {
    if (!(variance > 0.0)) return 1.0;
    const double z = std::max(0.0, std::abs(deviation) - 0.5) / std::sqrt(variance);
    return clamp_p(std::erfc(z / std::sqrt(2.0)));
}

std::int64_t doubled(double rank) { return std::llround(2.0 * rank); }

}  // namespace

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("paired samples differ in length");
    if (a.empty()) throw ValidationError("paired sample is empty");
    std::vector<double> absdiff;
    std::vector<bool> positive;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;
        absdiff.push_back(std::abs(d));
        positive.push_back(d > 0.0);
    }
    TestResult res;
    res.n_effective = absdiff.size();
    res.method = res.n_effective <= kSignedRankExactMax ? TestMethod::signed_rank_exact
                                                        : TestMethod::signed_rank_normal;
    if (res.n_effective == 0) {
        res.statistic = 0.0;
        res.p_value = 1.0;
        return res;
    }
    const auto ranks = midranks(absdiff);
    double w_plus = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        total += ranks[i];
        if (positive[i]) w_plus += ranks[i];
    }
    res.statistic = std::min(w_plus, total - w_plus);
    const auto n = static_cast<double>(res.n_effective);

    if (res.method == TestMethod::signed_rank_exact) {
        // Null distribution of the doubled W+ over all 2^n sign assignments.
        std::int64_t sum2 = 0;
        std::vector<std::int64_t> r2;
        for (double r : ranks) {
            r2.push_back(doubled(r));
            sum2 += r2.back();
        }
        std::vector<double> count(static_cast<std::size_t>(sum2) + 1, 0.0);
        count[0] = 1.0;
        std::int64_t reach = 0;
        for (auto r : r2) {
            for (std::int64_t s = reach; s >= 0; --s) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
            reach += r;
        }
        const std::int64_t obs = std::llabs(2 * doubled(w_plus) - sum2);
        double extreme = 0.0;
        for (std::int64_t s = 0; s <= sum2; ++s) {
            if (std::llabs(2 * s - sum2) >= obs) extreme += count[static_cast<std::size_t>(s)];
        }
        res.p_value = clamp_p(extreme / std::ldexp(1.0, static_cast<int>(res.n_effective)));
        return res;
    }

    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(absdiff) / 48.0;
    res.p_value = normal_p(w_plus - mean, var);
    return res;
}

TestResult wilcoxon_signed_rank(const PairedSample& sample) {
    if (!sample.labels.empty() && sample.labels.size() != sample.a.size()) {
        throw ValidationError("paired sample labels are not aligned with values");
    }
    return wilcoxon_signed_rank(sample.a, sample.b);
}

TestResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw ValidationError("rank-sum test needs two non-empty groups");
    std::vector<double> all(x.begin(), x.end());
    all.insert(all.end(), y.begin(), y.end());
    const auto ranks = midranks(all);
    const std::size_t n = x.size();
    const std::size_t m = y.size();
    const std::size_t total_n = n + m;
    double rx = 0.0;
    for (std::size_t i = 0; i < n; ++i) rx += ranks[i];
    const double u_x = rx - static_cast<double>(n * (n + 1)) / 2.0;
    const double nm = static_cast<double>(n * m);

    TestResult res;
    res.n_effective = total_n;
    res.statistic = std::min(u_x, nm - u_x);
    res.method = total_n <= kRankSumExactMax ? TestMethod::rank_sum_exact : TestMethod::rank_sum_normal;

    if (res.method == TestMethod::rank_sum_exact) {
        // count[k][s]: subsets of size k whose doubled rank sum is s.
        std::vector<std::int64_t> r2;
        std::int64_t sum2 = 0;
        for (double r : ranks) {
            r2.push_back(doubled(r));
            sum2 += r2.back();
        }
        std::vector<std::vector<double>> count(n + 1, std::vector<double>(static_cast<std::size_t>(sum2) + 1, 0.0));
        count[0][0] = 1.0;
        std::int64_t reach = 0;
        for (std::size_t item = 0; item < total_n; ++item) {
            const auto r = r2[item];
            for (std::size_t k = std::min(n, item + 1); k >= 1; --k) {
                for (std::int64_t s = reach; s >= 0; --s) {
                    const double c = count[k - 1][static_cast<std::size_t>(s)];
                    if (c != 0.0) count[k][static_cast<std::size_t>(s + r)] += c;
                }
            }
            reach += r;
        }
        // Centre of the doubled rank sum of x is n (N + 1).
        const auto centre = static_cast<std::int64_t>(n * (total_n + 1));
        const std::int64_t obs = std::llabs(doubled(rx) - centre);
        double extreme = 0.0;
        double all_subsets = 0.0;
        for (std::int64_t s = 0; s <= sum2; ++s) {
            const double c = count[n][static_cast<std::size_t>(s)];
            all_subsets += c;
            if (std::llabs(s - centre) >= obs) extreme += c;
        }
        res.p_value = clamp_p(extreme / all_subsets);
        return res;
    }

    const double big_n = static_cast<double>(total_n);
    const double var = nm / 12.0 * ((big_n + 1.0) - tie_term(all) / (big_n * (big_n - 1.0)));
    res.p_value = normal_p(u_x - nm / 2.0, var);
    return res;
}

std::vector<double> bonferroni(std::span<const double> p_values, std::optional<std::size_t> m) {
    const std::size_t family = m.value_or(p_values.size());
    if (family < p_values.size()) throw ValidationError("Bonferroni family smaller than the number of p-values");
    std::vector<double> out;
    out.reserve(p_values.size());
    for (double p : p_values) {
        if (!(p > 0.0 && p <= 1.0)) throw ValidationError("p-value outside (0, 1]: " + std::to_string(p));
        out.push_back(std::min(1.0, p * static_cast<double>(family)));
    }
    return out;
}

std::string stars(double p) {
    if (p <= 0.0001) return "****";
    if (p <= 0.001) return "***";
    if (p <= 0.01) return "**";
    if (p <= 0.05) return "*";
    return "ns";
}

MeanSd mean_sd(std::span<const double> values) {
    MeanSd out;
    if (values.empty()) return out;
    const auto n = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / (n - 1.0));
    }
    return out;
}

std::string to_string(SubgroupDimension d) {
    switch (d) {
        case SubgroupDimension::sex: return "sex";
        case SubgroupDimension::tumor_type: return "tumor_type";
        case SubgroupDimension::iv_contrast: return "iv_contrast";
        case SubgroupDimension::age_group: return "age_group";
    }
    return "unknown";
}

SubgroupDimension dimension_from_string(const std::string& name) {
    if (name == "sex") return SubgroupDimension::sex;
    if (name == "tumor_type" || name == "tumor") return SubgroupDimension::tumor_type;
    if (name == "iv_contrast" || name == "iv" || name == "contrast") return SubgroupDimension::iv_contrast;
    if (name == "age_group" || name == "age") return SubgroupDimension::age_group;
    throw ValidationError("unknown subgroup dimension '" + name + "'");
}

std::string age_group(double age_years) {
    const double years = std::floor(age_years);
    if (years <= 2.0) return "0-2";
    if (years <= 4.0) return "3-4";
    if (years <= 6.0) return "5-6";
    return ">=7";
}

std::vector<std::string> groups_of(SubgroupDimension d) {
    switch (d) {
        case SubgroupDimension::sex: return {"male", "female"};
        case SubgroupDimension::tumor_type: return {"renal", "neuroblastoma"};
        case SubgroupDimension::iv_contrast: return {"yes", "no"};
        case SubgroupDimension::age_group: return {"0-2", "3-4", "5-6", ">=7"};
    }
    return {};
}

std::optional<std::string> group_of(const CaseRecord& c, SubgroupDimension d) {
    switch (d) {
        case SubgroupDimension::sex:
            if (c.sex == Sex::unknown) return std::nullopt;
            return to_string(c.sex);
        case SubgroupDimension::tumor_type:
            if (c.tumor_type == TumorType::unspecified) return std::nullopt;
            return to_string(c.tumor_type);
        case SubgroupDimension::iv_contrast:
            if (c.iv_contrast == IvContrast::unknown) return std::nullopt;
            return to_string(c.iv_contrast);
        case SubgroupDimension::age_group: return age_group(c.age_years);
    }
    return std::nullopt;
}

namespace {

GroupSummary summarize_group(const std::string& name, const std::vector<double>& values) {
    GroupSummary g;
    g.name = name;
    g.n = values.size();
    if (!values.empty()) {
        const auto ms = mean_sd(values);
        g.mean = ms.mean;
        g.sd = ms.sd;
    }
    return g;
}

void adjust(OrganComparison& oc) {
    std::vector<double> raw;
    for (const auto& c : oc.comparisons) raw.push_back(c.p_raw);
    oc.family_size = raw.size();
    const auto adj = bonferroni(raw);
    for (std::size_t i = 0; i < adj.size(); ++i) {
        oc.comparisons[i].p_adjusted = adj[i];
        oc.comparisons[i].stars = stars(adj[i]);
    }
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Organ names in first-seen order.
std::vector<std::string> organ_order(const std::vector<MetricRow>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        if (std::find(out.begin(), out.end(), r.organ) == out.end()) out.push_back(r.organ);
    }
    return out;
}

}  // namespace

std::string ComparisonReport::to_json() const {
    nlohmann::json doc;
    doc["metric"] = metric;
    doc["dimension"] = dimension;
    doc["family_size"] = family_size;
    doc["convention_notes"] = convention_notes;
    doc["organs"] = nlohmann::json::array();
    for (const auto& o : organs) {
        nlohmann::json jo;
        jo["organ"] = o.organ;
        jo["family_size"] = o.family_size;
        jo["groups"] = nlohmann::json::array();
        for (const auto& g : o.groups) {
            jo["groups"].push_back({{"name", g.name}, {"n", g.n}, {"mean", optional_json(g.mean)},
                                    {"sd", optional_json(g.sd)}});
        }
        jo["comparisons"] = nlohmann::json::array();
        for (const auto& c : o.comparisons) {
            jo["comparisons"].push_back({{"group_a", c.group_a},
                                         {"group_b", c.group_b},
                                         {"statistic", c.statistic},
                                         {"p_raw", c.p_raw},
                                         {"p_adjusted", c.p_adjusted},
                                         {"stars", c.stars},
                                         {"method", to_string(c.method)},
                                         {"n_effective", c.n_effective},
                                         {"mean_difference", optional_json(c.mean_difference)}});
        }
        if (!o.notes.empty()) jo["notes"] = o.notes;
        doc["organs"].push_back(std::move(jo));
    }
    return doc.dump(2);
}

ComparisonReport subgroup_analysis(const std::vector<MetricRow>& rows, const Manifest& manifest,
                                   const SubgroupSpec& spec, MetricKind metric) {
    for (const auto& r : rows) {
        if (manifest.find(r.case_id) == nullptr) {
            throw ValidationError("metric row case '" + r.case_id + "' is not in the manifest");
        }
    }
    const auto names = groups_of(spec.dimension);
    const bool descriptive = spec.descriptive_only.contains(spec.dimension);

    ComparisonReport report;
    report.metric = to_string(metric);
    report.dimension = to_string(spec.dimension);
    report.family_size = descriptive ? 0 : names.size() * (names.size() - 1) / 2;
    report.convention_notes = {
        "two-sided Wilcoxon rank-sum per pair of groups",
        "Bonferroni family: pairwise comparisons tested within one organ and one dimension",
        "groups smaller than " + std::to_string(spec.min_n) + " are summarized but not tested",
        "stars thresholds applied to Bonferroni-adjusted p",
    };
    if (spec.dimension == SubgroupDimension::age_group) {
        report.convention_notes.emplace_back("age groups by floor(age_years): 0-2, 3-4, 5-6, >=7");
    }
    if (descriptive) report.convention_notes.push_back(report.dimension + " is descriptive only; no tests run");

    for (const auto& organ : organ_order(rows)) {
        std::map<std::string, std::vector<double>> values;
        for (const auto& r : rows) {
            if (r.organ != organ) continue;
            const auto v = metric_value(r, metric);
            if (!v) continue;
            const auto g = group_of(*manifest.find(r.case_id), spec.dimension);
            if (g) values[*g].push_back(*v);
        }
        OrganComparison oc;
        oc.organ = organ;
        for (const auto& name : names) oc.groups.push_back(summarize_group(name, values[name]));
        if (!descriptive) {
            for (std::size_t i = 0; i < names.size(); ++i) {
                for (std::size_t j = i + 1; j < names.size(); ++j) {
                    const auto& x = values[names[i]];
                    const auto& y = values[names[j]];
                    if (x.size() < spec.min_n || y.size() < spec.min_n) {
                        oc.notes.push_back(names[i] + " vs " + names[j] + ": group below min_n, not tested");
                        continue;
                    }
                    const auto t = wilcoxon_rank_sum(x, y);
                    Comparison c;
                    c.group_a = names[i];
                    c.group_b = names[j];
                    c.statistic = t.statistic;
                    c.p_raw = t.p_value;
                    c.method = t.method;
                    c.n_effective = t.n_effective;
                    c.mean_difference = mean_sd(x).mean - mean_sd(y).mean;
                    oc.comparisons.push_back(std::move(c));
                }
            }
            adjust(oc);
        }
        report.organs.push_back(std::move(oc));
    }
    return report;
}

ComparisonReport compare_tables(const std::vector<MetricRow>& a, const std::vector<MetricRow>& b, MetricKind metric,
                                bool paired, const std::string& name_a, const std::string& name_b) {
    ComparisonReport report;
    report.metric = to_string(metric);
    report.dimension = "model";
    report.family_size = 1;
    report.convention_notes = {
        paired ? "two-sided Wilcoxon signed-rank on rows matched by (case_id, organ); zero differences dropped"
               : "two-sided Wilcoxon rank-sum on all rows per organ",
        "p_adjusted equals p_raw (one comparison per organ)",
        "stars thresholds applied to p_raw",
    };

    std::vector<std::string> organs = organ_order(a);
    for (const auto& o : organ_order(b)) {
        if (std::find(organs.begin(), organs.end(), o) == organs.end()) organs.push_back(o);
    }
    for (const auto& organ : organs) {
        OrganComparison oc;
        oc.organ = organ;
        std::vector<double> xa;
        std::vector<double> xb;
        PairedSample sample;
        if (paired) {
            std::map<std::string, double> by_case;
            for (const auto& r : b) {
                if (r.organ != organ) continue;
                if (const auto v = metric_value(r, metric)) by_case[r.case_id] = *v;
            }
            for (const auto& r : a) {
                if (r.organ != organ) continue;
                const auto v = metric_value(r, metric);
                const auto it = by_case.find(r.case_id);
                if (!v || it == by_case.end()) continue;
                sample.labels.push_back(r.case_id);
                sample.a.push_back(*v);
                sample.b.push_back(it->second);
            }
            xa = sample.a;
            xb = sample.b;
        } else {
            for (const auto& r : a) {
                if (r.organ == organ) {
                    if (const auto v = metric_value(r, metric)) xa.push_back(*v);
                }
            }
            for (const auto& r : b) {
                if (r.organ == organ) {
                    if (const auto v = metric_value(r, metric)) xb.push_back(*v);
                }
            }
        }
        oc.groups.push_back(summarize_group(name_a, xa));
        oc.groups.push_back(summarize_group(name_b, xb));
        if (xa.empty() || xb.empty()) {
            oc.notes.emplace_back(paired ? "no matched rows; organ skipped" : "a group is empty; organ skipped");
            report.organs.push_back(std::move(oc));
            continue;
        }
        const auto t = paired ? wilcoxon_signed_rank(sample) : wilcoxon_rank_sum(xa, xb);
        Comparison c;
        c.group_a = name_a;
        c.group_b = name_b;
        c.statistic = t.statistic;
        c.p_raw = t.p_value;
        c.p_adjusted = t.p_value;
        c.stars = stars(t.p_value);
        c.method = t.method;
        c.n_effective = t.n_effective;
        if (paired) {
            std::vector<double> diff(xa.size());
            for (std::size_t i = 0; i < xa.size(); ++i) diff[i] = xa[i] - xb[i];
            c.mean_difference = mean_sd(diff).mean;
        } else {
            c.mean_difference = mean_sd(xa).mean - mean_sd(xb).mean;
        }
        oc.comparisons.push_back(std::move(c));
        oc.family_size = 1;
        report.organs.push_back(std::move(oc));
    }
    return report;
}

}  // namespace oar::stats
