#include "oar/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "oar/stats.hpp"

namespace oar::report {

namespace {

double sorted_median(std::span<const double> s) {
    const std::size_t n = s.size();
    return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

MetricStats stats_of(std::vector<double> values) {
    MetricStats m;
    m.n = values.size();
    const auto ms = stats::mean_sd(values);
    m.mean = ms.mean;
    m.sd = ms.sd;
    m.quartiles = quartiles(values);
    return m;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

nlohmann::json stats_json(const std::optional<MetricStats>& m) {
    if (!m) return nullptr;
    return {{"n", m->n},
            {"mean", m->mean},
            {"sd", m->sd},
            {"min", m->quartiles.min},
            {"q1", m->quartiles.q1},
            {"median", m->quartiles.median},
            {"q3", m->quartiles.q3},
            {"max", m->quartiles.max}};
}

}  // namespace

double median(std::span<const double> values) {
    if (values.empty()) throw ValidationError("median of an empty list");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    return sorted_median(s);
}

Quartiles quartiles(std::span<const double> values) {
    if (values.empty()) throw ValidationError("quartiles of an empty list");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const std::size_t half = (n + 1) / 2;  // lower half includes the median when n is odd
    const std::span<const double> all(s);
    Quartiles q;
    q.min = s.front();
    q.max = s.back();
    q.median = sorted_median(all);
    q.q1 = sorted_median(all.first(half));
    q.q3 = sorted_median(all.last(half));
    return q;
}

std::vector<OrganSummary> summarize(const std::vector<MetricRow>& rows) {
    std::vector<std::string> order;
    std::map<std::string, OrganSummary> by_organ;
    std::map<std::string, std::array<std::vector<double>, 3>> values;
    for (const auto& r : rows) {
        auto [it, inserted] = by_organ.try_emplace(r.organ);
        if (inserted) {
            it->second.organ = r.organ;
            order.push_back(r.organ);
        }
        auto& s = it->second;
        auto& v = values[r.organ];
        switch (r.status) {
            case MetricStatus::excluded_no_ground_truth: ++s.n_excluded; break;
            case MetricStatus::empty_prediction:
                ++s.n_empty_prediction;
                if (r.dsc) v[0].push_back(*r.dsc);
                break;
            case MetricStatus::evaluated:
            case MetricStatus::masked:
                ++s.n_evaluated;
                if (r.dsc) v[0].push_back(*r.dsc);
                if (r.hd95_mm) v[1].push_back(*r.hd95_mm);
                if (r.msd_mm) v[2].push_back(*r.msd_mm);
                break;
        }
    }
    std::vector<OrganSummary> out;
    for (const auto& organ : order) {
        auto s = by_organ[organ];
        auto& v = values[organ];
        if (!v[0].empty()) s.dsc = stats_of(v[0]);
        if (!v[1].empty()) s.hd95 = stats_of(v[1]);
        if (!v[2].empty()) s.msd = stats_of(v[2]);
        out.push_back(std::move(s));
    }
    return out;
}

std::string summary_csv(const std::vector<OrganSummary>& summaries) {
    std::string out = "organ,n_evaluated,n_excluded,n_empty_prediction";
    for (const char* m : {"dsc", "hd95_mm", "msd_mm"}) {
        for (const char* f : {"mean", "sd", "min", "q1", "median", "q3", "max"}) {
            out += std::string(",") + m + "_" + f;
        }
    }
    out += "\n";
    for (const auto& s : summaries) {
        out += s.organ + "," + std::to_string(s.n_evaluated) + "," + std::to_string(s.n_excluded) + "," +
               std::to_string(s.n_empty_prediction);
        for (const auto* m : {&s.dsc, &s.hd95, &s.msd}) {
            if (*m) {
                const auto& q = (*m)->quartiles;
                for (double v : {(*m)->mean, (*m)->sd, q.min, q.q1, q.median, q.q3, q.max}) out += "," + num(v);
            } else {
                out += ",,,,,,,";
            }
        }
        out += "\n";
    }
    return out;
}

std::string summary_json(const std::vector<OrganSummary>& summaries) {
    nlohmann::json doc;
    doc["quartile_rule"] = kQuartileRule;
    doc["sd"] = "sample (n-1), 0 when n = 1";
    doc["dsc_includes_empty_predictions"] = true;
    doc["organs"] = nlohmann::json::array();
    for (const auto& s : summaries) {
        doc["organs"].push_back({{"organ", s.organ},
                                 {"n_evaluated", s.n_evaluated},
                                 {"n_excluded", s.n_excluded},
                                 {"n_empty_prediction", s.n_empty_prediction},
                                 {"dsc", stats_json(s.dsc)},
                                 {"hd95_mm", stats_json(s.hd95)},
                                 {"msd_mm", stats_json(s.msd)}});
    }
    return doc.dump(2);
}

GroupKey group_key_from_string(const std::string& name) {
    if (name == "model") return GroupKey::model;
    if (name == "dataset") return GroupKey::dataset;
    if (name == "organ") return GroupKey::organ;
    throw ValidationError("unknown group key '" + name + "' (expected model, dataset or organ)");
}

BoxGroup box_stats(std::span<const double> values) {
    const auto q = quartiles(values);
    BoxGroup g;
    g.n = values.size();
    g.q1 = q.q1;
    g.median = q.median;
    g.q3 = q.q3;
    const double iqr = q.q3 - q.q1;
    const double lo_fence = q.q1 - 1.5 * iqr;
    const double hi_fence = q.q3 + 1.5 * iqr;
    g.whisker_lo = q.max;
    g.whisker_hi = q.min;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    for (double v : sorted) {
        if (v < lo_fence || v > hi_fence) {
            g.outliers.push_back(v);
            continue;
        }
        g.whisker_lo = std::min(g.whisker_lo, v);
        g.whisker_hi = std::max(g.whisker_hi, v);
    }
    return g;
}

BoxPlotData boxplot_export(const std::vector<TaggedTable>& tables, const std::vector<GroupKey>& group_by,
                           MetricKind metric) {
    using Key = std::vector<std::pair<std::string, std::string>>;
    std::vector<Key> order;
    std::map<Key, std::vector<double>> groups;
    for (const auto& t : tables) {
        for (const auto& r : t.rows) {
            Key key;
            for (auto k : group_by) {
                switch (k) {
                    case GroupKey::model: key.emplace_back("model", t.model); break;
                    case GroupKey::dataset: key.emplace_back("dataset", t.dataset); break;
                    case GroupKey::organ: key.emplace_back("organ", r.organ); break;
                }
            }
            auto [it, inserted] = groups.try_emplace(key);
            if (inserted) order.push_back(key);
            if (const auto v = metric_value(r, metric)) it->second.push_back(*v);
        }
    }
    BoxPlotData out;
    out.metric = to_string(metric);
    for (const auto& key : order) {
        const auto& values = groups[key];
        if (values.empty()) {
            std::string label;
            for (const auto& [k, v] : key) label += k + "=" + v + " ";
            out.notes.push_back("omitted empty group " + label);
            continue;
        }
        auto g = box_stats(values);
        g.keys = key;
        out.groups.push_back(std::move(g));
    }
    return out;
}

std::string BoxPlotData::to_json() const {
    nlohmann::json doc;
    doc["metric"] = metric;
    doc["quartile_rule"] = kQuartileRule;
    doc["whisker_rule"] = "most extreme data point within 1.5 IQR of the box";
    doc["groups"] = nlohmann::json::array();
    for (const auto& g : groups) {
        nlohmann::json keys = nlohmann::json::object();
        for (const auto& [k, v] : g.keys) keys[k] = v;
        doc["groups"].push_back({{"keys", keys},
                                 {"n", g.n},
                                 {"q1", g.q1},
                                 {"median", g.median},
                                 {"q3", g.q3},
                                 {"whisker_lo", g.whisker_lo},
                                 {"whisker_hi", g.whisker_hi},
                                 {"outliers", g.outliers}});
    }
    doc["notes"] = notes;
    return doc.dump(2);
}

}  // namespace oar::report
