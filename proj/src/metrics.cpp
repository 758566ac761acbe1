#include "oar/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "oar/edt.hpp"

namespace oar {

double dsc(const Mask& gt, const Mask& pred) {
    require_same_grid(gt.grid(), pred.grid(), "dsc");
    const auto a = gt.voxels();
    const auto b = pred.voxels();
    std::size_t na = 0;
    std::size_t nb = 0;
    std::size_t both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0;
        const bool y = b[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<std::int64_t> extract_surface(const Mask& mask) {
    const Grid& g = mask.grid();
    const auto v = mask.voxels();
    const std::int64_t d0 = g.dims[0];
    const std::int64_t d1 = g.dims[1];
    const std::int64_t d2 = g.dims[2];
    const std::int64_t plane = d0 * d1;
    std::vector<std::int64_t> out;
    std::int64_t idx = 0;
    for (std::int64_t k = 0; k < d2; ++k) {
        for (std::int64_t j = 0; j < d1; ++j) {
            for (std::int64_t i = 0; i < d0; ++i, ++idx) {
                if (v[static_cast<std::size_t>(idx)] == 0) continue;
                const auto at = [&](std::int64_t off) { return v[static_cast<std::size_t>(idx + off)] != 0; };
                const bool interior = i > 0 && i + 1 < d0 && j > 0 && j + 1 < d1 && k > 0 && k + 1 < d2 &&
                                      at(-1) && at(1) && at(-d0) && at(d0) && at(-plane) && at(plane);
                if (!interior) out.push_back(idx);
            }
        }
    }
    return out;
}

std::vector<double> SurfaceDistances::pooled() const {
    std::vector<double> out;
    out.reserve(pred_to_gt.size() + gt_to_pred.size());
    out.insert(out.end(), pred_to_gt.begin(), pred_to_gt.end());
    out.insert(out.end(), gt_to_pred.begin(), gt_to_pred.end());
    return out;
}

namespace {

struct Box {
    Index3 lo{};
    Index3 hi{};
};

void extend(Box& box, const Grid& g, std::span<const std::int64_t> idx) {
    for (auto i : idx) {
        const Index3 p = g.unravel(i);
        for (std::size_t a = 0; a < 3; ++a) {
            box.lo[a] = std::min(box.lo[a], p[a]);
            box.hi[a] = std::max(box.hi[a], p[a]);
        }
    }
}

// Distance from each `query` voxel to the nearest `target` voxel. The
// transform runs on the bounding box of both sets, which holds every
// candidate nearest point, so the result equals the full-grid transform.
std::vector<double> directed(std::span<const std::int64_t> target, std::span<const std::int64_t> query,
                             const Grid& g, const Box& box, int threads) {
    Grid sub;
    for (std::size_t a = 0; a < 3; ++a) sub.dims[a] = box.hi[a] - box.lo[a] + 1;
    sub.spacing = g.spacing;
    sub.axis_codes = g.axis_codes;
    auto to_local = [&](std::int64_t idx) {
        const Index3 p = g.unravel(idx);
        return static_cast<std::size_t>(sub.linear(p[0] - box.lo[0], p[1] - box.lo[1], p[2] - box.lo[2]));
    };
    Mask features(sub);
    auto f = features.voxels();
    for (auto idx : target) f[to_local(idx)] = 1;
    const auto field = squared_edt(features, threads);
    std::vector<double> out;
    out.reserve(query.size());
    for (auto idx : query) out.push_back(std::sqrt(field[to_local(idx)]));
    return out;
}

}  // namespace

SurfaceDistances surface_distances(const Mask& gt, const Mask& pred, int threads) {
    require_same_grid(gt.grid(), pred.grid(), "surface_distances");
    const auto sg = extract_surface(gt);
    const auto sp = extract_surface(pred);
    if (sg.empty() || sp.empty()) {
        throw ValidationError(std::string(sg.empty() ? "ground truth" : "prediction") + " mask is empty",
                              "empty-structure");
    }
    const Grid& g = gt.grid();
    Box box{g.unravel(sg.front()), g.unravel(sg.front())};
    extend(box, g, sg);
    extend(box, g, sp);
    SurfaceDistances out;
    out.pred_to_gt = directed(sg, sp, g, box, threads);
    out.gt_to_pred = directed(sp, sg, g, box, threads);
    return out;
}

double hd95(std::span<const double> distances) {
    if (distances.empty()) throw ValidationError("hd95 of an empty distance list");
    std::vector<double> x(distances.begin(), distances.end());
    const double rank = 0.95 * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(lo), x.end());
    const double xlo = x[lo];
    double xhi = xlo;
    if (hi != lo) xhi = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(lo) + 1, x.end());
    return xlo + (rank - static_cast<double>(lo)) * (xhi - xlo);
}

double msd(std::span<const double> distances) {
    if (distances.empty()) throw ValidationError("msd of an empty distance list");
    return std::accumulate(distances.begin(), distances.end(), 0.0) / static_cast<double>(distances.size());
}

std::string MetricRow::status_string() const {
    switch (status) {
        case MetricStatus::evaluated: return "evaluated";
        case MetricStatus::excluded_no_ground_truth: return "excluded_no_ground_truth";
        case MetricStatus::empty_prediction: return "empty_prediction";
        case MetricStatus::masked:
            if (slab) return "masked(" + std::to_string(slab->first) + "-" + std::to_string(slab->second) + ")";
            return "masked";
    }
    return "evaluated";
}

std::string to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::dsc: return "dsc";
        case MetricKind::hd95: return "hd95_mm";
        case MetricKind::msd: return "msd_mm";
    }
    return "dsc";
}

MetricKind metric_kind_from_string(const std::string& name) {
    if (name == "dsc") return MetricKind::dsc;
    if (name == "hd95" || name == "hd95_mm") return MetricKind::hd95;
    if (name == "msd" || name == "msd_mm") return MetricKind::msd;
    throw ValidationError("unknown metric '" + name + "' (expected dsc, hd95 or msd)");
}

std::optional<double> metric_value(const MetricRow& row, MetricKind kind) {
    switch (kind) {
        case MetricKind::dsc: return row.dsc;
        case MetricKind::hd95: return row.hd95_mm;
        case MetricKind::msd: return row.msd_mm;
    }
    return std::nullopt;
}

MetricRow evaluate_masks(const std::string& case_id, const std::string& organ, const Mask& gt, const Mask& pred,
                         int threads) {
    require_same_grid(gt.grid(), pred.grid(), "evaluate(" + organ + ")");
    MetricRow row;
    row.case_id = case_id;
    row.organ = organ;
    row.gt_voxels = static_cast<std::int64_t>(count_foreground(gt));
    row.pred_voxels = static_cast<std::int64_t>(count_foreground(pred));
    if (row.gt_voxels == 0) {
        row.status = MetricStatus::excluded_no_ground_truth;
        return row;
    }
    if (row.pred_voxels == 0) {
        row.status = MetricStatus::empty_prediction;
        row.dsc = 0.0;
        return row;
    }
    row.dsc = dsc(gt, pred);
    const auto pooled = surface_distances(gt, pred, threads).pooled();
    row.hd95_mm = hd95(pooled);
    row.msd_mm = msd(pooled);
    return row;
}

std::optional<std::pair<std::int64_t, std::int64_t>> axial_extent(const Mask& mask) {
    const Grid& g = mask.grid();
    const int ax = g.axial_axis();
    std::int64_t lo = g.dims[static_cast<std::size_t>(ax)];
    std::int64_t hi = -1;
    const auto v = mask.voxels();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == 0) continue;
        const auto s = g.unravel(static_cast<std::int64_t>(i))[static_cast<std::size_t>(ax)];
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (hi < 0) return std::nullopt;
    return std::pair{lo, hi};
}

Mask crop_axial(const Mask& mask, std::int64_t lo, std::int64_t hi) {
    const Grid& g = mask.grid();
    const auto ax = static_cast<std::size_t>(g.axial_axis());
    if (lo < 0 || hi >= g.dims[ax] || lo > hi) throw ValidationError("axial crop range outside the volume");
    Grid sub = g;
    sub.dims[ax] = hi - lo + 1;
    const auto dirs = g.directions();
    for (std::size_t w = 0; w < 3; ++w) sub.origin[w] += dirs[ax][w] * static_cast<double>(lo) * g.spacing[ax];
    Mask out(sub);
    for (std::int64_t k = 0; k < sub.dims[2]; ++k)
        for (std::int64_t j = 0; j < sub.dims[1]; ++j)
            for (std::int64_t i = 0; i < sub.dims[0]; ++i) {
                Index3 p{i, j, k};
                p[ax] += lo;
                out.at(i, j, k) = mask.at(p[0], p[1], p[2]);
            }
    return out;
}

std::vector<MetricRow> evaluate_case(const std::string& case_id, const LabelVolume& gt, const LabelVolume& pred,
                                     const OrganSchema& schema, const EvaluateOptions& options) {
    require_same_grid(gt.grid(), pred.grid(), "evaluate_case(" + case_id + ")");
    std::vector<std::string> organs = options.organs;
    if (organs.empty()) {
        for (const auto& o : schema.organs()) organs.push_back(o.name);
    }
    std::vector<MetricRow> rows;
    rows.reserve(organs.size());
    for (const auto& name : organs) {
        const LabelCode code = schema.at(name).label_code;
        Mask g = extract_label(gt, code);
        Mask p = extract_label(pred, code);
        if (options.masked_organs.contains(name)) {
            if (const auto slab = axial_extent(g)) {
                g = crop_axial(g, slab->first, slab->second);
                p = crop_axial(p, slab->first, slab->second);
                auto row = evaluate_masks(case_id, name, g, p, options.threads);
                if (row.status == MetricStatus::evaluated) {
                    row.status = MetricStatus::masked;
                    row.slab = slab;
                }
                rows.push_back(std::move(row));
                continue;
            }
        }
        rows.push_back(evaluate_masks(case_id, name, g, p, options.threads));
    }
    return rows;
}

std::string FprResult::fraction() const { return std::to_string(positives) + "/" + std::to_string(total); }

FprResult fpr_absent_organ(const std::vector<FprCase>& cases, double threshold_mm3) {
    if (!(threshold_mm3 >= 0.0)) throw ValidationError("FPR threshold must be >= 0");
    FprResult out;
    out.threshold_mm3 = threshold_mm3;
    for (const auto& c : cases) {
        if (c.nephrectomy_side != NephrectomySide::left && c.nephrectomy_side != NephrectomySide::right) {
            throw ValidationError("case " + c.case_id + " has no removed kidney side");
        }
        ++out.total;
        if (c.predicted_volume_mm3 > threshold_mm3) {
            ++out.positives;
            out.positive_cases.push_back(c.case_id);
        }
    }
    return out;
}

double removed_kidney_volume_mm3(const LabelVolume& pred, NephrectomySide side, const OrganSchema& schema) {
    if (side != NephrectomySide::left && side != NephrectomySide::right) {
        throw ValidationError("removed kidney side must be left or right");
    }
    const LabelCode code = schema.at(side == NephrectomySide::left ? "kidney_left" : "kidney_right").label_code;
    const auto v = pred.voxels();
    const auto n = std::count(v.begin(), v.end(), code);
    return static_cast<double>(n) * pred.grid().voxel_volume_mm3();
}

namespace {

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return {};
    // Shortest form that parses back to the same double.
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, *v);
    return std::string(buf, res.ptr);
}

MetricStatus parse_status(const std::string& s, std::optional<std::pair<std::int64_t, std::int64_t>>& slab) {
    if (s == "evaluated") return MetricStatus::evaluated;
    if (s == "excluded_no_ground_truth") return MetricStatus::excluded_no_ground_truth;
    if (s == "empty_prediction") return MetricStatus::empty_prediction;
    if (s.rfind("masked", 0) == 0) {
        long long lo = 0;
        long long hi = 0;
        if (std::sscanf(s.c_str(), "masked(%lld-%lld)", &lo, &hi) == 2) slab = std::pair{lo, hi};
        return MetricStatus::masked;
    }
    throw ValidationError("unknown metric status '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::optional<double> parse_opt(const std::string& s, std::size_t line_no) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
}

}  // namespace

std::string to_csv(const std::vector<MetricRow>& rows) {
    std::string out = "case_id,organ,dsc,hd95_mm,msd_mm,status,gt_voxels,pred_voxels\n";
    for (const auto& r : rows) {
        out += r.case_id + "," + r.organ + "," + fmt_opt(r.dsc) + "," + fmt_opt(r.hd95_mm) + "," +
               fmt_opt(r.msd_mm) + "," + r.status_string() + "," + std::to_string(r.gt_voxels) + "," +
               std::to_string(r.pred_voxels) + "\n";
    }
    return out;
}

std::string to_json(const std::vector<MetricRow>& rows) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j;
        j["case_id"] = r.case_id;
        j["organ"] = r.organ;
        j["dsc"] = r.dsc ? nlohmann::json(*r.dsc) : nlohmann::json(nullptr);
        j["hd95_mm"] = r.hd95_mm ? nlohmann::json(*r.hd95_mm) : nlohmann::json(nullptr);
        j["msd_mm"] = r.msd_mm ? nlohmann::json(*r.msd_mm) : nlohmann::json(nullptr);
        j["status"] = r.status_string();
        j["gt_voxels"] = r.gt_voxels;
        j["pred_voxels"] = r.pred_voxels;
        doc.push_back(std::move(j));
    }
    return doc.dump(2);
}

std::vector<MetricRow> metrics_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty metric table");
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected = {"case_id", "organ",  "dsc",       "hd95_mm",
                                               "msd_mm",  "status", "gt_voxels", "pred_voxels"};
    if (header != expected) throw ValidationError("metric table header mismatch");
    std::vector<MetricRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != expected.size()) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected 8 fields");
        }
        MetricRow r;
        r.case_id = f[0];
        r.organ = f[1];
        r.dsc = parse_opt(f[2], line_no);
        r.hd95_mm = parse_opt(f[3], line_no);
        r.msd_mm = parse_opt(f[4], line_no);
        r.status = parse_status(f[5], r.slab);
        r.gt_voxels = static_cast<std::int64_t>(parse_opt(f[6], line_no).value_or(0));
        r.pred_voxels = static_cast<std::int64_t>(parse_opt(f[7], line_no).value_or(0));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<MetricRow> load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read metric table " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return metrics_from_csv(buf.str());
}

}  // namespace oar
