// Python bindings for the evaluation core. Volumes cross the boundary as
// numpy arrays indexed [i, j, k] (Fortran order, axis 0 fastest).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "oar/components.hpp"
#include "oar/edt.hpp"
#include "oar/error.hpp"
#include "oar/harmonize.hpp"
#include "oar/likert.hpp"
#include "oar/metrics.hpp"
#include "oar/nifti.hpp"
#include "oar/report.hpp"
#include "oar/split.hpp"
#include "oar/stats.hpp"

namespace py = pybind11;
using namespace oar;

namespace {

template <typename T>
using FArray = py::array_t<T, py::array::f_style | py::array::forcecast>;

using Spacing = std::array<double, 3>;

Grid make_grid(const py::buffer_info& info, const Spacing& spacing, const std::array<double, 3>& origin = {0, 0, 0},
               const std::string& axis_codes = "RAS") {
    if (info.ndim != 3) throw ValidationError("expected a 3D array, got " + std::to_string(info.ndim) + "D");
    Grid g;
    g.dims = {info.shape[0], info.shape[1], info.shape[2]};
    g.spacing = spacing;
    g.origin = origin;
    g.axis_codes = axis_codes;
    return g;
}

template <typename T, typename In>
Volume<T> to_volume(const FArray<In>& arr, const Spacing& spacing, const std::array<double, 3>& origin = {0, 0, 0},
                    const std::string& axis_codes = "RAS") {
    const auto info = arr.request();
    Grid g = make_grid(info, spacing, origin, axis_codes);
    const In* data = arr.data();
    std::vector<T> voxels(g.voxel_count());
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        if constexpr (std::is_same_v<T, std::uint8_t>) {
            voxels[i] = data[i] != 0 ? 1 : 0;
        } else {
            voxels[i] = static_cast<T>(data[i]);
        }
    }
    return Volume<T>(std::move(g), std::move(voxels));
}

Mask to_mask(const FArray<std::uint8_t>& arr, const Spacing& spacing) {
    return to_volume<std::uint8_t>(arr, spacing);
}

template <typename T, typename V>
py::array_t<T, py::array::f_style> to_array(const V& values, const Grid& g) {
    py::array_t<T, py::array::f_style> out({g.dims[0], g.dims[1], g.dims[2]});
    T* dst = out.mutable_data();
    for (std::size_t i = 0; i < g.voxel_count(); ++i) dst[i] = static_cast<T>(values[i]);
    return out;
}

py::dict grid_dict(const Grid& g) {
    py::dict d;
    d["shape"] = py::make_tuple(g.dims[0], g.dims[1], g.dims[2]);
    d["spacing"] = py::make_tuple(g.spacing[0], g.spacing[1], g.spacing[2]);
    d["origin"] = py::make_tuple(g.origin[0], g.origin[1], g.origin[2]);
    d["axis_codes"] = g.axis_codes;
    return d;
}

py::dict test_dict(const stats::TestResult& r) {
    py::dict d;
    d["statistic"] = r.statistic;
    d["p_value"] = r.p_value;
    d["method"] = stats::to_string(r.method);
    d["n_effective"] = r.n_effective;
    return d;
}

Connectivity connectivity_arg(int n) { return connectivity_from_int(n); }

Manifest manifest_from_pairs(const std::vector<std::pair<std::string, std::string>>& cases) {
    Manifest m;
    for (const auto& [cid, pid] : cases) {
        CaseRecord c;
        c.case_id = cid;
        c.patient_id = pid;
        m.cases.push_back(c);
    }
    return m;
}

py::dict plan_dict(const split::SplitPlan& plan) {
    py::dict assignments;
    for (const auto& [cid, bucket] : plan.assignments) assignments[py::str(cid)] = bucket;
    py::dict d;
    d["seed"] = plan.seed;
    d["ratio"] = plan.ratio;
    d["assignments"] = assignments;
    d["sizes"] = plan.bucket_sizes();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Pediatric OAR segmentation evaluation core";

    static py::exception<Error> base_error(m, "OarError", PyExc_RuntimeError);
    static py::exception<ValidationError> validation_error(m, "ValidationError", base_error.ptr());
    static py::exception<IoError> io_error(m, "IoError", base_error.ptr());
    static py::exception<ComputationError> computation_error(m, "ComputationError", base_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const std::string msg = e.category() + ": " + e.what();
            switch (e.kind()) {
                case ErrorKind::validation: PyErr_SetString(validation_error.ptr(), msg.c_str()); break;
                case ErrorKind::io: PyErr_SetString(io_error.ptr(), msg.c_str()); break;
                case ErrorKind::computation: PyErr_SetString(computation_error.ptr(), msg.c_str()); break;
            }
        }
    });

    // Metrics.
    m.def("dsc", [](const FArray<std::uint8_t>& gt, const FArray<std::uint8_t>& pred) {
        return dsc(to_mask(gt, {1, 1, 1}), to_mask(pred, {1, 1, 1}));
    }, py::arg("gt"), py::arg("pred"));
    m.def("surface_distances",
          [](const FArray<std::uint8_t>& gt, const FArray<std::uint8_t>& pred, Spacing spacing, int threads) {
              const auto sd = surface_distances(to_mask(gt, spacing), to_mask(pred, spacing), threads);
              return py::make_tuple(py::array_t<double>(sd.pred_to_gt.size(), sd.pred_to_gt.data()),
                                    py::array_t<double>(sd.gt_to_pred.size(), sd.gt_to_pred.data()));
          },
          py::arg("gt"), py::arg("pred"), py::arg("spacing") = Spacing{1, 1, 1}, py::arg("threads") = 1,
          "Returns (pred_to_gt, gt_to_pred) distances in mm between 6-neighbourhood surface voxels.");
    m.def("hd95", [](const std::vector<double>& d) { return hd95(d); }, py::arg("distances"));
    m.def("msd", [](const std::vector<double>& d) { return msd(d); }, py::arg("distances"));
    m.def("evaluate_pair",
          [](const FArray<std::uint8_t>& gt, const FArray<std::uint8_t>& pred, Spacing spacing, int threads) {
              const Mask g = to_mask(gt, spacing), p = to_mask(pred, spacing);
              const auto row = evaluate_masks("", "", g, p, threads);
              py::dict d;
              d["status"] = row.status_string();
              d["dsc"] = row.dsc ? py::cast(*row.dsc) : py::none();
              d["hd95_mm"] = row.hd95_mm ? py::cast(*row.hd95_mm) : py::none();
              d["msd_mm"] = row.msd_mm ? py::cast(*row.msd_mm) : py::none();
              return d;
          },
          py::arg("gt"), py::arg("pred"), py::arg("spacing") = Spacing{1, 1, 1}, py::arg("threads") = 1);

    m.def("distance_transform",
          [](const FArray<std::uint8_t>& features, Spacing spacing, int threads) {
              const Mask f = to_mask(features, spacing);
              auto sq = squared_edt(f, threads);
              for (auto& v : sq) v = std::sqrt(v);
              return to_array<double>(sq, f.grid());
          },
          py::arg("features"), py::arg("spacing") = Spacing{1, 1, 1}, py::arg("threads") = 1,
          "Euclidean distance in mm from every voxel to the nearest non-zero voxel.");

    // Components.
    m.def("label_components",
          [](const FArray<std::uint8_t>& mask, int connectivity) {
              const Mask mk = to_mask(mask, {1, 1, 1});
              const auto cl = label_components(mk, connectivity_arg(connectivity));
              return py::make_tuple(to_array<std::uint32_t>(cl.labels, mk.grid()), cl.sizes);
          },
          py::arg("mask"), py::arg("connectivity") = 26);
    m.def("keep_largest_component",
          [](const FArray<std::uint8_t>& mask, int connectivity) {
              const Mask out = keep_largest_component(to_mask(mask, {1, 1, 1}), connectivity_arg(connectivity));
              return to_array<std::uint8_t>(out.voxels(), out.grid());
          },
          py::arg("mask"), py::arg("connectivity") = 26);

    // Harmonization.
    m.def("organs", [] {
        py::list out;
        for (const auto& o : OrganSchema::default_schema().organs()) {
            py::dict d;
            d["name"] = o.name;
            d["label_code"] = o.label_code;
            d["type"] = to_string(o.organ_type);
            out.append(d);
        }
        return out;
    });
    m.def("priority_order", [] { return OrganSchema::default_schema().priority_order(); });
    m.def("resolve_overlaps",
          [](const std::map<std::string, FArray<std::uint8_t>>& masks) {
              if (masks.empty()) throw ValidationError("no masks given");
              MaskSet set;
              for (const auto& [name, arr] : masks) set[canonical_name(name)] = to_mask(arr, {1, 1, 1});
              const auto& grid = set.begin()->second.grid();
              const auto out = resolve_overlaps(set, OrganSchema::default_schema(), grid);
              return to_array<std::uint16_t>(out.voxels(), out.grid());
          },
          py::arg("masks"), "Merges organ name -> mask into one label volume; overlaps go to the higher priority organ.");

    // Statistics.
    m.def("wilcoxon_signed_rank",
          [](const std::vector<double>& a, const std::vector<double>& b) {
              return test_dict(stats::wilcoxon_signed_rank(a, b));
          },
          py::arg("a"), py::arg("b"));
    m.def("wilcoxon_rank_sum",
          [](const std::vector<double>& x, const std::vector<double>& y) {
              return test_dict(stats::wilcoxon_rank_sum(x, y));
          },
          py::arg("x"), py::arg("y"));
    m.def("bonferroni",
          [](const std::vector<double>& p, std::optional<std::size_t> family) { return stats::bonferroni(p, family); },
          py::arg("p_values"), py::arg("family_size") = py::none());
    m.def("stars", &stats::stars, py::arg("p"));
    m.def("quartiles", [](const std::vector<double>& v) {
        const auto q = report::quartiles(v);
        return py::make_tuple(q.min, q.q1, q.median, q.q3, q.max);
    }, py::arg("values"));

    // Splits.
    m.def("largest_remainder", &split::largest_remainder, py::arg("total"), py::arg("ratio"));
    m.def("make_split",
          [](const std::vector<std::pair<std::string, std::string>>& cases, const std::vector<std::int64_t>& ratio,
             std::uint64_t seed) { return plan_dict(split::make_split(manifest_from_pairs(cases), ratio, seed)); },
          py::arg("cases"), py::arg("ratio"), py::arg("seed"),
          "cases is a list of (case_id, patient_id); all cases of a patient land in one bucket.");
    m.def("make_split_from_manifest",
          [](const std::string& path, const std::vector<std::int64_t>& ratio, std::uint64_t seed,
             const std::vector<std::string>& stratify) {
              std::vector<stats::SubgroupDimension> dims;
              for (const auto& s : stratify) dims.push_back(stats::dimension_from_string(s));
              return plan_dict(split::make_split(load_manifest(path), ratio, seed, dims));
          },
          py::arg("manifest_path"), py::arg("ratio"), py::arg("seed"), py::arg("stratify") = std::vector<std::string>{});

    // NIfTI.
    m.def("read_labels",
          [](const std::string& path) {
              const auto v = nifti::read_labels(path);
              return py::make_tuple(to_array<std::uint16_t>(v.voxels(), v.grid()), grid_dict(v.grid()));
          },
          py::arg("path"), "Returns (uint16 array, geometry dict).");
    m.def("read_image",
          [](const std::string& path) {
              const auto v = nifti::read_image(path);
              return py::make_tuple(to_array<double>(v.voxels(), v.grid()), grid_dict(v.grid()));
          },
          py::arg("path"), "Returns (float64 array with scaling applied, geometry dict).");
    m.def("write_labels",
          [](const std::string& path, const FArray<std::uint16_t>& labels, Spacing spacing,
             std::array<double, 3> origin, const std::string& axis_codes) {
              nifti::write(to_volume<LabelCode>(labels, spacing, origin, axis_codes), path);
          },
          py::arg("path"), py::arg("labels"), py::arg("spacing") = Spacing{1, 1, 1},
          py::arg("origin") = std::array<double, 3>{0, 0, 0}, py::arg("axis_codes") = "RAS");
    m.def("write_image",
          [](const std::string& path, const FArray<double>& image, Spacing spacing, std::array<double, 3> origin,
             const std::string& axis_codes, const std::string& datatype) {
              const auto vol = to_volume<double>(image, spacing, origin, axis_codes);
              std::optional<nifti::DataType> dt;
              for (auto t : {nifti::DataType::uint8, nifti::DataType::int16, nifti::DataType::uint16,
                             nifti::DataType::int32, nifti::DataType::float32, nifti::DataType::float64}) {
                  if (nifti::to_string(t) == datatype) dt = t;
              }
              if (!dt) throw ValidationError("unknown datatype '" + datatype + "'");
              nifti::write(vol, path, dt);
          },
          py::arg("path"), py::arg("image"), py::arg("spacing") = Spacing{1, 1, 1},
          py::arg("origin") = std::array<double, 3>{0, 0, 0}, py::arg("axis_codes") = "RAS",
          py::arg("datatype") = "float32");

    // Reader review.
    m.def("likert_summary_json",
          [](const std::string& jsonl) {
              const auto parsed = report::parse_jsonl(jsonl, &OrganSchema::default_schema());
              return report::likert_summary_json(report::likert_summarize(parsed.records));
          },
          py::arg("jsonl"), "Summarizes score records (one JSON object per line) into a JSON document.");
}
