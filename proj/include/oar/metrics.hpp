#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oar/manifest.hpp"
#include "oar/schema.hpp"
#include "oar/volume.hpp"

namespace oar {

/// 2|A ∩ B| / (|A| + |B|); 1.0 when both masks are empty.
double dsc(const Mask& gt, const Mask& pred);

/// Foreground voxels with at least one background or out-of-volume
/// face neighbour, as sorted linear indices.
std::vector<std::int64_t> extract_surface(const Mask& mask);

/// Directed surface distances in mm, both directions.
struct SurfaceDistances {
    std::vector<double> pred_to_gt;  // one per prediction surface voxel
    std::vector<double> gt_to_pred;  // one per ground-truth surface voxel

    /// pred_to_gt followed by gt_to_pred.
    std::vector<double> pooled() const;
};

/// Distances between voxel centers of the two 6-neighbourhood surfaces.
/// Throws ValidationError("empty-structure") when either mask is empty and
/// GeometryError when grids differ.
SurfaceDistances surface_distances(const Mask& gt, const Mask& pred, int threads = 1);

/// 95th percentile with linear interpolation between order statistics at
/// zero-based rank 0.95 (n - 1). Throws ValidationError on an empty list.
double hd95(std::span<const double> distances);
/// Arithmetic mean. Throws ValidationError on an empty list.
double msd(std::span<const double> distances);

enum class MetricStatus { evaluated, excluded_no_ground_truth, empty_prediction, masked };

struct MetricRow {
    std::string case_id;
    std::string organ;
    std::optional<double> dsc;
    std::optional<double> hd95_mm;
    std::optional<double> msd_mm;
    MetricStatus status = MetricStatus::evaluated;
    /// Inclusive axial slice range used for masked rows.
    std::optional<std::pair<std::int64_t, std::int64_t>> slab;
    std::int64_t gt_voxels = 0;
    std::int64_t pred_voxels = 0;

    /// "evaluated", "excluded_no_ground_truth", "empty_prediction" or "masked(lo-hi)".
    std::string status_string() const;
    /// True for rows that carry metric values (evaluated or masked).
    bool has_distances() const noexcept { return hd95_mm.has_value(); }
};

enum class MetricKind { dsc, hd95, msd };
std::string to_string(MetricKind kind);
/// Accepts "dsc", "hd95", "hd95_mm", "msd", "msd_mm".
MetricKind metric_kind_from_string(const std::string& name);
/// The row's value for `kind`, if the row carries one.
std::optional<double> metric_value(const MetricRow& row, MetricKind kind);

struct EvaluateOptions {
    /// Organs evaluated only on the axial slab covered by the ground truth.
    std::set<std::string> masked_organs{"stomach_bowel"};
    /// Organs to report; empty means every schema organ.
    std::vector<std::string> organs;
    int threads = 1;
};

/// One row per organ, in schema order.
std::vector<MetricRow> evaluate_case(const std::string& case_id, const LabelVolume& gt, const LabelVolume& pred,
                                     const OrganSchema& schema, const EvaluateOptions& options = {});

/// Metrics for one binary pair, applying the empty-ground-truth / empty-prediction rules.
MetricRow evaluate_masks(const std::string& case_id, const std::string& organ, const Mask& gt, const Mask& pred,
                         int threads = 1);

/// Restricts both masks to the axial slices [lo, hi] (inclusive) by cropping the grid.
Mask crop_axial(const Mask& mask, std::int64_t lo, std::int64_t hi);

/// Inclusive range of axial slices holding ground-truth voxels; nullopt if empty.
std::optional<std::pair<std::int64_t, std::int64_t>> axial_extent(const Mask& mask);

struct FprCase {
    std::string case_id;
    NephrectomySide nephrectomy_side = NephrectomySide::unknown;
    /// Predicted volume of the removed-side kidney.
    double predicted_volume_mm3 = 0.0;
};

struct FprResult {
    std::string organ = "kidney";
    std::int64_t positives = 0;
    std::int64_t total = 0;
    double threshold_mm3 = 0.0;
    std::vector<std::string> positive_cases;

    /// "positives/total", e.g. "3/14".
    std::string fraction() const;
};

/// Counts cases whose predicted removed-side kidney volume exceeds the
/// threshold. Throws ValidationError when a case has no removed side.
FprResult fpr_absent_organ(const std::vector<FprCase>& cases, double threshold_mm3 = 0.0);

/// Voxel count of the removed-side kidney in `pred` times the voxel volume.
double removed_kidney_volume_mm3(const LabelVolume& pred, NephrectomySide side, const OrganSchema& schema);

std::string to_csv(const std::vector<MetricRow>& rows);
std::string to_json(const std::vector<MetricRow>& rows);
/// Parses the CSV written by to_csv. Throws ValidationError on malformed input.
std::vector<MetricRow> metrics_from_csv(const std::string& text);
std::vector<MetricRow> load_metrics_csv(const std::string& path);

}  // namespace oar
