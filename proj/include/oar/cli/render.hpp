#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oar/volume.hpp"

namespace oar::cli {

enum class SliceAxis { sagittal, coronal, axial };

/// Accepts "axial", "coronal", "sagittal" (case-insensitive).
SliceAxis slice_axis_from_string(const std::string& name);
std::string to_string(SliceAxis axis);

/// Volume axis a plane is taken across: the S/I, A/P or L/R axis of the grid.
int volume_axis(const Grid& grid, SliceAxis axis);

/// Slice count along a plane's normal.
std::int64_t slice_count(const Grid& grid, SliceAxis axis);

/// (width, height) in pixels of a slice image.
std::pair<std::int64_t, std::int64_t> slice_shape(const Grid& grid, SliceAxis axis);

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

/// Fixed palette indexed by label code.
Rgb organ_color(LabelCode code);
std::string color_hex(LabelCode code);

enum class RenderMode { overlay, overlay_only, image };
RenderMode render_mode_from_string(const std::string& name);

struct RenderRequest {
    SliceAxis axis = SliceAxis::axial;
    std::int64_t index = 0;
    double window = 400.0;
    double level = 40.0;
    /// Label codes whose contours are drawn.
    std::set<LabelCode> overlays;
    RenderMode mode = RenderMode::overlay;
};

/// 8-bit RGBA, row-major, top row first.
struct Raster {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<std::uint8_t> rgba;
};

/// Renders one slice. Rows run from anterior/superior at the top; columns put
/// patient right on the left. `image` or `labels` may be null but not both;
/// when both are given their grids must match. Contours are the in-plane
/// 4-neighbourhood boundary pixels of each selected organ. Throws
/// ValidationError("not-found") for an out-of-range slice index.
Raster render_slice(const ImageVolume* image, const LabelVolume* labels, const RenderRequest& request);

/// Lossless PNG bytes of a raster.
std::string encode_png(const Raster& raster);

}  // namespace oar::cli
