#include "oar/cli/render.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace oar::cli {

SliceAxis slice_axis_from_string(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "axial") return SliceAxis::axial;
    if (s == "coronal") return SliceAxis::coronal;
    if (s == "sagittal") return SliceAxis::sagittal;
    throw ValidationError("unknown slice axis '" + name + "' (expected axial, coronal or sagittal)");
}

std::string to_string(SliceAxis axis) {
    switch (axis) {
        case SliceAxis::axial: return "axial";
        case SliceAxis::coronal: return "coronal";
        case SliceAxis::sagittal: return "sagittal";
    }
    return "axial";
}

int volume_axis(const Grid& grid, SliceAxis axis) {
    const char* codes = axis == SliceAxis::axial ? "SI" : axis == SliceAxis::coronal ? "AP" : "LR";
    for (int a = 0; a < 3; ++a) {
        const char c = grid.axis_codes[static_cast<std::size_t>(a)];
        if (c == codes[0] || c == codes[1]) return a;
    }
    return axis == SliceAxis::axial ? 2 : axis == SliceAxis::coronal ? 1 : 0;
}

std::int64_t slice_count(const Grid& grid, SliceAxis axis) {
    return grid.dims[static_cast<std::size_t>(volume_axis(grid, axis))];
}

namespace {

// In-plane (column, row) volume axes.
std::pair<int, int> plane_axes(const Grid& grid, SliceAxis axis) {
    const int n = volume_axis(grid, axis);
    int u = -1, v = -1;
    for (int a = 0; a < 3; ++a) {
        if (a == n) continue;
        (u < 0 ? u : v) = a;
    }
    // Put the vertical anatomical direction (S/I, else A/P) on rows.
    auto vertical_rank = [&](int a) {
        const char c = grid.axis_codes[static_cast<std::size_t>(a)];
        return (c == 'S' || c == 'I') ? 0 : (c == 'A' || c == 'P') ? 1 : 2;
    };
    if (vertical_rank(u) < vertical_rank(v)) std::swap(u, v);
    return {u, v};
}

}  // namespace

std::pair<std::int64_t, std::int64_t> slice_shape(const Grid& grid, SliceAxis axis) {
    const auto [u, v] = plane_axes(grid, axis);
    return {grid.dims[static_cast<std::size_t>(u)], grid.dims[static_cast<std::size_t>(v)]};
}

Rgb organ_color(LabelCode code) {
    static constexpr std::array<Rgb, 18> palette{{
        {0, 0, 0},       {255, 127, 14},  {31, 119, 180},  {23, 190, 207},  {214, 39, 40},   {255, 152, 150},
        {227, 26, 28},   {188, 189, 34},  {140, 86, 75},   {44, 160, 44},   {247, 247, 247}, {255, 221, 87},
        {197, 27, 125},  {106, 61, 154},  {152, 223, 138}, {0, 128, 128},   {255, 187, 120}, {174, 199, 232},
    }};
    if (code < palette.size()) return palette[code];
    // Deterministic fallback for codes outside the default catalog.
    const auto h = static_cast<std::uint32_t>(code) * 2654435761U;
    return {static_cast<std::uint8_t>(64 + (h >> 24) % 192), static_cast<std::uint8_t>(64 + (h >> 16) % 192),
            static_cast<std::uint8_t>(64 + (h >> 8) % 192)};
}

std::string color_hex(LabelCode code) {
    const Rgb c = organ_color(code);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

RenderMode render_mode_from_string(const std::string& name) {
    if (name.empty() || name == "overlay") return RenderMode::overlay;
    if (name == "overlay_only" || name == "overlay-only") return RenderMode::overlay_only;
    if (name == "image") return RenderMode::image;
    throw ValidationError("unknown render mode '" + name + "' (expected overlay, overlay_only or image)");
}

Raster render_slice(const ImageVolume* image, const LabelVolume* labels, const RenderRequest& request) {
    if (image == nullptr && labels == nullptr) throw ValidationError("nothing to render");
    const Grid& grid = image != nullptr ? image->grid() : labels->grid();
    if (image != nullptr && labels != nullptr && image->grid().dims != labels->grid().dims) {
        throw GeometryError("image and label volumes have different dimensions");
    }
    if (!(request.window > 0.0)) throw ValidationError("window must be positive");
    const int n = volume_axis(grid, request.axis);
    const auto count = grid.dims[static_cast<std::size_t>(n)];
    if (request.index < 0 || request.index >= count) {
        throw ValidationError("slice " + std::to_string(request.index) + " outside 0.." + std::to_string(count - 1),
                              "not-found");
    }
    const auto [u, v] = plane_axes(grid, request.axis);
    const auto w = grid.dims[static_cast<std::size_t>(u)];
    const auto h = grid.dims[static_cast<std::size_t>(v)];
    const bool flip_cols = grid.axis_codes[static_cast<std::size_t>(u)] == 'R';
    const char vc = grid.axis_codes[static_cast<std::size_t>(v)];
    const bool flip_rows = vc == 'A' || vc == 'S';

    // Volume linear index of pixel (x, y).
    auto voxel = [&, u = u, v = v](std::int64_t x, std::int64_t y) {
        Index3 p{};
        p[static_cast<std::size_t>(n)] = request.index;
        p[static_cast<std::size_t>(u)] = flip_cols ? w - 1 - x : x;
        p[static_cast<std::size_t>(v)] = flip_rows ? h - 1 - y : y;
        return static_cast<std::size_t>(grid.linear(p[0], p[1], p[2]));
    };

    Raster out;
    out.width = w;
    out.height = h;
    out.rgba.assign(static_cast<std::size_t>(w * h * 4), 0);
    const double lo = request.level - request.window / 2.0;
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            auto* px = &out.rgba[static_cast<std::size_t>((y * w + x) * 4)];
            if (request.mode == RenderMode::overlay_only) continue;
            std::uint8_t g = 0;
            if (image != nullptr) {
                const double t = ((*image)[voxel(x, y)] - lo) / request.window;
                g = static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
            }
            px[0] = px[1] = px[2] = g;
            px[3] = 255;
        }
    }
    if (request.mode == RenderMode::image || labels == nullptr || request.overlays.empty()) return out;

    std::vector<LabelCode> plane(static_cast<std::size_t>(w * h));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) plane[static_cast<std::size_t>(y * w + x)] = (*labels)[voxel(x, y)];
    auto at = [&](std::int64_t x, std::int64_t y) -> LabelCode {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0;
        return plane[static_cast<std::size_t>(y * w + x)];
    };
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const LabelCode c = at(x, y);
            if (c == 0 || request.overlays.count(c) == 0) continue;
            const bool edge = at(x - 1, y) != c || at(x + 1, y) != c || at(x, y - 1) != c || at(x, y + 1) != c;
            if (!edge) continue;
            const Rgb col = organ_color(c);
            auto* px = &out.rgba[static_cast<std::size_t>((y * w + x) * 4)];
            px[0] = col.r;
            px[1] = col.g;
            px[2] = col.b;
            px[3] = 255;
        }
    }
    return out;
}

std::string encode_png(const Raster& raster) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw ComputationError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw ComputationError("png_create_info_struct failed");
    }
    std::string out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ComputationError("PNG encoding failed");
    }
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t len) {
            static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
        },
        nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
                 PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::int64_t y = 0; y < raster.height; ++y) {
        auto* row = const_cast<png_bytep>(raster.rgba.data() + y * raster.width * 4);
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

}  // namespace oar::cli
