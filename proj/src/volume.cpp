#include "oar/volume.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace oar {

namespace {

// Returns world axis (0=x R/L, 1=y A/P, 2=z S/I) and sign for one code.
bool decode_axis(char c, int& axis, double& sign) {
    switch (std::toupper(static_cast<unsigned char>(c))) {
        case 'R': axis = 0; sign = 1.0; return true;
        case 'L': axis = 0; sign = -1.0; return true;
        case 'A': axis = 1; sign = 1.0; return true;
        case 'P': axis = 1; sign = -1.0; return true;
        case 'S': axis = 2; sign = 1.0; return true;
        case 'I': axis = 2; sign = -1.0; return true;
        default: return false;
    }
}

}  // namespace

bool valid_axis_codes(const std::string& codes) noexcept {
    if (codes.size() != 3) return false;
    std::array<bool, 3> seen{};
    for (char c : codes) {
        int axis = 0;
        double sign = 0.0;
        if (!decode_axis(c, axis, sign) || seen[static_cast<std::size_t>(axis)]) return false;
        seen[static_cast<std::size_t>(axis)] = true;
    }
    return true;
}

int Grid::axial_axis() const noexcept {
    for (int a = 0; a < 3 && a < static_cast<int>(axis_codes.size()); ++a) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(axis_codes[a])));
        if (c == 'S' || c == 'I') return a;
    }
    return 2;
}

std::array<std::array<double, 3>, 3> Grid::directions() const {
    std::array<std::array<double, 3>, 3> dirs{};
    for (std::size_t a = 0; a < 3; ++a) {
        int axis = 0;
        double sign = 0.0;
        if (a >= axis_codes.size() || !decode_axis(axis_codes[a], axis, sign)) {
            throw ValidationError("invalid axis codes '" + axis_codes + "'", "orientation");
        }
        dirs[a][static_cast<std::size_t>(axis)] = sign;
    }
    return dirs;
}

void Grid::validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw ValidationError("grid dims must be >= 1");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw ValidationError("grid spacing must be positive and finite");
        }
        if (!std::isfinite(origin[a])) throw ValidationError("grid origin must be finite");
    }
    if (!valid_axis_codes(axis_codes)) {
        throw ValidationError("invalid axis codes '" + axis_codes + "'", "orientation");
    }
}

bool Grid::same_geometry(const Grid& other, double tol) const noexcept {
    if (dims != other.dims || axis_codes != other.axis_codes) return false;
    for (std::size_t a = 0; a < 3; ++a) {
        const double sp_scale = std::max(std::abs(spacing[a]), std::abs(other.spacing[a]));
        if (std::abs(spacing[a] - other.spacing[a]) > tol * std::max(1.0, sp_scale)) return false;
        if (std::abs(origin[a] - other.origin[a]) > tol * std::max(1.0, std::abs(origin[a]))) return false;
    }
    return true;
}

std::size_t count_foreground(const Mask& mask) noexcept {
    const auto v = mask.voxels();
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; }));
}

Mask extract_label(const LabelVolume& labels, LabelCode code) {
    Mask out(labels.grid());
    const auto src = labels.voxels();
    auto dst = out.voxels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == code ? 1 : 0;
    return out;
}

void require_same_grid(const Grid& a, const Grid& b, const std::string& what) {
    if (!a.same_geometry(b)) {
        throw GeometryError(what + ": grids differ (dims/spacing/origin/axis codes)");
    }
}

}  // namespace oar
