#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oar/error.hpp"

namespace oar {

using Index3 = std::array<std::int64_t, 3>;

/// Sampling grid of a volume. Voxel (i, j, k) lives at linear index
/// i + dims[0] * (j + dims[1] * k); axis 0 varies fastest, as in NIfTI.
///
/// axis_codes[a] names the anatomical direction that axis a points toward
/// (RAS+ world, nibabel convention): identity affine gives "RAS".
struct Grid {
    Index3 dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    std::string axis_codes = "RAS";

    std::size_t voxel_count() const noexcept {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }

    std::int64_t linear(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
        return i + dims[0] * (j + dims[1] * k);
    }

    Index3 unravel(std::int64_t idx) const noexcept {
        const std::int64_t i = idx % dims[0];
        const std::int64_t rest = idx / dims[0];
        return {i, rest % dims[1], rest / dims[1]};
    }

    double voxel_volume_mm3() const noexcept { return spacing[0] * spacing[1] * spacing[2]; }

    /// Axis whose code is S or I; falls back to axis 2 when none is.
    int axial_axis() const noexcept;

    /// World-space unit direction of each voxel axis, derived from axis_codes.
    std::array<std::array<double, 3>, 3> directions() const;

    /// Throws ValidationError when dims/spacing/axis codes are malformed.
    void validate() const;

    /// Same dims, spacing, origin (within tol mm) and axis codes.
    bool same_geometry(const Grid& other, double tol = 1e-6) const noexcept;
};

/// Checks an axis code string such as "RAS" or "LPI": one code per world axis.
bool valid_axis_codes(const std::string& codes) noexcept;

/// Dense 3D array on a Grid.
template <typename T>
class Volume {
public:
    using value_type = T;

    Volume() = default;

    explicit Volume(Grid grid, T fill = T{}) : grid_(std::move(grid)) {
        grid_.validate();
        voxels_.assign(grid_.voxel_count(), fill);
    }

    Volume(Grid grid, std::vector<T> voxels) : grid_(std::move(grid)), voxels_(std::move(voxels)) {
        grid_.validate();
        if (voxels_.size() != grid_.voxel_count()) {
            throw ValidationError("voxel array length " + std::to_string(voxels_.size()) +
                                  " does not match grid size " + std::to_string(grid_.voxel_count()));
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    std::span<const T> voxels() const noexcept { return voxels_; }
    std::span<T> voxels() noexcept { return voxels_; }
    std::size_t size() const noexcept { return voxels_.size(); }

    const T& operator[](std::size_t idx) const noexcept { return voxels_[idx]; }
    T& operator[](std::size_t idx) noexcept { return voxels_[idx]; }

    const T& at(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
        return voxels_[static_cast<std::size_t>(grid_.linear(i, j, k))];
    }
    T& at(std::int64_t i, std::int64_t j, std::int64_t k) noexcept {
        return voxels_[static_cast<std::size_t>(grid_.linear(i, j, k))];
    }

    friend bool operator==(const Volume& a, const Volume& b) {
        return a.grid_.same_geometry(b.grid_, 0.0) && a.voxels_ == b.voxels_;
    }

private:
    Grid grid_;
    std::vector<T> voxels_;
};

using LabelCode = std::uint16_t;

/// Multi-label organ volume; 0 is background.
using LabelVolume = Volume<LabelCode>;
/// CT intensities (HU after slope/intercept scaling).
using ImageVolume = Volume<double>;
/// Binary mask, 0 or 1 per voxel.
using Mask = Volume<std::uint8_t>;

std::size_t count_foreground(const Mask& mask) noexcept;

/// Voxels of `labels` equal to `code`.
Mask extract_label(const LabelVolume& labels, LabelCode code);

/// Throws GeometryError naming `what` when the two grids differ.
void require_same_grid(const Grid& a, const Grid& b, const std::string& what);

}  // namespace oar
