#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oar/volume.hpp"

namespace oar {

/// Exact squared Euclidean distance transform (mm^2) to the non-zero voxels
/// of `features`, honouring anisotropic spacing. Separable lower-envelope
/// algorithm (Felzenszwalb & Huttenlocher), one linear pass per axis.
/// Voxels are +inf when `features` is empty.
std::vector<double> squared_edt(const Mask& features, int threads = 1);

/// Distance (mm) from every voxel center of `grid` to the nearest voxel
/// center listed in `target` (linear indices). Throws
/// ComputationError("undefined-distance") when `target` is empty.
ImageVolume edt(std::span<const std::int64_t> target, const Grid& grid, int threads = 1);

}  // namespace oar
