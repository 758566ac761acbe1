#pragma once

#include <cstdint>
#include <vector>

#include "oar/volume.hpp"

namespace oar {

enum class Connectivity : int { faces = 6, edges = 18, corners = 26 };

/// Throws ValidationError for anything other than 6, 18 or 26.
Connectivity connectivity_from_int(int n);

struct ComponentLabels {
    /// 0 for background, otherwise 1-based component id. Components are
    /// numbered in order of their smallest linear voxel index.
    std::vector<std::uint32_t> labels;
    /// sizes[id - 1] is the voxel count of component id.
    std::vector<std::size_t> sizes;
};

ComponentLabels label_components(const Mask& mask, Connectivity connectivity);

/// Keeps only the largest connected component. Equal sizes resolve to the
/// component containing the smallest linear index; an empty mask is returned
/// unchanged.
Mask keep_largest_component(const Mask& mask, Connectivity connectivity = Connectivity::corners);

/// Applies keep_largest_component to every non-zero label of a multi-label volume.
LabelVolume keep_largest_component_per_label(const LabelVolume& labels,
                                             Connectivity connectivity = Connectivity::corners);

}  // namespace oar
