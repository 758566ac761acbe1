#pragma once

#include "oar/volume.hpp"

namespace oar {

/// Nearest-neighbour regridding of labels onto `ref`. Each output voxel takes
/// the label of the source voxel whose center is nearest in world space;
/// exact ties go to the lower source index on each axis. Output voxels whose
/// center lies outside the source field of view (more than half a source
/// voxel beyond the outermost centers) are background.
///
/// Throws GeometryError("orientation") when axis codes differ.
LabelVolume resample_labels_nearest(const LabelVolume& src, const Grid& ref);

}  // namespace oar
