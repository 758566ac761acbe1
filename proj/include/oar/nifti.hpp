#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "oar/volume.hpp"

namespace oar::nifti {

/// NIfTI-1 datatype codes accepted by the reader and writer.
enum class DataType : std::int16_t {
    uint8 = 2,
    int16 = 4,
    int32 = 8,
    float32 = 16,
    float64 = 64,
    uint16 = 512,
};

std::string to_string(DataType type);
int bytes_per_voxel(DataType type);

/// Header facts not carried by the volume types.
struct HeaderInfo {
    Grid grid;
    DataType datatype = DataType::uint8;
    double scl_slope = 0.0;
    double scl_inter = 0.0;
    int qform_code = 0;
    int sform_code = 0;
    bool single_file = true;  // "n+1" vs "ni1"
    bool byte_swapped = false;
};

/// Parses only the header of a .nii / .nii.gz / .hdr file.
HeaderInfo read_header(const std::string& path);

/// Reads a label volume. Float data must be integral within 1e-6 and every
/// value must lie in [0, 65535]; anything else raises FormatError("label-format").
/// scl_slope/scl_inter are not applied to labels.
LabelVolume read_labels(const std::string& path, HeaderInfo* info = nullptr);

/// Reads an intensity volume, applying scl_slope/scl_inter when slope is set
/// (non-zero and finite).
ImageVolume read_image(const std::string& path, HeaderInfo* info = nullptr);

/// Writes "n+1" single-file NIfTI; gzip-compressed when the path ends in ".gz".
/// Without an explicit datatype, labels use the narrowest unsigned type
/// that holds the maximum code.
void write(const LabelVolume& volume, const std::string& path, std::optional<DataType> datatype = std::nullopt);

/// Without an explicit datatype, images use int16 when every value is an
/// in-range integer, float32 when every value is exactly representable, else float64.
/// Values that the requested datatype cannot hold exactly raise ValidationError.
void write(const ImageVolume& volume, const std::string& path, std::optional<DataType> datatype = std::nullopt);

}  // namespace oar::nifti
