#include "oar/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <vector>

namespace oar::nifti {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

// Field offsets in the 348-byte header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<unsigned char> slurp(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw IoError("cannot open " + path);
    std::vector<unsigned char> out;
    std::vector<unsigned char> chunk(1 << 20);
    for (;;) {
        const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int errnum = 0;
            const std::string msg = gzerror(f, &errnum);
            gzclose(f);
            throw FormatError("corrupt or truncated file " + path + ": " + msg);
        }
        if (n == 0) break;
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    gzclose(f);
    return out;
}

class HeaderReader {
public:
    HeaderReader(const unsigned char* bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        T v;
        std::memcpy(&v, bytes_ + offset, sizeof(T));
        if (swap_ && sizeof(T) > 1) {
            auto* p = reinterpret_cast<unsigned char*>(&v);
            std::reverse(p, p + sizeof(T));
        }
        return v;
    }

private:
    const unsigned char* bytes_;
    bool swap_;
};

template <typename T>
void put(std::vector<unsigned char>& buf, std::size_t offset, T value) {
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

bool known_datatype(std::int16_t code) {
    switch (code) {
        case 2: case 4: case 8: case 16: case 64: case 512: return true;
        default: return false;
    }
}

// Axis codes and origin from a 3x4 affine (rows = world x,y,z).
void apply_affine(const std::array<std::array<double, 4>, 3>& aff, Grid& grid) {
    static constexpr char pos[3] = {'R', 'A', 'S'};
    static constexpr char neg[3] = {'L', 'P', 'I'};
    std::string codes(3, '?');
    std::array<bool, 3> used{};
    for (std::size_t col = 0; col < 3; ++col) {
        std::size_t best = 3;
        double best_mag = -1.0;
        for (std::size_t row = 0; row < 3; ++row) {
            if (used[row]) continue;
            const double mag = std::abs(aff[row][col]);
            if (mag > best_mag) {
                best_mag = mag;
                best = row;
            }
        }
        if (best == 3 || best_mag <= 0.0) throw FormatError("degenerate orientation matrix");
        used[best] = true;
        codes[col] = aff[best][col] >= 0.0 ? pos[best] : neg[best];
    }
    grid.axis_codes = codes;
    grid.origin = {aff[0][3], aff[1][3], aff[2][3]};
}

struct Parsed {
    HeaderInfo info;
    std::size_t data_offset = 0;
};

Parsed parse_header(const std::vector<unsigned char>& bytes, const std::string& path) {
    if (bytes.size() < kHeaderSize) throw FormatError("truncated NIfTI header in " + path);

    std::int32_t sizeof_hdr = 0;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    bool swap = false;
    if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
        auto* p = reinterpret_cast<unsigned char*>(&sizeof_hdr);
        std::reverse(p, p + 4);
        if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
            throw FormatError("not a NIfTI-1 file (sizeof_hdr != 348): " + path);
        }
        swap = true;
    }

    const char* magic = reinterpret_cast<const char*>(bytes.data() + kOffMagic);
    Parsed parsed;
    if (std::memcmp(magic, "n+1\0", 4) == 0) {
        parsed.info.single_file = true;
    } else if (std::memcmp(magic, "ni1\0", 4) == 0) {
        parsed.info.single_file = false;
    } else {
        throw FormatError("bad NIfTI magic in " + path);
    }
    parsed.info.byte_swapped = swap;

    const HeaderReader h(bytes.data(), swap);
    const auto rank = h.get<std::int16_t>(kOffDim);
    if (rank < 1 || rank > 7) throw FormatError("invalid dim[0] in " + path, "unsupported-rank");
    Grid grid;
    for (int a = 0; a < 3; ++a) {
        grid.dims[static_cast<std::size_t>(a)] =
            a < rank ? h.get<std::int16_t>(kOffDim + 2 * static_cast<std::size_t>(a + 1)) : 1;
    }
    for (int a = 3; a < rank; ++a) {
        if (h.get<std::int16_t>(kOffDim + 2 * static_cast<std::size_t>(a + 1)) != 1) {
            throw FormatError("rank " + std::to_string(rank) + " volume is not reducible to 3D: " + path,
                              "unsupported-rank");
        }
    }
    for (auto d : grid.dims) {
        if (d < 1) throw FormatError("non-positive dimension in " + path);
    }

    const auto dtype = h.get<std::int16_t>(kOffDatatype);
    if (!known_datatype(dtype)) {
        throw FormatError("unsupported NIfTI datatype " + std::to_string(dtype) + " in " + path);
    }
    parsed.info.datatype = static_cast<DataType>(dtype);

    std::array<double, 4> pixdim{};
    for (std::size_t a = 0; a < 4; ++a) pixdim[a] = h.get<float>(kOffPixdim + 4 * a);
    for (std::size_t a = 0; a < 3; ++a) {
        const double sp = std::abs(pixdim[a + 1]);
        grid.spacing[a] = sp > 0.0 && std::isfinite(sp) ? sp : 1.0;
    }

    parsed.info.scl_slope = h.get<float>(kOffSclSlope);
    parsed.info.scl_inter = h.get<float>(kOffSclInter);
    parsed.info.qform_code = h.get<std::int16_t>(kOffQformCode);
    parsed.info.sform_code = h.get<std::int16_t>(kOffSformCode);

    std::array<std::array<double, 4>, 3> aff{};
    if (parsed.info.sform_code > 0) {
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 4; ++c) aff[r][c] = h.get<float>(kOffSrow + 16 * r + 4 * c);
        apply_affine(aff, grid);
    } else if (parsed.info.qform_code > 0) {
        const double b = h.get<float>(kOffQuatern);
        const double c = h.get<float>(kOffQuatern + 4);
        const double d = h.get<float>(kOffQuatern + 8);
        const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
        const double qfac = pixdim[0] < 0.0 ? -1.0 : 1.0;
        const std::array<std::array<double, 3>, 3> rot{{
            {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
            {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
            {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b},
        }};
        for (std::size_t r = 0; r < 3; ++r) {
            aff[r][0] = rot[r][0] * grid.spacing[0];
            aff[r][1] = rot[r][1] * grid.spacing[1];
            aff[r][2] = rot[r][2] * grid.spacing[2] * qfac;
            aff[r][3] = h.get<float>(kOffQoffset + 4 * r);
        }
        apply_affine(aff, grid);
    }

    const double vox_offset = h.get<float>(kOffVoxOffset);
    parsed.data_offset = parsed.info.single_file ? static_cast<std::size_t>(std::max(vox_offset, 352.0))
                                                 : static_cast<std::size_t>(std::max(vox_offset, 0.0));
    parsed.info.grid = grid;
    return parsed;
}

std::string image_path_for(const std::string& hdr_path) {
    std::string base = hdr_path;
    if (ends_with(base, ".gz")) base.resize(base.size() - 3);
    if (ends_with(base, ".hdr")) base.resize(base.size() - 4);
    for (const char* ext : {".img", ".img.gz"}) {
        if (std::filesystem::exists(base + ext)) return base + ext;
    }
    throw IoError("missing .img companion for " + hdr_path);
}

struct RawData {
    Parsed parsed;
    std::vector<unsigned char> file;  // holds the voxel payload
    std::size_t offset = 0;
};

RawData load(const std::string& path) {
    RawData raw;
    raw.file = slurp(path);
    raw.parsed = parse_header(raw.file, path);
    raw.offset = raw.parsed.data_offset;
    if (!raw.parsed.info.single_file) {
        raw.file = slurp(image_path_for(path));
    }
    const std::size_t need = raw.parsed.info.grid.voxel_count() *
                             static_cast<std::size_t>(bytes_per_voxel(raw.parsed.info.datatype));
    if (raw.file.size() < raw.offset || raw.file.size() - raw.offset < need) {
        throw FormatError("truncated voxel data in " + path);
    }
    return raw;
}

template <typename T>
T read_value(const unsigned char* p, bool swap) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if (swap && sizeof(T) > 1) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(T));
    }
    return v;
}

// Calls fn(index, value-as-double-or-integer) for every voxel.
template <typename Fn>
void for_each_value(const RawData& raw, Fn&& fn) {
    const std::size_t n = raw.parsed.info.grid.voxel_count();
    const unsigned char* base = raw.file.data() + raw.offset;
    const bool swap = raw.parsed.info.byte_swapped;
    auto run = [&](auto tag) {
        using T = decltype(tag);
        for (std::size_t i = 0; i < n; ++i) fn(i, read_value<T>(base + i * sizeof(T), swap));
    };
    switch (raw.parsed.info.datatype) {
        case DataType::uint8: run(std::uint8_t{}); break;
        case DataType::int16: run(std::int16_t{}); break;
        case DataType::uint16: run(std::uint16_t{}); break;
        case DataType::int32: run(std::int32_t{}); break;
        case DataType::float32: run(float{}); break;
        case DataType::float64: run(double{}); break;
    }
}

std::vector<unsigned char> make_header(const Grid& grid, DataType type) {
    std::vector<unsigned char> hdr(kDataOffset, 0);
    put<std::int32_t>(hdr, 0, static_cast<std::int32_t>(kHeaderSize));
    put<char>(hdr, 38, 'r');
    put<std::int16_t>(hdr, kOffDim, 3);
    for (std::size_t a = 0; a < 3; ++a) {
        if (grid.dims[a] > std::numeric_limits<std::int16_t>::max()) {
            throw ValidationError("dimension too large for NIfTI-1");
        }
        put<std::int16_t>(hdr, kOffDim + 2 * (a + 1), static_cast<std::int16_t>(grid.dims[a]));
    }
    for (std::size_t a = 4; a < 8; ++a) put<std::int16_t>(hdr, kOffDim + 2 * a, 1);
    put<std::int16_t>(hdr, kOffDatatype, static_cast<std::int16_t>(type));
    put<std::int16_t>(hdr, kOffBitpix, static_cast<std::int16_t>(8 * bytes_per_voxel(type)));
    put<float>(hdr, kOffPixdim, 1.0f);
    for (std::size_t a = 0; a < 3; ++a) put<float>(hdr, kOffPixdim + 4 * (a + 1), static_cast<float>(grid.spacing[a]));
    put<float>(hdr, kOffVoxOffset, static_cast<float>(kDataOffset));
    put<float>(hdr, kOffSclSlope, 1.0f);
    put<float>(hdr, kOffSclInter, 0.0f);
    put<char>(hdr, kOffXyztUnits, 2);  // mm
    put<std::int16_t>(hdr, kOffQformCode, 0);
    put<std::int16_t>(hdr, kOffSformCode, 1);
    const auto dirs = grid.directions();
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            put<float>(hdr, kOffSrow + 16 * r + 4 * c, static_cast<float>(dirs[c][r] * grid.spacing[c]));
        }
        put<float>(hdr, kOffSrow + 16 * r + 12, static_cast<float>(grid.origin[r]));
    }
    std::memcpy(hdr.data() + kOffMagic, "n+1\0", 4);
    return hdr;
}

void dump(const std::string& path, const std::vector<unsigned char>& header, const std::vector<unsigned char>& payload) {
    const bool gz = ends_with(path, ".gz");
    gzFile f = gzopen(path.c_str(), gz ? "wb6" : "wbT");
    if (f == nullptr) throw IoError("cannot write " + path);
    auto write_all = [&](const std::vector<unsigned char>& buf) {
        std::size_t done = 0;
        while (done < buf.size()) {
            const auto chunk = static_cast<unsigned>(std::min<std::size_t>(buf.size() - done, 1u << 30));
            if (gzwrite(f, buf.data() + done, chunk) != static_cast<int>(chunk)) {
                gzclose(f);
                throw IoError("write failed for " + path);
            }
            done += chunk;
        }
    };
    write_all(header);
    write_all(payload);
    if (gzclose(f) != Z_OK) throw IoError("close failed for " + path);
}

template <typename Src>
std::vector<unsigned char> encode(std::span<const Src> values, DataType type) {
    std::vector<unsigned char> out(values.size() * static_cast<std::size_t>(bytes_per_voxel(type)));
    auto run = [&](auto tag) {
        using T = decltype(tag);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if constexpr (std::is_floating_point_v<Src> && std::is_integral_v<T>) {
                const double x = static_cast<double>(values[i]);
                if (!(x >= static_cast<double>(std::numeric_limits<T>::min()) &&
                      x <= static_cast<double>(std::numeric_limits<T>::max()))) {
                    throw ValidationError("value " + std::to_string(x) + " out of range for " + to_string(type));
                }
            }
            const auto v = static_cast<T>(values[i]);
            if constexpr (std::is_floating_point_v<Src>) {
                if (static_cast<Src>(v) != values[i]) {
                    throw ValidationError("value " + std::to_string(values[i]) + " not representable as " +
                                          to_string(type));
                }
            } else {
                if (static_cast<Src>(v) != values[i] || (v < 0) != (values[i] < 0)) {
                    throw ValidationError("label " + std::to_string(values[i]) + " not representable as " +
                                          to_string(type));
                }
            }
            std::memcpy(out.data() + i * sizeof(T), &v, sizeof(T));
        }
    };
    switch (type) {
        case DataType::uint8: run(std::uint8_t{}); break;
        case DataType::int16: run(std::int16_t{}); break;
        case DataType::uint16: run(std::uint16_t{}); break;
        case DataType::int32: run(std::int32_t{}); break;
        case DataType::float32: run(float{}); break;
        case DataType::float64: run(double{}); break;
    }
    return out;
}

}  // namespace

std::string to_string(DataType type) {
    switch (type) {
        case DataType::uint8: return "uint8";
        case DataType::int16: return "int16";
        case DataType::uint16: return "uint16";
        case DataType::int32: return "int32";
        case DataType::float32: return "float32";
        case DataType::float64: return "float64";
    }
    return "unknown";
}

int bytes_per_voxel(DataType type) {
    switch (type) {
        case DataType::uint8: return 1;
        case DataType::int16:
        case DataType::uint16: return 2;
        case DataType::int32:
        case DataType::float32: return 4;
        case DataType::float64: return 8;
    }
    return 0;
}

HeaderInfo read_header(const std::string& path) {
    const auto bytes = slurp(path);
    return parse_header(bytes, path).info;
}

LabelVolume read_labels(const std::string& path, HeaderInfo* info) {
    const RawData raw = load(path);
    std::vector<LabelCode> voxels(raw.parsed.info.grid.voxel_count());
    for_each_value(raw, [&](std::size_t i, auto value) {
        using T = decltype(value);
        if constexpr (std::is_floating_point_v<T>) {
            const double r = std::round(static_cast<double>(value));
            if (!std::isfinite(static_cast<double>(value)) || std::abs(static_cast<double>(value) - r) > 1e-6) {
                throw FormatError("non-integer label value in " + path, "label-format");
            }
            if (r < 0.0 || r > 65535.0) throw FormatError("label value out of range in " + path, "label-format");
            voxels[i] = static_cast<LabelCode>(r);
        } else {
            if (value < 0 || static_cast<std::int64_t>(value) > 65535) {
                throw FormatError("label value out of range in " + path, "label-format");
            }
            voxels[i] = static_cast<LabelCode>(value);
        }
    });
    if (info != nullptr) *info = raw.parsed.info;
    return LabelVolume(raw.parsed.info.grid, std::move(voxels));
}

ImageVolume read_image(const std::string& path, HeaderInfo* info) {
    const RawData raw = load(path);
    const double slope = raw.parsed.info.scl_slope;
    const bool scaled = slope != 0.0 && std::isfinite(slope) && !(slope == 1.0 && raw.parsed.info.scl_inter == 0.0);
    const double inter = std::isfinite(raw.parsed.info.scl_inter) ? raw.parsed.info.scl_inter : 0.0;
    std::vector<double> voxels(raw.parsed.info.grid.voxel_count());
    for_each_value(raw, [&](std::size_t i, auto value) {
        const double v = static_cast<double>(value);
        voxels[i] = scaled ? v * slope + inter : v;
    });
    if (info != nullptr) *info = raw.parsed.info;
    return ImageVolume(raw.parsed.info.grid, std::move(voxels));
}

void write(const LabelVolume& volume, const std::string& path, std::optional<DataType> datatype) {
    volume.grid().validate();
    DataType type = DataType::uint8;
    if (datatype) {
        type = *datatype;
    } else {
        const auto v = volume.voxels();
        const LabelCode max_code = v.empty() ? 0 : *std::max_element(v.begin(), v.end());
        type = max_code <= 255 ? DataType::uint8 : DataType::uint16;
    }
    dump(path, make_header(volume.grid(), type), encode<LabelCode>(volume.voxels(), type));
}

void write(const ImageVolume& volume, const std::string& path, std::optional<DataType> datatype) {
    volume.grid().validate();
    DataType type = DataType::float64;
    if (datatype) {
        type = *datatype;
    } else {
        const auto v = volume.voxels();
        const bool fits_int16 = std::all_of(v.begin(), v.end(), [](double x) {
            return x >= -32768.0 && x <= 32767.0 && std::floor(x) == x;
        });
        const bool fits_float = std::all_of(v.begin(), v.end(), [](double x) {
            return static_cast<double>(static_cast<float>(x)) == x;
        });
        type = fits_int16 ? DataType::int16 : fits_float ? DataType::float32 : DataType::float64;
    }
    dump(path, make_header(volume.grid(), type), encode<double>(volume.voxels(), type));
}

}  // namespace oar::nifti
