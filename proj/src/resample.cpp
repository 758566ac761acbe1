#include "oar/resample.hpp"

#include <cmath>
#include <vector>

namespace oar {

LabelVolume resample_labels_nearest(const LabelVolume& src, const Grid& ref) {
    ref.validate();
    const Grid& sg = src.grid();
    if (sg.axis_codes != ref.axis_codes) {
        throw GeometryError("axis codes differ (" + sg.axis_codes + " vs " + ref.axis_codes + ")", "orientation");
    }
    if (sg.same_geometry(ref, 0.0)) return src;

    const auto dirs = ref.directions();
    // Per axis: source index for every reference index, or -1 outside the field of view.
    std::array<std::vector<std::int64_t>, 3> maps;
    for (std::size_t a = 0; a < 3; ++a) {
        double ref0 = 0.0;
        double src0 = 0.0;
        for (std::size_t w = 0; w < 3; ++w) {
            ref0 += ref.origin[w] * dirs[a][w];
            src0 += sg.origin[w] * dirs[a][w];
        }
        const std::int64_t n_src = sg.dims[a];
        maps[a].resize(static_cast<std::size_t>(ref.dims[a]));
        for (std::int64_t i = 0; i < ref.dims[a]; ++i) {
            const double pos = ref0 + static_cast<double>(i) * ref.spacing[a];
            const double c = (pos - src0) / sg.spacing[a];
            if (c < -0.5 || c > static_cast<double>(n_src) - 0.5) {
                maps[a][static_cast<std::size_t>(i)] = -1;
                continue;
            }
            auto j = static_cast<std::int64_t>(std::ceil(c - 0.5));
            if (j < 0) j = 0;
            if (j >= n_src) j = n_src - 1;
            maps[a][static_cast<std::size_t>(i)] = j;
        }
    }

    LabelVolume out(ref);
    auto dst = out.voxels();
    std::size_t idx = 0;
    for (std::int64_t k = 0; k < ref.dims[2]; ++k) {
        const auto sk = maps[2][static_cast<std::size_t>(k)];
        for (std::int64_t j = 0; j < ref.dims[1]; ++j) {
            const auto sj = maps[1][static_cast<std::size_t>(j)];
            for (std::int64_t i = 0; i < ref.dims[0]; ++i, ++idx) {
                const auto si = maps[0][static_cast<std::size_t>(i)];
                dst[idx] = (si < 0 || sj < 0 || sk < 0) ? LabelCode{0} : src.at(si, sj, sk);
            }
        }
    }
    return out;
}

}  // namespace oar
