#include "oar/components.hpp"

#include <array>
#include <map>

namespace oar {

namespace {

std::vector<Index3> neighbour_offsets(Connectivity connectivity) {
    const int limit = static_cast<int>(connectivity) == 6 ? 1 : static_cast<int>(connectivity) == 18 ? 2 : 3;
    std::vector<Index3> out;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nonzero = (dx != 0) + (dy != 0) + (dz != 0);
                if (nonzero == 0 || nonzero > limit) continue;
                out.push_back({dx, dy, dz});
            }
    return out;
}

}  // namespace

Connectivity connectivity_from_int(int n) {
    switch (n) {
        case 6: return Connectivity::faces;
        case 18: return Connectivity::edges;
        case 26: return Connectivity::corners;
        default: throw ValidationError("connectivity must be 6, 18 or 26, got " + std::to_string(n));
    }
}

ComponentLabels label_components(const Mask& mask, Connectivity connectivity) {
    const Grid& g = mask.grid();
    const auto offsets = neighbour_offsets(connectivity);
    const auto src = mask.voxels();
    ComponentLabels out;
    out.labels.assign(src.size(), 0);
    std::vector<std::int64_t> stack;

    for (std::size_t seed = 0; seed < src.size(); ++seed) {
        if (src[seed] == 0 || out.labels[seed] != 0) continue;
        const auto id = static_cast<std::uint32_t>(out.sizes.size() + 1);
        std::size_t size = 0;
        out.labels[seed] = id;
        stack.push_back(static_cast<std::int64_t>(seed));
        while (!stack.empty()) {
            const std::int64_t cur = stack.back();
            stack.pop_back();
            ++size;
            const Index3 p = g.unravel(cur);
            for (const auto& o : offsets) {
                const std::int64_t x = p[0] + o[0];
                const std::int64_t y = p[1] + o[1];
                const std::int64_t z = p[2] + o[2];
                if (x < 0 || y < 0 || z < 0 || x >= g.dims[0] || y >= g.dims[1] || z >= g.dims[2]) continue;
                const auto n = static_cast<std::size_t>(g.linear(x, y, z));
                if (src[n] != 0 && out.labels[n] == 0) {
                    out.labels[n] = id;
                    stack.push_back(static_cast<std::int64_t>(n));
                }
            }
        }
        out.sizes.push_back(size);
    }
    return out;
}

Mask keep_largest_component(const Mask& mask, Connectivity connectivity) {
    const auto cc = label_components(mask, connectivity);
    if (cc.sizes.size() <= 1) return mask;
    std::uint32_t best = 1;
    for (std::uint32_t id = 2; id <= cc.sizes.size(); ++id) {
        if (cc.sizes[id - 1] > cc.sizes[best - 1]) best = id;
    }
    Mask out(mask.grid());
    auto dst = out.voxels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = cc.labels[i] == best ? 1 : 0;
    return out;
}

LabelVolume keep_largest_component_per_label(const LabelVolume& labels, Connectivity connectivity) {
    std::map<LabelCode, bool> present;
    for (auto v : labels.voxels()) {
        if (v != 0) present[v] = true;
    }
    LabelVolume out(labels.grid());
    auto dst = out.voxels();
    for (const auto& [code, _] : present) {
        const Mask kept = keep_largest_component(extract_label(labels, code), connectivity);
        const auto m = kept.voxels();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (m[i] != 0) dst[i] = code;
        }
    }
    return out;
}

}  // namespace oar
