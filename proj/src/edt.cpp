#include "oar/edt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oar/parallel.hpp"

namespace oar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Scratch space for one 1D transform.
struct LineBuffers {
    std::vector<std::int64_t> v;
    std::vector<double> z;
    std::vector<double> f;
    std::vector<double> d;

    void resize(std::size_t n) {
        v.resize(n);
        z.resize(n + 1);
        f.resize(n);
        d.resize(n);
    }
};

// Lower envelope of parabolas y = (x - x_q)^2 + f[q] with x_q = q * step.
// Entries with f = inf contribute nothing; an all-inf line stays inf.
void transform_line(LineBuffers& b, std::size_t n, double step) {
    const double* f = b.f.data();
    double* d = b.d.data();
    std::int64_t* v = b.v.data();
    double* z = b.z.data();

    std::int64_t k = -1;
    for (std::size_t q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        const double xq = static_cast<double>(q) * step;
        const double hq = f[q] + xq * xq;
        for (;;) {
            if (k < 0) {
                k = 0;
                v[0] = static_cast<std::int64_t>(q);
                z[0] = -kInf;
                z[1] = kInf;
                break;
            }
            const double xp = static_cast<double>(v[k]) * step;
            const double hp = f[v[k]] + xp * xp;
            const double s = (hq - hp) / (2.0 * (xq - xp));
            if (s <= z[k]) {
                --k;
                continue;
            }
            ++k;
            v[k] = static_cast<std::int64_t>(q);
            z[k] = s;
            z[k + 1] = kInf;
            break;
        }
    }
    if (k < 0) {
        for (std::size_t q = 0; q < n; ++q) d[q] = kInf;
        return;
    }
    std::int64_t j = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const double xq = static_cast<double>(q) * step;
        while (z[j + 1] < xq) ++j;
        const double dx = xq - static_cast<double>(v[j]) * step;
        d[q] = dx * dx + f[v[j]];
    }
}

// Axis 0: lines are contiguous.
void pass_axis0(std::vector<double>& field, const Index3& dims, double step, int threads) {
    const auto n = static_cast<std::size_t>(dims[0]);
    const auto lines = static_cast<std::size_t>(dims[1] * dims[2]);
    parallel_for(lines, threads, [&](std::size_t begin, std::size_t end) {
        LineBuffers b;
        b.resize(n);
        for (std::size_t line = begin; line < end; ++line) {
            double* p = field.data() + line * n;
            std::copy(p, p + n, b.f.begin());
            transform_line(b, n, step);
            std::copy(b.d.begin(), b.d.begin() + static_cast<std::ptrdiff_t>(n), p);
        }
    });
}

// Axes 1 and 2: lines are strided; neighbouring lines along axis 0 are
// processed together so every gathered cache line is used fully.
void pass_strided(std::vector<double>& field, const Index3& dims, int axis, double step, int threads) {
    constexpr std::size_t kBlock = 16;
    const auto d0 = static_cast<std::size_t>(dims[0]);
    const auto d1 = static_cast<std::size_t>(dims[1]);
    const auto n = static_cast<std::size_t>(dims[axis]);
    const std::size_t stride = axis == 1 ? d0 : d0 * d1;
    const std::size_t outer = axis == 1 ? static_cast<std::size_t>(dims[2]) : d1;
    const std::size_t outer_stride = axis == 1 ? d0 * d1 : d0;
    const std::size_t blocks = (d0 + kBlock - 1) / kBlock;

    parallel_for(outer * blocks, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<LineBuffers> bufs(kBlock);
        for (auto& b : bufs) b.resize(n);
        for (std::size_t task = begin; task < end; ++task) {
            const std::size_t o = task / blocks;
            const std::size_t i0 = (task % blocks) * kBlock;
            const std::size_t width = std::min(kBlock, d0 - i0);
            const std::size_t base = o * outer_stride + i0;
            for (std::size_t t = 0; t < n; ++t) {
                const double* row = field.data() + base + t * stride;
                for (std::size_t w = 0; w < width; ++w) bufs[w].f[t] = row[w];
            }
            for (std::size_t w = 0; w < width; ++w) transform_line(bufs[w], n, step);
            for (std::size_t t = 0; t < n; ++t) {
                double* row = field.data() + base + t * stride;
                for (std::size_t w = 0; w < width; ++w) row[w] = bufs[w].d[t];
            }
        }
    });
}

}  // namespace

std::vector<double> squared_edt(const Mask& features, int threads) {
    const Grid& g = features.grid();
    const auto src = features.voxels();
    std::vector<double> field(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) field[i] = src[i] != 0 ? 0.0 : kInf;
    pass_axis0(field, g.dims, g.spacing[0], threads);
    if (g.dims[1] > 1) pass_strided(field, g.dims, 1, g.spacing[1], threads);
    if (g.dims[2] > 1) pass_strided(field, g.dims, 2, g.spacing[2], threads);
    return field;
}

ImageVolume edt(std::span<const std::int64_t> target, const Grid& grid, int threads) {
    if (target.empty()) throw ComputationError("distance to an empty surface is undefined", "undefined-distance");
    Mask features(grid);
    auto f = features.voxels();
    for (auto idx : target) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= f.size()) {
            throw ValidationError("target voxel index " + std::to_string(idx) + " outside the grid");
        }
        f[static_cast<std::size_t>(idx)] = 1;
    }
    auto field = squared_edt(features, threads);
    for (auto& v : field) v = std::sqrt(v);
    return ImageVolume(grid, std::move(field));
}

}  // namespace oar
