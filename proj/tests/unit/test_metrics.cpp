#include <doctest.h>

#include <random>

#include "oar/edt.hpp"
#include "oar/metrics.hpp"
#include "oar/schema.hpp"
#include "support/oracles.hpp"

using namespace oar;
namespace ot = oar::testing;

namespace {

Grid iso(Index3 dims, std::array<double, 3> spacing = {1, 1, 1}) {
    Grid g;
    g.dims = dims;
    g.spacing = spacing;
    return g;
}

Mask cube(const Grid& g, Index3 lo, std::int64_t side) {
    Mask m(g);
    for (auto k = lo[2]; k < lo[2] + side; ++k)
        for (auto j = lo[1]; j < lo[1] + side; ++j)
            for (auto i = lo[0]; i < lo[0] + side; ++i) m.at(i, j, k) = 1;
    return m;
}

Mask with_spacing(const Mask& m, std::array<double, 3> spacing) {
    Grid g = m.grid();
    g.spacing = spacing;
    return Mask(g, std::vector<std::uint8_t>(m.voxels().begin(), m.voxels().end()));
}

// Copies slices [lo, hi] of the axial axis into a fresh volume.
Mask slice_copy(const Mask& m, std::int64_t lo, std::int64_t hi) {
    Grid g = m.grid();
    g.dims[2] = hi - lo + 1;
    Mask out(g);
    for (std::int64_t k = lo; k <= hi; ++k)
        for (std::int64_t j = 0; j < g.dims[1]; ++j)
            for (std::int64_t i = 0; i < g.dims[0]; ++i) out.at(i, j, k - lo) = m.at(i, j, k);
    return out;
}

}  // namespace

TEST_CASE("dsc basics") {
    const Grid g = iso({6, 6, 6});
    const Mask a = cube(g, {0, 0, 0}, 3);
    CHECK(dsc(a, a) == 1.0);
    CHECK(dsc(a, cube(g, {3, 3, 3}, 3)) == 0.0);
    CHECK(dsc(a, cube(g, {1, 0, 0}, 3)) == 2.0 / 3.0);
    CHECK(dsc(Mask(g), Mask(g)) == 1.0);
    CHECK_THROWS_AS(dsc(a, Mask(iso({6, 6, 7}))), GeometryError);
}

TEST_CASE("surface extraction") {
    const Grid g = iso({7, 7, 7});
    Mask single(g);
    single.at(3, 3, 3) = 1;
    CHECK(extract_surface(single) == std::vector<std::int64_t>{g.linear(3, 3, 3)});
    CHECK(extract_surface(cube(g, {1, 1, 1}, 3)).size() == 26);
    CHECK(extract_surface(cube(g, {1, 1, 1}, 5)).size() == 98);
    CHECK(extract_surface(Mask(g)).empty());
    // Touching the border counts as surface.
    CHECK(extract_surface(Mask(iso({3, 3, 3}), 1)).size() == 26);
}

TEST_CASE("edt examples") {
    const std::vector<std::int64_t> origin{0};
    const auto d = edt(origin, iso({5, 5, 3}));
    CHECK(d.at(3, 4, 0) == 5.0);
    const auto aniso = edt(origin, iso({3, 3, 3}, {1, 1, 2}));
    CHECK(aniso.at(0, 0, 2) == 4.0);
    try {
        (void)edt(std::vector<std::int64_t>{}, iso({2, 2, 2}));
        FAIL("expected undefined-distance");
    } catch (const ComputationError& e) {
        CHECK(e.category() == "undefined-distance");
    }
    const auto inf = squared_edt(Mask(iso({2, 2, 2})));
    CHECK(std::isinf(inf[0]));
}

TEST_CASE("edt matches brute force on random surfaces") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const Grid g = ot::random_grid(rng, 1, 16);
        std::vector<std::int64_t> target;
        std::vector<Index3> pts;
        const auto n = static_cast<std::int64_t>(g.voxel_count());
        std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
        const int count = 1 + static_cast<int>(rng() % 6);
        for (int t = 0; t < count; ++t) target.push_back(pick(rng));
        for (auto t : target) pts.push_back(g.unravel(t));
        const int threads = 1 + static_cast<int>(trial % 4);
        const auto field = edt(target, g, threads);
        for (std::int64_t v = 0; v < n; ++v) {
            REQUIRE(std::abs(field[static_cast<std::size_t>(v)] - ot::nearest(g.unravel(v), pts, g.spacing)) <= 1e-9);
        }
    }
}

TEST_CASE("hd95 and msd definitions") {
    CHECK(hd95(std::vector<double>(10, 2.0)) == 2.0);
    std::vector<double> d(9, 1.0);
    d.push_back(3.0);
    CHECK(hd95(d) == doctest::Approx(2.1).epsilon(1e-14));
    CHECK(msd(d) == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(hd95(std::vector<double>{0.0}) == 0.0);
    CHECK(msd(std::vector<double>{0.0}) == 0.0);
    CHECK_THROWS_AS(hd95(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(msd(std::vector<double>{}), ValidationError);
}

TEST_CASE("parallel lines are 2 mm apart everywhere") {
    const Grid g = iso({12, 5, 3});
    Mask a(g), b(g);
    for (int i = 1; i <= 10; ++i) {
        a.at(i, 1, 1) = 1;
        b.at(i, 3, 1) = 1;
    }
    const auto pooled = surface_distances(a, b).pooled();
    CHECK(pooled.size() == 20);
    CHECK(std::all_of(pooled.begin(), pooled.end(), [](double x) { return x == 2.0; }));
    CHECK(hd95(pooled) == 2.0);
    CHECK(msd(pooled) == 2.0);
}

TEST_CASE("surface distance errors and identity") {
    const Grid g = iso({5, 5, 5});
    const Mask a = cube(g, {1, 1, 1}, 3);
    const auto same = surface_distances(a, a).pooled();
    CHECK(std::all_of(same.begin(), same.end(), [](double x) { return x == 0.0; }));
    try {
        (void)surface_distances(a, Mask(g));
        FAIL("expected empty-structure");
    } catch (const ValidationError& e) {
        CHECK(e.category() == "empty-structure");
    }
}

TEST_CASE("metrics match the all-pairs oracle on random pairs") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 120; ++trial) {
        const Grid g = ot::random_grid(rng, 2, 12);
        const Mask gt = ot::random_mask(g, rng);
        const Mask pred = ot::random_mask(g, rng);
        if (count_foreground(gt) == 0 || count_foreground(pred) == 0) continue;
        const auto expect = ot::oracle_metrics(gt, pred);
        const auto sd = surface_distances(gt, pred, 1 + trial % 3);
        const auto pooled = sd.pooled();
        REQUIRE(pooled.size() == expect.pooled.size());
        for (std::size_t i = 0; i < pooled.size(); ++i) REQUIRE(std::abs(pooled[i] - expect.pooled[i]) <= 1e-9);
        CHECK(std::abs(dsc(gt, pred) - expect.dsc) <= 1e-12);
        CHECK(std::abs(hd95(pooled) - expect.hd95) <= 1e-9);
        CHECK(std::abs(msd(pooled) - expect.msd) <= 1e-9);
        // Symmetry under the pooled convention.
        const auto swapped = surface_distances(pred, gt).pooled();
        CHECK(std::abs(hd95(swapped) - hd95(pooled)) <= 1e-12);
        CHECK(std::abs(msd(swapped) - msd(pooled)) <= 1e-12);
        CHECK(hd95(pooled) <= *std::max_element(pooled.begin(), pooled.end()));
    }
}

TEST_CASE("scaling spacing scales distances and leaves dsc alone") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = ot::random_grid(rng, 3, 10);
        const Mask gt = ot::random_mask(g, rng), pred = ot::random_mask(g, rng);
        if (count_foreground(gt) == 0 || count_foreground(pred) == 0) continue;
        const auto base = surface_distances(gt, pred).pooled();
        for (double s : {0.5, 2.0, 3.7}) {
            const std::array<double, 3> sp{g.spacing[0] * s, g.spacing[1] * s, g.spacing[2] * s};
            const Mask gs = with_spacing(gt, sp), ps = with_spacing(pred, sp);
            const auto scaled = surface_distances(gs, ps).pooled();
            CHECK(dsc(gs, ps) == dsc(gt, pred));
            CHECK(std::abs(hd95(scaled) - s * hd95(base)) <= 1e-12 * std::max(1.0, s * hd95(base)));
            CHECK(std::abs(msd(scaled) - s * msd(base)) <= 1e-12 * std::max(1.0, s * msd(base)));
        }
    }
}

// ---- per-case evaluation ----

TEST_CASE("evaluate_case statuses") {
    const auto& schema = OrganSchema::default_schema();
    const Grid g = iso({8, 8, 8});
    LabelVolume gt(g), pred(g);
    for (std::int64_t i = 1; i < 4; ++i) {
        gt.at(i, 1, 1) = 1;    // spleen, identical
        pred.at(i, 1, 1) = 1;
        gt.at(i, 5, 5) = 9;    // liver, missed
    }
    pred.at(6, 6, 6) = 7;      // pancreas predicted, absent in GT
    const auto rows = evaluate_case("c", gt, pred, schema);
    REQUIRE(rows.size() == 17);
    CHECK(rows[0].organ == "spleen");
    CHECK(rows[0].status == MetricStatus::evaluated);
    CHECK(*rows[0].dsc == 1.0);
    CHECK(*rows[0].hd95_mm == 0.0);
    CHECK(*rows[0].msd_mm == 0.0);
    const auto& liver = rows[8];
    CHECK(liver.status == MetricStatus::empty_prediction);
    CHECK(*liver.dsc == 0.0);
    CHECK_FALSE(liver.hd95_mm.has_value());
    CHECK(rows[6].status == MetricStatus::excluded_no_ground_truth);
    CHECK_FALSE(rows[6].dsc.has_value());
    CHECK(rows[6].pred_voxels == 1);

    EvaluateOptions only;
    only.organs = {"liver", "spleen"};
    CHECK(evaluate_case("c", gt, pred, schema, only).size() == 2);
    CHECK_THROWS_AS(evaluate_case("c", gt, LabelVolume(iso({8, 8, 9})), schema), GeometryError);
}

TEST_CASE("masked organ is evaluated on the ground-truth slab only") {
    const auto& schema = OrganSchema::default_schema();
    const Grid g = iso({6, 6, 50});
    LabelVolume gt(g), pred(g);
    for (std::int64_t k = 10; k <= 40; ++k) gt.at(2, 2, k) = 8;
    for (std::int64_t k = 5; k <= 45; ++k) pred.at(2, 2, k) = 8;
    EvaluateOptions opts;
    opts.organs = {"stomach_bowel"};
    const auto row = evaluate_case("c", gt, pred, schema, opts).at(0);
    CHECK(row.status == MetricStatus::masked);
    CHECK(row.status_string() == "masked(10-40)");
    CHECK(*row.dsc == 1.0);
    CHECK(*row.hd95_mm == 0.0);
    opts.masked_organs.clear();
    const auto full = evaluate_case("c", gt, pred, schema, opts).at(0);
    CHECK(full.status == MetricStatus::evaluated);
    CHECK(*full.dsc < 1.0);
}

TEST_CASE("masked metrics equal metrics on pre-cropped volumes") {
    const auto& schema = OrganSchema::default_schema();
    std::mt19937_64 rng(77);
    EvaluateOptions opts;
    opts.organs = {"stomach_bowel"};
    int compared = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const Grid g = ot::random_grid(rng, 4, 12);
        const Mask gm = ot::random_mask(g, rng, 0.0), pm = ot::random_mask(g, rng, 0.01);
        LabelVolume gt(g), pred(g);
        for (std::size_t i = 0; i < gm.size(); ++i) {
            gt[i] = gm[i] ? 8 : 0;
            pred[i] = pm[i] ? 8 : 0;
        }
        const auto row = evaluate_case("c", gt, pred, schema, opts).at(0);
        const auto slab = axial_extent(gm);
        REQUIRE(slab.has_value());
        const Mask gc = slice_copy(gm, slab->first, slab->second);
        const Mask pc = slice_copy(pm, slab->first, slab->second);
        REQUIRE(row.slab == slab);
        if (count_foreground(pc) == 0) {
            CHECK(row.status == MetricStatus::empty_prediction);
            continue;
        }
        const auto expect = ot::oracle_metrics(gc, pc);
        CHECK(row.status == MetricStatus::masked);
        CHECK(*row.dsc == expect.dsc);
        CHECK(*row.hd95_mm == doctest::Approx(expect.hd95).epsilon(1e-12));
        const auto direct = evaluate_masks("c", "stomach_bowel", gc, pc);
        CHECK(*row.dsc == *direct.dsc);
        CHECK(*row.hd95_mm == *direct.hd95_mm);
        CHECK(*row.msd_mm == *direct.msd_mm);
        ++compared;
    }
    CHECK(compared >= 50);
}

TEST_CASE("metrics ignore the label code value") {
    Grid g = iso({6, 6, 6});
    const Mask a = cube(g, {0, 0, 0}, 3), b = cube(g, {1, 1, 0}, 3);
    LabelVolume gt(g), pred(g);
    for (std::size_t i = 0; i < a.size(); ++i) {
        gt[i] = a[i] ? 1 : 0;
        pred[i] = b[i] ? 1 : 0;
    }
    EvaluateOptions opts;
    opts.organs = {"spleen"};
    const auto r1 = evaluate_case("c", gt, pred, OrganSchema::default_schema(), opts).at(0);
    const auto r2 = evaluate_masks("c", "x", a, b);
    CHECK(*r1.dsc == *r2.dsc);
    CHECK(*r1.hd95_mm == *r2.hd95_mm);
    CHECK(*r1.msd_mm == *r2.msd_mm);
}

// ---- absent-organ false positives ----

TEST_CASE("fpr reporting") {
    std::vector<FprCase> cases;
    for (int i = 0; i < 14; ++i) {
        cases.push_back({"c" + std::to_string(i), i % 2 ? NephrectomySide::left : NephrectomySide::right,
                         i < 3 ? 12.5 : 0.0});
    }
    const auto r = fpr_absent_organ(cases);
    CHECK(r.fraction() == "3/14");
    CHECK(r.positive_cases == std::vector<std::string>{"c0", "c1", "c2"});
    for (auto& c : cases) c.predicted_volume_mm3 = 0.0;
    CHECK(fpr_absent_organ(cases).fraction() == "0/14");
    CHECK(fpr_absent_organ({{"a", NephrectomySide::left, 50}, {"b", NephrectomySide::right, 150}}, 100).fraction() ==
          "1/2");
    CHECK_THROWS_AS(fpr_absent_organ({{"a", NephrectomySide::none, 0}}), ValidationError);
}

TEST_CASE("removed kidney volume uses the removed side") {
    const auto& schema = OrganSchema::default_schema();
    LabelVolume pred(iso({4, 4, 4}, {1, 2, 3}));
    pred[0] = 4;  // kidney_left
    pred[1] = 4;
    pred[2] = 5;  // kidney_right
    CHECK(removed_kidney_volume_mm3(pred, NephrectomySide::left, schema) == 12.0);
    CHECK(removed_kidney_volume_mm3(pred, NephrectomySide::right, schema) == 6.0);
}

TEST_CASE("metric table CSV round-trip") {
    MetricRow a{"c1", "spleen", 0.5, 2.25, 1.0 / 3.0, MetricStatus::evaluated, std::nullopt, 10, 12};
    MetricRow b{"c1", "liver", 0.0, std::nullopt, std::nullopt, MetricStatus::empty_prediction, std::nullopt, 5, 0};
    MetricRow c{"c1", "stomach_bowel", 0.9, 1.0, 0.5, MetricStatus::masked, std::make_pair(std::int64_t{3}, std::int64_t{9}), 7, 7};
    MetricRow d{"c1", "heart", std::nullopt, std::nullopt, std::nullopt, MetricStatus::excluded_no_ground_truth, std::nullopt, 0, 2};
    const std::vector<MetricRow> rows{a, b, c, d};
    const auto csv = to_csv(rows);
    CHECK(csv.rfind("case_id,organ,dsc,hd95_mm,msd_mm,status,gt_voxels,pred_voxels\n", 0) == 0);
    const auto back = metrics_from_csv(csv);
    REQUIRE(back.size() == 4);
    CHECK(to_csv(back) == csv);
    CHECK(back[2].slab == c.slab);
    CHECK(back[0].msd_mm == a.msd_mm);
    CHECK_THROWS_AS(metrics_from_csv("case_id,organ\nx,y\n"), ValidationError);
    CHECK(metric_kind_from_string("hd95") == MetricKind::hd95);
    CHECK(to_string(MetricKind::msd) == "msd_mm");
}
