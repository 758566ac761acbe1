#include <doctest.h>

#include <random>

#include "oar/split.hpp"
#include "oar/stats.hpp"
#include "support/oracles.hpp"

using namespace oar;
using namespace oar::stats;
namespace ot = oar::testing;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, int levels) {
    // Few distinct levels so ties are common.
    std::uniform_int_distribution<int> d(0, levels);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng) * 0.25;
    return v;
}

CaseRecord make_case(const std::string& id, const std::string& patient, double age, Sex sex = Sex::unknown) {
    CaseRecord c;
    c.case_id = id;
    c.patient_id = patient;
    c.image_path = id + ".nii.gz";
    c.age_years = age;
    c.sex = sex;
    return c;
}

}  // namespace

TEST_CASE("midranks average ties") {
    const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
    CHECK(midranks(v) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("signed-rank canonical examples") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
    const auto r = wilcoxon_signed_rank(a, b);
    CHECK(r.p_value == 0.0625);
    CHECK(r.statistic == 0.0);
    CHECK(r.method == TestMethod::signed_rank_exact);
    CHECK(r.n_effective == 5);
    const auto same = wilcoxon_signed_rank(a, a);
    CHECK(same.p_value == 1.0);
    CHECK(same.n_effective == 0);
    CHECK_THROWS_AS(wilcoxon_signed_rank(a, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("rank-sum canonical examples") {
    const std::vector<double> x{1, 2, 3}, y{4, 5, 6};
    const auto r = wilcoxon_rank_sum(x, y);
    CHECK(r.p_value == 0.1);
    CHECK(r.statistic == 0.0);
    CHECK(r.method == TestMethod::rank_sum_exact);
    CHECK(wilcoxon_rank_sum(std::vector<double>{2}, std::vector<double>{2}).p_value == 1.0);
    CHECK_THROWS_AS(wilcoxon_rank_sum(x, std::vector<double>{}), ValidationError);
}

TEST_CASE("exact signed-rank equals enumeration oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 150; ++trial) {
        const std::size_t n = 1 + rng() % 14;
        const auto a = random_values(rng, n, 6), b = random_values(rng, n, 6);
        const auto r = wilcoxon_signed_rank(a, b);
        REQUIRE(std::abs(r.p_value - ot::oracle_signed_rank_p(a, b)) <= 1e-12);
        // Negating every difference leaves the two-sided p unchanged.
        CHECK(std::abs(wilcoxon_signed_rank(b, a).p_value - r.p_value) <= 1e-12);
        // Monotone transform of all values.
        std::vector<double> ea(n), eb(n);
        for (std::size_t i = 0; i < n; ++i) {
            ea[i] = a[i] * 3.0 + 1.0;
            eb[i] = b[i] * 3.0 + 1.0;
        }
        CHECK(std::abs(wilcoxon_signed_rank(ea, eb).p_value - r.p_value) <= 1e-12);
    }
}

TEST_CASE("exact rank-sum equals enumeration oracle") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 150; ++trial) {
        const std::size_t n = 1 + rng() % 8, m = 1 + rng() % 8;
        const auto x = random_values(rng, n, 5), y = random_values(rng, m, 5);
        const auto r = wilcoxon_rank_sum(x, y);
        REQUIRE(std::abs(r.p_value - ot::oracle_rank_sum_p(x, y)) <= 1e-12);
        CHECK(std::abs(wilcoxon_rank_sum(y, x).p_value - r.p_value) <= 1e-12);
        std::vector<double> ex(x), ey(y);
        for (auto& v : ex) v = std::exp(v);
        for (auto& v : ey) v = std::exp(v);
        CHECK(std::abs(wilcoxon_rank_sum(ex, ey).p_value - r.p_value) <= 1e-12);
    }
}

TEST_CASE("normal approximation beyond exact bounds") {
    std::vector<double> a(40), b(40);
    for (int i = 0; i < 40; ++i) {
        a[static_cast<std::size_t>(i)] = i + 0.5;
        b[static_cast<std::size_t>(i)] = i;
    }
    const auto r = wilcoxon_signed_rank(a, b);
    CHECK(r.method == TestMethod::signed_rank_normal);
    CHECK(r.p_value < 1e-6);
    const auto u = wilcoxon_rank_sum(std::span<const double>(a).first(15), std::span<const double>(b).subspan(20, 15));
    CHECK(u.method == TestMethod::rank_sum_normal);
    CHECK(u.p_value > 0.0);
    CHECK(u.p_value <= 1.0);
    // The exact and normal paths agree roughly near the boundary.
    std::mt19937_64 rng(4);
    const auto x = random_values(rng, 10, 50), y = random_values(rng, 10, 50);
    CHECK(std::abs(wilcoxon_rank_sum(x, y).p_value - ot::oracle_rank_sum_p(x, y)) <= 1e-12);
}

TEST_CASE("bonferroni and stars") {
    const std::vector<double> p{0.004};
    const auto adj = bonferroni(p, 6);
    CHECK(adj[0] == doctest::Approx(0.024));
    CHECK(stars(adj[0]) == "*");
    CHECK(bonferroni(std::vector<double>{0.5}, 4)[0] == 1.0);
    CHECK(bonferroni(std::vector<double>{0.3})[0] == 0.3);
    CHECK_THROWS_AS(bonferroni(std::vector<double>{0.0}), ValidationError);
    CHECK_THROWS_AS(bonferroni(std::vector<double>{1.5}), ValidationError);
    CHECK_THROWS_AS(bonferroni(std::vector<double>{0.1, 0.2}, 1), ValidationError);
    CHECK(stars(0.00005) == "****");
    CHECK(stars(0.0001) == "****");
    CHECK(stars(0.001) == "***");
    CHECK(stars(0.005) == "**");
    CHECK(stars(0.03) == "*");
    CHECK(stars(0.2) == "ns");
    const char* order[] = {"****", "***", "**", "*", "ns"};
    int last = 0;
    for (double q = 1e-6; q <= 1.0; q *= 1.1) {
        const auto s = stars(q);
        const int pos = static_cast<int>(std::find(std::begin(order), std::end(order), s) - std::begin(order));
        CHECK(pos >= last);
        last = pos;
    }
}

TEST_CASE("age bins use floor") {
    CHECK(age_group(2.9) == "0-2");
    CHECK(age_group(3.0) == "3-4");
    CHECK(age_group(6.99) == "5-6");
    CHECK(age_group(7.0) == ">=7");
    CHECK(groups_of(SubgroupDimension::age_group).size() == 4);
    CHECK_THROWS_AS(dimension_from_string("height"), ValidationError);
}

TEST_CASE("mean and sample sd") {
    const auto ms = mean_sd(std::vector<double>{0.6, 0.8});
    CHECK(ms.mean == doctest::Approx(0.7));
    CHECK(ms.sd == doctest::Approx(0.1414213562));
    CHECK(mean_sd(std::vector<double>{3.0}).sd == 0.0);
}

TEST_CASE("subgroup analysis over age bins") {
    Manifest m;
    std::vector<MetricRow> rows;
    const double ages[] = {1.0, 3.5, 5.0, 9.0};
    int id = 0;
    for (int g = 0; g < 4; ++g) {
        for (int r = 0; r < 4; ++r, ++id) {
            const std::string cid = "c" + std::to_string(id);
            m.cases.push_back(make_case(cid, "p" + std::to_string(id), ages[g], Sex::male));
            MetricRow row;
            row.case_id = cid;
            row.organ = "liver";
            row.dsc = 0.5 + 0.1 * g + 0.01 * r;
            rows.push_back(row);
        }
    }
    const auto rep = subgroup_analysis(rows, m, {SubgroupDimension::age_group}, MetricKind::dsc);
    REQUIRE(rep.organs.size() == 1);
    const auto& liver = rep.organs[0];
    CHECK(liver.comparisons.size() == 6);
    CHECK(liver.family_size == 6);
    CHECK(rep.family_size == 6);
    for (const auto& c : liver.comparisons) {
        CHECK(c.p_raw == doctest::Approx(2.0 / 70.0));
        CHECK(c.p_adjusted == doctest::Approx(std::min(1.0, 6.0 * 2.0 / 70.0)));
        CHECK(c.stars == stars(c.p_adjusted));
    }
    CHECK(liver.groups[0].n == 4);
    CHECK(*liver.groups[0].mean == doctest::Approx(0.515));

    const auto by_sex = subgroup_analysis(rows, m, {SubgroupDimension::sex}, MetricKind::dsc);
    CHECK(by_sex.organs[0].comparisons.empty());
    CHECK_FALSE(by_sex.organs[0].notes.empty());

    const auto iv = subgroup_analysis(rows, m, {SubgroupDimension::iv_contrast}, MetricKind::dsc);
    CHECK(iv.organs[0].comparisons.empty());

    rows.push_back(rows[0]);
    rows.back().case_id = "ghost";
    CHECK_THROWS_AS(subgroup_analysis(rows, m, {}, MetricKind::dsc), ValidationError);
}

TEST_CASE("compare tables paired and unpaired") {
    std::vector<MetricRow> a, b;
    for (int i = 0; i < 5; ++i) {
        MetricRow r;
        r.case_id = "c" + std::to_string(i);
        r.organ = "spleen";
        r.dsc = 0.8 + 0.01 * i;
        a.push_back(r);
        r.dsc = *r.dsc + 0.05;
        b.push_back(r);
    }
    const auto self = compare_tables(a, a, MetricKind::dsc, true);
    CHECK(self.organs[0].comparisons[0].p_raw == 1.0);
    const auto shifted = compare_tables(a, b, MetricKind::dsc, true);
    const auto& c = shifted.organs[0].comparisons[0];
    CHECK(c.p_raw == 0.0625);
    CHECK(c.method == TestMethod::signed_rank_exact);
    CHECK(*c.mean_difference == doctest::Approx(-0.05));
    for (auto& r : b) r.case_id += "x";
    const auto unpaired = compare_tables(a, b, MetricKind::dsc, false);
    CHECK(unpaired.organs[0].comparisons[0].method == TestMethod::rank_sum_exact);
    const auto none = compare_tables(a, b, MetricKind::dsc, true);
    CHECK(none.organs[0].comparisons.empty());
    CHECK_FALSE(none.organs[0].notes.empty());
}

// ---- splits ----

TEST_CASE("ratio parsing and apportionment") {
    CHECK(split::parse_ratio("132:21:36") == std::vector<std::int64_t>{132, 21, 36});
    CHECK_THROWS_AS(split::parse_ratio("1:0"), ValidationError);
    CHECK_THROWS_AS(split::parse_ratio("a:b"), ValidationError);
    CHECK(split::largest_remainder(189, {132, 21, 36}) == std::vector<std::int64_t>{132, 21, 36});
    CHECK(split::largest_remainder(378, {64, 16, 20}) == std::vector<std::int64_t>{242, 60, 76});
    CHECK(split::largest_remainder(10, {1, 1, 1}) == std::vector<std::int64_t>{4, 3, 3});
}

TEST_CASE("rng is the standard mt19937_64 sequence") {
    // Power-of-two bounds never reject, so draws are raw engine output masked.
    split::SplitRng rng(5489);
    std::mt19937_64 ref(5489);
    for (int i = 0; i < 100; ++i) CHECK(rng.below(std::uint64_t{1} << 63) == (ref() & ((std::uint64_t{1} << 63) - 1)));
    split::SplitRng r2(1);
    for (int i = 0; i < 1000; ++i) CHECK(r2.below(7) < 7);
}

TEST_CASE("189 single-patient cases split exactly 132/21/36") {
    Manifest m;
    for (int i = 0; i < 189; ++i) m.cases.push_back(make_case("c" + std::to_string(i), "p" + std::to_string(i), 5));
    const auto plan = split::make_split(m, {132, 21, 36}, 42);
    const auto sizes = plan.bucket_sizes();
    CHECK(sizes.at("train") == 132);
    CHECK(sizes.at("val") == 21);
    CHECK(sizes.at("test") == 36);
    CHECK(plan.assignments.size() == 189);
    CHECK(plan.to_json() == split::make_split(m, {132, 21, 36}, 42).to_json());
    CHECK(plan.to_json() != split::make_split(m, {132, 21, 36}, 43).to_json());
}

TEST_CASE("multi-scan patients never straddle buckets") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        Manifest m;
        int id = 0;
        for (int p = 0; p < 80; ++p) {
            const int scans = (rng() % 10 == 0) ? 2 + static_cast<int>(rng() % 2) : 1;
            for (int s = 0; s < scans; ++s, ++id) {
                m.cases.push_back(make_case("c" + std::to_string(id), "p" + std::to_string(p),
                                            static_cast<double>(rng() % 12), rng() % 2 ? Sex::male : Sex::female));
            }
        }
        for (const auto& strat : {std::vector<SubgroupDimension>{}, std::vector<SubgroupDimension>{SubgroupDimension::sex}}) {
            const auto plan = split::make_split(m, {70, 10, 20}, trial, strat);
            std::map<std::string, std::string> bucket_of_patient;
            std::map<std::string, std::size_t> seen;
            for (const auto& [cid, bucket] : plan.assignments) {
                const auto* c = m.find(cid);
                REQUIRE(c != nullptr);
                auto [it, fresh] = bucket_of_patient.emplace(c->patient_id, bucket);
                CHECK(it->second == bucket);
                ++seen[cid];
            }
            CHECK(seen.size() == m.cases.size());
            const auto target = split::largest_remainder(static_cast<std::int64_t>(m.cases.size()), {70, 10, 20});
            const auto sizes = plan.bucket_sizes();
            CHECK(static_cast<std::int64_t>(sizes.at("train")) == target[0]);
            CHECK(static_cast<std::int64_t>(sizes.at("val")) == target[1]);
            CHECK(static_cast<std::int64_t>(sizes.at("test")) == target[2]);
        }
    }
}

TEST_CASE("infeasible split is reported") {
    Manifest m;
    for (int i = 0; i < 4; ++i) m.cases.push_back(make_case("c" + std::to_string(i), "p", 5));
    CHECK_THROWS_AS(split::make_split(m, {1, 1}, 0), ComputationError);
}

TEST_CASE("cross-validation folds") {
    Manifest m;
    for (int i = 0; i < 378; ++i) m.cases.push_back(make_case("c" + std::to_string(i), "p" + std::to_string(i), 5));
    const auto folds = split::make_cv_folds(m, 5, {64, 16, 20}, 7);
    REQUIRE(folds.size() == 5);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        CHECK(folds[f].seed == 7 + f);
        const auto sizes = folds[f].bucket_sizes();
        CHECK(sizes.at("train") == 242);
        CHECK(sizes.at("val") == 60);
        CHECK(sizes.at("test") == 76);
    }
    CHECK(folds[0].to_json() != folds[1].to_json());
    const auto again = split::make_cv_folds(m, 2, {64, 16, 20}, 7);
    CHECK(again[0].to_json() == folds[0].to_json());
    CHECK_THROWS_AS(split::make_cv_folds(m, 1, {64, 16, 20}, 7), ValidationError);
}
