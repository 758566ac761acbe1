#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "oar/cli/app.hpp"
#include "oar/cli/commands.hpp"
#include "oar/metrics.hpp"
#include "support/dataset.hpp"

using namespace oar;
namespace ot = oar::testing;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "oar-evalkit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<ot::SyntheticCase> default_cases() {
    return {{"c1", "p1", 1.5, "male", "left", 100},
            {"c2", "p2", 4.0, "female", "right", 100},
            {"c3", "p3", 9.0, "male", "none", 79}};
}

}  // namespace

TEST_CASE("harmonize writes included cases and logs exclusions") {
    ot::TempDir dir;
    const auto manifest = ot::write_dataset(dir, default_cases());
    const auto out = dir.file("harm");
    const auto r = run({"harmonize", "--manifest", manifest, "--out", out, "--threads", "2"});
    CHECK(r.code == 0);
    CHECK(fs::exists(out + "/c1.nii.gz"));
    CHECK(fs::exists(out + "/c2.provenance.json"));
    CHECK_FALSE(fs::exists(out + "/c3.nii.gz"));
    const auto log = ot::read_text(out + "/exclusions.jsonl");
    CHECK(log.find(R"("case_id":"c3")") != std::string::npos);
    CHECK(log.find("slice_count") != std::string::npos);
    const auto prov = nlohmann::json::parse(ot::read_text(out + "/c1.provenance.json"));
    CHECK(prov["provenance"]["heart"] == "auxiliary");
    CHECK(prov["provenance"]["spleen"] == "clinical");
    const auto labels = nifti::read_labels(out + "/c1.nii.gz");
    CHECK(std::count(labels.voxels().begin(), labels.voxels().end(), LabelCode{6}) > 0);
    const auto hm = load_manifest(out + "/manifest.json");
    CHECK(hm.cases.size() == 2);
}

TEST_CASE("harmonize reports failing cases with a nonzero exit") {
    ot::TempDir dir;
    const auto manifest = ot::write_dataset(dir, default_cases());
    fs::remove(dir.file("c2_clin.nii.gz"));
    const auto r = run({"harmonize", "--manifest", manifest, "--out", dir.file("h"), "--threads", "1", "--json-errors"});
    CHECK(r.code == 2);
    CHECK(r.err.find("c2") != std::string::npos);
    CHECK(fs::exists(dir.file("h/c1.nii.gz")));
    const auto strict = run({"harmonize", "--manifest", manifest, "--out", dir.file("h2"), "--strict", "--json-errors"});
    CHECK(strict.code == 2);
    const auto err = nlohmann::json::parse(strict.err);
    CHECK(err["error"]["kind"] == "io");
    CHECK(err["error"]["exit_code"] == 2);

    ot::write_text(dir.file("empty.json"), R"({"cases":[]})");
    const auto empty = run({"harmonize", "--manifest", dir.file("empty.json"), "--out", dir.file("h3")});
    CHECK(empty.code == 1);
}

TEST_CASE("evaluate identical volumes, FPR block and grid checks") {
    ot::TempDir dir;
    const auto manifest = ot::write_dataset(dir, default_cases());
    REQUIRE(run({"harmonize", "--manifest", manifest, "--out", dir.file("ref"), "--max-slices", "400", "--min-slices",
                 "10"})
                .code == 0);
    const auto hm = dir.file("ref/manifest.json");
    const auto r = run({"evaluate", "--pred", dir.file("ref"), "--ref", dir.file("ref"), "--out", dir.file("ev"),
                        "--manifest", hm, "--threads", "3"});
    REQUIRE(r.code == 0);
    const auto rows = load_metrics_csv(dir.file("ev/metrics.csv"));
    CHECK(rows.size() == 3 * 17);
    for (const auto& row : rows) {
        if (row.status == MetricStatus::evaluated) CHECK(*row.dsc == 1.0);
    }
    const auto summary = nlohmann::json::parse(ot::read_text(dir.file("ev/summary.json")));
    // Kidneys are present on both sides, so both nephrectomy cases count.
    CHECK(summary["fpr"]["fraction"] == "2/2");
    CHECK(summary["conventions"]["distance_pooling"].get<std::string>().find("pooled") == 0);

    // A prediction on a different grid needs --resample.
    fs::create_directories(dir.file("pred"));
    for (const char* id : {"c1", "c2", "c3"}) {
        auto v = nifti::read_labels(dir.file(std::string("ref/") + id + ".nii.gz"));
        Grid g = v.grid();
        g.origin[0] += 0.25;
        nifti::write(LabelVolume(g, std::vector<LabelCode>(v.voxels().begin(), v.voxels().end())),
                     dir.file(std::string("pred/") + id + ".nii.gz"));
    }
    const auto mismatch = run({"evaluate", "--pred", dir.file("pred"), "--ref", dir.file("ref"), "--out",
                               dir.file("ev2"), "--json-errors"});
    CHECK(mismatch.code == 3);
    CHECK(nlohmann::json::parse(mismatch.err)["error"]["category"] == "geometry");
    const auto fixed = run({"evaluate", "--pred", dir.file("pred"), "--ref", dir.file("ref"), "--out", dir.file("ev3"),
                            "--resample"});
    CHECK(fixed.code == 0);

    fs::remove(dir.file("pred/c2.nii.gz"));
    const auto lenient = run({"evaluate", "--pred", dir.file("pred"), "--ref", dir.file("ref"), "--out",
                              dir.file("ev4"), "--resample", "--manifest", hm});
    CHECK(lenient.code == 0);
    const auto s4 = nlohmann::json::parse(ot::read_text(dir.file("ev4/summary.json")));
    CHECK(s4["errors"].size() == 1);
    const auto strict = run({"evaluate", "--pred", dir.file("pred"), "--ref", dir.file("ref"), "--out",
                             dir.file("ev5"), "--resample", "--manifest", hm, "--strict"});
    CHECK(strict.code == 2);
}

TEST_CASE("compare, subgroup and split commands") {
    ot::TempDir dir;
    std::vector<MetricRow> a, b;
    nlohmann::json cases = nlohmann::json::array();
    for (int i = 0; i < 12; ++i) {
        MetricRow r;
        r.case_id = "c" + std::to_string(i);
        r.organ = "liver";
        r.dsc = 0.9 - 0.01 * i;
        r.hd95_mm = 1.0 + i;
        r.msd_mm = 0.5;
        a.push_back(r);
        r.dsc = *r.dsc - 0.02;
        b.push_back(r);
        cases.push_back({{"case_id", r.case_id}, {"patient_id", "p" + std::to_string(i / 2)}, {"image_path", "x"},
                         {"age_years", 1.0 + 2.0 * (i % 4)}, {"sex", i % 2 ? "male" : "female"}});
    }
    ot::write_text(dir.file("a.csv"), to_csv(a));
    ot::write_text(dir.file("b.csv"), to_csv(b));
    ot::write_text(dir.file("m.json"), nlohmann::json{{"cases", cases}}.dump());

    const auto self = run({"compare", dir.file("a.csv"), dir.file("a.csv"), "--paired"});
    REQUIRE(self.code == 0);
    CHECK(nlohmann::json::parse(self.out)["organs"][0]["comparisons"][0]["p_raw"] == 1.0);
    const auto shifted = run({"compare", dir.file("a.csv"), dir.file("b.csv"), "--paired", "--out", dir.file("cmp.json")});
    CHECK(shifted.code == 0);
    const auto cmp = nlohmann::json::parse(ot::read_text(dir.file("cmp.json")));
    CHECK(cmp["organs"][0]["comparisons"][0]["p_raw"].get<double>() == doctest::Approx(2.0 / 4096.0));

    const auto age = run({"subgroup", "--metrics", dir.file("a.csv"), "--manifest", dir.file("m.json"), "--by", "age"});
    REQUIRE(age.code == 0);
    CHECK(nlohmann::json::parse(age.out)["organs"][0]["comparisons"].size() == 6);
    const auto iv = run({"subgroup", "--metrics", dir.file("a.csv"), "--manifest", dir.file("m.json"), "--by",
                         "iv_contrast"});
    CHECK(nlohmann::json::parse(iv.out)["organs"][0]["comparisons"].empty());
    CHECK(run({"subgroup", "--metrics", dir.file("a.csv"), "--manifest", dir.file("m.json"), "--by", "height"}).code == 1);

    const auto s1 = run({"split", "--manifest", dir.file("m.json"), "--ratio", "4:1:1", "--seed", "42", "--out",
                         dir.file("s1.json")});
    const auto s2 = run({"split", "--manifest", dir.file("m.json"), "--ratio", "4:1:1", "--seed", "42", "--out",
                         dir.file("s2.json")});
    CHECK(s1.code == 0);
    CHECK(s2.code == 0);
    CHECK(ot::read_text(dir.file("s1.json")) == ot::read_text(dir.file("s2.json")));
    const auto cv = run({"split", "--manifest", dir.file("m.json"), "--ratio", "64:16:20", "--folds", "3"});
    CHECK(nlohmann::json::parse(cv.out).size() == 3);
    CHECK(run({"split", "--manifest", dir.file("m.json"), "--ratio", "4:x"}).code == 1);
}

TEST_CASE("postprocess, review select, schema and usage errors") {
    ot::TempDir dir;
    Grid g;
    g.dims = {8, 8, 8};
    LabelVolume v(g);
    v.at(1, 1, 1) = 3;
    v.at(1, 1, 2) = 3;
    v.at(6, 6, 6) = 3;
    fs::create_directories(dir.file("in"));
    nifti::write(v, dir.file("in/x.nii.gz"));
    CHECK(run({"postprocess", "--pred", dir.file("in"), "--out", dir.file("pp")}).code == 0);
    const auto cleaned = nifti::read_labels(dir.file("pp/x.nii.gz"));
    CHECK(cleaned.at(6, 6, 6) == 0);
    CHECK(cleaned.at(1, 1, 2) == 3);
    CHECK(run({"postprocess", "--pred", dir.file("in"), "--out", dir.file("pp"), "--connectivity", "7"}).code == 1);

    const auto manifest = ot::write_dataset(dir, {{"a", "p1"}, {"b", "p1"}, {"c", "p2"}, {"d", "p3"}});
    const auto sel = run({"review", "select", "--manifest", manifest, "--n", "2", "--seed", "3"});
    REQUIRE(sel.code == 0);
    const auto chosen = parse_manifest(sel.out);
    CHECK(chosen.cases.size() == 2);
    CHECK(chosen.cases[0].patient_id != chosen.cases[1].patient_id);
    CHECK(run({"review", "select", "--manifest", manifest, "--n", "2", "--seed", "3"}).out == sel.out);
    CHECK(run({"review", "select", "--manifest", manifest, "--n", "9"}).code == 1);

    const auto schema = run({"schema"});
    CHECK(schema.code == 0);
    CHECK(OrganSchema::from_json(schema.out).organs().size() == 17);

    CHECK(run({}).code == 1);
    CHECK(run({"evaluate"}).code == 1);
    const auto missing = run({"split", "--manifest", dir.file("nope.json"), "--json-errors"});
    CHECK(missing.code == 2);
    CHECK(nlohmann::json::parse(missing.err)["error"]["kind"] == "io");
}
