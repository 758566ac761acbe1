#pragma once

// Small synthetic dataset on disk for CLI and service tests.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oar/nifti.hpp"
#include "support/fixtures.hpp"

namespace oar::testing {

struct SyntheticCase {
    std::string case_id;
    std::string patient_id;
    double age = 5.0;
    std::string sex = "male";
    std::string side = "none";
    std::int64_t slices = 100;
};

/// Multi-label volume with a box per listed code, stacked along x.
inline LabelVolume synthetic_labels(const Grid& g, const std::vector<LabelCode>& codes, std::int64_t shift = 0) {
    LabelVolume v(g);
    std::int64_t x0 = 1;
    for (auto code : codes) {
        for (std::int64_t k = 2; k < g.dims[2] - 2; ++k)
            for (std::int64_t j = 2; j < g.dims[1] - 2; ++j)
                for (std::int64_t i = x0; i < x0 + 2 && i < g.dims[0]; ++i) {
                    const auto jj = std::min(g.dims[1] - 1, j + shift);
                    v.at(i, jj, k) = code;
                }
        x0 += 3;
    }
    return v;
}

inline Grid synthetic_grid(std::int64_t slices) {
    Grid g;
    g.dims = {54, 10, slices};
    g.spacing = {1.0, 1.0, 2.0};
    return g;
}

/// CT-like image: a smooth ramp in HU.
inline ImageVolume synthetic_image(const Grid& g) {
    ImageVolume img(g);
    for (std::int64_t k = 0; k < g.dims[2]; ++k)
        for (std::int64_t j = 0; j < g.dims[1]; ++j)
            for (std::int64_t i = 0; i < g.dims[0]; ++i) img.at(i, j, k) = -200.0 + 20.0 * static_cast<double>(i);
    return img;
}

/// Writes images, clinical labels (type 1 organs except the heart), an
/// auxiliary multi-label volume (heart and type 2 organs) and a manifest.
/// Returns the manifest path.
inline std::string write_dataset(const TempDir& dir, const std::vector<SyntheticCase>& cases) {
    std::vector<LabelCode> clinical, auxiliary;
    for (LabelCode c = 1; c <= 17; ++c) {
        const bool aux = c == 6 || c >= 10;
        clinical.push_back(aux ? 0 : c);
        auxiliary.push_back(aux ? c : 0);
    }
    nlohmann::json doc;
    doc["schema_ref"] = "default";
    doc["cases"] = nlohmann::json::array();
    for (const auto& c : cases) {
        const Grid g = synthetic_grid(c.slices);
        nifti::write(synthetic_image(g), dir.file(c.case_id + "_ct.nii.gz"));
        nifti::write(synthetic_labels(g, clinical), dir.file(c.case_id + "_clin.nii.gz"));
        nifti::write(synthetic_labels(g, auxiliary), dir.file(c.case_id + "_aux.nii.gz"));
        doc["cases"].push_back({{"case_id", c.case_id},
                                {"patient_id", c.patient_id},
                                {"dataset", "synthetic"},
                                {"age_years", c.age},
                                {"sex", c.sex},
                                {"tumor_type", c.side == "none" ? "neuroblastoma" : "renal"},
                                {"iv_contrast", "yes"},
                                {"nephrectomy_side", c.side},
                                {"image_path", c.case_id + "_ct.nii.gz"},
                                {"label_paths",
                                 {{"clinical", c.case_id + "_clin.nii.gz"}, {"auxiliary", c.case_id + "_aux.nii.gz"}}}});
    }
    const auto path = dir.file("manifest.json");
    write_text(path, doc.dump(2));
    return path;
}

}  // namespace oar::testing
