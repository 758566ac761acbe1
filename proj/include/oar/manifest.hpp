#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oar {

enum class Sex { male, female, unknown };
enum class TumorType { renal, neuroblastoma, unspecified };
enum class IvContrast { yes, no, unknown };
enum class NephrectomySide { left, right, none, unknown };

std::string to_string(Sex v);
std::string to_string(TumorType v);
std::string to_string(IvContrast v);
std::string to_string(NephrectomySide v);

/// One CT case and the files that belong to it.
struct CaseRecord {
    std::string case_id;
    std::string patient_id;
    std::string dataset;
    double age_years = 0.0;
    Sex sex = Sex::unknown;
    TumorType tumor_type = TumorType::unspecified;
    IvContrast iv_contrast = IvContrast::unknown;
    NephrectomySide nephrectomy_side = NephrectomySide::unknown;
    std::string image_path;
    /// Organ name (or "clinical" / "auxiliary" multi-label key) to file path.
    std::map<std::string, std::string> label_paths;
};

struct Manifest {
    std::string schema_ref;
    std::vector<CaseRecord> cases;
    /// Non-fatal notes from loading, e.g. unknown enum strings mapped to unknown.
    std::vector<std::string> warnings;

    const CaseRecord* find(const std::string& case_id) const noexcept;
};

/// Parses a manifest document. Relative file paths are resolved against
/// `base_dir` when it is non-empty. Throws ValidationError listing every
/// offending record (missing case_id/patient_id/image_path, bad age,
/// duplicate case_id, empty case list).
Manifest parse_manifest(const std::string& json_text, const std::string& base_dir = {});

/// Reads and parses a manifest file; relative paths resolve against its directory.
Manifest load_manifest(const std::string& path);

/// JSON document for a manifest (inverse of parse_manifest).
std::string dump_manifest(const Manifest& manifest);

}  // namespace oar
