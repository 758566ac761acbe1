#include "oar/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oar/error.hpp"

namespace oar {

using nlohmann::json;

std::string to_string(Sex v) {
    switch (v) {
        case Sex::male: return "male";
        case Sex::female: return "female";
        case Sex::unknown: break;
    }
    return "unknown";
}

std::string to_string(TumorType v) {
    switch (v) {
        case TumorType::renal: return "renal";
        case TumorType::neuroblastoma: return "neuroblastoma";
        case TumorType::unspecified: break;
    }
    return "unspecified";
}

std::string to_string(IvContrast v) {
    switch (v) {
        case IvContrast::yes: return "yes";
        case IvContrast::no: return "no";
        case IvContrast::unknown: break;
    }
    return "unknown";
}

std::string to_string(NephrectomySide v) {
    switch (v) {
        case NephrectomySide::left: return "left";
        case NephrectomySide::right: return "right";
        case NephrectomySide::none: return "none";
        case NephrectomySide::unknown: break;
    }
    return "unknown";
}

const CaseRecord* Manifest::find(const std::string& case_id) const noexcept {
    for (const auto& c : cases) {
        if (c.case_id == case_id) return &c;
    }
    return nullptr;
}

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

template <typename E>
E parse_enum(const json& rec, const char* key, std::initializer_list<std::pair<const char*, E>> table, E fallback,
             const std::string& case_id, std::vector<std::string>& warnings) {
    if (!rec.contains(key) || rec[key].is_null()) return fallback;
    if (!rec[key].is_string()) {
        warnings.push_back(case_id + ": non-string " + key + " treated as unknown");
        return fallback;
    }
    const std::string value = lower(rec[key].get<std::string>());
    for (const auto& [name, e] : table) {
        if (value == name) return e;
    }
    warnings.push_back(case_id + ": unknown " + std::string(key) + " '" + value + "' treated as " + "unknown");
    return fallback;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty()) return path;
    const std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

std::string string_field(const json& rec, const char* key) {
    if (!rec.contains(key) || !rec[key].is_string()) return {};
    return rec[key].get<std::string>();
}

}  // namespace

Manifest parse_manifest(const std::string& json_text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("cases") || !doc["cases"].is_array()) {
        throw ValidationError("manifest must be an object with a 'cases' array");
    }

    Manifest m;
    m.schema_ref = doc.value("schema_ref", std::string{});
    std::vector<std::string> problems;
    std::set<std::string> seen;

    std::size_t position = 0;
    for (const auto& rec : doc["cases"]) {
        const std::string where = "cases[" + std::to_string(position++) + "]";
        if (!rec.is_object()) {
            problems.push_back(where + ": not an object");
            continue;
        }
        CaseRecord c;
        c.case_id = string_field(rec, "case_id");
        c.patient_id = string_field(rec, "patient_id");
        c.image_path = string_field(rec, "image_path");
        c.dataset = string_field(rec, "dataset");
        const std::string label = c.case_id.empty() ? where : c.case_id;

        std::vector<std::string> missing;
        if (c.case_id.empty()) missing.emplace_back("case_id");
        if (c.patient_id.empty()) missing.emplace_back("patient_id");
        if (c.image_path.empty()) missing.emplace_back("image_path");
        if (!missing.empty()) {
            std::string msg = label + ": missing required field(s)";
            for (const auto& f : missing) msg += " " + f;
            problems.push_back(msg);
            continue;
        }
        if (!seen.insert(c.case_id).second) {
            problems.push_back(label + ": duplicate case_id");
            continue;
        }
        if (rec.contains("age_years") && !rec["age_years"].is_null()) {
            if (!rec["age_years"].is_number()) {
                problems.push_back(label + ": age_years must be a number");
                continue;
            }
            c.age_years = rec["age_years"].get<double>();
            if (!std::isfinite(c.age_years) || c.age_years < 0.0) {
                problems.push_back(label + ": age_years must be finite and >= 0");
                continue;
            }
        }

        c.sex = parse_enum<Sex>(rec, "sex", {{"male", Sex::male}, {"m", Sex::male}, {"female", Sex::female},
                                             {"f", Sex::female}, {"unknown", Sex::unknown}},
                                Sex::unknown, label, m.warnings);
        c.tumor_type = parse_enum<TumorType>(
            rec, "tumor_type",
            {{"renal", TumorType::renal}, {"neuroblastoma", TumorType::neuroblastoma},
             {"unspecified", TumorType::unspecified}},
            TumorType::unspecified, label, m.warnings);
        c.iv_contrast = parse_enum<IvContrast>(
            rec, "iv_contrast", {{"yes", IvContrast::yes}, {"no", IvContrast::no}, {"unknown", IvContrast::unknown}},
            IvContrast::unknown, label, m.warnings);
        c.nephrectomy_side = parse_enum<NephrectomySide>(
            rec, "nephrectomy_side",
            {{"left", NephrectomySide::left}, {"right", NephrectomySide::right}, {"none", NephrectomySide::none},
             {"unknown", NephrectomySide::unknown}},
            NephrectomySide::unknown, label, m.warnings);

        c.image_path = resolve(c.image_path, base_dir);
        if (rec.contains("label_paths") && rec["label_paths"].is_object()) {
            for (const auto& [name, path] : rec["label_paths"].items()) {
                if (path.is_string()) c.label_paths[name] = resolve(path.get<std::string>(), base_dir);
            }
        }
        m.cases.push_back(std::move(c));
    }

    if (!problems.empty()) {
        std::string msg = "manifest validation failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ValidationError(msg);
    }
    if (m.cases.empty()) throw ValidationError("manifest contains no cases");
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), std::filesystem::path(path).parent_path().string());
}

std::string dump_manifest(const Manifest& manifest) {
    json doc;
    doc["schema_ref"] = manifest.schema_ref;
    doc["cases"] = json::array();
    for (const auto& c : manifest.cases) {
        json rec;
        rec["case_id"] = c.case_id;
        rec["patient_id"] = c.patient_id;
        rec["dataset"] = c.dataset;
        rec["age_years"] = c.age_years;
        rec["sex"] = to_string(c.sex);
        rec["tumor_type"] = to_string(c.tumor_type);
        rec["iv_contrast"] = to_string(c.iv_contrast);
        rec["nephrectomy_side"] = to_string(c.nephrectomy_side);
        rec["image_path"] = c.image_path;
        rec["label_paths"] = c.label_paths;
        doc["cases"].push_back(std::move(rec));
    }
    return doc.dump(2);
}

}  // namespace oar
