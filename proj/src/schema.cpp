#include "oar/schema.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace oar {

using nlohmann::json;

std::string to_string(OrganType t) { return t == OrganType::type1 ? "type1" : "type2"; }

std::string to_string(PairedSide s) {
    switch (s) {
        case PairedSide::left: return "left";
        case PairedSide::right: return "right";
        case PairedSide::none: break;
    }
    return "none";
}

std::string canonical_name(std::string name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        const auto u = static_cast<unsigned char>(c);
        if (c == '-' || c == ' ' || c == '.') {
            out.push_back('_');
        } else {
            out.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    return out;
}

OrganSchema::OrganSchema(std::vector<OrganDef> organs, std::vector<MergeRule> merge_rules,
                         std::vector<std::vector<std::string>> priority_tiers)
    : organs_(std::move(organs)), merge_rules_(std::move(merge_rules)), tiers_(std::move(priority_tiers)) {
    validate();
    tier_index_.assign(organs_.size(), 0);
    for (std::size_t t = 0; t < tiers_.size(); ++t) {
        for (const auto& name : tiers_[t]) tier_index_[position(name)] = t;
    }
}

const OrganSchema& OrganSchema::default_schema() {
    static const OrganSchema schema = [] {
        using enum OrganType;
        std::vector<OrganDef> organs = {
            {"spleen", 1, type1, PairedSide::none},
            {"lung_left", 2, type1, PairedSide::left},
            {"lung_right", 3, type1, PairedSide::right},
            {"kidney_left", 4, type1, PairedSide::left},
            {"kidney_right", 5, type1, PairedSide::right},
            {"heart", 6, type1, PairedSide::none},
            {"pancreas", 7, type1, PairedSide::none},
            {"stomach_bowel", 8, type1, PairedSide::none},
            {"liver", 9, type1, PairedSide::none},
            {"vertebrae", 10, type2, PairedSide::none},
            {"spinal_canal", 11, type2, PairedSide::none},
            {"aorta_abdominal", 12, type2, PairedSide::none},
            {"inferior_vena_cava", 13, type2, PairedSide::none},
            {"autochthon_left", 14, type2, PairedSide::left},
            {"autochthon_right", 15, type2, PairedSide::right},
            {"iliopsoas_left", 16, type2, PairedSide::left},
            {"iliopsoas_right", 17, type2, PairedSide::right},
        };
        // Clinical structure names plus the auxiliary segmenter's own names.
        std::vector<MergeRule> rules = {
            {{"stomach", "small_intestine", "large_intestine", "stomach_intestine_bowel", "small_bowel", "colon",
              "duodenum"},
             "stomach_bowel"},
            {{"spinal_cord"}, "spinal_canal"},
            {{"lung_upper_lobe_left", "lung_lower_lobe_left"}, "lung_left"},
            {{"lung_upper_lobe_right", "lung_middle_lobe_right", "lung_lower_lobe_right"}, "lung_right"},
        };
        MergeRule vertebrae{{}, "vertebrae"};
        for (int i = 1; i <= 7; ++i) vertebrae.sources.push_back("vertebrae_c" + std::to_string(i));
        for (int i = 1; i <= 12; ++i) vertebrae.sources.push_back("vertebrae_t" + std::to_string(i));
        for (int i = 1; i <= 5; ++i) vertebrae.sources.push_back("vertebrae_l" + std::to_string(i));
        vertebrae.sources.emplace_back("vertebrae_s1");
        rules.push_back(std::move(vertebrae));
        std::vector<std::vector<std::string>> tiers = {
            {"spleen", "kidney_left", "kidney_right", "heart"},
            {"pancreas", "liver"},
            {"stomach_bowel"},
            {"lung_left", "lung_right"},
        };
        for (const auto& o : organs) {
            if (o.organ_type == type2) tiers.push_back({o.name});
        }
        return OrganSchema(std::move(organs), std::move(rules), std::move(tiers));
    }();
    return schema;
}

OrganSchema OrganSchema::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("schema is not valid JSON: ") + e.what(), "schema");
    }
    try {
        std::vector<OrganDef> organs;
        for (const auto& o : doc.at("organs")) {
            OrganDef d;
            d.name = o.at("name").get<std::string>();
            const int code = o.at("label_code").get<int>();
            if (code < 1 || code > 65535) throw ValidationError("label_code out of range for " + d.name, "schema");
            d.label_code = static_cast<LabelCode>(code);
            const auto type = o.value("organ_type", std::string("type1"));
            if (type != "type1" && type != "type2") throw ValidationError("bad organ_type for " + d.name, "schema");
            d.organ_type = type == "type1" ? OrganType::type1 : OrganType::type2;
            const auto side = o.value("paired_side", std::string("none"));
            d.paired_side = side == "left" ? PairedSide::left : side == "right" ? PairedSide::right : PairedSide::none;
            organs.push_back(std::move(d));
        }
        std::vector<MergeRule> rules;
        if (doc.contains("merge_rules")) {
            for (const auto& r : doc.at("merge_rules")) {
                MergeRule rule;
                rule.target = r.at("target").get<std::string>();
                for (const auto& s : r.at("sources")) rule.sources.push_back(canonical_name(s.get<std::string>()));
                rules.push_back(std::move(rule));
            }
        }
        std::vector<std::vector<std::string>> tiers;
        for (const auto& t : doc.at("priority_tiers")) tiers.push_back(t.get<std::vector<std::string>>());
        return OrganSchema(std::move(organs), std::move(rules), std::move(tiers));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed schema: ") + e.what(), "schema");
    }
}

OrganSchema OrganSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read schema " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string OrganSchema::to_json() const {
    json doc;
    doc["organs"] = json::array();
    for (const auto& o : organs_) {
        doc["organs"].push_back({{"name", o.name},
                                 {"label_code", o.label_code},
                                 {"organ_type", to_string(o.organ_type)},
                                 {"paired_side", to_string(o.paired_side)}});
    }
    doc["merge_rules"] = json::array();
    for (const auto& r : merge_rules_) doc["merge_rules"].push_back({{"sources", r.sources}, {"target", r.target}});
    doc["priority_tiers"] = tiers_;
    return doc.dump(2);
}

const OrganDef* OrganSchema::find(const std::string& name) const noexcept {
    for (const auto& o : organs_) {
        if (o.name == name) return &o;
    }
    return nullptr;
}

const OrganDef* OrganSchema::find_code(LabelCode code) const noexcept {
    for (const auto& o : organs_) {
        if (o.label_code == code) return &o;
    }
    return nullptr;
}

const OrganDef& OrganSchema::at(const std::string& name) const {
    const auto* o = find(name);
    if (o == nullptr) throw ValidationError("organ '" + name + "' is not in the schema", "schema");
    return *o;
}

std::size_t OrganSchema::position(const std::string& name) const {
    for (std::size_t i = 0; i < organs_.size(); ++i) {
        if (organs_[i].name == name) return i;
    }
    throw ValidationError("organ '" + name + "' is not in the schema", "schema");
}

std::size_t OrganSchema::tier_of(const std::string& name) const { return tier_index_[position(name)]; }

std::size_t OrganSchema::priority_rank(const std::string& name) const {
    const std::size_t pos = position(name);
    return tier_index_[pos] * organs_.size() + pos;
}

std::vector<std::string> OrganSchema::priority_order() const {
    std::vector<std::size_t> idx(organs_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::pair(tier_index_[a], a) < std::pair(tier_index_[b], b);
    });
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(organs_[i].name);
    return out;
}

std::optional<std::string> OrganSchema::route(const std::string& source_name) const {
    const std::string name = canonical_name(source_name);
    for (const auto& r : merge_rules_) {
        if (std::find(r.sources.begin(), r.sources.end(), name) != r.sources.end()) return r.target;
    }
    if (find(name) != nullptr) return name;
    return std::nullopt;
}

void OrganSchema::validate() const {
    if (organs_.empty()) throw ValidationError("schema has no organs", "schema");
    std::set<std::string> names;
    std::set<LabelCode> codes;
    for (const auto& o : organs_) {
        if (o.name.empty() || canonical_name(o.name) != o.name) {
            throw ValidationError("organ name '" + o.name + "' is not canonical snake_case", "schema");
        }
        if (!names.insert(o.name).second) throw ValidationError("duplicate organ " + o.name, "schema");
        if (o.label_code == 0 || !codes.insert(o.label_code).second) {
            throw ValidationError("label code for " + o.name + " is zero or duplicated", "schema");
        }
    }
    std::map<std::string, int> tier_count;
    bool seen_type2_tier = false;
    for (const auto& tier : tiers_) {
        if (tier.empty()) throw ValidationError("empty priority tier", "schema");
        bool has_type1 = false;
        bool has_type2 = false;
        for (const auto& name : tier) {
            const auto* o = find(name);
            if (o == nullptr) throw ValidationError("priority tier names unknown organ " + name, "schema");
            ++tier_count[name];
            (o->organ_type == OrganType::type1 ? has_type1 : has_type2) = true;
        }
        if (has_type1 && seen_type2_tier) {
            throw ValidationError("a type 1 organ is ranked below a type 2 tier", "schema");
        }
        if (has_type1 && has_type2) throw ValidationError("tier mixes type 1 and type 2 organs", "schema");
        seen_type2_tier = seen_type2_tier || has_type2;
    }
    for (const auto& o : organs_) {
        if (tier_count[o.name] != 1) {
            throw ValidationError("organ " + o.name + " must appear in exactly one priority tier", "schema");
        }
    }
    for (const auto& r : merge_rules_) {
        if (find(r.target) == nullptr) throw ValidationError("merge target " + r.target + " not in schema", "schema");
    }
}

}  // namespace oar
