#include "oar/harmonize.hpp"

#include <algorithm>

#include <json.hpp>

namespace oar {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::clinical: return "clinical";
        case Provenance::auxiliary: return "auxiliary";
        case Provenance::absent: break;
    }
    return "absent";
}

namespace {

bool has_foreground(const Mask& m) {
    const auto v = m.voxels();
    return std::any_of(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; });
}

const Mask* present(const MaskSet& set, const std::string& organ) {
    const auto it = set.find(organ);
    if (it == set.end() || !has_foreground(it->second)) return nullptr;
    return &it->second;
}

const Grid* first_grid(const MaskSet& set) {
    return set.empty() ? nullptr : &set.begin()->second.grid();
}

}  // namespace

MaskSet decompose(const LabelVolume& labels, const OrganSchema& schema) {
    std::map<LabelCode, std::size_t> counts;
    for (auto v : labels.voxels()) {
        if (v != 0) ++counts[v];
    }
    MaskSet out;
    for (const auto& [code, n] : counts) {
        const auto* organ = schema.find_code(code);
        if (organ == nullptr) {
            throw ValidationError("label code " + std::to_string(code) + " is not in the schema", "schema");
        }
        out.emplace(organ->name, extract_label(labels, code));
    }
    return out;
}

MaskSet merge_labels(const std::vector<NamedMask>& sources, const OrganSchema& schema) {
    MaskSet out;
    if (sources.empty()) return out;
    const Grid& grid = sources.front().mask.grid();
    for (const auto& src : sources) {
        require_same_grid(grid, src.mask.grid(), "merge_labels(" + src.name + ")");
        const auto target = schema.route(src.name);
        if (!target) throw ValidationError("unknown structure '" + src.name + "'", "unknown-structure");
        auto [it, inserted] = out.try_emplace(*target, grid);
        auto dst = it->second.voxels();
        const auto m = src.mask.voxels();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (m[i] != 0) dst[i] = 1;
        }
    }
    return out;
}

bool ComplementPolicy::allows(const OrganDef& organ) const {
    if (organ.organ_type == OrganType::type2) return type2_all;
    return type1_list.contains(organ.name);
}

ComplementResult complement_missing(const MaskSet& clinical, const MaskSet& auxiliary, const OrganSchema& schema,
                                    const ComplementPolicy& policy) {
    const Grid* grid = first_grid(clinical);
    if (grid == nullptr) grid = first_grid(auxiliary);
    for (const auto* set : {&clinical, &auxiliary}) {
        for (const auto& [name, mask] : *set) {
            require_same_grid(*grid, mask.grid(), "complement_missing(" + name + ")");
            schema.at(name);
        }
    }
    ComplementResult out;
    for (const auto& organ : schema.organs()) {
        if (const Mask* m = present(clinical, organ.name)) {
            out.masks.emplace(organ.name, *m);
            out.provenance[organ.name] = Provenance::clinical;
        } else if (const Mask* a = present(auxiliary, organ.name); a != nullptr && policy.allows(organ)) {
            out.masks.emplace(organ.name, *a);
            out.provenance[organ.name] = Provenance::auxiliary;
        } else {
            out.provenance[organ.name] = Provenance::absent;
        }
    }
    return out;
}

LabelVolume resolve_overlaps(const MaskSet& masks, const OrganSchema& schema) {
    const Grid* grid = first_grid(masks);
    if (grid == nullptr) throw ComputationError("resolve_overlaps: no masks and no grid given");
    return resolve_overlaps(masks, schema, *grid);
}

LabelVolume resolve_overlaps(const MaskSet& masks, const OrganSchema& schema, const Grid& grid) {
    std::vector<std::pair<std::size_t, const std::string*>> order;
    for (const auto& [name, mask] : masks) {
        require_same_grid(grid, mask.grid(), "resolve_overlaps(" + name + ")");
        order.emplace_back(schema.priority_rank(name), &name);
    }
    std::sort(order.begin(), order.end());

    // Paint from highest priority down; a voxel keeps the first organ that claims it.
    LabelVolume out(grid);
    auto dst = out.voxels();
    for (const auto& [rank, name] : order) {
        const LabelCode code = schema.at(*name).label_code;
        const auto m = masks.at(*name).voxels();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (m[i] != 0 && dst[i] == 0) dst[i] = code;
        }
    }
    return out;
}

FilterResult filter_cases(const Manifest& manifest, const std::map<std::string, CaseFacts>& facts,
                          const FilterRules& rules) {
    FilterResult out;
    for (const auto& c : manifest.cases) {
        const auto it = facts.find(c.case_id);
        if (it == facts.end()) {
            out.excluded.push_back({c.case_id, "no_data", "no label data available"});
            continue;
        }
        const auto& f = it->second;
        if (f.slice_count < rules.slice_lo || f.slice_count > rules.slice_hi) {
            out.excluded.push_back({c.case_id, "slice_count",
                                    std::to_string(f.slice_count) + " slices outside [" +
                                        std::to_string(rules.slice_lo) + ", " + std::to_string(rules.slice_hi) +
                                        "]"});
        } else if (f.missing_organs > rules.max_missing) {
            out.excluded.push_back({c.case_id, "missing_organs",
                                    std::to_string(f.missing_organs) + " organs absent (max " +
                                        std::to_string(rules.max_missing) + ")"});
        } else {
            out.included.push_back(c);
        }
    }
    return out;
}

std::string exclusion_log_jsonl(const std::vector<Exclusion>& excluded) {
    std::string out;
    for (const auto& e : excluded) {
        out += nlohmann::json{{"case_id", e.case_id}, {"reason", e.reason}, {"detail", e.detail}}.dump();
        out += '\n';
    }
    return out;
}

int HarmonizedCase::missing_organs() const {
    return static_cast<int>(std::count_if(provenance.begin(), provenance.end(),
                                          [](const auto& kv) { return kv.second == Provenance::absent; }));
}

HarmonizedCase harmonize_case(const std::string& case_id, const std::vector<NamedMask>& clinical,
                              const std::vector<NamedMask>& auxiliary, const OrganSchema& schema,
                              const ComplementPolicy& policy) {
    const MaskSet clin = merge_labels(clinical, schema);
    const MaskSet aux = merge_labels(auxiliary, schema);
    const Grid* grid = first_grid(clin);
    if (grid == nullptr) grid = first_grid(aux);
    if (grid == nullptr) throw ValidationError(case_id + ": no label sources");
    auto comp = complement_missing(clin, aux, schema, policy);
    HarmonizedCase hc;
    hc.case_id = case_id;
    hc.labels = resolve_overlaps(comp.masks, schema, *grid);
    hc.provenance = std::move(comp.provenance);
    return hc;
}

std::string provenance_json(const HarmonizedCase& hc) {
    nlohmann::json doc;
    doc["case_id"] = hc.case_id;
    doc["provenance"] = nlohmann::json::object();
    for (const auto& [organ, p] : hc.provenance) doc["provenance"][organ] = to_string(p);
    doc["missing_organs"] = hc.missing_organs();
    if (hc.exclusion) doc["exclusion"] = {{"reason", hc.exclusion->reason}, {"detail", hc.exclusion->detail}};
    return doc.dump(2);
}

}  // namespace oar
