#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oar/manifest.hpp"
#include "oar/schema.hpp"
#include "oar/volume.hpp"

namespace oar {

/// Organ name to binary mask. An organ that is missing from the map or
/// whose mask has no foreground voxels counts as absent.
using MaskSet = std::map<std::string, Mask>;

struct NamedMask {
    std::string name;
    Mask mask;
};

enum class Provenance { clinical, auxiliary, absent };
std::string to_string(Provenance p);

/// Splits a multi-label volume into per-organ masks (non-empty organs only).
/// Throws ValidationError for codes outside the schema.
MaskSet decompose(const LabelVolume& labels, const OrganSchema& schema);

/// Routes every source through the schema's merge rules and unions the
/// results per target organ. Throws GeometryError when grids differ and
/// ValidationError("unknown-structure") for names the schema cannot route.
MaskSet merge_labels(const std::vector<NamedMask>& sources, const OrganSchema& schema);

/// Which organs may be filled from the auxiliary segmentation when the
/// clinical mask is absent.
struct ComplementPolicy {
    std::set<std::string> type1_list{"heart", "pancreas", "stomach_bowel"};
    bool type2_all = true;

    bool allows(const OrganDef& organ) const;
};

struct ComplementResult {
    MaskSet masks;  // present organs only
    std::map<std::string, Provenance> provenance;  // every schema organ
};

/// Clinical masks win whenever non-empty; otherwise the auxiliary mask is
/// used if the policy allows it; otherwise the organ is absent.
ComplementResult complement_missing(const MaskSet& clinical, const MaskSet& auxiliary, const OrganSchema& schema,
                                    const ComplementPolicy& policy = {});

/// Composes masks into one multi-label volume. A voxel claimed by several
/// organs goes to the one with the lowest schema priority rank; unclaimed
/// voxels are 0. Throws ValidationError("schema") for unknown organs and
/// ComputationError when `masks` is empty (use the Grid overload).
LabelVolume resolve_overlaps(const MaskSet& masks, const OrganSchema& schema);
LabelVolume resolve_overlaps(const MaskSet& masks, const OrganSchema& schema, const Grid& grid);

struct FilterRules {
    std::int64_t slice_lo = 80;
    std::int64_t slice_hi = 400;
    /// Cases with more absent organs than this are excluded.
    int max_missing = 4;
};

/// Per-case measurements the filter needs.
struct CaseFacts {
    std::int64_t slice_count = 0;
    int missing_organs = 0;
};

struct Exclusion {
    std::string case_id;
    std::string reason;  // "slice_count", "missing_organs" or "no_data"
    std::string detail;
};

struct FilterResult {
    std::vector<CaseRecord> included;
    std::vector<Exclusion> excluded;
};

/// Partitions the manifest. A case without an entry in `facts` is excluded
/// with reason "no_data".
FilterResult filter_cases(const Manifest& manifest, const std::map<std::string, CaseFacts>& facts,
                          const FilterRules& rules);

/// One JSON object per line: {case_id, reason, detail}.
std::string exclusion_log_jsonl(const std::vector<Exclusion>& excluded);

struct HarmonizedCase {
    std::string case_id;
    LabelVolume labels;
    std::map<std::string, Provenance> provenance;
    std::optional<Exclusion> exclusion;  // empty when included

    int missing_organs() const;
};

/// Full per-case pipeline: merge clinical and auxiliary sources separately,
/// complement, resolve overlaps.
HarmonizedCase harmonize_case(const std::string& case_id, const std::vector<NamedMask>& clinical,
                              const std::vector<NamedMask>& auxiliary, const OrganSchema& schema,
                              const ComplementPolicy& policy = {});

/// Provenance sidecar document: {case_id, provenance: {organ: source}, missing_organs}.
std::string provenance_json(const HarmonizedCase& hc);

}  // namespace oar
