#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oar/volume.hpp"

namespace oar {

enum class OrganType { type1, type2 };
enum class PairedSide { left, right, none };

std::string to_string(OrganType t);
std::string to_string(PairedSide s);

struct OrganDef {
    std::string name;
    LabelCode label_code = 0;
    OrganType organ_type = OrganType::type1;
    PairedSide paired_side = PairedSide::none;
};

/// Union of `sources` is stored under `target`.
struct MergeRule {
    std::vector<std::string> sources;
    std::string target;
};

/// Lower-case snake_case form of a structure name ("Stomach-Bowel" -> "stomach_bowel").
std::string canonical_name(std::string name);

/// Organ catalog, merge rules and overlap priority tiers.
///
/// Overlap priority is (tier index, position in the organ list): earlier
/// tiers win, and inside a tier the organ listed first wins.
class OrganSchema {
public:
    OrganSchema() = default;
    OrganSchema(std::vector<OrganDef> organs, std::vector<MergeRule> merge_rules,
                std::vector<std::vector<std::string>> priority_tiers);

    /// The 17-organ catalog: nine clinician-delineated (type 1) organs and
    /// eight auxiliary-segmenter (type 2) organs, codes 1..17 in list order.
    static const OrganSchema& default_schema();

    static OrganSchema from_json(const std::string& text);
    static OrganSchema load(const std::string& path);
    std::string to_json() const;

    const std::vector<OrganDef>& organs() const noexcept { return organs_; }
    const std::vector<MergeRule>& merge_rules() const noexcept { return merge_rules_; }
    const std::vector<std::vector<std::string>>& priority_tiers() const noexcept { return tiers_; }

    const OrganDef* find(const std::string& name) const noexcept;
    const OrganDef* find_code(LabelCode code) const noexcept;
    /// Throws ValidationError("schema") for names outside the catalog.
    const OrganDef& at(const std::string& name) const;

    std::size_t position(const std::string& name) const;
    std::size_t tier_of(const std::string& name) const;
    /// Lower rank wins an overlap.
    std::size_t priority_rank(const std::string& name) const;
    /// Organ names sorted from highest to lowest priority.
    std::vector<std::string> priority_order() const;

    /// Target organ for a source structure name: the merge target when a rule
    /// lists it, the name itself when it is a catalog organ, nullopt otherwise.
    std::optional<std::string> route(const std::string& source_name) const;

    /// Throws ValidationError on duplicate codes/names, non-canonical names,
    /// organs missing from (or repeated across) tiers, or a type 2 tier placed
    /// before a type 1 tier.
    void validate() const;

private:
    std::vector<OrganDef> organs_;
    std::vector<MergeRule> merge_rules_;
    std::vector<std::vector<std::string>> tiers_;
    std::vector<std::size_t> tier_index_;  // parallel to organs_
};

}  // namespace oar
