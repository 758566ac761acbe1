#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oar/harmonize.hpp"
#include "oar/manifest.hpp"
#include "oar/metrics.hpp"
#include "oar/schema.hpp"

namespace oar::cli {

/// Files written and per-case problems of a batch command.
struct Outcome {
    std::vector<std::string> written;
    /// "case_id: message" for every case that failed.
    std::vector<std::string> failures;
    /// Kind of the first failure; decides the exit code when failures are fatal.
    std::optional<ErrorKind> failure_kind;
};

/// Explicit schema file when given; otherwise the manifest's schema_ref when
/// it names an existing file (relative to the manifest), else the default.
OrganSchema resolve_schema(const std::string& schema_path, const Manifest* manifest = nullptr,
                           const std::string& manifest_path = {});

/// "<dir>/<case_id>.nii.gz" or ".nii", whichever exists; nullopt if neither.
std::optional<std::string> find_case_file(const std::string& dir, const std::string& case_id);

struct HarmonizeOptions {
    std::string manifest;
    std::string schema;
    std::string out;
    int threads = 1;
    bool strict = false;
    FilterRules rules;
    ComplementPolicy policy;
};

/// Per case: label inputs from label_paths, where "clinical" and "auxiliary"
/// are multi-label volumes in schema codes, "aux:<name>" is an auxiliary
/// structure mask, and any other key is a clinical structure mask. Writes
/// <case>.nii.gz and <case>.provenance.json for included cases,
/// exclusions.jsonl, and manifest.json listing the included cases with
/// label_paths {"labels": ...}. Failed cases are listed and skipped; with
/// `strict` the first failure is rethrown.
Outcome cmd_harmonize(const HarmonizeOptions& options);

struct EvaluateCommandOptions {
    std::string manifest;  // optional; enables FPR and restricts the case list
    std::string schema;
    std::string pred;      // directory of <case_id>.nii[.gz]
    std::string ref;       // directory of <case_id>.nii[.gz]
    std::string out;
    int threads = 1;
    bool resample = false;
    bool strict = false;
    std::vector<std::string> organs;
    double fpr_threshold_mm3 = 0.0;
};

/// Writes metrics.csv, metrics.json and summary.json. A missing prediction
/// becomes an error entry in summary.json; with `strict` it is rethrown.
/// Grid mismatches raise GeometryError unless `resample` is set.
Outcome cmd_evaluate(const EvaluateCommandOptions& options);

struct CompareOptions {
    std::string table_a;
    std::string table_b;
    std::string out;
    MetricKind metric = MetricKind::dsc;
    bool paired = false;
};
/// Writes the comparison report JSON (to `out`, or returns it when empty).
std::string cmd_compare(const CompareOptions& options);

struct SubgroupOptions {
    std::string metrics;
    std::string manifest;
    std::string out;
    std::string by = "age_group";
    MetricKind metric = MetricKind::dsc;
    std::size_t min_n = 3;
};
std::string cmd_subgroup(const SubgroupOptions& options);

struct SplitOptions {
    std::string manifest;
    std::string out;
    std::string ratio = "132:21:36";
    std::uint64_t seed = 0;
    std::vector<std::string> stratify;
    int folds = 0;  // > 0 writes cross-validation plans
};
/// SplitPlan JSON, or a JSON array of plans for cross-validation.
std::string cmd_split(const SplitOptions& options);

struct PostprocessOptions {
    std::string pred;  // file or directory
    std::string out;   // directory
    int connectivity = 26;
    int threads = 1;
};
/// Keeps the largest connected component of every label.
Outcome cmd_postprocess(const PostprocessOptions& options);

struct ReviewSelectOptions {
    std::string manifest;
    std::string out;
    std::size_t n = 15;
    std::uint64_t seed = 0;
};
/// Seeded choice of n distinct patients (one case each), written as a manifest.
std::string cmd_review_select(const ReviewSelectOptions& options);

/// Writes text to a file, creating parent directories. Throws IoError.
void write_file(const std::string& path, const std::string& text);

}  // namespace oar::cli
