#include "oar/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include <json.hpp>

#include "oar/components.hpp"
#include "oar/nifti.hpp"
#include "oar/parallel.hpp"
#include "oar/report.hpp"
#include "oar/resample.hpp"
#include "oar/split.hpp"
#include "oar/stats.hpp"

namespace fs = std::filesystem;

namespace oar::cli {

void write_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out.flush()) throw IoError("write failed for " + path);
}

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

bool is_nifti_name(const std::string& name) {
    auto ends = [&](const std::string& s) { return name.size() > s.size() && name.ends_with(s); };
    return ends(".nii.gz") || ends(".nii");
}

std::string strip_nifti_ext(const std::string& name) {
    if (name.ends_with(".nii.gz")) return name.substr(0, name.size() - 7);
    if (name.ends_with(".nii")) return name.substr(0, name.size() - 4);
    return name;
}

std::vector<std::string> nifti_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_nifti_name(e.path().filename().string())) out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Runs per-case work in parallel and records failures in case order.
struct CaseFailures {
    std::vector<std::optional<std::string>> message;
    std::vector<std::optional<ErrorKind>> kind;
    std::vector<std::exception_ptr> error;

    explicit CaseFailures(std::size_t n) : message(n), kind(n), error(n) {}

    void record(std::size_t i, const std::string& case_id) {
        error[i] = std::current_exception();
        try {
            throw;
        } catch (const Error& e) {
            message[i] = case_id + ": " + e.what();
            kind[i] = e.kind();
        } catch (const std::exception& e) {
            message[i] = case_id + ": " + e.what();
            kind[i] = ErrorKind::computation;
        }
    }

    void fill(Outcome& outcome) const {
        for (std::size_t i = 0; i < message.size(); ++i) {
            if (!message[i]) continue;
            outcome.failures.push_back(*message[i]);
            if (!outcome.failure_kind) outcome.failure_kind = kind[i];
        }
    }

    void rethrow_first() const {
        for (const auto& e : error) {
            if (e) std::rethrow_exception(e);
        }
    }
};

}  // namespace

OrganSchema resolve_schema(const std::string& schema_path, const Manifest* manifest,
                           const std::string& manifest_path) {
    if (!schema_path.empty() && schema_path != "default") return OrganSchema::load(schema_path);
    if (manifest != nullptr && !manifest->schema_ref.empty() && manifest->schema_ref != "default") {
        fs::path ref(manifest->schema_ref);
        if (ref.is_relative() && !manifest_path.empty()) ref = fs::path(manifest_path).parent_path() / ref;
        if (fs::is_regular_file(ref)) return OrganSchema::load(ref.string());
    }
    return OrganSchema::default_schema();
}

std::optional<std::string> find_case_file(const std::string& dir, const std::string& case_id) {
    for (const char* ext : {".nii.gz", ".nii"}) {
        const auto p = fs::path(dir) / (case_id + ext);
        if (fs::is_regular_file(p)) return p.string();
    }
    return std::nullopt;
}

// ---- harmonize ----

namespace {

Mask nonzero(const LabelVolume& v) {
    Mask m(v.grid());
    for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] != 0 ? 1 : 0;
    return m;
}

void add_masks(const MaskSet& set, std::vector<NamedMask>& into) {
    for (const auto& [name, mask] : set) into.push_back({name, mask});
}

struct CaseInputs {
    std::vector<NamedMask> clinical;
    std::vector<NamedMask> auxiliary;
};

CaseInputs load_case_inputs(const CaseRecord& c, const OrganSchema& schema) {
    CaseInputs in;
    for (const auto& [key, path] : c.label_paths) {
        if (key == "clinical") {
            add_masks(decompose(nifti::read_labels(path), schema), in.clinical);
        } else if (key == "auxiliary") {
            add_masks(decompose(nifti::read_labels(path), schema), in.auxiliary);
        } else if (key.rfind("aux:", 0) == 0) {
            in.auxiliary.push_back({key.substr(4), nonzero(nifti::read_labels(path))});
        } else {
            in.clinical.push_back({key, nonzero(nifti::read_labels(path))});
        }
    }
    return in;
}

}  // namespace

Outcome cmd_harmonize(const HarmonizeOptions& options) {
    const Manifest manifest = load_manifest(options.manifest);
    const OrganSchema schema = resolve_schema(options.schema, &manifest, options.manifest);
    ensure_dir(options.out);

    const std::size_t n = manifest.cases.size();
    CaseFailures failures(n);
    std::vector<std::optional<Exclusion>> exclusion(n);
    std::vector<bool> written(n, false);
    std::atomic<bool> abort{false};

    parallel_for(n, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (abort) return;
            const CaseRecord& c = manifest.cases[i];
            try {
                const auto in = load_case_inputs(c, schema);
                if (in.clinical.empty() && in.auxiliary.empty()) {
                    exclusion[i] = Exclusion{c.case_id, "no_data", "no label inputs"};
                    continue;
                }
                auto hc = harmonize_case(c.case_id, in.clinical, in.auxiliary, schema, options.policy);
                const Grid& g = hc.labels.grid();
                const CaseFacts facts{g.dims[static_cast<std::size_t>(g.axial_axis())], hc.missing_organs()};
                Manifest one;
                one.cases.push_back(c);
                const auto verdict = filter_cases(one, {{c.case_id, facts}}, options.rules);
                if (!verdict.excluded.empty()) {
                    exclusion[i] = verdict.excluded.front();
                    continue;
                }
                nifti::write(hc.labels, join(options.out, c.case_id + ".nii.gz"));
                write_file(join(options.out, c.case_id + ".provenance.json"), provenance_json(hc) + "\n");
                written[i] = true;
            } catch (...) {
                failures.record(i, c.case_id);
                if (options.strict) abort = true;
            }
        }
    });
    if (options.strict) failures.rethrow_first();

    Outcome outcome;
    failures.fill(outcome);
    std::vector<Exclusion> excluded;
    Manifest harmonized;
    harmonized.schema_ref = manifest.schema_ref;
    for (std::size_t i = 0; i < n; ++i) {
        const CaseRecord& c = manifest.cases[i];
        if (failures.message[i]) {
            excluded.push_back({c.case_id, "error", *failures.message[i]});
        } else if (exclusion[i]) {
            excluded.push_back(*exclusion[i]);
        } else if (written[i]) {
            CaseRecord out = c;
            out.label_paths = {{"labels", join(options.out, c.case_id + ".nii.gz")}};
            harmonized.cases.push_back(out);
            outcome.written.push_back(join(options.out, c.case_id + ".nii.gz"));
        }
    }
    write_file(join(options.out, "exclusions.jsonl"), exclusion_log_jsonl(excluded));
    outcome.written.push_back(join(options.out, "exclusions.jsonl"));
    if (!harmonized.cases.empty()) {
        write_file(join(options.out, "manifest.json"), dump_manifest(harmonized) + "\n");
        outcome.written.push_back(join(options.out, "manifest.json"));
    }
    return outcome;
}

// ---- evaluate ----

Outcome cmd_evaluate(const EvaluateCommandOptions& options) {
    std::optional<Manifest> manifest;
    if (!options.manifest.empty()) manifest = load_manifest(options.manifest);
    const OrganSchema schema = resolve_schema(options.schema, manifest ? &*manifest : nullptr, options.manifest);
    if (options.pred.empty() || options.ref.empty()) throw ValidationError("evaluate needs --pred and --ref");
    ensure_dir(options.out);

    std::vector<std::string> case_ids;
    if (manifest) {
        for (const auto& c : manifest->cases) case_ids.push_back(c.case_id);
    } else {
        for (const auto& f : nifti_files(options.ref)) case_ids.push_back(strip_nifti_ext(fs::path(f).filename().string()));
    }
    if (case_ids.empty()) throw ValidationError("no cases to evaluate in " + options.ref);

    const std::size_t n = case_ids.size();
    const int inner_threads = n == 1 ? std::max(1, options.threads) : 1;
    EvaluateOptions eval;
    eval.organs = options.organs;
    eval.threads = inner_threads;

    std::vector<std::vector<MetricRow>> rows(n);
    std::vector<std::optional<FprCase>> fpr(n);
    std::vector<std::optional<std::string>> row_errors(n);
    std::vector<std::exception_ptr> hard(n);

    parallel_for(n, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const std::string& id = case_ids[i];
            try {
                const auto ref_path = find_case_file(options.ref, id);
                if (!ref_path) throw IoError("missing reference file for " + id + " in " + options.ref);
                const auto pred_path = find_case_file(options.pred, id);
                if (!pred_path) throw IoError("missing prediction file for " + id + " in " + options.pred);
                const LabelVolume gt = nifti::read_labels(*ref_path);
                LabelVolume pred = nifti::read_labels(*pred_path);
                if (!pred.grid().same_geometry(gt.grid())) {
                    if (!options.resample) {
                        throw GeometryError("prediction grid of " + id + " differs from the reference (use --resample)");
                    }
                    pred = resample_labels_nearest(pred, gt.grid());
                }
                rows[i] = evaluate_case(id, gt, pred, schema, eval);
                if (manifest) {
                    const auto side = manifest->cases[i].nephrectomy_side;
                    if (side == NephrectomySide::left || side == NephrectomySide::right) {
                        fpr[i] = FprCase{id, side, removed_kidney_volume_mm3(pred, side, schema)};
                    }
                }
            } catch (const IoError& e) {
                row_errors[i] = e.what();
                hard[i] = std::current_exception();
            } catch (const FormatError& e) {
                row_errors[i] = e.what();
                hard[i] = std::current_exception();
            } catch (...) {
                hard[i] = std::current_exception();
                row_errors.at(i).reset();
            }
        }
    });

    // Geometry and computation problems are fatal; file problems are row-level.
    for (std::size_t i = 0; i < n; ++i) {
        if (hard[i] && !row_errors[i]) std::rethrow_exception(hard[i]);
    }
    if (options.strict) {
        for (const auto& h : hard) {
            if (h) std::rethrow_exception(h);
        }
    }

    Outcome outcome;
    std::vector<MetricRow> all;
    std::vector<FprCase> fpr_cases;
    nlohmann::ordered_json errors = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
        all.insert(all.end(), rows[i].begin(), rows[i].end());
        if (fpr[i]) fpr_cases.push_back(*fpr[i]);
        if (row_errors[i]) {
            errors.push_back({{"case_id", case_ids[i]}, {"error", *row_errors[i]}});
            outcome.failures.push_back(case_ids[i] + ": " + *row_errors[i]);
            if (!outcome.failure_kind) outcome.failure_kind = ErrorKind::io;
        }
    }

    nlohmann::ordered_json summary;
    summary["conventions"] = {
        {"distance_pooling", "pooled symmetric: pred-to-gt and gt-to-pred surface distances concatenated"},
        {"surface", "foreground voxels with a background or out-of-volume face neighbour; voxel-center distances"},
        {"hd95", "linear interpolation at zero-based rank 0.95*(n-1)"},
        {"masked_organs", std::vector<std::string>(eval.masked_organs.begin(), eval.masked_organs.end())},
        {"quartile_rule", report::kQuartileRule},
    };
    summary["n_cases"] = n - static_cast<std::size_t>(errors.size());
    summary["organs"] = nlohmann::ordered_json::parse(report::summary_json(report::summarize(all)))["organs"];
    if (!fpr_cases.empty()) {
        const auto r = fpr_absent_organ(fpr_cases, options.fpr_threshold_mm3);
        summary["fpr"] = {{"organ", r.organ},           {"fraction", r.fraction()},
                          {"positives", r.positives},   {"total", r.total},
                          {"threshold_mm3", r.threshold_mm3}, {"positive_cases", r.positive_cases}};
    } else {
        summary["fpr"] = nullptr;
    }
    summary["errors"] = errors;

    write_file(join(options.out, "metrics.csv"), to_csv(all));
    write_file(join(options.out, "metrics.json"), to_json(all) + "\n");
    write_file(join(options.out, "summary.json"), summary.dump(2) + "\n");
    outcome.written = {join(options.out, "metrics.csv"), join(options.out, "metrics.json"),
                       join(options.out, "summary.json")};
    return outcome;
}

// ---- statistics ----

std::string cmd_compare(const CompareOptions& options) {
    const auto a = load_metrics_csv(options.table_a);
    const auto b = load_metrics_csv(options.table_b);
    const auto name = [](const std::string& p) { return fs::path(p).stem().string(); };
    std::string name_a = name(options.table_a), name_b = name(options.table_b);
    if (name_a == name_b) {
        name_a = fs::path(options.table_a).parent_path().filename().string() + "/" + name_a;
        name_b = fs::path(options.table_b).parent_path().filename().string() + "/" + name_b;
    }
    const auto text = stats::compare_tables(a, b, options.metric, options.paired, name_a, name_b).to_json();
    if (!options.out.empty()) write_file(options.out, text + "\n");
    return text;
}

std::string cmd_subgroup(const SubgroupOptions& options) {
    const auto rows = load_metrics_csv(options.metrics);
    const auto manifest = load_manifest(options.manifest);
    stats::SubgroupSpec spec;
    spec.dimension = stats::dimension_from_string(options.by);
    spec.min_n = options.min_n;
    const auto text = stats::subgroup_analysis(rows, manifest, spec, options.metric).to_json();
    if (!options.out.empty()) write_file(options.out, text + "\n");
    return text;
}

std::string cmd_split(const SplitOptions& options) {
    const auto manifest = load_manifest(options.manifest);
    const auto ratio = split::parse_ratio(options.ratio);
    std::vector<stats::SubgroupDimension> strat;
    for (const auto& s : options.stratify) strat.push_back(stats::dimension_from_string(s));
    std::string text;
    if (options.folds > 0) {
        const auto plans = split::make_cv_folds(manifest, options.folds, ratio, options.seed, strat);
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& p : plans) arr.push_back(nlohmann::ordered_json::parse(p.to_json()));
        text = arr.dump(2);
    } else {
        text = split::make_split(manifest, ratio, options.seed, strat).to_json();
    }
    if (!options.out.empty()) write_file(options.out, text + "\n");
    return text;
}

// ---- post-processing ----

Outcome cmd_postprocess(const PostprocessOptions& options) {
    const auto conn = connectivity_from_int(options.connectivity);
    std::vector<std::string> inputs;
    if (fs::is_directory(options.pred)) {
        inputs = nifti_files(options.pred);
    } else if (fs::is_regular_file(options.pred)) {
        inputs.push_back(options.pred);
    } else {
        throw IoError("no such file or directory: " + options.pred);
    }
    ensure_dir(options.out);
    CaseFailures failures(inputs.size());
    parallel_for(inputs.size(), options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto name = fs::path(inputs[i]).filename().string();
            try {
                const auto cleaned = keep_largest_component_per_label(nifti::read_labels(inputs[i]), conn);
                nifti::write(cleaned, join(options.out, name));
            } catch (...) {
                failures.record(i, strip_nifti_ext(name));
            }
        }
    });
    Outcome outcome;
    failures.fill(outcome);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!failures.message[i]) outcome.written.push_back(join(options.out, fs::path(inputs[i]).filename().string()));
    }
    return outcome;
}

// ---- review selection ----

std::string cmd_review_select(const ReviewSelectOptions& options) {
    const auto manifest = load_manifest(options.manifest);
    std::vector<std::string> patients;
    std::map<std::string, const CaseRecord*> first_case;
    for (const auto& c : manifest.cases) {
        if (first_case.emplace(c.patient_id, &c).second) patients.push_back(c.patient_id);
    }
    if (options.n == 0 || options.n > patients.size()) {
        throw ValidationError("cannot select " + std::to_string(options.n) + " patients from " +
                              std::to_string(patients.size()));
    }
    split::SplitRng rng(options.seed);
    rng.shuffle(patients);
    patients.resize(options.n);
    std::set<std::string> chosen(patients.begin(), patients.end());
    Manifest out;
    out.schema_ref = manifest.schema_ref;
    for (const auto& c : manifest.cases) {
        if (chosen.count(c.patient_id) && first_case.at(c.patient_id) == &c) out.cases.push_back(c);
    }
    const auto text = dump_manifest(out);
    if (!options.out.empty()) write_file(options.out, text + "\n");
    return text;
}

}  // namespace oar::cli
