#include "oar/cli/app.hpp"

#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "oar/cli/commands.hpp"
#include "oar/cli/service.hpp"
#include "oar/parallel.hpp"

namespace oar::cli {

namespace {

const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::validation: return "validation";
        case ErrorKind::io: return "io";
        case ErrorKind::computation: return "computation";
    }
    return "computation";
}

int report_error(std::ostream& err, bool as_json, ErrorKind kind, const std::string& category,
                 const std::string& message) {
    const int code = static_cast<int>(kind);
    if (as_json) {
        nlohmann::ordered_json j;
        j["error"] = {{"kind", kind_name(kind)}, {"exit_code", code}, {"category", category}, {"message", message}};
        err << j.dump() << "\n";
    } else {
        err << "oar-evalkit: " << kind_name(kind) << " error (" << category << "): " << message << "\n";
    }
    return code;
}

// Prints an outcome; a non-empty failure list decides the exit code when `fatal`.
int finish(const Outcome& o, std::ostream& out, std::ostream& err, bool as_json, bool fatal) {
    out << "wrote " << o.written.size() << " file(s)\n";
    if (o.failures.empty()) return 0;
    const int code = fatal && o.failure_kind ? static_cast<int>(*o.failure_kind) : 0;
    if (as_json) {
        nlohmann::ordered_json j;
        j["failures"] = o.failures;
        j["exit_code"] = code;
        err << j.dump() << "\n";
    } else {
        for (const auto& f : o.failures) err << "oar-evalkit: failed: " << f << "\n";
    }
    return code;
}

int threads_or_default(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return default_thread_count(hw == 0 ? 1 : static_cast<int>(hw));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Evaluation toolkit for pediatric organ-at-risk segmentation", "oar-evalkit"};
    app.require_subcommand(1);
    // Global flags are accepted after the subcommand too.
    app.fallthrough();
    bool json_errors = false;
    app.add_flag("--json-errors", json_errors, "Print errors as JSON on stderr");

    std::string manifest, schema, pred, ref, outp, ratio = "132:21:36", by = "age_group", metric = "dsc";
    std::string scores, host = "127.0.0.1", static_dir, metrics;
    int threads = 0, port = 8080, folds = 0, connectivity = 26;
    std::uint64_t seed = 0;
    bool paired = false, resample = false, strict = false;
    std::vector<std::string> organs, stratify, tables;
    std::size_t n_select = 15, min_n = 3;
    double fpr_threshold = 0.0, window = 400.0, level = 40.0;
    HarmonizeOptions hopt;

    auto* harmonize = app.add_subcommand("harmonize", "Merge, complement, resolve overlaps and filter cases");
    harmonize->add_option("--manifest", manifest, "Manifest JSON")->required();
    harmonize->add_option("--schema", schema, "Organ schema JSON (default catalog when omitted)");
    harmonize->add_option("--out", outp, "Output directory")->required();
    harmonize->add_option("--threads", threads, "Worker threads (default: OAR_EVALKIT_THREADS or all cores)");
    harmonize->add_flag("--strict", strict, "Abort on the first failing case");
    harmonize->add_option("--min-slices", hopt.rules.slice_lo, "Smallest accepted axial slice count");
    harmonize->add_option("--max-slices", hopt.rules.slice_hi, "Largest accepted axial slice count");
    harmonize->add_option("--max-missing", hopt.rules.max_missing, "Most absent organs a case may have");

    auto* evaluate = app.add_subcommand("evaluate", "Compute DSC, HD95, MSD and FPR");
    evaluate->add_option("--pred", pred, "Prediction directory")->required();
    evaluate->add_option("--ref", ref, "Reference directory")->required();
    evaluate->add_option("--out", outp, "Output directory")->required();
    evaluate->add_option("--manifest", manifest, "Manifest JSON (case list, nephrectomy sides)");
    evaluate->add_option("--schema", schema, "Organ schema JSON");
    evaluate->add_option("--threads", threads, "Worker threads");
    evaluate->add_option("--organs", organs, "Organs to report (default: all)")->delimiter(',');
    evaluate->add_option("--fpr-threshold", fpr_threshold, "Removed-kidney volume (mm^3) counted as positive");
    evaluate->add_flag("--resample", resample, "Regrid predictions onto the reference grid");
    evaluate->add_flag("--strict", strict, "Fail on missing prediction files");

    auto* compare = app.add_subcommand("compare", "Wilcoxon comparison of two metric tables");
    compare->add_option("tables", tables, "Two metrics.csv files")->required()->expected(2);
    compare->add_option("--metric", metric, "dsc, hd95 or msd");
    compare->add_flag("--paired", paired, "Signed-rank test on matched (case, organ) rows");
    compare->add_option("--out", outp, "Report JSON path (stdout when omitted)");

    auto* subgroup = app.add_subcommand("subgroup", "Rank-sum subgroup robustness analysis");
    subgroup->add_option("--metrics", metrics, "metrics.csv")->required();
    subgroup->add_option("--manifest", manifest, "Manifest JSON")->required();
    subgroup->add_option("--by", by, "sex, tumor_type, iv_contrast or age_group");
    subgroup->add_option("--metric", metric, "dsc, hd95 or msd");
    subgroup->add_option("--min-n", min_n, "Smallest group size that is tested");
    subgroup->add_option("--out", outp, "Report JSON path (stdout when omitted)");

    auto* splitc = app.add_subcommand("split", "Patient-level train/val/test split");
    splitc->add_option("--manifest", manifest, "Manifest JSON")->required();
    splitc->add_option("--ratio", ratio, "Ratio such as 132:21:36");
    splitc->add_option("--seed", seed, "Random seed");
    splitc->add_option("--stratify", stratify, "Dimensions to stratify by")->delimiter(',');
    splitc->add_option("--folds", folds, "Number of cross-validation splits");
    splitc->add_option("--out", outp, "Plan JSON path (stdout when omitted)");

    auto* post = app.add_subcommand("postprocess", "Keep the largest connected component per label");
    post->add_option("--pred", pred, "Label file or directory")->required();
    post->add_option("--out", outp, "Output directory")->required();
    post->add_option("--connectivity", connectivity, "6, 18 or 26");
    post->add_option("--threads", threads, "Worker threads");

    auto* review = app.add_subcommand("review", "Clinician review workflow");
    review->require_subcommand(1);
    review->fallthrough();
    auto* select = review->add_subcommand("select", "Sample cases for review");
    select->add_option("--manifest", manifest, "Manifest JSON")->required();
    select->add_option("--n", n_select, "Number of patients");
    select->add_option("--seed", seed, "Random seed");
    select->add_option("--out", outp, "Selected manifest path (stdout when omitted)");
    auto* serve = review->add_subcommand("serve", "Run the review HTTP service");
    serve->add_option("--manifest", manifest, "Manifest JSON")->required();
    serve->add_option("--schema", schema, "Organ schema JSON");
    serve->add_option("--pred", pred, "Directory of label volumes to overlay");
    serve->add_option("--scores", scores, "Scores JSON-lines file")->required();
    serve->add_option("--static", static_dir, "Frontend asset directory");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    serve->add_option("--window", window, "Default window (HU)");
    serve->add_option("--level", level, "Default level (HU)");

    auto* schema_cmd = app.add_subcommand("schema", "Print the organ schema as JSON");
    schema_cmd->add_option("--schema", schema, "Schema file to validate and print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        return report_error(err, json_errors, ErrorKind::validation, "usage", e.what());
    }

    try {
        if (harmonize->parsed()) {
            hopt.manifest = manifest;
            hopt.schema = schema;
            hopt.out = outp;
            hopt.threads = threads_or_default(threads);
            hopt.strict = strict;
            return finish(cmd_harmonize(hopt), out, err, json_errors, true);
        }
        if (evaluate->parsed()) {
            EvaluateCommandOptions o;
            o.manifest = manifest;
            o.schema = schema;
            o.pred = pred;
            o.ref = ref;
            o.out = outp;
            o.threads = threads_or_default(threads);
            o.resample = resample;
            o.strict = strict;
            o.organs = organs;
            o.fpr_threshold_mm3 = fpr_threshold;
            return finish(cmd_evaluate(o), out, err, json_errors, strict);
        }
        if (compare->parsed()) {
            const auto text = cmd_compare({tables[0], tables[1], outp, metric_kind_from_string(metric), paired});
            if (outp.empty()) out << text << "\n";
            return 0;
        }
        if (subgroup->parsed()) {
            const auto text = cmd_subgroup({metrics, manifest, outp, by, metric_kind_from_string(metric), min_n});
            if (outp.empty()) out << text << "\n";
            return 0;
        }
        if (splitc->parsed()) {
            const auto text = cmd_split({manifest, outp, ratio, seed, stratify, folds});
            if (outp.empty()) out << text << "\n";
            return 0;
        }
        if (post->parsed()) {
            return finish(cmd_postprocess({pred, outp, connectivity, threads_or_default(threads)}), out, err,
                          json_errors, true);
        }
        if (select->parsed()) {
            const auto text = cmd_review_select({manifest, outp, n_select, seed});
            if (outp.empty()) out << text << "\n";
            return 0;
        }
        if (serve->parsed()) {
            ServiceConfig cfg;
            cfg.manifest = load_manifest(manifest);
            cfg.schema = resolve_schema(schema, &cfg.manifest, manifest);
            cfg.labels_dir = pred;
            cfg.scores_path = scores;
            cfg.static_dir = static_dir;
            cfg.default_window = window;
            cfg.default_level = level;
            ReviewService service(std::move(cfg));
            out << "serving on http://" << host << ":" << port << "\n" << std::flush;
            service.run(host, port);
            return 0;
        }
        if (schema_cmd->parsed()) {
            const OrganSchema s = schema.empty() ? OrganSchema::default_schema() : OrganSchema::load(schema);
            out << s.to_json() << "\n";
            return 0;
        }
    } catch (const Error& e) {
        return report_error(err, json_errors, e.kind(), e.category(), e.what());
    } catch (const std::exception& e) {
        return report_error(err, json_errors, ErrorKind::computation, "internal", e.what());
    }
    return 0;
}

}  // namespace oar::cli
