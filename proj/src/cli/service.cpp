#include "oar/cli/service.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "oar/cli/commands.hpp"
#include "oar/cli/render.hpp"
#include "oar/likert.hpp"
#include "oar/nifti.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace oar::cli {

namespace {

struct LoadedCase {
    std::optional<ImageVolume> image;
    std::optional<LabelVolume> labels;
    std::map<LabelCode, std::int64_t> voxel_counts;  // present codes only
    Grid grid;
};

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& category, const std::string& message) {
    send_json(res, {{"error", {{"status", status}, {"category", category}, {"message", message}}}}, status);
}

}  // namespace

struct ReviewService::Impl {
    ServiceConfig cfg;
    httplib::Server server;
    std::thread thread;
    report::ScoresFile scores;
    std::mutex load_mutex;
    std::map<std::string, std::shared_ptr<const LoadedCase>> cache;

    explicit Impl(ServiceConfig c) : cfg(std::move(c)), scores(cfg.scores_path) {
        if (cfg.scores_path.empty()) throw ValidationError("review service needs a scores file path");
        routes();
    }

    const CaseRecord& record(const std::string& id) const {
        const auto* c = cfg.manifest.find(id);
        if (c == nullptr) throw ValidationError("unknown case '" + id + "'", "not-found");
        return *c;
    }

    std::optional<std::string> label_path(const CaseRecord& c) const {
        if (!cfg.labels_dir.empty()) return find_case_file(cfg.labels_dir, c.case_id);
        for (const char* key : {"labels", "clinical"}) {
            auto it = c.label_paths.find(key);
            if (it != c.label_paths.end()) return it->second;
        }
        return std::nullopt;
    }

    std::shared_ptr<const LoadedCase> load(const std::string& id) {
        const CaseRecord& c = record(id);
        std::lock_guard lock(load_mutex);
        if (auto it = cache.find(id); it != cache.end()) return it->second;
        auto lc = std::make_shared<LoadedCase>();
        if (!c.image_path.empty() && fs::is_regular_file(c.image_path)) lc->image = nifti::read_image(c.image_path);
        if (const auto lp = label_path(c); lp && fs::is_regular_file(*lp)) lc->labels = nifti::read_labels(*lp);
        if (!lc->image && !lc->labels) throw IoError("no readable image or labels for case " + id);
        if (lc->image && lc->labels && lc->image->grid().dims != lc->labels->grid().dims) {
            throw GeometryError("image and labels of case " + id + " have different dimensions");
        }
        lc->grid = lc->image ? lc->image->grid() : lc->labels->grid();
        if (lc->labels) {
            for (const auto v : lc->labels->voxels()) {
                if (v != 0) ++lc->voxel_counts[v];
            }
        }
        cache.emplace(id, lc);
        return lc;
    }

    std::vector<report::LikertRecord> replay() const {
        if (!fs::exists(scores.path())) return {};
        return scores.load(&cfg.schema).records;
    }

    std::vector<std::string> present_organs(const LoadedCase& lc) const {
        std::vector<std::string> out;
        for (const auto& organ : cfg.schema.organs()) {
            if (lc.voxel_counts.count(organ.label_code)) out.push_back(organ.name);
        }
        return out;
    }

    // Maps library errors to HTTP statuses.
    template <typename Fn>
    void guarded(httplib::Response& res, int validation_status, Fn&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            int status = 500;
            if (e.category() == "not-found") {
                status = 404;
            } else if (e.kind() == ErrorKind::validation) {
                status = validation_status;
            }
            send_error(res, status, e.category(), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    }

    void routes() {
        server.Get("/api/cases", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, 400, [&] {
                std::map<std::string, std::set<std::string>> scored;
                for (const auto& r : replay()) scored[r.case_id].insert(r.organ);
                json cases = json::array();
                for (const auto& c : cfg.manifest.cases) {
                    const auto lc = load(c.case_id);
                    const auto present = present_organs(*lc);
                    std::size_t done = 0;
                    for (const auto& o : present) done += scored[c.case_id].count(o);
                    cases.push_back({{"case_id", c.case_id},
                                     {"patient_id", c.patient_id},
                                     {"dataset", c.dataset},
                                     {"dims", lc->grid.dims},
                                     {"organs_present", present.size()},
                                     {"organs_scored", done}});
                }
                send_json(res, {{"cases", cases}});
            });
        });

        server.Get("/api/cases/:id/meta", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, 400, [&] {
                const auto& id = req.path_params.at("id");
                const CaseRecord& c = record(id);
                const auto lc = load(id);
                json slices = json::object(), shapes = json::object();
                for (auto axis : {SliceAxis::axial, SliceAxis::coronal, SliceAxis::sagittal}) {
                    slices[to_string(axis)] = slice_count(lc->grid, axis);
                    const auto [w, h] = slice_shape(lc->grid, axis);
                    shapes[to_string(axis)] = {w, h};
                }
                send_json(res, {{"case_id", c.case_id},
                                {"patient_id", c.patient_id},
                                {"dataset", c.dataset},
                                {"age_years", c.age_years},
                                {"sex", to_string(c.sex)},
                                {"tumor_type", to_string(c.tumor_type)},
                                {"dims", lc->grid.dims},
                                {"spacing", lc->grid.spacing},
                                {"origin", lc->grid.origin},
                                {"axis_codes", lc->grid.axis_codes},
                                {"slices", slices},
                                {"slice_shape", shapes},
                                {"window", cfg.default_window},
                                {"level", cfg.default_level},
                                {"has_image", lc->image.has_value()},
                                {"has_labels", lc->labels.has_value()}});
            });
        });

        server.Get("/api/cases/:id/organs", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, 400, [&] {
                const auto lc = load(req.path_params.at("id"));
                json organs = json::array();
                for (const auto& o : cfg.schema.organs()) {
                    const auto it = lc->voxel_counts.find(o.label_code);
                    const std::int64_t n = it == lc->voxel_counts.end() ? 0 : it->second;
                    organs.push_back({{"organ", o.name},
                                      {"label_code", o.label_code},
                                      {"organ_type", to_string(o.organ_type)},
                                      {"present", n > 0},
                                      {"voxels", n},
                                      {"color", color_hex(o.label_code)}});
                }
                send_json(res, {{"organs", organs}});
            });
        });

        server.Get("/api/cases/:id/slices/:axis/:index", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, 400, [&] {
                const auto lc = load(req.path_params.at("id"));
                RenderRequest rr;
                rr.axis = slice_axis_from_string(req.path_params.at("axis"));
                rr.index = parse_int(req.path_params.at("index"), "slice index");
                rr.window = req.has_param("window") ? parse_double(req.get_param_value("window"), "window")
                                                    : cfg.default_window;
                rr.level = req.has_param("level") ? parse_double(req.get_param_value("level"), "level")
                                                  : cfg.default_level;
                rr.mode = render_mode_from_string(req.get_param_value("mode"));
                rr.overlays = overlay_codes(req.has_param("overlays") ? req.get_param_value("overlays") : "all", *lc);
                const auto raster = render_slice(lc->image ? &*lc->image : nullptr,
                                                 lc->labels ? &*lc->labels : nullptr, rr);
                res.set_content(encode_png(raster), "image/png");
            });
        });

        server.Post("/api/cases/:id/scores", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, 422, [&] {
                const auto& id = req.path_params.at("id");
                (void)record(id);
                const auto body = json::parse(req.body, nullptr, false);
                if (body.is_discarded() || !body.is_object()) throw ValidationError("body must be a JSON object");
                report::LikertRecord r;
                r.case_id = id;
                r.rater_id = string_field(body, "rater_id");
                r.organ = string_field(body, "organ");
                if (!body.contains("score") || !body["score"].is_number_integer()) {
                    throw ValidationError("score must be an integer from 1 to 5");
                }
                const auto score = body["score"].get<std::int64_t>();
                if (score < 1 || score > 5) throw ValidationError("score must be an integer from 1 to 5");
                r.score = static_cast<int>(score);
                if (body.contains("comment") && !body["comment"].is_null()) {
                    if (!body["comment"].is_string()) throw ValidationError("comment must be a string");
                    r.comment = body["comment"].get<std::string>();
                }
                r.timestamp = report::utc_timestamp();
                report::validate(r, &cfg.schema);
                const auto lc = load(id);
                if (lc->labels && !lc->voxel_counts.count(cfg.schema.at(r.organ).label_code)) {
                    throw ValidationError("organ '" + r.organ + "' is not present in case " + id);
                }
                scores.append(r);
                send_json(res, json::parse(report::to_json_line(r)), 201);
            });
        });

        server.Get("/api/summary/likert", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, 400, [&] {
                const auto text = report::likert_summary_json(report::likert_summarize(replay()));
                res.set_content(text, "application/json");
            });
        });

        if (!cfg.static_dir.empty()) {
            if (!server.set_mount_point("/", cfg.static_dir)) {
                throw IoError("static asset directory not found: " + cfg.static_dir);
            }
        } else {
            server.Get("/", [](const httplib::Request&, httplib::Response& res) {
                res.set_content("<!doctype html><title>oar-evalkit review</title>"
                                "<p>No frontend assets configured. The API lives under /api/.</p>",
                                "text/html");
            });
        }
    }

    static std::int64_t parse_int(const std::string& s, const char* what) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw ValidationError(std::string("bad ") + what + " '" + s + "'");
        return v;
    }

    static double parse_double(const std::string& s, const char* what) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() || !std::isfinite(v)) {
            throw ValidationError(std::string("bad ") + what + " '" + s + "'");
        }
        return v;
    }

    static std::string string_field(const json& body, const char* key) {
        if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
            throw ValidationError(std::string("missing or empty string field '") + key + "'");
        }
        return body[key].get<std::string>();
    }

    std::set<LabelCode> overlay_codes(const std::string& spec, const LoadedCase& lc) const {
        std::set<LabelCode> out;
        if (spec == "none" || spec.empty()) return out;
        if (spec == "all") {
            for (const auto& [code, n] : lc.voxel_counts) out.insert(code);
            return out;
        }
        std::stringstream ss(spec);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (!name.empty()) out.insert(cfg.schema.at(name).label_code);
        }
        return out;
    }
};

ReviewService::ReviewService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

ReviewService::~ReviewService() { stop(); }

int ReviewService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ReviewService::run(const std::string& host, int port) {
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->server.listen_after_bind();
}

void ReviewService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace oar::cli
