#pragma once

#include <memory>
#include <string>

#include "oar/manifest.hpp"
#include "oar/schema.hpp"

namespace oar::cli {

struct ServiceConfig {
    Manifest manifest;
    OrganSchema schema;
    /// Directory of <case_id>.nii[.gz] label volumes to overlay. When empty,
    /// each case's label_paths "labels" entry is used, then "clinical".
    std::string labels_dir;
    /// JSON-lines score file; created on first append.
    std::string scores_path;
    /// Frontend assets served at "/" when non-empty.
    std::string static_dir;
    double default_window = 400.0;
    double default_level = 40.0;
};

/// HTTP review service.
///
///   GET  /api/cases
///   GET  /api/cases/{id}/meta
///   GET  /api/cases/{id}/organs
///   GET  /api/cases/{id}/slices/{axis}/{index}?window=&level=&overlays=&mode=   (PNG)
///   POST /api/cases/{id}/scores   {rater_id, organ, score, comment?}
///   GET  /api/summary/likert
///
/// Volumes load lazily and are cached read-only; score appends are serialized.
class ReviewService {
public:
    explicit ReviewService(ServiceConfig config);
    ~ReviewService();
    ReviewService(const ReviewService&) = delete;
    ReviewService& operator=(const ReviewService&) = delete;

    /// Binds to host:port (port 0 picks a free one) and serves on a
    /// background thread. Returns the bound port. Throws IoError on failure.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Binds and serves on the calling thread until stop() is called.
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace oar::cli
