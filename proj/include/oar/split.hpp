#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "oar/manifest.hpp"
#include "oar/stats.hpp"

namespace oar::split {

/// Deterministic generator for splits: std::mt19937_64 (whose output
/// sequence is fixed by the C++ standard) with unbiased bounded draws by
/// rejection, so plans reproduce across platforms and standard libraries.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed);
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    /// Fisher-Yates, drawing j = below(i + 1) for i = n-1 down to 1.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Bucket names: train/test for two-way ratios, train/val/test for
/// three-way ratios, bucket<i> otherwise.
std::vector<std::string> bucket_names(std::size_t count);

struct SplitPlan {
    std::uint64_t seed = 0;
    std::vector<std::int64_t> ratio;
    std::vector<std::string> stratify;
    /// case_id -> bucket name, in manifest order.
    std::vector<std::pair<std::string, std::string>> assignments;

    std::map<std::string, std::size_t> bucket_sizes() const;
    std::string to_json() const;
};

/// Largest-remainder apportionment of `total` items to the ratio. Ties in
/// the remainder go to the earlier bucket.
std::vector<std::int64_t> largest_remainder(std::int64_t total, const std::vector<std::int64_t>& ratio);

/// Patient-level split. Patients are shuffled with SplitRng(seed), ordered
/// by descending case count (stable), and each is placed in the bucket with
/// the largest remaining share of its target (per stratum first when
/// stratifying) that still has room. Final bucket sizes equal the
/// largest-remainder targets. Throws ComputationError("split") when a
/// patient cannot be placed.
SplitPlan make_split(const Manifest& manifest, const std::vector<std::int64_t>& ratio, std::uint64_t seed,
                     const std::vector<stats::SubgroupDimension>& stratify = {});

/// k independent splits with seeds seed, seed + 1, ..., seed + k - 1.
std::vector<SplitPlan> make_cv_folds(const Manifest& manifest, int k, const std::vector<std::int64_t>& ratio,
                                     std::uint64_t seed,
                                     const std::vector<stats::SubgroupDimension>& stratify = {});

/// Parses "132:21:36" into {132, 21, 36}.
std::vector<std::int64_t> parse_ratio(const std::string& text);

}  // namespace oar::split
