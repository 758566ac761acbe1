#include "oar/split.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace oar::split {

SplitRng::SplitRng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t SplitRng::below(std::uint64_t bound) {
    if (bound == 0) throw ComputationError("empty draw range", "split");
    // Reject the low values that would bias r % bound.
    const std::uint64_t threshold = (std::numeric_limits<std::uint64_t>::max() - bound + 1) % bound;
    for (;;) {
        const std::uint64_t r = engine_();
        if (r >= threshold) return r % bound;
    }
}

std::vector<std::string> bucket_names(std::size_t count) {
    if (count == 2) return {"train", "test"};
    if (count == 3) return {"train", "val", "test"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back("bucket" + std::to_string(i));
    return out;
}

std::map<std::string, std::size_t> SplitPlan::bucket_sizes() const {
    std::map<std::string, std::size_t> out;
    for (const auto& name : bucket_names(ratio.size())) out[name] = 0;
    for (const auto& [case_id, bucket] : assignments) ++out[bucket];
    return out;
}

std::string SplitPlan::to_json() const {
    nlohmann::ordered_json doc;
    doc["seed"] = seed;
    doc["ratio"] = ratio;
    doc["stratify"] = stratify;
    doc["rng"] = "mt19937_64, rejection-sampled bounded draws, Fisher-Yates";
    nlohmann::ordered_json assign = nlohmann::ordered_json::object();
    for (const auto& [case_id, bucket] : assignments) assign[case_id] = bucket;
    doc["assignments"] = std::move(assign);
    return doc.dump(2);
}

std::vector<std::int64_t> largest_remainder(std::int64_t total, const std::vector<std::int64_t>& ratio) {
    if (ratio.empty()) throw ValidationError("empty ratio");
    std::int64_t denom = 0;
    for (auto r : ratio) {
        if (r <= 0) throw ValidationError("ratio components must be positive");
        denom += r;
    }
    std::vector<std::int64_t> out(ratio.size());
    std::vector<std::pair<std::int64_t, std::size_t>> rem;  // (remainder numerator, index)
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        out[i] = total * ratio[i] / denom;
        assigned += out[i];
        rem.emplace_back(total * ratio[i] % denom, i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[rem[i].second];
    return out;
}

std::vector<std::int64_t> parse_ratio(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(part, &used);
            if (used != part.size() || v <= 0) throw std::invalid_argument(part);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ValidationError("bad ratio '" + text + "' (expected positive integers like 132:21:36)");
        }
    }
    if (out.size() < 2) throw ValidationError("ratio needs at least two components: '" + text + "'");
    return out;
}

namespace {

struct Patient {
    std::string id;
    std::vector<std::size_t> cases;
    std::string stratum;
};

// a_num / a_den > b_num / b_den for positive denominators.
bool share_greater(std::int64_t a_num, std::int64_t a_den, std::int64_t b_num, std::int64_t b_den) {
    return a_num * b_den > b_num * a_den;
}

}  // namespace

SplitPlan make_split(const Manifest& manifest, const std::vector<std::int64_t>& ratio, std::uint64_t seed,
                     const std::vector<stats::SubgroupDimension>& stratify) {
    if (manifest.cases.empty()) throw ValidationError("cannot split an empty manifest");
    const auto total = static_cast<std::int64_t>(manifest.cases.size());
    const auto targets = largest_remainder(total, ratio);
    const std::size_t nb = ratio.size();

    std::vector<Patient> patients;
    std::map<std::string, std::size_t> patient_index;
    for (std::size_t i = 0; i < manifest.cases.size(); ++i) {
        const auto& c = manifest.cases[i];
        auto [it, inserted] = patient_index.try_emplace(c.patient_id, patients.size());
        if (inserted) {
            Patient p;
            p.id = c.patient_id;
            for (auto d : stratify) p.stratum += stats::group_of(c, d).value_or("unknown") + "|";
            patients.push_back(std::move(p));
        }
        patients[it->second].cases.push_back(i);
    }

    SplitRng rng(seed);
    rng.shuffle(patients);
    std::stable_sort(patients.begin(), patients.end(),
                     [](const Patient& a, const Patient& b) { return a.cases.size() > b.cases.size(); });

    std::map<std::string, std::int64_t> stratum_size;
    for (const auto& p : patients) stratum_size[p.stratum] += static_cast<std::int64_t>(p.cases.size());
    std::map<std::string, std::vector<std::int64_t>> stratum_target;
    std::map<std::string, std::vector<std::int64_t>> stratum_left;
    for (const auto& [s, n] : stratum_size) {
        stratum_target[s] = largest_remainder(n, ratio);
        stratum_left[s] = stratum_target[s];
    }

    std::vector<std::int64_t> left = targets;
    const auto names = bucket_names(nb);
    std::vector<std::string> bucket_of_case(manifest.cases.size());
    for (const auto& p : patients) {
        const auto need = static_cast<std::int64_t>(p.cases.size());
        auto& sl = stratum_left[p.stratum];
        const auto& st = stratum_target[p.stratum];
        std::optional<std::size_t> best;
        for (std::size_t b = 0; b < nb; ++b) {
            if (left[b] < need) continue;
            if (!best) {
                best = b;
                continue;
            }
            const std::size_t c = *best;
            if (!stratify.empty()) {
                const std::int64_t tb = std::max<std::int64_t>(st[b], 1);
                const std::int64_t tc = std::max<std::int64_t>(st[c], 1);
                if (share_greater(sl[b], tb, sl[c], tc)) {
                    best = b;
                    continue;
                }
                if (share_greater(sl[c], tc, sl[b], tb)) continue;
            }
            if (share_greater(left[b], targets[b], left[c], targets[c])) best = b;
        }
        if (!best) {
            throw ComputationError("patient " + p.id + " with " + std::to_string(need) +
                                       " cases does not fit any remaining bucket",
                                   "split");
        }
        left[*best] -= need;
        sl[*best] -= need;
        for (auto ci : p.cases) bucket_of_case[ci] = names[*best];
    }

    SplitPlan plan;
    plan.seed = seed;
    plan.ratio = ratio;
    for (auto d : stratify) plan.stratify.push_back(stats::to_string(d));
    for (std::size_t i = 0; i < manifest.cases.size(); ++i) {
        plan.assignments.emplace_back(manifest.cases[i].case_id, bucket_of_case[i]);
    }
    return plan;
}

std::vector<SplitPlan> make_cv_folds(const Manifest& manifest, int k, const std::vector<std::int64_t>& ratio,
                                     std::uint64_t seed, const std::vector<stats::SubgroupDimension>& stratify) {
    if (k < 2) throw ValidationError("cross-validation needs k >= 2");
    std::vector<SplitPlan> out;
    for (int i = 0; i < k; ++i) out.push_back(make_split(manifest, ratio, seed + static_cast<std::uint64_t>(i), stratify));
    return out;
}

}  // namespace oar::split
