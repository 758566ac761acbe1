#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "oar/schema.hpp"

namespace oar::report {

struct LikertRecord {
    std::string case_id;
    std::string organ;
    std::string rater_id;
    int score = 0;  // 1..5
    std::string timestamp;  // ISO-8601 UTC
    std::optional<std::string> comment;
};

/// Throws ValidationError when the score is outside 1..5, ids are empty, or
/// (with a schema) the organ is not in the catalog.
void validate(const LikertRecord& record, const OrganSchema* schema = nullptr);

std::string to_json_line(const LikertRecord& record);

struct LikertParse {
    std::vector<LikertRecord> records;
    /// "line N: reason" for every rejected line.
    std::vector<std::string> rejected;
};

/// Parses JSON-lines; invalid lines are rejected one by one.
LikertParse parse_jsonl(const std::string& text, const OrganSchema* schema = nullptr);

enum class Usability { acceptable_minor_mods, clinically_usable, not_usable };
std::string to_string(Usability u);
/// >= 4 acceptable with minor modifications, >= 3 clinically usable, else not usable.
Usability classify(double combined_mean);

struct RaterStats {
    std::string rater_id;
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
};

struct LikertSummary {
    std::string organ;
    std::vector<RaterStats> raters;  // sorted by rater_id
    /// Mean over all (case, rater) scores.
    double combined_mean = 0.0;
    std::size_t n_scores = 0;
    std::size_t n_cases = 0;
    Usability usability = Usability::not_usable;
    /// combined_mean >= 3.
    bool clinically_usable = false;
    /// Rater means differ by more than 1.0.
    bool disagreement = false;
};

std::vector<LikertSummary> likert_summarize(const std::vector<LikertRecord>& records);
std::string likert_summary_json(const std::vector<LikertSummary>& summaries);

/// Append-only JSON-lines score file. Appends are serialized; each record
/// is flushed before append() returns.
class ScoresFile {
public:
    explicit ScoresFile(std::string path);

    void append(const LikertRecord& record);
    /// Replays the file from disk.
    LikertParse load(const OrganSchema* schema = nullptr) const;
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
    mutable std::mutex mutex_;
};

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

}  // namespace oar::report
