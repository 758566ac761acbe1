#include "oar/likert.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oar/stats.hpp"

namespace oar::report {

void validate(const LikertRecord& record, const OrganSchema* schema) {
    if (record.score < 1 || record.score > 5) {
        throw ValidationError("score must be an integer in 1..5, got " + std::to_string(record.score), "score");
    }
    if (record.case_id.empty()) throw ValidationError("case_id is required", "score");
    if (record.rater_id.empty()) throw ValidationError("rater_id is required", "score");
    if (record.organ.empty()) throw ValidationError("organ is required", "score");
    if (schema != nullptr && schema->find(record.organ) == nullptr) {
        throw ValidationError("unknown organ '" + record.organ + "'", "score");
    }
}

std::string to_json_line(const LikertRecord& r) {
    nlohmann::ordered_json j;
    j["case_id"] = r.case_id;
    j["organ"] = r.organ;
    j["rater_id"] = r.rater_id;
    j["score"] = r.score;
    j["timestamp"] = r.timestamp;
    if (r.comment) j["comment"] = *r.comment;
    return j.dump();
}

LikertParse parse_jsonl(const std::string& text, const OrganSchema* schema) {
    LikertParse out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            LikertRecord r;
            r.case_id = j.at("case_id").get<std::string>();
            r.organ = j.at("organ").get<std::string>();
            r.rater_id = j.at("rater_id").get<std::string>();
            const auto& s = j.at("score");
            if (!s.is_number_integer()) throw ValidationError("score must be an integer", "score");
            r.score = s.get<int>();
            r.timestamp = j.value("timestamp", std::string{});
            if (j.contains("comment") && j["comment"].is_string()) r.comment = j["comment"].get<std::string>();
            validate(r, schema);
            out.records.push_back(std::move(r));
        } catch (const std::exception& e) {
            out.rejected.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::string to_string(Usability u) {
    switch (u) {
        case Usability::acceptable_minor_mods: return "acceptable_minor_mods";
        case Usability::clinically_usable: return "clinically_usable";
        case Usability::not_usable: break;
    }
    return "not_usable";
}

Usability classify(double combined_mean) {
    if (combined_mean >= 4.0) return Usability::acceptable_minor_mods;
    if (combined_mean >= 3.0) return Usability::clinically_usable;
    return Usability::not_usable;
}

std::vector<LikertSummary> likert_summarize(const std::vector<LikertRecord>& records) {
    std::vector<std::string> order;
    std::map<std::string, std::map<std::string, std::vector<double>>> scores;  // organ -> rater -> scores
    std::map<std::string, std::set<std::string>> cases;
    for (const auto& r : records) {
        validate(r);
        if (!scores.contains(r.organ)) order.push_back(r.organ);
        scores[r.organ][r.rater_id].push_back(static_cast<double>(r.score));
        cases[r.organ].insert(r.case_id);
    }
    std::vector<LikertSummary> out;
    for (const auto& organ : order) {
        LikertSummary s;
        s.organ = organ;
        std::vector<double> pooled;
        for (const auto& [rater, values] : scores[organ]) {
            const auto ms = stats::mean_sd(values);
            s.raters.push_back({rater, values.size(), ms.mean, ms.sd});
            pooled.insert(pooled.end(), values.begin(), values.end());
        }
        s.n_scores = pooled.size();
        s.n_cases = cases[organ].size();
        s.combined_mean = stats::mean_sd(pooled).mean;
        s.usability = classify(s.combined_mean);
        s.clinically_usable = s.combined_mean >= 3.0;
        if (s.raters.size() > 1) {
            const auto [lo, hi] = std::minmax_element(s.raters.begin(), s.raters.end(),
                                                      [](const auto& a, const auto& b) { return a.mean < b.mean; });
            s.disagreement = hi->mean - lo->mean > 1.0;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string likert_summary_json(const std::vector<LikertSummary>& summaries) {
    nlohmann::json doc;
    doc["thresholds"] = {{"acceptable_minor_mods", 4.0}, {"clinically_usable", 3.0}};
    doc["combined_mean"] = "pooled over all (case, rater) scores";
    doc["organs"] = nlohmann::json::array();
    for (const auto& s : summaries) {
        nlohmann::json raters = nlohmann::json::array();
        for (const auto& r : s.raters) {
            raters.push_back({{"rater_id", r.rater_id}, {"n", r.n}, {"mean", r.mean}, {"sd", r.sd}});
        }
        doc["organs"].push_back({{"organ", s.organ},
                                 {"raters", raters},
                                 {"combined_mean", s.combined_mean},
                                 {"n_scores", s.n_scores},
                                 {"n_cases", s.n_cases},
                                 {"usability", to_string(s.usability)},
                                 {"clinically_usable", s.clinically_usable},
                                 {"disagreement", s.disagreement}});
    }
    return doc.dump(2);
}

ScoresFile::ScoresFile(std::string path) : path_(std::move(path)) {}

void ScoresFile::append(const LikertRecord& record) {
    validate(record);
    const std::string line = to_json_line(record) + "\n";
    std::lock_guard lock(mutex_);
    std::FILE* f = std::fopen(path_.c_str(), "ab");
    if (f == nullptr) throw IoError("cannot open scores file " + path_);
    const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() && std::fflush(f) == 0;
    std::fclose(f);
    if (!ok) throw IoError("failed to append to " + path_);
}

LikertParse ScoresFile::load(const OrganSchema* schema) const {
    std::lock_guard lock(mutex_);
    if (!std::filesystem::exists(path_)) return {};
    std::ifstream in(path_);
    if (!in) throw IoError("cannot read scores file " + path_);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_jsonl(buf.str(), schema);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace oar::report
