#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vton/elo.hpp"
#include "vton/evalsuite.hpp"

namespace vton {

class Backend;

/// One (example, method) line of a results manifest. Paths are relative to
/// the manifest's directory unless absolute.
struct ManifestRecord {
    std::string example;
    std::string method;
    std::string generated;
    std::optional<std::string> sketch;
    std::optional<std::string> region;  ///< garment region mask; whole image when absent
    std::optional<std::string> image_prompt;
    std::optional<std::string> text;
    std::vector<std::string> content_words;
    std::optional<std::string> dataset;

    static ManifestRecord from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    /// Human-readable summary of the conditions, handed to the oracle judge.
    std::string describe_conditions() const;
};

/// JSON lines; blank lines are skipped. Errors name the offending line.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

struct MetricRecord {
    ManifestRecord record;
    std::optional<double> sketch_cd;
    std::optional<double> style;
    std::optional<double> text;
    std::optional<double> content;
    /// Why a metric that had its inputs came out undefined.
    std::vector<std::string> undefined;

    /// The manifest fields plus `sketch_cd`, `style`, `text_score`, `content`
    /// (null when undefined or not applicable) and `undefined`.
    nlohmann::json to_json() const;
};

MetricRecord evaluate_record(const ManifestRecord& record, const Backend& backend, const MetricOptions& options,
                             const std::filesystem::path& base_dir);

struct EvaluationReport {
    std::vector<MetricRecord> metrics;
    /// Tournament per dataset group ("all" when records carry no dataset).
    std::map<std::string, TournamentResult> elo;

    /// Methods by rows, one table per dataset: Elo, sketch CD, image style
    /// score and text score.
    std::string to_markdown() const;
};

struct EvaluationOptions {
    MetricOptions metrics;
    TournamentOptions tournament;
    bool run_tournament = true;
    int max_concurrency = 4;
};

/// Per-record metrics (concurrently) and one tournament per dataset over the
/// examples every method of that dataset produced.
EvaluationReport evaluate_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& base_dir,
                                   const Backend& backend, const Oracle* oracle, const EvaluationOptions& options);

void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<MetricRecord>& metrics);

}  // namespace vton
