#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace vton {

class Config;

enum class Verdict { a_wins, b_wins, tie };

std::string to_string(Verdict v);

struct MatchOutcome {
    std::string method_a;
    std::string method_b;
    Verdict verdict = Verdict::tie;
    std::string criterion;
    std::string oracle_raw;
};

struct EloState {
    std::map<std::string, double> ratings;
    double k_factor = 32.0;
    double initial = 1000.0;
    std::vector<MatchOutcome> history;

    static EloState with_methods(const std::vector<std::string>& methods, double k_factor = 32.0,
                                 double initial = 1000.0);
    double sum() const;
};

double elo_expected(double r_a, double r_b);

/// Standard Elo update; throws InputError for unregistered or identical methods.
EloState elo_update(EloState state, const MatchOutcome& outcome);
void elo_apply(EloState& state, const MatchOutcome& outcome);

struct RatingSummary {
    std::map<std::string, double> mean;
    std::map<std::string, double> stddev;  ///< sample standard deviation across orderings
};

/// The seeded permutation of `n` match indices used for ordering `shuffle`.
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int shuffle);

/// Fresh ratings, then `outcomes` applied in `order`.
EloState elo_replay(const std::vector<std::string>& methods, const std::vector<MatchOutcome>& outcomes,
                    const std::vector<std::size_t>& order, double k_factor = 32.0, double initial = 1000.0);

/// Mean and spread of the final ratings over `n_shuffles` orderings of one outcome multiset.
RatingSummary elo_over_orderings(const std::vector<std::string>& methods, const std::vector<MatchOutcome>& outcomes,
                                 int n_shuffles, std::uint64_t seed, double k_factor = 32.0, double initial = 1000.0);

// --- oracle judges ------------------------------------------------------------

/// One pairwise question. Method names are for bookkeeping and for the stub
/// judges; the HTTP judge never sends them.
struct JudgeRequest {
    std::string example;
    std::string method_a;
    std::string method_b;
    std::string image_a;  ///< file path
    std::string image_b;
    std::string criterion;
    std::string conditions;  ///< textual description of the inputs, may be empty
    int shuffle = 0;
};

struct JudgeResponse {
    Verdict verdict = Verdict::tie;
    std::string raw;
};

/// Network or protocol failure; the tournament retries these.
class OracleTransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual JudgeResponse judge(const JudgeRequest& request) const = 0;
};

/// Always prefers `favorite` when it is one of the pair; ties otherwise.
class PreferenceOracle final : public Oracle {
public:
    explicit PreferenceOracle(std::string favorite) : favorite_(std::move(favorite)) {}
    JudgeResponse judge(const JudgeRequest& request) const override;

private:
    std::string favorite_;
};

/// Fair coin keyed on (seed, example, unordered pair, criterion, shuffle),
/// independent of presentation order.
class CoinOracle final : public Oracle {
public:
    explicit CoinOracle(std::uint64_t seed) : seed_(seed) {}
    JudgeResponse judge(const JudgeRequest& request) const override;
    /// true when the alphabetically first method of the pair wins.
    static bool first_wins(std::uint64_t seed, const std::string& example, const std::string& m1,
                           const std::string& m2, const std::string& criterion, int shuffle);

private:
    std::uint64_t seed_;
};

struct HttpOracleOptions {
    std::string endpoint;  ///< e.g. https://host/v1/chat/completions
    std::string token;
    std::string model;
    /// Meta-prompt; "{criterion}" and "{conditions}" are substituted.
    std::string prompt_template;
    int timeout_s = 60;
};

/// Vision-language judge behind an OpenAI-style chat completions endpoint.
/// The verdict is the reply's last whole word among "A", "B" (uppercase) and
/// "TIE" (any case).
class HttpOracle final : public Oracle {
public:
    explicit HttpOracle(HttpOracleOptions options);
    JudgeResponse judge(const JudgeRequest& request) const override;

    static std::string default_template();
    static std::optional<Verdict> parse_verdict(const std::string& reply);
    nlohmann::json request_body(const JudgeRequest& request) const;

private:
    HttpOracleOptions options_;
};

/// `oracle.kind`: stub (prefers `oracle.model` when set, else coin), coin, http.
std::unique_ptr<Oracle> make_oracle(const Config& config);

// --- tournament ---------------------------------------------------------------

struct TournamentOptions {
    std::vector<std::string> criteria;
    int n_shuffles = 8;
    double k_factor = 32.0;
    double initial = 1000.0;
    std::uint64_t seed = 0;
    int max_concurrency = 4;
    int retries = 3;
    std::chrono::milliseconds backoff{500};

    static TournamentOptions from_config(const Config& config);
};

struct TournamentEntry {
    std::string method;
    std::vector<std::string> images;  ///< one per example, aligned across methods
};

struct SkippedMatch {
    std::string example;
    std::string method_a;
    std::string method_b;
    std::string criterion;
    int shuffle = 0;
    std::string error;
};

struct TournamentResult {
    std::vector<std::string> methods;
    std::map<std::string, RatingSummary> per_criterion;
    /// All criteria in one rating table per shuffle.
    RatingSummary pooled;
    /// Final pooled state of the first shuffle, with its match history.
    EloState first_shuffle;
    std::vector<std::map<std::string, double>> per_shuffle;
    std::vector<SkippedMatch> skipped;
    std::size_t matches = 0;

    nlohmann::json to_json() const;
};

/// Round robin over every example and unordered method pair, one oracle
/// query per criterion per shuffle with randomized A/B presentation. Queries
/// run concurrently; the Elo updates of each shuffle are applied afterwards
/// in a seeded shuffled order.
TournamentResult run_tournament(const std::vector<TournamentEntry>& entries, const std::vector<std::string>& examples,
                                const Oracle& oracle, const TournamentOptions& options,
                                const std::function<std::string(const std::string& example)>& conditions = {});

/// Entries from one directory per method; examples are the PNG file names
/// present in every directory.
std::vector<TournamentEntry> entries_from_dirs(const std::map<std::string, std::string>& method_dirs,
                                               std::vector<std::string>& examples);

}  // namespace vton
