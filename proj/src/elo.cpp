#include "vton/elo.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "vton/backend.hpp"
#include "vton/config.hpp"
#include "vton/error.hpp"

namespace vton {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kOrderStream = 11;
constexpr std::uint64_t kSwapStream = 12;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    // Separator so ("ab","c") and ("a","bc") differ.
    h ^= 0xff;
    return h * 0x100000001b3ull;
}

double score_a(Verdict v) {
    switch (v) {
        case Verdict::a_wins: return 1.0;
        case Verdict::b_wins: return 0.0;
        case Verdict::tie: return 0.5;
    }
    return 0.5;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

RatingSummary summarize(const std::vector<std::string>& methods, const std::vector<EloState>& runs) {
    RatingSummary out;
    const double n = static_cast<double>(runs.size());
    for (const auto& m : methods) {
        double sum = 0.0;
        for (const auto& r : runs) sum += r.ratings.at(m);
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : runs) ss += (r.ratings.at(m) - mean) * (r.ratings.at(m) - mean);
        out.mean[m] = mean;
        out.stddev[m] = runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    return out;
}

json summary_json(const RatingSummary& s) {
    json j = json::object();
    for (const auto& [m, v] : s.mean) j[m] = {{"mean", v}, {"std", s.stddev.at(m)}};
    return j;
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::a_wins: return "a_wins";
        case Verdict::b_wins: return "b_wins";
        case Verdict::tie: return "tie";
    }
    return "tie";
}

EloState EloState::with_methods(const std::vector<std::string>& methods, double k_factor, double initial) {
    EloState s;
    s.k_factor = k_factor;
    s.initial = initial;
    for (const auto& m : methods) s.ratings[m] = initial;
    return s;
}

double EloState::sum() const {
    double total = 0.0;
    for (const auto& [_, r] : ratings) total += r;
    return total;
}

double elo_expected(double r_a, double r_b) { return 1.0 / (1.0 + std::pow(10.0, (r_b - r_a) / 400.0)); }

void elo_apply(EloState& state, const MatchOutcome& o) {
    if (o.method_a == o.method_b) throw InputError("a match needs two distinct methods");
    const auto ia = state.ratings.find(o.method_a);
    const auto ib = state.ratings.find(o.method_b);
    if (ia == state.ratings.end()) throw InputError("unknown method '" + o.method_a + "'");
    if (ib == state.ratings.end()) throw InputError("unknown method '" + o.method_b + "'");
    const double e_a = elo_expected(ia->second, ib->second);
    const double delta = state.k_factor * (score_a(o.verdict) - e_a);
    ia->second += delta;
    ib->second -= delta;
    state.history.push_back(o);
}

EloState elo_update(EloState state, const MatchOutcome& outcome) {
    elo_apply(state, outcome);
    return state;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int shuffle) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, kOrderStream, static_cast<std::uint64_t>(shuffle)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

EloState elo_replay(const std::vector<std::string>& methods, const std::vector<MatchOutcome>& outcomes,
                    const std::vector<std::size_t>& order, double k_factor, double initial) {
    EloState s = EloState::with_methods(methods, k_factor, initial);
    for (std::size_t i : order) elo_apply(s, outcomes.at(i));
    return s;
}

RatingSummary elo_over_orderings(const std::vector<std::string>& methods, const std::vector<MatchOutcome>& outcomes,
                                 int n_shuffles, std::uint64_t seed, double k_factor, double initial) {
    if (n_shuffles < 1) throw InputError("n_shuffles must be positive");
    std::vector<EloState> runs;
    for (int s = 0; s < n_shuffles; ++s) {
        runs.push_back(elo_replay(methods, outcomes, shuffled_order(outcomes.size(), seed, s), k_factor, initial));
    }
    return summarize(methods, runs);
}

// --- oracles ------------------------------------------------------------------

JudgeResponse PreferenceOracle::judge(const JudgeRequest& r) const {
    if (r.method_a == favorite_) return {Verdict::a_wins, "prefers " + favorite_};
    if (r.method_b == favorite_) return {Verdict::b_wins, "prefers " + favorite_};
    return {Verdict::tie, "indifferent"};
}

bool CoinOracle::first_wins(std::uint64_t seed, const std::string& example, const std::string& m1,
                            const std::string& m2, const std::string& criterion, int shuffle) {
    const auto& lo = std::min(m1, m2);
    const auto& hi = std::max(m1, m2);
    std::uint64_t h = fnv1a(example);
    h = fnv1a(lo, h);
    h = fnv1a(hi, h);
    h = fnv1a(criterion, h);
    return (derive_seed(seed, h, static_cast<std::uint64_t>(shuffle)) >> 63) != 0;
}

JudgeResponse CoinOracle::judge(const JudgeRequest& r) const {
    const bool first = first_wins(seed_, r.example, r.method_a, r.method_b, r.criterion, r.shuffle);
    const bool a_is_first = r.method_a < r.method_b;
    const bool a_wins = first == a_is_first;
    return {a_wins ? Verdict::a_wins : Verdict::b_wins, a_wins ? "A" : "B"};
}

HttpOracle::HttpOracle(HttpOracleOptions options) : options_(std::move(options)) {
    if (options_.endpoint.empty()) throw InputError("oracle.endpoint is required for the http oracle");
    if (options_.prompt_template.empty()) options_.prompt_template = default_template();
}

std::string HttpOracle::default_template() {
    return "You are judging two generated fashion images, shown as image A (first) and image B (second).\n"
           "The inputs were: {conditions}\n"
           "Criterion: {criterion}.\n"
           "Compare A and B only under this criterion. Answer with a single word: A, B or TIE.";
}

std::optional<Verdict> HttpOracle::parse_verdict(const std::string& reply) {
    // Uppercase only for A and B so the article "a" is not read as a vote.
    static const std::regex word(R"(\b(A|B|[Tt][Ii][Ee])\b)");
    std::optional<Verdict> last;
    for (auto it = std::sregex_iterator(reply.begin(), reply.end(), word); it != std::sregex_iterator(); ++it) {
        const std::string w = (*it)[1].str();
        last = w == "A" ? Verdict::a_wins : w == "B" ? Verdict::b_wins : Verdict::tie;
    }
    return last;
}

json HttpOracle::request_body(const JudgeRequest& r) const {
    std::string prompt = replace_all(options_.prompt_template, "{criterion}", r.criterion);
    prompt = replace_all(prompt, "{conditions}", r.conditions.empty() ? "(not described)" : r.conditions);
    auto image = [](const std::string& path) {
        return json{{"type", "image_url"},
                    {"image_url", {{"url", "data:image/png;base64," + httplib::detail::base64_encode(read_text(path))}}}};
    };
    json body = {{"messages",
                  json::array({{{"role", "user"},
                                {"content", json::array({{{"type", "text"}, {"text", prompt}}, image(r.image_a),
                                                         image(r.image_b)})}}})},
                 {"temperature", 0}};
    if (!options_.model.empty()) body["model"] = options_.model;
    return body;
}

JudgeResponse HttpOracle::judge(const JudgeRequest& r) const {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(options_.endpoint, m, url)) throw InputError("bad oracle endpoint " + options_.endpoint);
    const std::string base = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";
    const std::string body = request_body(r).dump();

    httplib::Client client(base);
    if (!client.is_valid()) throw OracleTransportError("unsupported endpoint " + base);
    client.set_connection_timeout(options_.timeout_s, 0);
    client.set_read_timeout(options_.timeout_s, 0);
    client.set_write_timeout(options_.timeout_s, 0);
    httplib::Headers headers;
    if (!options_.token.empty()) headers.emplace("Authorization", "Bearer " + options_.token);
    const auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw OracleTransportError("oracle request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw OracleTransportError("oracle returned HTTP " + std::to_string(res->status));
    }
    std::string reply;
    try {
        reply = json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw OracleTransportError(std::string("malformed oracle reply: ") + e.what());
    }
    const auto v = parse_verdict(reply);
    if (!v) throw OracleTransportError("oracle reply names no verdict: " + reply);
    return {*v, reply};
}

std::unique_ptr<Oracle> make_oracle(const Config& config) {
    const auto kind = config.value<std::string>("oracle.kind");
    if (kind == "stub") {
        const auto fav = config.value<std::string>("oracle.model");
        if (!fav.empty()) return std::make_unique<PreferenceOracle>(fav);
        return std::make_unique<CoinOracle>(config.value<std::uint64_t>("elo.seed"));
    }
    if (kind == "coin") return std::make_unique<CoinOracle>(config.value<std::uint64_t>("elo.seed"));
    if (kind == "http") {
        HttpOracleOptions o;
        o.endpoint = config.value<std::string>("oracle.endpoint");
        o.token = config.value<std::string>("oracle.token");
        o.model = config.value<std::string>("oracle.model");
        const auto tpl = config.value<std::string>("oracle.template");
        if (!tpl.empty()) o.prompt_template = read_text(tpl);
        o.timeout_s = config.value<int>("oracle.timeout_s");
        return std::make_unique<HttpOracle>(std::move(o));
    }
    throw InputError("unknown oracle.kind '" + kind + "'");
}

// --- tournament ---------------------------------------------------------------

TournamentOptions TournamentOptions::from_config(const Config& config) {
    TournamentOptions o;
    o.criteria = config.value<std::vector<std::string>>("elo.criteria");
    o.n_shuffles = config.value<int>("elo.n_shuffles");
    o.k_factor = config.value<double>("elo.k_factor");
    o.initial = config.value<double>("elo.initial");
    o.seed = config.value<std::uint64_t>("elo.seed");
    o.max_concurrency = config.value<int>("oracle.max_concurrency");
    o.retries = config.value<int>("oracle.retries");
    o.backoff = std::chrono::milliseconds(config.value<int>("oracle.backoff_ms"));
    return o;
}

json TournamentResult::to_json() const {
    json j;
    j["methods"] = methods;
    j["matches"] = matches;
    j["pooled"] = summary_json(pooled);
    j["per_criterion"] = json::object();
    for (const auto& [c, s] : per_criterion) j["per_criterion"][c] = summary_json(s);
    j["skipped"] = json::array();
    for (const auto& s : skipped) {
        j["skipped"].push_back({{"example", s.example},
                                {"method_a", s.method_a},
                                {"method_b", s.method_b},
                                {"criterion", s.criterion},
                                {"shuffle", s.shuffle},
                                {"error", s.error}});
    }
    return j;
}

TournamentResult run_tournament(const std::vector<TournamentEntry>& entries, const std::vector<std::string>& examples,
                                const Oracle& oracle, const TournamentOptions& options,
                                const std::function<std::string(const std::string&)>& conditions) {
    if (entries.size() < 2) throw InputError("a tournament needs at least two methods");
    if (options.criteria.empty()) throw InputError("a tournament needs at least one criterion");
    if (options.n_shuffles < 1) throw InputError("n_shuffles must be positive");
    std::vector<std::string> methods;
    for (const auto& e : entries) {
        if (e.images.size() != examples.size()) {
            throw InputError("method '" + e.method + "' has " + std::to_string(e.images.size()) + " images for " +
                             std::to_string(examples.size()) + " examples");
        }
        methods.push_back(e.method);
    }
    if (std::set<std::string>(methods.begin(), methods.end()).size() != methods.size()) {
        throw InputError("duplicate method names");
    }

    struct Query {
        JudgeRequest request;
        std::optional<JudgeResponse> response;
        std::string error;
    };
    std::vector<Query> queries;
    for (int s = 0; s < options.n_shuffles; ++s) {
        std::uint64_t pair_index = 0;
        for (std::size_t ex = 0; ex < examples.size(); ++ex) {
            const std::string cond = conditions ? conditions(examples[ex]) : std::string();
            for (std::size_t i = 0; i < entries.size(); ++i) {
                for (std::size_t j = i + 1; j < entries.size(); ++j, ++pair_index) {
                    const bool swap =
                        (derive_seed(options.seed, kSwapStream, pair_index * 1000003ull + static_cast<std::uint64_t>(s)) &
                         1u) != 0;
                    const auto& a = swap ? entries[j] : entries[i];
                    const auto& b = swap ? entries[i] : entries[j];
                    for (const auto& c : options.criteria) {
                        Query q;
                        q.request = {examples[ex], a.method, b.method, a.images[ex], b.images[ex], c, cond, s};
                        queries.push_back(std::move(q));
                    }
                }
            }
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < queries.size(); i = next++) {
            auto& q = queries[i];
            for (int attempt = 0;; ++attempt) {
                try {
                    q.response = oracle.judge(q.request);
                    break;
                } catch (const OracleTransportError& e) {
                    q.error = e.what();
                    if (attempt >= options.retries) break;
                    std::this_thread::sleep_for(options.backoff * (1LL << std::min(attempt, 20)));
                }
            }
        }
    };
    const int n_threads = std::clamp<int>(options.max_concurrency, 1, static_cast<int>(std::max<std::size_t>(queries.size(), 1)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    TournamentResult result;
    result.methods = methods;
    std::vector<std::vector<MatchOutcome>> by_shuffle(static_cast<std::size_t>(options.n_shuffles));
    for (const auto& q : queries) {
        const auto& r = q.request;
        if (!q.response) {
            result.skipped.push_back({r.example, r.method_a, r.method_b, r.criterion, r.shuffle, q.error});
            continue;
        }
        by_shuffle[static_cast<std::size_t>(r.shuffle)].push_back(
            {r.method_a, r.method_b, q.response->verdict, r.criterion, q.response->raw});
        ++result.matches;
    }

    std::vector<EloState> pooled_runs;
    std::map<std::string, std::vector<EloState>> criterion_runs;
    for (int s = 0; s < options.n_shuffles; ++s) {
        const auto& outcomes = by_shuffle[static_cast<std::size_t>(s)];
        const auto order = shuffled_order(outcomes.size(), options.seed, s);
        EloState pooled = EloState::with_methods(methods, options.k_factor, options.initial);
        std::map<std::string, EloState> per;
        for (const auto& c : options.criteria) per[c] = EloState::with_methods(methods, options.k_factor, options.initial);
        for (std::size_t i : order) {
            elo_apply(pooled, outcomes[i]);
            elo_apply(per.at(outcomes[i].criterion), outcomes[i]);
        }
        if (s == 0) result.first_shuffle = pooled;
        pooled_runs.push_back(std::move(pooled));
        for (auto& [c, st] : per) criterion_runs[c].push_back(std::move(st));
    }
    result.pooled = summarize(methods, pooled_runs);
    for (const auto& [c, runs] : criterion_runs) result.per_criterion[c] = summarize(methods, runs);
    for (const auto& r : pooled_runs) result.per_shuffle.push_back(r.ratings);
    return result;
}

std::vector<TournamentEntry> entries_from_dirs(const std::map<std::string, std::string>& method_dirs,
                                               std::vector<std::string>& examples) {
    std::optional<std::set<std::string>> common;
    for (const auto& [method, dir] : method_dirs) {
        if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
        std::set<std::string> names;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".png") names.insert(e.path().filename().string());
        }
        if (!common) {
            common = std::move(names);
        } else {
            std::set<std::string> both;
            std::set_intersection(common->begin(), common->end(), names.begin(), names.end(),
                                  std::inserter(both, both.end()));
            common = std::move(both);
        }
    }
    examples.clear();
    if (common) examples.assign(common->begin(), common->end());
    std::vector<TournamentEntry> out;
    for (const auto& [method, dir] : method_dirs) {
        TournamentEntry e{method, {}};
        for (const auto& name : examples) e.images.push_back((fs::path(dir) / name).string());
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace vton
