#include "vton/service.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

#include "vton/backend.hpp"
#include "vton/block_analysis.hpp"
#include "vton/elo.hpp"
#include "vton/error.hpp"
#include "vton/image_io.hpp"
#include "vton/manifest.hpp"

namespace vton {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::string random_id() {
    static std::mutex mu;
    static std::mt19937_64 rng([] {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
               static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
    }());
    std::lock_guard lock(mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_unknown(const json& doc, const std::set<std::string>& allowed, std::vector<FieldError>& errors) {
    for (const auto& [k, _] : doc.items()) {
        if (!allowed.count(k)) errors.push_back({k, "unknown field"});
    }
}

void check_string_list(const json& doc, const char* key, bool required, std::vector<FieldError>& errors) {
    if (!doc.contains(key)) {
        if (required) errors.push_back({key, "is required"});
        return;
    }
    const auto& v = doc.at(key);
    if (!v.is_array() || v.empty() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); })) {
        errors.push_back({key, "must be a non-empty list of strings"});
    }
}

void write_json_file(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2)); }

std::string content_type_for(const fs::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".png") return "image/png";
    if (ext == ".json") return "application/json";
    if (ext == ".jsonl") return "application/x-ndjson";
    if (ext == ".tsv") return "text/tab-separated-values";
    if (ext == ".md") return "text/markdown";
    return "application/octet-stream";
}

}  // namespace

std::string to_string(JobKind k) {
    switch (k) {
        case JobKind::edit: return "edit";
        case JobKind::tryon: return "tryon";
        case JobKind::analyze_blocks: return "analyze_blocks";
        case JobKind::evaluate: return "evaluate";
    }
    return "tryon";
}

std::string to_string(JobStatus s) {
    switch (s) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "failed";
}

JobKind parse_job_kind(std::string_view name) {
    for (auto k : {JobKind::edit, JobKind::tryon, JobKind::analyze_blocks, JobKind::evaluate}) {
        if (to_string(k) == name) return k;
    }
    throw InputError("unknown job kind '" + std::string(name) + "'");
}

JobStatus parse_job_status(std::string_view name) {
    for (auto s : {JobStatus::queued, JobStatus::running, JobStatus::done, JobStatus::failed}) {
        if (to_string(s) == name) return s;
    }
    throw InputError("unknown job status '" + std::string(name) + "'");
}

json JobRecord::status_json() const {
    json j = {{"id", id},
              {"kind", to_string(kind)},
              {"status", to_string(status)},
              {"seq", seq},
              {"created_at", created_at},
              {"started_at", started_at ? json(*started_at) : json(nullptr)},
              {"finished_at", finished_at ? json(*finished_at) : json(nullptr)},
              {"result_paths", result_paths},
              {"error", error ? json(*error) : json(nullptr)}};
    return j;
}

json JobRecord::to_json() const {
    json j = status_json();
    j["spec"] = spec;
    return j;
}

// --- job specs ----------------------------------------------------------------

BlockJobSpec BlockJobSpec::from_json(const json& doc) {
    if (!doc.is_object()) throw ValidationError("(root)", "spec must be a JSON object");
    std::vector<FieldError> errors;
    check_unknown(doc, {"probes", "content_words", "base_prompt", "seed"}, errors);
    check_string_list(doc, "probes", true, errors);
    check_string_list(doc, "content_words", true, errors);
    if (doc.contains("base_prompt") && !doc.at("base_prompt").is_string()) {
        errors.push_back({"base_prompt", "must be a string"});
    }
    if (doc.contains("seed") && !doc.at("seed").is_number_unsigned()) {
        errors.push_back({"seed", "must be a non-negative integer"});
    }
    if (errors.empty() && doc.contains("probes")) {
        const auto probes = doc.at("probes").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < probes.size(); ++i) {
            std::error_code ec;
            if (!fs::is_regular_file(probes[i], ec)) {
                errors.push_back({"probes[" + std::to_string(i) + "]", "file not found: " + probes[i]});
            }
        }
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));
    BlockJobSpec s;
    s.probes = doc.at("probes").get<std::vector<std::string>>();
    s.content_words = doc.at("content_words").get<std::vector<std::string>>();
    if (doc.contains("base_prompt")) s.base_prompt = doc.at("base_prompt").get<std::string>();
    if (doc.contains("seed")) s.seed = doc.at("seed").get<std::uint64_t>();
    return s;
}

json BlockJobSpec::to_json() const {
    json j = {{"probes", probes}, {"content_words", content_words}};
    if (base_prompt) j["base_prompt"] = *base_prompt;
    if (seed) j["seed"] = *seed;
    return j;
}

EvalJobSpec EvalJobSpec::from_json(const json& doc) {
    if (!doc.is_object()) throw ValidationError("(root)", "spec must be a JSON object");
    std::vector<FieldError> errors;
    check_unknown(doc, {"manifest", "tournament"}, errors);
    if (!doc.contains("manifest") || !doc.at("manifest").is_string()) {
        errors.push_back({"manifest", "is required and must be a path"});
    } else {
        std::error_code ec;
        const auto p = doc.at("manifest").get<std::string>();
        if (!fs::is_regular_file(p, ec)) errors.push_back({"manifest", "file not found: " + p});
    }
    if (doc.contains("tournament") && !doc.at("tournament").is_boolean()) {
        errors.push_back({"tournament", "must be a boolean"});
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));
    EvalJobSpec s;
    s.manifest = doc.at("manifest").get<std::string>();
    if (doc.contains("tournament")) s.tournament = doc.at("tournament").get<bool>();
    return s;
}

json EvalJobSpec::to_json() const { return {{"manifest", manifest}, {"tournament", tournament}}; }

json normalize_job_spec(JobKind kind, const json& spec, const Config& config) {
    switch (kind) {
        case JobKind::tryon:
        case JobKind::edit: {
            const bool tryon = kind == JobKind::tryon;
            const auto s = TryOnJobSpec::from_json(spec, TryOnJobSpec::defaults(config), tryon);
            s.check_files();
            return s.to_json(tryon);
        }
        case JobKind::analyze_blocks: return BlockJobSpec::from_json(spec).to_json();
        case JobKind::evaluate: return EvalJobSpec::from_json(spec).to_json();
    }
    throw InputError("unknown job kind");
}

std::vector<std::string> execute_job(JobKind kind, const json& spec, const Config& config, const Backend& backend,
                                     const fs::path& out_dir, const StepHook& hook) {
    fs::create_directories(out_dir);
    switch (kind) {
        case JobKind::tryon:
        case JobKind::edit: {
            const bool tryon = kind == JobKind::tryon;
            const auto s = TryOnJobSpec::from_json(spec, TryOnJobSpec::defaults(config), tryon);
            const JobInputs in = load_inputs(s, injection_from_config(config));
            const auto opts = SamplerOptions::from_config(config);
            RgbImage image;
            Diagnostics diag;
            if (tryon) {
                auto r = run_tryon(in, backend, opts, hook);
                image = std::move(r.image);
                diag = std::move(r.diagnostics);
            } else {
                auto r = run_edit(in, backend, opts, hook);
                image = std::move(r.image);
                diag = std::move(r.diagnostics);
            }
            const auto png = encode_png(image);
            write_file_atomic(out_dir / "result.png", std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
            write_json_file(out_dir / "diagnostics.json", diag.to_json());
            return {"result.png", "diagnostics.json"};
        }
        case JobKind::analyze_blocks: {
            const auto s = BlockJobSpec::from_json(spec);
            auto opts = BlockAnalysisOptions::from_config(config);
            if (s.base_prompt) opts.base_prompt = *s.base_prompt;
            if (s.seed) opts.seed = *s.seed;
            opts.hook = hook;
            std::vector<RgbImage> probes;
            for (const auto& p : s.probes) probes.push_back(read_png(p));
            const auto report = analyze_block_sensitivity(probes, s.content_words, backend, opts);
            const auto png = encode_png(report.render_chart());
            write_file_atomic(out_dir / "blocks.png", std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
            write_file_atomic(out_dir / "blocks.tsv", report.to_tsv());
            write_json_file(out_dir / "blocks.json", report.to_json());
            return {"blocks.png", "blocks.tsv", "blocks.json"};
        }
        case JobKind::evaluate: {
            const auto s = EvalJobSpec::from_json(spec);
            const auto records = read_manifest(s.manifest);
            EvaluationOptions opts;
            opts.metrics.edge_percentile = config.value<double>("eval.edge_percentile");
            opts.metrics.stroke_threshold = config.value<double>("eval.stroke_threshold");
            opts.metrics.sigma_frac = config.value<double>("cspe.sigma_frac");
            opts.metrics.lightness = parse_lightness_space(config.value<std::string>("cspe.lightness_space"));
            opts.tournament = TournamentOptions::from_config(config);
            opts.run_tournament = s.tournament;
            opts.max_concurrency = config.value<int>("oracle.max_concurrency");
            const auto oracle = s.tournament ? make_oracle(config) : nullptr;
            const auto report =
                evaluate_manifest(records, fs::path(s.manifest).parent_path(), backend, oracle.get(), opts);
            write_file_atomic(out_dir / "report.md", report.to_markdown());
            std::ostringstream lines;
            for (const auto& m : report.metrics) lines << m.to_json().dump() << "\n";
            write_file_atomic(out_dir / "metrics.jsonl", lines.str());
            json elo = json::object();
            for (const auto& [dataset, t] : report.elo) elo[dataset] = t.to_json();
            write_json_file(out_dir / "elo.json", elo);
            return {"report.md", "metrics.jsonl", "elo.json"};
        }
    }
    throw InputError("unknown job kind");
}

// --- store --------------------------------------------------------------------

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp" + random_id());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

JobStore::JobStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    for (const auto& r : load_all()) next_seq_ = std::max(next_seq_, r.seq + 1);
}

JobRecord JobStore::create(JobKind kind, json spec) {
    JobRecord r;
    {
        std::lock_guard lock(mu_);
        r.seq = next_seq_++;
    }
    do {
        r.id = random_id();
    } while (fs::exists(dir(r.id)));
    r.kind = kind;
    r.spec = std::move(spec);
    r.created_at = now_iso();
    fs::create_directories(dir(r.id));
    write_json_file(dir(r.id) / "spec.json", r.spec);
    save_status(r);
    return r;
}

void JobStore::save_status(const JobRecord& r) const { write_json_file(dir(r.id) / "status.json", r.status_json()); }

std::vector<JobRecord> JobStore::load_all() const {
    std::vector<JobRecord> out;
    for (const auto& e : fs::directory_iterator(root_)) {
        if (!e.is_directory()) continue;
        try {
            const json st = json::parse(read_file(e.path() / "status.json"));
            JobRecord r;
            r.id = st.at("id").get<std::string>();
            r.kind = parse_job_kind(st.at("kind").get<std::string>());
            r.status = parse_job_status(st.at("status").get<std::string>());
            r.seq = st.value("seq", std::uint64_t{0});
            r.created_at = st.value("created_at", std::string());
            if (st.contains("started_at") && st["started_at"].is_string()) r.started_at = st["started_at"].get<std::string>();
            if (st.contains("finished_at") && st["finished_at"].is_string()) {
                r.finished_at = st["finished_at"].get<std::string>();
            }
            r.result_paths = st.value("result_paths", std::vector<std::string>{});
            if (st.contains("error") && st["error"].is_string()) r.error = st["error"].get<std::string>();
            r.spec = json::parse(read_file(e.path() / "spec.json"));
            out.push_back(std::move(r));
        } catch (const std::exception&) {
            // Partially created or foreign directory.
        }
    }
    std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) { return a.seq < b.seq; });
    return out;
}

// --- service ------------------------------------------------------------------

JobService::JobService(Config config, std::shared_ptr<const Backend> backend)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      store_(config_.value<std::string>("service.jobs_dir")),
      n_workers_(std::max(1, config_.value<int>("service.workers"))) {
    if (!backend_) throw InputError("job service needs a backend");
    for (auto& r : store_.load_all()) {
        if (r.status == JobStatus::running) {
            r.status = JobStatus::failed;
            r.error = "interrupted";
            r.finished_at = now_iso();
            store_.save_status(r);
        } else if (r.status == JobStatus::queued) {
            queue_.push_back(r.id);
        }
        cancel_flags_[r.id] = std::make_shared<std::atomic<bool>>(false);
        jobs_.emplace(r.id, std::move(r));
    }
}

JobService::~JobService() { stop(); }

void JobService::start() {
    std::lock_guard lock(mu_);
    if (started_) return;
    started_ = true;
    stopping_ = false;
    for (int i = 0; i < n_workers_; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void JobService::stop() {
    {
        std::lock_guard lock(mu_);
        if (!started_) return;
        stopping_ = true;
        for (auto& [id, rec] : jobs_) {
            if (rec.status == JobStatus::running) cancel_flags_.at(id)->store(true);
        }
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
    workers_.clear();
    std::lock_guard lock(mu_);
    started_ = false;
}

std::string JobService::submit(JobKind kind, const json& spec) {
    json normalized = normalize_job_spec(kind, spec, config_);
    JobRecord r = store_.create(kind, std::move(normalized));
    const std::string id = r.id;
    {
        std::lock_guard lock(mu_);
        cancel_flags_[id] = std::make_shared<std::atomic<bool>>(false);
        jobs_.emplace(id, std::move(r));
        queue_.push_back(id);
    }
    cv_.notify_all();
    return id;
}

JobRecord JobService::get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("no job " + id);
    return it->second;
}

std::vector<JobRecord> JobService::list() const {
    std::lock_guard lock(mu_);
    std::vector<JobRecord> out;
    for (const auto& [_, r] : jobs_) out.push_back(r);
    std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) { return a.seq < b.seq; });
    return out;
}

fs::path JobService::result_path(const std::string& id, std::size_t index) const {
    const JobRecord r = get(id);
    if (r.status != JobStatus::done) {
        throw ConflictError("job " + id + " is " + to_string(r.status) + ", results exist only once it is done");
    }
    if (index >= r.result_paths.size()) {
        throw NotFoundError("job " + id + " has " + std::to_string(r.result_paths.size()) + " results");
    }
    return store_.dir(id) / r.result_paths[index];
}

json JobService::cancel(const std::string& id) {
    std::unique_lock lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("no job " + id);
    JobRecord& r = it->second;
    json ack = {{"id", id}, {"acknowledged", true}};
    switch (r.status) {
        case JobStatus::done:
        case JobStatus::failed:
            ack["effect"] = "none";
            break;
        case JobStatus::queued:
            queue_.erase(std::remove(queue_.begin(), queue_.end(), id), queue_.end());
            r.status = JobStatus::failed;
            r.error = "cancelled";
            r.finished_at = now_iso();
            transition(r);
            ack["effect"] = "cancelled";
            break;
        case JobStatus::running:
            cancel_flags_.at(id)->store(true);
            ack["effect"] = "cancelling";
            break;
    }
    ack["status"] = to_string(r.status);
    return ack;
}

JobRecord JobService::wait(const std::string& id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("no job " + id);
    cv_.wait_for(lock, timeout, [&] { return jobs_.at(id).terminal(); });
    return jobs_.at(id);
}

json JobService::health() const {
    std::lock_guard lock(mu_);
    int running = 0;
    for (const auto& [_, r] : jobs_) running += r.status == JobStatus::running;
    return {{"status", "ok"},
            {"backend", backend_->info().name},
            {"exclusive", backend_->info().exclusive},
            {"workers", n_workers_},
            {"queued", queue_.size()},
            {"running", running}};
}

// Caller holds mu_.
void JobService::transition(JobRecord& rec) {
    store_.save_status(rec);
    cv_.notify_all();
}

void JobService::worker_loop() {
    const bool exclusive = backend_->info().exclusive;
    for (;;) {
        // For an exclusive backend the lock is taken before dequeuing, so jobs
        // start in queue order.
        std::unique_lock excl(exclusive_mu_, std::defer_lock);
        if (exclusive) excl.lock();
        std::string id;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
        }
        run_one(id);
    }
}

void JobService::run_one(const std::string& id) {
    std::shared_ptr<std::atomic<bool>> flag;
    JobKind kind;
    json spec;
    {
        std::lock_guard lock(mu_);
        JobRecord& r = jobs_.at(id);
        if (r.status != JobStatus::queued) return;
        r.status = JobStatus::running;
        r.started_at = now_iso();
        transition(r);
        flag = cancel_flags_.at(id);
        kind = r.kind;
        spec = r.spec;
    }
    const StepHook hook = [flag](int) {
        if (flag->load()) throw CancelledError();
    };
    std::vector<std::string> results;
    std::optional<std::string> error;
    try {
        results = execute_job(kind, spec, config_, *backend_, store_.dir(id), hook);
        if (results.empty()) error = "job produced no results";
    } catch (const CancelledError&) {
        error = "cancelled";
    } catch (const std::exception& e) {
        error = e.what();
    }
    std::lock_guard lock(mu_);
    JobRecord& r = jobs_.at(id);
    r.finished_at = now_iso();
    if (error) {
        r.status = JobStatus::failed;
        r.error = (*error == "cancelled" && stopping_) ? "interrupted" : *error;
    } else {
        r.status = JobStatus::done;
        r.result_paths = std::move(results);
    }
    transition(r);
}

// --- HTTP ---------------------------------------------------------------------

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        json fields = json::array();
        for (const auto& fe : e.errors()) fields.push_back({{"field", fe.field}, {"message", fe.message}});
        send_json(res, 422, {{"error", "validation failed"}, {"fields", fields}});
    } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
    } catch (const InputError& e) {
        send_error(res, 400, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

}  // namespace

HttpFrontend::HttpFrontend(JobService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    routes();
}

HttpFrontend::~HttpFrontend() { stop(); }

void HttpFrontend::routes() {
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    s.Post("/jobs", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception& e) {
                throw InputError(std::string("request body is not JSON: ") + e.what());
            }
            std::string kind_name;
            json spec;
            if (req.has_param("kind")) {
                kind_name = req.get_param_value("kind");
                spec = std::move(body);
            } else {
                if (!body.is_object() || !body.contains("kind") || !body["kind"].is_string()) {
                    throw ValidationError("kind", "required: pass ?kind= or a {\"kind\", \"spec\"} body");
                }
                if (!body.contains("spec")) throw ValidationError("spec", "is required");
                for (const auto& [k, _] : body.items()) {
                    if (k != "kind" && k != "spec") throw ValidationError(k, "unknown field");
                }
                kind_name = body["kind"].get<std::string>();
                spec = body["spec"];
            }
            JobKind kind;
            try {
                kind = parse_job_kind(kind_name);
            } catch (const InputError& e) {
                throw ValidationError("kind", e.what());
            }
            const std::string id = service_.submit(kind, spec);
            res.set_header("Location", "/jobs/" + id);
            send_json(res, 202, {{"id", id}, {"status", "queued"}});
        });
    });

    s.Get("/jobs", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            json out = json::array();
            for (const auto& r : service_.list()) out.push_back(r.status_json());
            send_json(res, 200, {{"jobs", out}});
        });
    });

    s.Get(R"(/jobs/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, service_.get(req.matches[1]).to_json()); });
    });

    s.Get(R"(/jobs/([A-Za-z0-9_-]+)/results/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto index = std::stoull(std::string(req.matches[2]));
            const fs::path p = service_.result_path(req.matches[1], index);
            res.status = 200;
            res.set_content(read_file(p), content_type_for(p));
        });
    });

    s.Post(R"(/jobs/([A-Za-z0-9_-]+)/cancel)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, service_.cancel(req.matches[1])); });
    });

    s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, service_.health()); });
    });

    s.Get("/config", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            json doc = service_.config().document();
            if (!doc["oracle"]["token"].get<std::string>().empty()) doc["oracle"]["token"] = "(redacted)";
            send_json(res, 200, doc);
        });
    });
}

int HttpFrontend::start(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void HttpFrontend::listen(const std::string& host, int port) {
    if (!server_->listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpFrontend::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace vton
