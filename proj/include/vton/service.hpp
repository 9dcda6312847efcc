#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vton/config.hpp"
#include "vton/sampler.hpp"

namespace httplib {
class Server;
}

namespace vton {

class Backend;

enum class JobKind { edit, tryon, analyze_blocks, evaluate };
enum class JobStatus { queued, running, done, failed };

std::string to_string(JobKind k);
std::string to_string(JobStatus s);
/// Throws InputError for an unknown name.
JobKind parse_job_kind(std::string_view name);
JobStatus parse_job_status(std::string_view name);

struct JobRecord {
    std::string id;
    JobKind kind = JobKind::tryon;
    nlohmann::json spec;
    JobStatus status = JobStatus::queued;
    std::uint64_t seq = 0;  ///< submission order
    std::string created_at;
    std::optional<std::string> started_at;
    std::optional<std::string> finished_at;
    /// File names inside the job directory.
    std::vector<std::string> result_paths;
    std::optional<std::string> error;

    bool terminal() const { return status == JobStatus::done || status == JobStatus::failed; }
    /// Everything except the spec, as kept in status.json.
    nlohmann::json status_json() const;
    nlohmann::json to_json() const;
};

/// Spec of an `analyze_blocks` job.
struct BlockJobSpec {
    std::vector<std::string> probes;
    std::vector<std::string> content_words;
    std::optional<std::string> base_prompt;
    std::optional<std::uint64_t> seed;

    static BlockJobSpec from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

/// Spec of an `evaluate` job.
struct EvalJobSpec {
    std::string manifest;
    bool tournament = true;

    static EvalJobSpec from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

/// Parses and fully validates a spec, including referenced files; returns the
/// normalized document (defaults filled in). Throws ValidationError.
nlohmann::json normalize_job_spec(JobKind kind, const nlohmann::json& spec, const Config& config);

/// Runs a validated job and writes its outputs into `out_dir`. Returns the
/// result file names, the primary image first. `hook` runs before each
/// denoising step and may throw CancelledError.
std::vector<std::string> execute_job(JobKind kind, const nlohmann::json& spec, const Config& config,
                                     const Backend& backend, const std::filesystem::path& out_dir,
                                     const StepHook& hook = {});

/// One directory per job holding spec.json, status.json and the results.
/// Every write goes to a temporary file first and is renamed into place.
class JobStore {
public:
    explicit JobStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path dir(const std::string& id) const { return root_ / id; }

    JobRecord create(JobKind kind, nlohmann::json spec);
    void save_status(const JobRecord& record) const;
    /// Every persisted job in submission order; unreadable directories are skipped.
    std::vector<JobRecord> load_all() const;

private:
    std::filesystem::path root_;
    std::mutex mu_;
    std::uint64_t next_seq_ = 0;
};

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Asynchronous job runner over a JobStore. On construction every job left
/// `running` becomes `failed` with reason "interrupted"; jobs left `queued`
/// are queued again in submission order.
class JobService {
public:
    JobService(Config config, std::shared_ptr<const Backend> backend);
    ~JobService();

    JobService(const JobService&) = delete;
    JobService& operator=(const JobService&) = delete;

    void start();
    /// Stops the workers; a running job is cancelled at its next step.
    void stop();

    /// Validates, persists as queued and returns the id.
    std::string submit(JobKind kind, const nlohmann::json& spec);
    /// Throws NotFoundError.
    JobRecord get(const std::string& id) const;
    std::vector<JobRecord> list() const;
    /// Path of result `index`; NotFoundError for an unknown id or index,
    /// ConflictError before the job is done.
    std::filesystem::path result_path(const std::string& id, std::size_t index) const;
    /// Queued: fails it at once. Running: fails it at the next step boundary.
    /// Terminal: no-op. Returns the acknowledgement document.
    nlohmann::json cancel(const std::string& id);
    /// Blocks until the job is terminal or the timeout passes.
    JobRecord wait(const std::string& id, std::chrono::milliseconds timeout) const;

    const Config& config() const { return config_; }
    const Backend& backend() const { return *backend_; }
    nlohmann::json health() const;

private:
    void worker_loop();
    void run_one(const std::string& id);
    void transition(JobRecord& rec);

    Config config_;
    std::shared_ptr<const Backend> backend_;
    JobStore store_;
    int n_workers_;

    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<std::string, JobRecord> jobs_;
    std::map<std::string, std::shared_ptr<std::atomic<bool>>> cancel_flags_;
    std::deque<std::string> queue_;
    std::mutex exclusive_mu_;
    bool stopping_ = false;
    bool started_ = false;
    std::vector<std::thread> workers_;
};

/// HTTP front end. Endpoints:
///   POST /jobs                  body {"kind", "spec"} or a bare spec with ?kind=
///   GET  /jobs                  all jobs, submission order
///   GET  /jobs/{id}
///   GET  /jobs/{id}/results/{n}
///   POST /jobs/{id}/cancel
///   GET  /health
///   GET  /config
class HttpFrontend {
public:
    explicit HttpFrontend(JobService& service);
    ~HttpFrontend();

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    void stop();
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);

private:
    void routes();

    JobService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace vton
