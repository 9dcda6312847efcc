// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "support.hpp"
#include "vton/elo.hpp"
#include "vton/evalsuite.hpp"
#include "vton/image_io.hpp"
#include "vton/removal.hpp"
#include "vton/selfcheck.hpp"

extern char** environ;

using namespace vton;
using nlohmann::json;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

// Pinned tolerances and limits.
constexpr double kOfrFullTol = 1e-6;
constexpr double kOfrLawRelTol = 1e-9;
constexpr double kCdFixture = 3.2624;
constexpr double kCdFixtureTol = 1e-4;
constexpr double kEloSumTol = 1e-9;
constexpr double kServiceSeconds = 60.0;

struct Outcome {
    bool ok = true;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back("failed: " + what);
        }
    }
};

std::string suite_summary(const SuiteResult& s, Outcome& o) {
    for (const auto& c : s.checks) o.expect(c.passed, c.name + (c.detail.empty() ? "" : " [" + c.detail + "]"));
    std::ostringstream os;
    os.precision(3);
    os << s.checks.size() << " checks, " << s.seconds << " s (limit " << s.limit_seconds << " s)";
    o.expect(s.within_limit(), "runtime limit");
    return os.str();
}

// --- independent oracles ------------------------------------------------------

double dot(const LatentGrid& a, const LatentGrid& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a.values()[i]) * b.values()[i];
    return static_cast<double>(s);
}

void ofr_oracle(Outcome& o) {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> n;
    int bad = 0;
    for (int i = 0; i < 200; ++i) {
        LatentGrid z(4, 8, 8), v(4, 8, 8);
        for (auto& x : z.values()) x = n(rng);
        for (auto& x : v.values()) x = n(rng);
        const double vn = std::sqrt(dot(v, v));
        LatentGrid u = v;
        for (auto& x : u.values()) x /= vn;
        const RemovalDirection d{u, "oracle", vn};
        const double zu = dot(z, u), zn = std::sqrt(dot(z, z));
        if (std::abs(dot(remove_item(z, d, 1.0), u)) > kOfrFullTol * zn) ++bad;
        for (double a : {0.25, 0.5, 0.75}) {
            const double expected = (1.0 - a) * zu;
            if (std::abs(dot(remove_item(z, d, a), u) - expected) > kOfrLawRelTol * std::abs(expected) + 1e-13 * zn) {
                ++bad;
            }
        }
    }
    o.expect(bad == 0, "extended-precision projection oracle (" + std::to_string(bad) + " mismatches)");
}

void metrics_oracle(Outcome& o) {
    // Mean nearest distances by hand: from (0,0) and (10,0) to (0,1) are 1
    // and sqrt(101); back from (0,1) the nearest is 1.
    const double cd = 0.5 * ((1.0 + std::sqrt(101.0)) / 2.0 + 1.0);
    o.expect(std::abs(cd - kCdFixture) <= kCdFixtureTol, "hand-derived fixture value");
    o.expect(std::abs(chamfer_distance(PointSet2D{{0, 0}, {10, 0}}, PointSet2D{{0, 1}}) - cd) < 1e-12,
             "library chamfer against hand value");

    const double expected = 1.0 / (1.0 + std::pow(10.0, 0.0));
    const double a = 1000.0 + 32.0 * (1.0 - expected), b = 1000.0 - 32.0 * (1.0 - expected);
    o.expect(a == 1016.0 && b == 984.0, "hand Elo fixture");
    EloState s = EloState::with_methods({"a", "b"});
    elo_apply(s, {"a", "b", Verdict::a_wins, "c", ""});
    o.expect(s.ratings["a"] == a && s.ratings["b"] == b, "library Elo against hand value");

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> pick(0, 2), verdict(0, 2);
    const std::vector<std::string> m{"x", "y", "z"};
    EloState t = EloState::with_methods(m);
    for (int i = 0; i < 10000; ++i) {
        const int i1 = pick(rng), i2 = (i1 + 1 + pick(rng) % 2) % 3;
        elo_apply(t, {m[i1], m[i2], static_cast<Verdict>(verdict(rng)), "c", ""});
    }
    o.expect(std::abs(t.sum() - 3000.0) <= kEloSumTol, "conservation on an independent update stream");
}

// --- processes ----------------------------------------------------------------

struct Proc {
    pid_t pid = -1;
    int code = -1;
};

Proc spawn(const std::vector<std::string>& args, const fs::path& stdout_file, const fs::path& stderr_file) {
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 1, stdout_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_addopen(&fa, 2, stderr_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    Proc p;
    if (posix_spawn(&p.pid, argv[0], &fa, nullptr, argv.data(), environ) != 0) p.pid = -1;
    posix_spawn_file_actions_destroy(&fa);
    return p;
}

int wait_exit(Proc& p) {
    int status = 0;
    ::waitpid(p.pid, &status, 0);
    p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return p.code;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::vector<std::string>& args, const fs::path& dir, std::string* out = nullptr) {
    std::vector<std::string> full{VTON_CLI};
    full.insert(full.end(), args.begin(), args.end());
    Proc p = spawn(full, dir / "cli.out", dir / "cli.err");
    if (p.pid < 0) return -1;
    const int code = wait_exit(p);
    if (out) *out = slurp(dir / "cli.out");
    return code;
}

// `vton serve` on a free port; returns the port or -1.
struct Server {
    Proc proc;
    int port = -1;

    void kill_hard() {
        if (proc.pid > 0) {
            ::kill(proc.pid, SIGKILL);
            wait_exit(proc);
            proc.pid = -1;
        }
    }
    void stop() {
        if (proc.pid > 0) {
            ::kill(proc.pid, SIGTERM);
            wait_exit(proc);
            proc.pid = -1;
        }
    }
};

Server start_server(const fs::path& dir, const fs::path& jobs) {
    Server s;
    const fs::path err = dir / "serve.err";
    s.proc = spawn({VTON_CLI, "serve", "--port", "0", "--workers", "1", "--jobs-dir", jobs.string()}, dir / "serve.out",
                   err);
    const auto deadline = std::chrono::steady_clock::now() + 10s;
    while (s.proc.pid > 0 && std::chrono::steady_clock::now() < deadline) {
        const std::string text = slurp(err);
        const auto at = text.find("serving on http://");
        if (at != std::string::npos && text.find('\n', at) != std::string::npos) {
            s.port = std::stoi(text.substr(text.rfind(':', text.find('\n', at)) + 1));
            break;
        }
        std::this_thread::sleep_for(10ms);
    }
    return s;
}

json get_json(httplib::Client& cli, const std::string& path) {
    auto r = cli.Get(path);
    if (!r || r->status != 200) return json();
    return json::parse(r->body, nullptr, false);
}

// --- criteria -----------------------------------------------------------------

void report(const std::string& name, const Outcome& o, const std::string& summary, int& failures) {
    std::cout << (o.ok ? "PASS" : "FAIL") << "  " << name << ": " << summary << "\n";
    for (const auto& n : o.notes) std::cout << "        " << n << "\n";
    if (!o.ok) ++failures;
}

std::string end_to_end(Outcome& o) {
    const fs::path dir = test::scratch_dir("accept_cli");
    const json fx = test::write_tryon_fixture(dir);
    const int code = run_cli({"tryon", "--person", fx["person"].get<std::string>(), "--garment-mask", fx["garment_mask"].get<std::string>(), "--sketch",
                              fx["sketch"].get<std::string>(), "--image-prompt", fx["image_prompt"].get<std::string>(), "--text", "blue top", "--out",
                              (dir / "out").string()},
                             dir);
    o.expect(code == 0, "tryon exit code 0 (got " + std::to_string(code) + ")");
    const json spec = json::parse(slurp(dir / "out" / "spec.json"), nullptr, false);
    o.expect(spec.is_object(), "spec.json written");
    if (spec.is_object()) {
        o.expect(spec["scales"]["sketch"] == 0.7, "sketch scale 0.7");
        o.expect(spec["scales"]["style"] == 0.5 && spec["scales"]["content"] == 0.5, "image scales 0.5");
        o.expect(spec["scales"]["text"] == 0.5, "text scale 0.5");
        o.expect(spec["steps"] == 50, "steps 50");
        o.expect(spec["guidance_scale"] == 7.5, "guidance 7.5");
    }
    o.expect(fs::exists(dir / "out" / "result.png") && fs::exists(dir / "out" / "diagnostics.json"),
             "result PNG and diagnostics JSON written");
    std::string out;
    const int sc = run_cli({"selfcheck"}, dir, &out);
    o.expect(sc == 0, "selfcheck exit code 0 (got " + std::to_string(sc) + ")");
    fs::remove_all(dir);
    return "tryon defaults sketch 0.7 / image 0.5 / text 0.5, steps 50, guidance 7.5; selfcheck exit " +
           std::to_string(sc);
}

std::string service(Outcome& o) {
    const fs::path dir = test::scratch_dir("accept_svc");
    const fs::path jobs = dir / "jobs";
    json spec = test::write_tryon_fixture(dir);
    std::ostringstream summary;
    summary.precision(3);

    Server srv = start_server(dir, jobs);
    o.expect(srv.port > 0, "server started");
    if (srv.port <= 0) return "server did not start";
    httplib::Client cli("127.0.0.1", srv.port);

    // Happy path.
    const auto t0 = std::chrono::steady_clock::now();
    auto res = cli.Post("/jobs", json{{"kind", "tryon"}, {"spec", spec}}.dump(), "application/json");
    o.expect(res && res->status == 202, "submit returns 202");
    std::string id;
    if (res && res->status == 202) id = json::parse(res->body)["id"];
    std::string status;
    while (!id.empty() && std::chrono::steady_clock::now() - t0 < std::chrono::duration<double>(kServiceSeconds)) {
        status = get_json(cli, "/jobs/" + id).value("status", "");
        if (status == "done" || status == "failed") break;
        std::this_thread::sleep_for(20ms);
    }
    auto img = cli.Get("/jobs/" + id + "/results/0");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.expect(status == "done", "job finished as done (" + status + ")");
    o.expect(img && img->status == 200 && img->get_header_value("Content-Type") == "image/png", "result served as PNG");
    if (img && img->status == 200) {
        const RgbImage decoded = decode_png(std::vector<std::uint8_t>(img->body.begin(), img->body.end()));
        o.expect(decoded.height() == 64 && decoded.width() == 64, "result decodes at the person resolution");
    }
    o.expect(secs < kServiceSeconds, "happy path under 60 s");
    summary << "happy path " << secs << " s";

    // Field-level validation errors.
    json bad = spec;
    bad.erase("sketch");
    bad.erase("image_prompt");
    bad.erase("text_prompt");
    bad["alpha"] = -1;
    res = cli.Post("/jobs", json{{"kind", "tryon"}, {"spec", bad}}.dump(), "application/json");
    std::set<std::string> fields;
    if (res && res->status == 422) {
        const json doc = json::parse(res->body);
        for (const auto& f : doc["fields"]) {
            if (!f.value("message", "").empty()) fields.insert(f["field"].get<std::string>());
        }
    }
    o.expect(res && res->status == 422, "schema violation returns 422");
    o.expect(fields.count("conditions") && fields.count("alpha"), "errors name 'conditions' and 'alpha'");
    summary << "; 422 fields:";
    for (const auto& f : fields) summary << " " << f;

    // Crash in the middle of a long job, then restart on the same job store.
    res = cli.Post("/jobs",
                   json{{"kind", "edit"},
                        {"spec", {{"text_prompt", "red top"}, {"width", 4096}, {"height", 4096}, {"steps", 1000}}}}
                       .dump(),
                   "application/json");
    std::string long_id;
    if (res && res->status == 202) long_id = json::parse(res->body)["id"];
    bool saw_running = false;
    for (int i = 0; i < 1000 && !long_id.empty(); ++i) {
        if (get_json(cli, "/jobs/" + long_id).value("status", "") == "running") {
            saw_running = true;
            break;
        }
        std::this_thread::sleep_for(5ms);
    }
    o.expect(saw_running, "long job observed running before the crash");
    srv.kill_hard();

    Server again = start_server(dir, jobs);
    o.expect(again.port > 0, "server restarted");
    if (again.port > 0) {
        httplib::Client cli2("127.0.0.1", again.port);
        const json crashed = get_json(cli2, "/jobs/" + long_id);
        o.expect(crashed.value("status", "") == "failed" && crashed.value("error", "") == "interrupted",
                 "crashed job reappears failed with reason interrupted (" + crashed.dump() + ")");
        const json earlier = get_json(cli2, "/jobs/" + id);
        o.expect(earlier.value("status", "") == "done", "earlier job still listed as done");
        const json listing = get_json(cli2, "/jobs");
        o.expect(listing.contains("jobs") && listing["jobs"].size() == 2, "restart lists every persisted job");
        auto again_img = cli2.Get("/jobs/" + id + "/results/0");
        o.expect(again_img && again_img->status == 200 && img && again_img->body == img->body,
                 "earlier result still served byte-identical");
        again.stop();
    }
    summary << "; crash-restart interrupted job failed";
    fs::remove_all(dir);
    return summary.str();
}

}  // namespace

int main() {
    int failures = 0;
    auto suite = [&](const std::string& label, const std::string& name, const std::function<void(Outcome&)>& extra) {
        Outcome o;
        const SuiteResult r = run_selfcheck_suite(name);
        std::string summary = suite_summary(r, o);
        if (extra) extra(o);
        report(label, o, summary, failures);
    };

    suite("OFR suite", "ofr", ofr_oracle);
    suite("Mask suite", "mask", {});
    suite("RANF suite", "ranf", {});
    suite("CSPE/SDI suite", "cspe_sdi", {});
    suite("Metrics suite", "metrics", metrics_oracle);
    {
        Outcome o;
        const std::string s = end_to_end(o);
        report("End-to-end defaults", o, s, failures);
    }
    {
        Outcome o;
        const std::string s = service(o);
        report("Service suite", o, s, failures);
    }
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << "\n";
    return failures;
}
