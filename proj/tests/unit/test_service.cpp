#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>

#include "support.hpp"
#include "vton/error.hpp"
#include "vton/image_io.hpp"
#include "vton/mock_backend.hpp"
#include "vton/service.hpp"

using namespace vton;
namespace fs = std::filesystem;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

/// Mock backend with a pause in every denoising step, counting how many
/// steps run at the same time.
class SlowBackend final : public Backend {
public:
    SlowBackend(std::chrono::milliseconds delay, bool exclusive) : delay_(delay) {
        MockBackendOptions o;
        o.exclusive = exclusive;
        inner_ = std::make_unique<MockBackend>(o);
    }
    const BackendInfo& info() const override { return inner_->info(); }
    const NoiseSchedule& schedule() const override { return inner_->schedule(); }
    LatentGrid encode(const RgbImage& image) const override { return inner_->encode(image); }
    RgbImage decode(const LatentGrid& latent) const override { return inner_->decode(latent); }
    LatentGrid denoise_step(const LatentGrid& z, int t, const DenoiserConditioning& c, const NoiseSchedule& s,
                            std::uint64_t seed) const override {
        const int now = ++active_;
        int seen = peak_.load();
        while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(delay_);
        --active_;
        return inner_->denoise_step(z, t, c, s, seed);
    }
    const ImageEncoder& image_encoder() const override { return inner_->image_encoder(); }
    const TextEncoder& text_encoder() const override { return inner_->text_encoder(); }
    const JointEncoder& joint_encoder() const override { return inner_->joint_encoder(); }
    int peak() const { return peak_; }

private:
    std::unique_ptr<MockBackend> inner_;
    std::chrono::milliseconds delay_;
    mutable std::atomic<int> active_{0}, peak_{0};
};

Config service_config(const fs::path& jobs, int workers = 2) {
    Config c;
    c.set("service.jobs_dir", jobs.string());
    c.set("service.workers", workers);
    return c;
}

json small_spec(const json& base, int steps = 8) {
    json s = base;
    s["steps"] = steps;
    s["seed"] = 3;
    return s;
}

bool tmp_files_in(const fs::path& dir) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.path().filename().string().find(".tmp") != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_SUITE("service") {
    TEST_CASE("submit, poll and fetch over HTTP") {
        const fs::path dir = test::scratch_dir("svc_http");
        const json spec = small_spec(test::write_tryon_fixture(dir));
        JobService service(service_config(dir / "jobs"), std::make_shared<MockBackend>());
        service.start();
        HttpFrontend http(service);
        const int port = http.start("127.0.0.1", 0);
        httplib::Client cli("127.0.0.1", port);

        const auto t0 = std::chrono::steady_clock::now();
        auto res = cli.Post("/jobs", json{{"kind", "tryon"}, {"spec", spec}}.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 202);
        const auto body = json::parse(res->body);
        CHECK(body["status"] == "queued");
        const std::string id = body["id"];

        json rec;
        for (int i = 0; i < 600; ++i) {
            res = cli.Get("/jobs/" + id);
            REQUIRE(res);
            REQUIRE(res->status == 200);
            rec = json::parse(res->body);
            if (rec["status"] == "done" || rec["status"] == "failed") break;
            std::this_thread::sleep_for(50ms);
        }
        CHECK(rec["status"] == "done");
        CHECK(rec["kind"] == "tryon");
        CHECK(rec["spec"]["scales"]["sketch"] == 0.7);
        CHECK(rec["result_paths"].size() == 2);
        CHECK(rec["error"].is_null());
        CHECK(rec["started_at"].is_string());

        res = cli.Get("/jobs/" + id + "/results/0");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Content-Type") == "image/png");
        const RgbImage img = decode_png(std::vector<std::uint8_t>(res->body.begin(), res->body.end()));
        CHECK(img.height() == 64);
        res = cli.Get("/jobs/" + id + "/results/1");
        REQUIRE(res);
        CHECK(json::parse(res->body).contains("steps"));
        CHECK(cli.Get("/jobs/" + id + "/results/7")->status == 404);
        CHECK(std::chrono::steady_clock::now() - t0 < 60s);

        // Bare spec with the kind in the query string.
        res = cli.Post("/jobs?kind=tryon", spec.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 202);
        CHECK(json::parse(res->body)["id"] != id);

        res = cli.Get("/jobs");
        REQUIRE(res);
        CHECK(json::parse(res->body)["jobs"].size() == 2);
        res = cli.Get("/health");
        REQUIRE(res);
        CHECK(json::parse(res->body)["status"] == "ok");
        res = cli.Get("/config");
        REQUIRE(res);
        CHECK(json::parse(res->body)["backend"]["steps"] == 50);

        http.stop();
        service.stop();
        CHECK_FALSE(tmp_files_in(dir / "jobs"));
        fs::remove_all(dir);
    }

    TEST_CASE("schema violations come back as field-level errors") {
        const fs::path dir = test::scratch_dir("svc_422");
        const json spec = test::write_tryon_fixture(dir);
        JobService service(service_config(dir / "jobs"), std::make_shared<MockBackend>());
        HttpFrontend http(service);
        const int port = http.start("127.0.0.1", 0);
        httplib::Client cli("127.0.0.1", port);

        auto fields_of = [](const httplib::Result& r) {
            std::set<std::string> out;
            const json doc = json::parse(r->body);
            for (const auto& f : doc["fields"]) out.insert(f["field"].get<std::string>());
            return out;
        };

        json no_prompts = spec;
        no_prompts.erase("sketch");
        no_prompts.erase("image_prompt");
        no_prompts.erase("text_prompt");
        auto res = cli.Post("/jobs", json{{"kind", "tryon"}, {"spec", no_prompts}}.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 422);
        CHECK(fields_of(res).count("conditions"));

        json bad = spec;
        bad.erase("person");
        bad["alpha"] = -1;
        bad["scales"] = {{"sketch", "high"}};
        bad["colour"] = "red";
        res = cli.Post("/jobs", json{{"kind", "tryon"}, {"spec", bad}}.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 422);
        const auto f = fields_of(res);
        CHECK(f.count("person"));
        CHECK(f.count("alpha"));
        CHECK(f.count("scales.sketch"));
        CHECK(f.count("colour"));

        json missing_file = spec;
        missing_file["sketch"] = (dir / "nope.png").string();
        res = cli.Post("/jobs?kind=tryon", missing_file.dump(), "application/json");
        CHECK(res->status == 422);
        CHECK(fields_of(res).count("sketch"));

        res = cli.Post("/jobs", json{{"kind", "teleport"}, {"spec", spec}}.dump(), "application/json");
        CHECK(res->status == 422);
        CHECK(fields_of(res).count("kind"));
        res = cli.Post("/jobs", spec.dump(), "application/json");
        CHECK(res->status == 422);
        CHECK(fields_of(res).count("kind"));
        res = cli.Post("/jobs", "{not json", "application/json");
        CHECK(res->status == 400);

        res = cli.Post("/jobs",
                       json{{"kind", "analyze_blocks"}, {"spec", {{"probes", json::array()}, {"seed", -1}}}}.dump(),
                       "application/json");
        CHECK(res->status == 422);
        CHECK(fields_of(res) == std::set<std::string>{"probes", "content_words", "seed"});
        res = cli.Post("/jobs", json{{"kind", "evaluate"}, {"spec", json::object()}}.dump(), "application/json");
        CHECK(res->status == 422);
        CHECK(fields_of(res).count("manifest"));

        CHECK(service.list().empty());
        http.stop();
        fs::remove_all(dir);
    }

    TEST_CASE("not-found, conflict and cancel of queued and done jobs") {
        const fs::path dir = test::scratch_dir("svc_states");
        const json spec = small_spec(test::write_tryon_fixture(dir));
        JobService service(service_config(dir / "jobs"), std::make_shared<MockBackend>());
        HttpFrontend http(service);
        const int port = http.start("127.0.0.1", 0);
        httplib::Client cli("127.0.0.1", port);

        CHECK(cli.Get("/jobs/doesnotexist")->status == 404);
        CHECK(cli.Post("/jobs/doesnotexist/cancel", "", "application/json")->status == 404);
        CHECK(cli.Get("/jobs/doesnotexist/results/0")->status == 404);

        // Workers not started yet: jobs stay queued.
        const std::string a = service.submit(JobKind::tryon, spec);
        const std::string b = service.submit(JobKind::tryon, spec);
        CHECK(a != b);
        CHECK(cli.Get("/jobs/" + a + "/results/0")->status == 409);

        auto res = cli.Post("/jobs/" + a + "/cancel", "", "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(json::parse(res->body)["effect"] == "cancelled");
        CHECK(service.get(a).status == JobStatus::failed);
        CHECK(service.get(a).error == "cancelled");

        service.start();
        const auto done = service.wait(b, 30s);
        CHECK(done.status == JobStatus::done);
        res = cli.Post("/jobs/" + b + "/cancel", "", "application/json");
        CHECK(res->status == 200);
        const auto ack = json::parse(res->body);
        CHECK(ack["acknowledged"] == true);
        CHECK(ack["effect"] == "none");
        CHECK(ack["status"] == "done");
        CHECK(service.get(b).status == JobStatus::done);
        CHECK(cli.Get("/jobs/" + a + "/results/0")->status == 409);

        http.stop();
        service.stop();
        fs::remove_all(dir);
    }

    TEST_CASE("cancelling a running job stops it at a step boundary") {
        const fs::path dir = test::scratch_dir("svc_cancel");
        const json spec = small_spec(test::write_tryon_fixture(dir), 50);
        auto backend = std::make_shared<SlowBackend>(20ms, false);
        JobService service(service_config(dir / "jobs", 1), backend);
        service.start();
        const std::string id = service.submit(JobKind::tryon, spec);
        for (int i = 0; i < 500 && service.get(id).status != JobStatus::running; ++i) std::this_thread::sleep_for(5ms);
        REQUIRE(service.get(id).status == JobStatus::running);
        const auto ack = service.cancel(id);
        CHECK(ack["effect"] == "cancelling");
        const auto rec = service.wait(id, 10s);
        CHECK(rec.status == JobStatus::failed);
        CHECK(rec.error == "cancelled");
        CHECK(rec.result_paths.empty());
        service.stop();
        fs::remove_all(dir);
    }

    TEST_CASE("restart marks running jobs interrupted and requeues queued ones") {
        const fs::path dir = test::scratch_dir("svc_restart");
        const json spec = small_spec(test::write_tryon_fixture(dir));
        std::string crashed, waiting, finished;
        {
            JobService first(service_config(dir / "jobs"), std::make_shared<MockBackend>());
            first.start();
            finished = first.submit(JobKind::tryon, spec);
            CHECK(first.wait(finished, 30s).status == JobStatus::done);
            first.stop();
            crashed = first.submit(JobKind::tryon, spec);
            waiting = first.submit(JobKind::edit, json{{"text_prompt", "red top"}, {"width", 64}, {"height", 64},
                                                       {"steps", 4}});
        }
        // Simulate a crash in the middle of `crashed`.
        {
            JobStore store(dir / "jobs");
            auto all = store.load_all();
            REQUIRE(all.size() == 3);
            for (auto& r : all) {
                if (r.id == crashed) {
                    r.status = JobStatus::running;
                    r.started_at = "2026-01-01T00:00:00.000Z";
                    store.save_status(r);
                }
            }
        }
        JobService second(service_config(dir / "jobs"), std::make_shared<MockBackend>());
        const auto listed = second.list();
        REQUIRE(listed.size() == 3);
        CHECK(listed[0].id == finished);
        CHECK(second.get(finished).status == JobStatus::done);
        CHECK(second.get(crashed).status == JobStatus::failed);
        CHECK(second.get(crashed).error == "interrupted");
        CHECK(second.get(waiting).status == JobStatus::queued);
        second.start();
        CHECK(second.wait(waiting, 30s).status == JobStatus::done);
        CHECK(fs::exists(second.result_path(finished, 0)));
        second.stop();

        // status.json on disk agrees.
        const auto st = json::parse(std::ifstream(dir / "jobs" / crashed / "status.json"));
        CHECK(st["status"] == "failed");
        CHECK(st["error"] == "interrupted");
        fs::remove_all(dir);
    }

    TEST_CASE("exclusive backend runs one job at a time in FIFO order") {
        const fs::path dir = test::scratch_dir("svc_fifo");
        const json spec = small_spec(test::write_tryon_fixture(dir), 6);
        auto backend = std::make_shared<SlowBackend>(3ms, true);
        JobService service(service_config(dir / "jobs", 3), backend);
        std::vector<std::string> ids;
        for (int i = 0; i < 5; ++i) ids.push_back(service.submit(JobKind::tryon, spec));
        service.start();
        for (const auto& id : ids) CHECK(service.wait(id, 30s).status == JobStatus::done);
        CHECK(backend->peak() == 1);
        for (std::size_t i = 1; i < ids.size(); ++i) {
            CHECK(*service.get(ids[i - 1]).finished_at <= *service.get(ids[i]).started_at);
        }
        service.stop();

        // A shareable backend with several workers does overlap.
        auto shared = std::make_shared<SlowBackend>(3ms, false);
        JobService parallel(service_config(dir / "jobs2", 3), shared);
        std::vector<std::string> more;
        for (int i = 0; i < 3; ++i) more.push_back(parallel.submit(JobKind::tryon, small_spec(spec, 20)));
        parallel.start();
        for (const auto& id : more) CHECK(parallel.wait(id, 30s).status == JobStatus::done);
        CHECK(shared->peak() > 1);
        parallel.stop();
        fs::remove_all(dir);
    }

    TEST_CASE("analysis and evaluation jobs") {
        const fs::path dir = test::scratch_dir("svc_kinds");
        write_png(dir / "probe.png", test::block_image(64, 64, 8, 9));
        write_png(dir / "g1.png", test::block_image(64, 64, 8, 1));
        write_png(dir / "g2.png", test::block_image(64, 64, 8, 2));
        std::ofstream(dir / "m.jsonl") << R"({"example":"e","method":"x","generated":"g1.png","text":"red"})" << "\n"
                                       << R"({"example":"e","method":"y","generated":"g2.png","text":"red"})" << "\n";
        Config cfg = service_config(dir / "jobs");
        cfg.set("backend.steps", 4);
        cfg.set("elo.n_shuffles", 2);
        JobService service(cfg, std::make_shared<MockBackend>());
        service.start();
        const auto blocks = service.submit(
            JobKind::analyze_blocks, json{{"probes", {(dir / "probe.png").string()}}, {"content_words", {"top"}}});
        const auto eval = service.submit(JobKind::evaluate, json{{"manifest", (dir / "m.jsonl").string()}});
        const auto b = service.wait(blocks, 30s);
        REQUIRE(b.status == JobStatus::done);
        CHECK(b.result_paths == std::vector<std::string>{"blocks.png", "blocks.tsv", "blocks.json"});
        CHECK(read_png(service.result_path(blocks, 0)).width() > 0);
        const auto e = service.wait(eval, 30s);
        REQUIRE(e.status == JobStatus::done);
        CHECK(e.result_paths[0] == "report.md");
        CHECK(e.spec["tournament"] == true);
        const auto elo = json::parse(std::ifstream(service.result_path(eval, 2)));
        CHECK(elo["all"]["matches"] == 2 * 3);
        service.stop();
        fs::remove_all(dir);
    }
}
