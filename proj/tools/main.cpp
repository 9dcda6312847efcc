#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vton/backend.hpp"
#include "vton/config.hpp"
#include "vton/error.hpp"
#include "vton/selfcheck.hpp"
#include "vton/service.hpp"

extern char** environ;

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum Exit { ok = 0, validation = 1, runtime = 2, selfcheck_failed = 3 };

struct GenerationFlags {
    std::optional<std::string> person;
    std::vector<std::string> garment_masks;
    std::optional<std::string> sketch;
    std::optional<std::string> image_prompt;
    std::optional<std::string> text;
    std::optional<double> style_scale, content_scale, sketch_scale, text_scale, alpha;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps, width, height;
};

struct Options {
    std::string config_path;
    bool print_config = false;
    std::string out = "out";
    GenerationFlags gen;

    std::vector<std::string> probes, words;
    std::optional<std::string> base_prompt;

    std::string manifest;
    bool no_tournament = false;

    std::optional<std::string> host;
    std::optional<int> port, workers;
    std::optional<std::string> jobs_dir;

    std::vector<std::string> suites;
    bool json_output = false;
};

void add_generation_flags(CLI::App& cmd, GenerationFlags& g, bool tryon) {
    if (tryon) {
        cmd.add_option("--person", g.person, "Person image (PNG)");
        cmd.add_option("--garment-mask", g.garment_masks, "Garment mask PNG; repeat for several items");
        cmd.add_option("--alpha", g.alpha, "Removal strength");
    }
    cmd.add_option("--sketch", g.sketch, "Sketch PNG, dark strokes on white");
    cmd.add_option("--image-prompt", g.image_prompt, "Image prompt PNG");
    cmd.add_option("--text", g.text, "Text prompt");
    cmd.add_option("--style-scale", g.style_scale);
    cmd.add_option("--content-scale", g.content_scale);
    cmd.add_option("--sketch-scale", g.sketch_scale);
    cmd.add_option("--text-scale", g.text_scale);
    cmd.add_option("--seed", g.seed);
    cmd.add_option("--steps", g.steps);
    if (!tryon) {
        cmd.add_option("--width", g.width, "Output width without a sketch");
        cmd.add_option("--height", g.height, "Output height without a sketch");
    }
}

// Defaults, then the config file, then VTON_* variables, then flags.
vton::Config effective_config(const Options& o) {
    vton::Config cfg = o.config_path.empty() ? vton::Config() : vton::Config::load(o.config_path);
    cfg.apply_env(environ);
    const auto& g = o.gen;
    if (g.style_scale) cfg.set("scales.style", *g.style_scale);
    if (g.content_scale) cfg.set("scales.content", *g.content_scale);
    if (g.sketch_scale) cfg.set("scales.sketch", *g.sketch_scale);
    if (g.text_scale) cfg.set("scales.text", *g.text_scale);
    if (g.alpha) cfg.set("ofr.alpha", *g.alpha);
    if (g.steps) cfg.set("backend.steps", *g.steps);
    if (o.host) cfg.set("service.host", *o.host);
    if (o.port) cfg.set("service.port", *o.port);
    if (o.workers) cfg.set("service.workers", *o.workers);
    if (o.jobs_dir) cfg.set("service.jobs_dir", *o.jobs_dir);
    return cfg;
}

json generation_spec(const GenerationFlags& g, bool tryon) {
    json s = json::object();
    if (tryon) {
        if (g.person) s["person"] = *g.person;
        if (g.garment_masks.size() == 1) {
            s["garment_mask"] = g.garment_masks.front();
        } else if (!g.garment_masks.empty()) {
            s["garment_mask"] = g.garment_masks;
        }
    }
    if (g.sketch) s["sketch"] = *g.sketch;
    if (g.image_prompt) s["image_prompt"] = *g.image_prompt;
    if (g.text) s["text_prompt"] = *g.text;
    if (g.seed) s["seed"] = *g.seed;
    if (g.width) s["width"] = *g.width;
    if (g.height) s["height"] = *g.height;
    return s;
}

json block_spec(const Options& o) {
    json s = {{"probes", o.probes}, {"content_words", o.words}};
    if (o.base_prompt) s["base_prompt"] = *o.base_prompt;
    if (o.gen.seed) s["seed"] = *o.gen.seed;
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_job(const Options& o, vton::JobKind kind, const json& raw_spec) {
    const vton::Config cfg = effective_config(o);
    const json spec = vton::normalize_job_spec(kind, raw_spec, cfg);
    if (o.print_config) {
        std::cout << json{{"config", cfg.document()}, {"spec", spec}}.dump(2) << "\n";
        return ok;
    }
    const auto backend = vton::make_backend(cfg);
    const fs::path out_dir = o.out;
    const auto files = vton::execute_job(kind, spec, cfg, *backend, out_dir);
    write_text(out_dir / "spec.json", spec.dump(2) + "\n");
    for (const auto& f : files) std::cout << (out_dir / f).string() << "\n";
    if (kind == vton::JobKind::evaluate) std::cout << read_text(out_dir / "report.md");
    return ok;
}

std::atomic<bool> g_stop{false};

int run_serve(const Options& o) {
    const vton::Config cfg = effective_config(o);
    if (o.print_config) {
        std::cout << json{{"config", cfg.document()}}.dump(2) << "\n";
        return ok;
    }
    vton::JobService service(cfg, vton::make_backend(cfg));
    service.start();
    vton::HttpFrontend http(service);
    const int port = http.start(cfg.value<std::string>("service.host"), cfg.value<int>("service.port"));
    std::cerr << "serving on http://" << cfg.value<std::string>("service.host") << ":" << port << "\n";
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    http.stop();
    service.stop();
    return ok;
}

int run_selfcheck_cmd(const Options& o) {
    const auto results = vton::run_selfcheck(o.suites);
    bool all = true;
    for (const auto& r : results) all = all && r.passed();
    if (o.json_output) {
        json doc = json::array();
        for (const auto& r : results) doc.push_back(r.to_json());
        std::cout << json{{"passed", all}, {"suites", doc}}.dump(2) << "\n";
    } else {
        std::cout << vton::format_selfcheck(results);
        std::cout << (all ? "selfcheck passed" : "selfcheck FAILED") << "\n";
    }
    return all ? ok : selfcheck_failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal garment editing and virtual try-on on a pluggable diffusion backend"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_flag("--print-config", o.print_config, "Print the effective configuration (and job spec) and exit");

    auto* edit = app.add_subcommand("edit", "Generate a garment from sketch, image and text prompts");
    add_generation_flags(*edit, o.gen, false);
    edit->add_option("--out", o.out, "Output directory");

    auto* tryon = app.add_subcommand("tryon", "Replace a worn garment guided by the prompts");
    add_generation_flags(*tryon, o.gen, true);
    tryon->add_option("--out", o.out, "Output directory");

    auto* blocks = app.add_subcommand("blocks", "Rank attention blocks by style and content sensitivity");
    blocks->add_option("--probe", o.probes, "Probe image PNG; repeatable")->required();
    blocks->add_option("--word", o.words, "Content word; repeatable")->required();
    blocks->add_option("--base-prompt", o.base_prompt);
    blocks->add_option("--seed", o.gen.seed);
    blocks->add_option("--out", o.out, "Output directory");

    auto* eval = app.add_subcommand("eval", "Score a results manifest and run the Elo tournament");
    eval->add_option("--manifest", o.manifest, "JSONL results manifest")->required();
    eval->add_flag("--no-tournament", o.no_tournament);
    eval->add_option("--out", o.out, "Output directory");

    auto* serve = app.add_subcommand("serve", "Run the HTTP job service");
    serve->add_option("--host", o.host);
    serve->add_option("--port", o.port);
    serve->add_option("--workers", o.workers);
    serve->add_option("--jobs-dir", o.jobs_dir);

    auto* check = app.add_subcommand("selfcheck", "Run the mock-backend property suites");
    check->add_option("--suite", o.suites, "Suite to run; repeatable (default: all)");
    check->add_flag("--json", o.json_output);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : validation;
    }

    try {
        if (*edit) return run_job(o, vton::JobKind::edit, generation_spec(o.gen, false));
        if (*tryon) return run_job(o, vton::JobKind::tryon, generation_spec(o.gen, true));
        if (*blocks) return run_job(o, vton::JobKind::analyze_blocks, block_spec(o));
        if (*eval) {
            return run_job(o, vton::JobKind::evaluate, {{"manifest", o.manifest}, {"tournament", !o.no_tournament}});
        }
        if (*serve) return run_serve(o);
        if (*check) return run_selfcheck_cmd(o);
    } catch (const vton::ValidationError& e) {
        std::cerr << "error: validation failed\n";
        for (const auto& f : e.errors()) std::cerr << "  " << f.field << ": " << f.message << "\n";
        return validation;
    } catch (const vton::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return runtime;
    }
    return ok;
}
