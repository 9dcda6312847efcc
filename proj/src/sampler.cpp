#include "vton/sampler.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "vton/config.hpp"
#include "vton/error.hpp"
#include "vton/image_io.hpp"

namespace vton {

using nlohmann::json;

// --- wire format -------------------------------------------------------------

TryOnJobSpec TryOnJobSpec::defaults(const Config& config) {
    TryOnJobSpec s;
    s.scales.style = config.value<double>("scales.style");
    s.scales.content = config.value<double>("scales.content");
    s.scales.sketch = config.value<double>("scales.sketch");
    s.scales.text = config.value<double>("scales.text");
    s.alpha = config.value<double>("ofr.alpha");
    s.steps = config.value<int>("backend.steps");
    s.guidance_scale = config.value<double>("backend.guidance_scale");
    return s;
}

namespace {

class FieldReader {
public:
    explicit FieldReader(const json& doc) : doc_(doc) {}

    std::vector<FieldError> errors;

    bool has(const std::string& key) const { return doc_.contains(key) && !doc_[key].is_null(); }

    std::optional<std::string> path(const std::string& key) {
        if (!has(key)) return std::nullopt;
        const auto& v = doc_[key];
        if (!v.is_string()) {
            errors.push_back({key, "must be a string"});
            return std::nullopt;
        }
        if (v.get<std::string>().empty()) {
            errors.push_back({key, "must not be empty"});
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    void number(const json& v, const std::string& field, double& out, double lo, double hi) {
        if (!v.is_number()) {
            errors.push_back({field, "must be a number"});
            return;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x) || x < lo || x > hi) {
            errors.push_back({field, "must be in [" + fmt(lo) + ", " + fmt(hi) + "]"});
            return;
        }
        out = x;
    }

    template <typename Int>
    void integer(const json& v, const std::string& field, Int& out, long long lo, long long hi) {
        if (!v.is_number_integer()) {
            errors.push_back({field, "must be an integer"});
            return;
        }
        if (v.is_number_unsigned()) {
            const auto x = v.get<unsigned long long>();
            if (x > static_cast<unsigned long long>(hi)) {
                errors.push_back({field, "must be at most " + std::to_string(hi)});
                return;
            }
            out = static_cast<Int>(x);
            return;
        }
        const auto x = v.get<long long>();
        if (x < lo || x > hi) {
            errors.push_back({field, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"});
            return;
        }
        out = static_cast<Int>(x);
    }

private:
    static std::string fmt(double x) {
        if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
        json j = x;
        return j.dump();
    }

    const json& doc_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TryOnJobSpec TryOnJobSpec::from_json(const json& doc, const TryOnJobSpec& defaults, bool tryon) {
    if (!doc.is_object()) throw ValidationError("(root)", "job spec must be a JSON object");
    static const std::set<std::string> common = {"sketch", "image_prompt", "text_prompt", "scales",
                                                 "alpha",  "seed",         "steps",       "guidance_scale"};
    static const std::set<std::string> tryon_only = {"person", "garment_mask"};
    static const std::set<std::string> edit_only = {"width", "height"};

    TryOnJobSpec s = defaults;
    s.person.reset();
    s.garment_mask.clear();
    s.sketch.reset();
    s.image_prompt.reset();
    s.text_prompt.reset();

    FieldReader r(doc);
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const auto& k = it.key();
        const bool known = common.count(k) || (tryon ? tryon_only.count(k) : edit_only.count(k));
        if (!known) r.errors.push_back({k, "unknown field"});
    }

    if (tryon) {
        s.person = r.path("person");
        if (!r.has("person")) r.errors.push_back({"person", "is required"});
        if (r.has("garment_mask")) {
            const auto& g = doc["garment_mask"];
            if (g.is_string()) {
                if (g.get<std::string>().empty()) {
                    r.errors.push_back({"garment_mask", "must not be empty"});
                } else {
                    s.garment_mask.push_back(g.get<std::string>());
                }
            } else if (g.is_array()) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (!g[i].is_string() || g[i].get<std::string>().empty()) {
                        r.errors.push_back({"garment_mask[" + std::to_string(i) + "]", "must be a non-empty string"});
                    } else {
                        s.garment_mask.push_back(g[i].get<std::string>());
                    }
                }
            } else {
                r.errors.push_back({"garment_mask", "must be a string or a list of strings"});
            }
        }
    } else {
        if (r.has("width")) r.integer(doc["width"], "width", s.width, 1, 8192);
        if (r.has("height")) r.integer(doc["height"], "height", s.height, 1, 8192);
    }

    s.sketch = r.path("sketch");
    s.image_prompt = r.path("image_prompt");
    s.text_prompt = r.path("text_prompt");

    if (r.has("scales")) {
        const auto& sc = doc["scales"];
        if (!sc.is_object()) {
            r.errors.push_back({"scales", "must be an object"});
        } else {
            for (auto it = sc.begin(); it != sc.end(); ++it) {
                const std::string field = "scales." + it.key();
                double* dst = it.key() == "style"     ? &s.scales.style
                              : it.key() == "content" ? &s.scales.content
                              : it.key() == "sketch"  ? &s.scales.sketch
                              : it.key() == "text"    ? &s.scales.text
                                                      : nullptr;
                if (!dst) {
                    r.errors.push_back({field, "unknown field"});
                    continue;
                }
                r.number(it.value(), field, *dst, 0.0, kInf);
            }
        }
    }
    if (r.has("alpha")) r.number(doc["alpha"], "alpha", s.alpha, 0.0, kInf);
    if (r.has("seed")) r.integer(doc["seed"], "seed", s.seed, 0, std::numeric_limits<long long>::max());
    if (r.has("steps")) r.integer(doc["steps"], "steps", s.steps, 1, 1000);
    if (r.has("guidance_scale")) r.number(doc["guidance_scale"], "guidance_scale", s.guidance_scale, 0.0, kInf);

    if (!r.has("sketch") && !r.has("image_prompt") && !r.has("text_prompt")) {
        r.errors.push_back({"conditions", "at least one of sketch, image_prompt or text_prompt is required"});
    }
    if (!r.errors.empty()) throw ValidationError(std::move(r.errors));
    return s;
}

json TryOnJobSpec::to_json(bool tryon) const {
    json j = json::object();
    if (tryon) {
        if (person) j["person"] = *person;
        if (garment_mask.size() == 1) {
            j["garment_mask"] = garment_mask.front();
        } else if (!garment_mask.empty()) {
            j["garment_mask"] = garment_mask;
        }
    }
    if (sketch) j["sketch"] = *sketch;
    if (image_prompt) j["image_prompt"] = *image_prompt;
    if (text_prompt) j["text_prompt"] = *text_prompt;
    j["scales"] = {{"style", scales.style}, {"content", scales.content}, {"sketch", scales.sketch},
                   {"text", scales.text}};
    j["alpha"] = alpha;
    j["seed"] = seed;
    j["steps"] = steps;
    j["guidance_scale"] = guidance_scale;
    if (!tryon) {
        j["width"] = width;
        j["height"] = height;
    }
    return j;
}

void TryOnJobSpec::check_files() const {
    std::vector<FieldError> errors;
    auto check = [&](const std::string& field, const std::string& p) {
        std::error_code ec;
        if (!std::filesystem::is_regular_file(p, ec)) errors.push_back({field, "file not found: " + p});
    };
    if (person) check("person", *person);
    for (std::size_t i = 0; i < garment_mask.size(); ++i) {
        check(garment_mask.size() == 1 ? "garment_mask" : "garment_mask[" + std::to_string(i) + "]",
              garment_mask[i]);
    }
    if (sketch) check("sketch", *sketch);
    if (image_prompt) check("image_prompt", *image_prompt);
    if (!errors.empty()) throw ValidationError(std::move(errors));
}

JobInputs load_inputs(const TryOnJobSpec& spec, const InjectionConfig& routing) {
    JobInputs in;
    if (spec.person) in.person = read_png(*spec.person);
    for (const auto& m : spec.garment_mask) {
        in.garment_masks.push_back(read_mask_png(m));
        if (in.person && !(in.garment_masks.back().height() == in.person->height() &&
                           in.garment_masks.back().width() == in.person->width())) {
            throw ValidationError("garment_mask", "mask size differs from the person image");
        }
    }
    if (spec.sketch) {
        in.sketch = read_png(*spec.sketch);
        if (in.person && !(in.sketch->height() == in.person->height() && in.sketch->width() == in.person->width())) {
            throw ValidationError("sketch", "sketch size differs from the person image");
        }
    }
    if (spec.image_prompt) in.image_prompt = read_png(*spec.image_prompt);
    in.text_prompt = spec.text_prompt;
    in.injection = routing;
    in.injection.style_scale = spec.scales.style;
    in.injection.content_scale = spec.scales.content;
    in.injection.sketch_scale = spec.scales.sketch;
    in.injection.text_scale = spec.scales.text;
    in.alpha = spec.alpha;
    in.seed = spec.seed;
    in.steps = spec.steps;
    in.guidance_scale = spec.guidance_scale;
    in.width = spec.width;
    in.height = spec.height;
    return in;
}

SamplerOptions SamplerOptions::from_config(const Config& config) {
    SamplerOptions o;
    o.schedule = config.value<std::string>("backend.schedule");
    o.init = config.value<std::string>("sampler.init");
    if (o.init != "noised" && o.init != "noise") throw InputError("sampler.init must be \"noised\" or \"noise\"");
    o.single_pass = config.value<bool>("sampler.single_pass");
    o.sigma_frac = config.value<double>("cspe.sigma_frac");
    if (!(o.sigma_frac > 0.0)) throw InputError("cspe.sigma_frac must be > 0");
    o.lightness = parse_lightness_space(config.value<std::string>("cspe.lightness_space"));
    o.ofr_mode = parse_projection_mode(config.value<std::string>("ofr.mode"));
    o.stroke_threshold = config.value<double>("mask.stroke_threshold");
    o.close_radius = config.value<int>("mask.close_radius");
    o.person_dilation = config.value<int>("mask.person_dilation");
    if (o.close_radius < 0 || o.person_dilation < 0) throw InputError("mask radii must be >= 0");
    return o;
}

InjectionConfig injection_from_config(const Config& config) {
    InjectionConfig c;
    c.n_blocks = config.value<int>("injection.n_blocks");
    c.style_blocks = config.value<std::set<int>>("injection.style_blocks");
    c.content_blocks = config.value<std::set<int>>("injection.content_blocks");
    c.style_scale = config.value<double>("scales.style");
    c.content_scale = config.value<double>("scales.content");
    c.sketch_scale = config.value<double>("scales.sketch");
    c.text_scale = config.value<double>("scales.text");
    c.validate();
    return c;
}

json Diagnostics::to_json() const {
    json steps_json = json::array();
    for (const auto& s : steps) {
        steps_json.push_back({{"t", s.t},
                              {"synthesis_l2", s.synthesis_l2},
                              {"removal_l2", s.removal_l2},
                              {"preserve_l2", s.preserve_l2}});
    }
    return {{"steps", steps_json},
            {"warnings", warnings},
            {"cells", {{"synthesis", synthesis_cells}, {"removal", removal_cells}, {"preserve", preserve_cells}}},
            {"backend_calls", backend_calls}};
}

// --- sampling ------------------------------------------------------------------

namespace {

enum SeedStream : std::uint64_t { kInit = 1, kPreserve = 2, kDenoise = 3 };

template <typename Fn>
auto at_step(int t, Fn&& fn) {
    try {
        return fn();
    } catch (const CancelledError&) {
        throw;
    } catch (const JobError&) {
        throw;
    } catch (const std::exception& e) {
        throw JobError(t, e.what());
    }
}

}  // namespace

DenoiserConditioning build_conditioning(const JobInputs& inputs, const Backend& backend,
                                        const SamplerOptions& options) {
    DenoiserConditioning cond;
    cond.sketch = inputs.sketch;
    if (inputs.image_prompt) {
        const auto& img = *inputs.image_prompt;
        const auto& enc = backend.image_encoder();
        cond.image_prompt = ImagePromptPair{
            compute_style_embedding(img, default_blur_sigma(img, options.sigma_frac), enc, options.lightness),
            encode_image_prompt(img, enc)};
    }
    if (inputs.text_prompt) cond.text_prompt = backend.text_encoder().encode(*inputs.text_prompt);
    cond.injection = inputs.injection;
    cond.guidance_scale = inputs.guidance_scale;
    cond.validate();
    return cond;
}

NoiseSchedule schedule_for(const Backend& backend, int steps, const std::string& kind) {
    if (steps == backend.schedule().steps) return backend.schedule();
    return NoiseSchedule::make(kind, steps);
}

LatentGrid fuse_denoise(const LatentGrid& z_removed, const RegionSet& regions, const DenoiserConditioning& cond,
                        const Backend& backend, const NoiseSchedule& schedule, std::uint64_t seed,
                        const SamplerOptions& options, Diagnostics& diag, const StepHook& hook) {
    const int T = schedule.steps;
    const int C = z_removed.channels(), H = z_removed.height(), W = z_removed.width();
    const GrayMask& synth = regions.m_sketch;
    const GrayMask& uni = regions.m_union;
    if (synth.height() != H || synth.width() != W || uni.height() != H || uni.width() != W) {
        throw InputError("region masks do not match the latent grid");
    }
    const GrayMask removal = regions.removal();
    const GrayMask preserve = regions.preserve();
    diag.synthesis_cells = synth.count();
    diag.removal_cells = removal.count();
    diag.preserve_cells = preserve.count();

    bool single = false;
    if (options.single_pass && cond.sketch) {
        if (backend.info().spatially_local_control) {
            single = true;
        } else {
            diag.warnings.push_back("single-pass fusion needs a backend with spatially local control; using two passes");
        }
    }
    DenoiserConditioning gated;
    DenoiserConditioning no_sketch;
    if (single) {
        gated = cond;
        gated.sketch_region = synth;
    } else if (cond.sketch) {
        no_sketch = cond.without_sketch();
    }

    LatentGrid z = options.init == "noise" ? gaussian_latent(C, H, W, derive_seed(seed, kInit, T))
                                           : q_sample(z_removed, T, schedule, derive_seed(seed, kInit, T));
    for (int t = T; t >= 1; --t) {
        if (hook) hook(t);
        const std::uint64_t step_seed = derive_seed(seed, kDenoise, t);
        LatentGrid d_full, d_nosketch;
        at_step(t, [&] {
            if (single) {
                d_full = backend.denoise_step(z, t, gated, schedule, step_seed);
                ++diag.backend_calls;
            } else {
                d_full = backend.denoise_step(z, t, cond, schedule, step_seed);
                ++diag.backend_calls;
                if (cond.sketch && !removal.none()) {
                    d_nosketch = backend.denoise_step(z, t, no_sketch, schedule, step_seed);
                    ++diag.backend_calls;
                }
            }
            return 0;
        });
        const LatentGrid& d_rm = d_nosketch.size() ? d_nosketch : d_full;
        const LatentGrid known = q_sample(z_removed, t - 1, schedule, derive_seed(seed, kPreserve, t - 1));
        if (!d_full.same_shape(z) || !d_rm.same_shape(z)) throw JobError(t, "backend returned a mis-shaped latent");

        StepRecord rec;
        rec.t = t;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const LatentGrid& src = synth.at(y, x) ? d_full : uni.at(y, x) ? d_rm : known;
                double& acc = synth.at(y, x) ? rec.synthesis_l2 : uni.at(y, x) ? rec.removal_l2 : rec.preserve_l2;
                for (int c = 0; c < C; ++c) {
                    const double v = src.at(c, y, x);
                    z.at(c, y, x) = v;
                    acc += v * v;
                }
            }
        }
        rec.synthesis_l2 = std::sqrt(rec.synthesis_l2);
        rec.removal_l2 = std::sqrt(rec.removal_l2);
        rec.preserve_l2 = std::sqrt(rec.preserve_l2);
        diag.steps.push_back(rec);
    }
    return z;
}

TryOnResult run_tryon(const JobInputs& inputs, const Backend& backend, const SamplerOptions& options,
                      const StepHook& hook, WhiteReferenceCache* white_cache) {
    if (!inputs.person) throw InputError("try-on needs a person image");
    if (!inputs.sketch && !inputs.image_prompt && !inputs.text_prompt) {
        throw InputError("at least one of sketch, image_prompt or text_prompt is required");
    }
    if (inputs.alpha < 0.0) throw InputError("alpha must be >= 0");
    const RgbImage& person = *inputs.person;
    const int f = backend.info().spatial_factor;

    TryOnResult res;
    Diagnostics& diag = res.diagnostics;
    res.z_person = backend.encode(person);

    WhiteReferenceCache local_cache;
    WhiteReferenceCache& cache = white_cache ? *white_cache : local_cache;
    std::vector<RemovalDirection> dirs;
    GrayMask person_px(person.height(), person.width());
    for (std::size_t i = 0; i < inputs.garment_masks.size(); ++i) {
        const GrayMask& m = inputs.garment_masks[i];
        if (!(m.height() == person.height() && m.width() == person.width())) {
            throw InputError("garment mask " + std::to_string(i) + " does not match the person image");
        }
        if (m.none()) {
            diag.warnings.push_back("garment mask " + std::to_string(i) + " is empty");
            continue;
        }
        person_px = mask_union(person_px, m);
        try {
            dirs.push_back(compute_direction(garment_on_white(person, m), backend, &cache,
                                             "garment_mask[" + std::to_string(i) + "]"));
        } catch (const DegenerateInputError&) {
            diag.warnings.push_back("garment " + std::to_string(i) + " is indistinguishable from white; not removed");
        }
    }
    if (alpha_overshoots(inputs.alpha)) {
        diag.warnings.push_back("alpha > 1 subtracts past the orthogonal complement");
    }
    if (dirs.empty()) {
        res.z_removed = res.z_person;
    } else if (dirs.size() == 1) {
        res.z_removed = remove_item(res.z_person, dirs.front(), inputs.alpha, options.ofr_mode);
    } else if (options.ofr_mode == ProjectionMode::global) {
        res.z_removed = remove_items(res.z_person, dirs, inputs.alpha);
    } else {
        res.z_removed = res.z_person;
        for (const auto& d : dirs) res.z_removed = remove_item(res.z_removed, d, inputs.alpha, options.ofr_mode);
    }

    GrayMask sketch_px(person.height(), person.width());
    if (inputs.sketch) {
        sketch_px = sketch_to_mask(*inputs.sketch, options.stroke_threshold, options.close_radius);
        if (sketch_px.none()) diag.warnings.push_back("sketch has no strokes; synthesis region is empty");
    }
    res.regions = compose_region_masks(person_px, sketch_px, f, options.person_dilation);

    if (res.regions.m_union.none()) {
        diag.warnings.push_back("manipulation region is empty; returning the removed latent");
        diag.preserve_cells = res.regions.m_union.values().size();
        res.final_latent = res.z_removed;
        res.image = backend.decode(res.final_latent);
        return res;
    }

    const DenoiserConditioning cond = build_conditioning(inputs, backend, options);
    const NoiseSchedule schedule = schedule_for(backend, inputs.steps, options.schedule);
    res.final_latent =
        fuse_denoise(res.z_removed, res.regions, cond, backend, schedule, inputs.seed, options, diag, hook);
    res.image = backend.decode(res.final_latent);
    return res;
}

EditResult run_edit(const JobInputs& inputs, const Backend& backend, const SamplerOptions& options,
                    const StepHook& hook) {
    if (!inputs.sketch && !inputs.image_prompt && !inputs.text_prompt) {
        throw InputError("at least one of sketch, image_prompt or text_prompt is required");
    }
    const int f = backend.info().spatial_factor;
    const int height = inputs.sketch ? inputs.sketch->height() : inputs.height;
    const int width = inputs.sketch ? inputs.sketch->width() : inputs.width;
    if (height % f != 0 || width % f != 0) {
        throw InputError("output size " + std::to_string(height) + "x" + std::to_string(width) +
                         " is not a multiple of " + std::to_string(f));
    }
    const DenoiserConditioning cond = build_conditioning(inputs, backend, options);
    const NoiseSchedule schedule = schedule_for(backend, inputs.steps, options.schedule);
    const int T = schedule.steps;

    EditResult res;
    Diagnostics& diag = res.diagnostics;
    diag.synthesis_cells = static_cast<std::size_t>(height / f) * (width / f);
    LatentGrid z =
        gaussian_latent(backend.info().latent_channels, height / f, width / f, derive_seed(inputs.seed, kInit, T));
    for (int t = T; t >= 1; --t) {
        if (hook) hook(t);
        z = at_step(t, [&] { return backend.denoise_step(z, t, cond, schedule, derive_seed(inputs.seed, kDenoise, t)); });
        ++diag.backend_calls;
        if (!z.all_finite()) throw JobError(t, "backend produced non-finite values");
        diag.steps.push_back({t, z.norm(), 0.0, 0.0});
    }
    res.final_latent = z;
    res.image = backend.decode(z);
    return res;
}

}  // namespace vton
