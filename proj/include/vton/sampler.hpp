#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vton/backend.hpp"
#include "vton/masks.hpp"
#include "vton/removal.hpp"

namespace vton {

class Config;

struct Scales {
    double style = 0.5;
    double content = 0.5;
    double sketch = 0.7;
    double text = 0.5;

    friend bool operator==(const Scales&, const Scales&) = default;
};

/// Job spec wire format shared by the CLI and the service. Image fields are
/// file paths. `garment_mask` is a single path or a list (one per item).
struct TryOnJobSpec {
    std::optional<std::string> person;
    std::vector<std::string> garment_mask;
    std::optional<std::string> sketch;
    std::optional<std::string> image_prompt;
    std::optional<std::string> text_prompt;
    Scales scales;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    int steps = 50;
    double guidance_scale = 7.5;
    /// Output size for edit jobs that have no sketch to take it from.
    int width = 512;
    int height = 512;

    bool has_condition() const { return sketch || image_prompt || text_prompt; }

    /// Spec with every unset field taken from `config`.
    static TryOnJobSpec defaults(const Config& config);
    /// Throws ValidationError listing every bad field. `defaults` fills the
    /// fields the document leaves out.
    static TryOnJobSpec from_json(const nlohmann::json& doc, const TryOnJobSpec& defaults, bool tryon);
    nlohmann::json to_json(bool tryon) const;

    /// Referenced files must exist; throws ValidationError otherwise.
    void check_files() const;
};

/// Decoded job inputs.
struct JobInputs {
    std::optional<RgbImage> person;
    std::vector<GrayMask> garment_masks;
    std::optional<RgbImage> sketch;
    std::optional<RgbImage> image_prompt;
    std::optional<std::string> text_prompt;
    InjectionConfig injection;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    int steps = 50;
    double guidance_scale = 7.5;
    int width = 512;
    int height = 512;
};

JobInputs load_inputs(const TryOnJobSpec& spec, const InjectionConfig& routing);

/// Knobs that are configuration rather than per-job spec.
struct SamplerOptions {
    std::string schedule = "cosine";
    /// "noised" starts from q_sample(z̃, T), "noise" from a standard normal.
    std::string init = "noised";
    bool single_pass = false;
    double sigma_frac = 0.05;
    LightnessSpace lightness = LightnessSpace::cielab;
    ProjectionMode ofr_mode = ProjectionMode::global;
    double stroke_threshold = 0.5;
    int close_radius = 3;
    int person_dilation = 0;

    static SamplerOptions from_config(const Config& config);
};

/// Routing/scales from config (`injection.*`, `scales.*`).
InjectionConfig injection_from_config(const Config& config);

/// Called with t before each step t -> t-1; may throw CancelledError.
using StepHook = std::function<void(int t)>;

struct StepRecord {
    int t = 0;  ///< latent level after the step is t - 1
    double synthesis_l2 = 0.0;
    double removal_l2 = 0.0;
    double preserve_l2 = 0.0;
};

struct Diagnostics {
    std::vector<StepRecord> steps;
    std::vector<std::string> warnings;
    std::size_t synthesis_cells = 0;
    std::size_t removal_cells = 0;
    std::size_t preserve_cells = 0;
    int backend_calls = 0;

    nlohmann::json to_json() const;
};

struct TryOnResult {
    RgbImage image;
    LatentGrid final_latent;
    LatentGrid z_person;
    LatentGrid z_removed;
    RegionSet regions;
    Diagnostics diagnostics;
};

struct EditResult {
    RgbImage image;
    LatentGrid final_latent;
    Diagnostics diagnostics;
};

/// Conditioning for the denoiser: the style residual and raw embedding of the
/// image prompt, the text embedding, and the sketch.
DenoiserConditioning build_conditioning(const JobInputs& inputs, const Backend& backend,
                                        const SamplerOptions& options);

NoiseSchedule schedule_for(const Backend& backend, int steps, const std::string& kind);

/// Garment removal, region masks and fused denoising of a person image.
TryOnResult run_tryon(const JobInputs& inputs, const Backend& backend, const SamplerOptions& options = {},
                      const StepHook& hook = {}, WhiteReferenceCache* white_cache = nullptr);

/// The fused denoising loop on a prepared removed latent and region set.
/// Exposed so the loop can be exercised on synthetic latents.
LatentGrid fuse_denoise(const LatentGrid& z_removed, const RegionSet& regions, const DenoiserConditioning& cond,
                        const Backend& backend, const NoiseSchedule& schedule, std::uint64_t seed,
                        const SamplerOptions& options, Diagnostics& diag, const StepHook& hook = {});

/// Plain conditional sampling from noise, no person latent.
EditResult run_edit(const JobInputs& inputs, const Backend& backend, const SamplerOptions& options = {},
                    const StepHook& hook = {});

}  // namespace vton
