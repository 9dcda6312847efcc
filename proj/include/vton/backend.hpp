#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vton/embeddings.hpp"
#include "vton/injection.hpp"
#include "vton/types.hpp"

namespace vton {

/// Cumulative signal retention ᾱ_t for t = 0..T; ᾱ_0 = 1, strictly
/// decreasing in t.
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> alpha_bar;

    double at(int t) const;

    static NoiseSchedule cosine(int steps, double offset = 0.008);
    /// Stable Diffusion's scaled-linear betas over 1000 training steps,
    /// subsampled evenly to `steps` inference steps.
    static NoiseSchedule scaled_linear(int steps);
    static NoiseSchedule make(std::string_view kind, int steps);
};

struct ImagePromptPair {
    PromptEmbedding style;
    PromptEmbedding content;
};

struct DenoiserConditioning {
    /// Pixel-resolution control image (dark strokes on a light ground).
    std::optional<RgbImage> sketch;
    /// Latent-resolution gate on the sketch control; cells outside it see no
    /// sketch at all. Used by the single-pass fusion path.
    std::optional<GrayMask> sketch_region;
    std::optional<ImagePromptPair> image_prompt;
    std::optional<PromptEmbedding> text_prompt;
    InjectionConfig injection;
    double guidance_scale = 7.5;

    bool empty() const noexcept { return !sketch && !image_prompt && !text_prompt; }
    void validate() const;
    DenoiserConditioning without_sketch() const;
};

struct BackendInfo {
    std::string name;
    int spatial_factor = 8;
    int latent_channels = 4;
    int n_blocks = 11;
    /// One job at a time.
    bool exclusive = false;
    /// Each output cell of denoise_step depends on the sketch only at that
    /// cell, so sketch gating can be done in a single pass.
    bool spatially_local_control = false;
};

/// Generative stack: latent codec, conditional denoiser, prompt encoders and
/// noise schedule. Implementations are immutable after construction.
class Backend {
public:
    virtual ~Backend() = default;

    virtual const BackendInfo& info() const = 0;
    virtual const NoiseSchedule& schedule() const = 0;

    /// Deterministic encoding; throws InputError when H or W is not a
    /// multiple of the spatial factor.
    virtual LatentGrid encode(const RgbImage& image) const = 0;
    /// Output clamped to [0,1].
    virtual RgbImage decode(const LatentGrid& latent) const = 0;
    /// One reverse step t -> t-1, 1 <= t <= T.
    virtual LatentGrid denoise_step(const LatentGrid& z_t, int t, const DenoiserConditioning& cond,
                                    const NoiseSchedule& schedule, std::uint64_t seed) const = 0;

    virtual const ImageEncoder& image_encoder() const = 0;
    virtual const TextEncoder& text_encoder() const = 0;
    virtual const JointEncoder& joint_encoder() const = 0;
};

/// sqrt(ᾱ_t)·z0 + sqrt(1-ᾱ_t)·ε, ε ~ N(0,1) from `seed`; returns z0 itself at t = 0.
LatentGrid q_sample(const LatentGrid& z0, int t, const NoiseSchedule& schedule, std::uint64_t seed);

LatentGrid gaussian_latent(int channels, int height, int width, std::uint64_t seed);

/// Independent sub-seed for (stream, index) derived from a job seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

class Config;

/// Builds the backend named by `backend.kind` (mock | external).
std::shared_ptr<const Backend> make_backend(const Config& config);

}  // namespace vton
