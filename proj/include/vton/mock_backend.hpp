#pragma once

#include <array>
#include <string>
#include <vector>

#include "vton/backend.hpp"

namespace vton {

/// Per-block response of the mock denoiser to injected image features.
/// Style gain scales the chroma of the prompt, content gain its quadrant
/// lightness layout.
struct MockProfile {
    std::vector<double> style_gain;
    std::vector<double> content_gain;

    int n_blocks() const { return static_cast<int>(style_gain.size()); }

    /// Eleven blocks: block 7 strongest on style (twice every other block)
    /// and on content, block 4 second on content with low style, blocks 3 and
    /// 6 next on content.
    static MockProfile reported();
    static MockProfile uniform(int n_blocks, double style, double content);
};

struct MockBackendOptions {
    int spatial_factor = 8;
    int steps = 50;
    std::string schedule = "cosine";
    MockProfile profile = MockProfile::reported();
    std::array<double, 3> sketch_offset{-0.30, -0.30, -0.20};
    /// Guidance scale at which conditioning passes through unscaled.
    double guidance_reference = 7.5;
    bool exclusive = false;
};

/// Desk-scale backend in which every operation is exact and analyzable.
///
/// Encoder: each f×f pixel block is averaged and mapped to 4 channels by the
/// fixed affine map z = A·(rgb - 0.5). The decoder applies the left inverse of
/// A and replicates the cell over its block, so decode(encode(x)) = x for
/// block-constant x.
///
/// Denoiser: z_{t-1} = a_t·z_t + b_t·c(cond), the deterministic DDIM update
/// with c(cond) as the clean-latent prediction. a_1 = 0, so the last step
/// lands exactly on c(cond). c is computed per latent cell from the
/// conditioning at that cell only.
class MockBackend final : public Backend {
public:
    explicit MockBackend(MockBackendOptions options = {});

    const BackendInfo& info() const override { return info_; }
    const NoiseSchedule& schedule() const override { return schedule_; }

    LatentGrid encode(const RgbImage& image) const override;
    RgbImage decode(const LatentGrid& latent) const override;
    LatentGrid denoise_step(const LatentGrid& z_t, int t, const DenoiserConditioning& cond,
                            const NoiseSchedule& schedule, std::uint64_t seed) const override;

    const ImageEncoder& image_encoder() const override { return image_encoder_; }
    const TextEncoder& text_encoder() const override { return text_encoder_; }
    const JointEncoder& joint_encoder() const override { return joint_encoder_; }

    /// Clean-latent prediction c(cond) on an h×w grid.
    LatentGrid conditioning_target(const DenoiserConditioning& cond, int height, int width) const;

    /// DDIM coefficients (a_t, b_t) of the step t -> t-1.
    static std::pair<double, double> step_coefficients(const NoiseSchedule& schedule, int t);

    static const std::array<std::array<double, 3>, 4>& mixing();
    const MockBackendOptions& options() const { return options_; }

private:
    MockBackendOptions options_;
    BackendInfo info_;
    NoiseSchedule schedule_;
    MockImageEncoder image_encoder_;
    MockTextEncoder text_encoder_;
    MockJointEncoder joint_encoder_;
};

}  // namespace vton
