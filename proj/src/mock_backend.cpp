#include "vton/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "detail/linalg.hpp"
#include "vton/error.hpp"

namespace vton {

MockProfile MockProfile::reported() {
    MockProfile p;
    p.style_gain.assign(11, 0.5);
    p.content_gain.assign(11, 0.1);
    p.style_gain[7] = 1.0;
    p.content_gain[7] = 0.9;
    p.style_gain[4] = 0.1;
    p.content_gain[4] = 0.8;
    p.style_gain[3] = 0.3;
    p.content_gain[3] = 0.6;
    p.style_gain[6] = 0.3;
    p.content_gain[6] = 0.5;
    return p;
}

MockProfile MockProfile::uniform(int n_blocks, double style, double content) {
    MockProfile p;
    p.style_gain.assign(n_blocks, style);
    p.content_gain.assign(n_blocks, content);
    return p;
}

const std::array<std::array<double, 3>, 4>& MockBackend::mixing() {
    static const std::array<std::array<double, 3>, 4> a = {{
        {0.9, 0.3, 0.1},
        {-0.4, 0.6, 0.5},
        {0.2, -0.5, 0.7},
        {0.33, 0.33, 0.34},
    }};
    return a;
}

namespace {

using Rgb = std::array<double, 3>;

const std::array<std::array<double, 4>, 3>& unmixing() {
    static const auto inv = detail::left_inverse(MockBackend::mixing());
    return inv;
}

double luma(const Rgb& c) { return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]; }

}  // namespace

MockBackend::MockBackend(MockBackendOptions options)
    : options_(std::move(options)),
      schedule_(NoiseSchedule::make(options_.schedule, options_.steps)) {
    if (options_.spatial_factor < 1) throw InputError("spatial factor must be >= 1");
    if (options_.profile.style_gain.size() != options_.profile.content_gain.size() ||
        options_.profile.style_gain.empty()) {
        throw InputError("mock profile needs matching, non-empty gain vectors");
    }
    if (!(options_.guidance_reference > 0.0)) throw InputError("guidance reference must be positive");
    info_.name = "mock";
    info_.spatial_factor = options_.spatial_factor;
    info_.latent_channels = 4;
    info_.n_blocks = options_.profile.n_blocks();
    info_.exclusive = options_.exclusive;
    info_.spatially_local_control = true;
}

LatentGrid MockBackend::encode(const RgbImage& image) const {
    const int f = options_.spatial_factor;
    if (image.empty() || image.height() % f != 0 || image.width() % f != 0) {
        throw InputError("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                         " is not divisible by spatial factor " + std::to_string(f));
    }
    const int h = image.height() / f, w = image.width() / f;
    const auto& a = mixing();
    LatentGrid z(4, h, w);
    const double inv_area = 1.0 / (f * f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Rgb mean{};
            for (int py = y * f; py < (y + 1) * f; ++py) {
                for (int px = x * f; px < (x + 1) * f; ++px) {
                    for (int c = 0; c < 3; ++c) mean[c] += image.at(py, px, c);
                }
            }
            for (auto& m : mean) m = m * inv_area - 0.5;
            for (int k = 0; k < 4; ++k) {
                z.at(k, y, x) = a[k][0] * mean[0] + a[k][1] * mean[1] + a[k][2] * mean[2];
            }
        }
    }
    return z;
}

RgbImage MockBackend::decode(const LatentGrid& latent) const {
    if (latent.channels() != 4) {
        throw InputError("mock backend expects 4 latent channels, got " + std::to_string(latent.channels()));
    }
    const int f = options_.spatial_factor;
    const auto& inv = unmixing();
    RgbImage out(latent.height() * f, latent.width() * f);
    for (int y = 0; y < latent.height(); ++y) {
        for (int x = 0; x < latent.width(); ++x) {
            Rgb rgb{};
            for (int c = 0; c < 3; ++c) {
                double v = 0.5;
                for (int k = 0; k < 4; ++k) v += inv[c][k] * latent.at(k, y, x);
                rgb[c] = std::clamp(v, 0.0, 1.0);
            }
            for (int py = y * f; py < (y + 1) * f; ++py) {
                for (int px = x * f; px < (x + 1) * f; ++px) {
                    for (int c = 0; c < 3; ++c) out.at(py, px, c) = rgb[c];
                }
            }
        }
    }
    return out;
}

std::pair<double, double> MockBackend::step_coefficients(const NoiseSchedule& schedule, int t) {
    const double ab_t = schedule.at(t);
    const double ab_prev = schedule.at(t - 1);
    const double a = std::sqrt((1.0 - ab_prev) / (1.0 - ab_t));
    const double b = std::sqrt(ab_prev) - a * std::sqrt(ab_t);
    return {a, b};
}

LatentGrid MockBackend::conditioning_target(const DenoiserConditioning& cond, int height, int width) const {
    const int f = options_.spatial_factor;
    const auto& profile = options_.profile;
    const int n_blocks = profile.n_blocks();
    if (cond.injection.n_blocks != n_blocks) {
        throw InputError("injection config has " + std::to_string(cond.injection.n_blocks) +
                         " blocks, backend has " + std::to_string(n_blocks));
    }

    // Image prompt: per block, colors decoded from the injected tokens.
    struct BlockResponse {
        double style_gain, content_gain;
        std::array<Rgb, 4> quadrant;
        Rgb global;
    };
    std::vector<BlockResponse> image_blocks;
    if (cond.image_prompt) {
        const InjectionMap map =
            build_injection_map(cond.injection, cond.image_prompt->style, cond.image_prompt->content);
        for (const auto& entry : map.blocks) {
            if (!entry.image) continue;
            BlockResponse r{profile.style_gain[entry.block], profile.content_gain[entry.block], {}, {}};
            const PromptEmbedding& e = *entry.image;
            if (e.n_tokens == MockImageEncoder::kTokens) {
                for (int q = 0; q < 4; ++q) r.quadrant[q] = MockImageEncoder::token_color(e.token(q));
                r.global = MockImageEncoder::token_color(e.token(4));
            } else {
                const auto pooled = e.pooled();
                r.global = MockImageEncoder::token_color(pooled);
                r.quadrant.fill(r.global);
            }
            image_blocks.push_back(r);
        }
    }

    std::optional<Rgb> text_offset;
    if (cond.text_prompt && cond.injection.text_scale != 0.0) {
        const Rgb color = MockImageEncoder::token_color(cond.text_prompt->pooled());
        Rgb off{};
        for (int c = 0; c < 3; ++c) off[c] = cond.injection.text_scale * (color[c] - 0.5);
        text_offset = off;
    }

    const bool use_sketch = cond.sketch && cond.injection.sketch_scale != 0.0;
    if (use_sketch && (cond.sketch->height() != height * f || cond.sketch->width() != width * f)) {
        throw InputError("sketch control map does not match the latent grid");
    }
    if (cond.sketch_region && (cond.sketch_region->height() != height || cond.sketch_region->width() != width)) {
        throw InputError("sketch region does not match the latent grid");
    }

    const double gain = cond.guidance_scale / options_.guidance_reference;
    const auto& a = mixing();
    LatentGrid z(4, height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            Rgb off{};
            const int q = MockImageEncoder::quadrant(y, x, height, width);
            for (const auto& r : image_blocks) {
                const double lg = luma(r.global);
                const double layout = luma(r.quadrant[q]) - lg;
                for (int c = 0; c < 3; ++c) {
                    off[c] += r.style_gain * (r.global[c] - lg) + r.content_gain * layout;
                }
            }
            if (text_offset) {
                for (int c = 0; c < 3; ++c) off[c] += (*text_offset)[c];
            }
            if (use_sketch && (!cond.sketch_region || cond.sketch_region->at(y, x))) {
                double ink = 0.0;
                for (int py = y * f; py < (y + 1) * f; ++py) {
                    for (int px = x * f; px < (x + 1) * f; ++px) {
                        const Rgb p{cond.sketch->at(py, px, 0), cond.sketch->at(py, px, 1),
                                    cond.sketch->at(py, px, 2)};
                        ink += std::max(0.0, 1.0 - luma(p));
                    }
                }
                ink /= f * f;
                if (ink != 0.0) {
                    for (int c = 0; c < 3; ++c) {
                        off[c] += cond.injection.sketch_scale * ink * options_.sketch_offset[c];
                    }
                }
            }
            for (int k = 0; k < 4; ++k) {
                z.at(k, y, x) = gain * (a[k][0] * off[0] + a[k][1] * off[1] + a[k][2] * off[2]);
            }
        }
    }
    return z;
}

LatentGrid MockBackend::denoise_step(const LatentGrid& z_t, int t, const DenoiserConditioning& cond,
                                     const NoiseSchedule& schedule, std::uint64_t /*seed*/) const {
    if (t < 1 || t > schedule.steps) {
        throw InputError("denoise step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps) + "]");
    }
    if (z_t.channels() != 4) throw InputError("mock backend expects 4 latent channels");
    cond.validate();
    const auto [a, b] = step_coefficients(schedule, t);
    LatentGrid out = conditioning_target(cond, z_t.height(), z_t.width());
    auto dst = out.values();
    auto src = z_t.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a * src[i] + b * dst[i];
    return out;
}

}  // namespace vton
