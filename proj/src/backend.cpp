#include "vton/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vton/error.hpp"

namespace vton {

double NoiseSchedule::at(int t) const {
    if (t < 0 || t > steps) {
        throw InputError("step " + std::to_string(t) + " outside [0, " + std::to_string(steps) + "]");
    }
    return alpha_bar[t];
}

NoiseSchedule NoiseSchedule::cosine(int steps, double offset) {
    if (steps < 1) throw InputError("schedule needs at least one step");
    auto f = [&](int t) {
        const double u = (static_cast<double>(t) / steps + offset) / (1.0 + offset);
        const double c = std::cos(u * std::numbers::pi / 2.0);
        return c * c;
    };
    NoiseSchedule s;
    s.steps = steps;
    s.alpha_bar.resize(steps + 1);
    s.alpha_bar[0] = 1.0;
    const double f0 = f(0);
    for (int t = 1; t <= steps; ++t) {
        // Per-step beta clipped at 0.999 keeps ᾱ_T strictly positive.
        const double raw = f(t) / f0;
        const double prev = s.alpha_bar[t - 1];
        const double beta = std::min(1.0 - raw / prev, 0.999);
        s.alpha_bar[t] = prev * (1.0 - beta);
    }
    return s;
}

NoiseSchedule NoiseSchedule::scaled_linear(int steps) {
    if (steps < 1 || steps > 1000) throw InputError("scaled_linear supports 1..1000 steps");
    constexpr int kTrain = 1000;
    const double lo = std::sqrt(0.00085), hi = std::sqrt(0.012);
    std::vector<double> cumulative(kTrain);
    double acc = 1.0;
    for (int i = 0; i < kTrain; ++i) {
        const double b = lo + (hi - lo) * i / (kTrain - 1);
        acc *= 1.0 - b * b;
        cumulative[i] = acc;
    }
    NoiseSchedule s;
    s.steps = steps;
    s.alpha_bar.resize(steps + 1);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= steps; ++t) {
        const int idx = static_cast<int>(std::lround(static_cast<double>(t) * kTrain / steps)) - 1;
        s.alpha_bar[t] = cumulative[idx];
    }
    return s;
}

NoiseSchedule NoiseSchedule::make(std::string_view kind, int steps) {
    if (kind == "cosine") return cosine(steps);
    if (kind == "scaled_linear") return scaled_linear(steps);
    throw InputError("unknown noise schedule: " + std::string(kind));
}

void DenoiserConditioning::validate() const {
    if (!(guidance_scale >= 0.0) || !std::isfinite(guidance_scale)) {
        throw InputError("guidance_scale must be a finite value >= 0");
    }
    injection.validate();
    if (image_prompt && image_prompt->style.dim != image_prompt->content.dim) {
        throw InputError("style and content embeddings have different dimensions");
    }
}

DenoiserConditioning DenoiserConditioning::without_sketch() const {
    DenoiserConditioning out = *this;
    out.sketch.reset();
    out.sketch_region.reset();
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ull) ^ (index * 0xc2b2ae3d27d4eb4full);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

LatentGrid gaussian_latent(int channels, int height, int width, std::uint64_t seed) {
    LatentGrid out(channels, height, width);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : out.values()) v = normal(gen);
    return out;
}

LatentGrid q_sample(const LatentGrid& z0, int t, const NoiseSchedule& schedule, std::uint64_t seed) {
    const double ab = schedule.at(t);
    if (t == 0) return z0;
    LatentGrid out = gaussian_latent(z0.channels(), z0.height(), z0.width(), seed);
    const double keep = std::sqrt(ab), spread = std::sqrt(1.0 - ab);
    auto dst = out.values();
    auto src = z0.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = keep * src[i] + spread * dst[i];
    return out;
}

}  // namespace vton
