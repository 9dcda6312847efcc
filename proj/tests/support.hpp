#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <json.hpp>
#include <unistd.h>

#include "vton/image_io.hpp"
#include "vton/types.hpp"

namespace vton::test {

/// Image with one random color per f×f block, so the mock codec is exact on it.
inline RgbImage block_image(int height, int width, int f, std::uint64_t seed, double lo = 0.05, double hi = 0.95) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    RgbImage img(height, width);
    for (int by = 0; by < height / f; ++by) {
        for (int bx = 0; bx < width / f; ++bx) {
            const double r = u(rng), g = u(rng), b = u(rng);
            for (int y = by * f; y < (by + 1) * f; ++y) {
                for (int x = bx * f; x < (bx + 1) * f; ++x) {
                    img.at(y, x, 0) = r;
                    img.at(y, x, 1) = g;
                    img.at(y, x, 2) = b;
                }
            }
        }
    }
    return img;
}

inline LatentGrid random_latent(int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    LatentGrid z(c, h, w);
    for (auto& v : z.values()) v = n(rng);
    return z;
}

inline GrayMask random_mask(int h, int w, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(p);
    GrayMask m(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m.set(y, x, b(rng));
    }
    return m;
}

inline GrayMask rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
    GrayMask m(h, w);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.set(y, x);
    }
    return m;
}

/// Cells where the two latents differ in any channel.
inline GrayMask diff_cells(const LatentGrid& a, const LatentGrid& b, double tol = 0.0) {
    GrayMask m(a.height(), a.width());
    for (int c = 0; c < a.channels(); ++c) {
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                if (std::abs(a.at(c, y, x) - b.at(c, y, x)) > tol) m.set(y, x);
            }
        }
    }
    return m;
}

/// true when every set cell of `a` is set in `b`.
inline bool subset_of(const GrayMask& a, const GrayMask& b) {
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (a.at(y, x) && !b.at(y, x)) return false;
        }
    }
    return true;
}

/// Dark rectangle outline on white.
inline RgbImage outline_sketch(int n, int y0, int x0, int y1, int x1) {
    RgbImage s(n, n, 1.0);
    for (int x = x0; x <= x1; ++x) {
        for (int c = 0; c < 3; ++c) s.at(y0, x, c) = s.at(y1, x, c) = 0.0;
    }
    for (int y = y0; y <= y1; ++y) {
        for (int c = 0; c < 3; ++c) s.at(y, x0, c) = s.at(y, x1, c) = 0.0;
    }
    return s;
}

/// Fresh per-process scratch directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("vton_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Writes a 64x64 try-on input set into `dir` and returns a matching job spec
/// without scales, steps or seed.
inline nlohmann::json write_tryon_fixture(const std::filesystem::path& dir) {
    write_png(dir / "person.png", block_image(64, 64, 8, 42));
    write_mask_png(dir / "garment.png", rect_mask(64, 64, 8, 8, 40, 40));
    write_png(dir / "sketch.png", outline_sketch(64, 24, 24, 55, 55));
    write_png(dir / "prompt.png", block_image(32, 32, 4, 5));
    return {{"person", (dir / "person.png").string()},
            {"garment_mask", (dir / "garment.png").string()},
            {"sketch", (dir / "sketch.png").string()},
            {"image_prompt", (dir / "prompt.png").string()},
            {"text_prompt", "blue top"}};
}

}  // namespace vton::test
