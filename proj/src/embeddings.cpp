#include "vton/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "detail/linalg.hpp"
#include "vton/error.hpp"

namespace vton {

PromptEmbedding::PromptEmbedding(int n, int d, SourceKind k)
    : n_tokens(n), dim(d), tokens(static_cast<std::size_t>(n) * d, 0.0), kind(k) {
    if (n < 1 || d < 1) throw InputError("embedding needs at least one token of positive dimension");
}

std::vector<double> PromptEmbedding::pooled() const {
    std::vector<double> out(dim, 0.0);
    for (int i = 0; i < n_tokens; ++i) {
        auto t = token(i);
        for (int j = 0; j < dim; ++j) out[j] += t[j];
    }
    for (auto& v : out) v /= n_tokens;
    return out;
}

PromptEmbedding PromptEmbedding::scaled(double s) const {
    PromptEmbedding out = *this;
    for (auto& v : out.tokens) v *= s;
    return out;
}

bool PromptEmbedding::all_finite() const {
    return std::all_of(tokens.begin(), tokens.end(), [](double v) { return std::isfinite(v); });
}

LightnessSpace parse_lightness_space(std::string_view name) {
    if (name == "cielab") return LightnessSpace::cielab;
    if (name == "rec709") return LightnessSpace::rec709;
    throw InputError("unknown lightness space: " + std::string(name));
}

namespace {

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double y) {
    return y <= 0.0031308 ? 12.92 * y : 1.055 * std::pow(y, 1.0 / 2.4) - 0.055;
}

constexpr double kDelta = 6.0 / 29.0;

}  // namespace

double rec709_luma(double r, double g, double b) { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }

double cielab_lightness(double r, double g, double b) {
    const double y = 0.2126729 * srgb_to_linear(r) + 0.7151522 * srgb_to_linear(g) +
                     0.0721750 * srgb_to_linear(b);
    const double f = y > kDelta * kDelta * kDelta ? std::cbrt(y) : y / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
    return 116.0 * f - 16.0;
}

double neutral_gray_for_lightness(double lstar) {
    const double f = (lstar + 16.0) / 116.0;
    const double y = f > kDelta ? f * f * f : 3.0 * kDelta * kDelta * (f - 4.0 / 29.0);
    return std::clamp(linear_to_srgb(std::clamp(y, 0.0, 1.0)), 0.0, 1.0);
}

RgbImage extract_lightness(const RgbImage& image, LightnessSpace space) {
    RgbImage out(image.height(), image.width());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const double r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
            // Neutral pixels pass through unchanged; neither curve round trip
            // is bit-exact.
            double v = r;
            if (r != g || g != b) {
                v = space == LightnessSpace::cielab
                        ? neutral_gray_for_lightness(cielab_lightness(r, g, b))
                        : std::clamp(rec709_luma(r, g, b), 0.0, 1.0);
            }
            out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = v;
        }
    }
    return out;
}

namespace {

// Half-sample symmetric extension with period 2n: ... c b a | a b c | c b a ...
int reflect_index(int i, int n) {
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    }
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (auto& v : k) v /= sum;
    return k;
}

}  // namespace

RgbImage blur_global(const RgbImage& image, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("blur sigma must be positive");
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int h = image.height(), w = image.width();

    RgbImage tmp(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += kernel[k + radius] * image.at(y, reflect_index(x + k, w), c);
                }
                tmp.at(y, x, c) = acc;
            }
        }
    }
    RgbImage out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += kernel[k + radius] * tmp.at(reflect_index(y + k, h), x, c);
                }
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

double default_blur_sigma(const RgbImage& image, double frac) {
    return frac * std::min(image.height(), image.width());
}

RgbImage content_proxy(const RgbImage& image, double sigma, LightnessSpace space) {
    return blur_global(extract_lightness(image, space), sigma);
}

PromptEmbedding compute_style_embedding(const RgbImage& image_prompt, double sigma,
                                        const ImageEncoder& encoder, LightnessSpace space) {
    PromptEmbedding full = encoder.encode(image_prompt);
    const PromptEmbedding proxy = encoder.encode(content_proxy(image_prompt, sigma, space));
    if (full.n_tokens != proxy.n_tokens || full.dim != proxy.dim) {
        throw InputError("encoder returned inconsistent token shapes");
    }
    for (std::size_t i = 0; i < full.tokens.size(); ++i) full.tokens[i] -= proxy.tokens[i];
    full.kind = SourceKind::style_residual;
    return full;
}

PromptEmbedding encode_image_prompt(const RgbImage& image_prompt, const ImageEncoder& encoder) {
    PromptEmbedding e = encoder.encode(image_prompt);
    e.kind = SourceKind::image;
    return e;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("cosine of vectors with different lengths");
    const double ab = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    const double aa = std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
    const double bb = std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

// --- mock encoders ----------------------------------------------------------

namespace {

using Rgb = std::array<double, 3>;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double unit_from_hash(std::uint64_t& state) {
    return static_cast<double>(splitmix(state) >> 11) * (1.0 / 9007199254740992.0);
}

const std::unordered_map<std::string, Rgb>& color_vocabulary() {
    static const std::unordered_map<std::string, Rgb> vocab = {
        {"red", {0.85, 0.15, 0.15}},    {"green", {0.20, 0.70, 0.25}},
        {"blue", {0.15, 0.25, 0.85}},   {"yellow", {0.90, 0.85, 0.20}},
        {"orange", {0.95, 0.55, 0.15}}, {"purple", {0.55, 0.20, 0.70}},
        {"pink", {0.95, 0.60, 0.75}},   {"black", {0.05, 0.05, 0.05}},
        {"white", {0.95, 0.95, 0.95}},  {"gray", {0.50, 0.50, 0.50}},
        {"grey", {0.50, 0.50, 0.50}},   {"brown", {0.50, 0.30, 0.15}},
    };
    return vocab;
}

bool is_stopword(const std::string& w) {
    static const char* const kStop[] = {"a", "an", "the", "of", "with", "and", "in", "on"};
    return std::any_of(std::begin(kStop), std::end(kStop), [&](const char* s) { return w == s; });
}

struct RegionStats {
    std::array<Rgb, 4> quadrant{};
    Rgb global{};
};

RegionStats region_means(const RgbImage& image) {
    RegionStats s;
    std::array<int, 4> counts{};
    const int h = image.height(), w = image.width();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int q = MockImageEncoder::quadrant(y, x, h, w);
            ++counts[q];
            for (int c = 0; c < 3; ++c) {
                s.quadrant[q][c] += image.at(y, x, c);
                s.global[c] += image.at(y, x, c);
            }
        }
    }
    for (int q = 0; q < 4; ++q) {
        for (int c = 0; c < 3; ++c) s.quadrant[q][c] /= std::max(counts[q], 1);
    }
    for (int c = 0; c < 3; ++c) s.global[c] /= static_cast<double>(h) * w;
    return s;
}

void project_into(std::span<double> token, const Rgb& rgb) {
    const auto& p = MockImageEncoder::projection();
    for (int j = 0; j < MockImageEncoder::kDim; ++j) {
        token[j] = p[j][0] * rgb[0] + p[j][1] * rgb[1] + p[j][2] * rgb[2];
    }
}

}  // namespace

const std::array<std::array<double, 3>, MockImageEncoder::kDim>& MockImageEncoder::projection() {
    static const std::array<std::array<double, 3>, kDim> p = {{
        {1.0, 0.0, 0.0},
        {0.0, 1.0, 0.0},
        {0.0, 0.0, 1.0},
        {0.5, 0.5, 0.0},
        {0.0, 0.5, 0.5},
        {0.5, 0.0, 0.5},
        {0.3, 0.59, 0.11},
        {0.25, -0.5, 0.25},
    }};
    return p;
}

std::array<double, 3> MockImageEncoder::token_color(std::span<const double> token) {
    static const auto pinv = detail::left_inverse(projection());
    if (token.size() != static_cast<std::size_t>(kDim)) throw InputError("token has wrong dimension");
    Rgb out{};
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < kDim; ++k) out[i] += pinv[i][k] * token[k];
    }
    return out;
}

int MockImageEncoder::quadrant(int y, int x, int height, int width) {
    return (2 * y >= height ? 2 : 0) + (2 * x >= width ? 1 : 0);
}

PromptEmbedding MockImageEncoder::encode(const RgbImage& image) const {
    if (image.empty()) throw InputError("cannot encode an empty image");
    const RegionStats s = region_means(image);
    PromptEmbedding e(kTokens, kDim, SourceKind::image);
    for (int q = 0; q < 4; ++q) project_into(e.token(q), s.quadrant[q]);
    project_into(e.token(4), s.global);
    return e;
}

std::array<double, 3> MockTextEncoder::word_color(std::string_view word) {
    const std::string w(word);
    if (auto it = color_vocabulary().find(w); it != color_vocabulary().end()) return it->second;
    if (is_stopword(w)) return {0.5, 0.5, 0.5};
    std::uint64_t state = fnv1a(w);
    Rgb c{};
    for (auto& v : c) v = 0.4 + 0.2 * unit_from_hash(state);
    return c;
}

PromptEmbedding MockTextEncoder::encode(std::string_view text) const {
    const auto words = split_words(text);
    if (words.empty()) throw InputError("text prompt has no words");
    PromptEmbedding e(static_cast<int>(words.size()), MockImageEncoder::kDim, SourceKind::text);
    for (std::size_t i = 0; i < words.size(); ++i) {
        project_into(e.token(static_cast<int>(i)), word_color(words[i]));
    }
    return e;
}

namespace {

constexpr double kJointGain = 4.0;

std::array<double, 2> opponent_chroma(const Rgb& c) {
    return {c[0] - c[1], 0.5 * (c[0] + c[1]) - c[2]};
}

}  // namespace

std::vector<double> MockJointEncoder::embed_image(const RgbImage& image) const {
    const int h = image.height(), w = image.width();
    std::array<double, 4> sums{};
    std::array<int, 4> counts{};
    double total = 0.0;
    Rgb mean{};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double l = rec709_luma(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2));
            const int q = MockImageEncoder::quadrant(y, x, h, w);
            sums[q] += l;
            ++counts[q];
            total += l;
            for (int c = 0; c < 3; ++c) mean[c] += image.at(y, x, c);
        }
    }
    const double n = static_cast<double>(h) * w;
    total /= n;
    for (auto& v : mean) v /= n;
    std::vector<double> out(kDim, 0.0);
    for (int q = 0; q < 4; ++q) {
        out[q] = kJointGain * ((counts[q] ? sums[q] / counts[q] : total) - total);
    }
    const auto chroma = opponent_chroma(mean);
    out[4] = kJointGain * chroma[0];
    out[5] = kJointGain * chroma[1];
    out[6] = 1.0;
    return out;
}

std::vector<double> MockJointEncoder::embed_text(std::string_view text) const {
    static const std::unordered_map<std::string, std::array<double, 4>> layout = {
        {"top", {1.2, 1.2, -1.2, -1.2}},
        {"bottom", {-1.2, -1.2, 1.2, 1.2}},
        {"left", {1.2, -1.2, 1.2, -1.2}},
        {"right", {-1.2, 1.2, -1.2, 1.2}},
    };
    std::vector<double> out(kDim, 0.0);
    int used = 0;
    for (const auto& w : split_words(text)) {
        if (is_stopword(w)) continue;
        ++used;
        if (auto it = layout.find(w); it != layout.end()) {
            for (int q = 0; q < 4; ++q) out[q] += it->second[q];
        } else if (auto ct = color_vocabulary().find(w); ct != color_vocabulary().end()) {
            const auto chroma = opponent_chroma(ct->second);
            out[4] += kJointGain * chroma[0];
            out[5] += kJointGain * chroma[1];
        } else {
            std::uint64_t state = fnv1a(w) ^ 0x5bd1e995ull;
            for (int j = 0; j < 6; ++j) out[j] += 2.0 * unit_from_hash(state) - 1.0;
        }
    }
    if (used > 0) {
        for (int j = 0; j < 6; ++j) out[j] /= used;
    }
    out[6] = 1.0;
    return out;
}

}  // namespace vton
