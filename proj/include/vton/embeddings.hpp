#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vton/types.hpp"

namespace vton {

enum class SourceKind { image, text, style_residual };

/// n×d token sequence, row-major.
struct PromptEmbedding {
    int n_tokens = 0;
    int dim = 0;
    std::vector<double> tokens;
    SourceKind kind = SourceKind::image;

    PromptEmbedding() = default;
    PromptEmbedding(int n, int d, SourceKind k);

    std::span<const double> token(int i) const {
        return std::span<const double>(tokens).subspan(static_cast<std::size_t>(i) * dim, dim);
    }
    std::span<double> token(int i) {
        return std::span<double>(tokens).subspan(static_cast<std::size_t>(i) * dim, dim);
    }

    /// Mean over tokens.
    std::vector<double> pooled() const;
    PromptEmbedding scaled(double s) const;
    bool all_finite() const;

    friend bool operator==(const PromptEmbedding&, const PromptEmbedding&) = default;
};

/// Image prompt encoder (the CLIP-image role).
class ImageEncoder {
public:
    virtual ~ImageEncoder() = default;
    virtual PromptEmbedding encode(const RgbImage& image) const = 0;
    virtual int n_tokens() const = 0;
    virtual int dim() const = 0;
};

/// Text prompt encoder feeding the denoiser.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual PromptEmbedding encode(std::string_view text) const = 0;
};

/// Shared image/text space used by the text and content metrics.
class JointEncoder {
public:
    virtual ~JointEncoder() = default;
    virtual std::vector<double> embed_image(const RgbImage& image) const = 0;
    virtual std::vector<double> embed_text(std::string_view text) const = 0;
};

enum class LightnessSpace { cielab, rec709 };

LightnessSpace parse_lightness_space(std::string_view name);

/// CIELAB L* (D65) of an sRGB color, in [0, 100].
double cielab_lightness(double r, double g, double b);
double rec709_luma(double r, double g, double b);
/// Neutral sRGB gray whose CIELAB L* equals `lstar`.
double neutral_gray_for_lightness(double lstar);

/// Lightness-only rendition of `image`: each pixel becomes the neutral gray
/// with the same lightness, replicated over the three channels. Idempotent.
RgbImage extract_lightness(const RgbImage& image, LightnessSpace space = LightnessSpace::cielab);

/// Separable Gaussian blur with half-sample symmetric boundary extension.
/// Preserves the image mean for any sigma.
RgbImage blur_global(const RgbImage& image, double sigma);

/// Blur width used when the caller does not pin one: `frac * min(H, W)` pixels.
double default_blur_sigma(const RgbImage& image, double frac = 0.05);

/// Blurred lightness-only proxy that carries the structural content of `image`.
RgbImage content_proxy(const RgbImage& image, double sigma,
                       LightnessSpace space = LightnessSpace::cielab);

/// Style residual: encoder(image) - encoder(content_proxy(image)), token-wise.
PromptEmbedding compute_style_embedding(const RgbImage& image_prompt, double sigma,
                                        const ImageEncoder& encoder,
                                        LightnessSpace space = LightnessSpace::cielab);

PromptEmbedding encode_image_prompt(const RgbImage& image_prompt, const ImageEncoder& encoder);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Mock encoders. Every token is a fixed linear function of simple region
// statistics, so every expected value in the tests can be worked by hand.

/// Five tokens of dimension 8: mean RGB of each image quadrant (TL, TR, BL, BR)
/// and of the whole image, each multiplied by the fixed 8×3 matrix
/// `projection()`.
class MockImageEncoder final : public ImageEncoder {
public:
    static constexpr int kTokens = 5;
    static constexpr int kDim = 8;

    PromptEmbedding encode(const RgbImage& image) const override;
    int n_tokens() const override { return kTokens; }
    int dim() const override { return kDim; }

    static const std::array<std::array<double, 3>, kDim>& projection();
    /// Least-squares inverse of the projection: token -> RGB.
    static std::array<double, 3> token_color(std::span<const double> token);
    /// Token index covering latent/pixel cell (y, x) of an h×w grid.
    static int quadrant(int y, int x, int height, int width);
};

/// One token per word; each word maps to an sRGB color (a small built-in color
/// vocabulary, otherwise a hash-derived muted color) projected like an image
/// token.
class MockTextEncoder final : public TextEncoder {
public:
    PromptEmbedding encode(std::string_view text) const override;
    static std::array<double, 3> word_color(std::string_view word);
};

/// 7-dim joint space: 4 quadrant-lightness deviations, 2 opponent-chroma
/// values, and a constant bias component. Text maps through a small vocabulary
/// of layout words (top, bottom, left, right) and color words.
class MockJointEncoder final : public JointEncoder {
public:
    static constexpr int kDim = 7;

    std::vector<double> embed_image(const RgbImage& image) const override;
    std::vector<double> embed_text(std::string_view text) const override;
};

std::vector<std::string> split_words(std::string_view text);

}  // namespace vton
