#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vton/embeddings.hpp"
#include "vton/types.hpp"

namespace vton {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

using PointSet2D = std::vector<Point2>;

/// Symmetric mean chamfer distance in pixels:
/// ½·(mean over a of the distance to the nearest b + the same from b to a).
/// Uses a uniform grid for the nearest-neighbour search; returns exactly
/// what `chamfer_distance_bruteforce` returns.
double chamfer_distance(const PointSet2D& a, const PointSet2D& b);
double chamfer_distance_bruteforce(const PointSet2D& a, const PointSet2D& b);

/// Pixel centres where the sketch is darker than `threshold` (Rec.709 luma).
PointSet2D stroke_points(const RgbImage& sketch, double threshold = 0.5);

/// Sobel gradient magnitude of the luma of `image` at pixels of `region`,
/// thresholded at the given percentile of the in-region magnitudes. Only
/// strictly positive magnitudes count as edges.
PointSet2D edge_points(const RgbImage& image, const GrayMask& region, double percentile = 90.0);

struct MetricOptions {
    double edge_percentile = 90.0;
    double stroke_threshold = 0.5;
    double sigma_frac = 0.05;
    LightnessSpace lightness = LightnessSpace::cielab;
};

/// Chamfer distance between sketch strokes and edges of `generated` inside
/// `region`; lower is better. nullopt when either point set is empty.
std::optional<double> sketch_score(const RgbImage& sketch, const RgbImage& generated, const GrayMask& region,
                                   const MetricOptions& options = {});

/// `image` cropped to the bounding box of `region`, with pixels outside the
/// region set to the region's mean color. nullopt for an empty region.
std::optional<RgbImage> masked_crop(const RgbImage& image, const GrayMask& region);

/// Cosine between the mean-pooled style residuals of the generated region
/// and of the image prompt. nullopt when either residual is zero.
std::optional<double> style_score(const RgbImage& generated, const RgbImage& image_prompt, const GrayMask& region,
                                  const ImageEncoder& encoder, const MetricOptions& options = {});

/// 100 × cosine(image, text) in the joint space.
double text_score(const RgbImage& generated, std::string_view text, const JointEncoder& encoder);

/// Mean text_score over the words; throws InputError when `words` is empty.
double content_score(const RgbImage& generated, std::span<const std::string> words, const JointEncoder& encoder);

}  // namespace vton
