#include "vton/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vton/error.hpp"

namespace vton {

namespace {

double dist(const Point2& p, const Point2& q) {
    const double dx = p.x - q.x, dy = p.y - q.y;
    return std::sqrt(dx * dx + dy * dy);
}

void require_points(const PointSet2D& a, const PointSet2D& b) {
    if (a.empty() || b.empty()) throw InputError("chamfer distance of an empty point set");
}

/// Uniform bucket grid over a point set for exact nearest-neighbour queries.
class PointGrid {
public:
    explicit PointGrid(const PointSet2D& pts) : pts_(pts) {
        min_x_ = max_x_ = pts[0].x;
        min_y_ = max_y_ = pts[0].y;
        for (const auto& p : pts) {
            min_x_ = std::min(min_x_, p.x);
            max_x_ = std::max(max_x_, p.x);
            min_y_ = std::min(min_y_, p.y);
            max_y_ = std::max(max_y_, p.y);
        }
        const double span = std::max({max_x_ - min_x_, max_y_ - min_y_, 1.0});
        const double per_side = std::max(1.0, std::ceil(std::sqrt(static_cast<double>(pts.size()) / 2.0)));
        cell_ = span / per_side;
        nx_ = static_cast<int>((max_x_ - min_x_) / cell_) + 1;
        ny_ = static_cast<int>((max_y_ - min_y_) / cell_) + 1;
        buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            buckets_[bucket(cx(pts[i].x), cy(pts[i].y))].push_back(i);
        }
    }

    double nearest(const Point2& q) const {
        const long long qx = cx(q.x), qy = cy(q.y);
        double best = std::numeric_limits<double>::infinity();
        // Rings past the far corner of the grid hold nothing.
        const long long max_ring =
            std::max({std::llabs(qx), std::llabs(qx - (nx_ - 1)), std::llabs(qy), std::llabs(qy - (ny_ - 1))});
        for (long long k = 0; k <= max_ring; ++k) {
            for (long long gy = qy - k; gy <= qy + k; ++gy) {
                if (gy < 0 || gy >= ny_) continue;
                const bool edge_row = gy == qy - k || gy == qy + k;
                for (long long gx = qx - k; gx <= qx + k; gx += (edge_row ? 1 : 2 * std::max(k, 1LL))) {
                    if (gx >= 0 && gx < nx_) {
                        for (std::size_t i : buckets_[bucket(gx, gy)]) best = std::min(best, dist(q, pts_[i]));
                    }
                }
            }
            // Every point in ring k+1 or beyond is at least k cells away; one
            // cell of slack absorbs rounding in the bucket assignment.
            if (best <= static_cast<double>(k - 1) * cell_) break;
        }
        return best;
    }

private:
    long long cx(double x) const { return static_cast<long long>(std::floor((x - min_x_) / cell_)); }
    long long cy(double y) const { return static_cast<long long>(std::floor((y - min_y_) / cell_)); }
    std::size_t bucket(long long gx, long long gy) const {
        gx = std::clamp<long long>(gx, 0, nx_ - 1);
        gy = std::clamp<long long>(gy, 0, ny_ - 1);
        return static_cast<std::size_t>(gy) * nx_ + static_cast<std::size_t>(gx);
    }

    const PointSet2D& pts_;
    double min_x_, max_x_, min_y_, max_y_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<std::size_t>> buckets_;
};

double mean_nearest_brute(const PointSet2D& from, const PointSet2D& to) {
    double sum = 0.0;
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) best = std::min(best, dist(p, q));
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

double mean_nearest_grid(const PointSet2D& from, const PointSet2D& to) {
    const PointGrid grid(to);
    double sum = 0.0;
    for (const auto& p : from) sum += grid.nearest(p);
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance_bruteforce(const PointSet2D& a, const PointSet2D& b) {
    require_points(a, b);
    return 0.5 * (mean_nearest_brute(a, b) + mean_nearest_brute(b, a));
}

double chamfer_distance(const PointSet2D& a, const PointSet2D& b) {
    require_points(a, b);
    return 0.5 * (mean_nearest_grid(a, b) + mean_nearest_grid(b, a));
}

PointSet2D stroke_points(const RgbImage& sketch, double threshold) {
    PointSet2D pts;
    for (int y = 0; y < sketch.height(); ++y) {
        for (int x = 0; x < sketch.width(); ++x) {
            if (rec709_luma(sketch.at(y, x, 0), sketch.at(y, x, 1), sketch.at(y, x, 2)) < threshold) {
                pts.push_back({static_cast<double>(x), static_cast<double>(y)});
            }
        }
    }
    return pts;
}

PointSet2D edge_points(const RgbImage& image, const GrayMask& region, double percentile) {
    if (region.height() != image.height() || region.width() != image.width()) {
        throw InputError("edge region does not match the image");
    }
    if (!(percentile >= 0.0 && percentile <= 100.0)) throw InputError("edge percentile must be in [0, 100]");
    const int H = image.height(), W = image.width();
    auto luma = [&](int y, int x) {
        y = std::clamp(y, 0, H - 1);
        x = std::clamp(x, 0, W - 1);
        return rec709_luma(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2));
    };
    std::vector<double> mags;
    std::vector<std::pair<Point2, double>> cand;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (!region.at(y, x)) continue;
            const double gx = (luma(y - 1, x + 1) + 2 * luma(y, x + 1) + luma(y + 1, x + 1)) -
                              (luma(y - 1, x - 1) + 2 * luma(y, x - 1) + luma(y + 1, x - 1));
            const double gy = (luma(y + 1, x - 1) + 2 * luma(y + 1, x) + luma(y + 1, x + 1)) -
                              (luma(y - 1, x - 1) + 2 * luma(y - 1, x) + luma(y - 1, x + 1));
            const double m = std::sqrt(gx * gx + gy * gy);
            mags.push_back(m);
            cand.push_back({{static_cast<double>(x), static_cast<double>(y)}, m});
        }
    }
    PointSet2D pts;
    if (mags.empty()) return pts;
    std::sort(mags.begin(), mags.end());
    // Linear interpolation between closest ranks.
    const double pos = percentile / 100.0 * static_cast<double>(mags.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, mags.size() - 1);
    const double thr = mags[lo] + (pos - static_cast<double>(lo)) * (mags[hi] - mags[lo]);
    for (const auto& [p, m] : cand) {
        if (m > 0.0 && m >= thr) pts.push_back(p);
    }
    return pts;
}

std::optional<double> sketch_score(const RgbImage& sketch, const RgbImage& generated, const GrayMask& region,
                                   const MetricOptions& options) {
    if (sketch.height() != generated.height() || sketch.width() != generated.width()) {
        throw InputError("sketch and generated image differ in size");
    }
    const PointSet2D strokes = stroke_points(sketch, options.stroke_threshold);
    const PointSet2D edges = edge_points(generated, region, options.edge_percentile);
    if (strokes.empty() || edges.empty()) return std::nullopt;
    return chamfer_distance(strokes, edges);
}

std::optional<RgbImage> masked_crop(const RgbImage& image, const GrayMask& region) {
    if (region.height() != image.height() || region.width() != image.width()) {
        throw InputError("region does not match the image");
    }
    int y0 = image.height(), y1 = -1, x0 = image.width(), x1 = -1;
    double mean[3] = {0, 0, 0};
    std::size_t n = 0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!region.at(y, x)) continue;
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            for (int c = 0; c < 3; ++c) mean[c] += image.at(y, x, c);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    for (double& m : mean) m /= static_cast<double>(n);
    RgbImage out(y1 - y0 + 1, x1 - x0 + 1);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            for (int c = 0; c < 3; ++c) out.at(y - y0, x - x0, c) = region.at(y, x) ? image.at(y, x, c) : mean[c];
        }
    }
    return out;
}

std::optional<double> style_score(const RgbImage& generated, const RgbImage& image_prompt, const GrayMask& region,
                                  const ImageEncoder& encoder, const MetricOptions& options) {
    const auto crop = masked_crop(generated, region);
    if (!crop) return std::nullopt;
    auto pooled_style = [&](const RgbImage& img) {
        return compute_style_embedding(img, default_blur_sigma(img, options.sigma_frac), encoder, options.lightness)
            .pooled();
    };
    const auto a = pooled_style(*crop);
    const auto b = pooled_style(image_prompt);
    auto norm = [](const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); };
    if (norm(a) < 1e-12 || norm(b) < 1e-12) return std::nullopt;
    return cosine_similarity(a, b);
}

double text_score(const RgbImage& generated, std::string_view text, const JointEncoder& encoder) {
    return 100.0 * cosine_similarity(encoder.embed_image(generated), encoder.embed_text(text));
}

double content_score(const RgbImage& generated, std::span<const std::string> words, const JointEncoder& encoder) {
    if (words.empty()) throw InputError("content score needs at least one word");
    const auto image = encoder.embed_image(generated);
    double sum = 0.0;
    for (const auto& w : words) sum += 100.0 * cosine_similarity(image, encoder.embed_text(w));
    return sum / static_cast<double>(words.size());
}

}  // namespace vton
