#include "vton/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vton/error.hpp"

namespace vton {

RgbImage::RgbImage(int height, int width, double fill)
    : height_(height), width_(width),
      data_(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0) * 3, fill) {
    if (height <= 0 || width <= 0) {
        throw InputError("image dimensions must be positive");
    }
}

RgbImage::RgbImage(int height, int width, double r, double g, double b) : RgbImage(height, width) {
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = r;
        data_[i + 1] = g;
        data_[i + 2] = b;
    }
}

double RgbImage::mean() const {
    if (data_.empty()) return 0.0;
    return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

void RgbImage::clamp01() {
    for (auto& v : data_) v = std::clamp(v, 0.0, 1.0);
}

GrayMask::GrayMask(int height, int width, bool fill)
    : height_(height), width_(width),
      data_(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), fill ? 1 : 0) {
    if (height <= 0 || width <= 0) {
        throw InputError("mask dimensions must be positive");
    }
}

std::size_t GrayMask::count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

namespace {

template <typename Op>
GrayMask combine(const GrayMask& a, const GrayMask& b, Op op) {
    if (!a.same_shape(b)) {
        throw InputError("mask shapes differ");
    }
    GrayMask out(a.height(), a.width());
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            out.set(y, x, op(a.at(y, x), b.at(y, x)));
        }
    }
    return out;
}

}  // namespace

GrayMask mask_union(const GrayMask& a, const GrayMask& b) {
    return combine(a, b, [](bool p, bool q) { return p || q; });
}

GrayMask mask_intersection(const GrayMask& a, const GrayMask& b) {
    return combine(a, b, [](bool p, bool q) { return p && q; });
}

GrayMask mask_difference(const GrayMask& a, const GrayMask& b) {
    return combine(a, b, [](bool p, bool q) { return p && !q; });
}

GrayMask mask_complement(const GrayMask& m) {
    GrayMask out(m.height(), m.width());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            out.set(y, x, !m.at(y, x));
        }
    }
    return out;
}

LatentGrid::LatentGrid(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width),
      data_(static_cast<std::size_t>(std::max(channels, 0)) * std::max(height, 0) * std::max(width, 0),
            fill) {
    if (channels <= 0 || height <= 0 || width <= 0) {
        throw InputError("latent dimensions must be positive");
    }
}

bool LatentGrid::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double LatentGrid::dot(const LatentGrid& o) const {
    if (!same_shape(o)) throw InputError("latent shapes differ");
    return std::inner_product(data_.begin(), data_.end(), o.data_.begin(), 0.0);
}

double LatentGrid::norm() const { return std::sqrt(dot(*this)); }

LatentGrid& LatentGrid::operator+=(const LatentGrid& o) {
    if (!same_shape(o)) throw InputError("latent shapes differ");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

LatentGrid& LatentGrid::operator-=(const LatentGrid& o) {
    if (!same_shape(o)) throw InputError("latent shapes differ");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

LatentGrid& LatentGrid::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

LatentGrid operator+(LatentGrid a, const LatentGrid& b) { return a += b; }
LatentGrid operator-(LatentGrid a, const LatentGrid& b) { return a -= b; }
LatentGrid operator*(double s, LatentGrid a) { return a *= s; }

double masked_norm(const LatentGrid& z, const GrayMask& region) {
    if (region.height() != z.height() || region.width() != z.width()) {
        throw InputError("region does not match latent grid");
    }
    double acc = 0.0;
    for (int c = 0; c < z.channels(); ++c) {
        for (int y = 0; y < z.height(); ++y) {
            for (int x = 0; x < z.width(); ++x) {
                if (region.at(y, x)) acc += z.at(c, y, x) * z.at(c, y, x);
            }
        }
    }
    return std::sqrt(acc);
}

}  // namespace vton
