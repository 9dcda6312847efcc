#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vton {

/// H×W×3 image, interleaved RGB, values in [0,1].
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int height, int width, double fill = 0.0);
    RgbImage(int height, int width, double r, double g, double b);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    /// Mean over all pixels and channels.
    double mean() const;
    void clamp01();

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Binary mask at pixel or latent resolution.
class GrayMask {
public:
    GrayMask() = default;
    GrayMask(int height, int width, bool fill = false);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }

    bool at(int y, int x) const { return data_[index(y, x)] != 0; }
    void set(int y, int x, bool v = true) { data_[index(y, x)] = v ? 1 : 0; }

    std::size_t count() const;
    bool none() const { return count() == 0; }
    bool same_shape(const GrayMask& o) const noexcept {
        return height_ == o.height_ && width_ == o.width_;
    }

    std::span<const std::uint8_t> values() const noexcept { return data_; }

    friend bool operator==(const GrayMask&, const GrayMask&) = default;

private:
    std::size_t index(int y, int x) const noexcept {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

GrayMask mask_union(const GrayMask& a, const GrayMask& b);
GrayMask mask_intersection(const GrayMask& a, const GrayMask& b);
/// Cells set in `a` but not in `b`.
GrayMask mask_difference(const GrayMask& a, const GrayMask& b);
GrayMask mask_complement(const GrayMask& m);

/// C×h×w latent, channel-major.
class LatentGrid {
public:
    LatentGrid() = default;
    LatentGrid(int channels, int height, int width, double fill = 0.0);

    int channels() const noexcept { return channels_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const LatentGrid& o) const noexcept {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }
    bool all_finite() const;

    double dot(const LatentGrid& o) const;
    double norm() const;

    LatentGrid& operator+=(const LatentGrid& o);
    LatentGrid& operator-=(const LatentGrid& o);
    LatentGrid& operator*=(double s);

    friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

private:
    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

LatentGrid operator+(LatentGrid a, const LatentGrid& b);
LatentGrid operator-(LatentGrid a, const LatentGrid& b);
LatentGrid operator*(double s, LatentGrid a);

/// L2 norm of `z` restricted to the cells set in `region` (all channels).
double masked_norm(const LatentGrid& z, const GrayMask& region);

}  // namespace vton
