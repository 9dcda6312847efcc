#include "vton/masks.hpp"

#include <deque>
#include <utility>
#include <vector>

#include "vton/embeddings.hpp"
#include "vton/error.hpp"

namespace vton {

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
    std::vector<std::pair<int, int>> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) out.emplace_back(dy, dx);
        }
    }
    return out;
}

GrayMask erode(const GrayMask& m, int radius) {
    const auto offsets = disk_offsets(radius);
    GrayMask out(m.height(), m.width());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            bool keep = true;
            for (auto [dy, dx] : offsets) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || xx < 0 || yy >= m.height() || xx >= m.width()) continue;
                if (!m.at(yy, xx)) {
                    keep = false;
                    break;
                }
            }
            if (keep) out.set(y, x);
        }
    }
    return out;
}

}  // namespace

GrayMask stroke_pixels(const RgbImage& sketch, double stroke_threshold) {
    GrayMask out(sketch.height(), sketch.width());
    for (int y = 0; y < sketch.height(); ++y) {
        for (int x = 0; x < sketch.width(); ++x) {
            if (rec709_luma(sketch.at(y, x, 0), sketch.at(y, x, 1), sketch.at(y, x, 2)) < stroke_threshold) {
                out.set(y, x);
            }
        }
    }
    return out;
}

GrayMask dilate(const GrayMask& m, int radius) {
    if (radius < 0) throw InputError("morphology radius must be >= 0");
    if (radius == 0) return m;
    const auto offsets = disk_offsets(radius);
    GrayMask out(m.height(), m.width());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.at(y, x)) continue;
            for (auto [dy, dx] : offsets) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || xx < 0 || yy >= m.height() || xx >= m.width()) continue;
                out.set(yy, xx);
            }
        }
    }
    return out;
}

GrayMask close(const GrayMask& m, int radius) {
    if (radius < 0) throw InputError("morphology radius must be >= 0");
    if (radius == 0) return m;
    return erode(dilate(m, radius), radius);
}

GrayMask fill_enclosed(const GrayMask& m) {
    const int H = m.height(), W = m.width();
    GrayMask outside(H, W);
    std::deque<std::pair<int, int>> queue;
    auto seed = [&](int y, int x) {
        if (!m.at(y, x) && !outside.at(y, x)) {
            outside.set(y, x);
            queue.emplace_back(y, x);
        }
    };
    for (int x = 0; x < W; ++x) {
        seed(0, x);
        seed(H - 1, x);
    }
    for (int y = 0; y < H; ++y) {
        seed(y, 0);
        seed(y, W - 1);
    }
    constexpr int dy[] = {-1, 1, 0, 0};
    constexpr int dx[] = {0, 0, -1, 1};
    while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        for (int k = 0; k < 4; ++k) {
            const int yy = y + dy[k], xx = x + dx[k];
            if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
            seed(yy, xx);
        }
    }
    return mask_complement(outside);
}

GrayMask sketch_to_mask(const RgbImage& sketch, double stroke_threshold, int close_radius) {
    if (close_radius < 0) throw InputError("morphology radius must be >= 0");
    const GrayMask strokes = stroke_pixels(sketch, stroke_threshold);
    if (close_radius == 0) return fill_enclosed(strokes);
    // Filling between the two halves of the closing lets a gap narrower than
    // 2r seal the contour; a disk closing alone never bridges collinear ends.
    return erode(fill_enclosed(dilate(strokes, close_radius)), close_radius);
}

GrayMask downsample_any(const GrayMask& m, int factor) {
    if (factor < 1) throw InputError("spatial factor must be >= 1");
    if (m.height() % factor != 0 || m.width() % factor != 0) {
        throw InputError("mask dimensions " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                         " are not multiples of " + std::to_string(factor));
    }
    GrayMask out(m.height() / factor, m.width() / factor);
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m.at(y, x)) out.set(y / factor, x / factor);
        }
    }
    return out;
}

RegionSet compose_region_masks(const GrayMask& m_person_px, const GrayMask& m_sketch_px, int spatial_factor,
                               int person_dilation) {
    if (!m_person_px.same_shape(m_sketch_px)) {
        throw InputError("garment mask and sketch mask differ in size");
    }
    RegionSet r;
    r.person_px = dilate(m_person_px, person_dilation);
    r.sketch_px = m_sketch_px;
    r.union_px = mask_union(r.person_px, r.sketch_px);
    r.m_person = downsample_any(r.person_px, spatial_factor);
    r.m_sketch = downsample_any(r.sketch_px, spatial_factor);
    // Pooling commutes with union, so this equals pooling the pixel union.
    r.m_union = mask_union(r.m_person, r.m_sketch);
    return r;
}

}  // namespace vton
