#include <doctest.h>

#include "support.hpp"
#include "vton/error.hpp"
#include "vton/masks.hpp"

using namespace vton;

namespace {

void draw_rect_outline(RgbImage& img, int y0, int x0, int y1, int x1, int gap_rows = 0) {
    auto ink = [&](int y, int x) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.0;
    };
    for (int x = x0; x <= x1; ++x) {
        ink(y0, x);
        ink(y1, x);
    }
    const int mid = (y0 + y1) / 2;
    for (int y = y0; y <= y1; ++y) {
        ink(y, x0);
        if (std::abs(y - mid) >= (gap_rows + 1) / 2 || gap_rows == 0) ink(y, x1);
    }
}

}  // namespace

TEST_SUITE("masks") {
    TEST_CASE("blank sketch gives an empty mask") {
        CHECK(sketch_to_mask(RgbImage(32, 32, 1.0)).none());
    }

    TEST_CASE("closed outline fills its interior") {
        RgbImage s(40, 40, 1.0);
        draw_rect_outline(s, 5, 8, 30, 33);
        const GrayMask m = sketch_to_mask(s, 0.5, 0);
        CHECK(m == test::rect_mask(40, 40, 5, 8, 31, 34));
        CHECK(sketch_to_mask(s, 0.5, 3) == test::rect_mask(40, 40, 5, 8, 31, 34));
    }

    TEST_CASE("open contour needs a closing radius") {
        RgbImage s(40, 40, 1.0);
        draw_rect_outline(s, 5, 8, 30, 33, 4);
        const GrayMask strokes = stroke_pixels(s);
        CHECK(sketch_to_mask(s, 0.5, 0) == strokes);
        const GrayMask closed = sketch_to_mask(s, 0.5, 3);
        const GrayMask filled = test::rect_mask(40, 40, 5, 8, 31, 34);
        // Rasterized oracle: the closed mask is the filled rectangle.
        CHECK(test::subset_of(closed, filled));
        CHECK(test::subset_of(test::rect_mask(40, 40, 6, 9, 30, 33), closed));
        CHECK(closed.count() > strokes.count() * 5);
    }

    TEST_CASE("closing never removes pixels") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const GrayMask m = test::random_mask(30, 30, 0.2, seed);
            CHECK(test::subset_of(m, close(m, 2)));
            CHECK(test::subset_of(m, fill_enclosed(m)));
        }
    }

    TEST_CASE("pooling fixture") {
        GrayMask p(16, 16);
        p.set(3, 3);
        const RegionSet r = compose_region_masks(p, GrayMask(16, 16), 8);
        GrayMask expected(2, 2);
        expected.set(0, 0);
        CHECK(r.m_person == expected);
        CHECK(r.m_union == r.m_person);
        CHECK(r.synthesis().none());
        CHECK_THROWS_AS(compose_region_masks(p, GrayMask(16, 8), 8), InputError);
        CHECK_THROWS_AS(compose_region_masks(GrayMask(12, 16), GrayMask(12, 16), 8), InputError);
    }

    TEST_CASE("person inside sketch leaves no removal region") {
        const GrayMask person = test::rect_mask(32, 32, 8, 8, 16, 16);
        const GrayMask sketch = test::rect_mask(32, 32, 4, 4, 20, 20);
        CHECK(compose_region_masks(person, sketch, 8).removal().none());
    }

    TEST_CASE("partition, conservativeness and monotonicity on random masks") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const GrayMask p = test::random_mask(32, 32, 0.02, seed);
            const GrayMask s = test::random_mask(32, 32, 0.02, seed + 1000);
            const RegionSet r = compose_region_masks(p, s, 8);
            const GrayMask syn = r.synthesis(), rem = r.removal(), pre = r.preserve();
            CHECK(mask_intersection(syn, rem).none());
            CHECK(mask_intersection(syn, pre).none());
            CHECK(mask_intersection(rem, pre).none());
            CHECK(syn.count() + rem.count() + pre.count() == 16u);
            CHECK(r.m_union == mask_union(r.m_person, r.m_sketch));
            CHECK(r.m_union == downsample_any(mask_union(p, s), 8));
            for (int y = 0; y < 32; ++y) {
                for (int x = 0; x < 32; ++x) {
                    if (p.at(y, x)) CHECK(r.m_person.at(y / 8, x / 8));
                    if (s.at(y, x)) CHECK(r.m_sketch.at(y / 8, x / 8));
                }
            }
            const GrayMask more = mask_union(p, test::random_mask(32, 32, 0.01, seed + 5000));
            CHECK(test::subset_of(r.m_union, compose_region_masks(more, s, 8).m_union));
        }
    }

    TEST_CASE("person dilation grows the removal region") {
        GrayMask p(32, 32);
        p.set(7, 7);
        CHECK(compose_region_masks(p, GrayMask(32, 32), 8).m_person.count() == 1);
        CHECK(compose_region_masks(p, GrayMask(32, 32), 8, 2).m_person.count() == 4);
    }
}
