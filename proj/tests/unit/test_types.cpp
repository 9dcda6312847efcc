#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "vton/error.hpp"
#include "vton/image_io.hpp"
#include "vton/types.hpp"

using namespace vton;

TEST_SUITE("types") {
    TEST_CASE("mask set algebra") {
        const GrayMask a = test::rect_mask(4, 4, 0, 0, 2, 4);
        const GrayMask b = test::rect_mask(4, 4, 1, 0, 3, 4);
        CHECK(mask_union(a, b).count() == 12);
        CHECK(mask_intersection(a, b).count() == 4);
        CHECK(mask_difference(a, b).count() == 4);
        CHECK(mask_complement(a).count() == 8);
        CHECK_THROWS_AS(mask_union(a, GrayMask(3, 4)), InputError);
    }

    TEST_CASE("latent arithmetic and masked norm") {
        LatentGrid a(2, 2, 2, 1.0);
        LatentGrid b(2, 2, 2, 2.0);
        CHECK(a.dot(b) == doctest::Approx(16.0));
        CHECK((a + b).at(1, 1, 1) == 3.0);
        CHECK((b - a).norm() == doctest::Approx(std::sqrt(8.0)));
        CHECK((2.0 * a) == b);
        GrayMask one(2, 2);
        one.set(0, 1);
        CHECK(masked_norm(b, one) == doctest::Approx(std::sqrt(8.0)));
        a.at(0, 0, 0) = std::nan("");
        CHECK_FALSE(a.all_finite());
    }

    TEST_CASE("non-positive dimensions are rejected") {
        CHECK_THROWS_AS(RgbImage(0, 4), InputError);
        CHECK_THROWS_AS(LatentGrid(4, 0, 1), InputError);
    }

    TEST_CASE("png round trip at 8-bit precision") {
        const RgbImage img = test::block_image(16, 24, 4, 7);
        const auto bytes = encode_png(img);
        const RgbImage back = decode_png(bytes);
        REQUIRE(back.height() == 16);
        REQUIRE(back.width() == 24);
        for (std::size_t i = 0; i < img.values().size(); ++i) {
            CHECK(std::abs(back.values()[i] - img.values()[i]) <= 0.5 / 255.0 + 1e-12);
        }
        // Values already on the 8-bit grid survive exactly.
        CHECK(decode_png(encode_png(back)) == back);
    }

    TEST_CASE("mask png round trip") {
        const auto dir = std::filesystem::temp_directory_path() / "vton_types_test";
        std::filesystem::create_directories(dir);
        const GrayMask m = test::random_mask(9, 13, 0.4, 3);
        write_mask_png(dir / "m.png", m);
        CHECK(read_mask_png(dir / "m.png") == m);
        CHECK_THROWS_AS(read_png(dir / "missing.png"), InputError);
        std::filesystem::remove_all(dir);
    }
}
