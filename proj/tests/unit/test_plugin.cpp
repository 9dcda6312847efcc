#include <doctest.h>

#include "support.hpp"
#include "vton/config.hpp"
#include "vton/error.hpp"
#include "vton/plugin.hpp"

using namespace vton;

TEST_SUITE("plugin") {
    TEST_CASE("mock backend by config") {
        Config c;
        const auto be = make_backend(c);
        CHECK(be->info().name == "mock");
        CHECK(be->schedule().steps == 50);
        c.set("backend.kind", "tpu");
        CHECK_THROWS_AS(make_backend(c), InputError);
        c.set("backend.kind", "external");
        CHECK_THROWS_AS(make_backend(c), InputError);
    }

    TEST_CASE("external backend through the plugin ABI") {
        Config c;
        c.set("backend.kind", "external");
        c.set("backend.plugin", VTON_TEST_PLUGIN);
        c.set("backend.steps", 20);
        const auto be = make_backend(c);
        CHECK(be->info().name == "mock-plugin");
        CHECK(be->info().exclusive);
        CHECK(be->schedule().steps == 20);
        const RgbImage img = test::block_image(32, 32, 8, 2);
        const RgbImage back = be->decode(be->encode(img));
        for (std::size_t i = 0; i < img.values().size(); ++i) CHECK(std::abs(back.values()[i] - img.values()[i]) < 1e-6);

        c.set("backend.plugin", "/nonexistent/libnothing.so");
        CHECK_THROWS_AS(make_backend(c), InputError);
    }
}
