#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "vton/block_analysis.hpp"
#include "vton/error.hpp"
#include "vton/mock_backend.hpp"

using namespace vton;

namespace {

// Bright warm top half over a dark cool bottom half: a layout the word "top"
// describes and a chroma the style residual picks up.
RgbImage probe_image(int n = 64) {
    RgbImage img(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const bool top = y < n / 2;
            img.at(y, x, 0) = top ? 0.92 : 0.10;
            img.at(y, x, 1) = top ? 0.55 : 0.30;
            img.at(y, x, 2) = top ? 0.20 : 0.38;
        }
    }
    return img;
}

const std::vector<std::string> kWords{"top"};

}  // namespace

TEST_SUITE("blocks") {
    TEST_CASE("reported mock profile recovers style block 7 and content blocks 3, 4, 6") {
        const MockBackend backend;
        const std::vector<RgbImage> probes{probe_image()};
        const auto report = analyze_block_sensitivity(probes, kWords, backend);
        REQUIRE(report.blocks.size() == 11);
        CHECK(report.style_block == 7);
        CHECK(std::set<int>(report.content_blocks.begin(), report.content_blocks.end()) == std::set<int>{3, 4, 6});
        CHECK(report.content_blocks.front() == 4);
        const auto routing = report.routing(InjectionConfig{});
        CHECK(routing == InjectionConfig{});
    }

    TEST_CASE("planted style signal: block 7 at twice every other block ranks first on style") {
        MockBackendOptions opt;
        opt.profile = MockProfile::uniform(11, 0.5, 0.3);
        opt.profile.style_gain[7] = 1.0;
        const MockBackend backend(opt);
        const std::vector<RgbImage> probes{probe_image()};
        const auto report = analyze_block_sensitivity(probes, kWords, backend);
        CHECK(report.style_block == 7);
        for (const auto& b : report.blocks) {
            REQUIRE(b.style_score.has_value());
            if (b.block != 7) CHECK(*b.style_score < *report.blocks[7].style_score);
        }
    }

    TEST_CASE("planted content signal in blocks 3, 4, 6 gives exactly those as top three") {
        MockBackendOptions opt;
        opt.profile = MockProfile::uniform(11, 0.5, 0.1);
        opt.profile.content_gain[3] = opt.profile.content_gain[4] = opt.profile.content_gain[6] = 0.7;
        const std::vector<RgbImage> probes{probe_image()};
        {
            const auto report = analyze_block_sensitivity(probes, kWords, MockBackend(opt));
            std::vector<int> order{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return report.blocks[a].content_score > report.blocks[b].content_score;
            });
            CHECK(std::set<int>(order.begin(), order.begin() + 3) == std::set<int>{3, 4, 6});
            CHECK(report.blocks[order[2]].content_score > report.blocks[order[3]].content_score);
        }
        // With a distinct style block the selection excludes it and keeps {3, 4, 6}.
        opt.profile.style_gain[7] = 1.0;
        const auto report = analyze_block_sensitivity(probes, kWords, MockBackend(opt));
        CHECK(report.style_block == 7);
        CHECK(std::set<int>(report.content_blocks.begin(), report.content_blocks.end()) == std::set<int>{3, 4, 6});
    }

    TEST_CASE("duplicated probe gives the same per-block scores") {
        const MockBackend backend;
        const std::vector<RgbImage> one{probe_image()};
        const std::vector<RgbImage> two{probe_image(), probe_image()};
        const auto a = analyze_block_sensitivity(one, kWords, backend);
        const auto b = analyze_block_sensitivity(two, kWords, backend);
        for (int i = 0; i < 11; ++i) {
            CHECK(a.blocks[i].content_score == doctest::Approx(b.blocks[i].content_score).epsilon(1e-12));
            CHECK(*a.blocks[i].style_score == doctest::Approx(*b.blocks[i].style_score).epsilon(1e-12));
        }
        CHECK(a.to_tsv() == analyze_block_sensitivity(one, kWords, backend).to_tsv());
    }

    TEST_CASE("report outputs") {
        const MockBackend backend;
        const std::vector<RgbImage> probes{probe_image()};
        const auto report = analyze_block_sensitivity(probes, kWords, backend);
        const std::string tsv = report.to_tsv();
        CHECK(tsv.rfind("block\tcontent_score\tstyle_score\n", 0) == 0);
        CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 12);
        const auto j = report.to_json();
        CHECK(j["blocks"].size() == 11);
        CHECK(j["style_block"] == 7);
        const RgbImage chart = report.render_chart();
        CHECK(chart.width() > 11 * 10);
        CHECK(chart.height() > 100);
    }

    TEST_CASE("missing probes or words are input errors") {
        const MockBackend backend;
        const std::vector<RgbImage> none;
        const std::vector<RgbImage> probes{probe_image()};
        const std::vector<std::string> no_words;
        CHECK_THROWS_AS(analyze_block_sensitivity(none, kWords, backend), InputError);
        CHECK_THROWS_AS(analyze_block_sensitivity(probes, no_words, backend), InputError);
    }
}
