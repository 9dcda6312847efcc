#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "support.hpp"
#include "vton/elo.hpp"
#include "vton/error.hpp"
#include "vton/evalsuite.hpp"
#include "vton/image_io.hpp"
#include "vton/manifest.hpp"
#include "vton/mock_backend.hpp"

using namespace vton;
namespace fs = std::filesystem;

namespace {

// Independent nearest-neighbour oracle, written out by hand.
double oracle_cd(const PointSet2D& a, const PointSet2D& b) {
    auto one_way = [](const PointSet2D& from, const PointSet2D& to) {
        double s = 0;
        for (const auto& p : from) {
            double best = 1e300;
            for (const auto& q : to) best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
            s += best;
        }
        return s / from.size();
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

RgbImage with_pixels(int n, const PointSet2D& pts, double value, double background = 1.0) {
    RgbImage img(n, n, background);
    for (const auto& p : pts) {
        for (int c = 0; c < 3; ++c) img.at(static_cast<int>(p.y), static_cast<int>(p.x), c) = value;
    }
    return img;
}

GrayMask mask_of(int n, const PointSet2D& pts) {
    GrayMask m(n, n);
    for (const auto& p : pts) m.set(static_cast<int>(p.y), static_cast<int>(p.x));
    return m;
}

// An image whose only in-region edges sit exactly at `pts`: a dark pixel just
// right of each point gives it a nonzero horizontal gradient.
RgbImage edges_at(int n, const PointSet2D& pts) {
    PointSet2D right;
    for (const auto& p : pts) right.push_back({p.x + 1, p.y});
    return with_pixels(n, right, 0.0);
}

double srgb_encode(double lin) { return lin <= 0.0031308 ? 12.92 * lin : 1.055 * std::pow(lin, 1.0 / 2.4) - 0.055; }

// Neutral gray with a given L*, by inverting the CIELAB lightness formula.
double gray_for(double lstar) {
    const double fy = (lstar + 16.0) / 116.0;
    const double y = fy > 6.0 / 29.0 ? fy * fy * fy : 3.0 * (6.0 / 29.0) * (6.0 / 29.0) * (fy - 4.0 / 29.0);
    return srgb_encode(y);
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vton_eval_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RgbImage top_bright(int n, std::array<double, 3> top, std::array<double, 3> bottom) {
    RgbImage img(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = y < n / 2 ? top[c] : bottom[c];
        }
    }
    return img;
}

}  // namespace

TEST_SUITE("evalsuite") {
    TEST_CASE("chamfer fixtures") {
        const PointSet2D a{{0, 0}, {10, 0}}, b{{0, 1}};
        CHECK(chamfer_distance(a, a) == 0.0);
        CHECK(chamfer_distance(PointSet2D{{0, 0}}, PointSet2D{{3, 4}}) == doctest::Approx(5.0).epsilon(1e-15));
        const double expected = 0.5 * ((1.0 + std::sqrt(101.0)) / 2.0 + 1.0);
        CHECK(std::abs(expected - 3.2624) < 1e-4);
        CHECK(std::abs(chamfer_distance(a, b) - expected) < 1e-12);
        CHECK(chamfer_distance_bruteforce(a, b) == doctest::Approx(oracle_cd(a, b)).epsilon(1e-15));
        CHECK(chamfer_distance(a, b) == chamfer_distance(b, a));
        CHECK_THROWS_AS(chamfer_distance(PointSet2D{}, b), InputError);
        CHECK_THROWS_AS(chamfer_distance_bruteforce(a, PointSet2D{}), InputError);
    }

    TEST_CASE("grid chamfer equals brute force exactly on 100 random sets") {
        std::mt19937_64 rng(2024);
        for (int trial = 0; trial < 100; ++trial) {
            std::uniform_int_distribution<int> size(1, 200);
            const double span = trial % 3 == 0 ? 5.0 : trial % 3 == 1 ? 64.0 : 1000.0;
            std::uniform_real_distribution<double> coord(-span, span);
            auto make = [&] {
                PointSet2D s(static_cast<std::size_t>(size(rng)));
                for (auto& p : s) {
                    p = {coord(rng), coord(rng)};
                    // Pixel lattice points and duplicates in a third of the trials.
                    if (trial % 4 == 0) p = {std::round(p.x), std::round(p.y)};
                }
                if (trial % 5 == 0) s.push_back(s.front());
                if (trial % 7 == 0) {
                    for (auto& p : s) p.x = 3.0;  // collinear
                }
                return s;
            };
            const PointSet2D a = make(), b = make();
            const double brute = chamfer_distance_bruteforce(a, b);
            CHECK(chamfer_distance(a, b) == brute);
            CHECK(brute == doctest::Approx(oracle_cd(a, b)).epsilon(1e-12));
            CHECK(brute >= 0.0);
        }
    }

    TEST_CASE("chamfer is zero iff the sets are equal as sets") {
        const PointSet2D a{{1, 2}, {3, 4}, {1, 2}}, b{{3, 4}, {1, 2}}, c{{3, 4}, {1, 2.5}};
        CHECK(chamfer_distance(a, b) == 0.0);
        CHECK(chamfer_distance(a, c) > 0.0);
    }

    TEST_CASE("stroke and edge extraction") {
        RgbImage sketch(16, 16, 1.0);
        for (int c = 0; c < 3; ++c) {
            sketch.at(2, 3, c) = 0.1;
            sketch.at(5, 7, c) = 0.49;
            sketch.at(9, 9, c) = 0.51;
        }
        CHECK(stroke_points(sketch) == PointSet2D{{3, 2}, {7, 5}});

        // Vertical step: left half black, right half white.
        RgbImage step(16, 16, 1.0);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 8; ++x) {
                for (int c = 0; c < 3; ++c) step.at(y, x, c) = 0.0;
            }
        }
        const GrayMask full(16, 16, true);
        const auto edges = edge_points(step, full);
        REQUIRE(!edges.empty());
        for (const auto& p : edges) CHECK((p.x == 7 || p.x == 8));
        CHECK(edges.size() == 32);
        // Flat image: no edges at all.
        CHECK(edge_points(RgbImage(16, 16, 0.3), full).empty());
        CHECK_THROWS_AS(edge_points(step, GrayMask(8, 8, true)), InputError);
        CHECK_THROWS_AS(edge_points(step, full, 101.0), InputError);
    }

    TEST_CASE("sketch score fixtures") {
        const int n = 64;
        const PointSet2D strokes{{5, 5}, {30, 8}, {10, 40}, {40, 40}};
        PointSet2D moved;
        for (const auto& p : strokes) moved.push_back({p.x + 3, p.y + 4});
        const RgbImage sketch = with_pixels(n, strokes, 0.0);

        const auto same = sketch_score(sketch, edges_at(n, strokes), mask_of(n, strokes));
        REQUIRE(same.has_value());
        CHECK(*same == 0.0);

        const auto shifted = sketch_score(sketch, edges_at(n, moved), mask_of(n, moved));
        REQUIRE(shifted.has_value());
        CHECK(*shifted == doctest::Approx(oracle_cd(strokes, moved)).epsilon(1e-12));
        CHECK(*shifted == doctest::Approx(5.0).epsilon(1e-12));

        CHECK_FALSE(sketch_score(sketch, RgbImage(n, n, 0.7), GrayMask(n, n, true)).has_value());
        CHECK_FALSE(sketch_score(RgbImage(n, n, 1.0), edges_at(n, strokes), mask_of(n, strokes)).has_value());
        CHECK_THROWS_AS(sketch_score(sketch, RgbImage(32, 32), GrayMask(32, 32, true)), InputError);
    }

    TEST_CASE("style score") {
        const MockImageEncoder enc;
        const RgbImage img = top_bright(64, {0.9, 0.5, 0.2}, {0.1, 0.3, 0.4});
        const GrayMask full(64, 64, true);
        const auto self = style_score(img, img, full, enc);
        REQUIRE(self.has_value());
        CHECK(*self == doctest::Approx(1.0).epsilon(1e-12));

        // A neutral gray is its own content proxy, so its style residual is zero.
        CHECK_FALSE(style_score(img, RgbImage(64, 64, 0.4), full, enc).has_value());
        CHECK_FALSE(style_score(img, img, GrayMask(64, 64), enc).has_value());

        // Constant red prompt against a constant blue generation: the residual of
        // each is P·(c - gray(L*(c))), with the L* values of the sRGB primaries.
        const std::array<double, 3> red{1, 0, 0}, blue{0, 0, 1};
        const double g_red = gray_for(53.2408), g_blue = gray_for(32.2970);
        const auto& P = MockImageEncoder::projection();
        std::vector<double> er, eb;
        for (const auto& row : P) {
            double vr = 0, vb = 0;
            for (int c = 0; c < 3; ++c) {
                vr += row[c] * (red[c] - g_red);
                vb += row[c] * (blue[c] - g_blue);
            }
            er.push_back(vr);
            eb.push_back(vb);
        }
        double dot = 0, nr = 0, nb = 0;
        for (std::size_t i = 0; i < er.size(); ++i) {
            dot += er[i] * eb[i];
            nr += er[i] * er[i];
            nb += eb[i] * eb[i];
        }
        const double expected = dot / std::sqrt(nr * nb);
        const auto got = style_score(RgbImage(32, 32, 0, 0, 1), RgbImage(32, 32, 1, 0, 0), GrayMask(32, 32, true), enc);
        REQUIRE(got.has_value());
        CHECK(*got == doctest::Approx(expected).epsilon(1e-4));
        CHECK(*got < 0.5);
    }

    TEST_CASE("masked crop") {
        RgbImage img(8, 8, 0.0);
        img.at(2, 2, 0) = 1.0;
        GrayMask region(8, 8);
        region.set(2, 2);
        region.set(3, 4);
        const auto crop = masked_crop(img, region);
        REQUIRE(crop);
        CHECK(crop->height() == 2);
        CHECK(crop->width() == 3);
        CHECK(crop->at(0, 0, 0) == 1.0);
        CHECK(crop->at(0, 1, 0) == 0.5);  // outside pixels take the region mean
        CHECK(crop->at(1, 2, 0) == 0.0);
        CHECK_FALSE(masked_crop(img, GrayMask(8, 8)).has_value());
    }

    TEST_CASE("text and content scores") {
        const MockJointEncoder joint;
        const RgbImage img = top_bright(32, {0.9, 0.9, 0.9}, {0.1, 0.1, 0.1});
        CHECK(text_score(img, "top", joint) == text_score(img, "top", joint));
        CHECK(text_score(img, "top", joint) > text_score(img, "bottom", joint));
        CHECK(text_score(img, "bright top", joint) > text_score(img, "left", joint));

        const std::vector<std::string> one{"top"}, dup{"top", "top"}, two{"top", "red"}, none;
        CHECK(content_score(img, one, joint) == text_score(img, "top", joint));
        CHECK(content_score(img, dup, joint) == doctest::Approx(content_score(img, one, joint)).epsilon(1e-15));
        CHECK(content_score(img, two, joint) ==
              doctest::Approx(0.5 * (text_score(img, "top", joint) + text_score(img, "red", joint))).epsilon(1e-15));
        CHECK_THROWS_AS(content_score(img, none, joint), InputError);
    }

    TEST_CASE("manifest evaluation and report") {
        const fs::path dir = temp_dir("manifest");
        const int n = 64;
        const PointSet2D strokes{{5, 5}, {30, 8}, {10, 40}, {40, 40}};
        PointSet2D moved;
        for (const auto& p : strokes) moved.push_back({p.x + 3, p.y + 4});
        write_png(dir / "sketch.png", with_pixels(n, strokes, 0.0));
        write_png(dir / "exact.png", edges_at(n, strokes));
        write_png(dir / "shifted.png", edges_at(n, moved));
        write_png(dir / "blank.png", RgbImage(n, n, 0.6));
        write_mask_png(dir / "region_exact.png", mask_of(n, strokes));
        write_mask_png(dir / "region_shifted.png", mask_of(n, moved));
        write_png(dir / "prompt.png", top_bright(n, {0.9, 0.5, 0.2}, {0.1, 0.3, 0.4}));

        std::ofstream m(dir / "manifest.jsonl");
        m << R"({"example":"e1","method":"ours","generated":"exact.png","sketch":"sketch.png","region":"region_exact.png","text":"top","content_words":["top","red"],"dataset":"upper"})"
          << "\n\n"
          << R"({"example":"e1","method":"base","generated":"shifted.png","sketch":"sketch.png","region":"region_shifted.png","image_prompt":"prompt.png","dataset":"upper"})"
          << "\n"
          << R"({"example":"e2","method":"ours","generated":"blank.png","sketch":"sketch.png","dataset":"upper"})" << "\n"
          << R"({"example":"e2","method":"base","generated":"blank.png","image_prompt":"blank.png","dataset":"upper"})"
          << "\n"
          << R"({"example":"e3","method":"base","generated":"prompt.png","image_prompt":"prompt.png","dataset":"upper"})"
          << "\n";
        m.close();

        const auto records = read_manifest(dir / "manifest.jsonl");
        REQUIRE(records.size() == 5);
        CHECK(records[0].content_words == std::vector<std::string>{"top", "red"});
        CHECK(records[0].describe_conditions() == "a garment sketch and the text prompt \"top\"");

        const MockBackend backend;
        const PreferenceOracle oracle("ours");
        EvaluationOptions opt;
        opt.tournament.criteria = {"realism"};
        opt.tournament.n_shuffles = 2;
        const auto report = evaluate_manifest(records, dir, backend, &oracle, opt);
        REQUIRE(report.metrics.size() == 5);
        CHECK(*report.metrics[0].sketch_cd == 0.0);
        CHECK(report.metrics[0].text.has_value());
        CHECK(report.metrics[0].content.has_value());
        CHECK_FALSE(report.metrics[0].style.has_value());
        CHECK(*report.metrics[1].sketch_cd == doctest::Approx(5.0).epsilon(1e-12));
        // The crop holds only white region pixels: no style residual.
        CHECK_FALSE(report.metrics[1].style.has_value());
        CHECK(*report.metrics[4].style == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_FALSE(report.metrics[2].sketch_cd.has_value());
        CHECK(report.metrics[2].undefined.size() == 1);
        CHECK_FALSE(report.metrics[3].style.has_value());

        const auto j = report.metrics[2].to_json();
        CHECK(j["sketch_cd"].is_null());
        CHECK(j["example"] == "e2");
        CHECK(j["undefined"].size() == 1);

        REQUIRE(report.elo.count("upper"));
        const auto& elo = report.elo.at("upper");
        // e3 lacks an "ours" result and stays out of the tournament.
        CHECK(elo.matches == 2 * 2);
        CHECK(elo.pooled.mean.at("ours") > elo.pooled.mean.at("base"));

        const std::string md = report.to_markdown();
        CHECK(md.find("### upper") != std::string::npos);
        CHECK(md.find("| Method | Elo ↑ | Sketch (CD) ↓ | Image ↑ | Text ↑ |") != std::string::npos);
        CHECK(md.find("| ours | ") != std::string::npos);
        CHECK(md.find("(1 undefined)") != std::string::npos);
        CHECK(md.find("1.000 (2 undefined)") != std::string::npos);

        write_metrics_jsonl(dir / "metrics.jsonl", report.metrics);
        std::ifstream in(dir / "metrics.jsonl");
        int lines = 0;
        for (std::string line; std::getline(in, line);) {
            const auto rec = nlohmann::json::parse(line);
            CHECK(rec.contains("sketch_cd"));
            ++lines;
        }
        CHECK(lines == 5);
        fs::remove_all(dir);
    }

    TEST_CASE("manifest errors name the line") {
        const fs::path dir = temp_dir("bad");
        std::ofstream(dir / "m.jsonl") << R"({"example":"e","method":"m","generated":"g.png"})" << "\n"
                                       << R"({"example":"e","method":"m"})" << "\n";
        try {
            read_manifest(dir / "m.jsonl");
            FAIL("expected an error");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("m.jsonl:2") != std::string::npos);
        }
        std::ofstream(dir / "u.jsonl") << R"({"example":"e","method":"m","generated":"g.png","score":1})" << "\n";
        CHECK_THROWS_AS(read_manifest(dir / "u.jsonl"), InputError);
        CHECK_THROWS_AS(read_manifest(dir / "missing.jsonl"), InputError);
        fs::remove_all(dir);
    }
}
