#include "vton/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "vton/block_analysis.hpp"
#include "vton/elo.hpp"
#include "vton/error.hpp"
#include "vton/evalsuite.hpp"
#include "vton/image_io.hpp"
#include "vton/injection.hpp"
#include "vton/masks.hpp"
#include "vton/mock_backend.hpp"
#include "vton/removal.hpp"
#include "vton/sampler.hpp"

namespace vton {

namespace {

using Clock = std::chrono::steady_clock;

class Recorder {
public:
    explicit Recorder(std::vector<CheckResult>& out) : out_(out) {}

    void check(std::string name, bool ok, std::string detail = {}) {
        out_.push_back({std::move(name), ok, std::move(detail)});
    }

private:
    std::vector<CheckResult>& out_;
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

LatentGrid random_latent(int c, int h, int w, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    LatentGrid z(c, h, w);
    for (auto& v : z.values()) v = n(rng);
    return z;
}

RemovalDirection unit_direction(LatentGrid v) {
    const double n = v.norm();
    v *= 1.0 / n;
    return {std::move(v), "selfcheck", n};
}

GrayMask random_mask(int h, int w, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution b(p);
    GrayMask m(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m.set(y, x, b(rng));
    }
    return m;
}

GrayMask rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
    GrayMask m(h, w);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.set(y, x);
    }
    return m;
}

bool subset_of(const GrayMask& a, const GrayMask& b) {
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (a.at(y, x) && !b.at(y, x)) return false;
        }
    }
    return true;
}

GrayMask diff_cells(const LatentGrid& a, const LatentGrid& b) {
    GrayMask m(a.height(), a.width());
    for (int c = 0; c < a.channels(); ++c) {
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                if (a.at(c, y, x) != b.at(c, y, x)) m.set(y, x);
            }
        }
    }
    return m;
}

RgbImage block_image(int height, int width, int f, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    RgbImage img(height, width);
    for (int by = 0; by < height / f; ++by) {
        for (int bx = 0; bx < width / f; ++bx) {
            const double r = u(rng), g = u(rng), b = u(rng);
            for (int y = by * f; y < (by + 1) * f; ++y) {
                for (int x = bx * f; x < (bx + 1) * f; ++x) {
                    img.at(y, x, 0) = r;
                    img.at(y, x, 1) = g;
                    img.at(y, x, 2) = b;
                }
            }
        }
    }
    return img;
}

RgbImage outline_sketch(int n, int y0, int x0, int y1, int x1) {
    RgbImage s(n, n, 1.0);
    for (int x = x0; x <= x1; ++x) {
        for (int c = 0; c < 3; ++c) s.at(y0, x, c) = s.at(y1, x, c) = 0.0;
    }
    for (int y = y0; y <= y1; ++y) {
        for (int c = 0; c < 3; ++c) s.at(y, x0, c) = s.at(y, x1, c) = 0.0;
    }
    return s;
}

// ---------------------------------------------------------------------------

void suite_ofr(Recorder& rec) {
    std::mt19937_64 rng(20240601);
    int identity_fail = 0, full_fail = 0, law_fail = 0, idem_fail = 0, dup_fail = 0;
    double worst_full = 0.0, worst_law = 0.0, worst_idem = 0.0, worst_dup = 0.0;
    const int pairs = 200;
    for (int i = 0; i < pairs; ++i) {
        const LatentGrid z = random_latent(4, 8, 8, rng);
        const RemovalDirection d = unit_direction(random_latent(4, 8, 8, rng));
        const double zn = z.norm();
        const double zu = z.dot(d.u);

        if (!(remove_item(z, d, 0.0) == z)) ++identity_fail;

        const LatentGrid once = remove_item(z, d, 1.0);
        const double full = std::abs(once.dot(d.u)) / zn;
        worst_full = std::max(worst_full, full);
        if (full > 1e-6) ++full_fail;

        for (double a : {0.25, 0.5, 0.75}) {
            const double expected = (1.0 - a) * zu;
            const double err = std::abs(remove_item(z, d, a).dot(d.u) - expected);
            // Relative to the expected component, with a floor at double
            // rounding of the full vector for nearly orthogonal pairs.
            const double tol = 1e-9 * std::abs(expected) + 1e-13 * zn;
            worst_law = std::max(worst_law, err / std::max(std::abs(expected), 1e-300));
            if (err > tol) ++law_fail;
        }

        const double idem = (remove_item(once, d, 1.0) - once).norm() / zn;
        worst_idem = std::max(worst_idem, idem);
        if (idem > 1e-12) ++idem_fail;

        // An exact duplicate and a near duplicate are both dropped.
        LatentGrid near = d.u;
        near.values()[static_cast<std::size_t>(i) % near.size()] += 1e-4;
        const std::vector<RemovalDirection> dirs{d, d, unit_direction(near)};
        for (double a : {0.5, 1.0}) {
            const double dup = (remove_items(z, dirs, a) - remove_item(z, d, a)).norm() / zn;
            worst_dup = std::max(worst_dup, dup);
            if (dup > 1e-12) ++dup_fail;
        }
        if (orthonormal_basis(dirs).size() != 1) ++dup_fail;
    }
    const std::string n = " over " + std::to_string(pairs) + " pairs";
    rec.check("alpha=0 is the identity (exact)", identity_fail == 0, std::to_string(identity_fail) + " failures" + n);
    rec.check("alpha=1 leaves |z~.u| <= 1e-6 ||z||", full_fail == 0, "worst |z~.u|/||z|| = " + fmt(worst_full) + n);
    rec.check("residual law (z~.u) = (1-alpha)(z.u) to 1e-9 relative, alpha in {0.25,0.5,0.75}", law_fail == 0,
              "worst relative error " + fmt(worst_law) + n);
    rec.check("idempotent at alpha=1", idem_fail == 0, "worst ||R(R(z))-R(z)||/||z|| = " + fmt(worst_idem) + n);
    rec.check("duplicate directions are dropped: multi-item equals single-item", dup_fail == 0,
              "worst relative difference " + fmt(worst_dup) + n);
}

void suite_mask(Recorder& rec) {
    std::mt19937_64 rng(77);
    int partition_fail = 0, conservative_fail = 0;
    const int pairs = 100;
    for (int i = 0; i < pairs; ++i) {
        const GrayMask p = random_mask(64, 64, 0.01, rng);
        const GrayMask s = random_mask(64, 64, 0.01, rng);
        const RegionSet r = compose_region_masks(p, s, 8);
        const GrayMask syn = r.synthesis(), rem = r.removal(), pre = r.preserve();
        const bool disjoint = mask_intersection(syn, rem).none() && mask_intersection(syn, pre).none() &&
                              mask_intersection(rem, pre).none();
        const bool cover = mask_union(mask_union(syn, rem), pre) == GrayMask(8, 8, true) &&
                           syn.count() + rem.count() + pre.count() == 64u;
        const bool union_ok = r.m_union == mask_union(r.m_person, r.m_sketch);
        if (!disjoint || !cover || !union_ok) ++partition_fail;
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                if ((p.at(y, x) && !r.m_person.at(y / 8, x / 8)) || (s.at(y, x) && !r.m_sketch.at(y / 8, x / 8))) {
                    ++conservative_fail;
                }
            }
        }
    }
    rec.check("synthesis/removal/preserve partition the latent grid (disjoint, covering)", partition_fail == 0,
              std::to_string(partition_fail) + " failures over " + std::to_string(pairs) + " mask pairs");
    rec.check("downsampling is conservative: no set pixel loses its cell", conservative_fail == 0,
              std::to_string(conservative_fail) + " lost pixels");

    GrayMask one(16, 16);
    one.set(3, 3);
    GrayMask expected(2, 2);
    expected.set(0, 0);
    const RegionSet r = compose_region_masks(one, GrayMask(16, 16), 8);
    rec.check("pixel (3,3) pools to cell (0,0)", r.m_person == expected && downsample_any(one, 8) == expected);
}

JobInputs ranf_inputs() {
    JobInputs in;
    in.person = block_image(64, 64, 8, 42);
    in.garment_masks.push_back(rect_mask(64, 64, 8, 8, 40, 40));
    in.sketch = outline_sketch(64, 24, 24, 55, 55);
    in.image_prompt = block_image(32, 32, 4, 5);
    in.text_prompt = "blue top";
    in.seed = 7;
    in.steps = 50;
    return in;
}

// Drops the sketch before every step, so full and sketch-free predictions coincide.
class SketchBlindBackend final : public Backend {
public:
    explicit SketchBlindBackend(const Backend& inner) : inner_(inner) {}
    const BackendInfo& info() const override { return inner_.info(); }
    const NoiseSchedule& schedule() const override { return inner_.schedule(); }
    LatentGrid encode(const RgbImage& image) const override { return inner_.encode(image); }
    RgbImage decode(const LatentGrid& latent) const override { return inner_.decode(latent); }
    LatentGrid denoise_step(const LatentGrid& z_t, int t, const DenoiserConditioning& cond,
                            const NoiseSchedule& schedule, std::uint64_t seed) const override {
        return inner_.denoise_step(z_t, t, cond.without_sketch(), schedule, seed);
    }
    const ImageEncoder& image_encoder() const override { return inner_.image_encoder(); }
    const TextEncoder& text_encoder() const override { return inner_.text_encoder(); }
    const JointEncoder& joint_encoder() const override { return inner_.joint_encoder(); }

private:
    const Backend& inner_;
};

void suite_ranf(Recorder& rec) {
    const MockBackend be;
    const JobInputs in = ranf_inputs();
    const TryOnResult ref = run_tryon(in, be);
    const GrayMask keep = ref.regions.preserve();
    rec.check("latent is 4x8x8 with T=50 steps",
              ref.final_latent.channels() == 4 && ref.final_latent.height() == 8 && ref.final_latent.width() == 8 &&
                  ref.diagnostics.steps.size() == 50u);
    rec.check("all three regions are non-empty",
              !keep.none() && !ref.regions.synthesis().none() && !ref.regions.removal().none());

    double worst = 0.0;
    for (int c = 0; c < 4; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                if (keep.at(y, x)) worst = std::max(worst, std::abs(ref.final_latent.at(c, y, x) - ref.z_removed.at(c, y, x)));
            }
        }
    }
    rec.check("preserve region of the final latent equals z~ (<= 1e-6)", worst <= 1e-6, "max |diff| = " + fmt(worst));

    JobInputs sk = in;
    for (int y = 30; y < 34; ++y) {
        for (int c = 0; c < 3; ++c) sk.sketch->at(y, 40, c) = 0.0;
    }
    const TryOnResult rs = run_tryon(sk, be);
    const GrayMask ds = diff_cells(rs.final_latent, ref.final_latent);
    rec.check("sketch perturbation changes only synthesis cells",
              rs.regions.m_sketch == ref.regions.m_sketch && !ds.none() && subset_of(ds, ref.regions.m_sketch),
              std::to_string(ds.count()) + " cells changed, synthesis has " +
                  std::to_string(ref.regions.m_sketch.count()));

    JobInputs tx = in;
    tx.text_prompt = "green skirt";
    const GrayMask dt = diff_cells(run_tryon(tx, be).final_latent, ref.final_latent);
    rec.check("text perturbation changes only manipulation-region cells", !dt.none() && subset_of(dt, ref.regions.m_union),
              std::to_string(dt.count()) + " cells changed, region has " + std::to_string(ref.regions.m_union.count()));

    // When the sketch has no effect on the denoiser the three-region update
    // must equal the two-term update (denoise inside the region, re-noise outside).
    const SketchBlindBackend blind(be);
    const DenoiserConditioning cond = build_conditioning(in, be, {});
    const NoiseSchedule sched = schedule_for(be, 50, "cosine");
    RegionSet two = ref.regions;
    two.m_sketch = GrayMask(8, 8);
    Diagnostics d3, d2;
    const LatentGrid three_term = fuse_denoise(ref.z_removed, ref.regions, cond, blind, sched, 7, {}, d3);
    const LatentGrid two_term = fuse_denoise(ref.z_removed, two, cond, blind, sched, 7, {}, d2);
    rec.check("d_full = d_nosketch collapses the fused update to two terms (exact)", three_term == two_term,
              "max |diff| = " + fmt((three_term - two_term).norm()));

    const auto png_a = encode_png(run_tryon(in, be).image);
    const auto png_b = encode_png(run_tryon(in, be).image);
    rec.check("equal seeds give byte-identical outputs", png_a == png_b && run_tryon(in, be).final_latent == ref.final_latent);
}

RgbImage probe_image(int n) {
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

void suite_cspe_sdi(Recorder& rec) {
    const MockImageEncoder enc;
    {
        double worst = 0.0;
        for (double g : {0.0, 0.25, 0.4, 0.8, 1.0}) {
            for (double v : compute_style_embedding(RgbImage(16, 16, g), 0.8, enc).tokens) worst = std::max(worst, std::abs(v));
        }
        RgbImage grad(32, 32);
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                for (int c = 0; c < 3; ++c) grad.at(y, x, c) = 0.2 + 0.6 * x / 31.0;
            }
        }
        const RgbImage proxy = content_proxy(grad, 1.5);
        double worst_proxy = 0.0;
        for (double v : compute_style_embedding(proxy, 1e-3, enc).tokens) worst_proxy = std::max(worst_proxy, std::abs(v));
        rec.check("style residual is zero on self-proxy inputs", worst < 1e-12 && worst_proxy < 1e-12,
                  "neutral grays max |e| = " + fmt(worst) + ", blurred proxy max |e| = " + fmt(worst_proxy));
    }
    {
        double worst = 0.0;
        std::uint64_t seed = 900;
        for (int n : {16, 33, 64}) {
            for (double sigma : {0.5, 1.7, 4.0, 12.0}) {
                const RgbImage img = block_image(n - n % 4, n, 1, seed++);
                worst = std::max(worst, std::abs(blur_global(img, sigma).mean() - img.mean()));
            }
        }
        rec.check("blur preserves the image mean (<= 1e-4)", worst <= 1e-4, "max |mean shift| = " + fmt(worst));
    }
    {
        std::mt19937_64 rng(5);
        std::bernoulli_distribution coin(0.3);
        PromptEmbedding style(5, 8, SourceKind::style_residual), content(5, 8, SourceKind::image);
        std::normal_distribution<double> nd;
        for (auto& v : style.tokens) v = nd(rng);
        for (auto& v : content.tokens) v = nd(rng);
        int fail = 0, configs = 0;
        for (int trial = 0; trial < 200; ++trial) {
            InjectionConfig cfg;
            cfg.style_blocks.clear();
            cfg.content_blocks.clear();
            for (int b = 0; b < cfg.n_blocks; ++b) {
                if (coin(rng)) {
                    cfg.style_blocks.insert(b);
                } else if (coin(rng)) {
                    cfg.content_blocks.insert(b);
                }
            }
            cfg.style_scale = 0.1 + trial % 7 * 0.2;
            cfg.content_scale = 0.2 + trial % 5 * 0.3;
            ++configs;
            const InjectionMap map = build_injection_map(cfg, style, content);
            for (const auto& bc : map.blocks) {
                const bool s = cfg.style_blocks.count(bc.block) > 0, c = cfg.content_blocks.count(bc.block) > 0;
                const bool ok = s   ? bc.role == BlockRole::style && bc.image == style.scaled(cfg.style_scale)
                                : c ? bc.role == BlockRole::content && bc.image == content.scaled(cfg.content_scale)
                                    : bc.role == BlockRole::none && !bc.image;
                if (!ok) ++fail;
            }
            InjectionConfig overlap = cfg;
            overlap.style_blocks.insert(0);
            overlap.content_blocks.insert(0);
            bool rejected = false;
            try {
                overlap.validate();
            } catch (const ValidationError&) {
                rejected = true;
            }
            if (!rejected) ++fail;
        }
        rec.check("routing is disjoint: style and content never share a block", fail == 0,
                  std::to_string(fail) + " failures over " + std::to_string(configs) + " routing configs");
    }
    {
        const MockBackend be;
        JobInputs in;
        in.sketch = outline_sketch(64, 10, 10, 50, 50);
        in.image_prompt = block_image(32, 32, 16, 3);
        in.text_prompt = "pink";
        in.seed = 3;
        in.injection.style_scale = in.injection.content_scale = 0.0;
        JobInputs no_image = in;
        no_image.image_prompt.reset();
        const bool edit_eq = run_edit(in, be).final_latent == run_edit(no_image, be).final_latent;

        JobInputs t = ranf_inputs();
        t.injection.style_scale = t.injection.content_scale = 0.0;
        JobInputs t_none = t;
        t_none.image_prompt.reset();
        const bool tryon_eq = run_tryon(t, be).final_latent == run_tryon(t_none, be).final_latent;
        rec.check("zero image scales equal a run without an image prompt (bit-exact)", edit_eq && tryon_eq,
                  std::string("edit ") + (edit_eq ? "equal" : "differs") + ", tryon " + (tryon_eq ? "equal" : "differs"));
    }
    {
        const std::vector<RgbImage> probes{probe_image(64)};
        const std::vector<std::string> words{"top"};
        const auto report = analyze_block_sensitivity(probes, words, MockBackend());
        const std::set<int> content(report.content_blocks.begin(), report.content_blocks.end());
        std::string picked;
        for (int b : report.content_blocks) picked += (picked.empty() ? "" : ",") + std::to_string(b);
        rec.check("block analysis on the rigged mock recovers style {7} and content {3,4,6}",
                  report.style_block == 7 && content == std::set<int>{3, 4, 6},
                  "style " + std::to_string(report.style_block) + ", content " + picked);

        MockBackendOptions opt;
        opt.profile = MockProfile::uniform(11, 0.5, 0.1);
        opt.profile.style_gain[7] = 1.0;
        opt.profile.content_gain[3] = opt.profile.content_gain[4] = opt.profile.content_gain[6] = 0.7;
        const auto planted = analyze_block_sensitivity(probes, words, MockBackend(opt));
        const std::set<int> pc(planted.content_blocks.begin(), planted.content_blocks.end());
        rec.check("planted signals in otherwise uniform blocks are recovered",
                  planted.style_block == 7 && pc == std::set<int>{3, 4, 6});
    }
}

void suite_metrics(Recorder& rec) {
    auto hand_cd = [](const PointSet2D& a, const PointSet2D& b) {
        auto one_way = [](const PointSet2D& from, const PointSet2D& to) {
            double s = 0;
            for (const auto& p : from) {
                double best = 1e300;
                for (const auto& q : to) best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
                s += best;
            }
            return s / static_cast<double>(from.size());
        };
        return 0.5 * (one_way(a, b) + one_way(b, a));
    };
    {
        const PointSet2D a{{0, 0}, {10, 0}}, b{{0, 1}};
        const double cd = chamfer_distance(a, b);
        rec.check("chamfer fixture: identical sets give 0", chamfer_distance(a, a) == 0.0 && chamfer_distance_bruteforce(a, a) == 0.0);
        rec.check("chamfer fixture: one point each at distance 5 gives 5.0",
                  std::abs(chamfer_distance(PointSet2D{{0, 0}}, PointSet2D{{3, 4}}) - 5.0) < 1e-12);
        rec.check("chamfer fixture: {(0,0),(10,0)} vs {(0,1)} gives 3.2624 (+-1e-4)",
                  std::abs(cd - 3.2624) <= 1e-4 && std::abs(cd - hand_cd(a, b)) < 1e-12, "got " + fmt(cd));
    }
    {
        std::mt19937_64 rng(2024);
        int fail = 0;
        for (int trial = 0; trial < 100; ++trial) {
            std::uniform_int_distribution<int> size(1, 200);
            const double span = trial % 3 == 0 ? 5.0 : trial % 3 == 1 ? 64.0 : 1000.0;
            std::uniform_real_distribution<double> coord(-span, span);
            auto make = [&] {
                PointSet2D s(static_cast<std::size_t>(size(rng)));
                for (auto& p : s) {
                    p = {coord(rng), coord(rng)};
                    if (trial % 4 == 0) p = {std::round(p.x), std::round(p.y)};
                }
                return s;
            };
            const PointSet2D a = make(), b = make();
            const double brute = chamfer_distance_bruteforce(a, b);
            if (chamfer_distance(a, b) != brute || std::abs(brute - hand_cd(a, b)) > 1e-12 * std::max(1.0, brute)) ++fail;
        }
        rec.check("accelerated chamfer equals brute force exactly on 100 random sets (<= 200 points)", fail == 0,
                  std::to_string(fail) + " mismatches");
    }
    {
        EloState s = EloState::with_methods({"a", "b"});
        elo_apply(s, {"a", "b", Verdict::a_wins, "c", ""});
        rec.check("Elo fixture: equal ratings, A wins at K=32 gives 1016/984",
                  std::abs(s.ratings["a"] - 1016.0) < 1e-12 && std::abs(s.ratings["b"] - 984.0) < 1e-12,
                  fmt(s.ratings["a"]) + "/" + fmt(s.ratings["b"]));
    }
    {
        const std::vector<std::string> methods{"m0", "m1", "m2", "m3", "m4"};
        EloState s = EloState::with_methods(methods);
        std::mt19937_64 rng(99);
        std::uniform_int_distribution<int> pick(0, 4), verdict(0, 2);
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const int a = pick(rng);
            int b = pick(rng);
            while (b == a) b = pick(rng);
            elo_apply(s, {methods[a], methods[b], static_cast<Verdict>(verdict(rng)), "c", ""});
            worst = std::max(worst, std::abs(s.sum() - 5000.0));
        }
        rec.check("rating sum is conserved (<= 1e-9) over 1e4 random updates", worst <= 1e-9, "max drift " + fmt(worst));
    }
    auto entries = [](const std::vector<std::string>& methods, std::size_t n) {
        std::vector<TournamentEntry> out;
        for (const auto& m : methods) {
            TournamentEntry e{m, {}};
            for (std::size_t i = 0; i < n; ++i) e.images.push_back(m + "/" + std::to_string(i) + ".png");
            out.push_back(std::move(e));
        }
        return out;
    };
    auto examples = [](std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back("ex" + std::to_string(i));
        return out;
    };
    {
        const std::vector<std::string> methods{"alpha", "beta", "gamma", "ours"};
        TournamentOptions opt;
        opt.criteria = {"text-asset alignment", "3d plausibility", "texture details"};
        opt.backoff = std::chrono::milliseconds(1);
        const auto result = run_tournament(entries(methods, 5), examples(5), PreferenceOracle("ours"), opt);
        bool dominant = true;
        for (const auto& m : methods) {
            if (m != "ours" && !(result.pooled.mean.at("ours") > result.pooled.mean.at(m))) dominant = false;
        }
        rec.check("stub oracle preferring one method gives it the strictly highest rating", dominant,
                  "ours " + fmt(result.pooled.mean.at("ours")));
    }
    {
        TournamentOptions opt;
        opt.criteria = {"faithful reflection of all multimodal conditions"};
        opt.seed = 0;
        opt.backoff = std::chrono::milliseconds(1);
        const std::size_t n = 1000;
        const auto result = run_tournament(entries({"a", "b"}, n), examples(n), CoinOracle(opt.seed), opt);
        const double gap = result.pooled.mean.at("a") - result.pooled.mean.at("b");
        rec.check("50/50 stub over 1000 matches keeps the rating gap < 60 at K=32 (seeded)",
                  result.matches == n * static_cast<std::size_t>(opt.n_shuffles) && std::abs(gap) < 60.0,
                  "mean gap over " + std::to_string(opt.n_shuffles) + " orderings " + fmt(gap));
    }
}

struct SuiteDef {
    const char* name;
    double limit;
    void (*run)(Recorder&);
};

const std::vector<SuiteDef>& suites() {
    static const std::vector<SuiteDef> defs{
        {"ofr", 5.0, suite_ofr},       {"mask", 5.0, suite_mask},         {"ranf", 30.0, suite_ranf},
        {"cspe_sdi", 30.0, suite_cspe_sdi}, {"metrics", 60.0, suite_metrics},
    };
    return defs;
}

}  // namespace

bool SuiteResult::passed() const {
    return within_limit() && std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json SuiteResult::to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return {{"suite", name}, {"passed", passed()}, {"seconds", seconds}, {"limit_seconds", limit_seconds}, {"checks", cs}};
}

const std::vector<std::string>& selfcheck_suite_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& d : suites()) out.emplace_back(d.name);
        return out;
    }();
    return names;
}

SuiteResult run_selfcheck_suite(std::string_view name) {
    for (const auto& d : suites()) {
        if (name != d.name) continue;
        SuiteResult r;
        r.name = d.name;
        r.limit_seconds = d.limit;
        Recorder rec(r.checks);
        const auto t0 = Clock::now();
        try {
            d.run(rec);
        } catch (const std::exception& e) {
            rec.check("suite raised no exception", false, e.what());
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        return r;
    }
    throw InputError("unknown selfcheck suite: " + std::string(name));
}

std::vector<SuiteResult> run_selfcheck(std::span<const std::string> names) {
    std::vector<SuiteResult> out;
    if (names.empty()) {
        for (const auto& n : selfcheck_suite_names()) out.push_back(run_selfcheck_suite(n));
    } else {
        for (const auto& n : names) out.push_back(run_selfcheck_suite(n));
    }
    return out;
}

std::string format_selfcheck(const std::vector<SuiteResult>& results) {
    std::ostringstream os;
    for (const auto& s : results) {
        for (const auto& c : s.checks) {
            os << (c.passed ? "PASS" : "FAIL") << "  " << s.name << ": " << c.name;
            if (!c.detail.empty()) os << " [" << c.detail << "]";
            os << "\n";
        }
        os << (s.passed() ? "PASS" : "FAIL") << "  " << s.name << " suite: " << fmt(s.seconds) << " s (limit "
           << fmt(s.limit_seconds) << " s)\n";
    }
    return os.str();
}

}  // namespace vton
