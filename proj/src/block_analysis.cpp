#include "vton/block_analysis.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <set>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vton/backend.hpp"
#include "vton/config.hpp"
#include "vton/error.hpp"
#include "vton/evalsuite.hpp"

namespace vton {

using nlohmann::json;

BlockAnalysisOptions BlockAnalysisOptions::from_config(const Config& config) {
    BlockAnalysisOptions o;
    o.base_prompt = config.value<std::string>("analysis.base_prompt");
    o.seed = config.value<std::uint64_t>("analysis.seed");
    o.top_content = config.value<int>("analysis.top_content");
    o.steps = config.value<int>("backend.steps");
    o.guidance_scale = config.value<double>("backend.guidance_scale");
    o.text_scale = config.value<double>("scales.text");
    o.sampler = SamplerOptions::from_config(config);
    return o;
}

InjectionConfig BlockSensitivityReport::routing(const InjectionConfig& base) const {
    InjectionConfig cfg = base;
    cfg.n_blocks = static_cast<int>(blocks.size());
    cfg.style_blocks = {style_block};
    cfg.content_blocks = std::set<int>(content_blocks.begin(), content_blocks.end());
    return cfg;
}

std::string BlockSensitivityReport::to_tsv() const {
    std::ostringstream out;
    out.precision(10);
    out << "block\tcontent_score\tstyle_score\n";
    for (const auto& b : blocks) {
        out << b.block << '\t' << b.content_score << '\t';
        if (b.style_score) {
            out << *b.style_score;
        } else {
            out << "undefined";
        }
        out << '\n';
    }
    return out.str();
}

json BlockSensitivityReport::to_json() const {
    json j;
    j["blocks"] = json::array();
    for (const auto& b : blocks) {
        j["blocks"].push_back({{"block", b.block},
                               {"content_score", b.content_score},
                               {"style_score", b.style_score ? json(*b.style_score) : json(nullptr)}});
    }
    j["style_block"] = style_block;
    j["content_blocks"] = content_blocks;
    j["content_words"] = content_words;
    return j;
}

RgbImage BlockSensitivityReport::render_chart() const {
    constexpr int kBar = 8, kGap = 2, kGroup = 2 * kBar + kGap + 8, kPlot = 160, kMargin = 8, kMark = 6;
    const int n = static_cast<int>(blocks.size());
    const int w = 2 * kMargin + n * kGroup;
    const int h = 2 * kMargin + kPlot + kMark + 4;
    RgbImage img(h, w, 1.0);

    auto max_of = [&](auto get) {
        double m = 0.0;
        for (const auto& b : blocks) m = std::max(m, get(b));
        return m;
    };
    const double cmax = max_of([](const BlockScore& b) { return std::max(0.0, b.content_score); });
    const double smax = max_of([](const BlockScore& b) { return std::max(0.0, b.style_score.value_or(0.0)); });
    auto fill = [&](int x0, int y0, int x1, int y1, std::array<double, 3> c) {
        for (int y = std::max(0, y0); y < std::min(h, y1); ++y) {
            for (int x = std::max(0, x0); x < std::min(w, x1); ++x) {
                for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
            }
        }
    };
    const int base = kMargin + kPlot;
    fill(kMargin, base, w - kMargin, base + 1, {0.0, 0.0, 0.0});
    for (int i = 0; i < n; ++i) {
        const auto& b = blocks[i];
        const int x = kMargin + i * kGroup + 4;
        const int hc = cmax > 0 ? static_cast<int>(std::lround(kPlot * std::max(0.0, b.content_score) / cmax)) : 0;
        const int hs = smax > 0 ? static_cast<int>(std::lround(kPlot * std::max(0.0, b.style_score.value_or(0.0)) / smax))
                                : 0;
        fill(x, base - hc, x + kBar, base, {0.2, 0.4, 0.8});
        fill(x + kBar + kGap, base - hs, x + 2 * kBar + kGap, base, {0.95, 0.55, 0.1});
        const bool content_sel = std::find(content_blocks.begin(), content_blocks.end(), b.block) != content_blocks.end();
        if (b.block == style_block) fill(x, base + 3, x + 2 * kBar + kGap, base + 3 + kMark, {0.95, 0.55, 0.1});
        if (content_sel) fill(x, base + 3, x + 2 * kBar + kGap, base + 3 + kMark, {0.2, 0.4, 0.8});
    }
    return img;
}

BlockSensitivityReport analyze_block_sensitivity(std::span<const RgbImage> probes,
                                                 std::span<const std::string> content_words, const Backend& backend,
                                                 const BlockAnalysisOptions& options) {
    if (probes.empty()) throw InputError("block analysis needs at least one probe image");
    if (content_words.empty()) throw InputError("block analysis needs at least one content word");
    const int n_blocks = backend.info().n_blocks;
    if (options.top_content < 0 || options.top_content >= n_blocks) {
        throw InputError("analysis.top_content must be in [0, n_blocks)");
    }
    MetricOptions metric;
    metric.sigma_frac = options.sampler.sigma_frac;
    metric.lightness = options.sampler.lightness;

    BlockSensitivityReport report;
    report.content_words.assign(content_words.begin(), content_words.end());
    for (int b = 0; b < n_blocks; ++b) {
        double content_sum = 0.0, style_sum = 0.0;
        int style_n = 0;
        for (const auto& probe : probes) {
            JobInputs in;
            in.image_prompt = probe;
            if (!options.base_prompt.empty()) in.text_prompt = options.base_prompt;
            in.injection.n_blocks = n_blocks;
            in.injection.style_blocks = {};
            in.injection.content_blocks = {b};
            in.injection.style_scale = 0.0;
            in.injection.content_scale = 1.0;
            in.injection.text_scale = options.text_scale;
            in.seed = options.seed;
            in.steps = options.steps;
            in.guidance_scale = options.guidance_scale;
            in.height = probe.height();
            in.width = probe.width();
            const RgbImage out = run_edit(in, backend, options.sampler, options.hook).image;
            content_sum += content_score(out, content_words, backend.joint_encoder());
            const GrayMask full(out.height(), out.width(), true);
            if (const auto s = style_score(out, probe, full, backend.image_encoder(), metric)) {
                style_sum += *s;
                ++style_n;
            }
        }
        BlockScore score{b, content_sum / static_cast<double>(probes.size()), std::nullopt};
        if (style_n > 0) score.style_score = style_sum / style_n;
        report.blocks.push_back(score);
    }

    // Undefined style never wins; ties go to the lower index.
    auto style_of = [](const BlockScore& s) { return s.style_score.value_or(-std::numeric_limits<double>::infinity()); };
    report.style_block = std::max_element(report.blocks.begin(), report.blocks.end(),
                                          [&](const BlockScore& a, const BlockScore& c) { return style_of(a) < style_of(c); })
                             ->block;
    std::vector<int> order(static_cast<std::size_t>(n_blocks));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int c) {
        return report.blocks[a].content_score > report.blocks[c].content_score;
    });
    for (int b : order) {
        if (b == report.style_block) continue;
        if (static_cast<int>(report.content_blocks.size()) == options.top_content) break;
        report.content_blocks.push_back(b);
    }
    return report;
}

}  // namespace vton
