#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vton/injection.hpp"
#include "vton/sampler.hpp"

namespace vton {

class Backend;
class Config;

struct BlockScore {
    int block = 0;
    double content_score = 0.0;
    /// Undefined when every probe gave a zero style residual.
    std::optional<double> style_score;
};

struct BlockSensitivityReport {
    std::vector<BlockScore> blocks;  ///< one per block, in block order
    int style_block = -1;
    /// Highest content score first, the style block excluded.
    std::vector<int> content_blocks;
    std::vector<std::string> content_words;

    /// Routing with the selected blocks, scales taken from `base`.
    InjectionConfig routing(const InjectionConfig& base) const;

    /// Tab separated: block, content_score, style_score ("undefined" when absent).
    std::string to_tsv() const;
    nlohmann::json to_json() const;
    /// Grouped bars per block: content (blue) and style (orange), each
    /// normalized by its own maximum; selected blocks marked underneath.
    RgbImage render_chart() const;
};

struct BlockAnalysisOptions {
    std::string base_prompt = "a garment";
    std::uint64_t seed = 0;
    int top_content = 3;
    int steps = 50;
    double guidance_scale = 7.5;
    double text_scale = 0.5;
    SamplerOptions sampler;
    /// Forwarded to every generation; may throw CancelledError.
    StepHook hook;

    static BlockAnalysisOptions from_config(const Config& config);
};

/// Injects the raw image features of each probe into one block at a time at
/// scale 1.0, generates with the base text prompt, and scores the result:
/// content as the mean text score against `content_words`, style as the
/// style score against the probe over the whole image. Scores are averaged
/// over probes. Throws InputError without probes or words.
BlockSensitivityReport analyze_block_sensitivity(std::span<const RgbImage> probes,
                                                 std::span<const std::string> content_words, const Backend& backend,
                                                 const BlockAnalysisOptions& options = {});

}  // namespace vton
