#include "vton/injection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vton/error.hpp"

namespace vton {

void InjectionConfig::validate() const {
    std::vector<FieldError> errors;
    if (n_blocks < 1) errors.push_back({"injection.n_blocks", "must be at least 1"});
    auto check_indices = [&](const std::set<int>& s, const char* field) {
        for (int b : s) {
            if (b < 0 || b >= n_blocks) {
                errors.push_back({field, "block index " + std::to_string(b) + " outside [0, " +
                                             std::to_string(n_blocks) + ")"});
            }
        }
    };
    check_indices(style_blocks, "injection.style_blocks");
    check_indices(content_blocks, "injection.content_blocks");
    for (int b : style_blocks) {
        if (content_blocks.count(b)) {
            errors.push_back({"injection.content_blocks",
                              "block " + std::to_string(b) + " is also a style block"});
        }
    }
    auto check_scale = [&](double v, const char* field) {
        if (!std::isfinite(v) || v < 0.0) errors.push_back({field, "must be a finite value >= 0"});
    };
    check_scale(style_scale, "scales.style");
    check_scale(content_scale, "scales.content");
    check_scale(sketch_scale, "scales.sketch");
    check_scale(text_scale, "scales.text");
    if (!errors.empty()) throw ValidationError(std::move(errors));
}

std::size_t InjectionMap::image_entries() const {
    return static_cast<std::size_t>(
        std::count_if(blocks.begin(), blocks.end(), [](const auto& b) { return b.image.has_value(); }));
}

InjectionMap build_injection_map(const InjectionConfig& cfg,
                                 const std::optional<PromptEmbedding>& style,
                                 const std::optional<PromptEmbedding>& content) {
    cfg.validate();
    if (style && content && style->dim != content->dim) {
        throw InputError("style and content embeddings have different dimensions");
    }
    InjectionMap map;
    map.blocks.reserve(cfg.n_blocks);
    for (int b = 0; b < cfg.n_blocks; ++b) {
        BlockConditioning entry;
        entry.block = b;
        entry.text_scale = cfg.text_scale;
        if (cfg.style_blocks.count(b)) {
            entry.role = BlockRole::style;
            entry.image_scale = cfg.style_scale;
            if (style && cfg.style_scale != 0.0) entry.image = style->scaled(cfg.style_scale);
        } else if (cfg.content_blocks.count(b)) {
            entry.role = BlockRole::content;
            entry.image_scale = cfg.content_scale;
            if (content && cfg.content_scale != 0.0) entry.image = content->scaled(cfg.content_scale);
        }
        map.blocks.push_back(std::move(entry));
    }
    return map;
}

}  // namespace vton
