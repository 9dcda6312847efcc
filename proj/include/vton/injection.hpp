#pragma once

#include <optional>
#include <set>
#include <vector>

#include "vton/embeddings.hpp"

namespace vton {

/// Routing of image-prompt features to attention blocks, plus the four
/// per-modality scales.
struct InjectionConfig {
    int n_blocks = 11;
    std::set<int> style_blocks{7};
    std::set<int> content_blocks{3, 4, 6};
    double style_scale = 0.5;
    double content_scale = 0.5;
    double sketch_scale = 0.7;
    double text_scale = 0.5;

    /// Throws ValidationError naming each violated field.
    void validate() const;

    friend bool operator==(const InjectionConfig&, const InjectionConfig&) = default;
};

enum class BlockRole { none, style, content };

struct BlockConditioning {
    int block = 0;
    BlockRole role = BlockRole::none;
    double image_scale = 0.0;
    /// Scaled image tokens; empty when the block gets no image conditioning.
    std::optional<PromptEmbedding> image;
    double text_scale = 0.0;

    friend bool operator==(const BlockConditioning&, const BlockConditioning&) = default;
};

struct InjectionMap {
    std::vector<BlockConditioning> blocks;

    std::size_t image_entries() const;
    friend bool operator==(const InjectionMap&, const InjectionMap&) = default;
};

/// Style blocks receive `style_scale * style`, content blocks
/// `content_scale * content`, all other blocks no image conditioning. A zero
/// scale also yields no image conditioning. Every block carries `text_scale`.
InjectionMap build_injection_map(const InjectionConfig& cfg,
                                 const std::optional<PromptEmbedding>& style,
                                 const std::optional<PromptEmbedding>& content);

}  // namespace vton
