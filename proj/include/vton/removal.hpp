#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "vton/backend.hpp"
#include "vton/types.hpp"

namespace vton {

/// Unit latent direction of one fashion item, u = v / ||v|| with
/// v = encode(item on white) - encode(white).
struct RemovalDirection {
    LatentGrid u;
    std::string source;
    double norm_of_v = 0.0;
};

/// Scope of the inner product used for the projection.
enum class ProjectionMode {
    global,        ///< one coefficient over the flattened latent
    per_channel,   ///< one coefficient per latent channel
    per_location,  ///< one coefficient per latent cell, over channels
};

ProjectionMode parse_projection_mode(std::string_view name);

/// Encoded all-white images, one per resolution.
class WhiteReferenceCache {
public:
    const LatentGrid& get(const Backend& backend, int height, int width);

private:
    std::mutex mutex_;
    std::map<std::pair<int, int>, LatentGrid> cache_;
};

/// Person pixels inside `garment_mask`, white elsewhere.
RgbImage garment_on_white(const RgbImage& person, const GrayMask& garment_mask);

/// Throws DegenerateInputError when ||v|| < 1e-8.
RemovalDirection direction_from_latents(const LatentGrid& item_latent, const LatentGrid& white_latent,
                                        std::string source = {});
RemovalDirection compute_direction(const RgbImage& item_on_white, const Backend& backend,
                                   WhiteReferenceCache* cache = nullptr, std::string source = {});

/// z - alpha·(z·u)·u. alpha must be >= 0; values above 1 over-subtract and
/// are reported by `alpha_overshoots`.
LatentGrid remove_item(const LatentGrid& z, const RemovalDirection& dir, double alpha,
                       ProjectionMode mode = ProjectionMode::global);

/// Projection removal onto the span of several directions. Directions are
/// orthonormalized in order (Gram-Schmidt); a direction whose cosine with the
/// span so far exceeds 0.999 is dropped.
LatentGrid remove_items(const LatentGrid& z, std::span<const RemovalDirection> dirs, double alpha);

/// Orthonormal basis `remove_items` projects onto.
std::vector<LatentGrid> orthonormal_basis(std::span<const RemovalDirection> dirs,
                                          double max_cosine = 0.999);

inline bool alpha_overshoots(double alpha) { return alpha > 1.0; }

/// Binary sidecar: "VTDR", u32 version, u32 C/H/W, f32 norm_of_v, u32 source
/// length, source bytes, then C·H·W little-endian f32 values.
void save_direction(const std::filesystem::path& path, const RemovalDirection& dir);
RemovalDirection load_direction(const std::filesystem::path& path);

}  // namespace vton
