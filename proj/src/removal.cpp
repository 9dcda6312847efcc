#include "vton/removal.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vton/error.hpp"

namespace vton {

ProjectionMode parse_projection_mode(std::string_view name) {
    if (name == "global") return ProjectionMode::global;
    if (name == "per_channel") return ProjectionMode::per_channel;
    if (name == "per_location") return ProjectionMode::per_location;
    throw InputError("unknown ofr.mode: " + std::string(name));
}

const LatentGrid& WhiteReferenceCache::get(const Backend& backend, int height, int width) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(height, width);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        it = cache_.emplace(key, backend.encode(RgbImage(height, width, 1.0))).first;
    }
    return it->second;
}

RgbImage garment_on_white(const RgbImage& person, const GrayMask& garment_mask) {
    if (person.height() != garment_mask.height() || person.width() != garment_mask.width()) {
        throw InputError("garment mask does not match the person image");
    }
    RgbImage out(person.height(), person.width(), 1.0);
    for (int y = 0; y < person.height(); ++y) {
        for (int x = 0; x < person.width(); ++x) {
            if (!garment_mask.at(y, x)) continue;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = person.at(y, x, c);
        }
    }
    return out;
}

RemovalDirection direction_from_latents(const LatentGrid& item_latent, const LatentGrid& white_latent,
                                        std::string source) {
    if (!item_latent.same_shape(white_latent)) {
        throw InputError("item and white reference latents differ in shape");
    }
    LatentGrid v = item_latent - white_latent;
    const double n = v.norm();
    if (!(n >= 1e-8)) {
        throw DegenerateInputError("item image is indistinguishable from the white reference");
    }
    v *= 1.0 / n;
    return RemovalDirection{std::move(v), std::move(source), n};
}

RemovalDirection compute_direction(const RgbImage& item_on_white, const Backend& backend,
                                   WhiteReferenceCache* cache, std::string source) {
    const LatentGrid item = backend.encode(item_on_white);
    if (cache) {
        return direction_from_latents(item, cache->get(backend, item_on_white.height(), item_on_white.width()),
                                      std::move(source));
    }
    const LatentGrid white = backend.encode(RgbImage(item_on_white.height(), item_on_white.width(), 1.0));
    return direction_from_latents(item, white, std::move(source));
}

namespace {

void check_alpha(double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InputError("removal alpha must be a finite value >= 0");
}

LatentGrid subtract_projection(const LatentGrid& z, const std::vector<const LatentGrid*>& basis, double alpha) {
    std::vector<double> coeffs;
    coeffs.reserve(basis.size());
    for (const auto* e : basis) coeffs.push_back(z.dot(*e));
    LatentGrid out = z;
    auto dst = out.values();
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const double s = alpha * coeffs[j];
        auto src = basis[j]->values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= s * src[i];
    }
    return out;
}

}  // namespace

LatentGrid remove_item(const LatentGrid& z, const RemovalDirection& dir, double alpha, ProjectionMode mode) {
    check_alpha(alpha);
    if (!z.same_shape(dir.u)) throw InputError("latent and removal direction differ in shape");
    if (mode == ProjectionMode::global) return subtract_projection(z, {&dir.u}, alpha);

    LatentGrid out = z;
    const int C = z.channels(), H = z.height(), W = z.width();
    if (mode == ProjectionMode::per_channel) {
        for (int c = 0; c < C; ++c) {
            double uu = 0.0, zu = 0.0;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    uu += dir.u.at(c, y, x) * dir.u.at(c, y, x);
                    zu += z.at(c, y, x) * dir.u.at(c, y, x);
                }
            }
            if (uu == 0.0) continue;
            const double s = alpha * zu / uu;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) out.at(c, y, x) -= s * dir.u.at(c, y, x);
            }
        }
        return out;
    }
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double uu = 0.0, zu = 0.0;
            for (int c = 0; c < C; ++c) {
                uu += dir.u.at(c, y, x) * dir.u.at(c, y, x);
                zu += z.at(c, y, x) * dir.u.at(c, y, x);
            }
            if (uu == 0.0) continue;
            const double s = alpha * zu / uu;
            for (int c = 0; c < C; ++c) out.at(c, y, x) -= s * dir.u.at(c, y, x);
        }
    }
    return out;
}

std::vector<LatentGrid> orthonormal_basis(std::span<const RemovalDirection> dirs, double max_cosine) {
    std::vector<LatentGrid> basis;
    for (const auto& d : dirs) {
        const double n = d.u.norm();
        if (!(n >= 1e-8)) continue;
        if (basis.empty() && std::abs(n - 1.0) < 1e-9) {
            basis.push_back(d.u);
            continue;
        }
        LatentGrid w = d.u;
        for (const auto& e : basis) {
            const double c = w.dot(e);
            auto dst = w.values();
            auto src = e.values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= c * src[i];
        }
        const double residual = w.norm() / n;
        // cosine with the span is sqrt(1 - residual^2)
        if (std::sqrt(std::max(0.0, 1.0 - residual * residual)) > max_cosine) continue;
        w *= 1.0 / w.norm();
        basis.push_back(std::move(w));
    }
    return basis;
}

LatentGrid remove_items(const LatentGrid& z, std::span<const RemovalDirection> dirs, double alpha) {
    check_alpha(alpha);
    if (dirs.empty()) throw InputError("remove_items needs at least one direction");
    for (const auto& d : dirs) {
        if (!z.same_shape(d.u)) throw InputError("latent and removal direction differ in shape");
    }
    const auto basis = orthonormal_basis(dirs);
    if (basis.empty()) throw DegenerateInputError("all removal directions are degenerate");
    std::vector<const LatentGrid*> ptrs;
    for (const auto& e : basis) ptrs.push_back(&e);
    return subtract_projection(z, ptrs, alpha);
}

// --- sidecar ---------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic = {'V', 'T', 'D', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw InputError("truncated direction file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
double get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace

void save_direction(const std::filesystem::path& path, const RemovalDirection& dir) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(dir.u.channels()));
    put_u32(out, static_cast<std::uint32_t>(dir.u.height()));
    put_u32(out, static_cast<std::uint32_t>(dir.u.width()));
    put_f32(out, dir.norm_of_v);
    put_u32(out, static_cast<std::uint32_t>(dir.source.size()));
    out.write(dir.source.data(), static_cast<std::streamsize>(dir.source.size()));
    for (double v : dir.u.values()) put_f32(out, v);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

RemovalDirection load_direction(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != kMagic) throw InputError(path.string() + ": not a direction file");
    if (const auto v = get_u32(in); v != kVersion) {
        throw InputError(path.string() + ": unsupported direction version " + std::to_string(v));
    }
    const auto c = get_u32(in), h = get_u32(in), w = get_u32(in);
    if (c == 0 || h == 0 || w == 0 || c > 4096 || h > 65536 || w > 65536) {
        throw InputError(path.string() + ": bad direction shape");
    }
    RemovalDirection dir;
    dir.norm_of_v = get_f32(in);
    const auto len = get_u32(in);
    if (len > (1u << 20)) throw InputError(path.string() + ": bad source length");
    dir.source.resize(len);
    if (len && !in.read(dir.source.data(), len)) throw InputError("truncated direction file");
    dir.u = LatentGrid(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
    for (auto& v : dir.u.values()) v = get_f32(in);
    // f32 storage loses the unit norm; restore it in double precision.
    const double n = dir.u.norm();
    if (!(n >= 1e-8) || !(dir.norm_of_v > 0.0)) throw DegenerateInputError(path.string() + ": degenerate direction");
    dir.u *= 1.0 / n;
    return dir;
}

}  // namespace vton
