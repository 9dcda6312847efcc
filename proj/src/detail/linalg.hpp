#pragma once

#include <array>
#include <cstddef>

namespace vton::detail {

/// (MᵀM)⁻¹Mᵀ for a full-column-rank N×3 matrix.
template <std::size_t N>
std::array<std::array<double, N>, 3> left_inverse(const std::array<std::array<double, 3>, N>& m) {
    double g[3][3] = {};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (std::size_t k = 0; k < N; ++k) g[i][j] += m[k][i] * m[k][j];
        }
    }
    const double det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                       g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                       g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    double inv[3][3];
    inv[0][0] = (g[1][1] * g[2][2] - g[1][2] * g[2][1]) / det;
    inv[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
    inv[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
    inv[1][0] = (g[1][2] * g[2][0] - g[1][0] * g[2][2]) / det;
    inv[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
    inv[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
    inv[2][0] = (g[1][0] * g[2][1] - g[1][1] * g[2][0]) / det;
    inv[2][1] = (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det;
    inv[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;
    std::array<std::array<double, N>, 3> out{};
    for (int i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < N; ++k) {
            for (int j = 0; j < 3; ++j) out[i][k] += inv[i][j] * m[k][j];
        }
    }
    return out;
}

}  // namespace vton::detail
