#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cads/distance.hpp"

namespace cads::morph {

struct Components {
    std::vector<int> labels;  // 0 = background, components numbered from 1
    int count = 0;
};

// Flood-fill connected components over nonzero voxels, 6 or 26 connectivity.
inline Components connected_components(const std::vector<uint8_t>& fg,
                                       const std::array<int, 3>& dims, int connectivity = 26) {
    if (connectivity != 6 && connectivity != 26)
        throw Error("connectivity must be 6 or 26");

    std::vector<std::array<int, 3>> offsets;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                if (connectivity == 6 && std::abs(dx) + std::abs(dy) + std::abs(dz) != 1) continue;
                offsets.push_back({dx, dy, dz});
            }

    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    Components out;
    out.labels.assign(n, 0);
    auto index = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims[0]) * (y + static_cast<std::size_t>(dims[1]) * z);
    };

    std::vector<std::size_t> stack;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const std::size_t i = index(x, y, z);
                if (!fg[i] || out.labels[i]) continue;
                const int comp = ++out.count;
                out.labels[i] = comp;
                stack.assign(1, i);
                while (!stack.empty()) {
                    const std::size_t cur = stack.back();
                    stack.pop_back();
                    const int cz = static_cast<int>(cur / (static_cast<std::size_t>(dims[0]) * dims[1]));
                    const std::size_t rem = cur % (static_cast<std::size_t>(dims[0]) * dims[1]);
                    const int cy = static_cast<int>(rem / dims[0]);
                    const int cx = static_cast<int>(rem % dims[0]);
                    for (const auto& o : offsets) {
                        const int nx = cx + o[0], ny = cy + o[1], nz = cz + o[2];
                        if (nx < 0 || nx >= dims[0] || ny < 0 || ny >= dims[1] || nz < 0 ||
                            nz >= dims[2])
                            continue;
                        const std::size_t ni = index(nx, ny, nz);
                        if (fg[ni] && !out.labels[ni]) {
                            out.labels[ni] = comp;
                            stack.push_back(ni);
                        }
                    }
                }
            }
    return out;
}

// Euclidean dilation: voxels within `radius` (voxel units) of the foreground.
inline std::vector<uint8_t> dilate_euclidean(const std::vector<uint8_t>& fg,
                                             const std::array<int, 3>& dims, double radius) {
    const auto d2 = squared_edt_3d(fg, dims);
    std::vector<uint8_t> out(fg.size());
    const double r2 = radius * radius + 1e-9;
    for (std::size_t i = 0; i < fg.size(); ++i) out[i] = d2[i] <= r2 ? 1 : 0;
    return out;
}

namespace detail {

// 3D cross structuring element: unit steps along the axes up to `radius`
inline std::vector<std::array<int, 3>> cross_offsets(int radius) {
    std::vector<std::array<int, 3>> out{{0, 0, 0}};
    for (int r = 1; r <= radius; ++r) {
        out.push_back({r, 0, 0});
        out.push_back({-r, 0, 0});
        out.push_back({0, r, 0});
        out.push_back({0, -r, 0});
        out.push_back({0, 0, r});
        out.push_back({0, 0, -r});
    }
    return out;
}

template <bool Erode>
std::vector<uint8_t> cross_pass(const std::vector<uint8_t>& fg, const std::array<int, 3>& dims,
                                int radius) {
    const auto offsets = cross_offsets(radius);
    std::vector<uint8_t> out(fg.size());
    auto sample = [&](int x, int y, int z) -> uint8_t {
        if (x < 0 || x >= dims[0] || y < 0 || y >= dims[1] || z < 0 || z >= dims[2])
            return 0;  // out-of-grid is background
        return fg[static_cast<std::size_t>(x) +
                  static_cast<std::size_t>(dims[0]) * (y + static_cast<std::size_t>(dims[1]) * z)];
    };
    std::size_t i = 0;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x, ++i) {
                bool keep = Erode;
                for (const auto& o : offsets) {
                    const bool v = sample(x + o[0], y + o[1], z + o[2]) != 0;
                    if constexpr (Erode) {
                        if (!v) {
                            keep = false;
                            break;
                        }
                    } else {
                        if (v) {
                            keep = true;
                            break;
                        }
                    }
                }
                out[i] = keep ? 1 : 0;
            }
    return out;
}

}  // namespace detail

inline std::vector<uint8_t> erode_cross(const std::vector<uint8_t>& fg,
                                        const std::array<int, 3>& dims, int radius) {
    if (radius <= 0) return fg;
    return detail::cross_pass<true>(fg, dims, radius);
}

inline std::vector<uint8_t> dilate_cross(const std::vector<uint8_t>& fg,
                                         const std::array<int, 3>& dims, int radius) {
    if (radius <= 0) return fg;
    return detail::cross_pass<false>(fg, dims, radius);
}

inline std::vector<uint8_t> open_cross(const std::vector<uint8_t>& fg,
                                       const std::array<int, 3>& dims, int radius) {
    if (radius <= 0) return fg;
    return dilate_cross(erode_cross(fg, dims, radius), dims, radius);
}

}  // namespace cads::morph
