#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <type_traits>
#include <vector>

#include "cads/grid.hpp"

namespace cads {

enum class Interp { nearest, trilinear };

namespace detail {

// For each RAS output axis: which input axis feeds it and whether the
// index direction must be reversed.
struct RasAxisMap {
    std::array<int, 3> src_axis;
    std::array<bool, 3> flip;
};

inline RasAxisMap ras_axis_map(const Orientation& o) {
    RasAxisMap m{};
    for (int j = 0; j < 3; ++j) {
        const int world = o.world_axis_of(j);
        m.src_axis[world] = j;
        m.flip[world] = o.sign_of(j) < 0;
    }
    return m;
}

}  // namespace detail

// Permutes/flips voxel data so the grid is in RAS orientation. The voxel
// multiset is unchanged; origin is updated so world positions are preserved.
template <typename T>
VoxelGrid<T> reorient_to_ras(const VoxelGrid<T>& g) {
    if (g.orientation().is_ras()) return g;

    const auto m = detail::ras_axis_map(g.orientation());
    std::array<int, 3> dims{}, src_dims = g.dims();
    std::array<double, 3> spacing{}, origin{};
    for (int a = 0; a < 3; ++a) {
        const int j = m.src_axis[a];
        dims[a] = src_dims[j];
        spacing[a] = g.spacing()[j];
        origin[a] = g.origin()[a];
        if (m.flip[a]) origin[a] -= (src_dims[j] - 1) * g.spacing()[j];
    }

    std::vector<T> out(g.voxel_count());
    std::array<int, 3> src{};
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                const std::array<int, 3> dst{i, j, k};
                for (int a = 0; a < 3; ++a) {
                    const int s = m.src_axis[a];
                    src[s] = m.flip[a] ? src_dims[s] - 1 - dst[a] : dst[a];
                }
                out[static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) *
                        (j + static_cast<std::size_t>(dims[1]) * k)] = g.at(src[0], src[1], src[2]);
            }
        }
    }
    return VoxelGrid<T>(dims, spacing, Orientation{}, origin, std::move(out));
}

// Resamples to isotropic spacing. Output voxel centers are mapped into input
// index space under the corner-aligned convention; nearest mode breaks
// equidistant ties toward the lower index. Label-valued grids only accept
// nearest mode.
template <typename T>
VoxelGrid<T> resample_isotropic(const VoxelGrid<T>& g, double target_spacing = 1.5,
                                Interp mode = Interp::nearest) {
    if (!(target_spacing > 0.0)) throw Error("target spacing must be > 0");
    if constexpr (std::is_integral_v<T>) {
        if (mode == Interp::trilinear)
            throw InvalidInterpolation("trilinear interpolation is not valid for label grids");
    }

    const auto& dims = g.dims();
    const auto& sp = g.spacing();
    if (sp[0] == target_spacing && sp[1] == target_spacing && sp[2] == target_spacing) return g;

    std::array<int, 3> odims{};
    for (int a = 0; a < 3; ++a)
        odims[a] = static_cast<int>(std::ceil(dims[a] * sp[a] / target_spacing - 1e-9));

    // continuous input index of an output voxel center, snapped when the
    // mapping is an exact identity up to float noise
    auto src_coord = [&](int o, int a) {
        double u = ((o + 0.5) * target_spacing) / sp[a] - 0.5;
        const double r = std::round(u);
        if (std::abs(u - r) < 1e-9) u = r;
        return u;
    };

    std::vector<T> out(static_cast<std::size_t>(odims[0]) * odims[1] * odims[2]);
    std::size_t w = 0;
    for (int k = 0; k < odims[2]; ++k) {
        const double uz = src_coord(k, 2);
        for (int j = 0; j < odims[1]; ++j) {
            const double uy = src_coord(j, 1);
            for (int i = 0; i < odims[0]; ++i, ++w) {
                const double ux = src_coord(i, 0);
                if (mode == Interp::nearest) {
                    const int si = std::clamp(static_cast<int>(std::ceil(ux - 0.5)), 0, dims[0] - 1);
                    const int sj = std::clamp(static_cast<int>(std::ceil(uy - 0.5)), 0, dims[1] - 1);
                    const int sk = std::clamp(static_cast<int>(std::ceil(uz - 0.5)), 0, dims[2] - 1);
                    out[w] = g.at(si, sj, sk);
                } else {
                    const double cx = std::clamp(ux, 0.0, static_cast<double>(dims[0] - 1));
                    const double cy = std::clamp(uy, 0.0, static_cast<double>(dims[1] - 1));
                    const double cz = std::clamp(uz, 0.0, static_cast<double>(dims[2] - 1));
                    const int x0 = std::min(static_cast<int>(cx), dims[0] - 1);
                    const int y0 = std::min(static_cast<int>(cy), dims[1] - 1);
                    const int z0 = std::min(static_cast<int>(cz), dims[2] - 1);
                    const int x1 = std::min(x0 + 1, dims[0] - 1);
                    const int y1 = std::min(y0 + 1, dims[1] - 1);
                    const int z1 = std::min(z0 + 1, dims[2] - 1);
                    const double fx = cx - x0, fy = cy - y0, fz = cz - z0;
                    double acc = 0.0;
                    acc += (1 - fx) * (1 - fy) * (1 - fz) * g.at(x0, y0, z0);
                    acc += fx * (1 - fy) * (1 - fz) * g.at(x1, y0, z0);
                    acc += (1 - fx) * fy * (1 - fz) * g.at(x0, y1, z0);
                    acc += fx * fy * (1 - fz) * g.at(x1, y1, z0);
                    acc += (1 - fx) * (1 - fy) * fz * g.at(x0, y0, z1);
                    acc += fx * (1 - fy) * fz * g.at(x1, y0, z1);
                    acc += (1 - fx) * fy * fz * g.at(x0, y1, z1);
                    acc += fx * fy * fz * g.at(x1, y1, z1);
                    out[w] = static_cast<T>(acc);
                }
            }
        }
    }
    return VoxelGrid<T>(odims, {target_spacing, target_spacing, target_spacing}, g.orientation(),
                        g.origin(), std::move(out));
}

// Residual affine bookkeeping after standardization. The pipeline reorients
// and resamples first, so only scale survives and shear is zero.
struct AffineSummary {
    std::array<double, 3> scale{1, 1, 1};
    std::array<double, 3> shear{0, 0, 0};
    bool translation_removed = false;
    bool rotation_removed = false;
};

template <typename T>
std::pair<VoxelGrid<T>, AffineSummary> simplify_affine(const VoxelGrid<T>& g) {
    AffineSummary s;
    s.scale = g.spacing();
    s.shear = {0.0, 0.0, 0.0};
    s.translation_removed = true;
    s.rotation_removed = true;
    return {g.with_origin({0.0, 0.0, 0.0}), s};
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// half-sample symmetric reflection: -1 -> 0, n -> n-1
inline int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

inline void convolve_axis(const std::vector<double>& in, std::vector<double>& out,
                          const std::array<int, 3>& dims, int axis, const std::vector<double>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(dims[0]),
                                            static_cast<std::size_t>(dims[0]) * dims[1]};
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const std::array<int, 3> idx{i, j, k};
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    std::array<int, 3> s = idx;
                    s[axis] = reflect(idx[axis] + t, dims[axis]);
                    acc += kernel[t + radius] *
                           in[s[0] * stride[0] + s[1] * stride[1] + s[2] * stride[2]];
                }
                out[idx[0] * stride[0] + idx[1] * stride[1] + idx[2] * stride[2]] = acc;
            }
}

}  // namespace detail

// Replaces voxels inside `region` with Gaussian-smoothed values (separable
// kernel truncated at 3*sigma, reflective borders). Voxels outside the region
// are bit-identical to the input.
inline ScalarGrid blur_region(const ScalarGrid& img, const MaskGrid& region, double sigma = 5.0) {
    require_same_geometry(img, region, "blur_region");
    if (!(sigma > 0.0)) throw Error("blur sigma must be > 0");

    const auto kernel = detail::gaussian_kernel(sigma);
    const std::size_t n = img.voxel_count();
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = img.values()[i];
    detail::convolve_axis(a, b, img.dims(), 0, kernel);
    detail::convolve_axis(b, a, img.dims(), 1, kernel);
    detail::convolve_axis(a, b, img.dims(), 2, kernel);

    std::vector<float> out(img.values());
    for (std::size_t i = 0; i < n; ++i)
        if (region.values()[i]) out[i] = static_cast<float>(b[i]);
    return img.with_values(std::move(out));
}

}  // namespace cads
