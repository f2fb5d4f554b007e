#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "cads/distance.hpp"
#include "cads/grid.hpp"
#include "cads/morphology.hpp"

namespace cads::postfix {

struct HeadGateParams {
    long brain_min_voxels = 2000;
    std::array<int, 3> brain_box{100, 100, 133};  // +/- voxels on the 1.5mm grid
    std::array<int, 3> hn_box{100, 100, 200};
};

enum class HeadBox { brain, head_neck };

// True (proceed with head-structure pseudo-labels) iff the predicted brain
// has at least the threshold voxel count; the threshold is inclusive.
inline bool head_gate(const MaskGrid& brain_mask, long min_voxels = 2000) {
    return static_cast<long>(foreground_count(brain_mask)) >= min_voxels;
}

// Zeroes labels outside a bounding box centered on the voxel-rounded brain
// centroid. The box is clamped to the grid.
inline LabelGrid head_crop(const LabelGrid& labels, const MaskGrid& brain_mask,
                           const std::array<int, 3>& box) {
    require_same_geometry(labels, brain_mask, "head_crop");

    double sx = 0, sy = 0, sz = 0;
    std::size_t n = 0;
    const auto& d = labels.dims();
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i)
                if (brain_mask.at(i, j, k)) {
                    sx += i;
                    sy += j;
                    sz += k;
                    ++n;
                }
    if (n == 0) throw EmptyCentroid("head_crop: empty brain mask");
    const std::array<int, 3> c{static_cast<int>(std::lround(sx / n)),
                               static_cast<int>(std::lround(sy / n)),
                               static_cast<int>(std::lround(sz / n))};

    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max(0, c[a] - box[a]);
        hi[a] = std::min(d[a] - 1, c[a] + box[a]);
    }

    std::vector<uint16_t> out(labels.values());
    std::size_t i = 0;
    for (int z = 0; z < d[2]; ++z)
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[0]; ++x, ++i)
                if (x < lo[0] || x > hi[0] || y < lo[1] || y > hi[1] || z < lo[2] || z > hi[2])
                    out[i] = 0;
    return labels.with_values(std::move(out));
}

inline LabelGrid head_crop(const LabelGrid& labels, const MaskGrid& brain_mask, HeadBox which,
                           const HeadGateParams& params = {}) {
    return head_crop(labels, brain_mask,
                     which == HeadBox::brain ? params.brain_box : params.hn_box);
}

// Unifies fragmented rib predictions: binarize, 26-connected components,
// relabel each component to its modal original label (ties -> smaller id).
// Voxel support is unchanged.
inline LabelGrid rib_relabel(const LabelGrid& ribs) {
    const auto& v = ribs.values();
    std::vector<uint8_t> fg(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) fg[i] = v[i] ? 1 : 0;
    const auto cc = morph::connected_components(fg, ribs.dims(), 26);

    // per component: label histogram
    std::vector<std::map<uint16_t, std::size_t>> hist(cc.count + 1);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (cc.labels[i]) ++hist[cc.labels[i]][v[i]];

    std::vector<uint16_t> winner(cc.count + 1, 0);
    for (int comp = 1; comp <= cc.count; ++comp) {
        std::size_t best = 0;
        for (const auto& [label, count] : hist[comp])
            if (count > best || (count == best && label < winner[comp])) {
                best = count;
                winner[comp] = label;
            }
    }

    std::vector<uint16_t> out(v.size(), 0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (cc.labels[i]) out[i] = winner[cc.labels[i]];
    return ribs.with_values(std::move(out));
}

struct RibJointParams {
    int spine_dilation_radius = 3;  // voxels (4.5mm at the 1.5mm grid)
    int opening_radius = 1;
    long min_size = 100;   // voxels, inclusive
    long max_size = 1500;  // voxels, inclusive
    double assignment_radius = 15.0;  // mm
};

// Retrieves costovertebral joints from an external tubular-structure mask:
// candidates intersect the dilated spine but not the spine itself, survive a
// morphological opening and the [min,max] size filter, and are assigned the
// label of the nearest rib voxel within the assignment radius.
inline LabelGrid rib_joint_retrieve(const LabelGrid& ribs, const MaskGrid& spine_mask,
                                    const MaskGrid& tubular_mask,
                                    const RibJointParams& params = {}) {
    require_same_geometry(ribs, spine_mask, "rib_joint_retrieve");
    require_same_geometry(spine_mask, tubular_mask, "rib_joint_retrieve");

    const auto& dims = ribs.dims();
    const auto& sp = ribs.spacing();
    const std::size_t n = ribs.voxel_count();

    const auto dilated = morph::dilate_euclidean(
        std::vector<uint8_t>(spine_mask.values()), dims,
        static_cast<double>(params.spine_dilation_radius));

    std::vector<uint8_t> candidate(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        candidate[i] = (tubular_mask.values()[i] && dilated[i] && !spine_mask.values()[i]) ? 1 : 0;

    const auto opened = morph::open_cross(candidate, dims, params.opening_radius);
    const auto cc = morph::connected_components(opened, dims, 26);
    if (cc.count == 0) return ribs;

    std::vector<long> sizes(cc.count + 1, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (cc.labels[i]) ++sizes[cc.labels[i]];

    // rib voxel centers in mm for nearest-label lookup
    std::vector<KdTree3::Point> rib_points;
    std::vector<uint16_t> rib_labels;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const uint16_t lab = ribs.at(i, j, k);
                if (!lab) continue;
                rib_points.push_back({(i + 0.5) * sp[0], (j + 0.5) * sp[1], (k + 0.5) * sp[2]});
                rib_labels.push_back(lab);
            }
    std::vector<uint16_t> out(ribs.values());
    if (rib_points.empty()) return ribs;
    KdTree3 tree(std::move(rib_points));

    // nearest rib voxel per component (closest approach over the component)
    std::vector<double> comp_best(cc.count + 1, std::numeric_limits<double>::infinity());
    std::vector<uint16_t> comp_label(cc.count + 1, 0);
    std::size_t flat = 0;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i, ++flat) {
                const int comp = cc.labels[flat];
                if (!comp) continue;
                if (sizes[comp] < params.min_size || sizes[comp] > params.max_size) continue;
                int idx = -1;
                const double d2 = tree.nearest_sq(
                    {(i + 0.5) * sp[0], (j + 0.5) * sp[1], (k + 0.5) * sp[2]}, &idx);
                if (d2 < comp_best[comp]) {
                    comp_best[comp] = d2;
                    comp_label[comp] = rib_labels[idx];
                }
            }

    const double r2 = params.assignment_radius * params.assignment_radius + 1e-9;
    for (std::size_t i = 0; i < n; ++i) {
        const int comp = cc.labels[i];
        if (!comp || comp_label[comp] == 0) continue;
        if (sizes[comp] < params.min_size || sizes[comp] > params.max_size) continue;
        if (comp_best[comp] > r2) continue;  // too far from any rib: dropped
        if (out[i] == 0) out[i] = comp_label[comp];
    }
    return ribs.with_values(std::move(out));
}

namespace detail {

// signed distance at voxel centers: negative inside, positive outside
inline std::vector<double> slice_sdf(const std::vector<uint8_t>& fg, int nx, int ny) {
    std::vector<uint8_t> bg(fg.size());
    bool any = false;
    for (std::size_t i = 0; i < fg.size(); ++i) {
        bg[i] = fg[i] ? 0 : 1;
        any = any || fg[i];
    }
    std::vector<double> sdf(fg.size());
    if (!any) {
        std::fill(sdf.begin(), sdf.end(), kInf);
        return sdf;
    }
    const auto d_out = squared_edt_2d(fg, nx, ny);
    const auto d_in = squared_edt_2d(bg, nx, ny);
    for (std::size_t i = 0; i < fg.size(); ++i)
        sdf[i] = fg[i] ? -std::sqrt(d_in[i]) : std::sqrt(d_out[i]);
    return sdf;
}

}  // namespace detail

// Fills unannotated slices by linearly blending per-label 2D signed distance
// fields of the bounding annotated slices; a voxel is foreground where the
// blended distance is <= 0. An empty slice enters the blend as a uniform
// positive level just above the partner's deepest interior point, so a
// disappearing label shrinks to nothing by mid-gap. Slices outside the
// annotated range copy the nearest annotated slice.
inline LabelGrid interpolate_sparse_slices(const LabelGrid& sparse, int axis,
                                           const std::vector<int>& annotated_slices) {
    if (annotated_slices.size() < 2)
        throw InsufficientSlices("interpolate_sparse_slices: need at least 2 annotated slices");
    if (axis < 0 || axis > 2) throw Error("axis must be 0, 1, or 2");
    for (std::size_t i = 1; i < annotated_slices.size(); ++i)
        if (annotated_slices[i] <= annotated_slices[i - 1])
            throw Error("annotated slices must be strictly increasing");
    const auto& dims = sparse.dims();
    if (annotated_slices.front() < 0 || annotated_slices.back() >= dims[axis])
        throw Error("annotated slice outside grid");

    const int ua = (axis == 0) ? 1 : 0;
    const int va = (axis == 2) ? 1 : 2;
    const int nx = dims[ua], ny = dims[va];
    const std::size_t slice_n = static_cast<std::size_t>(nx) * ny;

    auto read_slice = [&](int s, uint16_t label, std::vector<uint8_t>& out) {
        out.assign(slice_n, 0);
        std::array<int, 3> idx{};
        idx[axis] = s;
        for (int b = 0; b < ny; ++b)
            for (int a = 0; a < nx; ++a) {
                idx[ua] = a;
                idx[va] = b;
                if (sparse.at(idx[0], idx[1], idx[2]) == label)
                    out[static_cast<std::size_t>(b) * nx + a] = 1;
            }
    };

    std::vector<uint16_t> labels;
    {
        std::vector<bool> seen(65536, false);
        for (uint16_t v : sparse.values())
            if (v && !seen[v]) {
                seen[v] = true;
                labels.push_back(v);
            }
        std::sort(labels.begin(), labels.end());
    }

    std::vector<uint16_t> out(sparse.voxel_count(), 0);
    auto write_voxel = [&](int s, int a, int b, uint16_t label) {
        std::array<int, 3> idx{};
        idx[axis] = s;
        idx[ua] = a;
        idx[va] = b;
        out[sparse.index(idx[0], idx[1], idx[2])] = label;
    };

    // annotated slices are reproduced bit-exactly
    for (int s : annotated_slices) {
        std::array<int, 3> idx{};
        idx[axis] = s;
        for (int b = 0; b < ny; ++b)
            for (int a = 0; a < nx; ++a) {
                idx[ua] = a;
                idx[va] = b;
                out[sparse.index(idx[0], idx[1], idx[2])] = sparse.at(idx[0], idx[1], idx[2]);
            }
    }

    // slices outside the annotated range copy the nearest annotated slice
    auto copy_slice = [&](int dst, int src) {
        std::array<int, 3> si{}, di{};
        si[axis] = src;
        di[axis] = dst;
        for (int b = 0; b < ny; ++b)
            for (int a = 0; a < nx; ++a) {
                si[ua] = a; si[va] = b;
                di[ua] = a; di[va] = b;
                out[sparse.index(di[0], di[1], di[2])] = sparse.at(si[0], si[1], si[2]);
            }
    };
    for (int s = 0; s < annotated_slices.front(); ++s) copy_slice(s, annotated_slices.front());
    for (int s = annotated_slices.back() + 1; s < dims[axis]; ++s)
        copy_slice(s, annotated_slices.back());

    // per label, per gap: blended signed distance decides membership; when
    // blends of different labels collide, the most interior one wins
    const std::size_t gap_count = annotated_slices.size() - 1;
    std::vector<double> best_sdf(sparse.voxel_count(), 0.0);
    std::vector<uint8_t> assigned(sparse.voxel_count(), 0);

    std::vector<uint8_t> mask_a, mask_b;
    for (uint16_t label : labels) {
        for (std::size_t g = 0; g < gap_count; ++g) {
            const int sa = annotated_slices[g];
            const int sb = annotated_slices[g + 1];
            if (sb - sa < 2) continue;
            read_slice(sa, label, mask_a);
            read_slice(sb, label, mask_b);
            auto sdf_a = detail::slice_sdf(mask_a, nx, ny);
            auto sdf_b = detail::slice_sdf(mask_b, nx, ny);

            double depth = 0.0;  // deepest interior point across the pair
            for (double v : sdf_a)
                if (std::isfinite(v)) depth = std::max(depth, -v);
            for (double v : sdf_b)
                if (std::isfinite(v)) depth = std::max(depth, -v);
            if (depth == 0.0) continue;  // label absent on both slices
            const double empty_level = depth + 1.0;
            for (double& v : sdf_a)
                if (!std::isfinite(v)) v = empty_level;
            for (double& v : sdf_b)
                if (!std::isfinite(v)) v = empty_level;

            for (int s = sa + 1; s < sb; ++s) {
                const double t = static_cast<double>(s - sa) / static_cast<double>(sb - sa);
                for (int b = 0; b < ny; ++b)
                    for (int a = 0; a < nx; ++a) {
                        const std::size_t sl = static_cast<std::size_t>(b) * nx + a;
                        const double v = (1.0 - t) * sdf_a[sl] + t * sdf_b[sl];
                        if (v > 0.0) continue;
                        std::array<int, 3> idx{};
                        idx[axis] = s;
                        idx[ua] = a;
                        idx[va] = b;
                        const std::size_t flat = sparse.index(idx[0], idx[1], idx[2]);
                        if (!assigned[flat] || v < best_sdf[flat]) {
                            assigned[flat] = 1;
                            best_sdf[flat] = v;
                            write_voxel(s, a, b, label);
                        }
                    }
            }
        }
    }
    return sparse.with_values(std::move(out));
}

}  // namespace cads::postfix
