#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cads/distance.hpp"
#include "cads/grid.hpp"

namespace cads {

// Physical coordinates (mm) of boundary voxel centers.
struct SurfaceSet {
    std::vector<std::array<double, 3>> points;

    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
};

enum class EvalStatus { evaluated, penalized, excluded };

inline const char* to_string(EvalStatus s) {
    switch (s) {
        case EvalStatus::evaluated: return "evaluated";
        case EvalStatus::penalized: return "penalized";
        default: return "excluded";
    }
}

inline EvalStatus eval_status_from_string(const std::string& s) {
    if (s == "evaluated") return EvalStatus::evaluated;
    if (s == "penalized") return EvalStatus::penalized;
    if (s == "excluded") return EvalStatus::excluded;
    throw ParseError("unknown evaluation status '" + s + "'");
}

// Per (case, structure) evaluation result. Excluded records carry no numbers.
struct MetricRecord {
    std::string case_id;
    int structure_id = 0;
    std::string structure_name;
    std::optional<double> dice;
    std::optional<double> nsd;
    std::optional<double> hd;
    std::optional<double> hd95;
    std::optional<double> tpr;
    std::optional<double> error_volume;
    EvalStatus status = EvalStatus::excluded;
    bool flagged = false;  // pred empty with GT volume between the two policy fractions
};

// False-negative penalization policy. `reference` is the per-structure
// median volume in voxels on the 1.5 mm grid.
struct PenaltyPolicy {
    double missed_fraction = 0.90;
    double exclude_fraction = 0.10;
    double reference = 0.0;

    void validate() const {
        if (!(exclude_fraction > 0.0 && exclude_fraction < missed_fraction && missed_fraction <= 1.0))
            throw Error("penalty policy requires 0 < exclude_fraction < missed_fraction <= 1");
    }
};

inline double dice(const MaskGrid& gt, const MaskGrid& pred) {
    require_same_geometry(gt, pred, "dice");
    std::size_t ng = 0, np = 0, ni = 0;
    const auto& a = gt.values();
    const auto& b = pred.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        ng += (a[i] != 0);
        np += (b[i] != 0);
        ni += (a[i] != 0 && b[i] != 0);
    }
    if (ng + np == 0) return 1.0;  // absent and correctly not predicted
    return 2.0 * static_cast<double>(ni) / static_cast<double>(ng + np);
}

inline double tpr(const MaskGrid& gt, const MaskGrid& pred) {
    require_same_geometry(gt, pred, "tpr");
    std::size_t ng = 0, ni = 0;
    const auto& a = gt.values();
    const auto& b = pred.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        ng += (a[i] != 0);
        ni += (a[i] != 0 && b[i] != 0);
    }
    if (ng == 0) throw UndefinedRatio("tpr: ground-truth mask is empty");
    return static_cast<double>(ni) / static_cast<double>(ng);
}

// Signed percent volume error, 100*(|P|-|GT|)/|GT|.
inline double error_volume(const MaskGrid& gt, const MaskGrid& pred) {
    require_same_geometry(gt, pred, "error_volume");
    const std::size_t ng = foreground_count(gt);
    const std::size_t np = foreground_count(pred);
    if (ng == 0) throw UndefinedRatio("error_volume: ground-truth mask is empty");
    return 100.0 * (static_cast<double>(np) - static_cast<double>(ng)) / static_cast<double>(ng);
}

// A voxel is boundary iff it is foreground and at least one of its 6 face
// neighbours is background (out-of-grid counts as background). Points are
// voxel centers in mm.
inline SurfaceSet surface_points(const MaskGrid& mask) {
    const auto& dims = mask.dims();
    const auto& sp = mask.spacing();
    SurfaceSet s;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                if (!mask.at(i, j, k)) continue;
                const bool boundary =
                    i == 0 || !mask.at(i - 1, j, k) || i == dims[0] - 1 || !mask.at(i + 1, j, k) ||
                    j == 0 || !mask.at(i, j - 1, k) || j == dims[1] - 1 || !mask.at(i, j + 1, k) ||
                    k == 0 || !mask.at(i, j, k - 1) || k == dims[2] - 1 || !mask.at(i, j, k + 1);
                if (boundary)
                    s.points.push_back({(i + 0.5) * sp[0], (j + 0.5) * sp[1], (k + 0.5) * sp[2]});
            }
    return s;
}

// Distances (mm) from every point of `from` to its nearest point of `to`.
inline std::vector<double> directed_distances(const SurfaceSet& from, const SurfaceSet& to) {
    if (from.empty() || to.empty())
        throw UndefinedDistance("surface distance over an empty surface");
    KdTree3 tree(to.points);
    std::vector<double> out;
    out.reserve(from.size());
    for (const auto& p : from.points) out.push_back(std::sqrt(tree.nearest_sq(p)));
    return out;
}

inline double hd(const SurfaceSet& gt, const SurfaceSet& pred) {
    const auto d_gp = directed_distances(gt, pred);
    const auto d_pg = directed_distances(pred, gt);
    const double m1 = *std::max_element(d_gp.begin(), d_gp.end());
    const double m2 = *std::max_element(d_pg.begin(), d_pg.end());
    return std::max(m1, m2);
}

// Symmetric percentile Hausdorff: max of the two directed nearest-rank
// percentiles. hd95 uses p=0.95; the QC score reuses this with p=0.90.
inline double hd_percentile(const SurfaceSet& gt, const SurfaceSet& pred, double p) {
    auto d_gp = directed_distances(gt, pred);
    auto d_pg = directed_distances(pred, gt);
    return std::max(percentile_nearest_rank(d_gp, p), percentile_nearest_rank(d_pg, p));
}

inline double hd95(const SurfaceSet& gt, const SurfaceSet& pred) {
    return hd_percentile(gt, pred, 0.95);
}

inline double nsd(const SurfaceSet& gt, const SurfaceSet& pred, double tau = 3.0) {
    const auto d_gp = directed_distances(gt, pred);
    const auto d_pg = directed_distances(pred, gt);
    std::size_t hits = 0;
    for (double d : d_gp) hits += (d <= tau);
    for (double d : d_pg) hits += (d <= tau);
    return static_cast<double>(hits) / static_cast<double>(d_gp.size() + d_pg.size());
}

// Physical diagonal of the grid bounding box, the HD penalty value.
template <typename T>
double grid_diagonal_mm(const VoxelGrid<T>& g) {
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double e = g.dims()[a] * g.spacing()[a];
        acc += e * e;
    }
    return std::sqrt(acc);
}

// FN-policy core over binary masks; shared by per-structure and merged
// (union-mask) evaluation.
inline MetricRecord evaluate_masks(const MaskGrid& gt_mask, const MaskGrid& pred_mask,
                                   const PenaltyPolicy& policy, double nsd_tau = 3.0) {
    require_same_geometry(gt_mask, pred_mask, "evaluate_masks");
    policy.validate();

    MetricRecord rec;
    const std::size_t gt_count = foreground_count(gt_mask);
    const std::size_t pred_count = foreground_count(pred_mask);

    if (gt_count == 0 || static_cast<double>(gt_count) < policy.exclude_fraction * policy.reference) {
        rec.status = EvalStatus::excluded;
        return rec;
    }

    if (pred_count == 0) {
        rec.status = EvalStatus::penalized;
        // between the exclusion and missed thresholds the paper defines
        // nothing; we penalize and flag
        rec.flagged = !(static_cast<double>(gt_count) > policy.missed_fraction * policy.reference);
        const double diag = grid_diagonal_mm(gt_mask);
        rec.dice = 0.0;
        rec.nsd = 0.0;
        rec.hd = diag;
        rec.hd95 = diag;
        rec.tpr = 0.0;
        rec.error_volume = -100.0;
        return rec;
    }

    rec.status = EvalStatus::evaluated;
    rec.dice = dice(gt_mask, pred_mask);
    rec.tpr = tpr(gt_mask, pred_mask);
    rec.error_volume = error_volume(gt_mask, pred_mask);
    const SurfaceSet sg = surface_points(gt_mask);
    const SurfaceSet sp = surface_points(pred_mask);
    rec.nsd = nsd(sg, sp, nsd_tau);
    rec.hd = hd(sg, sp);
    rec.hd95 = hd95(sg, sp);
    return rec;
}

// Applies the FN policy and computes the full metric set for one structure.
inline MetricRecord evaluate_structure(const LabelGrid& gt, const LabelGrid& pred,
                                       uint16_t structure_id, const PenaltyPolicy& policy,
                                       const std::string& case_id = "",
                                       const std::string& structure_name = "") {
    require_same_geometry(gt, pred, "evaluate_structure");
    if (structure_id == 0) throw UnknownStructure("structure id 0 is background");

    MetricRecord rec = evaluate_masks(label_mask(gt, structure_id),
                                      label_mask(pred, structure_id), policy);
    rec.case_id = case_id;
    rec.structure_id = structure_id;
    rec.structure_name = structure_name;
    return rec;
}

}  // namespace cads
