#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cads/csv.hpp"
#include "cads/grid.hpp"
#include "cads/metrics.hpp"

namespace cads::qc {

// Occupancy-frequency shape prior on a fixed canonical frame, accumulated
// from centroid-aligned training masks. Baseline substitute for an external
// shape-reconstruction model: the ranking contract downstream is identical.
struct MeanShapePrior {
    int structure_id = 0;
    std::array<int, 3> canonical_dims{64, 64, 64};
    std::array<double, 3> spacing{1.5, 1.5, 1.5};
    std::vector<float> occupancy;  // per-voxel frequency in [0,1]
    int sample_count = 0;
};

namespace detail {

// continuous centroid of foreground voxels, in voxel coordinates
inline bool centroid(const MaskGrid& m, std::array<double, 3>& out) {
    double sx = 0, sy = 0, sz = 0;
    std::size_t n = 0;
    const auto& d = m.dims();
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i)
                if (m.at(i, j, k)) {
                    sx += i;
                    sy += j;
                    sz += k;
                    ++n;
                }
    if (n == 0) return false;
    out = {sx / n, sy / n, sz / n};
    return true;
}

}  // namespace detail

inline MeanShapePrior fit_mean_shape_prior(const std::vector<MaskGrid>& masks, int structure_id,
                                           std::array<int, 3> canonical_dims = {64, 64, 64},
                                           std::array<double, 3> spacing = {1.5, 1.5, 1.5}) {
    if (masks.empty()) throw EmptyTrainingSet("fit_mean_shape_prior: no training masks");

    MeanShapePrior prior;
    prior.structure_id = structure_id;
    prior.canonical_dims = canonical_dims;
    prior.spacing = spacing;
    prior.occupancy.assign(
        static_cast<std::size_t>(canonical_dims[0]) * canonical_dims[1] * canonical_dims[2], 0.f);

    const std::array<double, 3> center{(canonical_dims[0] - 1) / 2.0, (canonical_dims[1] - 1) / 2.0,
                                       (canonical_dims[2] - 1) / 2.0};
    int used = 0;
    for (const auto& m : masks) {
        std::array<double, 3> c{};
        if (!detail::centroid(m, c)) throw EmptyTrainingSet("fit_mean_shape_prior: empty mask");
        std::array<int, 3> shift;
        for (int a = 0; a < 3; ++a) shift[a] = static_cast<int>(std::lround(center[a] - c[a]));
        const auto& d = m.dims();
        for (int k = 0; k < d[2]; ++k)
            for (int j = 0; j < d[1]; ++j)
                for (int i = 0; i < d[0]; ++i) {
                    if (!m.at(i, j, k)) continue;
                    const int x = i + shift[0], y = j + shift[1], z = k + shift[2];
                    if (x < 0 || x >= canonical_dims[0] || y < 0 || y >= canonical_dims[1] ||
                        z < 0 || z >= canonical_dims[2])
                        continue;
                    prior.occupancy[static_cast<std::size_t>(x) +
                                    static_cast<std::size_t>(canonical_dims[0]) *
                                        (y + static_cast<std::size_t>(canonical_dims[1]) * z)] += 1.f;
                }
        ++used;
    }
    prior.sample_count = used;
    for (auto& v : prior.occupancy) v /= static_cast<float>(used);
    return prior;
}

// Thresholds the prior occupancy at 0.5 and translates the resulting shape so
// its centroid matches the pseudo-label's centroid (nearest-voxel shift).
// Empty pseudo-label -> empty reconstruction.
inline MaskGrid reconstruct(const MeanShapePrior& prior, const MaskGrid& pseudo) {
    if (prior.sample_count < 1) throw EmptyTrainingSet("reconstruct: prior not fitted");

    MaskGrid out = MaskGrid::filled(pseudo.dims(), pseudo.spacing(), pseudo.orientation(),
                                    pseudo.origin(), 0);
    std::array<double, 3> c_pseudo{};
    if (!detail::centroid(pseudo, c_pseudo)) return out;

    const auto& cd = prior.canonical_dims;
    MaskGrid shape(cd, prior.spacing, {}, {0, 0, 0},
                   [&] {
                       std::vector<uint8_t> v(prior.occupancy.size());
                       for (std::size_t i = 0; i < v.size(); ++i)
                           v[i] = prior.occupancy[i] >= 0.5f ? 1 : 0;
                       return v;
                   }());
    std::array<double, 3> c_shape{};
    if (!detail::centroid(shape, c_shape)) return out;  // degenerate prior below threshold

    std::array<int, 3> shift;
    for (int a = 0; a < 3; ++a)
        shift[a] = static_cast<int>(std::lround(c_pseudo[a] - c_shape[a]));

    std::vector<uint8_t> v(out.voxel_count(), 0);
    for (int k = 0; k < cd[2]; ++k)
        for (int j = 0; j < cd[1]; ++j)
            for (int i = 0; i < cd[0]; ++i) {
                if (!shape.at(i, j, k)) continue;
                const int x = i + shift[0], y = j + shift[1], z = k + shift[2];
                if (!out.in_bounds(x, y, z)) continue;
                v[out.index(x, y, z)] = 1;
            }
    return out.with_values(std::move(v));
}

// Symmetric 90th-percentile Hausdorff distance between a pseudo-label and its
// reconstruction. An empty side yields the +inf sentinel (worst possible).
inline double qc_score(const MaskGrid& pseudo, const MaskGrid& reconstruction) {
    require_same_geometry(pseudo, reconstruction, "qc_score");
    if (foreground_count(pseudo) == 0 || foreground_count(reconstruction) == 0)
        return std::numeric_limits<double>::infinity();
    return hd_percentile(surface_points(pseudo), surface_points(reconstruction), 0.90);
}

struct ScoreEntry {
    std::string case_id;
    int structure_id = 0;
    double score = 0.0;  // mm; +inf = unreconstructable
};

struct QCEntry {
    std::string case_id;
    int structure_id = 0;  // 0 in image-level mode (per-case aggregate)
    double score = 0.0;
    int rank = 0;  // 1 = largest distance within its grouping unit
    bool excluded = false;
};

enum class ExclusionMode { image_level, per_structure };

struct QCReport {
    std::vector<QCEntry> entries;
    double exclusion_fraction = 0.10;
    ExclusionMode mode = ExclusionMode::image_level;
};

namespace detail {

inline void rank_unit(std::vector<QCEntry>& unit, double fraction) {
    // worst first; ties broken by case_id so the lexicographically last
    // case ids are excluded first
    std::sort(unit.begin(), unit.end(), [](const QCEntry& a, const QCEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.case_id > b.case_id;
    });
    const std::size_t n = unit.size();
    const std::size_t cut = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    for (std::size_t i = 0; i < n; ++i) {
        unit[i].rank = static_cast<int>(i + 1);
        unit[i].excluded = i < cut;
    }
}

}  // namespace detail

// Marks the ceil(fraction*n) highest-distance entries excluded, either per
// case (structure scores averaged first; the default) or per structure.
inline QCReport rank_and_exclude(const std::vector<ScoreEntry>& scores, double fraction = 0.10,
                                 ExclusionMode mode = ExclusionMode::image_level) {
    if (scores.empty()) throw Error("rank_and_exclude: no scores");
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error("rank_and_exclude: fraction must be in (0,1)");

    QCReport report;
    report.exclusion_fraction = fraction;
    report.mode = mode;

    if (mode == ExclusionMode::image_level) {
        std::map<std::string, std::pair<double, int>> per_case;  // sum, count
        for (const auto& s : scores) {
            auto& acc = per_case[s.case_id];
            acc.first += s.score;
            acc.second += 1;
        }
        std::vector<QCEntry> unit;
        for (const auto& [case_id, acc] : per_case)
            unit.push_back({case_id, 0, acc.first / acc.second, 0, false});
        detail::rank_unit(unit, fraction);
        report.entries = std::move(unit);
    } else {
        std::map<int, std::vector<QCEntry>> by_structure;
        for (const auto& s : scores)
            by_structure[s.structure_id].push_back({s.case_id, s.structure_id, s.score, 0, false});
        for (auto& [sid, unit] : by_structure) {
            detail::rank_unit(unit, fraction);
            report.entries.insert(report.entries.end(), unit.begin(), unit.end());
        }
    }
    return report;
}

inline void write_report_csv(const QCReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw IoError("cannot write QC report: " + path);
    out << "case_id,structure_id,score_mm,excluded\n";
    char buf[64];
    for (const auto& e : report.entries) {
        if (std::isinf(e.score)) {
            out << e.case_id << ',' << e.structure_id << ",inf," << (e.excluded ? 1 : 0) << '\n';
        } else {
            std::snprintf(buf, sizeof buf, "%.9g", e.score);
            out << e.case_id << ',' << e.structure_id << ',' << buf << ','
                << (e.excluded ? 1 : 0) << '\n';
        }
    }
}

inline std::vector<QCEntry> read_report_csv(const std::string& path) {
    const auto t = csv::read_file(path);
    const int c_case = t.column("case_id");
    const int c_sid = t.column("structure_id");
    const int c_score = t.column("score_mm");
    const int c_excl = t.column("excluded");
    std::vector<QCEntry> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        QCEntry e;
        e.case_id = row[c_case];
        e.structure_id = static_cast<int>(csv::parse_long(row[c_sid], ctx));
        e.score = csv::parse_double(row[c_score], ctx);
        e.excluded = csv::parse_long(row[c_excl], ctx) != 0;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace cads::qc
