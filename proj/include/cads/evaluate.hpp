#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cads/catalog.hpp"
#include "cads/io.hpp"
#include "cads/metrics.hpp"
#include "cads/nifti.hpp"
#include "cads/parallel.hpp"

namespace cads::eval {

struct MetricAggregate {
    std::string structure;
    std::string metric;
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double ci_lo = 0.0;  // 95% bootstrap CI, percentile method
    double ci_hi = 0.0;
};

namespace detail {

inline LabelGrid apply_lesion_merge(const LabelGrid& g, const io::DatasetAdapter& adapter,
                                    const StructureCatalog& catalog) {
    if (adapter.lesion_merge.empty()) return g;
    std::map<uint16_t, uint16_t> remap;
    for (const auto& l : adapter.lesion_merge)
        remap[static_cast<uint16_t>(l.lesion_id)] = static_cast<uint16_t>(catalog.resolve(l.organ));
    std::vector<uint16_t> v(g.values());
    for (auto& x : v) {
        const auto it = remap.find(x);
        if (it != remap.end()) x = it->second;
    }
    return g.with_values(std::move(v));
}

// keep only axial slices carrying at least one annotated GT voxel
inline void restrict_to_annotated_slices(LabelGrid& gt, LabelGrid& pred) {
    const auto& dims = gt.dims();
    std::vector<uint8_t> keep(dims[2], 0);
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1] && !keep[k]; ++j)
            for (int i = 0; i < dims[0]; ++i)
                if (gt.at(i, j, k)) {
                    keep[k] = 1;
                    break;
                }
    }
    auto filter = [&](const LabelGrid& g) {
        std::vector<uint16_t> v(g.values());
        for (int k = 0; k < dims[2]; ++k) {
            if (keep[k]) continue;
            const std::size_t base = static_cast<std::size_t>(dims[0]) * dims[1] * k;
            std::fill(v.begin() + base, v.begin() + base + static_cast<std::size_t>(dims[0]) * dims[1],
                      uint16_t{0});
        }
        return g.with_values(std::move(v));
    };
    gt = filter(gt);
    pred = filter(pred);
}

inline MaskGrid union_mask(const LabelGrid& g, const std::vector<int>& ids) {
    std::set<uint16_t> wanted;
    for (int id : ids) wanted.insert(static_cast<uint16_t>(id));
    std::vector<uint8_t> v(g.voxel_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = wanted.count(g.values()[i]) ? 1 : 0;
    return MaskGrid(g.dims(), g.spacing(), g.orientation(), g.origin(), std::move(v));
}

}  // namespace detail

// Evaluates one (gt, pred) pair under the dataset adapter: lesion labels fold
// into their organs, sparse-slice datasets restrict to annotated slices,
// merge-map targets are scored on union masks, everything else per structure.
inline std::vector<MetricRecord> evaluate_case(const std::string& case_id, const LabelGrid& gt_in,
                                               const LabelGrid& pred_in,
                                               const io::DatasetAdapter& adapter,
                                               const StructureCatalog& catalog,
                                               const PenaltyPolicy& base_policy) {
    require_same_geometry(gt_in, pred_in, "evaluate_case");
    io::validate_adapter(adapter, catalog);

    LabelGrid gt = detail::apply_lesion_merge(gt_in, adapter, catalog);
    LabelGrid pred = detail::apply_lesion_merge(pred_in, adapter, catalog);
    if (adapter.sparse_slices) detail::restrict_to_annotated_slices(gt, pred);

    // labels present in GT after adapter application must be catalog ids
    std::set<uint16_t> gt_labels;
    for (uint16_t v : gt.values())
        if (v) gt_labels.insert(v);
    for (uint16_t v : gt_labels)
        if (!catalog.contains(v))
            throw UnknownStructure("case " + case_id + ": GT label " + std::to_string(v) +
                                   " not in catalog");

    std::vector<MetricRecord> records;
    std::set<int> consumed;

    for (const auto& m : adapter.merge_map) {
        std::vector<int> ids;
        double reference = 0.0;
        for (const auto& s : m.sources) {
            const int id = catalog.resolve(s);
            ids.push_back(id);
            reference += catalog.by_id(id).median_volume;
            consumed.insert(id);
        }
        bool any_present = false;
        for (int id : ids) any_present = any_present || gt_labels.count(static_cast<uint16_t>(id));
        if (!any_present) continue;

        PenaltyPolicy policy = base_policy;
        policy.reference = reference;
        MetricRecord rec =
            evaluate_masks(detail::union_mask(gt, ids), detail::union_mask(pred, ids), policy);
        rec.case_id = case_id;
        const auto target_id = catalog.find_name(m.target);
        rec.structure_id = target_id ? *target_id : 0;
        rec.structure_name = m.target;
        records.push_back(std::move(rec));
    }

    for (uint16_t label : gt_labels) {
        if (consumed.count(label)) continue;
        const auto& def = catalog.by_id(label);
        PenaltyPolicy policy = base_policy;
        policy.reference = def.median_volume;
        records.push_back(evaluate_structure(gt, pred, label, policy, case_id, def.name));
    }
    return records;
}

namespace detail {

inline uint64_t mix_seed(uint64_t seed, const std::string& structure, const std::string& metric) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (char c : structure + "/" + metric) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline double nearest_rank(const std::vector<double>& sorted, double p) {
    std::size_t k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size()) - 1e-9));
    if (k < 1) k = 1;
    if (k > sorted.size()) k = sorted.size();
    return sorted[k - 1];
}

}  // namespace detail

// Mean, median, and seeded 95% bootstrap CI (percentile method) per
// (structure, metric) over all non-excluded records. Values are sorted first
// so the result is invariant to record ordering.
inline std::vector<MetricAggregate> aggregate_records(const std::vector<MetricRecord>& records,
                                                      uint64_t seed, int resamples = 10000) {
    struct Key {
        std::string structure;
        std::string metric;
        bool operator<(const Key& o) const {
            if (structure != o.structure) return structure < o.structure;
            return metric < o.metric;
        }
    };
    std::map<Key, std::vector<double>> values;
    auto collect = [&](const MetricRecord& r, const char* metric, const std::optional<double>& v) {
        if (v) values[{r.structure_name, metric}].push_back(*v);
    };
    for (const auto& r : records) {
        if (r.status == EvalStatus::excluded) continue;
        collect(r, "dice", r.dice);
        collect(r, "nsd", r.nsd);
        collect(r, "hd", r.hd);
        collect(r, "hd95", r.hd95);
        collect(r, "tpr", r.tpr);
        collect(r, "error_volume", r.error_volume);
    }

    std::vector<MetricAggregate> out;
    for (auto& [key, vals] : values) {
        std::sort(vals.begin(), vals.end());
        MetricAggregate a;
        a.structure = key.structure;
        a.metric = key.metric;
        a.n = vals.size();
        double sum = 0.0;
        for (double v : vals) sum += v;
        a.mean = sum / static_cast<double>(vals.size());
        const std::size_t n = vals.size();
        a.median = (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);

        std::mt19937_64 rng(detail::mix_seed(seed, key.structure, key.metric));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<double> means(resamples);
        for (int b = 0; b < resamples; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += vals[pick(rng)];
            means[b] = s / static_cast<double>(n);
        }
        std::sort(means.begin(), means.end());
        a.ci_lo = detail::nearest_rank(means, 0.025);
        a.ci_hi = detail::nearest_rank(means, 0.975);
        out.push_back(std::move(a));
    }
    return out;
}

inline nlohmann::json aggregates_to_json(const std::vector<MetricAggregate>& aggs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : aggs)
        j.push_back({{"structure", a.structure},
                     {"metric", a.metric},
                     {"n", a.n},
                     {"mean", a.mean},
                     {"median", a.median},
                     {"ci95_lo", a.ci_lo},
                     {"ci95_hi", a.ci_hi}});
    return j;
}

struct DatasetEvaluation {
    std::vector<MetricRecord> records;
    std::vector<MetricAggregate> aggregates;
    std::vector<std::string> case_errors;  // "case_id: message" per failed case
    std::size_t cases_skipped = 0;         // adapter exclusion flags
};

// Loads (gt, pred) pairs from the manifest and evaluates them across a
// worker pool. Cases whose flags intersect the adapter's exclusion flags are
// skipped; per-case failures are recorded and do not stop the batch. Records
// come back sorted by (case_id, structure name).
inline DatasetEvaluation evaluate_dataset(const io::Manifest& manifest,
                                          const io::DatasetAdapter& adapter,
                                          const StructureCatalog& catalog,
                                          const PenaltyPolicy& base_policy, uint64_t seed,
                                          int workers = 1) {
    io::validate_adapter(adapter, catalog);

    std::vector<const io::CaseEntry*> cases;
    std::size_t skipped = 0;
    for (const auto& e : manifest.entries) {
        bool excluded = false;
        for (const auto& f : e.flags) excluded = excluded || adapter.exclusion_flags.count(f);
        if (excluded) {
            ++skipped;
            continue;
        }
        cases.push_back(&e);
    }

    std::vector<std::vector<MetricRecord>> per_case(cases.size());
    const auto errors = parallel_for_each(cases.size(), workers, [&](std::size_t i) {
        const auto& e = *cases[i];
        if (!e.gt) throw IoError("case " + e.case_id + ": no gt path in manifest");
        if (!e.pred) throw IoError("case " + e.case_id + ": no pred path in manifest");
        LabelGrid gt = nifti::read_labels(*e.gt);
        LabelGrid pred = nifti::read_labels(*e.pred);
        per_case[i] = evaluate_case(e.case_id, gt, pred, adapter, catalog, base_policy);
    });

    DatasetEvaluation out;
    out.cases_skipped = skipped;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (errors[i]) {
            out.case_errors.push_back(cases[i]->case_id + ": " + *errors[i]);
            continue;
        }
        out.records.insert(out.records.end(), per_case[i].begin(), per_case[i].end());
    }
    std::sort(out.records.begin(), out.records.end(),
              [](const MetricRecord& a, const MetricRecord& b) {
                  if (a.case_id != b.case_id) return a.case_id < b.case_id;
                  return a.structure_name < b.structure_name;
              });
    out.aggregates = aggregate_records(out.records, seed);
    return out;
}

}  // namespace cads::eval
