// cads: batch front-end for the label-curation and evaluation pipeline.
//
// Subcommands mirror the pipeline stages: standardize, qc, rank, assemble,
// postfix, evaluate, plus a synthetic phantom-corpus generator for demos and
// end-to-end checks. Every command is deterministic given identical inputs
// and seed, isolates per-case failures, and writes a run-metadata JSON next
// to its outputs.
//
// Exit codes: 0 success, 1 at least one case failed, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cads/assembly.hpp"
#include "cads/catalog.hpp"
#include "cads/evaluate.hpp"
#include "cads/io.hpp"
#include "cads/metrics.hpp"
#include "cads/nifti.hpp"
#include "cads/parallel.hpp"
#include "cads/postfix.hpp"
#include "cads/qc.hpp"
#include "cads/rank.hpp"
#include "cads/rank_io.hpp"
#include "cads/standardize.hpp"
#include "cads/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cads;

namespace {

struct CommonOpts {
    std::string manifest_path;
    std::string catalog_path;
    std::string adapter_path;
    std::string out_dir;
    std::string config_path;
    std::string format = "json";
    int workers = 1;
    uint64_t seed = 0;
};

json load_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) return json::object();
    return io::load_json_file(opts.config_path);
}

double cfg_num(const json& cfg, const char* key, double fallback) {
    return cfg.contains(key) ? cfg[key].get<double>() : fallback;
}

PenaltyPolicy policy_from_config(const json& cfg) {
    PenaltyPolicy p;
    p.missed_fraction = cfg_num(cfg, "missed_fraction", 0.90);
    p.exclude_fraction = cfg_num(cfg, "exclude_fraction", 0.10);
    return p;
}

void write_run_metadata(const CommonOpts& opts, const std::string& command, const json& effective,
                        const std::vector<std::string>& case_errors, std::size_t case_count) {
    json meta;
    meta["tool"] = kToolName;
    meta["version"] = kVersion;
    meta["command"] = command;
    meta["seed"] = opts.seed;
    meta["workers"] = opts.workers;
    meta["config"] = effective;
    json hashes = json::object();
    auto hash_if = [&](const char* key, const std::string& path) {
        if (!path.empty() && fs::exists(path)) hashes[key] = io::file_hash(path);
    };
    hash_if("manifest", opts.manifest_path);
    hash_if("catalog", opts.catalog_path);
    hash_if("adapter", opts.adapter_path);
    hash_if("config", opts.config_path);
    meta["input_hashes"] = hashes;
    meta["cases"] = case_count;
    meta["failed_cases"] = case_errors;

    fs::create_directories(opts.out_dir);
    std::ofstream out(fs::path(opts.out_dir) / "run_metadata.json", std::ios::binary);
    out << meta.dump(1) << "\n";
}

int finish(const CommonOpts& opts, const std::string& command, const json& effective,
           const std::vector<std::string>& case_errors, std::size_t case_count) {
    write_run_metadata(opts, command, effective, case_errors, case_count);
    for (const auto& e : case_errors) std::cerr << "[" << command << "] case failed: " << e << "\n";
    return case_errors.empty() ? 0 : 1;
}

std::vector<std::string> collect_errors(const std::vector<std::optional<std::string>>& raw,
                                        const std::vector<std::string>& ids) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw[i]) out.push_back(ids[i] + ": " + *raw[i]);
    return out;
}

// ---------------------------------------------------------------- standardize

int cmd_standardize(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    const double spacing = cfg_num(cfg, "target_spacing", 1.5);
    const double blur_sigma = cfg_num(cfg, "blur_sigma", 5.0);
    const auto manifest = io::load_manifest(opts.manifest_path);
    const auto vol_dir = fs::path(opts.out_dir) / "volumes";
    fs::create_directories(vol_dir);

    std::vector<std::string> ids;
    for (const auto& e : manifest.entries) ids.push_back(e.case_id);

    std::vector<json> rewritten(manifest.entries.size());
    const auto raw = parallel_for_each(manifest.entries.size(), opts.workers, [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        json entry;
        entry["case_id"] = e.case_id;
        entry["split"] = e.split;
        if (e.adapter != "identity") entry["adapter"] = e.adapter;
        if (!e.flags.empty()) entry["flags"] = e.flags;
        if (!e.annotated_slices.empty()) entry["annotated_slices"] = e.annotated_slices;

        if (e.image) {
            ScalarGrid img = nifti::read_scalar(*e.image);
            img = reorient_to_ras(img);
            img = resample_isotropic(img, spacing, Interp::trilinear);
            img = simplify_affine(img).first;
            if (e.blur_region) {
                MaskGrid region = nifti::read_mask(*e.blur_region);
                region = reorient_to_ras(region);
                region = resample_isotropic(region, spacing, Interp::nearest);
                region = simplify_affine(region).first;
                img = blur_region(img, region, blur_sigma);
            }
            const auto path = vol_dir / (e.case_id + "_image.nii.gz");
            nifti::write_nifti(img, path.string());
            entry["image"] = path.string();
        }
        auto standardize_labels = [&](const std::string& path, const std::string& suffix,
                                      const char* key) {
            LabelGrid g = nifti::read_labels(path);
            g = reorient_to_ras(g);
            g = resample_isotropic(g, spacing, Interp::nearest);
            g = simplify_affine(g).first;
            const auto out_path = vol_dir / (e.case_id + suffix);
            nifti::write_nifti(g, out_path.string());
            return out_path.string();
        };
        if (e.gt) entry["gt"] = standardize_labels(*e.gt, "_gt.nii.gz", "gt");
        if (e.pred) entry["pred"] = standardize_labels(*e.pred, "_pred.nii.gz", "pred");
        for (const auto& [flavor, path] : e.predictions)
            entry["predictions"][rank::to_string(flavor)] = standardize_labels(
                path, std::string("_") + rank::to_string(flavor) + ".nii.gz", "prediction");
        if (e.brain_mask)
            entry["brain_mask"] = standardize_labels(*e.brain_mask, "_brain.nii.gz", "brain");
        if (e.spine_mask)
            entry["spine_mask"] = standardize_labels(*e.spine_mask, "_spine.nii.gz", "spine");
        if (e.tubular)
            entry["tubular"] = standardize_labels(*e.tubular, "_tubular.nii.gz", "tubular");
        rewritten[i] = std::move(entry);
    });

    // manifest rewritten against the standardized volumes, failed cases left out
    json out_manifest;
    out_manifest["cases"] = json::array();
    for (std::size_t i = 0; i < rewritten.size(); ++i)
        if (!raw[i]) out_manifest["cases"].push_back(rewritten[i]);
    {
        std::ofstream out(fs::path(opts.out_dir) / "manifest.json", std::ios::binary);
        out << out_manifest.dump(1) << "\n";
    }

    json effective{{"target_spacing", spacing}, {"blur_sigma", blur_sigma}};
    return finish(opts, "standardize", effective, collect_errors(raw, ids),
                  manifest.entries.size());
}

// ------------------------------------------------------------------- evaluate

int cmd_evaluate(const CommonOpts& opts, const std::string& pred_dir) {
    const auto cfg = load_config(opts);
    const auto catalog = StructureCatalog::load_csv(opts.catalog_path);
    auto manifest = io::load_manifest(opts.manifest_path);
    io::DatasetAdapter adapter;
    if (!opts.adapter_path.empty()) adapter = io::load_adapter(opts.adapter_path);
    const PenaltyPolicy policy = policy_from_config(cfg);

    if (!pred_dir.empty())
        for (auto& e : manifest.entries) {
            const auto candidate = fs::path(pred_dir) / (e.case_id + "_labels.nii.gz");
            if (fs::exists(candidate)) e.pred = candidate.string();
        }

    const auto result =
        eval::evaluate_dataset(manifest, adapter, catalog, policy, opts.seed, opts.workers);

    fs::create_directories(opts.out_dir);
    json effective{{"missed_fraction", policy.missed_fraction},
                   {"exclude_fraction", policy.exclude_fraction},
                   {"adapter", adapter.name},
                   {"cases_skipped", result.cases_skipped}};
    if (opts.format == "csv") {
        io::write_report_csv(result.records, (fs::path(opts.out_dir) / "report.csv").string());
        std::ofstream agg(fs::path(opts.out_dir) / "aggregates.csv", std::ios::binary);
        agg << "structure,metric,n,mean,median,ci95_lo,ci95_hi\n";
        char buf[256];
        for (const auto& a : result.aggregates) {
            std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.9g,%.9g,%.9g,%.9g\n", a.structure.c_str(),
                          a.metric.c_str(), a.n, a.mean, a.median, a.ci_lo, a.ci_hi);
            agg << buf;
        }
    } else {
        const auto j = io::report_to_json(result.records, eval::aggregates_to_json(result.aggregates),
                                          effective);
        std::ofstream out(fs::path(opts.out_dir) / "report.json", std::ios::binary);
        out << j.dump(1) << "\n";
    }
    return finish(opts, "evaluate", effective, result.case_errors, manifest.entries.size());
}

// ------------------------------------------------------------------------- qc

int cmd_qc(const CommonOpts& opts, double fraction, const std::string& mode_name,
           const std::string& prior_dir, const std::string& save_prior_dir,
           const std::string& recon_dir) {
    const auto manifest = io::load_manifest(opts.manifest_path);
    const auto catalog = StructureCatalog::load_csv(opts.catalog_path);
    const auto mode = mode_name == "structure" ? qc::ExclusionMode::per_structure
                                               : qc::ExclusionMode::image_level;

    // priors: load from disk or fit the mean-shape baseline from GT cases
    std::map<int, qc::MeanShapePrior> priors;
    if (!prior_dir.empty()) {
        const auto meta = io::load_json_file((fs::path(prior_dir) / "prior_meta.json").string());
        for (const auto& [key, val] : meta.at("priors").items()) {
            const int sid = std::stoi(key);
            const auto occ = nifti::read_scalar(
                (fs::path(prior_dir) / ("prior_" + key + ".nii.gz")).string());
            qc::MeanShapePrior p;
            p.structure_id = sid;
            p.canonical_dims = occ.dims();
            p.spacing = occ.spacing();
            p.occupancy = occ.values();
            p.sample_count = val.get<int>();
            priors[sid] = std::move(p);
        }
    } else if (recon_dir.empty()) {
        std::map<int, std::vector<MaskGrid>> training;
        for (const auto& e : manifest.entries) {
            if (!e.gt) continue;
            const LabelGrid gt = nifti::read_labels(*e.gt);
            std::set<uint16_t> present;
            for (uint16_t v : gt.values())
                if (v) present.insert(v);
            for (uint16_t sid : present) training[sid].push_back(label_mask(gt, sid));
        }
        for (auto& [sid, masks] : training)
            priors[sid] = qc::fit_mean_shape_prior(masks, sid);
    }

    if (!save_prior_dir.empty()) {
        fs::create_directories(save_prior_dir);
        json meta;
        meta["priors"] = json::object();
        for (const auto& [sid, p] : priors) {
            meta["priors"][std::to_string(sid)] = p.sample_count;
            const ScalarGrid occ(p.canonical_dims, p.spacing, {}, {0, 0, 0}, p.occupancy);
            nifti::write_nifti(
                occ, (fs::path(save_prior_dir) / ("prior_" + std::to_string(sid) + ".nii.gz")).string());
        }
        std::ofstream out(fs::path(save_prior_dir) / "prior_meta.json", std::ios::binary);
        out << meta.dump(1) << "\n";
    }

    std::vector<const io::CaseEntry*> cases;
    for (const auto& e : manifest.entries)
        if (e.pred) cases.push_back(&e);

    std::vector<std::string> ids;
    for (const auto* e : cases) ids.push_back(e->case_id);
    std::vector<std::vector<qc::ScoreEntry>> per_case(cases.size());

    const auto raw = parallel_for_each(cases.size(), opts.workers, [&](std::size_t i) {
        const auto& e = *cases[i];
        const LabelGrid pred = nifti::read_labels(*e.pred);
        std::optional<LabelGrid> recon_labels;
        if (!recon_dir.empty()) {
            const auto path = fs::path(recon_dir) / (e.case_id + ".nii.gz");
            if (!fs::exists(path))
                throw IoError("no external reconstruction for case " + e.case_id);
            recon_labels = nifti::read_labels(path.string());
        }
        std::set<uint16_t> present;
        for (uint16_t v : pred.values())
            if (v) present.insert(v);
        for (uint16_t sid : present) {
            const MaskGrid pseudo = label_mask(pred, sid);
            MaskGrid reconstruction = pseudo;
            if (recon_labels) {
                reconstruction = label_mask(*recon_labels, sid);
            } else {
                const auto it = priors.find(sid);
                if (it == priors.end()) continue;  // nothing to compare against
                reconstruction = qc::reconstruct(it->second, pseudo);
            }
            per_case[i].push_back({e.case_id, sid, qc::qc_score(pseudo, reconstruction)});
        }
    });

    std::vector<qc::ScoreEntry> scores;
    for (const auto& v : per_case) scores.insert(scores.end(), v.begin(), v.end());
    fs::create_directories(opts.out_dir);
    if (!scores.empty()) {
        const auto report = qc::rank_and_exclude(scores, fraction, mode);
        qc::write_report_csv(report, (fs::path(opts.out_dir) / "qc_scores.csv").string());
    }

    json effective{{"fraction", fraction},
                   {"mode", mode_name},
                   {"prior", prior_dir.empty() ? (recon_dir.empty() ? "baseline" : "external") : "file"},
                   {"structures_with_priors", priors.size()}};
    return finish(opts, "qc", effective, collect_errors(raw, ids), cases.size());
}

// ----------------------------------------------------------------------- rank

int cmd_rank(const CommonOpts& opts, const std::string& scores_path) {
    const auto sets = rank::load_flavor_scores_csv(scores_path);
    std::vector<rank::RankingOutcome> outcomes;
    std::vector<std::string> errors;
    for (const auto& s : sets) {
        try {
            outcomes.push_back(rank::rank_flavors(s));
        } catch (const std::exception& e) {
            errors.push_back("structure " + std::to_string(s.structure_id) + ": " + e.what());
        }
    }
    fs::create_directories(opts.out_dir);
    {
        std::ofstream out(fs::path(opts.out_dir) / "rankings.json", std::ios::binary);
        out << rank::rankings_to_json(outcomes).dump(1) << "\n";
    }
    json effective{{"scores", scores_path}, {"structures", outcomes.size()}};
    if (fs::exists(scores_path)) effective["scores_hash"] = io::file_hash(scores_path);
    return finish(opts, "rank", effective, errors, sets.size());
}

// ------------------------------------------------------------------- assemble

int cmd_assemble(const CommonOpts& opts, const std::string& rankings_path) {
    const auto manifest = io::load_manifest(opts.manifest_path);
    const auto catalog = StructureCatalog::load_csv(opts.catalog_path);
    const auto rankings_json = io::load_json_file(rankings_path);
    const auto outcomes = rank::rankings_from_json(rankings_json);

    std::map<int, rank::RankingOutcome> rankings;
    std::set<int> in_scope;
    for (const auto& o : outcomes) {
        rankings[o.structure_id] = o;
        in_scope.insert(o.structure_id);
    }

    // gt_fraction: cases with GT for the structure / training cases
    // containing the structure (pseudo-label presence), from the manifest
    std::map<int, long> containing, with_gt;
    std::set<int> gt_available;
    for (const auto& e : manifest.entries) {
        std::set<uint16_t> pseudo_present;
        const auto pseudo = e.predictions.find(rank::Flavor::Pseudo);
        if (pseudo != e.predictions.end()) {
            const LabelGrid g = nifti::read_labels(pseudo->second);
            for (uint16_t v : g.values())
                if (v) pseudo_present.insert(v);
        }
        std::set<uint16_t> gt_present;
        if (e.gt) {
            const LabelGrid g = nifti::read_labels(*e.gt);
            for (uint16_t v : g.values())
                if (v) gt_present.insert(v);
        }
        for (uint16_t sid : gt_present) gt_available.insert(sid);
        if (e.split == "train") {
            for (uint16_t sid : pseudo_present) ++containing[sid];
            for (uint16_t sid : gt_present)
                if (pseudo_present.count(sid)) ++with_gt[sid];
        }
    }
    std::map<int, double> gt_fractions;
    for (const auto& [sid, n] : containing)
        gt_fractions[sid] = n > 0 ? static_cast<double>(with_gt[sid]) / n : 0.0;

    std::set<int> gt_in_scope;
    for (int sid : gt_available)
        if (in_scope.count(sid)) gt_in_scope.insert(sid);

    const auto plan = assembly::build_plan(catalog, rankings, gt_fractions, gt_in_scope, in_scope);
    fs::create_directories(opts.out_dir);
    {
        std::ofstream out(fs::path(opts.out_dir) / "plan.json", std::ios::binary);
        out << assembly::plan_to_json(plan).dump(1) << "\n";
    }

    const auto label_dir = fs::path(opts.out_dir) / "labels";
    fs::create_directories(label_dir);

    std::vector<const io::CaseEntry*> cases;
    for (const auto& e : manifest.entries)
        if (!e.predictions.empty()) cases.push_back(&e);
    std::vector<std::string> ids;
    for (const auto* e : cases) ids.push_back(e->case_id);

    const auto raw = parallel_for_each(cases.size(), opts.workers, [&](std::size_t i) {
        const auto& e = *cases[i];
        std::map<rank::Flavor, LabelGrid> sources;
        for (const auto& [flavor, path] : e.predictions)
            sources.emplace(flavor, nifti::read_labels(path));
        std::optional<LabelGrid> gt;
        if (e.gt) gt = nifti::read_labels(*e.gt);

        assembly::AssemblyPlan case_plan = plan;
        if (!gt) {
            // no manual GT for this case: drop the GT overwrite layers
            auto& layers = case_plan.layers;
            layers.erase(std::remove_if(layers.begin(), layers.end(),
                                        [](const assembly::Layer& l) {
                                            return l.source == assembly::LayerSource::ManualGT;
                                        }),
                         layers.end());
        }
        const auto merged = assembly::assemble(sources, gt, case_plan);
        nifti::write_nifti(merged, (label_dir / (e.case_id + "_labels.nii.gz")).string());
    });

    json effective{{"rankings", rankings_path},
                   {"rankings_hash", io::file_hash(rankings_path)},
                   {"layers", plan.layers.size()}};
    return finish(opts, "assemble", effective, collect_errors(raw, ids), cases.size());
}

// -------------------------------------------------------------------- postfix

int cmd_postfix(const CommonOpts& opts, const std::string& labels_dir) {
    const auto cfg = load_config(opts);
    const auto manifest = io::load_manifest(opts.manifest_path);
    const auto catalog = StructureCatalog::load_csv(opts.catalog_path);

    postfix::HeadGateParams head_params;
    head_params.brain_min_voxels = static_cast<long>(cfg_num(cfg, "brain_min_voxels", 2000));
    postfix::RibJointParams rib_params;
    rib_params.spine_dilation_radius = static_cast<int>(cfg_num(cfg, "spine_dilation_radius", 3));
    rib_params.opening_radius = static_cast<int>(cfg_num(cfg, "opening_radius", 1));
    rib_params.min_size = static_cast<long>(cfg_num(cfg, "joint_min_size", 100));
    rib_params.max_size = static_cast<long>(cfg_num(cfg, "joint_max_size", 1500));
    rib_params.assignment_radius = cfg_num(cfg, "assignment_radius_mm", 15.0);

    // catalog-driven structure classes
    std::set<uint16_t> brain_group, hn_group, rib_ids, vertebra_ids;
    uint16_t brain_id = 0;
    for (const auto& d : catalog.structures()) {
        if (d.group == 7) brain_group.insert(static_cast<uint16_t>(d.id));
        if (d.group == 8) hn_group.insert(static_cast<uint16_t>(d.id));
        if (d.name.rfind("rib_", 0) == 0) rib_ids.insert(static_cast<uint16_t>(d.id));
        if (d.name.rfind("vertebrae_", 0) == 0) vertebra_ids.insert(static_cast<uint16_t>(d.id));
        if (d.name == "brain") brain_id = static_cast<uint16_t>(d.id);
    }

    const auto out_dir = fs::path(opts.out_dir) / "labels";
    fs::create_directories(out_dir);

    std::vector<const io::CaseEntry*> cases;
    for (const auto& e : manifest.entries) cases.push_back(&e);
    std::vector<std::string> ids;
    for (const auto* e : cases) ids.push_back(e->case_id);

    const auto raw = parallel_for_each(cases.size(), opts.workers, [&](std::size_t i) {
        const auto& e = *cases[i];
        std::string labels_path;
        if (!labels_dir.empty()) {
            const auto candidate = fs::path(labels_dir) / (e.case_id + "_labels.nii.gz");
            if (fs::exists(candidate)) labels_path = candidate.string();
        }
        if (labels_path.empty() && e.pred) labels_path = *e.pred;
        if (labels_path.empty()) throw IoError("case " + e.case_id + ": no labels to refine");
        LabelGrid labels = nifti::read_labels(labels_path);

        // 1. sparse-slice interpolation
        if (!e.annotated_slices.empty())
            labels = postfix::interpolate_sparse_slices(labels, 2, e.annotated_slices);

        // 2. head-region gating and cropping
        std::optional<MaskGrid> brain;
        if (e.brain_mask)
            brain = nifti::read_mask(*e.brain_mask);
        else if (brain_id != 0)
            brain = label_mask(labels, brain_id);
        const bool has_head_labels = [&] {
            for (uint16_t v : labels.values())
                if (v && (brain_group.count(v) || hn_group.count(v))) return true;
            return false;
        }();
        if (has_head_labels && brain) {
            if (!postfix::head_gate(*brain, head_params.brain_min_voxels)) {
                std::vector<uint16_t> v(labels.values());
                for (auto& x : v)
                    if (brain_group.count(x) || hn_group.count(x)) x = 0;
                labels = labels.with_values(std::move(v));
            } else {
                // crop the two head groups with their own boxes
                auto crop_group = [&](const std::set<uint16_t>& group, postfix::HeadBox box) {
                    std::vector<uint16_t> sub(labels.voxel_count(), 0);
                    std::vector<uint16_t> rest(labels.values());
                    bool any = false;
                    for (std::size_t k = 0; k < rest.size(); ++k)
                        if (group.count(rest[k])) {
                            sub[k] = rest[k];
                            rest[k] = 0;
                            any = true;
                        }
                    if (!any) return;
                    const auto cropped = postfix::head_crop(labels.with_values(std::move(sub)),
                                                            *brain, box, head_params);
                    for (std::size_t k = 0; k < rest.size(); ++k)
                        if (cropped.values()[k]) rest[k] = cropped.values()[k];
                    labels = labels.with_values(std::move(rest));
                };
                crop_group(brain_group, postfix::HeadBox::brain);
                crop_group(hn_group, postfix::HeadBox::head_neck);
            }
        }

        // 3. rib refinement
        const bool has_ribs = [&] {
            for (uint16_t v : labels.values())
                if (rib_ids.count(v)) return true;
            return false;
        }();
        if (has_ribs) {
            std::vector<uint16_t> ribs_only(labels.voxel_count(), 0);
            std::vector<uint16_t> rest(labels.values());
            for (std::size_t k = 0; k < rest.size(); ++k)
                if (rib_ids.count(rest[k])) {
                    ribs_only[k] = rest[k];
                    rest[k] = 0;
                }
            LabelGrid ribs = labels.with_values(std::move(ribs_only));
            ribs = postfix::rib_relabel(ribs);

            if (e.tubular) {
                const MaskGrid tubular = nifti::read_mask(*e.tubular);
                MaskGrid spine = [&] {
                    if (e.spine_mask) return nifti::read_mask(*e.spine_mask);
                    std::vector<uint8_t> sv(labels.voxel_count(), 0);
                    const auto& lv = labels.values();
                    for (std::size_t k = 0; k < sv.size(); ++k)
                        sv[k] = vertebra_ids.count(lv[k]) ? 1 : 0;
                    return MaskGrid(labels.dims(), labels.spacing(), labels.orientation(),
                                    labels.origin(), std::move(sv));
                }();
                ribs = postfix::rib_joint_retrieve(ribs, spine, tubular, rib_params);
            }
            for (std::size_t k = 0; k < rest.size(); ++k)
                if (ribs.values()[k] && rest[k] == 0) rest[k] = ribs.values()[k];
            labels = labels.with_values(std::move(rest));
        }

        nifti::write_nifti(labels, (out_dir / (e.case_id + "_labels.nii.gz")).string());
    });

    json effective{{"brain_min_voxels", head_params.brain_min_voxels},
                   {"brain_box", head_params.brain_box},
                   {"hn_box", head_params.hn_box},
                   {"spine_dilation_radius", rib_params.spine_dilation_radius},
                   {"opening_radius", rib_params.opening_radius},
                   {"joint_min_size", rib_params.min_size},
                   {"joint_max_size", rib_params.max_size},
                   {"assignment_radius_mm", rib_params.assignment_radius}};
    return finish(opts, "postfix", effective, collect_errors(raw, ids), cases.size());
}

// -------------------------------------------------------------------- phantom

// Synthetic demo corpus: per case an image, a multi-structure GT, three
// perturbed flavor predictions, a brain mask, a tubular mask, plus a
// manifest, a per-flavor score table and a trimmed catalog reference.
int cmd_phantom(const CommonOpts& opts, int case_count) {
    fs::create_directories(opts.out_dir);
    const auto dir = fs::path(opts.out_dir);
    std::mt19937_64 rng(opts.seed);

    const std::array<int, 3> dims{40, 40, 32};
    const std::array<double, 3> native_spacing{3.0, 3.0, 3.0};

    struct Blob {
        uint16_t label;
        std::array<double, 3> center;
        std::array<double, 3> radius;
    };

    json manifest;
    manifest["cases"] = json::array();
    std::ostringstream scores_csv;
    scores_csv << "structure_id,flavor,split,metric,case_id,value\n";

    const PenaltyPolicy score_policy;  // references filled per structure below
    const std::map<uint16_t, double> references{{1, 300.0}, {2, 200.0}, {5, 800.0}, {81, 60.0},
                                                {82, 60.0}, {23, 150.0}, {50, 2200.0}};

    for (int c = 0; c < case_count; ++c) {
        const std::string case_id = "phantom" + std::to_string(c);
        std::uniform_real_distribution<double> jitter(-1.5, 1.5);

        std::vector<Blob> blobs{
            {5, {14 + jitter(rng), 20 + jitter(rng), 10 + jitter(rng)}, {7, 6, 4.5}},   // liver
            {1, {28 + jitter(rng), 14 + jitter(rng), 10 + jitter(rng)}, {4, 3.5, 3}},   // spleen
            {2, {26 + jitter(rng), 26 + jitter(rng), 8 + jitter(rng)}, {3, 3, 3.5}},    // kidney_R
            {50, {20 + jitter(rng), 20 + jitter(rng), 26 + jitter(rng)}, {8, 8, 4.5}},  // brain
        };

        std::vector<uint16_t> gt(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
        std::vector<float> img(gt.size(), -1000.f);
        auto idx = [&](int i, int j, int k) {
            return static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(dims[0]) * (j + static_cast<std::size_t>(dims[1]) * k);
        };
        std::normal_distribution<float> noise(0.f, 15.f);
        for (int k = 0; k < dims[2]; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i) {
                    img[idx(i, j, k)] = 40.f + noise(rng);
                    for (const auto& b : blobs) {
                        const double dx = (i - b.center[0]) / b.radius[0];
                        const double dy = (j - b.center[1]) / b.radius[1];
                        const double dz = (k - b.center[2]) / b.radius[2];
                        if (dx * dx + dy * dy + dz * dz <= 1.0) {
                            gt[idx(i, j, k)] = b.label;
                            img[idx(i, j, k)] = 80.f + 10.f * b.label + noise(rng);
                        }
                    }
                }
        // vertebral column (23) and two rib bars (81, 82)
        for (int k = 2; k < 22; ++k)
            for (int j = 18; j < 21; ++j)
                for (int i = 19; i < 22; ++i) {
                    gt[idx(i, j, k)] = 23;
                    img[idx(i, j, k)] = 700.f + noise(rng);
                }
        for (int i = 23; i < 33; ++i) {
            gt[idx(i, 19, 14)] = 81;
            gt[idx(i, 19, 8)] = 82;
            img[idx(i, 19, 14)] = 500.f + noise(rng);
            img[idx(i, 19, 8)] = 500.f + noise(rng);
        }

        const Orientation native = Orientation::from_string(c % 2 == 0 ? "RAS" : "LPS");
        LabelGrid gt_grid(dims, native_spacing, {}, {-60, -60, -48}, gt);
        ScalarGrid img_grid(dims, native_spacing, {}, {-60, -60, -48}, img);
        if (!native.is_ras()) {
            // store the volume in a non-RAS layout so standardize has work to do
            LabelGrid tmp(dims, native_spacing, native, {-60, -60, -48}, [&] {
                // flip axes 0 and 1 so that reorienting recovers the RAS grid
                std::vector<uint16_t> flipped(gt.size());
                std::vector<float> fimg(img.size());
                for (int k = 0; k < dims[2]; ++k)
                    for (int j = 0; j < dims[1]; ++j)
                        for (int i = 0; i < dims[0]; ++i)
                            flipped[idx(i, j, k)] =
                                gt[idx(dims[0] - 1 - i, dims[1] - 1 - j, k)];
                return flipped;
            }());
            gt_grid = tmp;
            std::vector<float> fimg(img.size());
            for (int k = 0; k < dims[2]; ++k)
                for (int j = 0; j < dims[1]; ++j)
                    for (int i = 0; i < dims[0]; ++i)
                        fimg[idx(i, j, k)] = img[idx(dims[0] - 1 - i, dims[1] - 1 - j, k)];
            img_grid = ScalarGrid(dims, native_spacing, native, {-60, -60, -48}, std::move(fimg));
        }

        // flavor predictions: GT-flavor faithful, Pseudo shifted, Shape eroded
        auto perturb = [&](int shift, double drop_rate, uint64_t salt) {
            std::mt19937_64 prng(opts.seed ^ (salt + 0x9e37 * (c + 1)));
            std::bernoulli_distribution drop(drop_rate);
            std::vector<uint16_t> v(gt.size(), 0);
            for (int k = 0; k < dims[2]; ++k)
                for (int j = 0; j < dims[1]; ++j)
                    for (int i = 0; i < dims[0]; ++i) {
                        const int si = std::clamp(i - shift, 0, dims[0] - 1);
                        const uint16_t lab = gt[idx(si, j, k)];
                        if (lab && !drop(prng)) v[idx(i, j, k)] = lab;
                    }
            return LabelGrid(dims, native_spacing, {}, {-60, -60, -48}, std::move(v));
        };
        const LabelGrid pred_gtf = perturb(0, 0.02, 11);
        const LabelGrid pred_pseudo = perturb(1, 0.05, 22);
        const LabelGrid pred_shape = perturb(0, 0.10, 33);

        // brain and tubular masks on the native grid
        std::vector<uint8_t> brain_mask(gt.size(), 0), tubular(gt.size(), 0);
        for (std::size_t i = 0; i < gt.size(); ++i) brain_mask[i] = gt[i] == 50 ? 1 : 0;
        // tubular structures: rib bars plus a joint-sized patch touching the spine
        for (int i = 22; i < 33; ++i) {
            tubular[idx(i, 19, 14)] = 1;
            tubular[idx(i, 19, 8)] = 1;
        }
        for (int k = 12; k < 17; ++k)
            for (int j = 18; j < 21; ++j)
                for (int i = 22; i < 23; ++i) tubular[idx(i, j, k)] = 1;

        const auto write = [&](const std::string& name, const auto& grid) {
            nifti::write_nifti(grid, (dir / name).string());
            return name;
        };
        json entry;
        entry["case_id"] = case_id;
        entry["split"] = c < 3 ? "train" : "test";
        entry["image"] = (dir / write(case_id + "_image.nii.gz", img_grid)).string();
        entry["gt"] = (dir / write(case_id + "_gt.nii.gz", gt_grid)).string();
        entry["pred"] = (dir / write(case_id + "_pred.nii.gz", pred_pseudo)).string();
        entry["predictions"]["GT"] = (dir / write(case_id + "_flavor_GT.nii.gz", pred_gtf)).string();
        entry["predictions"]["Pseudo"] =
            (dir / write(case_id + "_flavor_Pseudo.nii.gz", pred_pseudo)).string();
        entry["predictions"]["Shape"] =
            (dir / write(case_id + "_flavor_Shape.nii.gz", pred_shape)).string();
        entry["brain_mask"] =
            (dir / write(case_id + "_brain.nii.gz",
                         MaskGrid(dims, native_spacing, {}, {-60, -60, -48}, brain_mask)))
                .string();
        entry["tubular"] = (dir / write(case_id + "_tubular.nii.gz",
                                        MaskGrid(dims, native_spacing, {}, {-60, -60, -48}, tubular)))
                               .string();
        manifest["cases"].push_back(entry);

        // per-flavor scores measured against the phantom GT (the raw gt
        // vector is RAS; gt_grid may hold a flipped storage layout)
        const LabelGrid ras_gt(dims, native_spacing, {}, {-60, -60, -48}, gt);
        for (const auto& [flavor, pred] :
             std::map<rank::Flavor, const LabelGrid*>{{rank::Flavor::GT, &pred_gtf},
                                                      {rank::Flavor::Pseudo, &pred_pseudo},
                                                      {rank::Flavor::Shape, &pred_shape}}) {
            for (const auto& [sid, reference] : references) {
                PenaltyPolicy policy = score_policy;
                policy.reference = reference;
                const auto rec = evaluate_structure(ras_gt, *pred, sid, policy, case_id);
                if (rec.status == EvalStatus::excluded || !rec.dice || !rec.hd95) continue;
                scores_csv << sid << ',' << rank::to_string(flavor) << ",id,dice," << case_id << ','
                           << *rec.dice << "\n";
                scores_csv << sid << ',' << rank::to_string(flavor) << ",id,hd95," << case_id << ','
                           << *rec.hd95 << "\n";
            }
        }
    }

    {
        std::ofstream out(dir / "manifest.json", std::ios::binary);
        out << manifest.dump(1) << "\n";
    }
    {
        std::ofstream out(dir / "scores.csv", std::ios::binary);
        out << scores_csv.str();
    }

    json effective{{"cases", case_count}};
    CommonOpts meta_opts = opts;
    meta_opts.manifest_path = (dir / "manifest.json").string();
    return finish(meta_opts, "phantom", effective, {}, case_count);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CADS label-curation and evaluation pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);

    CommonOpts opts;
    auto add_common = [&](CLI::App* cmd, bool needs_manifest, bool needs_catalog) {
        if (needs_manifest)
            cmd->add_option("--manifest", opts.manifest_path, "manifest JSON")->required();
        if (needs_catalog)
            cmd->add_option("--catalog", opts.catalog_path, "structure catalog CSV")->required();
        cmd->add_option("--workers", opts.workers, "worker threads")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", opts.seed, "random seed");
        cmd->add_option("--out", opts.out_dir, "output directory")->required();
        cmd->add_option("--config", opts.config_path, "JSON config overrides");
    };

    auto* standardize = app.add_subcommand("standardize", "reorient, resample, simplify, blur");
    add_common(standardize, true, false);

    auto* evaluate = app.add_subcommand("evaluate", "metric suite with FN penalization");
    add_common(evaluate, true, true);
    evaluate->add_option("--adapter", opts.adapter_path, "dataset adapter JSON");
    evaluate->add_option("--format", opts.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));
    std::string pred_dir;
    evaluate->add_option("--pred-dir", pred_dir,
                         "directory of <case>_labels.nii.gz overriding manifest pred paths");

    auto* qc_cmd = app.add_subcommand("qc", "shape-based pseudo-label quality control");
    add_common(qc_cmd, true, true);
    double fraction = 0.10;
    std::string qc_mode = "image";
    std::string prior_dir, save_prior_dir, recon_dir;
    qc_cmd->add_option("--fraction", fraction, "exclusion fraction")
        ->check(CLI::Range(1e-9, 0.999999));
    qc_cmd->add_option("--mode", qc_mode, "exclusion grouping")
        ->check(CLI::IsMember({"image", "structure"}));
    qc_cmd->add_option("--prior", prior_dir, "directory with fitted priors (default: fit baseline)");
    qc_cmd->add_option("--save-prior", save_prior_dir, "write fitted priors here");
    qc_cmd->add_option("--reconstructions", recon_dir,
                       "directory of externally reconstructed labels <case>.nii.gz");

    auto* rank_cmd = app.add_subcommand("rank", "statistical flavor ranking");
    std::string scores_path;
    rank_cmd->add_option("--scores", scores_path, "flavor score CSV")->required();
    add_common(rank_cmd, false, false);

    auto* assemble = app.add_subcommand("assemble", "priority-ordered label assembly");
    add_common(assemble, true, true);
    std::string rankings_path;
    assemble->add_option("--rankings", rankings_path, "rankings JSON from 'rank'")->required();

    auto* postfix_cmd = app.add_subcommand("postfix", "anatomical post-processing");
    add_common(postfix_cmd, true, true);
    std::string labels_dir;
    postfix_cmd->add_option("--labels-dir", labels_dir,
                            "directory of <case>_labels.nii.gz to refine (default: manifest pred)");

    auto* phantom = app.add_subcommand("phantom", "generate the synthetic demo corpus");
    add_common(phantom, false, false);
    int phantom_cases = 5;
    phantom->add_option("--cases", phantom_cases, "number of cases")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // usage errors exit 2, --help/--version exit 0
    }

    try {
        if (standardize->parsed()) return cmd_standardize(opts);
        if (evaluate->parsed()) return cmd_evaluate(opts, pred_dir);
        if (qc_cmd->parsed()) return cmd_qc(opts, fraction, qc_mode, prior_dir, save_prior_dir, recon_dir);
        if (rank_cmd->parsed()) return cmd_rank(opts, scores_path);
        if (assemble->parsed()) return cmd_assemble(opts, rankings_path);
        if (postfix_cmd->parsed()) return cmd_postfix(opts, labels_dir);
        if (phantom->parsed()) return cmd_phantom(opts, phantom_cases);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
