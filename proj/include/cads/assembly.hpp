#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cads/catalog.hpp"
#include "cads/grid.hpp"
#include "cads/rank.hpp"

namespace cads::assembly {

enum class LayerSource { GT, Pseudo, Shape, ManualGT };

inline const char* to_string(LayerSource s) {
    switch (s) {
        case LayerSource::GT: return "GT";
        case LayerSource::Pseudo: return "Pseudo";
        case LayerSource::Shape: return "Shape";
        default: return "ManualGT";
    }
}

inline LayerSource layer_source_from_string(const std::string& s) {
    if (s == "GT") return LayerSource::GT;
    if (s == "Pseudo") return LayerSource::Pseudo;
    if (s == "Shape") return LayerSource::Shape;
    if (s == "ManualGT") return LayerSource::ManualGT;
    throw ParseError("unknown layer source '" + s + "'");
}

inline LayerSource from_flavor(rank::Flavor f) {
    switch (f) {
        case rank::Flavor::GT: return LayerSource::GT;
        case rank::Flavor::Pseudo: return LayerSource::Pseudo;
        default: return LayerSource::Shape;
    }
}

struct Layer {
    int structure_id = 0;
    LayerSource source = LayerSource::Pseudo;
    double mean_dice = 0.0;   // winning flavor, rationale
    double gt_fraction = 0.0; // rationale
};

// Ordered overwrite sequence: later layers overwrite earlier ones.
struct AssemblyPlan {
    std::vector<Layer> layers;
};

namespace detail {

// serial structures are merged as blocks sharing one flavor
inline std::string block_key(const std::string& name) {
    if (name.rfind("rib_", 0) == 0) return "ribs";
    if (name.rfind("vertebrae_C", 0) == 0) return "vertebrae_cervical";
    if (name.rfind("vertebrae_T", 0) == 0) return "vertebrae_thoracic";
    if (name.rfind("vertebrae_L", 0) == 0) return "vertebrae_lumbar";
    return "";
}

inline int pref_index(rank::Flavor f) {
    for (int i = 0; i < 3; ++i)
        if (rank::kPreference[i] == f) return i;
    return 3;
}

}  // namespace detail

// Builds the priority-ordered plan: within each anatomical group, layers are
// sorted ascending by winning-flavor mean Dice (lowest first, most
// overwritable), ties by lower GT fraction first; groups concatenate in
// catalog order 1..9; ManualGT layers for structures with GT come last.
// Vertebrae (per region) and ribs enter as blocks sharing one flavor.
inline AssemblyPlan build_plan(const StructureCatalog& catalog,
                               const std::map<int, rank::RankingOutcome>& rankings,
                               const std::map<int, double>& gt_fractions,
                               const std::set<int>& gt_available = {},
                               const std::set<int>& structure_ids = {}) {
    std::vector<const StructureDef*> in_scope;
    for (const auto& d : catalog.structures())
        if (structure_ids.empty() || structure_ids.count(d.id)) in_scope.push_back(&d);

    for (const StructureDef* d : in_scope)
        if (!rankings.count(d->id))
            throw IncompletePlan("no ranking for structure " + d->name);

    auto gt_fraction_of = [&](int id) {
        const auto it = gt_fractions.find(id);
        return it == gt_fractions.end() ? 0.0 : it->second;
    };

    // an ordering unit is either a single structure or a serial block
    struct Unit {
        std::vector<const StructureDef*> members;
        rank::Flavor flavor = rank::Flavor::Pseudo;
        double mean_dice = 0.0;
        double gt_fraction = 0.0;
        int first_id = 0;
    };

    std::map<int, std::vector<Unit>> units_by_group;
    std::map<std::pair<int, std::string>, std::vector<const StructureDef*>> blocks;
    for (const StructureDef* d : in_scope) {
        const auto key = detail::block_key(d->name);
        if (key.empty()) {
            Unit u;
            u.members = {d};
            const auto& r = rankings.at(d->id);
            u.flavor = r.order[0];
            u.mean_dice = r.mean_dice[static_cast<int>(u.flavor)];
            u.gt_fraction = gt_fraction_of(d->id);
            u.first_id = d->id;
            units_by_group[d->group].push_back(std::move(u));
        } else {
            blocks[{d->group, key}].push_back(d);
        }
    }

    for (auto& [gk, members] : blocks) {
        std::sort(members.begin(), members.end(),
                  [](const StructureDef* a, const StructureDef* b) { return a->id < b->id; });
        // majority vote over member winners, ties by flavor preference
        std::map<rank::Flavor, int> votes;
        for (const StructureDef* d : members) ++votes[rankings.at(d->id).order[0]];
        rank::Flavor best = rank::Flavor::GT;
        int best_votes = -1;
        for (rank::Flavor f : rank::kPreference) {
            const int v = votes.count(f) ? votes[f] : 0;
            if (v > best_votes) {
                best_votes = v;
                best = f;
            }
        }
        Unit u;
        u.members = members;
        u.flavor = best;
        double dice_sum = 0.0, gt_sum = 0.0;
        for (const StructureDef* d : members) {
            dice_sum += rankings.at(d->id).mean_dice[static_cast<int>(best)];
            gt_sum += gt_fraction_of(d->id);
        }
        u.mean_dice = dice_sum / static_cast<double>(members.size());
        u.gt_fraction = gt_sum / static_cast<double>(members.size());
        u.first_id = members.front()->id;
        units_by_group[gk.first].push_back(std::move(u));
    }

    AssemblyPlan plan;
    for (auto& [group, units] : units_by_group) {
        std::sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
            if (a.mean_dice != b.mean_dice) return a.mean_dice < b.mean_dice;
            if (a.gt_fraction != b.gt_fraction) return a.gt_fraction < b.gt_fraction;
            return a.first_id < b.first_id;
        });
        for (const Unit& u : units)
            for (const StructureDef* d : u.members)
                plan.layers.push_back(
                    {d->id, from_flavor(u.flavor), u.mean_dice, u.gt_fraction});
    }

    std::vector<int> manual(gt_available.begin(), gt_available.end());
    std::sort(manual.begin(), manual.end());
    for (int id : manual) {
        if (!catalog.contains(id))
            throw UnknownStructure("GT structure id " + std::to_string(id) + " not in catalog");
        plan.layers.push_back({id, LayerSource::ManualGT, 1.0, gt_fraction_of(id)});
    }
    return plan;
}

// Applies the plan: zero-initialized output, each layer's structure voxels
// copied from the named source in order, so later layers win contested
// voxels.
inline LabelGrid assemble(const std::map<rank::Flavor, LabelGrid>& sources,
                          const std::optional<LabelGrid>& gt, const AssemblyPlan& plan) {
    const LabelGrid* reference = nullptr;
    for (const auto& [f, g] : sources) {
        if (reference) require_same_geometry(*reference, g, "assemble");
        reference = &g;
    }
    if (gt) {
        if (reference) require_same_geometry(*reference, *gt, "assemble");
        reference = &*gt;
    }
    if (!reference) throw MissingSource("assemble: no source grids supplied");

    std::vector<uint16_t> out(reference->voxel_count(), 0);
    for (const auto& layer : plan.layers) {
        const LabelGrid* src = nullptr;
        if (layer.source == LayerSource::ManualGT) {
            if (!gt) throw MissingSource("assemble: plan has a ManualGT layer but no GT grid");
            src = &*gt;
        } else {
            rank::Flavor f = rank::Flavor::GT;
            if (layer.source == LayerSource::Pseudo) f = rank::Flavor::Pseudo;
            else if (layer.source == LayerSource::Shape) f = rank::Flavor::Shape;
            const auto it = sources.find(f);
            if (it == sources.end())
                throw MissingSource(std::string("assemble: missing source grid for flavor ") +
                                    rank::to_string(f));
            src = &it->second;
        }
        const auto label = static_cast<uint16_t>(layer.structure_id);
        const auto& v = src->values();
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] == label) out[i] = label;
    }
    return LabelGrid(reference->dims(), reference->spacing(), reference->orientation(),
                     reference->origin(), std::move(out));
}

inline nlohmann::json plan_to_json(const AssemblyPlan& plan) {
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : plan.layers)
        j["layers"].push_back({{"structure_id", l.structure_id},
                               {"source", to_string(l.source)},
                               {"mean_dice", l.mean_dice},
                               {"gt_fraction", l.gt_fraction}});
    return j;
}

inline AssemblyPlan plan_from_json(const nlohmann::json& j) {
    AssemblyPlan plan;
    for (const auto& l : j.at("layers"))
        plan.layers.push_back({l.at("structure_id").get<int>(),
                               layer_source_from_string(l.at("source").get<std::string>()),
                               l.at("mean_dice").get<double>(),
                               l.at("gt_fraction").get<double>()});
    return plan;
}

}  // namespace cads::assembly
