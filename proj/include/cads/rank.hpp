#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cads/stats.hpp"

namespace cads::rank {

enum class Flavor : int { GT = 0, Pseudo = 1, Shape = 2 };

constexpr std::array<Flavor, 3> kFlavors{Flavor::GT, Flavor::Pseudo, Flavor::Shape};

// residual tie preference: descending label fidelity
constexpr std::array<Flavor, 3> kPreference{Flavor::GT, Flavor::Shape, Flavor::Pseudo};

inline const char* to_string(Flavor f) {
    switch (f) {
        case Flavor::GT: return "GT";
        case Flavor::Pseudo: return "Pseudo";
        default: return "Shape";
    }
}

inline Flavor flavor_from_string(const std::string& s) {
    if (s == "GT") return Flavor::GT;
    if (s == "Pseudo") return Flavor::Pseudo;
    if (s == "Shape") return Flavor::Shape;
    throw ParseError("unknown flavor '" + s + "'");
}

struct FlavorSamples {
    std::vector<double> dice_id;
    std::vector<double> dice_ood;
    std::vector<double> hd95_id;
    std::vector<double> hd95_ood;
};

struct FlavorScoreSet {
    int structure_id = 0;
    std::array<FlavorSamples, 3> samples;  // indexed by Flavor

    FlavorSamples& of(Flavor f) { return samples[static_cast<int>(f)]; }
    const FlavorSamples& of(Flavor f) const { return samples[static_cast<int>(f)]; }
};

struct TrailEntry {
    std::string test_name;
    double statistic = 0.0;
    double p_value = 1.0;
    std::string decision;
};

struct RankingOutcome {
    int structure_id = 0;
    std::array<Flavor, 3> order{Flavor::GT, Flavor::Shape, Flavor::Pseudo};
    std::array<double, 3> points{0, 0, 0};     // indexed by Flavor
    std::array<double, 3> mean_dice{0, 0, 0};  // selected split, indexed by Flavor
    std::vector<TrailEntry> trail;
    bool used_secondary = false;
};

namespace detail {

constexpr double kAlpha = 0.05;

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline int pref_index(Flavor f) {
    for (int i = 0; i < 3; ++i)
        if (kPreference[i] == f) return i;
    return 3;
}

struct StageInput {
    std::vector<Flavor> flavors;
    std::vector<std::vector<double>> groups;
    bool lower_is_better = false;
    double weight = 1.0;  // points per pairwise win / per rank-below
    std::string metric;   // "dice" | "hd95"
};

// One metric stage of the ranking procedure: normality and variance gates,
// omnibus route, post-hoc pairwise comparisons, then point assignment.
// Returns per-flavor stage points aligned with in.flavors.
inline std::vector<double> run_stage(const StageInput& in, std::vector<TrailEntry>& trail) {
    const std::size_t k = in.flavors.size();
    auto flavor_tag = [&](std::size_t i) { return std::string(to_string(in.flavors[i])); };

    bool all_normal = true;
    for (std::size_t i = 0; i < k; ++i) {
        TrailEntry e;
        e.test_name = "shapiro_wilk[" + in.metric + ":" + flavor_tag(i) + "]";
        try {
            const auto sw = stats::shapiro_wilk(in.groups[i]);
            e.statistic = sw.statistic;
            e.p_value = sw.p_value;
            const bool normal = sw.p_value > kAlpha;
            e.decision = normal ? "normal" : "non-normal";
            all_normal = all_normal && normal;
        } catch (const DegenerateSample&) {
            e.statistic = 0.0;
            e.p_value = 0.0;
            e.decision = "constant sample; treated as non-normal";
            all_normal = false;
        }
        trail.push_back(e);
    }

    const auto lev = stats::levene(in.groups);
    const bool equal_var = lev.p_value > kAlpha;
    trail.push_back({"levene[" + in.metric + "]", lev.statistic, lev.p_value,
                     equal_var ? "equal variances" : "unequal variances"});

    // route per the gate: normal + equal -> ANOVA; unequal -> Welch; else KW
    stats::TestResult omnibus;
    stats::TestResult posthoc;
    if (all_normal && equal_var) {
        omnibus = stats::one_way_anova(in.groups);
        posthoc = stats::tukey_hsd(in.groups);
    } else if (!equal_var) {
        try {
            omnibus = stats::welch_anova(in.groups);
        } catch (const DegenerateSample&) {
            omnibus = stats::kruskal_wallis(in.groups);
            omnibus.note = "welch degenerate (zero-variance group); fell back to kruskal-wallis";
        }
        posthoc = stats::dunn(in.groups);
    } else {
        omnibus = stats::kruskal_wallis(in.groups);
        posthoc = stats::dunn(in.groups);
    }
    trail.push_back({omnibus.name + "[" + in.metric + "]", omnibus.statistic, omnibus.p_value,
                     omnibus.note.empty() ? "omnibus" : "omnibus; " + omnibus.note});

    std::vector<double> means(k);
    for (std::size_t i = 0; i < k; ++i) means[i] = mean_of(in.groups[i]);

    std::vector<double> wins(k, 0.0);
    bool any_significant = false;
    for (const auto& pw : posthoc.pairwise) {
        TrailEntry e;
        e.test_name = posthoc.name + "[" + in.metric + ":" + flavor_tag(pw.a) + " vs " +
                      flavor_tag(pw.b) + "]";
        e.statistic = pw.statistic;
        e.p_value = pw.p;
        if (pw.p < kAlpha && means[pw.a] != means[pw.b]) {
            any_significant = true;
            const bool a_better =
                in.lower_is_better ? means[pw.a] < means[pw.b] : means[pw.a] > means[pw.b];
            const std::size_t w = a_better ? pw.a : pw.b;
            wins[w] += 1.0;
            std::ostringstream os;
            os << "significant; " << flavor_tag(w) << " +" << in.weight;
            e.decision = os.str();
        } else {
            e.decision = "not significant";
        }
        trail.push_back(e);
    }

    std::vector<double> pts(k, 0.0);
    if (any_significant) {
        for (std::size_t i = 0; i < k; ++i) pts[i] = in.weight * wins[i];
    } else {
        // fractional rank-below-count: better mean earns more, exact ties
        // share the average rank so ambiguity survives to the next stage
        for (std::size_t i = 0; i < k; ++i) {
            double below = 0.0, equal = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == i) continue;
                const bool i_better =
                    in.lower_is_better ? means[i] < means[j] : means[i] > means[j];
                if (i_better)
                    below += 1.0;
                else if (means[i] == means[j])
                    equal += 1.0;
            }
            pts[i] = in.weight * (below + 0.5 * equal);
        }
    }

    std::ostringstream os;
    for (std::size_t i = 0; i < k; ++i) os << (i ? " " : "") << flavor_tag(i) << "=" << pts[i];
    trail.push_back({"points[" + in.metric + "]", 0.0, 1.0,
                     os.str() + (any_significant ? " (pairwise wins)" : " (mean ranks)")});
    return pts;
}

}  // namespace detail

// Flavor priority ranking: primary Dice stage, secondary HD95 stage when the
// top of the ranking is ambiguous, residual ties broken GT > Shape > Pseudo.
// OOD score lists are preferred over ID lists whenever nonempty.
inline RankingOutcome rank_flavors(const FlavorScoreSet& scores) {
    RankingOutcome out;
    out.structure_id = scores.structure_id;

    std::array<const std::vector<double>*, 3> dice{};
    std::array<const std::vector<double>*, 3> hd95{};
    for (Flavor f : kFlavors) {
        const auto& s = scores.of(f);
        const int i = static_cast<int>(f);
        dice[i] = s.dice_ood.empty() ? &s.dice_id : &s.dice_ood;
        hd95[i] = s.hd95_ood.empty() ? &s.hd95_id : &s.hd95_ood;
        if (dice[i]->size() < 3)
            throw SampleTooSmall(std::string("rank_flavors: flavor ") + to_string(f) +
                                 " has fewer than 3 Dice samples in the selected split");
        out.trail.push_back({"split_selection[" + std::string(to_string(f)) + "]",
                             static_cast<double>(dice[i]->size()), 1.0,
                             s.dice_ood.empty() ? "dice: ID split" : "dice: OOD split"});
        out.mean_dice[i] = detail::mean_of(*dice[i]);
    }

    detail::StageInput dice_stage;
    dice_stage.flavors = {Flavor::GT, Flavor::Pseudo, Flavor::Shape};
    for (Flavor f : dice_stage.flavors) dice_stage.groups.push_back(*dice[static_cast<int>(f)]);
    dice_stage.lower_is_better = false;
    dice_stage.weight = 1.0;
    dice_stage.metric = "dice";
    const auto dice_pts = detail::run_stage(dice_stage, out.trail);
    for (std::size_t i = 0; i < 3; ++i)
        out.points[static_cast<int>(dice_stage.flavors[i])] = dice_pts[i];

    // secondary stage when >= 2 flavors share the maximum points
    const double max_pts = *std::max_element(out.points.begin(), out.points.end());
    std::vector<Flavor> tied;
    for (Flavor f : kFlavors)
        if (out.points[static_cast<int>(f)] == max_pts) tied.push_back(f);

    if (tied.size() >= 2) {
        bool enough = true;
        for (Flavor f : tied) enough = enough && hd95[static_cast<int>(f)]->size() >= 3;
        if (!enough) {
            out.trail.push_back({"hd95_stage", 0.0, 1.0,
                                 "skipped: fewer than 3 HD95 samples for a tied flavor"});
        } else {
            out.used_secondary = true;
            detail::StageInput hd_stage;
            hd_stage.flavors = tied;
            for (Flavor f : tied) hd_stage.groups.push_back(*hd95[static_cast<int>(f)]);
            hd_stage.lower_is_better = true;
            hd_stage.weight = 0.5;
            hd_stage.metric = "hd95";
            const auto hd_pts = detail::run_stage(hd_stage, out.trail);
            for (std::size_t i = 0; i < tied.size(); ++i)
                out.points[static_cast<int>(tied[i])] += hd_pts[i];
        }
    }

    std::array<Flavor, 3> order = kFlavors;
    std::sort(order.begin(), order.end(), [&](Flavor a, Flavor b) {
        const double pa = out.points[static_cast<int>(a)];
        const double pb = out.points[static_cast<int>(b)];
        if (pa != pb) return pa > pb;
        return detail::pref_index(a) < detail::pref_index(b);
    });
    out.order = order;

    std::ostringstream os;
    for (std::size_t i = 0; i < 3; ++i) os << (i ? " > " : "") << to_string(order[i]);
    out.trail.push_back({"final_order", 0.0, 1.0, os.str()});
    return out;
}

}  // namespace cads::rank
