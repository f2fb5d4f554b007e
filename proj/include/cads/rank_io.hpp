#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cads/csv.hpp"
#include "cads/rank.hpp"

namespace cads::rank {

// Ingests per-case scores from CSV with columns
// structure_id, flavor, split, metric, case_id, value.
// Rows are keyed (structure, flavor, split, metric); case_id is carried for
// audit only. Returns score sets ordered by structure id.
inline std::vector<FlavorScoreSet> load_flavor_scores_csv(const std::string& path) {
    const auto t = csv::read_file(path);
    const int c_sid = t.column("structure_id");
    const int c_flavor = t.column("flavor");
    const int c_split = t.column("split");
    const int c_metric = t.column("metric");
    const int c_value = t.column("value");
    t.column("case_id");  // required by the schema even though unused here

    std::map<int, FlavorScoreSet> by_structure;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        const int sid = static_cast<int>(csv::parse_long(row[c_sid], ctx));
        const Flavor flavor = flavor_from_string(row[c_flavor]);
        const double value = csv::parse_double(row[c_value], ctx);

        auto& set = by_structure[sid];
        set.structure_id = sid;
        auto& samples = set.of(flavor);

        const std::string& split = row[c_split];
        const std::string& metric = row[c_metric];
        if (metric == "dice") {
            if (split == "id") samples.dice_id.push_back(value);
            else if (split == "ood") samples.dice_ood.push_back(value);
            else throw ParseError(ctx + ": unknown split '" + split + "'");
        } else if (metric == "hd95") {
            if (split == "id") samples.hd95_id.push_back(value);
            else if (split == "ood") samples.hd95_ood.push_back(value);
            else throw ParseError(ctx + ": unknown split '" + split + "'");
        } else {
            throw ParseError(ctx + ": unknown metric '" + metric + "'");
        }
    }

    std::vector<FlavorScoreSet> out;
    out.reserve(by_structure.size());
    for (auto& [sid, set] : by_structure) out.push_back(std::move(set));
    return out;
}

inline nlohmann::json outcome_to_json(const RankingOutcome& o) {
    nlohmann::json j;
    j["structure_id"] = o.structure_id;
    j["order"] = nlohmann::json::array();
    for (Flavor f : o.order) j["order"].push_back(to_string(f));
    for (Flavor f : kFlavors) {
        j["points"][to_string(f)] = o.points[static_cast<int>(f)];
        j["mean_dice"][to_string(f)] = o.mean_dice[static_cast<int>(f)];
    }
    j["used_secondary"] = o.used_secondary;
    j["trail"] = nlohmann::json::array();
    for (const auto& e : o.trail)
        j["trail"].push_back({{"test", e.test_name},
                              {"statistic", e.statistic},
                              {"p_value", e.p_value},
                              {"decision", e.decision}});
    return j;
}

inline RankingOutcome outcome_from_json(const nlohmann::json& j) {
    RankingOutcome o;
    o.structure_id = j.at("structure_id").get<int>();
    for (std::size_t i = 0; i < 3; ++i)
        o.order[i] = flavor_from_string(j.at("order")[i].get<std::string>());
    for (Flavor f : kFlavors) {
        o.points[static_cast<int>(f)] = j.at("points").at(to_string(f)).get<double>();
        o.mean_dice[static_cast<int>(f)] = j.at("mean_dice").at(to_string(f)).get<double>();
    }
    o.used_secondary = j.at("used_secondary").get<bool>();
    for (const auto& e : j.at("trail"))
        o.trail.push_back({e.at("test").get<std::string>(), e.at("statistic").get<double>(),
                           e.at("p_value").get<double>(), e.at("decision").get<std::string>()});
    return o;
}

inline nlohmann::json rankings_to_json(const std::vector<RankingOutcome>& rankings) {
    nlohmann::json j;
    j["rankings"] = nlohmann::json::array();
    for (const auto& o : rankings) j["rankings"].push_back(outcome_to_json(o));
    return j;
}

inline std::vector<RankingOutcome> rankings_from_json(const nlohmann::json& j) {
    std::vector<RankingOutcome> out;
    for (const auto& r : j.at("rankings")) out.push_back(outcome_from_json(r));
    return out;
}

}  // namespace cads::rank
