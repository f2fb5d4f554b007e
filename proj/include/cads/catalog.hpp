#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cads/csv.hpp"
#include "cads/errors.hpp"

namespace cads {

struct StructureDef {
    int id = 0;             // 1..167
    std::string name;
    int group = 0;          // anatomical group 1..9
    long occurrence = 0;    // cases containing the structure across the dataset
    double median_volume = 0.0;  // voxels at the 1.5mm grid
    std::vector<std::string> aliases;
};

// Registry of the 167 segmentation targets, shipped as a versioned CSV.
class StructureCatalog {
public:
    StructureCatalog() = default;

    explicit StructureCatalog(std::vector<StructureDef> defs) : defs_(std::move(defs)) {
        for (std::size_t i = 0; i < defs_.size(); ++i) {
            const auto& d = defs_[i];
            if (d.group < 1 || d.group > 9)
                throw ParseError("structure " + d.name + ": group " + std::to_string(d.group) +
                                 " outside 1..9");
            if (!(d.median_volume > 0))
                throw ParseError("structure " + d.name + ": median volume must be > 0");
            if (!by_id_.emplace(d.id, i).second)
                throw ParseError("duplicate structure id " + std::to_string(d.id));
            if (!by_name_.emplace(d.name, i).second)
                throw ParseError("duplicate structure name " + d.name);
            for (const auto& a : d.aliases)
                if (!a.empty() && !by_name_.emplace(a, i).second)
                    throw ParseError("duplicate structure alias " + a);
        }
    }

    static StructureCatalog load_csv(const std::string& path) {
        const auto t = csv::read_file(path);
        const int c_id = t.column("id");
        const int c_name = t.column("name");
        const int c_group = t.column("group");
        const int c_occ = t.column("occurrence");
        const int c_vol = t.column("median_volume");
        const int c_alias = t.column("aliases");
        std::vector<StructureDef> defs;
        defs.reserve(t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            const std::string ctx = path + " row " + std::to_string(r + 2);
            StructureDef d;
            d.id = static_cast<int>(csv::parse_long(row[c_id], ctx));
            d.name = row[c_name];
            d.group = static_cast<int>(csv::parse_long(row[c_group], ctx));
            d.occurrence = csv::parse_long(row[c_occ], ctx);
            d.median_volume = csv::parse_double(row[c_vol], ctx);
            if (!row[c_alias].empty()) {
                std::string cur;
                for (char c : row[c_alias]) {
                    if (c == ';') {
                        if (!cur.empty()) d.aliases.push_back(cur);
                        cur.clear();
                    } else {
                        cur.push_back(c);
                    }
                }
                if (!cur.empty()) d.aliases.push_back(cur);
            }
            defs.push_back(std::move(d));
        }
        return StructureCatalog(std::move(defs));
    }

    const std::vector<StructureDef>& structures() const { return defs_; }
    std::size_t size() const { return defs_.size(); }
    bool contains(int id) const { return by_id_.count(id) != 0; }

    const StructureDef& by_id(int id) const {
        const auto it = by_id_.find(id);
        if (it == by_id_.end())
            throw UnknownStructure("structure id " + std::to_string(id) + " not in catalog");
        return defs_[it->second];
    }

    // name or alias lookup
    std::optional<int> find_name(const std::string& name) const {
        const auto it = by_name_.find(name);
        if (it == by_name_.end()) return std::nullopt;
        return defs_[it->second].id;
    }

    int resolve(const std::string& name) const {
        const auto id = find_name(name);
        if (!id) throw UnknownStructure("structure name '" + name + "' not in catalog");
        return *id;
    }

private:
    std::vector<StructureDef> defs_;
    std::map<int, std::size_t> by_id_;
    std::map<std::string, std::size_t> by_name_;
};

// Inverse-occurrence oversampling weights, normalized to sum 1.
struct SamplingWeights {
    std::map<int, double> weight;  // structure id -> weight
};

inline SamplingWeights sampling_weights(const StructureCatalog& catalog) {
    SamplingWeights w;
    double total = 0.0;
    for (const auto& d : catalog.structures()) {
        if (d.occurrence <= 0)
            throw DegenerateOccurrence("structure " + d.name + " has zero occurrence");
        total += 1.0 / static_cast<double>(d.occurrence);
    }
    for (const auto& d : catalog.structures())
        w.weight[d.id] = (1.0 / static_cast<double>(d.occurrence)) / total;
    return w;
}

}  // namespace cads
