#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cads/catalog.hpp"
#include "cads/metrics.hpp"
#include "cads/rank.hpp"
#include "cads/version.hpp"

namespace cads::io {

struct CaseEntry {
    std::string case_id;
    std::optional<std::string> image;
    std::optional<std::string> gt;
    std::optional<std::string> pred;
    std::map<rank::Flavor, std::string> predictions;
    std::string adapter = "identity";
    std::string split = "test";
    std::set<std::string> flags;
    std::optional<std::string> blur_region;
    std::optional<std::string> brain_mask;
    std::optional<std::string> spine_mask;
    std::optional<std::string> tubular;
    std::vector<int> annotated_slices;
};

struct Manifest {
    std::vector<CaseEntry> entries;
};

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

inline Manifest load_manifest(const std::string& path) {
    const auto j = load_json_file(path);
    if (!j.contains("cases") || !j["cases"].is_array())
        throw ParseError(path + ": manifest requires a 'cases' array");
    Manifest m;
    std::set<std::string> seen;
    for (const auto& c : j["cases"]) {
        CaseEntry e;
        if (!c.contains("case_id") || !c["case_id"].is_string())
            throw ParseError(path + ": every case needs a string 'case_id'");
        e.case_id = c["case_id"].get<std::string>();
        if (!seen.insert(e.case_id).second)
            throw DuplicateCase(path + ": duplicate case_id '" + e.case_id + "'");

        auto opt_str = [&](const char* key) -> std::optional<std::string> {
            if (!c.contains(key)) return std::nullopt;
            if (!c[key].is_string())
                throw ParseError(path + ": case " + e.case_id + ": field '" + key +
                                 "' must be a string");
            return c[key].get<std::string>();
        };
        e.image = opt_str("image");
        e.gt = opt_str("gt");
        e.pred = opt_str("pred");
        e.blur_region = opt_str("blur_region");
        e.brain_mask = opt_str("brain_mask");
        e.spine_mask = opt_str("spine_mask");
        e.tubular = opt_str("tubular");
        if (const auto a = opt_str("adapter")) e.adapter = *a;
        if (const auto s = opt_str("split")) e.split = *s;
        if (e.split != "train" && e.split != "test")
            throw ParseError(path + ": case " + e.case_id + ": split must be train|test");

        if (c.contains("predictions")) {
            if (!c["predictions"].is_object())
                throw ParseError(path + ": case " + e.case_id + ": 'predictions' must be an object");
            for (const auto& [key, value] : c["predictions"].items())
                e.predictions[rank::flavor_from_string(key)] = value.get<std::string>();
        }
        if (c.contains("flags"))
            for (const auto& f : c["flags"]) e.flags.insert(f.get<std::string>());
        if (c.contains("annotated_slices"))
            for (const auto& s : c["annotated_slices"]) e.annotated_slices.push_back(s.get<int>());
        m.entries.push_back(std::move(e));
    }
    return m;
}

struct MergeEntry {
    std::vector<std::string> sources;
    std::string target;
};

struct LesionMerge {
    int lesion_id = 0;  // dataset-specific raw label found in GT files
    std::string organ;  // catalog name it folds into
};

struct DatasetAdapter {
    std::string name = "identity";
    std::vector<MergeEntry> merge_map;
    std::set<std::string> exclusion_flags;
    bool sparse_slices = false;
    std::vector<LesionMerge> lesion_merge;
};

inline DatasetAdapter load_adapter(const std::string& path) {
    const auto j = load_json_file(path);
    DatasetAdapter a;
    if (j.contains("name")) a.name = j["name"].get<std::string>();
    if (j.contains("merge_map"))
        for (const auto& e : j["merge_map"]) {
            MergeEntry m;
            m.target = e.at("target").get<std::string>();
            for (const auto& s : e.at("sources")) m.sources.push_back(s.get<std::string>());
            if (m.sources.empty())
                throw ParseError(path + ": merge entry '" + m.target + "' has no sources");
            a.merge_map.push_back(std::move(m));
        }
    if (j.contains("exclusion_flags"))
        for (const auto& f : j["exclusion_flags"]) a.exclusion_flags.insert(f.get<std::string>());
    if (j.contains("sparse_slices")) a.sparse_slices = j["sparse_slices"].get<bool>();
    if (j.contains("lesion_merge"))
        for (const auto& e : j["lesion_merge"])
            a.lesion_merge.push_back(
                {e.at("lesion_id").get<int>(), e.at("organ").get<std::string>()});
    return a;
}

// Every label name an adapter references must resolve against the catalog;
// merge targets may instead be composite names they themselves declare.
inline void validate_adapter(const DatasetAdapter& a, const StructureCatalog& catalog) {
    for (const auto& m : a.merge_map)
        for (const auto& s : m.sources)
            if (!catalog.find_name(s))
                throw AdapterError("adapter '" + a.name + "' merges unknown label '" + s + "'");
    for (const auto& l : a.lesion_merge)
        if (!catalog.find_name(l.organ))
            throw AdapterError("adapter '" + a.name + "' folds lesions into unknown organ '" +
                               l.organ + "'");
}

// --- metric reports ---

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string opt_cell(const std::optional<double>& v) {
    return v ? fmt(*v) : std::string();
}

}  // namespace detail

inline void write_report_csv(const std::vector<MetricRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw IoError("cannot write report: " + path);
    out << "case_id,structure_id,structure,status,flagged,dice,nsd,hd_mm,hd95_mm,tpr,"
           "error_volume_pct\n";
    for (const auto& r : records)
        out << r.case_id << ',' << r.structure_id << ',' << r.structure_name << ','
            << to_string(r.status) << ',' << (r.flagged ? 1 : 0) << ',' << detail::opt_cell(r.dice)
            << ',' << detail::opt_cell(r.nsd) << ',' << detail::opt_cell(r.hd) << ','
            << detail::opt_cell(r.hd95) << ',' << detail::opt_cell(r.tpr) << ','
            << detail::opt_cell(r.error_volume) << '\n';
}

inline nlohmann::json record_to_json(const MetricRecord& r) {
    nlohmann::json j;
    j["case_id"] = r.case_id;
    j["structure_id"] = r.structure_id;
    j["structure"] = r.structure_name;
    j["status"] = to_string(r.status);
    j["flagged"] = r.flagged;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("dice", r.dice);
    put("nsd", r.nsd);
    put("hd_mm", r.hd);
    put("hd95_mm", r.hd95);
    put("tpr", r.tpr);
    put("error_volume_pct", r.error_volume);
    return j;
}

inline MetricRecord record_from_json(const nlohmann::json& j) {
    MetricRecord r;
    r.case_id = j.at("case_id").get<std::string>();
    r.structure_id = j.at("structure_id").get<int>();
    r.structure_name = j.at("structure").get<std::string>();
    r.status = eval_status_from_string(j.at("status").get<std::string>());
    r.flagged = j.at("flagged").get<bool>();
    auto get = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key)) return std::nullopt;
        return j[key].get<double>();
    };
    r.dice = get("dice");
    r.nsd = get("nsd");
    r.hd = get("hd_mm");
    r.hd95 = get("hd95_mm");
    r.tpr = get("tpr");
    r.error_volume = get("error_volume_pct");
    return r;
}

inline nlohmann::json report_to_json(const std::vector<MetricRecord>& records,
                                     const nlohmann::json& aggregates,
                                     const nlohmann::json& run_meta) {
    nlohmann::json j;
    j["run"] = run_meta;
    j["run"]["tool"] = kToolName;
    j["run"]["version"] = kVersion;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) j["records"].push_back(record_to_json(r));
    j["aggregates"] = aggregates;
    return j;
}

inline std::vector<MetricRecord> records_from_report_json(const nlohmann::json& j) {
    std::vector<MetricRecord> out;
    for (const auto& r : j.at("records")) out.push_back(record_from_json(r));
    return out;
}

// FNV-1a over file bytes: content hash echoed into run metadata.
inline std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw IoError("cannot hash file: " + path);
    uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (got < static_cast<std::streamsize>(sizeof buf)) break;
    }
    char out[32];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace cads::io
