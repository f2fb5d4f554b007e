#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "cads/io.hpp"

using namespace cads;

namespace {

std::filesystem::path tmpdir() {
    const auto d = std::filesystem::temp_directory_path() / "cads_io_test";
    std::filesystem::create_directories(d);
    return d;
}

std::string write_file(const std::string& name, const std::string& content) {
    const auto path = (tmpdir() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("manifest parses cases with optional fields") {
    const auto path = write_file("manifest.json", R"({
      "cases": [
        {"case_id": "c1", "image": "a.nii.gz", "gt": "g.nii.gz",
         "pred": "p.nii.gz", "split": "test", "flags": ["L6"],
         "predictions": {"GT": "x.nii.gz", "Pseudo": "y.nii.gz"},
         "annotated_slices": [0, 5, 10]},
        {"case_id": "c2"}
      ]})");
    const auto m = io::load_manifest(path);
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[0].case_id == "c1");
    CHECK(m.entries[0].image.value() == "a.nii.gz");
    CHECK(m.entries[0].flags.count("L6") == 1);
    CHECK(m.entries[0].predictions.at(rank::Flavor::GT) == "x.nii.gz");
    CHECK(m.entries[0].annotated_slices == std::vector<int>{0, 5, 10});
    CHECK(m.entries[1].split == "test");
    CHECK_FALSE(m.entries[1].gt.has_value());
}

TEST_CASE("empty manifest is valid") {
    const auto path = write_file("empty.json", R"({"cases": []})");
    CHECK(io::load_manifest(path).entries.empty());
}

TEST_CASE("duplicate case ids rejected") {
    const auto path = write_file("dup.json", R"({
      "cases": [{"case_id": "c1"}, {"case_id": "c1"}]})");
    CHECK_THROWS_AS(io::load_manifest(path), DuplicateCase);
}

TEST_CASE("manifest schema violations name the field") {
    const auto bad_split = write_file("bad1.json", R"({
      "cases": [{"case_id": "c1", "split": "validation"}]})");
    CHECK_THROWS_AS(io::load_manifest(bad_split), ParseError);
    const auto bad_case = write_file("bad2.json", R"({"cases": [{"gt": "x"}]})");
    CHECK_THROWS_AS(io::load_manifest(bad_case), ParseError);
    const auto bad_json = write_file("bad3.json", "{nope");
    CHECK_THROWS_AS(io::load_manifest(bad_json), ParseError);
}

TEST_CASE("adapter parses and validates against the catalog") {
    const auto path = write_file("adapter.json", R"({
      "name": "kits_like",
      "merge_map": [{"sources": ["kidney_L", "kidney_R"], "target": "kidneys"}],
      "exclusion_flags": ["L6", "T13"],
      "sparse_slices": false,
      "lesion_merge": [{"lesion_id": 201, "organ": "liver"}]})");
    const auto a = io::load_adapter(path);
    CHECK(a.name == "kits_like");
    CHECK(a.merge_map.size() == 1);
    CHECK(a.exclusion_flags == std::set<std::string>{"L6", "T13"});
    CHECK(a.lesion_merge[0].lesion_id == 201);

    StructureCatalog catalog({{2, "kidney_R", 1, 10, 5.0, {}},
                              {3, "kidney_L", 1, 10, 5.0, {}},
                              {5, "liver", 1, 10, 5.0, {}}});
    CHECK_NOTHROW(io::validate_adapter(a, catalog));

    StructureCatalog no_liver({{2, "kidney_R", 1, 10, 5.0, {}}, {3, "kidney_L", 1, 10, 5.0, {}}});
    CHECK_THROWS_AS(io::validate_adapter(a, no_liver), AdapterError);
}

TEST_CASE("metric report CSV and JSON round-trip") {
    std::vector<MetricRecord> records;
    MetricRecord a;
    a.case_id = "c1";
    a.structure_id = 5;
    a.structure_name = "liver";
    a.status = EvalStatus::evaluated;
    a.dice = 0.9375;
    a.nsd = 1.0;
    a.hd = 3.0;
    a.hd95 = 1.5;
    a.tpr = 0.95;
    a.error_volume = -6.25;
    records.push_back(a);
    MetricRecord b;
    b.case_id = "c1";
    b.structure_id = 37;
    b.structure_name = "vertebrae_C5";
    b.status = EvalStatus::penalized;
    b.flagged = true;
    b.dice = 0.0;
    b.nsd = 0.0;
    b.hd = 259.8076211353316;
    b.hd95 = 259.8076211353316;
    b.tpr = 0.0;
    b.error_volume = -100.0;
    records.push_back(b);
    MetricRecord c;
    c.case_id = "c2";
    c.structure_id = 106;
    c.structure_name = "larynx";
    c.status = EvalStatus::excluded;
    records.push_back(c);

    SECTION("JSON round-trip reproduces every record") {
        const auto j = io::report_to_json(records, nlohmann::json::array(), {{"seed", 7}});
        CHECK(j["run"]["tool"] == "cads");
        CHECK(j["run"]["seed"] == 7);
        const auto back = io::records_from_report_json(j);
        REQUIRE(back.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(back[i].case_id == records[i].case_id);
            CHECK(back[i].structure_id == records[i].structure_id);
            CHECK(back[i].status == records[i].status);
            CHECK(back[i].flagged == records[i].flagged);
            CHECK(back[i].dice == records[i].dice);
            CHECK(back[i].nsd == records[i].nsd);
            CHECK(back[i].hd == records[i].hd);
            CHECK(back[i].hd95 == records[i].hd95);
            CHECK(back[i].tpr == records[i].tpr);
            CHECK(back[i].error_volume == records[i].error_volume);
        }
        // excluded record carries no metric numbers
        CHECK_FALSE(j["records"][2].contains("dice"));
    }

    SECTION("CSV has one row per record, excluded rows empty-celled") {
        const auto path = (tmpdir() / "report.csv").string();
        io::write_report_csv(records, path);
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line.find("case_id") == 0);
        int rows = 0;
        bool saw_excluded = false;
        while (std::getline(in, line)) {
            ++rows;
            if (line.find("excluded") != std::string::npos) {
                saw_excluded = true;
                CHECK(line.find("excluded,0,,,,,,") != std::string::npos);
            }
        }
        CHECK(rows == 3);
        CHECK(saw_excluded);
    }
}

TEST_CASE("file hash is stable and content-sensitive") {
    const auto p1 = write_file("h1.txt", "hello");
    const auto p2 = write_file("h2.txt", "hello");
    const auto p3 = write_file("h3.txt", "hellp");
    CHECK(io::file_hash(p1) == io::file_hash(p2));
    CHECK(io::file_hash(p1) != io::file_hash(p3));
    CHECK(io::file_hash(p1).size() == 16);
}
