#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "cads/nifti.hpp"
#include "cads/standardize.hpp"

using namespace cads;

namespace {

std::filesystem::path tmpdir() {
    const auto d = std::filesystem::temp_directory_path() / "cads_nifti_test";
    std::filesystem::create_directories(d);
    return d;
}

LabelGrid random_labels(std::mt19937& rng, std::array<int, 3> dims,
                        const std::string& code = "RAS") {
    std::vector<uint16_t> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    for (auto& x : v) x = static_cast<uint16_t>(rng() % 300);
    std::uniform_real_distribution<double> sp(0.5, 3.0);
    return LabelGrid(dims, {sp(rng), sp(rng), sp(rng)}, Orientation::from_string(code),
                     {10.5, -20.25, 4.0}, std::move(v));
}

ScalarGrid random_scalars(std::mt19937& rng, std::array<int, 3> dims) {
    std::vector<float> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    std::uniform_real_distribution<float> d(-1000.f, 2000.f);
    for (auto& x : v) x = d(rng);
    return ScalarGrid(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, std::move(v));
}

}  // namespace

TEST_CASE("label grid round-trip is bit exact, plain and gzip") {
    std::mt19937 rng(51);
    for (int rep = 0; rep < 10; ++rep) {
        const auto g = random_labels(rng, {5 + static_cast<int>(rng() % 4), 6, 7});
        for (const char* ext : {".nii", ".nii.gz"}) {
            const auto path = (tmpdir() / ("rt" + std::to_string(rep) + ext)).string();
            nifti::write_nifti(g, path);
            const auto back = nifti::read_labels(path);
            CHECK(back.values() == g.values());
            CHECK(back.dims() == g.dims());
            for (int a = 0; a < 3; ++a)
                CHECK(back.spacing()[a] ==
                      Catch::Approx(g.spacing()[a]).epsilon(1e-7));  // float32 header
            CHECK(back.orientation() == g.orientation());
        }
    }
}

TEST_CASE("scalar grid round-trip preserves float payload bits") {
    std::mt19937 rng(52);
    for (int rep = 0; rep < 10; ++rep) {
        const auto g = random_scalars(rng, {6, 5, 4});
        const auto path = (tmpdir() / ("sc" + std::to_string(rep) + ".nii.gz")).string();
        nifti::write_nifti(g, path);
        const auto back = nifti::read_scalar(path);
        REQUIRE(back.values().size() == g.values().size());
        CHECK(std::memcmp(back.values().data(), g.values().data(),
                          g.values().size() * sizeof(float)) == 0);
    }
}

TEST_CASE("gzip and plain twins parse to the same grid") {
    std::mt19937 rng(53);
    const auto g = random_labels(rng, {8, 8, 8});
    const auto plain = (tmpdir() / "twin.nii").string();
    const auto zipped = (tmpdir() / "twin.nii.gz").string();
    nifti::write_nifti(g, plain);
    nifti::write_nifti(g, zipped);
    const auto a = nifti::read_labels(plain);
    const auto b = nifti::read_labels(zipped);
    CHECK(a == b);
}

TEST_CASE("orientation letters round-trip through the sform") {
    std::mt19937 rng(54);
    for (const char* code : {"RAS", "LPS", "SAR", "PIL", "IAL"}) {
        const auto g = random_labels(rng, {4, 5, 6}, code);
        const auto path = (tmpdir() / (std::string("or_") + code + ".nii")).string();
        nifti::write_nifti(g, path);
        const auto back = nifti::read_labels(path);
        CHECK(back.orientation().str() == code);
        // reorienting both to RAS yields identical volumes
        CHECK(reorient_to_ras(back).values() == reorient_to_ras(g).values());
    }
}

TEST_CASE("bad magic is NotNifti") {
    const auto path = (tmpdir() / "junk.nii").string();
    {
        std::ofstream out(path, std::ios::binary);
        std::vector<char> junk(400, 0x42);
        out.write(junk.data(), static_cast<std::streamsize>(junk.size()));
    }
    CHECK_THROWS_AS(nifti::read_labels(path), NotNifti);
    CHECK_THROWS_AS(nifti::read_scalar(path), NotNifti);
}

TEST_CASE("unsupported datatype reports its code") {
    std::mt19937 rng(55);
    const auto g = random_labels(rng, {3, 3, 3});
    const auto path = (tmpdir() / "dt64.nii").string();
    nifti::write_nifti(g, path);
    // patch the datatype field (offset 70) to float64 = 64
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(70);
        const int16_t dt = 64;
        f.write(reinterpret_cast<const char*>(&dt), 2);
    }
    try {
        nifti::read_labels(path);
        FAIL("expected UnsupportedDatatype");
    } catch (const UnsupportedDatatype& e) {
        CHECK(e.code() == 64);
    }
}

TEST_CASE("float payload rejected for labels but fine for scalars") {
    std::mt19937 rng(56);
    const auto g = random_scalars(rng, {4, 4, 4});
    const auto path = (tmpdir() / "floats.nii").string();
    nifti::write_nifti(g, path);
    CHECK_THROWS_AS(nifti::read_labels(path), UnsupportedDatatype);
    CHECK_NOTHROW(nifti::read_scalar(path));
}

TEST_CASE("truncated payload is CorruptFile") {
    std::mt19937 rng(57);
    const auto g = random_labels(rng, {6, 6, 6});
    const auto path = (tmpdir() / "trunc.nii").string();
    nifti::write_nifti(g, path);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 50);
    CHECK_THROWS_AS(nifti::read_labels(path), CorruptFile);
}

TEST_CASE("scl_slope and scl_inter apply to scalar reads") {
    std::mt19937 rng(58);
    const auto g = random_scalars(rng, {3, 3, 3});
    const auto path = (tmpdir() / "scaled.nii").string();
    nifti::write_nifti(g, path);
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        const float slope = 2.0f, inter = 10.0f;
        f.seekp(112);
        f.write(reinterpret_cast<const char*>(&slope), 4);
        f.write(reinterpret_cast<const char*>(&inter), 4);
    }
    const auto back = nifti::read_scalar(path);
    for (std::size_t i = 0; i < back.values().size(); ++i)
        CHECK(back.values()[i] == Catch::Approx(g.values()[i] * 2.0f + 10.0f).margin(1e-3));
}

TEST_CASE("uint8 and int16 payloads read into both grid kinds") {
    const auto path8 = (tmpdir() / "u8.nii").string();
    const auto path16 = (tmpdir() / "i16.nii").string();
    // craft a 2x2x2 uint8 file via the writer then patch datatype+payload
    LabelGrid g({2, 2, 2}, {1, 1, 1}, {}, {0, 0, 0}, {0, 1, 2, 3, 4, 5, 6, 7});
    nifti::write_nifti(g, path16);  // uint16
    {
        // uint8 variant: write header with datatype 2, bitpix 8, 8-byte payload
        std::vector<unsigned char> bytes(352 + 8, 0);
        std::ifstream in(path16, std::ios::binary);
        in.read(reinterpret_cast<char*>(bytes.data()), 352);
        bytes[70] = 2;  // datatype uint8
        bytes[71] = 0;
        bytes[72] = 8;  // bitpix
        bytes[73] = 0;
        for (int i = 0; i < 8; ++i) bytes[352 + i] = static_cast<unsigned char>(i);
        std::ofstream out(path8, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    const auto lab = nifti::read_labels(path8);
    CHECK(lab.values() == std::vector<uint16_t>{0, 1, 2, 3, 4, 5, 6, 7});
    const auto sca = nifti::read_scalar(path8);
    CHECK(sca.values()[7] == 7.f);

    // int16 with a negative value must be rejected as labels
    {
        std::fstream f(path16, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(70);
        const int16_t dt = 4;  // int16
        f.write(reinterpret_cast<const char*>(&dt), 2);
        f.seekp(352);
        const int16_t neg = -3;
        f.write(reinterpret_cast<const char*>(&neg), 2);
    }
    CHECK_THROWS_AS(nifti::read_labels(path16), CorruptFile);
    CHECK_NOTHROW(nifti::read_scalar(path16));
}

TEST_CASE("qform preferred over sform") {
    std::mt19937 rng(59);
    const auto g = random_labels(rng, {4, 4, 4});
    const auto path = (tmpdir() / "qform.nii").string();
    nifti::write_nifti(g, path);
    {
        // add a qform describing LPS while the sform says RAS: the reader
        // must pick the qform. quaternion (a=0,b=0,c=0,d=1) rotates x,y by
        // 180 degrees: diag(-1,-1,1) = LPS.
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        const int16_t qcode = 1;
        f.seekp(252);
        f.write(reinterpret_cast<const char*>(&qcode), 2);
        const float bcd[3] = {0.f, 0.f, 1.f};
        f.seekp(256);
        f.write(reinterpret_cast<const char*>(bcd), 12);
    }
    const auto back = nifti::read_labels(path);
    CHECK(back.orientation().str() == "LPS");
}
