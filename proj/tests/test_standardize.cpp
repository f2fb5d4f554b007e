#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "cads/grid.hpp"
#include "cads/standardize.hpp"

using namespace cads;

namespace {

ScalarGrid random_scalar(std::array<int, 3> dims, std::mt19937& rng,
                         std::array<double, 3> spacing = {1, 1, 1}) {
    std::uniform_real_distribution<float> d(-1000.f, 1000.f);
    std::vector<float> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    for (auto& x : v) x = d(rng);
    return ScalarGrid(dims, spacing, {}, {0, 0, 0}, std::move(v));
}

// dense triple-loop Gaussian convolution with half-sample reflection
ScalarGrid blur_oracle(const ScalarGrid& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= sum;
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };
    const auto& d = img.dims();
    std::vector<float> out(img.voxel_count());
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                double acc = 0;
                for (int dz = -radius; dz <= radius; ++dz)
                    for (int dy = -radius; dy <= radius; ++dy)
                        for (int dx = -radius; dx <= radius; ++dx)
                            acc += kernel[dx + radius] * kernel[dy + radius] * kernel[dz + radius] *
                                   img.at(reflect(i + dx, d[0]), reflect(j + dy, d[1]),
                                          reflect(k + dz, d[2]));
                out[img.index(i, j, k)] = static_cast<float>(acc);
            }
    return img.with_values(std::move(out));
}

}  // namespace

TEST_CASE("resample identity at target spacing") {
    std::mt19937 rng(11);
    const auto g = random_scalar({4, 5, 6}, rng, {1.5, 1.5, 1.5});
    CHECK(resample_isotropic(g, 1.5, Interp::trilinear) == g);
    CHECK(resample_isotropic(g, 1.5, Interp::nearest) == g);
}

TEST_CASE("nearest resample 3.0mm -> 1.5mm matches per-voxel oracle") {
    std::mt19937 rng(12);
    std::vector<uint16_t> v(64);
    for (auto& x : v) x = static_cast<uint16_t>(rng() % 50);
    const LabelGrid g({4, 4, 4}, {3, 3, 3}, {}, {0, 0, 0}, v);
    const auto r = resample_isotropic(g, 1.5, Interp::nearest);
    REQUIRE(r.dims() == std::array<int, 3>{8, 8, 8});
    REQUIRE(r.spacing() == std::array<double, 3>{1.5, 1.5, 1.5});

    // oracle: nearest input center to each output center, ties to lower index
    auto nearest = [](int o) {
        const double u = (o + 0.5) * 1.5 / 3.0 - 0.5;
        int best = 0;
        double best_d = 1e300;
        for (int i = 0; i < 4; ++i) {
            const double dist = std::abs(u - i);
            if (dist < best_d - 1e-12) {
                best_d = dist;
                best = i;
            }
        }
        return best;
    };
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i)
                CHECK(r.at(i, j, k) == g.at(nearest(i), nearest(j), nearest(k)));
}

TEST_CASE("nearest resample never invents labels") {
    std::mt19937 rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        std::array<int, 3> dims{3 + static_cast<int>(rng() % 4), 4, 5};
        std::vector<uint16_t> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
        for (auto& x : v) x = static_cast<uint16_t>(rng() % 6);
        std::uniform_real_distribution<double> sp(0.7, 4.0);
        const LabelGrid g(dims, {sp(rng), sp(rng), sp(rng)}, {}, {0, 0, 0}, v);
        const auto r = resample_isotropic(g, 1.5, Interp::nearest);
        const std::set<uint16_t> in(g.values().begin(), g.values().end());
        for (uint16_t x : r.values()) CHECK(in.count(x) == 1);
    }
}

TEST_CASE("trilinear midpoint of a two-voxel ramp") {
    const ScalarGrid g({2, 1, 1}, {3, 3, 3}, {}, {0, 0, 0}, {0.f, 100.f});
    const auto r = resample_isotropic(g, 2.0, Interp::trilinear);
    REQUIRE(r.dims()[0] == 3);
    CHECK(r.at(1, 0, 0) == Catch::Approx(50.0).margin(1e-6));
}

TEST_CASE("trilinear on labels is rejected") {
    const LabelGrid g({2, 2, 2}, {3, 3, 3}, {}, {0, 0, 0}, std::vector<uint16_t>(8, 1));
    CHECK_THROWS_AS(resample_isotropic(g, 1.5, Interp::trilinear), InvalidInterpolation);
}

TEST_CASE("simplify_affine zeroes origin and is idempotent") {
    std::mt19937 rng(14);
    const auto g0 = random_scalar({3, 3, 3}, rng, {1.5, 1.5, 1.5});
    const auto g = g0.with_origin({-250, -250, -400});
    const auto [s, summary] = simplify_affine(g);
    CHECK(s.origin() == std::array<double, 3>{0, 0, 0});
    CHECK(s.values() == g.values());
    CHECK(summary.scale == std::array<double, 3>{1.5, 1.5, 1.5});
    CHECK(summary.shear == std::array<double, 3>{0, 0, 0});
    CHECK(summary.translation_removed);
    CHECK(summary.rotation_removed);
    const auto [s2, summary2] = simplify_affine(s);
    CHECK(s2 == s);
}

TEST_CASE("blur_region leaves voxels outside the region bit-identical") {
    std::mt19937 rng(15);
    const auto img = random_scalar({8, 8, 8}, rng);
    auto region = MaskGrid::filled({8, 8, 8}, {1, 1, 1}, {}, {0, 0, 0}, 0);
    SECTION("empty region is the identity") {
        const auto out = blur_region(img, region, 5.0);
        CHECK(out == img);
    }
    SECTION("half region: outside untouched") {
        std::vector<uint8_t> m(512, 0);
        for (std::size_t i = 0; i < 256; ++i) m[i] = 1;
        const auto out = blur_region(img, region.with_values(std::move(m)), 2.0);
        for (std::size_t i = 256; i < 512; ++i) CHECK(out.values()[i] == img.values()[i]);
        CHECK(out.values()[0] != img.values()[0]);
    }
}

TEST_CASE("blur of a constant image is the identity") {
    const auto img = ScalarGrid::filled({6, 6, 6}, {1, 1, 1}, {}, {0, 0, 0}, 77.f);
    const auto region = MaskGrid::filled({6, 6, 6}, {1, 1, 1}, {}, {0, 0, 0}, 1);
    const auto out = blur_region(img, region, 5.0);
    for (std::size_t i = 0; i < out.voxel_count(); ++i)
        CHECK(out.values()[i] == Catch::Approx(77.f).margin(1e-6));
}

TEST_CASE("blur matches the dense convolution oracle") {
    std::mt19937 rng(16);
    SECTION("single bright voxel, sigma 5") {
        auto img = ScalarGrid::filled({9, 9, 9}, {1, 1, 1}, {}, {0, 0, 0}, 0.f);
        std::vector<float> v(img.voxel_count(), 0.f);
        v[img.index(4, 4, 4)] = 1000.f;
        img = img.with_values(std::move(v));
        const auto region = MaskGrid::filled({9, 9, 9}, {1, 1, 1}, {}, {0, 0, 0}, 1);
        const auto got = blur_region(img, region, 5.0);
        const auto want = blur_oracle(img, 5.0);
        for (std::size_t i = 0; i < got.voxel_count(); ++i)
            CHECK(got.values()[i] == Catch::Approx(want.values()[i]).margin(1e-6));
    }
    SECTION("random image, full region equals global blur (<=16^3, tol 1e-6)") {
        const auto img = random_scalar({7, 6, 5}, rng);
        const auto region = MaskGrid::filled({7, 6, 5}, {1, 1, 1}, {}, {0, 0, 0}, 1);
        const auto got = blur_region(img, region, 1.3);
        const auto want = blur_oracle(img, 1.3);
        for (std::size_t i = 0; i < got.voxel_count(); ++i)
            CHECK(got.values()[i] == Catch::Approx(want.values()[i]).margin(1e-6));
    }
}

TEST_CASE("blur_region geometry mismatch") {
    const auto img = ScalarGrid::filled({4, 4, 4}, {1, 1, 1}, {}, {0, 0, 0}, 0.f);
    const auto region = MaskGrid::filled({4, 4, 5}, {1, 1, 1}, {}, {0, 0, 0}, 1);
    CHECK_THROWS_AS(blur_region(img, region), GridMismatch);
}
