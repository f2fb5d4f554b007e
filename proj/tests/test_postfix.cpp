#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cads/postfix.hpp"

using namespace cads;
using namespace cads::postfix;

namespace {

MaskGrid mask_count(std::array<int, 3> dims, std::size_t count) {
    std::vector<uint8_t> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
    for (std::size_t i = 0; i < count; ++i) v[i] = 1;
    return MaskGrid(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, std::move(v));
}

LabelGrid empty_labels(std::array<int, 3> dims) {
    return LabelGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
}

std::size_t slice_area(const LabelGrid& g, int axis, int s, uint16_t label) {
    std::size_t n = 0;
    const auto& d = g.dims();
    std::array<int, 3> idx{};
    idx[axis] = s;
    const int ua = (axis == 0) ? 1 : 0;
    const int va = (axis == 2) ? 1 : 2;
    for (int b = 0; b < d[va]; ++b)
        for (int a = 0; a < d[ua]; ++a) {
            idx[ua] = a;
            idx[va] = b;
            n += g.at(idx[0], idx[1], idx[2]) == label;
        }
    return n;
}

}  // namespace

TEST_CASE("head gate thresholds at 2000 voxels inclusive") {
    CHECK_FALSE(head_gate(mask_count({20, 20, 20}, 1999)));
    CHECK(head_gate(mask_count({20, 20, 20}, 2000)));
    CHECK_FALSE(head_gate(mask_count({20, 20, 20}, 0)));
}

TEST_CASE("head_crop removes labels outside the centroid box") {
    const std::array<int, 3> dims{400, 32, 32};
    // brain: small blob centered at x=100
    auto brain = MaskGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
    {
        std::vector<uint8_t> v(brain.voxel_count(), 0);
        for (int k = 14; k < 18; ++k)
            for (int j = 14; j < 18; ++j)
                for (int i = 98; i < 102; ++i) v[brain.index(i, j, k)] = 1;
        brain = brain.with_values(std::move(v));
    }
    auto labels = empty_labels(dims);
    {
        std::vector<uint16_t> v(labels.voxel_count(), 0);
        v[labels.index(100, 15, 15)] = 3;  // inside
        v[labels.index(250, 15, 15)] = 4;  // centroid + (150,0,0): outside brain box
        labels = labels.with_values(std::move(v));
    }
    // centroid is (99.5,15.5,15.5) voxel-rounded to (100,16,16)
    const auto cropped = head_crop(labels, brain, HeadBox::brain);
    CHECK(cropped.at(100, 15, 15) == 3);
    CHECK(cropped.at(250, 15, 15) == 0);

    SECTION("head-neck box is wider along z only; x stays cropped") {
        const auto hn = head_crop(labels, brain, HeadBox::head_neck);
        CHECK(hn.at(250, 15, 15) == 0);
    }
    SECTION("all labels inside -> identity") {
        auto inside = empty_labels(dims);
        std::vector<uint16_t> v(inside.voxel_count(), 0);
        v[inside.index(100, 15, 15)] = 3;
        inside = inside.with_values(std::move(v));
        const auto c = head_crop(inside, brain, HeadBox::brain);
        CHECK(c == inside);
    }
    SECTION("box exceeding grid bounds is clamped without error") {
        CHECK_NOTHROW(head_crop(labels, brain, {1000, 1000, 1000}));
        const auto all = head_crop(labels, brain, {1000, 1000, 1000});
        CHECK(all == labels);
    }
    SECTION("crop never adds foreground") {
        const auto c = head_crop(labels, brain, HeadBox::brain);
        for (std::size_t i = 0; i < c.voxel_count(); ++i)
            if (c.values()[i]) CHECK(c.values()[i] == labels.values()[i]);
    }
    SECTION("empty brain mask") {
        const auto none = MaskGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
        CHECK_THROWS_AS(head_crop(labels, none, HeadBox::brain), EmptyCentroid);
    }
}

TEST_CASE("rib_relabel majority vote unifies a fragmented component") {
    auto ribs = empty_labels({20, 10, 10});
    std::vector<uint16_t> v(ribs.voxel_count(), 0);
    // one 26-connected bar: 60 voxels rib3 (83), 40 voxels rib4 (84)
    int placed = 0;
    for (int k = 0; k < 10 && placed < 100; ++k)
        for (int j = 0; j < 10 && placed < 100; ++j) {
            v[ribs.index(placed < 60 ? 5 : 5, j, k)] = placed < 60 ? 83 : 84;
            ++placed;
        }
    ribs = ribs.with_values(std::move(v));
    const auto fixed = rib_relabel(ribs);
    std::size_t rib3 = 0, rib4 = 0, total = 0;
    for (uint16_t x : fixed.values()) {
        rib3 += x == 83;
        rib4 += x == 84;
        total += x != 0;
    }
    CHECK(rib3 == 100);
    CHECK(rib4 == 0);
    CHECK(total == 100);  // support unchanged
}

TEST_CASE("rib_relabel keeps consistent input unchanged and components independent") {
    auto ribs = empty_labels({30, 8, 8});
    std::vector<uint16_t> v(ribs.voxel_count(), 0);
    for (int j = 0; j < 4; ++j) {
        v[ribs.index(2, j, 2)] = 81;   // component 1
        v[ribs.index(20, j, 2)] = 82;  // far-away component 2
    }
    ribs = ribs.with_values(std::move(v));
    const auto fixed = rib_relabel(ribs);
    CHECK(fixed == ribs);
}

TEST_CASE("rib_relabel ties go to the smaller label id") {
    auto ribs = empty_labels({10, 4, 4});
    std::vector<uint16_t> v(ribs.voxel_count(), 0);
    v[ribs.index(1, 1, 1)] = 90;
    v[ribs.index(2, 1, 1)] = 85;
    ribs = ribs.with_values(std::move(v));
    const auto fixed = rib_relabel(ribs);
    CHECK(fixed.at(1, 1, 1) == 85);
    CHECK(fixed.at(2, 1, 1) == 85);
}

namespace {

// builds a joint-retrieval scene: a rib bar, a spine column, and a tubular
// candidate blob of `size` voxels near both
struct JointScene {
    LabelGrid ribs;
    MaskGrid spine;
    MaskGrid tubular;
};

JointScene joint_scene(long candidate_size) {
    const std::array<int, 3> dims{64, 48, 96};
    auto ribs = LabelGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
    auto spine = MaskGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
    auto tub = MaskGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);

    std::vector<uint16_t> rv(ribs.voxel_count(), 0);
    std::vector<uint8_t> sv(spine.voxel_count(), 0);
    std::vector<uint8_t> tv(tub.voxel_count(), 0);

    // spine column at x in [30,34), full z extent
    for (int k = 0; k < 96; ++k)
        for (int j = 28; j < 34; ++j)
            for (int i = 30; i < 34; ++i) sv[spine.index(i, j, k)] = 1;
    // rib 85 bar to the right of the candidate region, near the blob start
    // so even a small candidate is within the assignment radius
    for (int i = 40; i < 60; ++i) rv[ribs.index(i, 30, 4)] = 85;

    // tubular candidate slab right next to the spine: x in {34,35,36} and the
    // spine's own j range, so every voxel is within Euclidean distance 3 of
    // the spine but none intersects it
    long placed = 0;
    for (int k = 2; k < 94 && placed < candidate_size; ++k)
        for (int j = 28; j < 34 && placed < candidate_size; ++j)
            for (int i = 34; i < 37 && placed < candidate_size; ++i) {
                tv[tub.index(i, j, k)] = 1;
                ++placed;
            }
    return {ribs.with_values(std::move(rv)), spine.with_values(std::move(sv)),
            tub.with_values(std::move(tv))};
}

}  // namespace

TEST_CASE("rib joint retrieval size filter is inclusive at [100, 1500]") {
    RibJointParams params;
    params.opening_radius = 0;       // keep the synthetic blob intact
    params.assignment_radius = 60.0; // generous for the synthetic scene

    for (const auto [size, kept] :
         {std::pair<long, bool>{99, false}, {100, true}, {1500, true}, {1501, false}}) {
        auto scene = joint_scene(size);
        const auto out = rib_joint_retrieve(scene.ribs, scene.spine, scene.tubular, params);
        std::size_t added = 0;
        for (std::size_t i = 0; i < out.voxel_count(); ++i)
            added += (out.values()[i] != 0) - (scene.ribs.values()[i] != 0);
        INFO("candidate size " << size);
        if (kept) {
            CHECK(added > 0);
        } else {
            CHECK(added == 0);
        }
    }
}

TEST_CASE("retrieved joints take the nearest rib label") {
    const std::array<int, 3> dims{64, 16, 16};
    auto ribs = LabelGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
    auto spine = MaskGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
    auto tub = MaskGrid::filled(dims, {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
    std::vector<uint16_t> rv(ribs.voxel_count(), 0);
    std::vector<uint8_t> sv(spine.voxel_count(), 0);
    std::vector<uint8_t> tv(tub.voxel_count(), 0);

    for (int k = 0; k < 16; ++k) sv[spine.index(2, 8, k)] = 1;  // thin spine line
    // candidate: 5x5x5 = 125 voxels at x in [4,8]
    for (int k = 5; k < 10; ++k)
        for (int j = 6; j < 11; ++j)
            for (int i = 4; i < 9; ++i) tv[tub.index(i, j, k)] = 1;
    // rib5 (85) one voxel to the right of the candidate; rib6 (86) ten voxels away
    rv[ribs.index(9, 8, 7)] = 85;
    rv[ribs.index(19, 8, 7)] = 86;
    ribs = ribs.with_values(std::move(rv));
    spine = spine.with_values(std::move(sv));
    tub = tub.with_values(std::move(tv));

    RibJointParams params;
    params.spine_dilation_radius = 3;
    params.opening_radius = 0;
    params.min_size = 1;
    params.max_size = 100000;
    params.assignment_radius = 50.0;
    const auto out = rib_joint_retrieve(ribs, spine, tub, params);

    std::size_t labeled85 = 0, labeled86 = 0;
    for (uint16_t x : out.values()) {
        labeled85 += x == 85;
        labeled86 += x == 86;
    }
    CHECK(labeled85 > 1);   // the joint got rib5's label
    CHECK(labeled86 == 1);  // rib6 untouched, nothing assigned to it

    SECTION("never removes rib voxels, adds only tubular-not-spine voxels") {
        for (std::size_t i = 0; i < out.voxel_count(); ++i) {
            if (ribs.values()[i]) CHECK(out.values()[i] == ribs.values()[i]);
            if (out.values()[i] && !ribs.values()[i]) {
                CHECK(tub.values()[i] == 1);
                CHECK(spine.values()[i] == 0);
            }
        }
    }
}

TEST_CASE("empty tubular mask is a no-op") {
    auto scene = joint_scene(200);
    const auto none = MaskGrid::filled(scene.ribs.dims(), {1.5, 1.5, 1.5}, {}, {0, 0, 0}, 0);
    const auto out = rib_joint_retrieve(scene.ribs, scene.spine, none);
    CHECK(out == scene.ribs);
}

TEST_CASE("sparse-slice interpolation") {
    const std::array<int, 3> dims{24, 24, 8};
    auto make_disk = [&](int slice, int radius, std::vector<uint16_t>& v, const LabelGrid& g,
                         uint16_t label = 1) {
        for (int j = 0; j < 24; ++j)
            for (int i = 0; i < 24; ++i) {
                const double dx = i - 11.5, dy = j - 11.5;
                if (dx * dx + dy * dy <= radius * radius + 1e-9)
                    v[g.index(i, j, slice)] = label;
            }
    };

    SECTION("identical masks on bounding slices copy through the gap") {
        auto g = empty_labels(dims);
        std::vector<uint16_t> v(g.voxel_count(), 0);
        make_disk(0, 5, v, g);
        make_disk(4, 5, v, g);
        g = g.with_values(std::move(v));
        const auto filled = interpolate_sparse_slices(g, 2, {0, 4});
        for (int s = 1; s < 4; ++s) CHECK(slice_area(filled, 2, s, 1) == slice_area(filled, 2, 0, 1));
        // annotated slices bit-exact
        CHECK(slice_area(filled, 2, 0, 1) == slice_area(g, 2, 0, 1));
        CHECK(slice_area(filled, 2, 4, 1) == slice_area(g, 2, 4, 1));
        // slices beyond the annotated range copy the nearest annotated slice
        for (int s = 5; s < 8; ++s) CHECK(slice_area(filled, 2, s, 1) == slice_area(g, 2, 4, 1));
    }

    SECTION("disk radius 2 -> 6 passes through ~4 at the midpoint") {
        auto g = empty_labels(dims);
        std::vector<uint16_t> v(g.voxel_count(), 0);
        make_disk(0, 2, v, g);
        make_disk(4, 6, v, g);
        g = g.with_values(std::move(v));
        const auto filled = interpolate_sparse_slices(g, 2, {0, 4});
        // mid-slice disk radius should be 4 +/- 1 voxel: compare areas
        const double r_mid = std::sqrt(static_cast<double>(slice_area(filled, 2, 2, 1)) / M_PI);
        CHECK(r_mid > 3.0);
        CHECK(r_mid < 5.0);
        // monotone growth across the gap
        for (int s = 1; s <= 4; ++s)
            CHECK(slice_area(filled, 2, s, 1) >= slice_area(filled, 2, s - 1, 1));
    }

    SECTION("label vanishing by mid-gap with monotone shrink") {
        auto g = empty_labels(dims);
        std::vector<uint16_t> v(g.voxel_count(), 0);
        make_disk(0, 5, v, g);  // absent on slice 4
        g = g.with_values(std::move(v));
        const auto filled = interpolate_sparse_slices(g, 2, {0, 4});
        for (int s = 1; s <= 4; ++s)
            CHECK(slice_area(filled, 2, s, 1) <= slice_area(filled, 2, s - 1, 1));
        CHECK(slice_area(filled, 2, 3, 1) == 0);
        CHECK(slice_area(filled, 2, 4, 1) == 0);
    }

    SECTION("two labels interpolate independently") {
        auto g = empty_labels(dims);
        std::vector<uint16_t> v(g.voxel_count(), 0);
        for (int i = 2; i < 6; ++i)
            for (int j = 2; j < 6; ++j) {
                v[g.index(i, j, 0)] = 2;
                v[g.index(i, j, 4)] = 2;
            }
        for (int i = 14; i < 20; ++i)
            for (int j = 14; j < 20; ++j) {
                v[g.index(i, j, 0)] = 7;
                v[g.index(i, j, 4)] = 7;
            }
        g = g.with_values(std::move(v));
        const auto filled = interpolate_sparse_slices(g, 2, {0, 4});
        CHECK(slice_area(filled, 2, 2, 2) == 16);
        CHECK(slice_area(filled, 2, 2, 7) == 36);
    }

    SECTION("fewer than two annotated slices rejected") {
        const auto g = empty_labels(dims);
        CHECK_THROWS_AS(interpolate_sparse_slices(g, 2, {0}), InsufficientSlices);
    }
}
