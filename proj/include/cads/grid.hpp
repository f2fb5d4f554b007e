#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cads/errors.hpp"

namespace cads {

// Axis orientation code: one letter per index axis giving the anatomical
// direction in which that index increases. Canonical is "RAS". The 48 valid
// codes are the signed permutations of the three world axes
// (R/L <-> x, A/P <-> y, S/I <-> z).
class Orientation {
public:
    Orientation() : code_{'R', 'A', 'S'} {}

    static Orientation from_string(std::string_view s) {
        if (s.size() != 3) throw InvalidOrientation("orientation code must have 3 letters: " + std::string(s));
        Orientation o;
        bool seen[3] = {false, false, false};
        for (int i = 0; i < 3; ++i) {
            const int ax = world_axis(s[i]);
            if (ax < 0) throw InvalidOrientation("bad orientation letter '" + std::string(1, s[i]) + "'");
            if (seen[ax]) throw InvalidOrientation("orientation repeats a world axis: " + std::string(s));
            seen[ax] = true;
            o.code_[i] = s[i];
        }
        return o;
    }

    std::string str() const { return std::string(code_.begin(), code_.end()); }

    // World axis (0=x/RL, 1=y/AP, 2=z/SI) addressed by index axis i.
    int world_axis_of(int i) const { return world_axis(code_[i]); }
    // +1 when the index increases toward R/A/S, -1 toward L/P/I.
    int sign_of(int i) const { return is_positive(code_[i]) ? 1 : -1; }

    bool is_ras() const { return code_[0] == 'R' && code_[1] == 'A' && code_[2] == 'S'; }
    bool operator==(const Orientation& o) const { return code_ == o.code_; }

private:
    static int world_axis(char c) {
        switch (c) {
            case 'R': case 'L': return 0;
            case 'A': case 'P': return 1;
            case 'S': case 'I': return 2;
            default: return -1;
        }
    }
    static bool is_positive(char c) { return c == 'R' || c == 'A' || c == 'S'; }

    std::array<char, 3> code_;
};

// Dense axis-aligned voxel grid. Values are immutable after construction;
// all operations return new grids.
template <typename T>
class VoxelGrid {
public:
    using value_type = T;

    VoxelGrid() : dims_{0, 0, 0}, spacing_{1, 1, 1}, origin_{0, 0, 0} {}

    VoxelGrid(std::array<int, 3> dims, std::array<double, 3> spacing, Orientation orientation,
              std::array<double, 3> origin, std::vector<T> values)
        : dims_(dims), spacing_(spacing), orientation_(orientation), origin_(origin),
          values_(std::move(values)) {
        for (int a = 0; a < 3; ++a) {
            if (dims_[a] < 1) throw Error("grid dims must be >= 1");
            if (!(spacing_[a] > 0.0)) throw Error("grid spacing must be > 0");
        }
        if (values_.size() != voxel_count())
            throw Error("grid value count " + std::to_string(values_.size()) +
                        " does not match dims product " + std::to_string(voxel_count()));
    }

    static VoxelGrid filled(std::array<int, 3> dims, std::array<double, 3> spacing,
                            Orientation orientation, std::array<double, 3> origin, T fill) {
        const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
        return VoxelGrid(dims, spacing, orientation, origin, std::vector<T>(n, fill));
    }

    const std::array<int, 3>& dims() const { return dims_; }
    const std::array<double, 3>& spacing() const { return spacing_; }
    const Orientation& orientation() const { return orientation_; }
    const std::array<double, 3>& origin() const { return origin_; }
    const std::vector<T>& values() const { return values_; }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    }

    // Linear index, axis 0 fastest.
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) +
               static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
    }

    T at(int i, int j, int k) const { return values_[index(i, j, k)]; }

    bool in_bounds(int i, int j, int k) const {
        return i >= 0 && i < dims_[0] && j >= 0 && j < dims_[1] && k >= 0 && k < dims_[2];
    }

    bool same_geometry(const VoxelGrid& o) const {
        return dims_ == o.dims_ && spacing_ == o.spacing_ && origin_ == o.origin_ &&
               orientation_ == o.orientation_;
    }

    template <typename U>
    bool same_geometry(const VoxelGrid<U>& o) const {
        return dims_ == o.dims() && spacing_ == o.spacing() && origin_ == o.origin() &&
               orientation_ == o.orientation();
    }

    VoxelGrid with_values(std::vector<T> values) const {
        return VoxelGrid(dims_, spacing_, orientation_, origin_, std::move(values));
    }

    VoxelGrid with_origin(std::array<double, 3> origin) const {
        return VoxelGrid(dims_, spacing_, orientation_, origin, values_);
    }

    bool operator==(const VoxelGrid& o) const {
        return same_geometry(o) && values_ == o.values_;
    }

private:
    std::array<int, 3> dims_;
    std::array<double, 3> spacing_;
    Orientation orientation_;
    std::array<double, 3> origin_;
    std::vector<T> values_;
};

using ScalarGrid = VoxelGrid<float>;     // CT intensities (HU)
using LabelGrid = VoxelGrid<uint16_t>;   // structure-label indices, 0 = background
using MaskGrid = VoxelGrid<uint8_t>;     // binary masks

template <typename T>
void require_same_geometry(const VoxelGrid<T>& a, const VoxelGrid<T>& b, const char* what) {
    if (!a.same_geometry(b)) throw GridMismatch(std::string(what) + ": grids do not share geometry");
}

template <typename T, typename U>
void require_same_geometry(const VoxelGrid<T>& a, const VoxelGrid<U>& b, const char* what) {
    if (!a.template same_geometry<U>(b)) throw GridMismatch(std::string(what) + ": grids do not share geometry");
}

// Binary mask of one structure.
inline MaskGrid label_mask(const LabelGrid& labels, uint16_t structure_id) {
    std::vector<uint8_t> out(labels.voxel_count());
    const auto& v = labels.values();
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] == structure_id) ? 1 : 0;
    return MaskGrid(labels.dims(), labels.spacing(), labels.orientation(), labels.origin(), std::move(out));
}

inline std::size_t foreground_count(const MaskGrid& m) {
    std::size_t n = 0;
    for (uint8_t v : m.values()) n += (v != 0);
    return n;
}

}  // namespace cads
