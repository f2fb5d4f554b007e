#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "cads/grid.hpp"

namespace cads {

constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

// finite stand-in for +inf inside the envelope passes; true infinities make
// the parabola intersections NaN
constexpr double kBigDist = 1e30;

// Felzenszwalb-Huttenlocher lower envelope of parabolas; exact squared
// distances. `w2` is the squared per-step weight (spacing^2).
inline void dt1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z, int n, double w2) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + w2 * q * q) - (f[p] + w2 * p * p)) / (2.0 * w2 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = w2 * (q - v[k]) * (q - v[k]) + f[v[k]];
    }
}

}  // namespace detail

// Exact squared Euclidean distance (mm^2 under `spacing`, voxel units when
// spacing is {1,1,1}) from every voxel to the nearest seed voxel. Seeds are
// the nonzero entries; returns +inf everywhere when there are none.
inline std::vector<double> squared_edt_3d(const std::vector<uint8_t>& seeds,
                                          const std::array<int, 3>& dims,
                                          const std::array<double, 3>& spacing = {1, 1, 1}) {
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = seeds[i] ? 0.0 : detail::kBigDist;

    const int maxdim = std::max({dims[0], dims[1], dims[2]});
    std::vector<double> f(maxdim), d(maxdim), z(maxdim + 1);
    std::vector<int> v(maxdim);
    const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(dims[0]),
                                            static_cast<std::size_t>(dims[0]) * dims[1]};

    for (int axis = 0; axis < 3; ++axis) {
        const int len = dims[axis];
        if (len == 1) continue;
        const double w2 = spacing[axis] * spacing[axis];
        const int ua = (axis == 0) ? 1 : 0;
        const int va = (axis == 2) ? 1 : 2;
        for (int b = 0; b < dims[va]; ++b)
            for (int a = 0; a < dims[ua]; ++a) {
                const std::size_t base = a * stride[ua] + b * stride[va];
                bool any = false;
                for (int q = 0; q < len; ++q) {
                    f[q] = dist[base + q * stride[axis]];
                    any = any || f[q] < detail::kBigDist;
                }
                if (!any) continue;
                detail::dt1d(f, d, v, z, len, w2);
                for (int q = 0; q < len; ++q) dist[base + q * stride[axis]] = d[q];
            }
    }
    for (double& x : dist)
        if (x >= 1e29) x = kInf;
    return dist;
}

// 2D variant over a slice extracted as a dense row-major array (x fastest).
inline std::vector<double> squared_edt_2d(const std::vector<uint8_t>& seeds, int nx, int ny,
                                          double wx = 1.0, double wy = 1.0) {
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = seeds[i] ? 0.0 : detail::kBigDist;
    const int maxdim = std::max(nx, ny);
    std::vector<double> f(maxdim), d(maxdim), z(maxdim + 1);
    std::vector<int> v(maxdim);

    if (nx > 1)
        for (int y = 0; y < ny; ++y) {
            const std::size_t base = static_cast<std::size_t>(y) * nx;
            bool any = false;
            for (int q = 0; q < nx; ++q) {
                f[q] = dist[base + q];
                any = any || f[q] < detail::kBigDist;
            }
            if (!any) continue;
            detail::dt1d(f, d, v, z, nx, wx * wx);
            for (int q = 0; q < nx; ++q) dist[base + q] = d[q];
        }
    if (ny > 1)
        for (int x = 0; x < nx; ++x) {
            bool any = false;
            for (int q = 0; q < ny; ++q) {
                f[q] = dist[static_cast<std::size_t>(q) * nx + x];
                any = any || f[q] < detail::kBigDist;
            }
            if (!any) continue;
            detail::dt1d(f, d, v, z, ny, wy * wy);
            for (int q = 0; q < ny; ++q) dist[static_cast<std::size_t>(q) * nx + x] = d[q];
        }
    for (double& x : dist)
        if (x >= 1e29) x = kInf;
    return dist;
}

// Exact nearest-neighbour queries over a 3D point set (median-split kd-tree).
class KdTree3 {
public:
    using Point = std::array<double, 3>;

    explicit KdTree3(std::vector<Point> points) : pts_(std::move(points)) {
        if (pts_.empty()) return;
        order_.resize(pts_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(pts_.size());
        root_ = build(0, static_cast<int>(pts_.size()), 0);
    }

    bool empty() const { return pts_.empty(); }
    std::size_t size() const { return pts_.size(); }

    // Squared distance to the nearest stored point; the index of that point
    // is written to *best_index when non-null.
    double nearest_sq(const Point& q, int* best_index = nullptr) const {
        double best = kInf;
        int best_i = -1;
        search(root_, q, best, best_i);
        if (best_index) *best_index = best_i;
        return best;
    }

    const Point& point(int i) const { return pts_[i]; }

private:
    struct Node {
        int point;
        int axis;
        int left = -1;
        int right = -1;
    };

    int build(int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const int mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{order_[mid], axis});
        const int l = build(lo, mid, depth + 1);
        const int r = build(mid + 1, hi, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    void search(int node, const Point& q, double& best, int& best_i) const {
        if (node < 0) return;
        const Node& nd = nodes_[node];
        const Point& p = pts_[nd.point];
        const double dx = q[0] - p[0], dy = q[1] - p[1], dz = q[2] - p[2];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 < best) {
            best = d2;
            best_i = nd.point;
        }
        const double delta = q[nd.axis] - p[nd.axis];
        const int near = delta < 0 ? nd.left : nd.right;
        const int far = delta < 0 ? nd.right : nd.left;
        search(near, q, best, best_i);
        if (delta * delta < best) search(far, q, best, best_i);
    }

    std::vector<Point> pts_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// Nearest-rank percentile with ceiling: the ceil(p*n)-th smallest value.
// Mutates (sorts) the input.
inline double percentile_nearest_rank(std::vector<double>& values, double p) {
    if (values.empty()) throw Error("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double np = p * static_cast<double>(values.size());
    std::size_t k = static_cast<std::size_t>(std::ceil(np - 1e-9));
    if (k < 1) k = 1;
    if (k > values.size()) k = values.size();
    return values[k - 1];
}

}  // namespace cads
