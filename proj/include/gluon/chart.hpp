#ifndef GLUON_CHART_HPP
#define GLUON_CHART_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gluon/core.hpp"
#include "gluon/mat3.hpp"

namespace gluon {

// bulk1/bulk2: periodic torus boxes carrying the two summands of a glued
//   manifold.  neck: Fermi tube coordinates (t, theta1, theta2) with
//   t in [log eps, -log eps].  ae_end: same tube coordinates continued to an
//   asymptotically flat truncation radius.  box_periodic / stereo_*: charts
//   for stand-alone model manifolds (probe targets, single-chart tests).
enum class ChartKind : int32_t {
    bulk1 = 0,
    bulk2 = 1,
    neck = 2,
    ae_end = 3,
    box_periodic = 4,
    stereo_north = 5,
    stereo_south = 6,
    box_open = 7
};

// Node roles.  dead: never used (bulk core under the neck).  fringe: receives
// its value by interpolation from another chart, no stencils evaluated here.
// interior: stencil-computed but excluded from reductions (the double-covered
// courtesy band near the ownership handoff).  owner: stencil-computed and
// counted exactly once in atlas-wide sums and sups.
enum class NodeClass : uint8_t { dead = 0, fringe = 1, interior = 2, owner = 3 };

struct Chart {
    int32_t id = 0;
    ChartKind kind = ChartKind::box_periodic;
    int32_t n[3] = {1, 1, 1};
    double orig[3] = {0, 0, 0};
    double h[3] = {1, 1, 1};
    bool periodic[3] = {false, false, false};
    // Axis 1 is a staggered S^2 colatitude: nodes at (j+1/2)h, no pole nodes,
    // stencils cross the poles via (theta1,theta2) -> (-theta1, theta2+pi).
    bool pole_axis = false;

    double period = 0.0;   // torus box length
    Vec3 center{};         // gluing point in box coordinates
    int32_t side = +1;     // Fermi sign: x = center + eps*e^{-side*t}*n(theta)
    double stereo_a = 1.0; // stereographic sphere radius
    double robin_nu = 0.0; // AE outer boundary: d_t X = nu X at low-t end
    bool robin_low_t = false;

    std::vector<NodeClass> mask;

    std::size_t nn() const {
        return std::size_t(n[0]) * std::size_t(n[1]) * std::size_t(n[2]);
    }
    std::size_t node(int i, int j, int k) const {
        return (std::size_t(i) * n[1] + j) * n[2] + k;
    }
    void unpack(std::size_t idx, int& i, int& j, int& k) const {
        k = int(idx % n[2]);
        idx /= n[2];
        j = int(idx % n[1]);
        i = int(idx / n[1]);
    }
    // Cell-centered node coordinate along an axis.
    double coord(int axis, int i) const { return orig[axis] + (i + 0.5) * h[axis]; }
    Vec3 coords(int i, int j, int k) const {
        return {coord(0, i), coord(1, j), coord(2, k)};
    }
    double axis_min(int axis) const { return orig[axis]; }
    double axis_max(int axis) const { return orig[axis] + n[axis] * h[axis]; }

    NodeClass cls(std::size_t idx) const { return mask[idx]; }
    bool computes(std::size_t idx) const { return mask[idx] >= NodeClass::interior; }
    bool owns(std::size_t idx) const { return mask[idx] == NodeClass::owner; }

    std::size_t count(NodeClass c) const {
        std::size_t cnt = 0;
        for (auto m : mask)
            if (m == c) ++cnt;
        return cnt;
    }

    std::string describe_node(std::size_t idx) const {
        int i, j, k;
        unpack(idx, i, j, k);
        Vec3 x = coords(i, j, k);
        return "chart " + std::to_string(id) + " node (" + std::to_string(i) + "," +
               std::to_string(j) + "," + std::to_string(k) + ") at (" +
               std::to_string(x[0]) + "," + std::to_string(x[1]) + "," +
               std::to_string(x[2]) + ")";
    }
};

// Unit outward direction on S^2 for tube coordinates.
inline Vec3 sphere_dir(double theta1, double theta2) {
    double s = std::sin(theta1);
    return {s * std::cos(theta2), s * std::sin(theta2), std::cos(theta1)};
}

}  // namespace gluon

#endif
