#pragma once

#include <array>
#include <cmath>

namespace sdrom {

/// Symmetric 7-point triangle rule, exact for polynomials of degree 5.
/// Points are barycentric; weights are normalized to sum to 1, so
/// integral over K = |K| * sum_q w_q f(x_q).
struct TriQuadRule {
    static constexpr int n_points = 7;
    std::array<std::array<double, 3>, 7> bary;
    std::array<double, 7> weights;
};

inline const TriQuadRule& tri_quad_degree5() {
    static const TriQuadRule rule = [] {
        TriQuadRule r;
        const double s15 = std::sqrt(15.0);
        const double a = (6.0 + s15) / 21.0, wa = (155.0 + s15) / 1200.0;
        const double b = (6.0 - s15) / 21.0, wb = (155.0 - s15) / 1200.0;
        r.bary[0] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        r.weights[0] = 9.0 / 40.0;
        r.bary[1] = {a, a, 1.0 - 2.0 * a};
        r.bary[2] = {a, 1.0 - 2.0 * a, a};
        r.bary[3] = {1.0 - 2.0 * a, a, a};
        r.weights[1] = r.weights[2] = r.weights[3] = wa;
        r.bary[4] = {b, b, 1.0 - 2.0 * b};
        r.bary[5] = {b, 1.0 - 2.0 * b, b};
        r.bary[6] = {1.0 - 2.0 * b, b, b};
        r.weights[4] = r.weights[5] = r.weights[6] = wb;
        return r;
    }();
    return rule;
}

}  // namespace sdrom
