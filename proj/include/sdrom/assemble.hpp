#pragma once

#include <array>
#include <functional>
#include <vector>

#include "core.hpp"
#include "space.hpp"

namespace sdrom {

/// Constant-in-time FE operators. Velocity operators are component-block
/// diagonal; divergence maps velocity dofs to pressure test functions.
struct AssembledOperators {
    SpMat mass;           // (phi_j, phi_i), n_vel x n_vel
    SpMat stiffness;      // (grad phi_j, grad phi_i), n_vel x n_vel
    SpMat divergence;     // (div phi_j, psi_i), n_p x n_vel
    SpMat pressure_mass;  // (psi_j, psi_i), n_p x n_p
};

inline AssembledOperators assemble_operators(const TaylorHoodSpace& space) {
    const int nq = TriQuadRule::n_points;
    const int n_vel = space.n_velocity_dofs();
    const int n_p = space.n_pressure_dofs();
    std::vector<Triplet> tm, ta, td, tp;
    tm.reserve(space.n_cells() * 72);
    ta.reserve(space.n_cells() * 72);
    td.reserve(space.n_cells() * 36);
    tp.reserve(space.n_cells() * 9);

    for (int c = 0; c < space.n_cells(); ++c) {
        const auto& nodes = space.cell_nodes(c);
        double m[6][6] = {}, a[6][6] = {}, dx[3][6] = {}, dy[3][6] = {}, pm[3][3] = {};
        for (int q = 0; q < nq; ++q) {
            const double w = space.qp_weights()[c * nq + q];
            for (int i = 0; i < 6; ++i) {
                const double vi = space.shape_value(q, i);
                const double gxi = space.shape_grad_x(c, q, i);
                const double gyi = space.shape_grad_y(c, q, i);
                for (int j = 0; j < 6; ++j) {
                    m[i][j] += w * vi * space.shape_value(q, j);
                    a[i][j] += w * (gxi * space.shape_grad_x(c, q, j) +
                                    gyi * space.shape_grad_y(c, q, j));
                }
            }
            for (int i = 0; i < 3; ++i) {
                const double pi = space.pshape_value(q, i);
                for (int j = 0; j < 6; ++j) {
                    dx[i][j] += w * pi * space.shape_grad_x(c, q, j);
                    dy[i][j] += w * pi * space.shape_grad_y(c, q, j);
                }
                for (int j = 0; j < 3; ++j) pm[i][j] += w * pi * space.pshape_value(q, j);
            }
        }
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                for (int comp = 0; comp < 2; ++comp) {
                    tm.emplace_back(2 * nodes[i] + comp, 2 * nodes[j] + comp, m[i][j]);
                    ta.emplace_back(2 * nodes[i] + comp, 2 * nodes[j] + comp, a[i][j]);
                }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 6; ++j) {
                td.emplace_back(space.mesh().cells[c][i], 2 * nodes[j], dx[i][j]);
                td.emplace_back(space.mesh().cells[c][i], 2 * nodes[j] + 1, dy[i][j]);
            }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                tp.emplace_back(space.mesh().cells[c][i], space.mesh().cells[c][j], pm[i][j]);
    }

    AssembledOperators ops;
    ops.mass.resize(n_vel, n_vel);
    ops.mass.setFromTriplets(tm.begin(), tm.end());
    ops.stiffness.resize(n_vel, n_vel);
    ops.stiffness.setFromTriplets(ta.begin(), ta.end());
    ops.divergence.resize(n_p, n_vel);
    ops.divergence.setFromTriplets(td.begin(), td.end());
    ops.pressure_mass.resize(n_p, n_p);
    ops.pressure_mass.setFromTriplets(tp.begin(), tp.end());
    return ops;
}

/// Skew-symmetrized convective form b(u,v,w) = 0.5[((u.grad)v, w) - ((u.grad)w, v)].
inline double trilinear_b(const TaylorHoodSpace& space, const Vec& u, const Vec& v,
                          const Vec& w) {
    const QuadField uv = space.velocity_values(u);
    const QuadField vv = space.velocity_values(v);
    const QuadField wv = space.velocity_values(w);
    const QuadGradients vg = space.velocity_gradients(v);
    const QuadGradients wg = space.velocity_gradients(w);
    const auto& wt = space.qp_weights().array();
    const auto ux = uv.x.array(), uy = uv.y.array();
    // (u.grad)v dot w
    const auto conv_vw = (ux * vg.xx.array() + uy * vg.xy.array()) * wv.x.array() +
                         (ux * vg.yx.array() + uy * vg.yy.array()) * wv.y.array();
    const auto conv_wv = (ux * wg.xx.array() + uy * wg.xy.array()) * vv.x.array() +
                         (ux * wg.yx.array() + uy * wg.yy.array()) * vv.y.array();
    return 0.5 * (wt * (conv_vw - conv_wv)).sum();
}

/// Pointwise convective derivative (a.grad)b sampled at quadrature points.
inline QuadField convective_field(const TaylorHoodSpace& space, const Vec& a, const Vec& b) {
    const QuadField av = space.velocity_values(a);
    const QuadGradients bg = space.velocity_gradients(b);
    QuadField out(space.n_quad_points());
    out.x = av.x.array() * bg.xx.array() + av.y.array() * bg.xy.array();
    out.y = av.x.array() * bg.yx.array() + av.y.array() * bg.yy.array();
    return out;
}

/// Convection matrix C(w) with C(w)_ij = b(w, phi_j, phi_i); skew-symmetric.
inline SpMat assemble_convection(const TaylorHoodSpace& space, const QuadField& wf) {
    const int nq = TriQuadRule::n_points;
    std::vector<Triplet> tc;
    tc.reserve(space.n_cells() * 72);
    for (int c = 0; c < space.n_cells(); ++c) {
        const auto& nodes = space.cell_nodes(c);
        double s[6][6] = {};
        for (int q = 0; q < nq; ++q) {
            const int i = c * nq + q;
            const double wgt = space.qp_weights()[i];
            const double wx = wf.x[i], wy = wf.y[i];
            double conv[6];  // (w.grad)N_k at this point
            for (int k = 0; k < 6; ++k)
                conv[k] = wx * space.shape_grad_x(c, q, k) + wy * space.shape_grad_y(c, q, k);
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b)
                    s[a][b] += 0.5 * wgt *
                               (conv[b] * space.shape_value(q, a) -
                                conv[a] * space.shape_value(q, b));
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                for (int comp = 0; comp < 2; ++comp)
                    tc.emplace_back(2 * nodes[a] + comp, 2 * nodes[b] + comp, s[a][b]);
    }
    SpMat C(space.n_velocity_dofs(), space.n_velocity_dofs());
    C.setFromTriplets(tc.begin(), tc.end());
    return C;
}

/// Jacobian block of the convective form: D_ij = b(phi_j, w, phi_i).
inline SpMat assemble_convection_jacobian(const TaylorHoodSpace& space, const QuadField& wf,
                                          const QuadGradients& wg) {
    const int nq = TriQuadRule::n_points;
    std::vector<Triplet> tc;
    tc.reserve(space.n_cells() * 144);
    for (int c = 0; c < space.n_cells(); ++c) {
        const auto& nodes = space.cell_nodes(c);
        double d[12][12] = {};
        for (int q = 0; q < nq; ++q) {
            const int i = c * nq + q;
            const double wgt = space.qp_weights()[i];
            const double wval[2] = {wf.x[i], wf.y[i]};
            // dw[comp][dir] = d(w_comp)/d(x_dir)
            const double dw[2][2] = {{wg.xx[i], wg.xy[i]}, {wg.yx[i], wg.yy[i]}};
            for (int a = 0; a < 6; ++a) {
                const double va = space.shape_value(q, a);
                const double ga[2] = {space.shape_grad_x(c, q, a), space.shape_grad_y(c, q, a)};
                for (int b = 0; b < 6; ++b) {
                    const double vb = space.shape_value(q, b);
                    for (int ca = 0; ca < 2; ++ca)
                        for (int cb = 0; cb < 2; ++cb)
                            d[2 * a + ca][2 * b + cb] +=
                                0.5 * wgt * vb * (dw[ca][cb] * va - ga[cb] * wval[ca]);
                }
            }
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                for (int ca = 0; ca < 2; ++ca)
                    for (int cb = 0; cb < 2; ++cb)
                        tc.emplace_back(2 * nodes[a] + ca, 2 * nodes[b] + cb,
                                        d[2 * a + ca][2 * b + cb]);
    }
    SpMat D(space.n_velocity_dofs(), space.n_velocity_dofs());
    D.setFromTriplets(tc.begin(), tc.end());
    return D;
}

/// Load vector F_i = (f, phi_i) for an analytic force density f(x, y).
inline Vec assemble_force(const TaylorHoodSpace& space,
                          const std::function<std::array<double, 2>(double, double)>& f) {
    const int nq = TriQuadRule::n_points;
    Vec F = Vec::Zero(space.n_velocity_dofs());
    for (int c = 0; c < space.n_cells(); ++c) {
        const auto& nodes = space.cell_nodes(c);
        for (int q = 0; q < nq; ++q) {
            const int i = c * nq + q;
            const auto fv = f(space.qp_x()[i], space.qp_y()[i]);
            const double w = space.qp_weights()[i];
            for (int k = 0; k < 6; ++k) {
                const double s = w * space.shape_value(q, k);
                F[2 * nodes[k]] += s * fv[0];
                F[2 * nodes[k] + 1] += s * fv[1];
            }
        }
    }
    return F;
}

enum class ProjectionMetric { h10, l2 };

/// Best-approximation coefficients of `target` in span(basis) under the
/// chosen metric. Throws DegenerateBasisError when the Gram matrix is
/// numerically rank-deficient.
inline Vec elliptic_project(const std::vector<Vec>& basis, const Vec& target,
                            const AssembledOperators& ops, ProjectionMetric metric) {
    const int r = static_cast<int>(basis.size());
    if (r == 0) return Vec();
    const SpMat& G = metric == ProjectionMetric::h10 ? ops.stiffness : ops.mass;
    std::vector<Vec> gb(r);
    for (int i = 0; i < r; ++i) gb[i] = G * basis[i];
    Mat gram(r, r);
    Vec rhs(r);
    for (int i = 0; i < r; ++i) {
        rhs[i] = gb[i].dot(target);
        for (int j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = gb[i].dot(basis[j]);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    if (es.info() != Eigen::Success)
        throw NumericError("elliptic_project: Gram eigensolve failed");
    const Vec& ev = es.eigenvalues();
    const double lmax = ev[r - 1];
    if (lmax <= 0.0 || ev[0] <= 1e-13 * lmax)
        throw DegenerateBasisError("elliptic_project: numerically dependent basis vectors");
    return es.eigenvectors() * (es.eigenvectors().transpose() * rhs).cwiseQuotient(ev).matrix();
}

}  // namespace sdrom
