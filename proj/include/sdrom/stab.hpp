#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "assemble.hpp"
#include "core.hpp"
#include "fom.hpp"
#include "pod.hpp"
#include "space.hpp"

namespace sdrom {

/// L2-orthonormal POD space of convective snapshot fields u^m . grad u^m.
/// Modes live at quadrature points: the convective derivative of a P2 field
/// is discontinuous across cells, so no conforming FE vector holds it.
struct ConvectiveBasis {
    std::vector<QuadField> modes;  // all retained modes (M_hat of them)
    Vec eigenvalues;               // retained, descending
    int R = 0;                     // leading modes used by the projector
    int source_first = 1, source_last = 0;  // snapshot indices that fed K_hat

    int M() const { return static_cast<int>(modes.size()); }

    ConvectiveBasis truncated(int new_R) const {
        if (new_R < 0 || new_R > M())
            throw std::invalid_argument("ConvectiveBasis: R out of range [0, M]");
        ConvectiveBasis b = *this;
        b.R = new_R;
        return b;
    }
};

/// Piecewise-constant stabilization coefficient. `u_speed` keeps the local
/// speeds U_K alongside for diagnostics; empty when not applicable.
struct TauField {
    enum class Provenance { offline_formula, deim_online, constant };

    Vec values;  // one tau_K per cell
    Provenance provenance = Provenance::constant;
    double c1 = 4.0, c2 = std::sqrt(2.0);
    double nu = 0.0;
    Vec u_speed;
    int clamp_count = 0;  // deim-online reconstructions clipped to the admissible range
};

inline ConvectiveBasis build_convective_space(const SnapshotSet& set,
                                              const TaylorHoodSpace& space, int R,
                                              double rank_tol = 1e-12) {
    const int N = set.n_snapshots() - 1;
    if (N < 1) throw std::invalid_argument("build_convective_space: need N >= 1 steps");

    std::vector<QuadField> g;
    g.reserve(N);
    for (int m = 1; m <= N; ++m)
        g.push_back(convective_field(space, set.velocity[m], set.velocity[m]));

    Mat K(N, N);
    for (int m = 0; m < N; ++m)
        for (int n = m; n < N; ++n)
            K(m, n) = K(n, m) = l2_inner(space, g[n], g[m]) / N;

    ConvectiveBasis basis;
    basis.source_first = 1;
    basis.source_last = N;
    if (K.cwiseAbs().maxCoeff() > 0.0) {
        const EigenPairs eig = sym_eigen_truncated(K, rank_tol);
        basis.eigenvalues = eig.values;
        for (int i = 0; i < eig.values.size(); ++i) {
            QuadField phi(space.n_quad_points());
            for (int n = 0; n < N; ++n) {
                phi.x += eig.vectors(n, i) * g[n].x;
                phi.y += eig.vectors(n, i) * g[n].y;
            }
            const double scale = 1.0 / std::sqrt(N * eig.values[i]);
            phi.x *= scale;
            phi.y *= scale;
            for (const QuadField& prev : basis.modes) {
                const double c = l2_inner(space, phi, prev);
                phi.x -= c * prev.x;
                phi.y -= c * prev.y;
            }
            const double norm = l2_norm(space, phi);
            if (!(norm > 0.0))
                throw NumericError("build_convective_space: zero mode after orthogonalization");
            phi.x /= norm;
            phi.y /= norm;
            basis.modes.push_back(std::move(phi));
        }
    }
    if (R < 0 || R > basis.M())
        throw std::invalid_argument("build_convective_space: R = " + std::to_string(R) +
                                    " exceeds the numerical rank " +
                                    std::to_string(basis.M()));
    basis.R = R;
    return basis;
}

inline void check_layout(const TaylorHoodSpace& space, const QuadField& g) {
    if (g.size() != space.n_quad_points())
        throw std::invalid_argument("quadrature field does not match the space layout");
}

/// L2-orthogonal projection onto span(phi_hat_1..phi_hat_R).
inline QuadField project_PR(const TaylorHoodSpace& space, const QuadField& g,
                            const ConvectiveBasis& basis) {
    check_layout(space, g);
    QuadField out(space.n_quad_points());
    for (int i = 0; i < basis.R; ++i) {
        const double c = l2_inner(space, g, basis.modes[i]);
        out.x += c * basis.modes[i].x;
        out.y += c * basis.modes[i].y;
    }
    return out;
}

/// Fluctuation P_R' g = g - P_R g; the identity map when R = 0.
inline QuadField fluct_PRprime(const TaylorHoodSpace& space, const QuadField& g,
                               const ConvectiveBasis& basis) {
    check_layout(space, g);
    QuadField out = g;
    for (int i = 0; i < basis.R; ++i) {
        const double c = l2_inner(space, g, basis.modes[i]);
        out.x -= c * basis.modes[i].x;
        out.y -= c * basis.modes[i].y;
    }
    return out;
}

/// (g, h)_tau = sum_K tau_K (g, h)_K over quadrature samples.
inline double tau_inner(const TaylorHoodSpace& space, const QuadField& g, const QuadField& h,
                        const TauField& tau) {
    check_layout(space, g);
    check_layout(space, h);
    if (tau.values.size() != space.n_cells())
        throw std::invalid_argument("tau field does not match the cell count");
    const int nq = TriQuadRule::n_points;
    double total = 0.0;
    for (int c = 0; c < space.n_cells(); ++c) {
        double cell = 0.0;
        for (int q = c * nq; q < (c + 1) * nq; ++q)
            cell += space.qp_weights()[q] * (g.x[q] * h.x[q] + g.y[q] * h.y[q]);
        total += tau.values[c] * cell;
    }
    return total;
}

inline double tau_norm(const TaylorHoodSpace& space, const QuadField& g, const TauField& tau) {
    return std::sqrt(std::max(0.0, tau_inner(space, g, g, tau)));
}

/// tau_K = [c1 nu / h_K^2 + c2 U_K / h_K]^{-1} with the local speed
/// U_K = ||u||_{L2(K)} / |K|^{1/2} taken from quadrature-point samples.
inline TauField tau_from_samples(const TaylorHoodSpace& space, const QuadField& u_vals,
                                 double c1, double c2, double nu) {
    if (c1 <= 0.0 || c2 <= 0.0)
        throw std::invalid_argument("tau: c1 and c2 must be positive");
    if (nu <= 0.0) throw std::invalid_argument("tau: nu must be positive");
    check_layout(space, u_vals);
    const int nq = TriQuadRule::n_points;
    TauField tau;
    tau.provenance = TauField::Provenance::offline_formula;
    tau.c1 = c1;
    tau.c2 = c2;
    tau.nu = nu;
    tau.values.resize(space.n_cells());
    tau.u_speed.resize(space.n_cells());
    for (int c = 0; c < space.n_cells(); ++c) {
        double l2sq = 0.0;
        for (int q = c * nq; q < (c + 1) * nq; ++q)
            l2sq += space.qp_weights()[q] *
                    (u_vals.x[q] * u_vals.x[q] + u_vals.y[q] * u_vals.y[q]);
        const double h = space.cell_h(c);
        const double U = std::sqrt(std::max(0.0, l2sq)) / std::sqrt(space.cell_area(c));
        tau.u_speed[c] = U;
        tau.values[c] = 1.0 / (c1 * nu / (h * h) + c2 * U / h);
    }
    return tau;
}

inline TauField tau_offline(const TaylorHoodSpace& space, const Vec& u, double c1, double c2,
                            double nu) {
    return tau_from_samples(space, space.velocity_values(u), c1, c2, nu);
}

inline void write_tau_csv(const std::string& path, const TaylorHoodSpace& space,
                          const TauField& tau) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "cell_index,h_K,U_K,tau_K\n";
    out.precision(17);
    for (int c = 0; c < space.n_cells(); ++c) {
        const double U = tau.u_speed.size() == space.n_cells()
                             ? tau.u_speed[c]
                             : std::numeric_limits<double>::quiet_NaN();
        out << c << ',' << space.cell_h(c) << ',' << U << ',' << tau.values[c] << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace sdrom
