#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "assemble.hpp"
#include "binio.hpp"
#include "core.hpp"
#include "manufactured.hpp"
#include "space.hpp"

namespace sdrom {

/// Velocity trajectory of a full-order run. Quotients are derived on demand
/// and never serialized.
struct SnapshotSet {
    int n_per_side = 0;
    double dt = 0.0;
    double nu = 0.0;
    std::vector<Vec> velocity;  // u^0 .. u^N

    int n_snapshots() const { return static_cast<int>(velocity.size()); }
    double time_of(int n) const { return n * dt; }

    /// Backward difference quotients (u^n - u^{n-1}) / dt for n = 1..N.
    std::vector<Vec> difference_quotients() const {
        std::vector<Vec> q;
        q.reserve(velocity.empty() ? 0 : velocity.size() - 1);
        for (std::size_t n = 1; n < velocity.size(); ++n)
            q.push_back((velocity[n] - velocity[n - 1]) / dt);
        return q;
    }
};

enum class NonlinearSolve { picard, newton };

struct FomOptions {
    double dt = 0.01;
    int n_steps = 10;
    double nu = 0.01;
    NonlinearSolve method = NonlinearSolve::picard;
    double tol = 1e-10;
    int max_iters = 50;
    bool project_initial = true;  // enforce the discrete divergence constraint on u^0
};

struct FomResult {
    SnapshotSet snapshots;
    std::vector<Vec> pressure;        // p^1 .. p^N
    std::vector<int> nonlinear_iters; // per step
};

/// Direct solver for the bordered saddle-point systems
///   [ K  -B^T  0 ] [u]   [b_u]
///   [ B   0    m ] [p] = [b_p]
///   [ 0  m^T   0 ] [mu]  [0  ]
/// on interior velocity dofs; m is the pressure-mean constraint row.
class SaddleSolver {
  public:
    SaddleSolver(const TaylorHoodSpace& space, const AssembledOperators& ops)
        : space_(space), ops_(ops) {
        n_int_ = static_cast<int>(space.interior_velocity_dofs().size());
        n_p_ = space.n_pressure_dofs();
        n_sys_ = n_int_ + n_p_ + 1;
        mean_row_ = space.pressure_integral_row();
        div_triplets_.reserve(ops.divergence.nonZeros() * 2 + 2 * n_p_);
        for (int r = 0; r < ops_.divergence.outerSize(); ++r)
            for (SpMat::InnerIterator it(ops_.divergence, r); it; ++it) {
                const int ui = space_.interior_index(static_cast<int>(it.col()));
                if (ui < 0) continue;
                div_triplets_.emplace_back(n_int_ + static_cast<int>(it.row()), ui, it.value());
                div_triplets_.emplace_back(ui, n_int_ + static_cast<int>(it.row()), -it.value());
            }
        for (int j = 0; j < n_p_; ++j) {
            div_triplets_.emplace_back(n_int_ + n_p_, n_int_ + j, mean_row_[j]);
            div_triplets_.emplace_back(n_int_ + j, n_int_ + n_p_, mean_row_[j]);
        }
    }

    int n_interior() const { return n_int_; }

    /// Solve with momentum block K (full-size, restricted here) and
    /// right-hand side (b_u restricted, b_p). Returns (u_full, p, mu).
    std::tuple<Vec, Vec, double> solve(const SpMat& K, const Vec& b_u_full,
                                       const Vec& b_p) const {
        std::vector<Triplet> trip = div_triplets_;
        trip.reserve(trip.size() + K.nonZeros());
        for (int r = 0; r < K.outerSize(); ++r) {
            const int ri = space_.interior_index(r);
            if (ri < 0) continue;
            for (SpMat::InnerIterator it(K, r); it; ++it) {
                const int ci = space_.interior_index(static_cast<int>(it.col()));
                if (ci >= 0) trip.emplace_back(ri, ci, it.value());
            }
        }
        SpMatCol S(n_sys_, n_sys_);
        S.setFromTriplets(trip.begin(), trip.end());

        Vec rhs = Vec::Zero(n_sys_);
        for (int d : space_.interior_velocity_dofs())
            rhs[space_.interior_index(d)] = b_u_full[d];
        rhs.segment(n_int_, n_p_) = b_p;

        Eigen::SparseLU<SpMatCol> lu;
        lu.compute(S);
        if (lu.info() != Eigen::Success)
            throw SolverError("saddle-point factorization failed");
        Vec sol = lu.solve(rhs);
        // one step of iterative refinement tightens the divergence residual
        sol += lu.solve(rhs - S * sol);

        Vec u = Vec::Zero(space_.n_velocity_dofs());
        for (int d : space_.interior_velocity_dofs()) u[d] = sol[space_.interior_index(d)];
        return {u, sol.segment(n_int_, n_p_), sol[n_int_ + n_p_]};
    }

  private:
    const TaylorHoodSpace& space_;
    const AssembledOperators& ops_;
    int n_int_ = 0, n_p_ = 0, n_sys_ = 0;
    Vec mean_row_;
    std::vector<Triplet> div_triplets_;
};

/// L2-orthogonal projection onto the discretely divergence-free subspace.
inline Vec leray_project(const TaylorHoodSpace& space, const AssembledOperators& ops,
                         const Vec& u) {
    SaddleSolver solver(space, ops);
    auto [v, p, mu] = solver.solve(ops.mass, ops.mass * u, Vec::Zero(space.n_pressure_dofs()));
    return v;
}

using ForcingFn = std::function<std::array<double, 2>(double x, double y, double t)>;

/// Backward-Euler time stepping of the Taylor-Hood discretization with
/// skew-symmetrized convection; the nonlinearity is resolved per step with
/// Picard or Newton iterations on the algebraic residual.
inline FomResult solve_fom(const TaylorHoodSpace& space, const AssembledOperators& ops,
                           const ForcingFn& forcing, const Vec& u0, const FomOptions& opts) {
    if (opts.dt <= 0.0) throw std::invalid_argument("solve_fom: dt must be positive");
    if (opts.n_steps < 0) throw std::invalid_argument("solve_fom: n_steps must be >= 0");
    if (opts.nu <= 0.0) throw std::invalid_argument("solve_fom: nu must be positive");

    SaddleSolver solver(space, ops);
    FomResult out;
    out.snapshots.n_per_side = space.mesh().n_per_side;
    out.snapshots.dt = opts.dt;
    out.snapshots.nu = opts.nu;

    Vec u = opts.project_initial ? leray_project(space, ops, u0) : u0;
    out.snapshots.velocity.push_back(u);

    const SpMat constant_part = (1.0 / opts.dt) * ops.mass + opts.nu * ops.stiffness;
    Vec p_prev = Vec::Zero(space.n_pressure_dofs());
    const Vec zero_p = Vec::Zero(space.n_pressure_dofs());

    for (int step = 0; step < opts.n_steps; ++step) {
        const double t_next = (step + 1) * opts.dt;
        const Vec F = assemble_force(
            space, [&](double x, double y) { return forcing(x, y, t_next); });
        const Vec b_u = (1.0 / opts.dt) * (ops.mass * u) + F;

        auto residual_norm = [&](const Vec& v, const Vec& p, const SpMat& C_v) {
            Vec r = constant_part * v + C_v * v - b_u - ops.divergence.transpose() * p;
            double s = 0.0;
            for (int d : space.interior_velocity_dofs()) s += r[d] * r[d];
            s += (ops.divergence * v).squaredNorm();
            return std::sqrt(s);
        };

        Vec w = u, p = p_prev;
        SpMat C = assemble_convection(space, space.velocity_values(w));
        bool converged = false;
        int iters = 0;
        for (int it = 0; it < opts.max_iters; ++it) {
            ++iters;
            if (opts.method == NonlinearSolve::picard) {
                auto [v_new, p_new, mu] = solver.solve(constant_part + C, b_u, zero_p);
                C = assemble_convection(space, space.velocity_values(v_new));
                w = v_new;
                p = p_new;
            } else {
                const QuadField wv = space.velocity_values(w);
                const QuadGradients wg = space.velocity_gradients(w);
                const SpMat D = assemble_convection_jacobian(space, wv, wg);
                Vec res_u = b_u - (constant_part * w + C * w) +
                            ops.divergence.transpose() * p;
                Vec res_p = -(ops.divergence * w);
                auto [du, dp, dmu] = solver.solve(constant_part + C + D, res_u, res_p);
                w += du;
                p += dp;
                C = assemble_convection(space, space.velocity_values(w));
            }
            if (residual_norm(w, p, C) < opts.tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw ConvergenceError("solve_fom: nonlinear iteration stalled at step " +
                                   std::to_string(step + 1));
        u = w;
        p_prev = p;
        out.snapshots.velocity.push_back(u);
        out.pressure.push_back(p);
        out.nonlinear_iters.push_back(iters);
    }
    return out;
}

/// Convenience driver for a manufactured problem: interpolates the initial
/// condition and uses the closed-form forcing.
inline FomResult solve_fom(const TaylorHoodSpace& space, const AssembledOperators& ops,
                           const ManufacturedCase& mcase, const FomOptions& opts_in) {
    FomOptions opts = opts_in;
    opts.nu = mcase.nu;
    const Vec u0 = space.interpolate_velocity(
        [&](double x, double y) { return mcase.velocity(x, y, 0.0); });
    return solve_fom(
        space, ops,
        [&mcase](double x, double y, double t) { return mcase.forcing(x, y, t); }, u0, opts);
}

/// Discrete error norms of a trajectory against the closed-form solution.
struct ExactErrors {
    double linf_l2 = 0.0;  // max_n ||u_h^n - u(t_n)||_L2
    double l2_l2 = 0.0;    // sqrt(dt * sum ||.||_L2^2)
    double l2_h1 = 0.0;    // sqrt(dt * sum ||grad .||_L2^2)
};

/// "SDROM-SNAP v1" container; difference quotients are recomputed on load.
inline void write_snapshots(const std::string& path, const SnapshotSet& set) {
    BinWriter w(path);
    w.magic("SDROMSN1");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(set.n_per_side));
    w.u32(set.velocity.empty() ? 0u : static_cast<std::uint32_t>(set.velocity[0].size()));
    w.u32(static_cast<std::uint32_t>(set.n_snapshots()));
    w.f64(set.dt);
    w.f64(set.nu);
    for (const Vec& u : set.velocity) w.f64_array(u);
    w.close();
}

inline SnapshotSet read_snapshots(const std::string& path) {
    BinReader r(path);
    r.expect_magic("SDROMSN1");
    const auto version = r.u32();
    if (version != 1)
        throw FormatError(path + ": unsupported snapshot version " + std::to_string(version));
    SnapshotSet set;
    set.n_per_side = static_cast<int>(r.u32());
    const auto n_vel = r.u32();
    const auto n_snaps = r.u32();
    set.dt = r.f64();
    set.nu = r.f64();
    if (set.n_per_side < 1 || set.dt <= 0.0 || set.nu <= 0.0)
        throw FormatError(path + ": invalid snapshot header");
    set.velocity.reserve(n_snaps);
    for (std::uint32_t n = 0; n < n_snaps; ++n)
        set.velocity.push_back(r.f64_array(static_cast<Eigen::Index>(n_vel)));
    return set;
}

inline ExactErrors errors_vs_exact(const TaylorHoodSpace& space, const SnapshotSet& snaps,
                                   const ManufacturedCase& mcase) {
    ExactErrors e;
    const int nq = space.n_quad_points();
    for (int n = 0; n < snaps.n_snapshots(); ++n) {
        const double t = snaps.time_of(n);
        const QuadField uh = space.velocity_values(snaps.velocity[n]);
        const QuadGradients gh = space.velocity_gradients(snaps.velocity[n]);
        double l2 = 0.0, h1 = 0.0;
        for (int q = 0; q < nq; ++q) {
            const auto ue = mcase.velocity(space.qp_x()[q], space.qp_y()[q], t);
            const auto ge = mcase.velocity_gradient(space.qp_x()[q], space.qp_y()[q], t);
            const double w = space.qp_weights()[q];
            const double dx = uh.x[q] - ue[0], dy = uh.y[q] - ue[1];
            l2 += w * (dx * dx + dy * dy);
            const double e0 = gh.xx[q] - ge[0], e1 = gh.xy[q] - ge[1];
            const double e2 = gh.yx[q] - ge[2], e3 = gh.yy[q] - ge[3];
            h1 += w * (e0 * e0 + e1 * e1 + e2 * e2 + e3 * e3);
        }
        e.linf_l2 = std::max(e.linf_l2, std::sqrt(l2));
        e.l2_l2 += snaps.dt * l2;
        e.l2_h1 += snaps.dt * h1;
    }
    e.l2_l2 = std::sqrt(e.l2_l2);
    e.l2_h1 = std::sqrt(e.l2_h1);
    return e;
}

}  // namespace sdrom
