#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "assemble.hpp"
#include "binio.hpp"
#include "core.hpp"
#include "deim.hpp"
#include "pod.hpp"
#include "space.hpp"
#include "stab.hpp"

namespace sdrom {

enum class RomScheme { implicit, semi_implicit, galerkin, penalty };

inline std::string to_string(RomScheme s) {
    switch (s) {
        case RomScheme::implicit: return "implicit";
        case RomScheme::semi_implicit: return "semi_implicit";
        case RomScheme::galerkin: return "galerkin";
        case RomScheme::penalty: return "penalty";
    }
    return "?";
}

inline RomScheme parse_scheme(const std::string& s) {
    if (s == "implicit") return RomScheme::implicit;
    if (s == "semi_implicit") return RomScheme::semi_implicit;
    if (s == "galerkin") return RomScheme::galerkin;
    if (s == "penalty") return RomScheme::penalty;
    throw std::invalid_argument("unknown scheme '" + s + "'");
}

struct RomConfig {
    RomScheme scheme = RomScheme::implicit;
    double dt = 0.01;
    int n_steps = 10;
    double picard_tol = 1e-12;
    int picard_max = 100;
    int r = 0;  // velocity modes
    int R = 0;  // convective modes used by the projector
};

/// How the per-step tau field is produced (from u_r^n, the previous level).
struct ZeroTau {};
struct FixedTau {
    TauField field;
};
struct FormulaTau {  // full per-cell evaluation of the tau formula each step
    double c1 = 4.0, c2 = std::sqrt(2.0);
};
struct DeimTau {
    DeimModel model;
};
using TauSource = std::variant<ZeroTau, FixedTau, FormulaTau, DeimTau>;

struct ReducedModel {
    int r = 0;
    double nu = 0.0;
    Mat mass_r;                    // (phi_j, phi_i)
    Mat stiff_r;                   // (grad phi_j, grad phi_i)
    std::vector<Mat> trilinear_r;  // T[i](j,k) = b(phi_j, phi_k, phi_i)
    std::vector<QuadField> mode_values;
    std::vector<QuadGradients> mode_gradients;
    ConvectiveBasis conv_basis;
    TauSource tau_source = ZeroTau{};
    ForcingFn forcing;  // may be empty for unforced models
    const TaylorHoodSpace* space = nullptr;
    std::string build_log;

    /// Reduced load vector <f(t), phi_i>.
    Vec force_r(double t) const {
        Vec F = Vec::Zero(r);
        if (!forcing) return F;
        const Vec& w = space->qp_weights();
        Vec fx(w.size()), fy(w.size());
        for (Eigen::Index q = 0; q < w.size(); ++q) {
            const auto fv = forcing(space->qp_x()[q], space->qp_y()[q], t);
            fx[q] = fv[0];
            fy[q] = fv[1];
        }
        for (int i = 0; i < r; ++i)
            F[i] = (w.array() * (fx.array() * mode_values[i].x.array() +
                                 fy.array() * mode_values[i].y.array()))
                       .sum();
        return F;
    }

    double force_l2(double t) const {
        if (!forcing) return 0.0;
        const Vec& w = space->qp_weights();
        double s = 0.0;
        for (Eigen::Index q = 0; q < w.size(); ++q) {
            const auto fv = forcing(space->qp_x()[q], space->qp_y()[q], t);
            s += w[q] * (fv[0] * fv[0] + fv[1] * fv[1]);
        }
        return std::sqrt(s);
    }

    /// u_r at quadrature points for coefficients a.
    QuadField combine(const Vec& a) const {
        QuadField f(space->n_quad_points());
        for (int i = 0; i < r; ++i) {
            f.x += a[i] * mode_values[i].x;
            f.y += a[i] * mode_values[i].y;
        }
        return f;
    }
};

inline ReducedModel build_reduced(const PodBasis& basis, int r,
                                  const ConvectiveBasis& conv_basis,
                                  const TaylorHoodSpace& space, const AssembledOperators& ops,
                                  double nu, ForcingFn forcing = {}) {
    if (r < 1 || r > basis.M())
        throw std::invalid_argument("build_reduced: r out of range [1, M]");
    ReducedModel model;
    model.r = r;
    model.nu = nu;
    model.conv_basis = conv_basis;
    model.space = &space;
    model.forcing = std::move(forcing);

    model.mass_r.resize(r, r);
    model.stiff_r.resize(r, r);
    for (int i = 0; i < r; ++i) {
        const Vec mi = ops.mass * basis.modes[i];
        const Vec ai = ops.stiffness * basis.modes[i];
        for (int j = 0; j < r; ++j) {
            model.mass_r(i, j) = mi.dot(basis.modes[j]);
            model.stiff_r(i, j) = ai.dot(basis.modes[j]);
        }
    }

    model.mode_values.reserve(r);
    model.mode_gradients.reserve(r);
    for (int i = 0; i < r; ++i) {
        model.mode_values.push_back(space.velocity_values(basis.modes[i]));
        model.mode_gradients.push_back(space.velocity_gradients(basis.modes[i]));
    }

    // T[i](j,k) = 0.5 [ (d_jk, v_i) - (d_ji, v_k) ], d_jm = (phi_j . grad) phi_m
    const Eigen::Index nq = space.n_quad_points();
    const auto& w = space.qp_weights().array();
    model.trilinear_r.assign(r, Mat::Zero(r, r));
    Mat Vx(nq, r), Vy(nq, r);
    for (int i = 0; i < r; ++i) {
        Vx.col(i) = model.mode_values[i].x;
        Vy.col(i) = model.mode_values[i].y;
    }
    Mat Dx(nq, r), Dy(nq, r);
    for (int j = 0; j < r; ++j) {
        const auto& vj = model.mode_values[j];
        for (int m = 0; m < r; ++m) {
            const auto& gm = model.mode_gradients[m];
            Dx.col(m) = vj.x.array() * gm.xx.array() + vj.y.array() * gm.xy.array();
            Dy.col(m) = vj.x.array() * gm.yx.array() + vj.y.array() * gm.yy.array();
        }
        const Mat inner = Dx.transpose() * (Vx.array().colwise() * w).matrix() +
                          Dy.transpose() * (Vy.array().colwise() * w).matrix();
        // inner(m, i) = (d_jm, v_i)
        for (int i = 0; i < r; ++i)
            for (int k = 0; k < r; ++k)
                model.trilinear_r[i](j, k) = 0.5 * (inner(k, i) - inner(i, k));
    }

    std::ostringstream log;
    log << "reduced operators: r=" << r << " R=" << conv_basis.R
        << " gram_flops~" << 2.0 * r * double(ops.mass.nonZeros())
        << " tensor_flops~" << 6.0 * r * r * double(nq) * (r + 2);
    model.build_log = log.str();
    return model;
}

/// Elliptic-projection initial coefficients: solves the stiffness Gram
/// system; for an H10-orthonormal basis this reduces to a_i = (grad u0, grad phi_i).
inline Vec reduced_ic(const Vec& u0, const PodBasis& basis, int r,
                      const AssembledOperators& ops) {
    if (r < 1 || r > basis.M())
        throw std::invalid_argument("reduced_ic: r out of range [1, M]");
    if (basis.inner_product == InnerProductKind::h10) {
        Vec a(r);
        for (int i = 0; i < r; ++i) a[i] = (ops.stiffness * basis.modes[i]).dot(u0);
        return a;
    }
    std::vector<Vec> lead(basis.modes.begin(), basis.modes.begin() + r);
    return elliptic_project(lead, u0, ops, ProjectionMetric::h10);
}

struct RomTrajectory {
    Mat coefficients;  // (N+1) x r
    std::vector<double> times;
    std::vector<int> picard_iters;  // per step
    Vec stab_norm;                  // ||P_R'(w . grad u^{n+1})||_tau per step
    Vec energy;                     // ||u_r^n||_L2^2, all levels
    Vec grad_norm;                  // ||grad u_r^n||, all levels
    Vec force_l2;                   // ||f(t^{n+1})||_L2 per step
    std::vector<int> deim_clamps;   // per step, zero when DEIM inactive
    double deim_cond = 0.0;
    double dt = 0.0;
    double nu = 0.0;
    int n_per_side = 0;
};

namespace detail {

struct StepWorkspace {
    Mat Dx, Dy;     // (w . grad phi_i) traces, possibly after P_R'
    Mat S;          // stabilization Gram
    Mat C;          // convection matrix at the lag velocity
    Vec scaled_w;   // quadrature weight times cell tau
};

/// Convection matrix C(c)_ik = sum_j c_j T[i](j,k).
inline Mat reduced_convection(const ReducedModel& model, const Vec& c) {
    Mat C(model.r, model.r);
    for (int i = 0; i < model.r; ++i) C.row(i) = c.transpose() * model.trilinear_r[i];
    return C;
}

/// Stabilization matrix S_ik = (P'(w.grad phi_k), P'(w.grad phi_i))_tau for
/// the sampled convecting field w; the penalty route skips the projector.
inline Mat reduced_stabilization(const ReducedModel& model, const QuadField& wf,
                                 const TauField& tau, bool apply_projector,
                                 StepWorkspace& ws) {
    const TaylorHoodSpace& space = *model.space;
    const Eigen::Index nq = space.n_quad_points();
    const int r = model.r;
    const int nqp = TriQuadRule::n_points;
    ws.Dx.resize(nq, r);
    ws.Dy.resize(nq, r);
    for (int i = 0; i < r; ++i) {
        const auto& g = model.mode_gradients[i];
        ws.Dx.col(i) = wf.x.array() * g.xx.array() + wf.y.array() * g.xy.array();
        ws.Dy.col(i) = wf.x.array() * g.yx.array() + wf.y.array() * g.yy.array();
    }
    if (apply_projector) {
        for (int m = 0; m < model.conv_basis.R; ++m) {
            const QuadField& phat = model.conv_basis.modes[m];
            const Vec wx = space.qp_weights().array() * phat.x.array();
            const Vec wy = space.qp_weights().array() * phat.y.array();
            const Vec coef = ws.Dx.transpose() * wx + ws.Dy.transpose() * wy;
            ws.Dx.noalias() -= phat.x * coef.transpose();
            ws.Dy.noalias() -= phat.y * coef.transpose();
        }
    }
    ws.scaled_w.resize(nq);
    for (Eigen::Index q = 0; q < nq; ++q)
        ws.scaled_w[q] = space.qp_weights()[q] * tau.values[static_cast<int>(q) / nqp];
    ws.S.noalias() = ws.Dx.transpose() * (ws.Dx.array().colwise() * ws.scaled_w.array()).matrix();
    ws.S.noalias() += ws.Dy.transpose() * (ws.Dy.array().colwise() * ws.scaled_w.array()).matrix();
    return ws.S;
}

}  // namespace detail

/// One backward-Euler step of the fully implicit scheme; both the convecting
/// velocity and the stabilization velocity iterate with Picard, tau stays at
/// the previous level. Returns (a^{n+1}, iterations, stab norm at acceptance).
inline std::tuple<Vec, int, double> step_implicit(const Vec& a_n, const ReducedModel& model,
                                                  const RomConfig& config,
                                                  const TauField* tau, double t_next,
                                                  bool apply_projector = true) {
    const int r = model.r;
    const Mat lhs_const = model.mass_r / config.dt + model.nu * model.stiff_r;
    const Vec rhs = model.mass_r * a_n / config.dt + model.force_r(t_next);
    detail::StepWorkspace ws;

    Vec w = a_n;
    Mat C = detail::reduced_convection(model, w);
    Mat S = Mat::Zero(r, r);
    if (tau) S = detail::reduced_stabilization(model, model.combine(w), *tau, apply_projector, ws);

    std::vector<double> history;
    for (int it = 1; it <= config.picard_max; ++it) {
        Mat lhs = lhs_const + C;
        if (tau) lhs += S;
        const Vec a_new = Eigen::PartialPivLU<Mat>(lhs).solve(rhs);
        C = detail::reduced_convection(model, a_new);
        if (tau)
            S = detail::reduced_stabilization(model, model.combine(a_new), *tau,
                                              apply_projector, ws);
        Vec res = model.mass_r * (a_new - a_n) / config.dt + model.nu * (model.stiff_r * a_new) +
                  C * a_new - model.force_r(t_next);
        if (tau) res += S * a_new;
        const double rn = res.norm();
        history.push_back(rn);
        w = a_new;
        if (rn < config.picard_tol) {
            const double stab = tau ? std::sqrt(std::max(0.0, w.dot(S * w))) : 0.0;
            return {w, it, stab};
        }
    }
    std::ostringstream msg;
    msg << "step_implicit: picard stalled after " << config.picard_max << " iterations;"
        << " residuals:";
    for (double rn : history) msg << ' ' << rn;
    throw ConvergenceError(msg.str());
}

/// Semi-implicit backward Euler: convecting and stabilization velocities are
/// frozen at u_r^n, one linear solve per step.
inline std::tuple<Vec, int, double> step_semi_implicit(const Vec& a_n,
                                                       const ReducedModel& model,
                                                       const RomConfig& config,
                                                       const TauField* tau, double t_next,
                                                       bool apply_projector = true) {
    const int r = model.r;
    Mat lhs = model.mass_r / config.dt + model.nu * model.stiff_r +
              detail::reduced_convection(model, a_n);
    detail::StepWorkspace ws;
    Mat S;
    if (tau) {
        S = detail::reduced_stabilization(model, model.combine(a_n), *tau, apply_projector, ws);
        lhs += S;
    }
    const Vec rhs = model.mass_r * a_n / config.dt + model.force_r(t_next);
    Eigen::PartialPivLU<Mat> lu(lhs);
    const Vec a_new = lu.solve(rhs);
    if (!a_new.allFinite()) throw SolverError("step_semi_implicit: singular reduced system");
    const double stab = tau ? std::sqrt(std::max(0.0, a_new.dot(S * a_new))) : 0.0;
    return {a_new, 1, stab};
}

/// Integrate the reduced model from coefficients a0. tau handling per step
/// follows the model's tau_source, always evaluated at the previous level.
inline RomTrajectory run(const ReducedModel& model, const RomConfig& config, const Vec& a0) {
    if (config.dt <= 0.0) throw std::invalid_argument("run: dt must be positive");
    if (config.n_steps < 0) throw std::invalid_argument("run: n_steps must be >= 0");
    if (config.r != model.r)
        throw std::invalid_argument("run: config.r does not match the reduced model");
    if (a0.size() != model.r) throw std::invalid_argument("run: a0 has wrong length");
    if (config.scheme == RomScheme::galerkin && !std::holds_alternative<ZeroTau>(model.tau_source))
        throw std::invalid_argument("run: galerkin scheme requires a zero tau source");
    if (config.scheme == RomScheme::penalty && (model.conv_basis.R != 0 || config.R != 0))
        throw std::invalid_argument("run: penalty scheme requires R = 0");
    if (config.scheme != RomScheme::penalty && config.R != model.conv_basis.R)
        throw std::invalid_argument("run: config.R does not match the convective basis");

    const TaylorHoodSpace& space = *model.space;
    const int N = config.n_steps;
    RomTrajectory traj;
    traj.dt = config.dt;
    traj.nu = model.nu;
    traj.n_per_side = space.mesh().n_per_side;
    traj.coefficients.resize(N + 1, model.r);
    traj.coefficients.row(0) = a0.transpose();
    traj.times.resize(N + 1);
    traj.stab_norm = Vec::Zero(N);
    traj.energy = Vec::Zero(N + 1);
    traj.grad_norm = Vec::Zero(N + 1);
    traj.force_l2 = Vec::Zero(N);
    traj.picard_iters.assign(N, 0);
    traj.deim_clamps.assign(N, 0);
    if (const auto* dt_src = std::get_if<DeimTau>(&model.tau_source))
        traj.deim_cond = dt_src->model.cond_QI;

    traj.times[0] = 0.0;
    traj.energy[0] = a0.dot(model.mass_r * a0);
    traj.grad_norm[0] = std::sqrt(std::max(0.0, a0.dot(model.stiff_r * a0)));

    const bool apply_projector = config.scheme != RomScheme::penalty;
    const int nqp = TriQuadRule::n_points;
    Vec a = a0;
    for (int n = 0; n < N; ++n) {
        const double t_next = (n + 1) * config.dt;
        // resolve tau from u_r^n
        TauField tau_step;
        const TauField* tau = nullptr;
        if (const auto* fixed = std::get_if<FixedTau>(&model.tau_source)) {
            tau = &fixed->field;
        } else if (const auto* formula = std::get_if<FormulaTau>(&model.tau_source)) {
            tau_step = tau_from_samples(space, model.combine(a), formula->c1, formula->c2,
                                        model.nu);
            tau = &tau_step;
        } else if (const auto* deim = std::get_if<DeimTau>(&model.tau_source)) {
            tau_step = deim_online(deim->model, space, [&](int cell) {
                double l2sq = 0.0;
                for (int q = cell * nqp; q < (cell + 1) * nqp; ++q) {
                    double ux = 0.0, uy = 0.0;
                    for (int i = 0; i < model.r; ++i) {
                        ux += a[i] * model.mode_values[i].x[q];
                        uy += a[i] * model.mode_values[i].y[q];
                    }
                    l2sq += space.qp_weights()[q] * (ux * ux + uy * uy);
                }
                return std::sqrt(std::max(0.0, l2sq)) / std::sqrt(space.cell_area(cell));
            });
            tau = &tau_step;
            traj.deim_clamps[n] = tau_step.clamp_count;
        }

        try {
            auto [a_new, iters, stab] =
                config.scheme == RomScheme::semi_implicit
                    ? step_semi_implicit(a, model, config, tau, t_next, apply_projector)
                    : step_implicit(a, model, config, tau, t_next, apply_projector);
            a = a_new;
            traj.picard_iters[n] = iters;
            traj.stab_norm[n] = stab;
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("step " + std::to_string(n + 1) + ": " + e.what());
        }
        traj.coefficients.row(n + 1) = a.transpose();
        traj.times[n + 1] = t_next;
        traj.energy[n + 1] = a.dot(model.mass_r * a);
        traj.grad_norm[n + 1] = std::sqrt(std::max(0.0, a.dot(model.stiff_r * a)));
        traj.force_l2[n] = model.force_l2(t_next);
    }
    return traj;
}

/// Poincare constant of the unit square: ||v||_L2 <= C ||grad v||_L2.
inline constexpr double poincare_constant() { return 1.0 / (std::numbers::pi * std::numbers::sqrt2); }

struct StabilityReport {
    bool ok = true;
    double max_violation = 0.0;  // worst (lhs - rhs), negative when satisfied
    int worst_step = 0;
};

/// Discrete energy bound: for every k,
///   ||u^k||^2 + dt sum_{n<k} (nu ||grad u^{n+1}||^2 + stab^2)
///     <= ||u^0||^2 + (dt/nu) sum_{n<k} (C_P ||f^{n+1}||_L2)^2,
/// the forcing term being the Poincare upper bound of the H^{-1} norm.
inline StabilityReport check_energy_stability(const RomTrajectory& traj, double slack = 1e-8) {
    StabilityReport rep;
    const double cp = poincare_constant();
    double dissipated = 0.0, forced = 0.0;
    const double scale = std::max(1.0, traj.energy[0]);
    bool first = true;
    for (int k = 1; k < traj.energy.size(); ++k) {
        dissipated += traj.dt * (traj.nu * traj.grad_norm[k] * traj.grad_norm[k] +
                                 traj.stab_norm[k - 1] * traj.stab_norm[k - 1]);
        forced += (traj.dt / traj.nu) * cp * cp * traj.force_l2[k - 1] * traj.force_l2[k - 1];
        const double lhs = traj.energy[k] + dissipated;
        const double rhs = traj.energy[0] + forced;
        const double violation = lhs - rhs - slack * std::max(scale, rhs);
        if (first || violation > rep.max_violation) {
            rep.max_violation = violation;
            rep.worst_step = k;
            first = false;
        }
    }
    rep.ok = rep.max_violation <= 0.0;
    return rep;
}

/// "SDROM-TRAJ v1": mirrors the snapshot container with reduced coefficients.
inline void write_trajectory(const std::string& path, const RomTrajectory& traj) {
    BinWriter w(path);
    w.magic("SDROMTR1");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(traj.n_per_side));
    w.u32(static_cast<std::uint32_t>(traj.coefficients.cols()));
    w.u32(static_cast<std::uint32_t>(traj.coefficients.rows()));
    w.f64(traj.dt);
    w.f64(traj.nu);
    for (Eigen::Index n = 0; n < traj.coefficients.rows(); ++n)
        for (Eigen::Index i = 0; i < traj.coefficients.cols(); ++i)
            w.f64(traj.coefficients(n, i));
    w.close();
}

inline RomTrajectory read_trajectory(const std::string& path) {
    BinReader r(path);
    r.expect_magic("SDROMTR1");
    const auto version = r.u32();
    if (version != 1)
        throw FormatError(path + ": unsupported trajectory version " + std::to_string(version));
    RomTrajectory traj;
    traj.n_per_side = static_cast<int>(r.u32());
    const auto rr = r.u32();
    const auto n_states = r.u32();
    traj.dt = r.f64();
    traj.nu = r.f64();
    traj.coefficients.resize(n_states, rr);
    for (std::uint32_t n = 0; n < n_states; ++n)
        for (std::uint32_t i = 0; i < rr; ++i) traj.coefficients(n, i) = r.f64();
    traj.times.resize(n_states);
    for (std::uint32_t n = 0; n < n_states; ++n) traj.times[n] = n * traj.dt;
    return traj;
}

inline void write_trajectory_csv(const std::string& path, const RomTrajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "time";
    for (Eigen::Index i = 0; i < traj.coefficients.cols(); ++i) out << ",a_" << (i + 1);
    out << ",energy,grad_norm,stab_norm,picard_iters\n";
    out.precision(17);
    for (Eigen::Index n = 0; n < traj.coefficients.rows(); ++n) {
        out << traj.times[n];
        for (Eigen::Index i = 0; i < traj.coefficients.cols(); ++i)
            out << ',' << traj.coefficients(n, i);
        const bool has_diag = traj.energy.size() == traj.coefficients.rows();
        out << ',' << (has_diag ? traj.energy[n] : 0.0);
        out << ',' << (has_diag ? traj.grad_norm[n] : 0.0);
        out << ',' << (n > 0 && traj.stab_norm.size() >= n ? traj.stab_norm[n - 1] : 0.0);
        out << ',' << (n > 0 && traj.picard_iters.size() >= static_cast<std::size_t>(n)
                           ? traj.picard_iters[n - 1]
                           : 0);
        out << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline void write_deim_diagnostics_csv(const std::string& path, const RomTrajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "step,clamp_count,cond_QI\n";
    out.precision(17);
    for (std::size_t n = 0; n < traj.deim_clamps.size(); ++n)
        out << (n + 1) << ',' << traj.deim_clamps[n] << ',' << traj.deim_cond << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace sdrom
