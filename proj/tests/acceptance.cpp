// Acceptance gate for the reduced-order flow toolkit. Each numbered check
// prints exactly one PASS/FAIL line; the exit code is nonzero if any fails.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"

using namespace sdrom;
using testhelp::default_case;
using testhelp::shared_fom;
using testhelp::shared_ops;
using testhelp::shared_space;

namespace {

int g_failures = 0;

void report(int id, const std::string& label, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << label;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << v;
    return ss.str();
}

double h1_norm(const AssembledOperators& ops, const Vec& u) {
    return std::sqrt(u.dot(ops.mass * u) + u.dot(ops.stiffness * u));
}

PodBasis make_basis(const SnapshotSet& snaps, const TaylorHoodSpace& space,
                    const AssembledOperators& ops, InnerProductKind ip, bool quotients,
                    double rank_tol) {
    const CorrelationMatrix K = build_correlation(snaps, ip, quotients, space, ops);
    return build_basis(snaps, eigendecompose(K, rank_tol), ip, quotients, ops, rank_tol);
}

ReducedModel make_model(const PodBasis& basis, int r, const ConvectiveBasis& conv,
                        const TaylorHoodSpace& space, const AssembledOperators& ops) {
    const ManufacturedCase mc = default_case();
    return build_reduced(basis, r, conv, space, ops, mc.nu,
                         [mc](double x, double y, double t) { return mc.forcing(x, y, t); });
}

RomTrajectory run_rom(const ReducedModel& model, RomScheme scheme, double dt, int n_steps,
                      int r, int R, const Vec& a0) {
    RomConfig rc;
    rc.scheme = scheme;
    rc.dt = dt;
    rc.n_steps = n_steps;
    rc.r = r;
    rc.R = R;
    return run(model, rc, a0);
}

// 1. Mean projection-error identity of the reduced basis, checked against the
// retained spectrum tail at every rank, for both inner products with and
// without difference quotients. The canonical configuration is also timed.
void criterion1() {
    const int n = 16;
    const TaylorHoodSpace& space = shared_space(n);
    const AssembledOperators& ops = shared_ops(n);
    const SnapshotSet& snaps = shared_fom(n, 0.01, 20);

    double worst = 0.0;
    double canonical_seconds = 0.0;
    for (InnerProductKind ip : {InnerProductKind::h10, InnerProductKind::l2})
        for (bool quotients : {true, false}) {
            const bool canonical = ip == InnerProductKind::h10 && quotients;
            const auto t0 = std::chrono::steady_clock::now();
            const PodBasis basis = make_basis(snaps, space, ops, ip, quotients, 1e-12);
            const SpMat& G = gram_operator(ops, ip);

            // snapshot list exactly as fed to the correlation matrix
            std::vector<Vec> ys = snaps.velocity;
            if (quotients)
                for (int m = 1; m < snaps.n_snapshots(); ++m)
                    ys.push_back((snaps.velocity[m] - snaps.velocity[m - 1]) / snaps.dt);
            const int ny = static_cast<int>(ys.size());
            const int M = basis.M();

            Mat P(ys[0].size(), M);
            for (int i = 0; i < M; ++i) P.col(i) = basis.modes[i];
            Mat gram(M, M);
            for (int i = 0; i < M; ++i) gram.col(i) = P.transpose() * (G * P.col(i));
            Mat coef(M, ny);
            Vec ysq(ny);
            for (int k = 0; k < ny; ++k) {
                const Vec Gy = G * ys[k];
                coef.col(k) = P.transpose() * Gy;
                ysq[k] = ys[k].dot(Gy);
            }
            for (int r = 0; r <= M; ++r) {
                double lhs = 0.0;
                if (r == 0) {
                    lhs = ysq.sum() / ny;
                } else {
                    const Eigen::LLT<Mat> llt(gram.topLeftCorner(r, r));
                    for (int k = 0; k < ny; ++k) {
                        const Vec c = coef.col(k).head(r);
                        const Vec alpha = llt.solve(c);
                        lhs += ysq[k] - 2.0 * alpha.dot(c) +
                               alpha.dot(gram.topLeftCorner(r, r) * alpha);
                    }
                    lhs /= ny;
                }
                const double rhs = tail_energy(basis, r);
                const double tol = 1e-8 * (basis.eigenvalues[0] + rhs);
                worst = std::max(worst, std::abs(lhs - rhs) / tol);
                if (std::abs(lhs - rhs) > tol) {
                    report(1, "projection-error identity", false,
                           "ip=" + std::string(ip == InnerProductKind::h10 ? "h10" : "l2") +
                               " quotients=" + (quotients ? "1" : "0") + " r=" +
                               std::to_string(r) + " |lhs-rhs|=" + fmt(std::abs(lhs - rhs)));
                    return;
                }
            }
            if (canonical)
                canonical_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
        }
    const bool in_time = canonical_seconds < 5.0;
    report(1, "projection-error identity at every rank", in_time,
           "max residual at " + fmt(worst) + "x tolerance, canonical case " +
               fmt(canonical_seconds) + " s");
}

// 2. Skew-symmetry of the convection form: b(u,v,v) vanishes up to roundoff
// relative to the H1 sizes of the fields.
void criterion2() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int n : {8, 16, 32}) {
        const TaylorHoodSpace& space = shared_space(n);
        const AssembledOperators& ops = shared_ops(n);
        for (int trial = 0; trial < 100; ++trial) {
            const Vec u = testhelp::random_interior(space, rng);
            const Vec v = testhelp::random_interior(space, rng);
            const double val = std::abs(trilinear_b(space, u, v, v));
            const double bound = 1e-12 * h1_norm(ops, u) * std::pow(h1_norm(ops, v), 2);
            worst = std::max(worst, val / bound);
            if (val > bound) {
                report(2, "convection form skew-symmetry", false,
                       "mesh " + std::to_string(n) + " |b(u,v,v)|=" + fmt(val) +
                           " exceeds " + fmt(bound));
                return;
            }
        }
    }
    report(2, "convection form skew-symmetry", true,
           "300 random pairs, max at " + fmt(worst) + "x bound");
}

// 3. Discrete energy bound holds at every step of every run in the sweep
// matrix, with and without interpolated stabilization coefficients.
void criterion3() {
    StudyConfig cfg;
    cfg.nu = 0.01;
    cfg.profile = parse_time_profile("exp_decay:1.0");
    cfg.horizon = 0.2;
    cfg.meshes = {8, 16};
    cfg.dt_rule = DtRule::fixed;
    cfg.dt_value = 0.02;
    cfg.r_list = {0, 3};
    cfg.R_list = {1, 0};
    cfg.schemes = {RomScheme::implicit, RomScheme::semi_implicit, RomScheme::galerkin,
                   RomScheme::penalty};
    int total = 0, bad = 0;
    std::string first_bad;
    for (bool deim : {false, true}) {
        cfg.deim = deim;
        cfg.rtilde = 0;
        cfg.out_dir = (std::filesystem::temp_directory_path() /
                       (deim ? "sdrom_acc_stab_deim" : "sdrom_acc_stab"))
                          .string();
        const StudyResult res = run_study(cfg);
        for (const StudyRow& row : res.rows) {
            ++total;
            if (row.status != "ok" || !row.stability_ok) {
                ++bad;
                if (first_bad.empty())
                    first_bad = "mesh " + std::to_string(row.mesh_n) + " " +
                                to_string(row.scheme) + " r=" + std::to_string(row.r) +
                                " deim=" + (row.deim ? "1" : "0") + " status=" + row.status;
            }
        }
    }
    report(3, "energy bound across the sweep matrix", bad == 0,
           std::to_string(total) + " runs, " + std::to_string(bad) + " violations" +
               (first_bad.empty() ? "" : "; first: " + first_bad));
}

// 4. A plain Galerkin reduced model spanning the whole snapshot space must
// reproduce the snapshots themselves.
void criterion4() {
    const int n = 16;
    const TaylorHoodSpace& space = shared_space(n);
    const AssembledOperators& ops = shared_ops(n);
    const SnapshotSet& snaps = shared_fom(n, 0.01, 20);
    const PodBasis basis =
        make_basis(snaps, space, ops, InnerProductKind::h10, true, 1e-14);
    const ConvectiveBasis conv =
        build_convective_space(snaps, space, 0, 1e-14).truncated(0);
    const int r = basis.M();
    ReducedModel model = make_model(basis, r, conv, space, ops);
    model.tau_source = ZeroTau{};
    const Vec a0 = reduced_ic(snaps.velocity[0], basis, r, ops);
    const RomTrajectory traj =
        run_rom(model, RomScheme::galerkin, snaps.dt, snaps.n_snapshots() - 1, r, 0, a0);

    double worst = 0.0;
    for (int m = 0; m < snaps.n_snapshots(); ++m) {
        Vec e = -snaps.velocity[m];
        for (int i = 0; i < r; ++i) e += traj.coefficients(m, i) * basis.modes[i];
        const double rel = std::sqrt(e.dot(ops.mass * e) /
                                     snaps.velocity[m].dot(ops.mass * snaps.velocity[m]));
        worst = std::max(worst, rel);
    }
    report(4, "full-rank reduced model reproduces the snapshots", worst <= 1e-7,
           "r=" + std::to_string(r) + ", max relative L2 deviation " + fmt(worst));
}

// 5. Structural degeneracies: zero stabilization equals the plain Galerkin
// model, and a trivial fluctuation operator equals the penalty formulation.
void criterion5() {
    const int n = 8;
    const TaylorHoodSpace& space = shared_space(n);
    const AssembledOperators& ops = shared_ops(n);
    const SnapshotSet& snaps = shared_fom(n, 0.02, 10);
    const PodBasis basis =
        make_basis(snaps, space, ops, InnerProductKind::h10, true, 1e-12);
    const ConvectiveBasis conv_full = build_convective_space(snaps, space, 0, 1e-12);
    const int r = std::min(5, basis.M());
    const int steps = snaps.n_snapshots() - 1;
    const Vec a0 = reduced_ic(snaps.velocity[0], basis, r, ops);

    const int R1 = std::min(2, conv_full.M());
    ReducedModel tau_zero = make_model(basis, r, conv_full.truncated(R1), space, ops);
    tau_zero.tau_source = ZeroTau{};
    const RomTrajectory sd_zero =
        run_rom(tau_zero, RomScheme::implicit, snaps.dt, steps, r, R1, a0);

    ReducedModel gal = make_model(basis, r, conv_full.truncated(0), space, ops);
    gal.tau_source = ZeroTau{};
    const RomTrajectory galerkin =
        run_rom(gal, RomScheme::galerkin, snaps.dt, steps, r, 0, a0);

    ReducedModel sd0 = make_model(basis, r, conv_full.truncated(0), space, ops);
    sd0.tau_source = FormulaTau{4.0, std::sqrt(2.0)};
    const RomTrajectory sd_r0 =
        run_rom(sd0, RomScheme::implicit, snaps.dt, steps, r, 0, a0);
    ReducedModel pen = make_model(basis, r, conv_full.truncated(0), space, ops);
    pen.tau_source = FormulaTau{4.0, std::sqrt(2.0)};
    const RomTrajectory penalty =
        run_rom(pen, RomScheme::penalty, snaps.dt, steps, r, 0, a0);

    const double scale = 1.0 + galerkin.coefficients.cwiseAbs().maxCoeff();
    const double d_zero =
        (sd_zero.coefficients - galerkin.coefficients).cwiseAbs().maxCoeff();
    const double d_pen = (sd_r0.coefficients - penalty.coefficients).cwiseAbs().maxCoeff();
    const bool ok = d_zero <= 1e-10 * scale && d_pen <= 1e-10 * scale;
    report(5, "zero-coefficient and trivial-projector degeneracies", ok,
           "|tau0 - galerkin|=" + fmt(d_zero) + ", |R0 - penalty|=" + fmt(d_pen));
}

// 6. The fluctuation split is an L2-orthogonal decomposition on the quadrature
// representation of arbitrary fields.
void criterion6() {
    const int n = 8;
    const TaylorHoodSpace& space = shared_space(n);
    const SnapshotSet& snaps = shared_fom(n, 0.02, 10);
    ConvectiveBasis conv = build_convective_space(snaps, space, 0, 1e-12);
    conv.R = std::min(3, conv.M());

    std::mt19937 rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int nq = space.n_quad_points();
    double worst_orth = 0.0, worst_pyth = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        QuadField f(nq);
        for (int q = 0; q < nq; ++q) {
            f.x[q] = normal(rng);
            f.y[q] = normal(rng);
        }
        const QuadField pf = project_PR(space, f, conv);
        const QuadField qf = fluct_PRprime(space, f, conv);
        const double fsq = l2_inner(space, f, f);
        const double orth = std::abs(l2_inner(space, pf, qf));
        const double pyth =
            std::abs(fsq - l2_inner(space, pf, pf) - l2_inner(space, qf, qf));
        worst_orth = std::max(worst_orth, orth / (1e-10 * fsq));
        worst_pyth = std::max(worst_pyth, pyth / (1e-10 * fsq));
    }
    const bool ok = worst_orth <= 1.0 && worst_pyth <= 1.0;
    report(6, "projector orthogonality and Pythagoras identity", ok,
           "max orthogonality at " + fmt(worst_orth) + "x, Pythagoras at " +
               fmt(worst_pyth) + "x tolerance");
}

// 7. Every stabilization coefficient field sits inside its admissible range:
// strictly positive and below the viscous ceiling, both straight from the
// formula and after interpolation with clamping.
void criterion7() {
    const double c1 = 4.0, c2 = std::sqrt(2.0), nu = 0.01;
    int offline_bad = 0;
    for (int n : {8, 16}) {
        const TaylorHoodSpace& space = shared_space(n);
        const SnapshotSet& snaps = shared_fom(n, 0.02, 10);
        for (int m = 0; m < snaps.n_snapshots(); ++m) {
            const TauField tau = tau_offline(space, snaps.velocity[m], c1, c2, nu);
            for (int c = 0; c < space.n_cells(); ++c) {
                const double ceiling = space.cell_h(c) * space.cell_h(c) / (c1 * nu);
                if (!(tau.values[c] > 0.0 && tau.values[c] <= ceiling)) ++offline_bad;
            }
        }
    }

    const int n = 8;
    const TaylorHoodSpace& space = shared_space(n);
    const SnapshotSet& snaps = shared_fom(n, 0.02, 10);
    Mat train(space.n_cells(), snaps.n_snapshots() - 1);
    for (int m = 1; m < snaps.n_snapshots(); ++m)
        train.col(m - 1) = tau_offline(space, snaps.velocity[m], c1, c2, nu).values;
    const DeimModel full = deim_offline(train, 0, c1, c2, nu);
    const DeimModel lean = deim_offline(train, std::min(2, full.rank()), c1, c2, nu);

    int online_bad = 0, clamps = 0;
    for (const DeimModel* model : {&full, &lean})
        for (int m = 1; m < snaps.n_snapshots(); ++m) {
            const TauField rec = deim_online(*model, space,
                                             space.velocity_values(snaps.velocity[m]));
            clamps += rec.clamp_count;
            for (int c = 0; c < space.n_cells(); ++c) {
                const double ceiling =
                    space.cell_h(c) * space.cell_h(c) / (c1 * nu) * (1.0 + 1e-6);
                if (!(rec.values[c] >= 0.0 && rec.values[c] <= ceiling)) ++online_bad;
            }
        }
    const bool ok = offline_bad == 0 && online_bad == 0;
    report(7, "stabilization coefficient bounds", ok,
           std::to_string(offline_bad) + " offline violations, " +
               std::to_string(online_bad) + " online violations, clamp count " +
               std::to_string(clamps));
}

// 8. Interpolated coefficient model: exact on its training subspace, exact at
// its sample cells, and transparent to a full-rank reduced run.
void criterion8() {
    const double c1 = 4.0, c2 = std::sqrt(2.0), nu = 0.01;
    const int n = 8;
    const TaylorHoodSpace& space = shared_space(n);
    const AssembledOperators& ops = shared_ops(n);
    const SnapshotSet& snaps = shared_fom(n, 0.02, 10);
    Mat train(space.n_cells(), snaps.n_snapshots() - 1);
    for (int m = 1; m < snaps.n_snapshots(); ++m)
        train.col(m - 1) = tau_offline(space, snaps.velocity[m], c1, c2, nu).values;
    const DeimModel model = deim_offline(train, 0, c1, c2, nu);

    double worst_sub = 0.0, worst_pts = 0.0;
    for (int j = 0; j < train.cols(); ++j) {
        Vec samples(model.rank());
        for (int k = 0; k < model.rank(); ++k) samples[k] = train(model.indices[k], j);
        const TauField rec = deim_reconstruct(model, space, samples);
        worst_sub = std::max(worst_sub,
                             (rec.values - train.col(j)).norm() / train.col(j).norm());
        for (int k = 0; k < model.rank(); ++k)
            worst_pts = std::max(worst_pts, std::abs(rec.values[model.indices[k]] -
                                                     train(model.indices[k], j)));
    }
    const double pts_scale = train.cwiseAbs().maxCoeff();

    // full rank everywhere: the fluctuation operator then annihilates the
    // solution's own convective field, so the fixed point is tau-independent
    const PodBasis basis =
        make_basis(snaps, space, ops, InnerProductKind::h10, true, 1e-14);
    const ConvectiveBasis conv = build_convective_space(snaps, space, 0, 1e-12);
    const int r = basis.M();
    const int R = conv.M();
    const int steps = snaps.n_snapshots() - 1;
    const Vec a0 = reduced_ic(snaps.velocity[0], basis, r, ops);
    ReducedModel formula = make_model(basis, r, conv.truncated(R), space, ops);
    formula.tau_source = FormulaTau{c1, c2};
    ReducedModel interp = make_model(basis, r, conv.truncated(R), space, ops);
    interp.tau_source = DeimTau{model};
    const RomTrajectory a =
        run_rom(formula, RomScheme::implicit, snaps.dt, steps, r, R, a0);
    const RomTrajectory b =
        run_rom(interp, RomScheme::implicit, snaps.dt, steps, r, R, a0);
    const double d_traj = (a.coefficients - b.coefficients).cwiseAbs().maxCoeff() /
                          (1.0 + a.coefficients.cwiseAbs().maxCoeff());

    const bool ok =
        worst_sub <= 1e-9 && worst_pts <= 1e-10 * pts_scale && d_traj <= 1e-6;
    report(8, "interpolation model exactness", ok,
           "subspace " + fmt(worst_sub) + ", sample cells " + fmt(worst_pts / pts_scale) +
               " rel, trajectory gap " + fmt(d_traj));
}

// 9. Error structure under simultaneous refinement: with the rank picked from
// the spectrum tail, total discrete error decreases monotonically and stays
// within 10x of the structural bound fitted on the coarsest mesh.
void criterion9() {
    // Viscosity 1 puts the retained/discarded split of the spectrum in a
    // refinement-stable place: the manufactured family is spatially rank one,
    // so every mode past the first is a discretization artifact that shrinks
    // under refinement, and the lambda threshold keeps r identical across
    // meshes instead of collapsing mid-artifact.
    const double nu = 1.0, T = 0.7;
    ManufacturedCase mc = default_case();
    mc.nu = nu;
    std::vector<double> totals, bounds;
    std::ostringstream note;
    for (int n : {8, 16, 32}) {
        const TaylorHoodSpace& space = shared_space(n);
        const AssembledOperators& ops = shared_ops(n);
        const double dt = space.mesh().h;
        const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
        FomOptions opt;
        opt.dt = dt;
        opt.n_steps = steps;
        opt.nu = nu;
        const FomResult fom = solve_fom(space, ops, mc, opt);
        const SnapshotSet& snaps = fom.snapshots;
        const PodBasis basis =
            make_basis(snaps, space, ops, InnerProductKind::h10, true, 1e-12);
        int r = basis.M();
        for (int i = 0; i < basis.M(); ++i)
            if (basis.eigenvalues[i] <= nu) {
                r = std::max(1, i);
                break;
            }
        r = std::max(1, r);
        const ConvectiveBasis conv_full = build_convective_space(snaps, space, 0, 1e-12);
        const ConvectiveBasis conv = conv_full.truncated(std::min(2, conv_full.M()));
        ReducedModel model =
            build_reduced(basis, r, conv, space, ops, nu,
                          [mc](double x, double y, double t) { return mc.forcing(x, y, t); });
        model.tau_source = FormulaTau{4.0, std::sqrt(2.0)};
        const Vec a0 = reduced_ic(snaps.velocity[0], basis, r, ops);
        const RomTrajectory traj =
            run_rom(model, RomScheme::implicit, dt, steps, r, conv.R, a0);
        const ErrorReport rep = error_norms(snaps, traj, basis, space, ops, &conv);
        totals.push_back(rep.total());
        bounds.push_back(std::pow(space.mesh().h, 4) + dt * dt + rep.tail + rep.conv_tail);
        note << (n == 8 ? "" : " -> ") << "n=" << n << " r=" << r << " total "
             << fmt(rep.total());
    }
    const double C = totals[0] / bounds[0];
    const bool monotone = totals[0] > totals[1] && totals[1] > totals[2];
    const double ratio1 = totals[1] / (C * bounds[1]);
    const double ratio2 = totals[2] / (C * bounds[2]);
    const bool within = ratio1 <= 10.0 && ratio2 <= 10.0;
    report(9, "refinement structure of the total discrete error", monotone && within,
           note.str() + "; bound ratios " + fmt(ratio1) + ", " + fmt(ratio2));
}

// 10. Full-order self check: manufactured-solution velocity error in the
// l-infinity(L2) norm gains better than 2.5 orders per mesh halving when the
// step size shrinks quadratically.
void criterion10() {
    // Viscosity 1 keeps the pressure-induced velocity error (the classical
    // 1/nu-weighted pressure best-approximation term of Taylor-Hood, which
    // is not pressure-robust) below the cubic interpolation term on these
    // meshes, so the optimal spatial order of the velocity is observable.
    const double T = 0.0125;
    ManufacturedCase mc = default_case();
    mc.nu = 1.0;
    std::vector<double> errs;
    std::ostringstream note;
    for (int n : {8, 16, 32}) {
        const TaylorHoodSpace& space = shared_space(n);
        const AssembledOperators& ops = shared_ops(n);
        const double dt = 0.2 / (n * n);  // proportional to h^2
        FomOptions opt;
        opt.dt = dt;
        opt.n_steps = std::max(1, static_cast<int>(std::llround(T / dt)));
        opt.nu = mc.nu;
        opt.method = NonlinearSolve::newton;
        const FomResult res = solve_fom(space, ops, mc, opt);
        errs.push_back(errors_vs_exact(space, res.snapshots, mc).linf_l2);
        note << (n == 8 ? "e=" : ", ") << fmt(errs.back());
    }
    const double order1 = std::log(errs[0] / errs[1]) / std::log(2.0);
    const double order2 = std::log(errs[1] / errs[2]) / std::log(2.0);
    const bool ok = order1 >= 2.5 && order2 >= 2.5;
    report(10, "full-order spatial convergence", ok,
           note.str() + "; orders " + fmt(order1) + ", " + fmt(order2));
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<void()>>> checks = {
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
        {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
        {9, criterion9}, {10, criterion10},
    };
    for (const auto& [id, fn] : checks) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(id, "unexpected exception", false, e.what());
        }
    }
    std::cout << "acceptance: " << (10 - g_failures) << "/10 criteria passed" << std::endl;
    return g_failures == 0 ? 0 : 1;
}
