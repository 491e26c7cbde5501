// Command-line front end: snapshot generation, basis building, reduced runs,
// interpolation model builds, and study sweeps over a config file.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include <sdrom/sdrom.hpp>

namespace {

using namespace sdrom;

struct FomArgs {
    int n = 16;
    double dt = 0.01;
    int steps = 10;
    double nu = 0.01;
    std::string case_spec = "exp_decay:1.0";
    double amplitude = 1.0;
    std::string method = "picard";
    std::string out;
};

void run_fom_cmd(const FomArgs& a) {
    TaylorHoodSpace space(build_mesh(a.n));
    const AssembledOperators ops = assemble_operators(space);
    ManufacturedCase mcase;
    mcase.nu = a.nu;
    mcase.amplitude = a.amplitude;
    mcase.profile = parse_time_profile(a.case_spec);
    FomOptions opt;
    opt.dt = a.dt;
    opt.n_steps = a.steps;
    opt.nu = a.nu;
    opt.method = a.method == "newton" ? NonlinearSolve::newton : NonlinearSolve::picard;
    const FomResult res = solve_fom(space, ops, mcase, opt);
    write_snapshots(a.out, res.snapshots);
    const ExactErrors err = errors_vs_exact(space, res.snapshots, mcase);
    int max_iters = 0;
    for (int it : res.nonlinear_iters) max_iters = std::max(max_iters, it);
    std::cout << "fom: n=" << a.n << " dt=" << a.dt << " steps=" << a.steps
              << " max_nonlinear_iters=" << max_iters << "\n"
              << "fom: linf_l2_error=" << err.linf_l2 << " l2_l2_error=" << err.l2_l2
              << "\n"
              << "fom: wrote " << a.out << "\n";
}

struct PodArgs {
    std::string snapshots;
    std::string ip = "h10";
    bool quotients = true;
    double rank_tol = 1e-12;
    std::string out;
    std::string spectrum;
};

void run_pod_cmd(const PodArgs& a) {
    const SnapshotSet snaps = read_snapshots(a.snapshots);
    TaylorHoodSpace space(build_mesh(snaps.n_per_side));
    const AssembledOperators ops = assemble_operators(space);
    const InnerProductKind ip =
        a.ip == "l2" ? InnerProductKind::l2 : InnerProductKind::h10;
    if (a.ip != "l2" && a.ip != "h10")
        throw std::invalid_argument("pod: --ip must be h10 or l2");
    const CorrelationMatrix K = build_correlation(snaps, ip, a.quotients, space, ops);
    const PodBasis basis =
        build_basis(snaps, eigendecompose(K, a.rank_tol), ip, a.quotients, ops,
                    a.rank_tol);
    write_pod_basis(a.out, basis);
    if (!a.spectrum.empty()) write_spectrum_csv(a.spectrum, basis);
    std::cout << "pod: retained M=" << basis.M() << " of " << K.n_vectors()
              << " snapshot vectors\n";
    if (basis.M() > 0)
        std::cout << "pod: lambda_1=" << basis.eigenvalues[0]
                  << " lambda_M=" << basis.eigenvalues[basis.M() - 1] << "\n";
    std::cout << "pod: wrote " << a.out << "\n";
}

struct RomArgs {
    std::string basis;
    std::string snapshots;
    std::string scheme = "implicit";
    int r = 0;
    int R = 0;
    double c1 = 4.0;
    double c2 = std::sqrt(2.0);
    std::string deim = "off";
    std::string case_spec = "exp_decay:1.0";
    double amplitude = 1.0;
    int steps = 0;
    double dt = 0.0;
    double picard_tol = 1e-12;
    int picard_max = 100;
    std::string out;
    std::string csv;
    std::string deim_csv;
};

void run_rom_cmd(const RomArgs& a) {
    const SnapshotSet snaps = read_snapshots(a.snapshots);
    const PodBasis basis = read_pod_basis(a.basis);
    TaylorHoodSpace space(build_mesh(snaps.n_per_side));
    const AssembledOperators ops = assemble_operators(space);
    if (!basis.modes.empty() &&
        basis.modes[0].size() != static_cast<Eigen::Index>(space.n_velocity_dofs()))
        throw std::invalid_argument("rom: basis does not match snapshot mesh");

    RomConfig rc;
    rc.scheme = parse_scheme(a.scheme);
    rc.dt = a.dt > 0.0 ? a.dt : snaps.dt;
    rc.n_steps = a.steps > 0 ? a.steps : snaps.n_snapshots() - 1;
    rc.picard_tol = a.picard_tol;
    rc.picard_max = a.picard_max;
    rc.r = a.r == 0 ? basis.M() : a.r;
    if (rc.r < 1 || rc.r > basis.M())
        throw std::invalid_argument("rom: --r out of range [1, " +
                                    std::to_string(basis.M()) + "]");

    const bool uses_projector =
        rc.scheme == RomScheme::implicit || rc.scheme == RomScheme::semi_implicit;
    ConvectiveBasis conv;
    if (uses_projector && a.R > 0) conv = build_convective_space(snaps, space, a.R);
    rc.R = conv.R;

    ManufacturedCase mcase;
    mcase.nu = snaps.nu;
    mcase.amplitude = a.amplitude;
    mcase.profile = parse_time_profile(a.case_spec);

    ReducedModel model =
        build_reduced(basis, rc.r, conv, space, ops, snaps.nu,
                      [mcase](double x, double y, double t) {
                          return mcase.forcing(x, y, t);
                      });
    if (rc.scheme == RomScheme::galerkin)
        model.tau_source = ZeroTau{};
    else if (a.deim == "off")
        model.tau_source = FormulaTau{a.c1, a.c2};
    else
        model.tau_source = DeimTau{read_deim_model(a.deim)};

    const Vec a0 = reduced_ic(snaps.velocity[0], basis, rc.r, ops);
    const RomTrajectory traj = run(model, rc, a0);
    write_trajectory(a.out, traj);
    if (!a.csv.empty()) write_trajectory_csv(a.csv, traj);
    if (!a.deim_csv.empty()) write_deim_diagnostics_csv(a.deim_csv, traj);

    const StabilityReport stab = check_energy_stability(traj);
    const ErrorReport err = error_norms(snaps, traj, basis, space, ops,
                                        uses_projector ? &conv : nullptr);
    std::cout << "rom: scheme=" << to_string(rc.scheme) << " r=" << rc.r << " R=" << rc.R
              << " steps=" << rc.n_steps << "\n"
              << "rom: discrete_l2l2=" << err.discrete_l2l2
              << " discrete_h1=" << err.discrete_h1 << " tail=" << err.tail
              << " conv_tail=" << err.conv_tail << "\n"
              << "rom: energy_stable=" << (stab.ok ? "yes" : "no") << "\n"
              << "rom: wrote " << a.out << "\n";
}

struct DeimBuildArgs {
    std::string tau_snapshots;
    std::string from_fom;
    int rtilde = 0;
    double c1 = 4.0;
    double c2 = std::sqrt(2.0);
    std::string out;
    std::string save_tau;
};

void run_deim_build_cmd(const DeimBuildArgs& a) {
    if (a.tau_snapshots.empty() == a.from_fom.empty())
        throw std::invalid_argument(
            "deim-build: give exactly one of --tau-snapshots or --from-fom");
    TauSnapshots ts;
    if (!a.tau_snapshots.empty()) {
        ts = read_tau_snapshots(a.tau_snapshots);
    } else {
        const SnapshotSet snaps = read_snapshots(a.from_fom);
        TaylorHoodSpace space(build_mesh(snaps.n_per_side));
        const int n_times = snaps.n_snapshots() - 1;
        if (n_times < 1)
            throw std::invalid_argument("deim-build: snapshot set has no time steps");
        ts.n_per_side = snaps.n_per_side;
        ts.c1 = a.c1;
        ts.c2 = a.c2;
        ts.nu = snaps.nu;
        ts.values.resize(space.n_cells(), n_times);
        for (int m = 1; m <= n_times; ++m)
            ts.values.col(m - 1) =
                tau_offline(space, snaps.velocity[m], a.c1, a.c2, snaps.nu).values;
        if (!a.save_tau.empty()) write_tau_snapshots(a.save_tau, ts);
    }
    const DeimModel model = deim_offline(ts.values, a.rtilde, ts.c1, ts.c2, ts.nu);
    write_deim_model(a.out, model);
    std::cout << "deim-build: rank=" << model.rank() << " cond_QI=" << model.cond_QI
              << "\n"
              << "deim-build: wrote " << a.out << "\n";
}

void run_study_cmd(const std::string& config_path) {
    const StudyConfig cfg = parse_study_config_file(config_path);
    const StudyResult res = run_study(cfg);
    int ok = 0, failed = 0, flagged = 0, unstable = 0;
    for (const StudyRow& row : res.rows) {
        if (row.status == "ok") ++ok; else ++failed;
        if (row.bound_flag) ++flagged;
        if (row.status == "ok" && !row.stability_ok) ++unstable;
    }
    std::cout << "study: " << res.rows.size() << " rows (" << ok << " ok, " << failed
              << " failed, " << flagged << " bound-flagged, " << unstable
              << " unstable)\n"
              << "study: wrote " << res.rows_csv << "\n"
              << "study: wrote " << res.summary_csv << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reduced-order incompressible flow toolkit"};
    app.require_subcommand(1);

    FomArgs fa;
    CLI::App* fom = app.add_subcommand("fom", "Run the full-order solver, save snapshots");
    fom->add_option("--n", fa.n, "Mesh cells per side")->check(CLI::PositiveNumber);
    fom->add_option("--dt", fa.dt, "Time step")->check(CLI::PositiveNumber);
    fom->add_option("--steps", fa.steps, "Number of steps")->check(CLI::PositiveNumber);
    fom->add_option("--nu", fa.nu, "Viscosity")->check(CLI::PositiveNumber);
    fom->add_option("--case", fa.case_spec, "Time profile, e.g. exp_decay:1.0 or cosine:2.0");
    fom->add_option("--amplitude", fa.amplitude, "Velocity amplitude");
    fom->add_option("--method", fa.method, "Nonlinear solver")
        ->check(CLI::IsMember({"picard", "newton"}));
    fom->add_option("--out", fa.out, "Snapshot output file")->required();
    fom->callback([&fa] { run_fom_cmd(fa); });

    PodArgs pa;
    CLI::App* pod = app.add_subcommand("pod", "Build a reduced basis from snapshots");
    pod->add_option("--snapshots", pa.snapshots, "Snapshot file")->required();
    pod->add_option("--ip", pa.ip, "Inner product: h10 or l2")
        ->check(CLI::IsMember({"h10", "l2"}));
    pod->add_flag("--quotients,!--no-quotients", pa.quotients,
                  "Include difference quotients (default on)");
    pod->add_option("--rank-tol", pa.rank_tol, "Relative eigenvalue cutoff");
    pod->add_option("--out", pa.out, "Basis output file")->required();
    pod->add_option("--spectrum", pa.spectrum, "Optional eigenvalue CSV");
    pod->callback([&pa] { run_pod_cmd(pa); });

    RomArgs ra;
    CLI::App* rom = app.add_subcommand("rom", "Time-step the reduced model");
    rom->add_option("--basis", ra.basis, "Basis file")->required();
    rom->add_option("--snapshots", ra.snapshots, "Snapshot file (mesh, IC, reference)")
        ->required();
    rom->add_option("--scheme", ra.scheme, "implicit|semi_implicit|galerkin|penalty")
        ->check(CLI::IsMember({"implicit", "semi_implicit", "galerkin", "penalty"}));
    rom->add_option("--r", ra.r, "Velocity modes (0 = all)");
    rom->add_option("--R", ra.R, "Convective projector modes");
    rom->add_option("--c1", ra.c1, "Viscous stabilization constant");
    rom->add_option("--c2", ra.c2, "Convective stabilization constant");
    rom->add_option("--deim", ra.deim, "Interpolation model file, or 'off'");
    rom->add_option("--case", ra.case_spec, "Forcing time profile");
    rom->add_option("--amplitude", ra.amplitude, "Forcing amplitude");
    rom->add_option("--steps", ra.steps, "Steps (default: match snapshots)");
    rom->add_option("--dt", ra.dt, "Time step (default: match snapshots)");
    rom->add_option("--picard-tol", ra.picard_tol, "Fixed-point tolerance");
    rom->add_option("--picard-max", ra.picard_max, "Fixed-point iteration cap");
    rom->add_option("--out", ra.out, "Trajectory output file")->required();
    rom->add_option("--csv", ra.csv, "Optional trajectory CSV");
    rom->add_option("--deim-csv", ra.deim_csv, "Optional interpolation diagnostics CSV");
    rom->callback([&ra] { run_rom_cmd(ra); });

    DeimBuildArgs da;
    CLI::App* deim = app.add_subcommand("deim-build", "Build the tau interpolation model");
    deim->add_option("--tau-snapshots", da.tau_snapshots, "Raw tau training matrix");
    deim->add_option("--from-fom", da.from_fom, "Compute tau training data from snapshots");
    deim->add_option("--rtilde", da.rtilde, "Interpolation rank (0 = full)");
    deim->add_option("--c1", da.c1, "Viscous stabilization constant");
    deim->add_option("--c2", da.c2, "Convective stabilization constant");
    deim->add_option("--out", da.out, "Model output file")->required();
    deim->add_option("--save-tau", da.save_tau, "Also save computed training matrix");
    deim->callback([&da] { run_deim_build_cmd(da); });

    std::string config_path;
    CLI::App* study = app.add_subcommand("study", "Run a convergence study from a config");
    study->add_option("--config", config_path, "Study configuration file")->required();
    study->callback([&config_path] { run_study_cmd(config_path); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sdrom::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const sdrom::SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const sdrom::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const sdrom::DegenerateBasisError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const sdrom::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const sdrom::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
