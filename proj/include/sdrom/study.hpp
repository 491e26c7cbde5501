#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "deim.hpp"
#include "fom.hpp"
#include "manufactured.hpp"
#include "pod.hpp"
#include "rom.hpp"
#include "space.hpp"
#include "stab.hpp"

namespace sdrom {

/// Per-run components of the Theorem-style error split: reduced trajectory
/// against the FOM reference plus the eigenvalue tails of the bound.
struct ErrorReport {
    double discrete_l2l2 = 0.0;  // (1/(N+1)) sum_n ||u^n - u_r^n||_L2^2
    double discrete_h1 = 0.0;    // nu dt sum_{n>=1} ||grad(u^n - u_r^n)||^2
    double tail = 0.0;           // sum_{i>r} lambda_i
    double conv_tail = 0.0;      // h^2 sum_{i>R} lambda_hat_i

    double total() const { return discrete_l2l2 + discrete_h1; }
};

inline ErrorReport error_norms(const SnapshotSet& fom_set, const RomTrajectory& traj,
                               const PodBasis& basis, const TaylorHoodSpace& space,
                               const AssembledOperators& ops,
                               const ConvectiveBasis* conv_basis = nullptr) {
    const int n_states = fom_set.n_snapshots();
    if (traj.coefficients.rows() != n_states)
        throw std::invalid_argument("error_norms: trajectory/snapshot count mismatch");
    if (traj.n_per_side != fom_set.n_per_side)
        throw std::invalid_argument("error_norms: mesh mismatch");
    if (std::abs(traj.dt - fom_set.dt) > 1e-14 * std::max(traj.dt, fom_set.dt))
        throw std::invalid_argument("error_norms: dt mismatch");
    const int r = static_cast<int>(traj.coefficients.cols());
    if (r > basis.M()) throw std::invalid_argument("error_norms: r exceeds basis size");

    ErrorReport rep;
    for (int n = 0; n < n_states; ++n) {
        Vec u_r = Vec::Zero(space.n_velocity_dofs());
        for (int i = 0; i < r; ++i) u_r += traj.coefficients(n, i) * basis.modes[i];
        const Vec e = fom_set.velocity[n] - u_r;
        rep.discrete_l2l2 += (ops.mass * e).dot(e) / n_states;
        if (n >= 1) rep.discrete_h1 += fom_set.nu * fom_set.dt * (ops.stiffness * e).dot(e);
    }
    rep.tail = tail_energy(basis, r);
    if (conv_basis && conv_basis->M() > conv_basis->R)
        rep.conv_tail = space.mesh().h * space.mesh().h *
                        conv_basis->eigenvalues.tail(conv_basis->M() - conv_basis->R).sum();
    return rep;
}

enum class DtRule { fixed, coupled };

struct StudyConfig {
    // [case]
    double nu = 0.01;
    TimeProfile profile;
    double amplitude = 1.0;
    double horizon = 0.5;
    // [mesh]
    std::vector<int> meshes;
    // [time]
    DtRule dt_rule = DtRule::coupled;
    double dt_value = 1.0;  // fixed dt, or the c in dt = c*h
    // [pod]
    InnerProductKind inner_product = InnerProductKind::h10;
    bool quotients = true;
    double rank_tol = 1e-12;
    // [rom]
    std::vector<int> r_list{0};  // 0 = full numerical rank
    std::vector<int> R_list{0};
    std::vector<RomScheme> schemes{RomScheme::implicit};
    double c1 = 4.0;
    double c2 = std::sqrt(2.0);
    double picard_tol = 1e-12;
    int picard_max = 100;
    // [deim]
    bool deim = false;
    int rtilde = 0;  // 0 = full numerical rank
    // [output]
    std::string out_dir = "study_out";
    // [random]
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean for '" + key + "': " + v);
}

inline double parse_num(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for '" + key + "': " + v);
    }
}

inline int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return static_cast<int>(x);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for '" + key + "': " + v);
    }
}

}  // namespace detail

/// Plain "key = value" configuration with [section] headers. Unknown keys or
/// sections are errors so typos cannot silently fall back to defaults.
inline StudyConfig parse_study_config(std::istream& in) {
    StudyConfig cfg;
    cfg.meshes.clear();
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": malformed section header");
            section = line.substr(1, line.size() - 2);
            if (section != "case" && section != "mesh" && section != "time" &&
                section != "pod" && section != "rom" && section != "deim" &&
                section != "output" && section != "random")
                throw std::invalid_argument("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const std::string qual = section + "." + key;

        if (qual == "case.nu") cfg.nu = detail::parse_num(value, qual);
        else if (qual == "case.profile") cfg.profile = parse_time_profile(value);
        else if (qual == "case.amplitude") cfg.amplitude = detail::parse_num(value, qual);
        else if (qual == "case.T") cfg.horizon = detail::parse_num(value, qual);
        else if (qual == "mesh.n") {
            for (const auto& v : detail::split_list(value))
                cfg.meshes.push_back(detail::parse_int(v, qual));
        } else if (qual == "time.rule") {
            if (value == "fixed") cfg.dt_rule = DtRule::fixed;
            else if (value == "coupled") cfg.dt_rule = DtRule::coupled;
            else throw std::invalid_argument("config: time.rule must be fixed or coupled");
        } else if (qual == "time.dt") cfg.dt_value = detail::parse_num(value, qual);
        else if (qual == "pod.inner_product") {
            if (value == "h10") cfg.inner_product = InnerProductKind::h10;
            else if (value == "l2") cfg.inner_product = InnerProductKind::l2;
            else throw std::invalid_argument("config: pod.inner_product must be h10 or l2");
        } else if (qual == "pod.quotients") cfg.quotients = detail::parse_bool(value, qual);
        else if (qual == "pod.rank_tol") cfg.rank_tol = detail::parse_num(value, qual);
        else if (qual == "rom.r") {
            cfg.r_list.clear();
            for (const auto& v : detail::split_list(value))
                cfg.r_list.push_back(detail::parse_int(v, qual));
        } else if (qual == "rom.R") {
            cfg.R_list.clear();
            for (const auto& v : detail::split_list(value))
                cfg.R_list.push_back(detail::parse_int(v, qual));
        } else if (qual == "rom.scheme") {
            cfg.schemes.clear();
            for (const auto& v : detail::split_list(value)) cfg.schemes.push_back(parse_scheme(v));
        } else if (qual == "rom.c1") cfg.c1 = detail::parse_num(value, qual);
        else if (qual == "rom.c2") cfg.c2 = detail::parse_num(value, qual);
        else if (qual == "rom.picard_tol") cfg.picard_tol = detail::parse_num(value, qual);
        else if (qual == "rom.picard_max") cfg.picard_max = detail::parse_int(value, qual);
        else if (qual == "deim.enabled") cfg.deim = detail::parse_bool(value, qual);
        else if (qual == "deim.rtilde") cfg.rtilde = detail::parse_int(value, qual);
        else if (qual == "output.dir") cfg.out_dir = value;
        else if (qual == "random.seed") cfg.seed = static_cast<std::uint64_t>(
                 std::stoull(value));
        else throw std::invalid_argument("config: unknown key '" + qual + "'");
    }
    if (cfg.meshes.empty()) throw std::invalid_argument("config: mesh.n list is empty");
    if (cfg.r_list.empty() || cfg.R_list.empty() || cfg.schemes.empty())
        throw std::invalid_argument("config: rom lists must be nonempty");
    if (cfg.nu <= 0.0) throw std::invalid_argument("config: nu must be positive");
    if (cfg.dt_value <= 0.0) throw std::invalid_argument("config: time.dt must be positive");
    if (cfg.horizon <= 0.0) throw std::invalid_argument("config: case.T must be positive");
    return cfg;
}

inline StudyConfig parse_study_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    return parse_study_config(in);
}

struct StudyRow {
    int mesh_n = 0;
    double h = 0.0, dt = 0.0;
    int n_steps = 0;
    RomScheme scheme = RomScheme::implicit;
    int r_spec = 0, r = 0, R_spec = 0, R = 0;
    bool deim = false;
    std::string status = "ok";
    ErrorReport errors;
    double lambda_next_over_nu = 0.0;  // lambda_{r+1}/nu, 0 when r = M
    double bound = 0.0;                // h^4 + dt^2 + tail + conv_tail
    double fitted_C = 0.0;
    double ratio_to_bound = 0.0;
    bool bound_flag = false;
    bool stability_ok = true;
    double fom_linf_l2 = 0.0;  // manufactured-case FOM accuracy, for context
};

struct StudyResult {
    std::vector<StudyRow> rows;
    std::string rows_csv, summary_csv;
};

/// Full sweep: FOM per mesh (cached), POD/convective/DEIM builds, one ROM run
/// per (mesh, scheme, r, R), error reports and the structural bound check.
/// Failures are recorded in the row status; remaining rows still run.
inline StudyResult run_study(const StudyConfig& cfg) {
    namespace fs = std::filesystem;
    StudyResult result;

    struct MeshData {
        std::unique_ptr<TaylorHoodSpace> space;
        AssembledOperators ops;
        SnapshotSet snaps;
        double fom_linf_l2 = 0.0;
        PodBasis basis;
        ConvectiveBasis conv_full;
        std::optional<DeimModel> deim;
        double dt = 0.0;
        int n_steps = 0;
    };

    ManufacturedCase mcase;
    mcase.nu = cfg.nu;
    mcase.amplitude = cfg.amplitude;
    mcase.profile = cfg.profile;

    std::map<int, MeshData> cache;
    for (int n : cfg.meshes) {
        MeshData md;
        md.space = std::make_unique<TaylorHoodSpace>(build_mesh(n));
        md.ops = assemble_operators(*md.space);
        md.dt = cfg.dt_rule == DtRule::fixed ? cfg.dt_value
                                             : cfg.dt_value * md.space->mesh().h;
        md.n_steps = std::max(1, static_cast<int>(std::llround(cfg.horizon / md.dt)));
        FomOptions fopt;
        fopt.dt = md.dt;
        fopt.n_steps = md.n_steps;
        fopt.nu = cfg.nu;
        md.snaps = solve_fom(*md.space, md.ops, mcase, fopt).snapshots;
        md.fom_linf_l2 = errors_vs_exact(*md.space, md.snaps, mcase).linf_l2;
        const auto K = build_correlation(md.snaps, cfg.inner_product, cfg.quotients,
                                         *md.space, md.ops);
        md.basis = build_basis(md.snaps, eigendecompose(K, cfg.rank_tol), cfg.inner_product,
                               cfg.quotients, md.ops, cfg.rank_tol);
        md.conv_full = build_convective_space(md.snaps, *md.space, 0, cfg.rank_tol);
        md.conv_full.R = md.conv_full.M();
        if (cfg.deim) {
            Mat tau_snaps(md.space->n_cells(), md.n_steps);
            for (int m = 1; m <= md.n_steps; ++m)
                tau_snaps.col(m - 1) =
                    tau_offline(*md.space, md.snaps.velocity[m], cfg.c1, cfg.c2, cfg.nu)
                        .values;
            md.deim = deim_offline(tau_snaps, cfg.rtilde, cfg.c1, cfg.c2, cfg.nu);
        }
        cache.emplace(n, std::move(md));
    }

    for (RomScheme scheme : cfg.schemes)
        for (int r_spec : cfg.r_list)
            for (int R_spec : cfg.R_list) {
                if (scheme == RomScheme::penalty && R_spec != 0) continue;
                for (int mesh_n : cfg.meshes) {
                    MeshData& md = cache.at(mesh_n);
                    StudyRow row;
                    row.mesh_n = mesh_n;
                    row.h = md.space->mesh().h;
                    row.dt = md.dt;
                    row.n_steps = md.n_steps;
                    row.scheme = scheme;
                    row.r_spec = r_spec;
                    row.R_spec = R_spec;
                    row.deim = cfg.deim && scheme != RomScheme::galerkin;
                    row.fom_linf_l2 = md.fom_linf_l2;
                    try {
                        const int r = r_spec == 0 ? md.basis.M() : r_spec;
                        const int R = scheme == RomScheme::galerkin || scheme == RomScheme::penalty
                                          ? 0
                                          : std::min(R_spec, md.conv_full.M());
                        row.r = r;
                        row.R = R;
                        const ConvectiveBasis conv = md.conv_full.truncated(R);
                        ReducedModel model = build_reduced(
                            md.basis, r, conv, *md.space, md.ops, cfg.nu,
                            [&mcase](double x, double y, double t) {
                                return mcase.forcing(x, y, t);
                            });
                        if (scheme == RomScheme::galerkin)
                            model.tau_source = ZeroTau{};
                        else if (row.deim)
                            model.tau_source = DeimTau{*md.deim};
                        else
                            model.tau_source = FormulaTau{cfg.c1, cfg.c2};
                        RomConfig rc;
                        rc.scheme = scheme;
                        rc.dt = md.dt;
                        rc.n_steps = md.n_steps;
                        rc.picard_tol = cfg.picard_tol;
                        rc.picard_max = cfg.picard_max;
                        rc.r = r;
                        rc.R = R;
                        const Vec a0 =
                            reduced_ic(md.snaps.velocity[0], md.basis, r, md.ops);
                        const RomTrajectory traj = run(model, rc, a0);
                        row.errors = error_norms(md.snaps, traj, md.basis, *md.space,
                                                 md.ops, &conv);
                        row.lambda_next_over_nu =
                            r < md.basis.M() ? md.basis.eigenvalues[r] / cfg.nu : 0.0;
                        row.bound = std::pow(row.h, 4) + row.dt * row.dt + row.errors.tail +
                                    row.errors.conv_tail;
                        row.stability_ok = check_energy_stability(traj).ok;
                    } catch (const std::exception& e) {
                        row.status = std::string("error: ") + e.what();
                    }
                    result.rows.push_back(row);
                }
            }

    // structural bound: fit C on the coarsest mesh of each (scheme, r, R) group
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        StudyRow& row = result.rows[i];
        if (row.status != "ok") continue;
        double C = 0.0;
        for (const StudyRow& other : result.rows)
            if (other.status == "ok" && other.scheme == row.scheme &&
                other.r_spec == row.r_spec && other.R_spec == row.R_spec &&
                other.deim == row.deim && other.bound > 0.0) {
                C = other.errors.total() / other.bound;  // rows are mesh-ordered per group
                break;
            }
        row.fitted_C = C;
        row.ratio_to_bound = C > 0.0 ? row.errors.total() / (C * row.bound) : 0.0;
        row.bound_flag = row.ratio_to_bound > 10.0;
    }

    fs::create_directories(cfg.out_dir);
    const std::string rows_path = (fs::path(cfg.out_dir) / "rows.csv").string();
    std::ofstream rows(rows_path);
    if (!rows) throw IoError("cannot open '" + rows_path + "' for writing");
    rows.precision(17);
    rows << "mesh_n,h,dt,n_steps,scheme,r,R,deim,status,discrete_l2l2,discrete_h1,total,"
            "tail,conv_tail,lambda_next_over_nu,bound,fitted_C,ratio_to_bound,bound_flag,"
            "stability_ok,fom_linf_l2,seed\n";
    for (const StudyRow& row : result.rows) {
        rows << row.mesh_n << ',' << row.h << ',' << row.dt << ',' << row.n_steps << ','
             << to_string(row.scheme) << ',' << row.r << ',' << row.R << ','
             << (row.deim ? 1 : 0) << ',' << '"' << row.status << '"' << ','
             << row.errors.discrete_l2l2 << ',' << row.errors.discrete_h1 << ','
             << row.errors.total() << ',' << row.errors.tail << ',' << row.errors.conv_tail
             << ',' << row.lambda_next_over_nu << ',' << row.bound << ',' << row.fitted_C
             << ',' << row.ratio_to_bound << ',' << (row.bound_flag ? 1 : 0) << ','
             << (row.stability_ok ? 1 : 0) << ',' << row.fom_linf_l2 << ',' << cfg.seed
             << '\n';
    }
    rows.close();
    result.rows_csv = rows_path;

    const std::string summary_path = (fs::path(cfg.out_dir) / "summary.csv").string();
    std::ofstream summary(summary_path);
    if (!summary) throw IoError("cannot open '" + summary_path + "' for writing");
    summary.precision(17);
    summary << "scheme,r_spec,R_spec,deim,mesh_coarse,mesh_fine,rate_total,rate_l2l2\n";
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const StudyRow& a = result.rows[i];
        for (std::size_t j = i + 1; j < result.rows.size(); ++j) {
            const StudyRow& b = result.rows[j];
            if (a.scheme != b.scheme || a.r_spec != b.r_spec || a.R_spec != b.R_spec ||
                a.deim != b.deim)
                continue;
            if (a.status != "ok" || b.status != "ok") break;
            if (b.h >= a.h) break;
            const double den = std::log(a.h / b.h);
            summary << to_string(a.scheme) << ',' << a.r_spec << ',' << a.R_spec << ','
                    << (a.deim ? 1 : 0) << ',' << a.mesh_n << ',' << b.mesh_n << ','
                    << std::log(a.errors.total() / b.errors.total()) / (2.0 * den) << ','
                    << std::log(a.errors.discrete_l2l2 / b.errors.discrete_l2l2) /
                           (2.0 * den)
                    << '\n';
            break;
        }
    }
    summary.close();
    result.summary_csv = summary_path;
    return result;
}

}  // namespace sdrom
