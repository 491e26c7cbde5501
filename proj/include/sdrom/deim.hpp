#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "binio.hpp"
#include "core.hpp"
#include "space.hpp"
#include "stab.hpp"

namespace sdrom {

/// Offline interpolation data for the per-cell stabilization coefficient.
struct DeimModel {
    Mat Q;                     // N_K x r_tilde, orthonormal columns
    std::vector<int> indices;  // selected cells, 0-based internally
    Mat QI;                    // indices rows of Q, r_tilde x r_tilde
    double c1 = 4.0, c2 = std::sqrt(2.0);
    double nu = 0.0;
    double cond_QI = 0.0;

    int n_cells() const { return static_cast<int>(Q.rows()); }
    int rank() const { return static_cast<int>(Q.cols()); }
};

/// SVD of the tau snapshot matrix (cells x times) plus the greedy row
/// selection; r_tilde <= 0 selects the full numerical rank.
inline DeimModel deim_offline(const Mat& tau_snapshots, int r_tilde, double c1, double c2,
                              double nu, double rank_tol = 1e-12) {
    const int n_cells = static_cast<int>(tau_snapshots.rows());
    const int n_snaps = static_cast<int>(tau_snapshots.cols());
    if (n_cells < 1 || n_snaps < 1)
        throw std::invalid_argument("deim_offline: empty snapshot matrix");

    Eigen::BDCSVD<Mat> svd(tau_snapshots, Eigen::ComputeThinU);
    const Vec& sig = svd.singularValues();
    int rank = 0;
    while (rank < sig.size() && sig[rank] > rank_tol * sig[0] && sig[rank] > 0.0) ++rank;
    if (rank == 0) throw std::invalid_argument("deim_offline: snapshot matrix is zero");
    if (r_tilde <= 0) r_tilde = rank;
    if (r_tilde > rank)
        throw std::invalid_argument("deim_offline: r_tilde = " + std::to_string(r_tilde) +
                                    " exceeds the numerical rank " + std::to_string(rank));

    DeimModel model;
    model.Q = svd.matrixU().leftCols(r_tilde);
    model.c1 = c1;
    model.c2 = c2;
    model.nu = nu;

    auto argmax_abs = [](const Vec& v) {
        int best = 0;
        for (int i = 1; i < v.size(); ++i)
            if (std::abs(v[i]) > std::abs(v[best])) best = i;  // ties keep the lowest index
        return best;
    };

    model.indices.push_back(argmax_abs(model.Q.col(0)));
    for (int m = 1; m < r_tilde; ++m) {
        const Mat Qm = model.Q.leftCols(m);
        Mat QIm(m, m);
        Vec rho_I(m);
        for (int k = 0; k < m; ++k) {
            QIm.row(k) = Qm.row(model.indices[k]);
            rho_I[k] = model.Q(model.indices[k], m);
        }
        Eigen::FullPivLU<Mat> lu(QIm);
        if (!lu.isInvertible())
            throw NumericError("deim_offline: singular interpolation block at step " +
                               std::to_string(m + 1));
        const Vec res = model.Q.col(m) - Qm * lu.solve(rho_I);
        model.indices.push_back(argmax_abs(res));
    }

    model.QI.resize(r_tilde, r_tilde);
    for (int k = 0; k < r_tilde; ++k) model.QI.row(k) = model.Q.row(model.indices[k]);
    Eigen::JacobiSVD<Mat> qis(model.QI);
    const double smin = qis.singularValues().minCoeff();
    const double smax = qis.singularValues().maxCoeff();
    model.cond_QI = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(model.cond_QI < 1e12))
        throw NumericError("deim_offline: interpolation block numerically singular (cond = " +
                           std::to_string(model.cond_QI) + ")");
    return model;
}

/// Reconstruct the full per-cell tau field from its values at the selected
/// cells only; clips to the admissible range [0, h_K^2/(c1 nu)] and counts
/// clips in the returned field.
inline TauField deim_reconstruct(const DeimModel& model, const TaylorHoodSpace& space,
                                 const Vec& tau_at_indices) {
    if (model.n_cells() != space.n_cells())
        throw std::invalid_argument("deim model does not match the mesh cell count");
    if (tau_at_indices.size() != model.rank())
        throw std::invalid_argument("deim_reconstruct: wrong sample count");
    const Vec alpha = Eigen::PartialPivLU<Mat>(model.QI).solve(tau_at_indices);
    TauField tau;
    tau.provenance = TauField::Provenance::deim_online;
    tau.c1 = model.c1;
    tau.c2 = model.c2;
    tau.nu = model.nu;
    tau.values = model.Q * alpha;
    for (int c = 0; c < space.n_cells(); ++c) {
        const double h = space.cell_h(c);
        const double ceiling = h * h / (model.c1 * model.nu);
        if (tau.values[c] < 0.0) {
            tau.values[c] = 0.0;
            ++tau.clamp_count;
        } else if (tau.values[c] > ceiling * (1.0 + 1e-6)) {
            tau.values[c] = ceiling;
            ++tau.clamp_count;
        }
    }
    return tau;
}

/// Online phase: evaluate the tau formula only at the selected cells (local
/// speed supplied per cell by the caller), solve the r~ x r~ system, expand.
inline TauField deim_online(const DeimModel& model, const TaylorHoodSpace& space,
                            const std::function<double(int cell)>& local_speed) {
    Vec tau_I(model.rank());
    for (int k = 0; k < model.rank(); ++k) {
        const int c = model.indices[k];
        const double h = space.cell_h(c);
        tau_I[k] = 1.0 / (model.c1 * model.nu / (h * h) + model.c2 * local_speed(c) / h);
    }
    return deim_reconstruct(model, space, tau_I);
}

/// Convenience online call for a fully sampled velocity field.
inline TauField deim_online(const DeimModel& model, const TaylorHoodSpace& space,
                            const QuadField& u_vals) {
    check_layout(space, u_vals);
    const int nq = TriQuadRule::n_points;
    return deim_online(model, space, [&](int c) {
        double l2sq = 0.0;
        for (int q = c * nq; q < (c + 1) * nq; ++q)
            l2sq += space.qp_weights()[q] *
                    (u_vals.x[q] * u_vals.x[q] + u_vals.y[q] * u_vals.y[q]);
        return std::sqrt(std::max(0.0, l2sq)) / std::sqrt(space.cell_area(c));
    });
}

/// "SDROM-DEIM v1" container; indices stored 1-based.
inline void write_deim_model(const std::string& path, const DeimModel& model) {
    BinWriter w(path);
    w.magic("SDROMDM1");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(model.n_cells()));
    w.u32(static_cast<std::uint32_t>(model.rank()));
    for (int j = 0; j < model.rank(); ++j)
        for (int i = 0; i < model.n_cells(); ++i) w.f64(model.Q(i, j));
    for (int idx : model.indices) w.u32(static_cast<std::uint32_t>(idx + 1));
    w.f64(model.c1);
    w.f64(model.c2);
    w.f64(model.nu);
    w.close();
}

inline DeimModel read_deim_model(const std::string& path) {
    BinReader r(path);
    r.expect_magic("SDROMDM1");
    const auto version = r.u32();
    if (version != 1)
        throw FormatError(path + ": unsupported deim version " + std::to_string(version));
    DeimModel model;
    const int n_cells = static_cast<int>(r.u32());
    const int rank = static_cast<int>(r.u32());
    if (n_cells < 1 || rank < 1 || rank > n_cells)
        throw FormatError(path + ": invalid deim header");
    model.Q.resize(n_cells, rank);
    for (int j = 0; j < rank; ++j)
        for (int i = 0; i < n_cells; ++i) model.Q(i, j) = r.f64();
    model.indices.resize(rank);
    for (int k = 0; k < rank; ++k) {
        const auto idx = r.u32();
        if (idx < 1 || idx > static_cast<std::uint32_t>(n_cells))
            throw FormatError(path + ": deim index out of range");
        model.indices[k] = static_cast<int>(idx) - 1;
    }
    model.c1 = r.f64();
    model.c2 = r.f64();
    model.nu = r.f64();
    model.QI.resize(rank, rank);
    for (int k = 0; k < rank; ++k) model.QI.row(k) = model.Q.row(model.indices[k]);
    Eigen::JacobiSVD<Mat> qis(model.QI);
    const double smin = qis.singularValues().minCoeff();
    model.cond_QI = smin > 0.0 ? qis.singularValues().maxCoeff() / smin
                               : std::numeric_limits<double>::infinity();
    return model;
}

/// Raw training matrix for offline interpolation builds: one column per time
/// level, one row per mesh cell.
struct TauSnapshots {
    int n_per_side = 0;
    double c1 = 0.0, c2 = 0.0, nu = 0.0;
    Mat values;  // n_cells x n_times
};

inline void write_tau_snapshots(const std::string& path, const TauSnapshots& ts) {
    BinWriter w(path);
    w.magic("SDROMTS1");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(ts.n_per_side));
    w.u32(static_cast<std::uint32_t>(ts.values.rows()));
    w.u32(static_cast<std::uint32_t>(ts.values.cols()));
    w.f64(ts.c1);
    w.f64(ts.c2);
    w.f64(ts.nu);
    for (Eigen::Index j = 0; j < ts.values.cols(); ++j)
        for (Eigen::Index i = 0; i < ts.values.rows(); ++i) w.f64(ts.values(i, j));
    w.close();
}

inline TauSnapshots read_tau_snapshots(const std::string& path) {
    BinReader r(path);
    r.expect_magic("SDROMTS1");
    const auto version = r.u32();
    if (version != 1)
        throw FormatError(path + ": unsupported tau snapshot version " +
                          std::to_string(version));
    TauSnapshots ts;
    ts.n_per_side = static_cast<int>(r.u32());
    const int n_cells = static_cast<int>(r.u32());
    const int n_times = static_cast<int>(r.u32());
    if (ts.n_per_side < 1 || n_cells != 2 * ts.n_per_side * ts.n_per_side || n_times < 1)
        throw FormatError(path + ": invalid tau snapshot header");
    ts.c1 = r.f64();
    ts.c2 = r.f64();
    ts.nu = r.f64();
    ts.values.resize(n_cells, n_times);
    for (int j = 0; j < n_times; ++j)
        for (int i = 0; i < n_cells; ++i) ts.values(i, j) = r.f64();
    return ts;
}

}  // namespace sdrom
