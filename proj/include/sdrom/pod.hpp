#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "assemble.hpp"
#include "binio.hpp"
#include "core.hpp"
#include "fom.hpp"
#include "space.hpp"

namespace sdrom {

enum class InnerProductKind { h10, l2 };

inline const SpMat& gram_operator(const AssembledOperators& ops, InnerProductKind ip) {
    return ip == InnerProductKind::h10 ? ops.stiffness : ops.mass;
}

/// Method-of-snapshots correlation matrix. With quotients the vector list is
/// y^0..y^N = snapshots followed by y^{N+1}..y^{2N} = backward difference
/// quotients, normalized by 1/(2N+1); plain form uses 1/(N+1).
struct CorrelationMatrix {
    Mat entries;
    double normalization = 0.0;
    int n_snapshots = 0;
    bool with_quotients = false;
    InnerProductKind inner_product = InnerProductKind::h10;

    int n_vectors() const { return static_cast<int>(entries.rows()); }
};

namespace detail {

inline std::vector<Vec> pod_vector_list(const SnapshotSet& set, bool with_quotients) {
    std::vector<Vec> ys = set.velocity;
    if (with_quotients) {
        auto q = set.difference_quotients();
        ys.insert(ys.end(), q.begin(), q.end());
    }
    return ys;
}

inline void check_gram_spd(const TaylorHoodSpace& space, const SpMat& G) {
    if (G.rows() != G.cols() || G.rows() != space.n_velocity_dofs())
        throw NumericError("Gram operator has wrong dimensions");
    const int n = static_cast<int>(space.interior_velocity_dofs().size());
    if (n == 0) return;
    std::vector<Triplet> trip;
    trip.reserve(G.nonZeros());
    for (int r = 0; r < G.outerSize(); ++r) {
        const int ri = space.interior_index(r);
        if (ri < 0) continue;
        for (SpMat::InnerIterator it(G, r); it; ++it) {
            const int ci = space.interior_index(static_cast<int>(it.col()));
            if (ci >= 0) trip.emplace_back(ri, ci, it.value());
        }
    }
    SpMatCol Gi(n, n);
    Gi.setFromTriplets(trip.begin(), trip.end());
    SpMatCol asym = SpMatCol(Gi.transpose()) - Gi;
    if (asym.coeffs().size() > 0 &&
        asym.coeffs().abs().maxCoeff() > 1e-12 * Gi.coeffs().abs().maxCoeff())
        throw NumericError("Gram operator is not symmetric on interior dofs");
    Eigen::SimplicialLDLT<SpMatCol> ldlt(Gi);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericError("Gram operator is not positive definite on interior dofs");
}

}  // namespace detail

inline CorrelationMatrix build_correlation(const SnapshotSet& set, InnerProductKind ip,
                                           bool with_quotients, const TaylorHoodSpace& space,
                                           const AssembledOperators& ops) {
    if (set.n_snapshots() < 2)
        throw std::invalid_argument("build_correlation: need at least 2 snapshots");
    const SpMat& G = gram_operator(ops, ip);
    detail::check_gram_spd(space, G);

    const auto ys = detail::pod_vector_list(set, with_quotients);
    const int ny = static_cast<int>(ys.size());
    CorrelationMatrix K;
    K.normalization = 1.0 / ny;
    K.n_snapshots = set.n_snapshots();
    K.with_quotients = with_quotients;
    K.inner_product = ip;
    K.entries.resize(ny, ny);
    std::vector<Vec> gy(ny);
    for (int i = 0; i < ny; ++i) gy[i] = G * ys[i];
    for (int m = 0; m < ny; ++m)
        for (int n = m; n < ny; ++n)
            K.entries(m, n) = K.entries(n, m) = K.normalization * gy[n].dot(ys[m]);
    return K;
}

struct EigenPairs {
    Vec values;   // retained, descending
    Mat vectors;  // matching unit eigenvectors as columns
};

/// Dense symmetric eigendecomposition with descending sort and relative rank
/// truncation; shared by the velocity and convective correlation matrices.
inline EigenPairs sym_eigen_truncated(const Mat& K, double rank_tol) {
    Eigen::SelfAdjointEigenSolver<Mat> es(K);
    if (es.info() != Eigen::Success)
        throw NumericError("correlation eigendecomposition failed");
    const int n = static_cast<int>(K.rows());
    const Vec& ev = es.eigenvalues();  // ascending
    const double lmax = ev[n - 1];
    if (lmax < -1e-12) throw NumericError("correlation matrix is negative definite");
    if (ev[0] < -1e-12 * std::max(lmax, 0.0))
        throw NumericError("correlation matrix is not positive semidefinite");
    int keep = 0;
    while (keep < n && ev[n - 1 - keep] > rank_tol * lmax && ev[n - 1 - keep] > 0.0) ++keep;
    EigenPairs out;
    out.values.resize(keep);
    out.vectors.resize(n, keep);
    for (int i = 0; i < keep; ++i) {
        out.values[i] = ev[n - 1 - i];
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return out;
}

inline EigenPairs eigendecompose(const CorrelationMatrix& K, double rank_tol = 1e-12) {
    return sym_eigen_truncated(K.entries, rank_tol);
}

struct PodBasis {
    std::vector<Vec> modes;  // H-orthonormal, one dof vector per mode
    Vec eigenvalues;         // retained lambda_1 >= ... >= lambda_M > 0
    InnerProductKind inner_product = InnerProductKind::h10;
    double rank_tol = 1e-12;
    bool with_quotients = false;

    int M() const { return static_cast<int>(modes.size()); }
};

/// Modes phi_i = (n_y lambda_i)^{-1/2} sum_n (z_i)_n y^n followed by one
/// Gram-Schmidt sweep in the chosen inner product. The sweep is an identity
/// in exact arithmetic (the combination is already orthonormal) but removes
/// the round-off loss that 1/sqrt(lambda_i) amplifies for trailing modes.
inline PodBasis build_basis(const SnapshotSet& set, const EigenPairs& eig, InnerProductKind ip,
                            bool with_quotients, const AssembledOperators& ops,
                            double rank_tol = 1e-12) {
    const auto ys = detail::pod_vector_list(set, with_quotients);
    const int ny = static_cast<int>(ys.size());
    const int M = static_cast<int>(eig.values.size());
    PodBasis basis;
    basis.eigenvalues = eig.values;
    basis.inner_product = ip;
    basis.rank_tol = rank_tol;
    basis.with_quotients = with_quotients;
    basis.modes.reserve(M);

    const SpMat& G = gram_operator(ops, ip);
    for (int i = 0; i < M; ++i) {
        if (!(eig.values[i] > 0.0))
            throw std::logic_error("build_basis: non-positive eigenvalue escaped truncation");
        Vec phi = Vec::Zero(ys.empty() ? 0 : ys[0].size());
        for (int n = 0; n < ny; ++n) phi += eig.vectors(n, i) * ys[n];
        phi /= std::sqrt(ny * eig.values[i]);
        for (const Vec& prev : basis.modes) phi -= (G * prev).dot(phi) * prev;
        const double norm = std::sqrt((G * phi).dot(phi));
        if (!(norm > 0.0)) throw NumericError("build_basis: zero mode after orthogonalization");
        basis.modes.push_back(phi / norm);
    }
    return basis;
}

inline double tail_energy(const PodBasis& basis, int r) {
    if (r < 0 || r > basis.M())
        throw std::invalid_argument("tail_energy: r out of range [0, M]");
    return basis.eigenvalues.tail(basis.M() - r).sum();
}

/// Left- and right-hand sides of the POD error identity: mean squared
/// H-distance of the generating vectors to their span-r projection vs the
/// eigenvalue tail.
inline std::pair<double, double> pod_error_check(const SnapshotSet& set, const PodBasis& basis,
                                                 const AssembledOperators& ops, int r) {
    if (r < 0 || r > basis.M())
        throw std::invalid_argument("pod_error_check: r out of range [0, M]");
    const auto ys = detail::pod_vector_list(set, basis.with_quotients);
    const int ny = static_cast<int>(ys.size());
    if (ny < basis.M())
        throw std::invalid_argument("pod_error_check: set does not match basis provenance");
    const SpMat& G = gram_operator(ops, basis.inner_product);
    std::vector<Vec> gphi(r);
    for (int i = 0; i < r; ++i) gphi[i] = G * basis.modes[i];
    double lhs = 0.0;
    for (const Vec& y : ys) {
        Vec d = y;
        for (int i = 0; i < r; ++i) d -= gphi[i].dot(y) * basis.modes[i];
        lhs += (G * d).dot(d);
    }
    lhs /= ny;
    return {lhs, tail_energy(basis, r)};
}

/// Spectral norm of [S_r]_ij = (grad phi_j, grad phi_i); the constant in the
/// POD inverse estimate for an L2-orthonormal basis.
inline double pod_inverse_norm(const PodBasis& basis, const SpMat& stiffness,
                               const SpMat& /*mass*/) {
    const int M = basis.M();
    if (M == 0) return 0.0;
    Mat S(M, M);
    std::vector<Vec> aphi(M);
    for (int i = 0; i < M; ++i) aphi[i] = stiffness * basis.modes[i];
    for (int i = 0; i < M; ++i)
        for (int j = 0; j <= i; ++j) S(i, j) = S(j, i) = aphi[i].dot(basis.modes[j]);
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    if (es.info() != Eigen::Success) throw NumericError("pod_inverse_norm: eigensolve failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// "SDROM-POD v1" container: modes stored mode-major (each mode contiguous).
inline void write_pod_basis(const std::string& path, const PodBasis& basis) {
    BinWriter w(path);
    w.magic("SDROMPD1");
    w.u32(1);
    w.u8(basis.inner_product == InnerProductKind::h10 ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(basis.M()));
    w.u32(basis.modes.empty() ? 0u : static_cast<std::uint32_t>(basis.modes[0].size()));
    w.f64_array(basis.eigenvalues);
    for (const Vec& m : basis.modes) w.f64_array(m);
    w.close();
}

inline PodBasis read_pod_basis(const std::string& path) {
    BinReader r(path);
    r.expect_magic("SDROMPD1");
    const auto version = r.u32();
    if (version != 1)
        throw FormatError(path + ": unsupported basis version " + std::to_string(version));
    const auto ip_tag = r.u8();
    if (ip_tag > 1) throw FormatError(path + ": unknown inner product tag");
    PodBasis basis;
    basis.inner_product = ip_tag == 0 ? InnerProductKind::h10 : InnerProductKind::l2;
    const auto M = r.u32();
    const auto n_vel = r.u32();
    basis.eigenvalues = r.f64_array(M);
    basis.modes.reserve(M);
    for (std::uint32_t i = 0; i < M; ++i)
        basis.modes.push_back(r.f64_array(static_cast<Eigen::Index>(n_vel)));
    return basis;
}

inline void write_spectrum_csv(const std::string& path, const PodBasis& basis) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "index,lambda,cumulative_tail\n";
    out.precision(17);
    for (int i = 0; i < basis.M(); ++i)
        out << (i + 1) << ',' << basis.eigenvalues[i] << ',' << tail_energy(basis, i + 1)
            << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace sdrom
