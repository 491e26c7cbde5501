#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace sdrom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// Row-major = compressed row storage; Eigen keeps inner (column) indices sorted.
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SpMatCol = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

/// Malformed file content or incompatible metadata between artifacts.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem-level failure (missing file, short read, failed write).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Nonlinear iteration exceeded its budget without meeting tolerance.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Linear solver or factorization broke down.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical contract violated (indefinite Gram, negative eigenvalue, ...).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested projection onto a numerically dependent set of vectors.
struct DegenerateBasisError : std::runtime_error {
    explicit DegenerateBasisError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sdrom
