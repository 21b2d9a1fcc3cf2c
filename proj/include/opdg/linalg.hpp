#pragma once

// Small dense linear-algebra helpers shared by the solvers.

#include <Eigen/Dense>

#include <vector>

namespace opdg::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double max_abs(const MatrixXd& m);

/// Smallest eigenvalue of the symmetric part of `m`.
double min_eigenvalue(const MatrixXd& m);
double max_eigenvalue(const MatrixXd& m);

/// Largest real part over the eigenvalues of `m`.
double spectral_abscissa(const MatrixXd& m);

/// All eigenvalue real parts below `margin` (default -1e-8).
bool is_hurwitz(const MatrixXd& m, double margin = -1e-8);

/// PBH test on the eigenvalues of A with non-negative real part.
bool is_stabilizable(const MatrixXd& A, const MatrixXd& B);

/// Numerical rank with tolerance relative to the largest singular value.
int rank(const MatrixXd& m, double rel_tol = 1e-10);

/// Solves F' X + X F + C = 0 for X via the Kronecker form
/// (I ⊗ F' + F' ⊗ I) vec(X) = -vec(C). Intended for n ≤ 10.
MatrixXd solve_lyapunov(const MatrixXd& F, const MatrixXd& C);

/// Matrix of the linear map vec(X) ↦ vec(F' X + X F).
MatrixXd lyapunov_operator(const MatrixXd& F);

MatrixXd block_diag(const std::vector<MatrixXd>& blocks);

/// Kronecker product.
MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

/// Column-major vectorization.
VectorXd vec(const MatrixXd& m);

/// L with L L' = m for symmetric PSD m (negative eigenvalues clamped).
MatrixXd psd_factor(const MatrixXd& m);

}  // namespace opdg::linalg
