#include "opdg/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace opdg::linalg {

double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double min_eigenvalue(const MatrixXd& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const MatrixXd& m) {
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double spectral_abscissa(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const MatrixXd& m, double margin) {
  if (!m.allFinite()) return false;
  return spectral_abscissa(m) < margin;
}

bool is_stabilizable(const MatrixXd& A, const MatrixXd& B) {
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<MatrixXd> es(A, false);
  const double scale = std::max({1.0, max_abs(A), max_abs(B)});
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex lambda = es.eigenvalues()(k);
    if (lambda.real() < 0.0) continue;
    CMatrix pbh(n, n + B.cols());
    pbh.leftCols(n) = A.cast<Complex>() - lambda * CMatrix::Identity(n, n);
    pbh.rightCols(B.cols()) = B.cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(pbh);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= 1e-9 * scale) return false;
  }
  return true;
}

int rank(const MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++r;
  }
  return r;
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

VectorXd vec(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

MatrixXd lyapunov_operator(const MatrixXd& F) {
  const Eigen::Index n = F.rows();
  const MatrixXd I = MatrixXd::Identity(n, n);
  return kron(I, F.transpose()) + kron(F.transpose(), I);
}

MatrixXd solve_lyapunov(const MatrixXd& F, const MatrixXd& C) {
  const Eigen::Index n = F.rows();
  const MatrixXd L = lyapunov_operator(F);
  Eigen::PartialPivLU<MatrixXd> lu(L);
  VectorXd x = lu.solve(-vec(C));
  // One step of iterative refinement.
  x += lu.solve(-vec(C) - L * x);
  MatrixXd X = Eigen::Map<MatrixXd>(x.data(), n, n);
  return X;
}

MatrixXd block_diag(const std::vector<MatrixXd>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  MatrixXd out = MatrixXd::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

MatrixXd psd_factor(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(m));
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

}  // namespace opdg::linalg
