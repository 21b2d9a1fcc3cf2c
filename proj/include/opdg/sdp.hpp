#pragma once

// Small dense semidefinite programs.
//
// A problem is built from named decision variables (scalars, symmetric
// matrices stored as their upper triangle, diagonal matrices) and affine
// matrix expressions over them. Constraints are affine equalities, PSD
// blocks and element-wise margins e(x) >= eps. The solver is a primal-dual
// interior-point method on the homogeneous self-dual embedding with
// Nesterov-Todd scaling.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opdg::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kSdpTol = 1e-8;
inline constexpr double kStrictMargin = 1e-6;

/// Affine matrix-valued function of the stacked decision vector x:
/// vec(E(x)) = vec(constant) + coeffs * x (column-major vec).
/// Expressions built before later variables were declared are padded with
/// zero columns on use.
struct AffineMatrix {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  MatrixXd constant;
  MatrixXd coeffs;

  static AffineMatrix from_constant(const MatrixXd& c, Eigen::Index nvars = 0);

  Eigen::Index nvars() const { return coeffs.cols(); }
  MatrixXd evaluate(const VectorXd& x) const;
  AffineMatrix transpose() const;
  AffineMatrix symmetric_part() const;
  AffineMatrix entry(Eigen::Index i, Eigen::Index j) const;
  AffineMatrix block(Eigen::Index i, Eigen::Index j, Eigen::Index r, Eigen::Index c) const;
  AffineMatrix trace() const;
  /// Affine expression padded to `nvars` columns.
  AffineMatrix padded(Eigen::Index nvars) const;

  AffineMatrix& operator+=(const AffineMatrix& o);
  AffineMatrix& operator-=(const AffineMatrix& o);
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(const AffineMatrix& a);
AffineMatrix operator*(double s, AffineMatrix a);
AffineMatrix operator+(AffineMatrix a, const MatrixXd& c);
AffineMatrix operator-(AffineMatrix a, const MatrixXd& c);
AffineMatrix operator*(const MatrixXd& m, const AffineMatrix& e);
AffineMatrix operator*(const AffineMatrix& e, const MatrixXd& m);

/// s(x) * M for a 1x1 expression s.
AffineMatrix scalar_times(const AffineMatrix& s, const MatrixXd& m);

/// Block-diagonal assembly of square expressions.
AffineMatrix block_diag(const std::vector<AffineMatrix>& blocks);

enum class VarKind { kScalar, kSymmetric, kDiagonal };

struct Variable {
  std::string name;
  VarKind kind = VarKind::kScalar;
  int dim = 1;
  int offset = 0;  // first scalar in x
  int count = 1;   // scalars owned
  std::optional<double> lower;  // element-wise, scalar and diagonal kinds only
};

class SdpProblem {
 public:
  int add_scalar(const std::string& name, std::optional<double> lower = std::nullopt);
  int add_symmetric(const std::string& name, int dim);
  int add_diagonal(const std::string& name, int dim, std::optional<double> lower = std::nullopt);

  /// Matrix expression for a declared variable (1x1 for scalars).
  AffineMatrix var(int id) const;
  AffineMatrix var(const std::string& name) const;

  /// E(x) = 0. With `symmetric`, E must be square and only its upper
  /// triangle is imposed.
  void add_equality(const AffineMatrix& e, const std::string& label, bool symmetric = false);
  /// E(x) ⪰ 0; E must be square and is symmetrized.
  void add_psd(const AffineMatrix& e, const std::string& label);
  /// Every entry of E(x) >= eps.
  void add_margin(const AffineMatrix& e, double eps, const std::string& label);
  /// Minimize the 1x1 expression.
  void minimize(const AffineMatrix& objective);

  int num_scalars() const { return nvars_; }
  const std::vector<Variable>& variables() const { return vars_; }
  const Variable& variable(const std::string& name) const;

  struct Equality {
    AffineMatrix expr;
    std::string label;
    bool symmetric;
  };
  struct Psd {
    AffineMatrix expr;
    std::string label;
  };
  struct Margin {
    AffineMatrix expr;
    double eps;
    std::string label;
  };
  const std::vector<Equality>& equalities() const { return eqs_; }
  const std::vector<Psd>& psd_blocks() const { return psd_; }
  const std::vector<Margin>& margins() const { return margins_; }
  const AffineMatrix& objective() const { return objective_; }

  /// Reads the value of each variable out of a stacked vector.
  std::map<std::string, MatrixXd> unpack(const VectorXd& x) const;

  /// Plain-text serialization (format described in the README).
  std::string dump() const;

 private:
  int add_variable(Variable v);

  std::vector<Variable> vars_;
  int nvars_ = 0;
  std::vector<Equality> eqs_;
  std::vector<Psd> psd_;
  std::vector<Margin> margins_;
  AffineMatrix objective_;
};

enum class SdpStatus { kOptimal, kInfeasible, kUnbounded, kMaxIterations };
std::string to_string(SdpStatus s);

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kMaxIterations;
  VectorXd x;
  std::map<std::string, MatrixXd> values;
  double objective_value = 0.0;
  KktResiduals kkt;
  int iterations = 0;
  /// Smallest uniform relaxation t that makes the constraints feasible
  /// (0 for feasible problems; filled on kInfeasible).
  double infeasibility = 0.0;
};

struct SdpOptions {
  double tol = kSdpTol;
  double infeasibility_tol = 1e-8;
  int max_iterations = 200;
  double step_fraction = 0.99;
  bool measure_infeasibility = true;
};

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options = {});

/// Re-substitutes x into every constraint of the model, independently of the
/// solver's internal conic form.
struct ConstraintReport {
  double max_equality_violation = 0.0;
  double min_psd_eigenvalue = 0.0;   // +inf when there are no blocks
  double min_margin_slack = 0.0;     // min(e(x) - eps); +inf when none
  double objective = 0.0;
  std::string worst_label;

  bool satisfied(double tol = kSdpTol) const;
};

ConstraintReport check_solution(const SdpProblem& problem, const VectorXd& x);

/// Minimal t >= 0 such that all equalities hold within t (max-abs), all PSD
/// blocks have smallest eigenvalue >= -t and all margins are met up to t.
double infeasibility_measure(const SdpProblem& problem, const SdpOptions& options = {});

}  // namespace opdg::sdp
