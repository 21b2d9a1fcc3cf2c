#include "opdg/sdp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace opdg::sdp {

// ---------------------------------------------------------------------------
// Affine expressions

AffineMatrix AffineMatrix::from_constant(const MatrixXd& c, Eigen::Index nvars) {
  AffineMatrix e;
  e.rows = c.rows();
  e.cols = c.cols();
  e.constant = c;
  e.coeffs = MatrixXd::Zero(c.size(), nvars);
  return e;
}

AffineMatrix AffineMatrix::padded(Eigen::Index n) const {
  if (n <= nvars()) return *this;
  AffineMatrix out = *this;
  out.coeffs.conservativeResize(Eigen::NoChange, n);
  out.coeffs.rightCols(n - nvars()).setZero();
  return out;
}

MatrixXd AffineMatrix::evaluate(const VectorXd& x) const {
  VectorXd v = Eigen::Map<const VectorXd>(constant.data(), constant.size());
  const Eigen::Index k = std::min<Eigen::Index>(nvars(), x.size());
  if (k > 0) v += coeffs.leftCols(k) * x.head(k);
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

namespace {

// Row permutation taking vec(M) to vec(M').
std::vector<Eigen::Index> transpose_index(Eigen::Index rows, Eigen::Index cols) {
  std::vector<Eigen::Index> idx(rows * cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) idx[i * cols + j] = j * rows + i;
  return idx;
}

}  // namespace

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix out;
  out.rows = cols;
  out.cols = rows;
  out.constant = constant.transpose();
  out.coeffs.resize(coeffs.rows(), coeffs.cols());
  const auto idx = transpose_index(rows, cols);
  for (std::size_t k = 0; k < idx.size(); ++k) out.coeffs.row(k) = coeffs.row(idx[k]);
  return out;
}

AffineMatrix AffineMatrix::symmetric_part() const {
  if (rows != cols) throw std::invalid_argument("symmetric_part of a non-square expression");
  return 0.5 * (*this + transpose());
}

AffineMatrix AffineMatrix::block(Eigen::Index i, Eigen::Index j, Eigen::Index r,
                                 Eigen::Index c) const {
  AffineMatrix out;
  out.rows = r;
  out.cols = c;
  out.constant = constant.block(i, j, r, c);
  out.coeffs.resize(r * c, coeffs.cols());
  for (Eigen::Index q = 0; q < c; ++q)
    for (Eigen::Index p = 0; p < r; ++p)
      out.coeffs.row(q * r + p) = coeffs.row((j + q) * rows + (i + p));
  return out;
}

AffineMatrix AffineMatrix::entry(Eigen::Index i, Eigen::Index j) const { return block(i, j, 1, 1); }

AffineMatrix AffineMatrix::trace() const {
  AffineMatrix out = from_constant(MatrixXd::Constant(1, 1, constant.trace()), nvars());
  for (Eigen::Index k = 0; k < std::min(rows, cols); ++k) out.coeffs.row(0) += coeffs.row(k * rows + k);
  return out;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
  if (rows != o.rows || cols != o.cols) throw std::invalid_argument("expression shape mismatch");
  const Eigen::Index n = std::max(nvars(), o.nvars());
  *this = padded(n);
  constant += o.constant;
  coeffs.leftCols(o.nvars()) += o.coeffs;
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) { return *this += -o; }

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }

AffineMatrix operator-(const AffineMatrix& a) { return -1.0 * a; }

AffineMatrix operator*(double s, AffineMatrix a) {
  a.constant *= s;
  a.coeffs *= s;
  return a;
}

AffineMatrix operator+(AffineMatrix a, const MatrixXd& c) {
  a.constant += c;
  return a;
}

AffineMatrix operator-(AffineMatrix a, const MatrixXd& c) {
  a.constant -= c;
  return a;
}

AffineMatrix operator*(const MatrixXd& m, const AffineMatrix& e) {
  if (m.cols() != e.rows) throw std::invalid_argument("expression shape mismatch");
  AffineMatrix out;
  out.rows = m.rows();
  out.cols = e.cols;
  out.constant = m * e.constant;
  out.coeffs.resize(out.rows * out.cols, e.nvars());
  // vec(M X) = (I ⊗ M) vec(X): apply M to each column block.
  for (Eigen::Index q = 0; q < e.cols; ++q)
    out.coeffs.middleRows(q * out.rows, out.rows) = m * e.coeffs.middleRows(q * e.rows, e.rows);
  return out;
}

AffineMatrix operator*(const AffineMatrix& e, const MatrixXd& m) {
  return (m.transpose() * e.transpose()).transpose();
}

AffineMatrix scalar_times(const AffineMatrix& s, const MatrixXd& m) {
  if (s.rows != 1 || s.cols != 1) throw std::invalid_argument("scalar_times needs a 1x1 expression");
  AffineMatrix out;
  out.rows = m.rows();
  out.cols = m.cols();
  out.constant = s.constant(0, 0) * m;
  out.coeffs = Eigen::Map<const VectorXd>(m.data(), m.size()) * s.coeffs;
  return out;
}

AffineMatrix block_diag(const std::vector<AffineMatrix>& blocks) {
  Eigen::Index n = 0, nv = 0;
  for (const auto& b : blocks) {
    n += b.rows;
    nv = std::max(nv, b.nvars());
  }
  AffineMatrix out = AffineMatrix::from_constant(MatrixXd::Zero(n, n), nv);
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    out.constant.block(off, off, b.rows, b.cols) = b.constant;
    for (Eigen::Index q = 0; q < b.cols; ++q)
      for (Eigen::Index p = 0; p < b.rows; ++p)
        out.coeffs.row((off + q) * n + off + p).head(b.nvars()) = b.coeffs.row(q * b.rows + p);
    off += b.rows;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Problem

int SdpProblem::add_variable(Variable v) {
  for (const auto& w : vars_)
    if (w.name == v.name) throw std::invalid_argument("duplicate variable '" + v.name + "'");
  v.offset = nvars_;
  nvars_ += v.count;
  vars_.push_back(std::move(v));
  return static_cast<int>(vars_.size()) - 1;
}

int SdpProblem::add_scalar(const std::string& name, std::optional<double> lower) {
  return add_variable({name, VarKind::kScalar, 1, 0, 1, lower});
}

int SdpProblem::add_symmetric(const std::string& name, int dim) {
  return add_variable({name, VarKind::kSymmetric, dim, 0, dim * (dim + 1) / 2, std::nullopt});
}

int SdpProblem::add_diagonal(const std::string& name, int dim, std::optional<double> lower) {
  return add_variable({name, VarKind::kDiagonal, dim, 0, dim, lower});
}

const Variable& SdpProblem::variable(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return v;
  throw std::invalid_argument("unknown variable '" + name + "'");
}

AffineMatrix SdpProblem::var(const std::string& name) const {
  for (std::size_t k = 0; k < vars_.size(); ++k)
    if (vars_[k].name == name) return var(static_cast<int>(k));
  throw std::invalid_argument("unknown variable '" + name + "'");
}

AffineMatrix SdpProblem::var(int id) const {
  const Variable& v = vars_.at(id);
  const Eigen::Index d = v.dim;
  AffineMatrix e = AffineMatrix::from_constant(MatrixXd::Zero(d, d), nvars_);
  switch (v.kind) {
    case VarKind::kScalar:
      e.coeffs(0, v.offset) = 1.0;
      break;
    case VarKind::kDiagonal:
      for (Eigen::Index i = 0; i < d; ++i) e.coeffs(i * d + i, v.offset + i) = 1.0;
      break;
    case VarKind::kSymmetric: {
      int k = v.offset;
      for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i, ++k) {
          e.coeffs(j * d + i, k) = 1.0;
          e.coeffs(i * d + j, k) = 1.0;
        }
      }
      break;
    }
  }
  return e;
}

void SdpProblem::add_equality(const AffineMatrix& e, const std::string& label, bool symmetric) {
  if (symmetric && e.rows != e.cols) throw std::invalid_argument(label + ": symmetric equality must be square");
  eqs_.push_back({e, label, symmetric});
}

void SdpProblem::add_psd(const AffineMatrix& e, const std::string& label) {
  if (e.rows != e.cols) throw std::invalid_argument(label + ": PSD block must be square");
  psd_.push_back({e.symmetric_part(), label});
}

void SdpProblem::add_margin(const AffineMatrix& e, double eps, const std::string& label) {
  margins_.push_back({e, eps, label});
}

void SdpProblem::minimize(const AffineMatrix& objective) {
  if (objective.rows != 1 || objective.cols != 1) throw std::invalid_argument("objective must be 1x1");
  objective_ = objective;
}

std::map<std::string, MatrixXd> SdpProblem::unpack(const VectorXd& x) const {
  std::map<std::string, MatrixXd> out;
  for (std::size_t k = 0; k < vars_.size(); ++k) out[vars_[k].name] = var(static_cast<int>(k)).evaluate(x);
  return out;
}

namespace {

void dump_matrix(std::ostream& os, const MatrixXd& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
}

void dump_expr(std::ostream& os, const AffineMatrix& e, Eigen::Index nv) {
  dump_matrix(os, e.constant);
  const MatrixXd c = e.padded(nv).coeffs;
  // Sparse coefficient triplets: entry index, variable index, value.
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> nz;
  for (Eigen::Index r = 0; r < c.rows(); ++r)
    for (Eigen::Index k = 0; k < c.cols(); ++k)
      if (c(r, k) != 0.0) nz.emplace_back(r, k, c(r, k));
  os << "coeffs " << nz.size() << '\n';
  for (const auto& [r, k, v] : nz) os << r << ' ' << k << ' ' << v << '\n';
}

}  // namespace

std::string SdpProblem::dump() const {
  std::ostringstream os;
  os.precision(17);
  os << "sdp 1\nvariables " << vars_.size() << ' ' << nvars_ << '\n';
  for (const auto& v : vars_) {
    const char* kind = v.kind == VarKind::kScalar ? "scalar" : v.kind == VarKind::kSymmetric ? "symmetric" : "diagonal";
    os << v.name << ' ' << kind << ' ' << v.dim << ' ' << v.offset;
    if (v.lower) os << " lower " << *v.lower;
    os << '\n';
  }
  os << "objective\n";
  dump_expr(os, objective_.rows ? objective_ : AffineMatrix::from_constant(MatrixXd::Zero(1, 1)), nvars_);
  for (const auto& e : eqs_) {
    os << "equality " << e.label << (e.symmetric ? " symmetric" : "") << '\n';
    dump_expr(os, e.expr, nvars_);
  }
  for (const auto& p : psd_) {
    os << "psd " << p.label << '\n';
    dump_expr(os, p.expr, nvars_);
  }
  for (const auto& m : margins_) {
    os << "margin " << m.label << ' ' << m.eps << '\n';
    dump_expr(os, m.expr, nvars_);
  }
  return os.str();
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal:
      return "optimal";
    case SdpStatus::kInfeasible:
      return "infeasible";
    case SdpStatus::kUnbounded:
      return "unbounded";
    case SdpStatus::kMaxIterations:
      return "max-iterations";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Independent checker

bool ConstraintReport::satisfied(double tol) const {
  return max_equality_violation <= tol && min_psd_eigenvalue >= -tol && min_margin_slack >= -tol;
}

ConstraintReport check_solution(const SdpProblem& problem, const VectorXd& x) {
  ConstraintReport r;
  r.min_psd_eigenvalue = std::numeric_limits<double>::infinity();
  r.min_margin_slack = std::numeric_limits<double>::infinity();
  double worst_violation = 0.0;
  const auto note = [&](double violation, const std::string& label) {
    if (violation > worst_violation) {
      worst_violation = violation;
      r.worst_label = label;
    }
  };
  for (const auto& e : problem.equalities()) {
    MatrixXd v = e.expr.evaluate(x);
    if (e.symmetric) v = v.triangularView<Eigen::Upper>();
    const double worst = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    r.max_equality_violation = std::max(r.max_equality_violation, worst);
    note(worst, e.label);
  }
  for (const auto& p : problem.psd_blocks()) {
    const MatrixXd v = p.expr.evaluate(x);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (v + v.transpose()), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    r.min_psd_eigenvalue = std::min(r.min_psd_eigenvalue, lo);
    note(-lo, p.label);
  }
  for (const auto& m : problem.margins()) {
    const MatrixXd v = m.expr.evaluate(x);
    if (!v.size()) continue;
    const double slack = v.minCoeff() - m.eps;
    r.min_margin_slack = std::min(r.min_margin_slack, slack);
    note(-slack, m.label);
  }
  for (const auto& v : problem.variables()) {
    if (!v.lower) continue;
    for (int k = 0; k < v.count; ++k) {
      const double slack = x(v.offset + k) - *v.lower;
      r.min_margin_slack = std::min(r.min_margin_slack, slack);
      note(-slack, v.name + " lower bound");
    }
  }
  if (problem.objective().rows) r.objective = problem.objective().evaluate(x)(0, 0);
  return r;
}

// ---------------------------------------------------------------------------
// Conic core:  min c'x  s.t.  G x + s = h,  A x = b,  s in K
// K = R^nl_+ x S^d1_+ x ... in svec coordinates (off-diagonals scaled by √2).

namespace {

const double kSqrt2 = std::sqrt(2.0);

struct Cone {
  Eigen::Index nl = 0;
  std::vector<Eigen::Index> dims;

  Eigen::Index size() const {
    Eigen::Index n = nl;
    for (auto d : dims) n += d * (d + 1) / 2;
    return n;
  }
  Eigen::Index degree() const { return nl + std::accumulate(dims.begin(), dims.end(), Eigen::Index{0}); }
  Eigen::Index offset(std::size_t block) const {
    Eigen::Index o = nl;
    for (std::size_t k = 0; k < block; ++k) o += dims[k] * (dims[k] + 1) / 2;
    return o;
  }
};

struct ConicData {
  VectorXd c;
  MatrixXd G;
  VectorXd h;
  MatrixXd A;
  VectorXd b;
  Cone cone;
};

MatrixXd smat(const Eigen::Ref<const VectorXd>& v, Eigen::Index d) {
  MatrixXd m(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    m(j, j) = v(k++);
    for (Eigen::Index i = j + 1; i < d; ++i, ++k) m(i, j) = m(j, i) = v(k) / kSqrt2;
  }
  return m;
}

void svec_into(const MatrixXd& m, Eigen::Ref<VectorXd> out) {
  const Eigen::Index d = m.rows();
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    out(k++) = m(j, j);
    for (Eigen::Index i = j + 1; i < d; ++i, ++k) out(k) = kSqrt2 * 0.5 * (m(i, j) + m(j, i));
  }
}

VectorXd svec(const MatrixXd& m) {
  VectorXd v(m.rows() * (m.rows() + 1) / 2);
  svec_into(m, v);
  return v;
}

// Nesterov-Todd scaling W with W^-T s = W z = lambda.
struct Scaling {
  VectorXd d;                 // orthant part
  std::vector<MatrixXd> R;    // PSD part: W(Z) = R' Z R
  std::vector<MatrixXd> Rinv;
  VectorXd lambda;            // diagonal in each PSD block
};

template <typename BlockFn, typename LinFn>
VectorXd map_cone(const Cone& cone, const VectorXd& v, LinFn lin, BlockFn blk) {
  VectorXd out(v.size());
  out.head(cone.nl) = lin(v.head(cone.nl));
  Eigen::Index off = cone.nl;
  for (std::size_t k = 0; k < cone.dims.size(); ++k) {
    const Eigen::Index d = cone.dims[k], len = d * (d + 1) / 2;
    svec_into(blk(k, smat(v.segment(off, len), d)), out.segment(off, len));
    off += len;
  }
  return out;
}

VectorXd apply_W(const Cone& c, const Scaling& w, const VectorXd& v) {
  return map_cone(c, v, [&](const VectorXd& u) -> VectorXd { return w.d.cwiseProduct(u); },
                  [&](std::size_t k, const MatrixXd& m) -> MatrixXd { return w.R[k].transpose() * m * w.R[k]; });
}

VectorXd apply_Wt(const Cone& c, const Scaling& w, const VectorXd& v) {
  return map_cone(c, v, [&](const VectorXd& u) -> VectorXd { return w.d.cwiseProduct(u); },
                  [&](std::size_t k, const MatrixXd& m) -> MatrixXd { return w.R[k] * m * w.R[k].transpose(); });
}

VectorXd apply_Winv(const Cone& c, const Scaling& w, const VectorXd& v) {
  return map_cone(c, v, [&](const VectorXd& u) -> VectorXd { return u.cwiseQuotient(w.d); },
                  [&](std::size_t k, const MatrixXd& m) -> MatrixXd {
                    return w.Rinv[k].transpose() * m * w.Rinv[k];
                  });
}

VectorXd apply_WinvT(const Cone& c, const Scaling& w, const VectorXd& v) {
  return map_cone(c, v, [&](const VectorXd& u) -> VectorXd { return u.cwiseQuotient(w.d); },
                  [&](std::size_t k, const MatrixXd& m) -> MatrixXd {
                    return w.Rinv[k] * m * w.Rinv[k].transpose();
                  });
}

VectorXd jordan(const Cone& c, const VectorXd& u, const VectorXd& v) {
  VectorXd out(u.size());
  out.head(c.nl) = u.head(c.nl).cwiseProduct(v.head(c.nl));
  Eigen::Index off = c.nl;
  for (auto d : c.dims) {
    const Eigen::Index len = d * (d + 1) / 2;
    const MatrixXd U = smat(u.segment(off, len), d), V = smat(v.segment(off, len), d);
    svec_into(0.5 * (U * V + V * U), out.segment(off, len));
    off += len;
  }
  return out;
}

// Solves lambda ∘ x = v for x when lambda is diagonal in each PSD block.
VectorXd lambda_div(const Cone& c, const VectorXd& lambda, const VectorXd& v) {
  VectorXd out(v.size());
  out.head(c.nl) = v.head(c.nl).cwiseQuotient(lambda.head(c.nl));
  Eigen::Index off = c.nl;
  for (auto d : c.dims) {
    Eigen::Index k = off;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double lj = lambda(off + j * d - j * (j - 1) / 2);
      for (Eigen::Index i = j; i < d; ++i, ++k) {
        const double li = lambda(off + i * d - i * (i - 1) / 2);
        out(k) = 2.0 * v(k) / (li + lj);
      }
    }
    off += d * (d + 1) / 2;
  }
  return out;
}

VectorXd identity(const Cone& c) {
  VectorXd e = VectorXd::Zero(c.size());
  e.head(c.nl).setOnes();
  Eigen::Index off = c.nl;
  for (auto d : c.dims) {
    for (Eigen::Index j = 0; j < d; ++j) e(off + j * d - j * (j - 1) / 2) = 1.0;
    off += d * (d + 1) / 2;
  }
  return e;
}

// Smallest "eigenvalue" of a cone vector.
double cone_min(const Cone& c, const VectorXd& v) {
  double m = std::numeric_limits<double>::infinity();
  if (c.nl) m = v.head(c.nl).minCoeff();
  Eigen::Index off = c.nl;
  for (auto d : c.dims) {
    const Eigen::Index len = d * (d + 1) / 2;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(smat(v.segment(off, len), d), Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues().minCoeff());
    off += len;
  }
  return m;
}

// Largest step a <= inf with lambda + a*dv in the cone (lambda scaled-diagonal).
double max_step(const Cone& c, const VectorXd& lambda, const VectorXd& dv) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < c.nl; ++i)
    if (dv(i) < 0.0) a = std::min(a, -lambda(i) / dv(i));
  Eigen::Index off = c.nl;
  for (auto d : c.dims) {
    const Eigen::Index len = d * (d + 1) / 2;
    VectorXd root(d);
    for (Eigen::Index j = 0; j < d; ++j) root(j) = 1.0 / std::sqrt(lambda(off + j * d - j * (j - 1) / 2));
    const MatrixXd M = root.asDiagonal() * smat(dv.segment(off, len), d) * root.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin < 0.0) a = std::min(a, -1.0 / lmin);
    off += len;
  }
  return a;
}

std::optional<Scaling> compute_scaling(const Cone& c, const VectorXd& s, const VectorXd& z) {
  Scaling w;
  const auto sl = s.head(c.nl), zl = z.head(c.nl);
  if (c.nl && (sl.minCoeff() <= 0.0 || zl.minCoeff() <= 0.0)) return std::nullopt;
  w.d = sl.cwiseQuotient(zl).cwiseSqrt();
  w.lambda.resize(s.size());
  w.lambda.head(c.nl) = sl.cwiseProduct(zl).cwiseSqrt();
  Eigen::Index off = c.nl;
  for (auto d : c.dims) {
    const Eigen::Index len = d * (d + 1) / 2;
    Eigen::LLT<MatrixXd> ls(smat(s.segment(off, len), d)), lz(smat(z.segment(off, len), d));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return std::nullopt;
    const MatrixXd Ls = ls.matrixL(), Lz = lz.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd lam = svd.singularValues();
    if (lam.minCoeff() <= 0.0) return std::nullopt;
    const VectorXd isq = lam.cwiseSqrt().cwiseInverse();
    const MatrixXd R = Ls * svd.matrixV() * isq.asDiagonal();
    // R^-1 = Λ^{1/2} V' Ls^-1 = Λ^{-1/2} U' Lz'.
    const MatrixXd Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    w.R.push_back(R);
    w.Rinv.push_back(Rinv);
    w.lambda.segment(off, len) = svec(MatrixXd(lam.asDiagonal()));
    off += len;
  }
  return w;
}

// Reduced KKT system for a fixed scaling:
//   A' dy + G' dz = rx,  A dx = ry,  G dx - W'W dz = rz.
// Null-space QR solve of the reduced KKT system. With dx = xp + N w, A xp = ry
// and A N = 0, the Newton step is a least-squares problem in (W^-T G) N, which
// avoids squaring its condition number.
class KktSolver {
 public:
  KktSolver(const ConicData& p, const Scaling& w) : p_(p), w_(w) {
    const Eigen::Index n = p.G.cols(), m = p.A.rows();
    Gs_.resize(p.G.rows(), n);
    for (Eigen::Index k = 0; k < n; ++k) Gs_.col(k) = apply_WinvT(p.cone, w, p.G.col(k));
    if (m > 0) {
      aqr_.compute(p.A.transpose());
      const MatrixXd Q = aqr_.householderQ();
      Ra_ = aqr_.matrixQR().topRows(m).triangularView<Eigen::Upper>();
      Y_ = Q.leftCols(m);
      N_ = Q.rightCols(n - m);
    } else {
      N_ = MatrixXd::Identity(n, n);
    }
    gqr_.compute(Gs_ * N_);
    const Eigen::Index r = N_.cols();
    Rg_ = gqr_.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    const double big = r > 0 ? Rg_.diagonal().cwiseAbs().maxCoeff() : 0.0;
    const double small = r > 0 ? Rg_.diagonal().cwiseAbs().minCoeff() : 1.0;
    if (small <= 1e-13 * std::max(1.0, big)) {
      for (Eigen::Index k = 0; k < r; ++k) {
        double& d = Rg_(k, k);
        if (std::abs(d) <= 1e-13 * std::max(1.0, big)) d = (d < 0 ? -1.0 : 1.0) * 1e-13 * std::max(1.0, big);
      }
    }
  }

  void solve(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& dx, VectorXd& dy,
             VectorXd& dz) const {
    raw(rx, ry, rz, dx, dy, dz);
    for (int refine = 0; refine < 2; ++refine) {
      const VectorXd ex = rx - p_.A.transpose() * dy - p_.G.transpose() * dz;
      const VectorXd ey = ry - p_.A * dx;
      const VectorXd ez = rz - p_.G * dx + apply_Wt(p_.cone, w_, apply_W(p_.cone, w_, dz));
      VectorXd cx, cy, cz;
      raw(ex, ey, ez, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  // A' dy + G' dz = rx, A dx = ry, G dx - W'W dz = rz.
  void raw(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& dx, VectorXd& dy,
           VectorXd& dz) const {
    const Eigen::Index m = p_.A.rows();
    const Eigen::Index r = N_.cols();
    VectorXd xp = VectorXd::Zero(p_.G.cols());
    if (m > 0) xp = Y_ * Ra_.transpose().triangularView<Eigen::Lower>().solve(ry);
    const VectorXd rzs = apply_WinvT(p_.cone, w_, rz);
    const VectorXd f = rzs - Gs_ * xp;
    const VectorXd qtf = gqr_.householderQ().transpose() * f;
    VectorXd rhs = Rg_.transpose().triangularView<Eigen::Lower>().solve(N_.transpose() * rx);
    rhs += qtf.head(r);
    const VectorXd wv = Rg_.triangularView<Eigen::Upper>().solve(rhs);
    dx = xp + N_ * wv;
    const VectorXd dzs = Gs_ * dx - rzs;  // W dz
    if (m > 0) {
      dy = Ra_.triangularView<Eigen::Upper>().solve(Y_.transpose() * (rx - Gs_.transpose() * dzs));
    } else {
      dy.resize(0);
    }
    dz = apply_Winv(p_.cone, w_, dzs);
  }

  const ConicData& p_;
  const Scaling& w_;
  MatrixXd Gs_;
  Eigen::HouseholderQR<MatrixXd> aqr_;
  Eigen::HouseholderQR<MatrixXd> gqr_;
  MatrixXd Ra_, Y_, N_, Rg_;
};

struct ConicResult {
  SdpStatus status = SdpStatus::kMaxIterations;
  VectorXd x, y, z, s;
  KktResiduals kkt;
  double pcost = 0.0;
  int iterations = 0;
};

ConicResult solve_conic(const ConicData& p, const SdpOptions& opt) {
  const Cone& cone = p.cone;
  const Eigen::Index n = p.G.cols(), m = p.A.rows();
  const double deg = static_cast<double>(cone.degree());
  const VectorXd e = identity(cone);
  const double resx0 = std::max(1.0, p.c.norm());
  const double resy0 = std::max(1.0, p.b.norm());
  const double resz0 = std::max(1.0, p.h.norm());

  ConicResult best;
  double best_merit = std::numeric_limits<double>::infinity();

  // Initial point from least-squares problems with W = I.
  VectorXd x, y, z, s;
  {
    Scaling w;
    w.d = VectorXd::Ones(cone.nl);
    w.lambda = e;
    for (auto d : cone.dims) {
      w.R.push_back(MatrixXd::Identity(d, d));
      w.Rinv.push_back(MatrixXd::Identity(d, d));
    }
    const KktSolver kkt(p, w);
    VectorXd dz;
    kkt.solve(VectorXd::Zero(n), p.b, p.h, x, y, dz);
    s = -dz;
    VectorXd xd;
    kkt.solve(-p.c, VectorXd::Zero(m), VectorXd::Zero(cone.size()), xd, y, z);
    const double ts = -cone_min(cone, s), tz = -cone_min(cone, z);
    if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
    if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
  }
  double tau = 1.0, kappa = 1.0;

  for (int it = 0; it <= opt.max_iterations; ++it) {
    const VectorXd rx = p.A.transpose() * y + p.G.transpose() * z + p.c * tau;
    const VectorXd ry = p.A * x - p.b * tau;
    const VectorXd rz = s + p.G * x - p.h * tau;
    const double cx = p.c.dot(x), by = p.b.dot(y), hz = p.h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double pcost = cx / tau;
    const double pres = std::max(ry.norm() / resy0, rz.norm() / resz0) / tau;
    const double dres = rx.norm() / resx0 / tau;
    const double gap = s.dot(z) / (tau * tau);
    const double relgap = gap / std::max(1.0, std::abs(pcost));

    const double merit = std::max({pres, dres, relgap});
    if (merit < best_merit) {
      best_merit = merit;
      best.x = x / tau;
      best.y = y / tau;
      best.z = z / tau;
      best.s = s / tau;
      best.kkt = {pres, dres, relgap};
      best.pcost = pcost;
    }
    best.iterations = it;

    if (pres <= opt.tol && dres <= opt.tol && relgap <= opt.tol) {
      best.status = SdpStatus::kOptimal;
      return best;
    }
    // Certificates of infeasibility, normalized by the gap term.
    const double pinf_den = -(hz + by);
    if (pinf_den > 0.0) {
      const double pinf = (p.A.transpose() * y + p.G.transpose() * z).norm() / resx0 / pinf_den;
      if (pinf <= opt.infeasibility_tol || (tau < opt.infeasibility_tol * kappa && pinf <= std::sqrt(opt.infeasibility_tol))) {
        best.status = SdpStatus::kInfeasible;
        best.y = y / pinf_den;
        best.z = z / pinf_den;
        return best;
      }
    }
    if (cx < 0.0) {
      const double dinf = std::max((p.A * x).norm() / resy0, (s + p.G * x).norm() / resz0) / -cx;
      if (dinf <= opt.infeasibility_tol) {
        best.status = SdpStatus::kUnbounded;
        return best;
      }
    }
    if (it == opt.max_iterations) break;

    const double mu = (s.dot(z) + tau * kappa) / (deg + 1.0);
    const auto w = compute_scaling(cone, s, z);
    if (!w) break;
    const KktSolver kkt(p, *w);
    const VectorXd& lambda = w->lambda;
    const VectorXd lsq = jordan(cone, lambda, lambda);

    VectorXd u2x, u2y, u2z;
    kkt.solve(-p.c, p.b, p.h, u2x, u2y, u2z);
    const double u2dot = p.c.dot(u2x) + p.b.dot(u2y) + p.h.dot(u2z);

    VectorXd dsa_s, dza_s;  // scaled affine directions
    double dtau_a = 0.0, dkappa_a = 0.0, sigma = 0.0;
    VectorXd dx, dy, dz, ds_s, dz_s;
    double dtau = 0.0, dkappa = 0.0, alpha = 0.0;

    for (int pass = 0; pass < 2; ++pass) {
      VectorXd dsv = -lsq;
      double dt = -tau * kappa;
      if (pass == 1) {
        dsv += sigma * mu * e - jordan(cone, dsa_s, dza_s);
        dt += sigma * mu - dtau_a * dkappa_a;
      }
      const double f = 1.0 - sigma;
      const VectorXd ld = lambda_div(cone, lambda, dsv);
      VectorXd u1x, u1y, u1z;
      kkt.solve(-f * rx, -f * ry, -f * rz - apply_Wt(cone, *w, ld), u1x, u1y, u1z);
      const double r4 = -f * rt - dt / tau;
      dtau = (r4 - (p.c.dot(u1x) + p.b.dot(u1y) + p.h.dot(u1z))) / (u2dot - kappa / tau);
      dx = u1x + dtau * u2x;
      dy = u1y + dtau * u2y;
      dz = u1z + dtau * u2z;
      dz_s = apply_W(cone, *w, dz);
      ds_s = ld - dz_s;
      dkappa = (dt - kappa * dtau) / tau;

      double amax = std::min(max_step(cone, lambda, ds_s), max_step(cone, lambda, dz_s));
      if (dtau < 0.0) amax = std::min(amax, -tau / dtau);
      if (dkappa < 0.0) amax = std::min(amax, -kappa / dkappa);
      if (pass == 0) {
        const double a_aff = std::min(1.0, amax);
        sigma = std::pow(1.0 - a_aff, 3);
        dsa_s = ds_s;
        dza_s = dz_s;
        dtau_a = dtau;
        dkappa_a = dkappa;
      } else {
        alpha = std::min(1.0, opt.step_fraction * amax);
      }
    }
    if (!(alpha > 1e-14)) break;

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * apply_Wt(cone, *w, ds_s);
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    if (!(x.allFinite() && z.allFinite() && s.allFinite()) || tau <= 0.0 || kappa <= 0.0) break;
  }
  best.status = SdpStatus::kMaxIterations;
  return best;
}

// Conic data for a problem; `keep` selects the independent equality rows.
struct Built {
  ConicData data;
  std::vector<Eigen::Index> eq_rows;  // all equality rows before reduction
  MatrixXd A_full;
  VectorXd b_full;
};

Built build(const SdpProblem& problem) {
  const Eigen::Index n = problem.num_scalars();
  Built out;
  ConicData& d = out.data;
  d.c = VectorXd::Zero(n);
  if (problem.objective().rows) d.c = problem.objective().padded(n).coeffs.row(0).transpose();

  // Equalities.
  std::vector<VectorXd> arows;
  std::vector<double> brows;
  for (const auto& e : problem.equalities()) {
    const AffineMatrix ex = e.expr.padded(n);
    for (Eigen::Index j = 0; j < ex.cols; ++j)
      for (Eigen::Index i = 0; i < ex.rows; ++i) {
        if (e.symmetric && i > j) continue;
        const Eigen::Index r = j * ex.rows + i;
        arows.push_back(ex.coeffs.row(r).transpose());
        brows.push_back(-ex.constant(i, j));
      }
  }
  out.A_full.resize(static_cast<Eigen::Index>(arows.size()), n);
  out.b_full.resize(static_cast<Eigen::Index>(arows.size()));
  for (std::size_t r = 0; r < arows.size(); ++r) {
    out.A_full.row(r) = arows[r].transpose();
    out.b_full(r) = brows[r];
  }

  // Orthant rows: margins then variable lower bounds, each normalized.
  std::vector<VectorXd> grows;
  std::vector<double> hrows;
  auto push_row = [&](VectorXd g, double h) {
    const double nrm = g.norm();
    if (nrm > 0.0) {
      g /= nrm;
      h /= nrm;
    }
    grows.push_back(std::move(g));
    hrows.push_back(h);
  };
  for (const auto& mg : problem.margins()) {
    const AffineMatrix ex = mg.expr.padded(n);
    for (Eigen::Index r = 0; r < ex.coeffs.rows(); ++r)
      push_row(-ex.coeffs.row(r).transpose(), ex.constant.data()[r] - mg.eps);
  }
  for (const auto& v : problem.variables()) {
    if (!v.lower) continue;
    for (int k = 0; k < v.count; ++k) {
      VectorXd g = VectorXd::Zero(n);
      g(v.offset + k) = -1.0;
      push_row(g, -*v.lower);
    }
  }
  d.cone.nl = static_cast<Eigen::Index>(grows.size());
  for (const auto& pb : problem.psd_blocks()) d.cone.dims.push_back(pb.expr.rows);

  const Eigen::Index rows = d.cone.size();
  d.G = MatrixXd::Zero(rows, n);
  d.h = VectorXd::Zero(rows);
  for (Eigen::Index r = 0; r < d.cone.nl; ++r) {
    d.G.row(r) = grows[r].transpose();
    d.h(r) = hrows[r];
  }
  Eigen::Index off = d.cone.nl;
  for (const auto& pb : problem.psd_blocks()) {
    const AffineMatrix ex = pb.expr.padded(n);
    const Eigen::Index dim = ex.rows, len = dim * (dim + 1) / 2;
    auto g = d.G.block(off, 0, len, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const MatrixXd ck = Eigen::Map<const MatrixXd>(ex.coeffs.col(k).data(), dim, dim);
      g.col(k) = -svec(ck);
    }
    auto hseg = d.h.segment(off, len);
    hseg = svec(ex.constant);
    // Positive rescaling of a block leaves the cone constraint unchanged.
    const double scale = std::max(g.cwiseAbs().maxCoeff(), hseg.cwiseAbs().maxCoeff());
    if (scale > 0.0) {
      g /= scale;
      hseg /= scale;
    }
    off += len;
  }
  return out;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options) {
  Built built = build(problem);
  ConicData& data = built.data;
  const Eigen::Index n = problem.num_scalars();
  SdpSolution sol;

  // Remove dependent equality rows, then normalize the kept ones.
  const MatrixXd& Af = built.A_full;
  const VectorXd& bf = built.b_full;
  data.A.resize(0, n);
  data.b.resize(0);
  bool consistent = true;
  if (Af.rows() > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Af.transpose());
    qr.setThreshold(1e-10);
    const Eigen::Index r = qr.rank();
    data.A.resize(r, n);
    data.b.resize(r);
    for (Eigen::Index k = 0; k < r; ++k) {
      const Eigen::Index row = qr.colsPermutation().indices()(k);
      const double nrm = Af.row(row).norm();
      data.A.row(k) = Af.row(row) / nrm;
      data.b(k) = bf(row) / nrm;
    }
    if (r > 0) {
      const VectorXd x0 = data.A.completeOrthogonalDecomposition().solve(data.b);
      const VectorXd res = Af * x0 - bf;
      const double scale = std::max(1.0, bf.cwiseAbs().maxCoeff());
      consistent = res.cwiseAbs().maxCoeff() <= 1e-9 * scale * std::max(1.0, Af.cwiseAbs().maxCoeff());
    } else {
      consistent = bf.cwiseAbs().maxCoeff() <= 1e-12;
    }
  }

  if (consistent) {
    const ConicResult r = solve_conic(data, options);
    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.kkt = r.kkt;
    sol.x = r.x;
  } else {
    sol.status = SdpStatus::kInfeasible;
    sol.x = VectorXd::Zero(n);
  }
  if (sol.x.size() != n) sol.x = VectorXd::Zero(n);
  sol.values = problem.unpack(sol.x);
  if (problem.objective().rows) sol.objective_value = problem.objective().evaluate(sol.x)(0, 0);
  if (sol.status == SdpStatus::kInfeasible && options.measure_infeasibility)
    sol.infeasibility = infeasibility_measure(problem, options);
  return sol;
}

double infeasibility_measure(const SdpProblem& problem, const SdpOptions& options) {
  SdpProblem relaxed;
  for (const auto& v : problem.variables()) {
    switch (v.kind) {
      case VarKind::kScalar:
        relaxed.add_scalar(v.name);
        break;
      case VarKind::kSymmetric:
        relaxed.add_symmetric(v.name, v.dim);
        break;
      case VarKind::kDiagonal:
        relaxed.add_diagonal(v.name, v.dim);
        break;
    }
  }
  const int tid = relaxed.add_scalar("__t", 0.0);
  const AffineMatrix t = relaxed.var(tid);
  const Eigen::Index nv = relaxed.num_scalars();
  auto broadcast = [&](Eigen::Index rows, Eigen::Index cols) {
    AffineMatrix b = AffineMatrix::from_constant(MatrixXd::Zero(rows, cols), nv);
    b.coeffs.col(nv - 1).setOnes();
    return b;
  };
  for (const auto& e : problem.equalities()) {
    const AffineMatrix ex = e.expr.padded(nv);
    const AffineMatrix tb = broadcast(ex.rows, ex.cols);
    relaxed.add_margin(tb - ex, 0.0, e.label + " (upper)");
    relaxed.add_margin(tb + ex, 0.0, e.label + " (lower)");
  }
  for (const auto& p : problem.psd_blocks()) {
    AffineMatrix tI = AffineMatrix::from_constant(MatrixXd::Zero(p.expr.rows, p.expr.rows), nv);
    for (Eigen::Index i = 0; i < p.expr.rows; ++i) tI.coeffs(i * p.expr.rows + i, nv - 1) = 1.0;
    relaxed.add_psd(p.expr.padded(nv) + tI, p.label);
  }
  for (const auto& m : problem.margins())
    relaxed.add_margin(m.expr.padded(nv) + broadcast(m.expr.rows, m.expr.cols), m.eps, m.label);
  for (const auto& v : problem.variables()) {
    if (!v.lower) continue;
    const AffineMatrix ve = relaxed.var(v.name);
    AffineMatrix diag = AffineMatrix::from_constant(MatrixXd::Zero(v.dim, 1), nv);
    for (int i = 0; i < v.dim; ++i) diag.coeffs.row(i) = ve.coeffs.row(i * v.dim + i);
    relaxed.add_margin(diag + broadcast(v.dim, 1), *v.lower, v.name + " lower bound");
  }
  relaxed.minimize(t);
  SdpOptions o = options;
  o.measure_infeasibility = false;
  const SdpSolution s = solve_sdp(relaxed, o);
  return std::max(0.0, s.values.at("__t")(0, 0));
}

}  // namespace opdg::sdp
