#include "opdg/ido.hpp"

#include "opdg/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>

namespace opdg {

namespace {

constexpr double kFactorFloor = 1e-9;
constexpr double kFailed = 1e30;

int tri(int d) { return d * (d + 1) / 2; }

MatrixXd from_factor(const double* v, int d) {
  MatrixXd L = MatrixXd::Zero(d, d);
  for (int j = 0, k = 0; j < d; ++j)
    for (int i = j; i < d; ++i) L(i, j) = v[k++];
  return L * L.transpose() + kFactorFloor * MatrixXd::Identity(d, d);
}

void to_factor(const MatrixXd& M, double* v) {
  const int d = static_cast<int>(M.rows());
  const Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("IDO initial weight is not positive definite");
  const MatrixXd L = llt.matrixL();
  for (int j = 0, k = 0; j < d; ++j)
    for (int i = j; i < d; ++i) v[k++] = L(i, j);
}

double hinge_of(const HamiltonianGradients& g) { return (-g.orig.cwiseProduct(g.pot)).cwiseMax(0.0).sum(); }

double trapezoid(const VectorXd& f, double h) {
  if (f.size() < 2) return 0.0;
  return h * (f.sum() - 0.5 * (f(0) + f(f.size() - 1)));
}

struct Problem {
  const LqGame* game;
  const NeSolution* ne;
  const Trajectory* traj;
  MatrixXd B;
  double u_norm;
  double penalty_weight;
  int n, m;
  int evaluations = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
};

struct Eval {
  double objective = kFailed;
  double e_u = 0.0;
  double hinge = 0.0;
  AreSolution are;
};

Eval evaluate(const Problem& p, const double* v) {
  Eval e;
  const MatrixXd Qp = from_factor(v, p.n);
  const MatrixXd Rp = from_factor(v + tri(p.n), p.m);
  try {
    e.are = solve_single_are(p.game->A(), p.B, Qp, Rp);
  } catch (const NumericalError&) {
    return e;
  }
  const MatrixXd du = p.traj->x * e.are.K.transpose() + p.traj->u;
  e.e_u = trapezoid(du.rowwise().squaredNorm(), p.traj->step);
  const HamiltonianGradients g = hamiltonian_gradients(*p.game, *p.ne, e.are.P, *p.traj);
  e.hinge = hinge_of(g);
  double scale = 0.0;
  for (Eigen::Index c = 0; c < g.orig.cols(); ++c)
    scale = std::max(scale, g.orig.col(c).cwiseAbs().maxCoeff() * g.pot.col(c).cwiseAbs().maxCoeff());
  const double hinge_n = scale > 0.0 ? e.hinge / (scale * static_cast<double>(p.traj->samples())) : 0.0;
  e.objective = e.e_u / p.u_norm + p.penalty_weight * hinge_n;
  if (!std::isfinite(e.objective)) e.objective = kFailed;
  return e;
}

double gsl_objective(const gsl_vector* x, void* params) {
  auto* p = static_cast<Problem*>(params);
  ++p->evaluations;
  const double f = evaluate(*p, x->data).objective;
  if (f < p->best) {
    p->best = f;
    p->best_x.assign(x->data, x->data + x->size);
  }
  return f;
}

using Vec = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
using Minimizer = std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)>;

// One Nelder-Mead run from p.best_x; returns true if the simplex collapsed.
bool run_simplex(Problem& p, int budget, double step, std::vector<double>& history) {
  const std::size_t dim = p.best_x.size();
  Vec x0(gsl_vector_alloc(dim), gsl_vector_free);
  Vec ss(gsl_vector_alloc(dim), gsl_vector_free);
  for (std::size_t k = 0; k < dim; ++k) gsl_vector_set(x0.get(), k, p.best_x[k]);
  gsl_vector_set_all(ss.get(), step);

  gsl_multimin_function fn{&gsl_objective, dim, &p};
  Minimizer mz(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim),
               gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(mz.get(), &fn, x0.get(), ss.get());
  const int stop = p.evaluations + budget;
  while (p.evaluations < stop) {
    if (gsl_multimin_fminimizer_iterate(mz.get()) != GSL_SUCCESS) break;
    history.push_back(p.best);
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(mz.get()), 1e-9) == GSL_SUCCESS) return true;
  }
  return false;
}

}  // namespace

double input_error(const LqGame& game, const MatrixXd& Qp, const MatrixXd& Rp, const Trajectory& traj) {
  const AreSolution are = solve_single_are(game.A(), stack_input_matrix(game.dynamics), Qp, Rp);
  const MatrixXd du = traj.x * are.K.transpose() + traj.u;
  return trapezoid(du.rowwise().squaredNorm(), traj.step);
}

double sign_hinge(const LqGame& game, const NeSolution& ne, const MatrixXd& Pp, const Trajectory& traj) {
  return hinge_of(hamiltonian_gradients(game, ne, Pp, traj));
}

IdoResult solve_ido(const LqGame& game, const NeSolution& ne, const Trajectory& traj, const IdoConfig& cfg) {
  if (cfg.max_evals < 1) throw std::invalid_argument("IDO max_evals must be at least 1");
  if (!(cfg.penalty_weight > 0.0)) throw std::invalid_argument("IDO penalty_weight must be positive");
  if (traj.samples() < 2 || traj.u.rows() != traj.samples())
    throw std::invalid_argument("IDO needs a trajectory with recorded inputs");

  Problem p;
  p.game = &game;
  p.ne = &ne;
  p.traj = &traj;
  p.B = stack_input_matrix(game.dynamics);
  p.n = game.states();
  p.m = game.dynamics.total_inputs();
  p.penalty_weight = cfg.penalty_weight;
  p.u_norm = std::max(trapezoid(traj.u.rowwise().squaredNorm(), traj.step), 1e-300);

  const MatrixXd Q0 = cfg.init_Qp.size() ? cfg.init_Qp : MatrixXd::Identity(p.n, p.n);
  const MatrixXd R0 = cfg.init_Rp.size() ? cfg.init_Rp : MatrixXd::Identity(p.m, p.m);
  std::vector<double> x0(static_cast<std::size_t>(tri(p.n) + tri(p.m)));
  to_factor(Q0 - kFactorFloor * MatrixXd::Identity(p.n, p.n), x0.data());
  to_factor(R0 - kFactorFloor * MatrixXd::Identity(p.m, p.m), x0.data() + tri(p.n));
  p.best_x = x0;
  p.best = evaluate(p, x0.data()).objective;
  p.evaluations = 1;

  gsl_error_handler_t* old = gsl_set_error_handler_off();
  IdoResult res;
  bool converged = false;
  if (cfg.max_evals > 1) {
    const int first = std::max(1, (cfg.max_evals - 1) * 2 / 3);
    run_simplex(p, first, cfg.initial_step, res.history);
    // Restart once around the best point to escape a degenerate simplex.
    converged = run_simplex(p, cfg.max_evals - p.evaluations, 0.1 * cfg.initial_step, res.history);
  }
  gsl_set_error_handler(old);

  const Eval best = evaluate(p, p.best_x.data());
  if (best.objective >= kFailed) throw SolverFailure("IDO found no candidate with a stabilizing potential ARE");
  auto& pot = res.potential;
  pot.method = MethodTag::kIdo;
  pot.Qp = from_factor(p.best_x.data(), p.n);
  pot.Rp = from_factor(p.best_x.data() + tri(p.n), p.m);
  pot.Pp = best.are.P;
  pot.Kp = best.are.K;
  res.e_u = best.e_u;
  res.hinge = best.hinge;
  res.objective = best.objective;
  res.evaluations = p.evaluations;
  res.converged = converged;
  return res;
}

}  // namespace opdg
