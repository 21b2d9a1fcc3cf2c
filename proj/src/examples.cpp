#include "opdg/examples.hpp"

#include <stdexcept>

namespace opdg {

namespace {

MatrixXd diag(std::initializer_list<double> v) {
  VectorXd d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) d(k++) = x;
  return d.asDiagonal();
}

MatrixXd mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> v) {
  MatrixXd m(r, c);
  auto it = v.begin();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

LqGame example1() {
  LqGame g;
  g.dynamics.A = mat(6, 6, {-1.2, 0, 0, 0, 0, 1.75,  //
                            0, 2.1, 0, 0, 0, 0,      //
                            -1, 0, 2.95, 0, 0, 0,    //
                            0, 0, 0, 2.05, 0, 1.5,   //
                            2, 0, 0, 0, 1, -4.15,    //
                            0, 0, 0, 0, 0, 1.85});
  g.dynamics.B = {mat(6, 2, {1, 1, 3, 0, 2.1, 4, 0, 0, 0.1, 2, 1, 0.9}),
                  mat(6, 2, {1.3, 1, 1, -1.1, 0, 0, 2, -1, 0, -2, 4, 2.1})};
  g.costs = {{diag({10, 4, 2, 3, 4, 4}), {diag({1.5, 1}), diag({0, 0})}},
             {diag({8, 1, 5, 1, 3, 2}), {diag({0.1, 0}), diag({1, 1})}}};
  g.x0 = mat(6, 1, {-0.5, -1.9, 0.8, -0.6, 2.9, -0.1});
  return g;
}

LqGame example2() {
  LqGame g;
  g.dynamics.A = mat(3, 3, {0, 1, 0, 0, 0, 0, 0, 1, 0});
  g.dynamics.B = {mat(3, 1, {0, 0, 0.14}), mat(3, 1, {0, 1, 0})};
  g.costs = {{diag({1, 1, 5}), {diag({1}), diag({0.25})}},
             {diag({0.344, 0.076, 1.409}), {diag({0.19}), diag({1})}}};
  g.x0 = mat(3, 1, {-1.2, -0.95, 0.5});
  return g;
}

}  // namespace

LqGame example_game(const std::string& name) {
  if (name == "example1") return example1();
  if (name == "example2") return example2();
  throw std::invalid_argument("unknown example '" + name + "' (expected example1 or example2)");
}

std::vector<std::string> example_names() { return {"example1", "example2"}; }

}  // namespace opdg
