#include "opdg/examples.hpp"
#include "opdg/game.hpp"
#include "opdg/game_io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace opdg;

namespace {

bool mentions(const std::vector<Violation>& v, const std::string& field) {
  for (const auto& x : v)
    if (x.field.find(field) != std::string::npos) return true;
  return false;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("opdg_test_" + name);
}

}  // namespace

TEST(Game, ExamplesAreValid) {
  for (const auto& name : example_names()) {
    const LqGame g = example_game(name);
    EXPECT_TRUE(validate_game(g).empty()) << name;
  }
  EXPECT_THROW(example_game("example3"), std::invalid_argument);
}

TEST(Game, ExampleDimensions) {
  const LqGame g1 = example_game("example1");
  EXPECT_EQ(g1.states(), 6);
  EXPECT_EQ(g1.players(), 2);
  EXPECT_EQ(g1.dynamics.total_inputs(), 4);
  const LqGame g2 = example_game("example2");
  EXPECT_EQ(g2.states(), 3);
  EXPECT_EQ(g2.dynamics.total_inputs(), 2);
  EXPECT_DOUBLE_EQ(g2.x0(1), -0.95);
}

TEST(Game, RejectsIndefiniteOwnPenalty) {
  LqGame g = test::scalar_game(1.0, 1.0, 1.0, -1.0);
  EXPECT_TRUE(mentions(validate_game(g), "R[1,1]"));
}

TEST(Game, RejectsIndefiniteStatePenalty) {
  LqGame g = test::scalar_game(1.0, 1.0, -0.5, 1.0);
  EXPECT_TRUE(mentions(validate_game(g), "Q[1]"));
}

TEST(Game, RejectsShapeMismatch) {
  LqGame g = test::scalar_game(1.0, 1.0, 1.0, 1.0);
  g.dynamics.B[0] = MatrixXd::Ones(2, 1);
  EXPECT_FALSE(validate_game(g).empty());
  g = test::scalar_game(1.0, 1.0, 1.0, 1.0);
  g.x0 = VectorXd::Ones(3);
  EXPECT_FALSE(validate_game(g).empty());
}

TEST(Game, SymmetrizesTinyAsymmetryOnly) {
  MatrixXd m(2, 2);
  m << 1.0, 0.5, 0.5 + 1e-13, 2.0;
  const auto s = symmetrized(m);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ((*s)(0, 1), (*s)(1, 0));
  m(1, 0) = 0.6;
  EXPECT_FALSE(symmetrized(m).has_value());

  LqGame g = test::symmetric_game();
  g.costs[0].Q(0, 1) += 0.1;
  EXPECT_THROW(symmetrize_game(g), std::invalid_argument);
}

TEST(Game, StackedInputsAndPlayerRows) {
  const LqGame g = example_game("example1");
  const MatrixXd B = stack_input_matrix(g.dynamics);
  EXPECT_EQ(B.cols(), 4);
  EXPECT_EQ(B.block(0, 2, 6, 2), g.B(1));
  EXPECT_EQ(g.dynamics.input_offset(1), 2);
  MatrixXd K = MatrixXd::Zero(4, 6);
  K.row(3).setOnes();
  EXPECT_EQ(player_rows(g.dynamics, K, 1).row(1), K.row(3));
}

TEST(Game, MethodNames) {
  for (MethodTag t : {MethodTag::kTfo, MethodTag::kWtdo, MethodTag::kIdo})
    EXPECT_EQ(method_from_string(to_string(t)), t);
  EXPECT_EQ(method_from_string("WTDO"), MethodTag::kWtdo);
  EXPECT_THROW(method_from_string("lqr"), std::invalid_argument);
}

TEST(GameIo, RoundTripIsExact) {
  const LqGame g = example_game("example1");
  const auto path = temp_file("game.json");
  write_json(path, game_to_json(g));
  const LqGame r = load_game(path);
  EXPECT_EQ(r.A(), g.A());
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(r.B(i), g.B(i));
    EXPECT_EQ(r.Q(i), g.Q(i));
    for (int j = 0; j < 2; ++j) EXPECT_EQ(r.R(i, j), g.R(i, j));
  }
  EXPECT_EQ(r.x0, g.x0);
  std::filesystem::remove(path);
}

TEST(GameIo, WritesSeventeenDigits) {
  Json j;
  j["v"] = 0.1;
  std::ostringstream os;
  write_json(os, j);
  EXPECT_NE(os.str().find("0.10000000000000001"), std::string::npos) << os.str();
}

TEST(GameIo, ParseErrorNamesLocation) {
  const auto path = temp_file("bad.json");
  std::ofstream(path) << "{\"A\": [[1, 2],\n";
  try {
    load_game(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(GameIo, SchemaErrorNamesField) {
  Json j = game_to_json(test::scalar_game(1.0, 1.0, 1.0, 1.0));
  j["players"][0]["R"][0] = "one";
  try {
    game_from_json(j);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("players[0].R[0]"), std::string::npos) << e.what();
  }
  j.erase("x0");
  EXPECT_THROW(game_from_json(j), ParseError);
}

TEST(GameIo, RaggedMatrixRejected) {
  const Json j = Json::parse("[[1, 2], [3]]");
  EXPECT_THROW(matrix_from_json(j, "A"), ParseError);
}

TEST(GameIo, PotentialRoundTrip) {
  PotentialFunction p;
  p.method = MethodTag::kTfo;
  p.Qp = MatrixXd::Identity(2, 2);
  p.Rp = 2.0 * MatrixXd::Identity(1, 1);
  p.Pp = MatrixXd::Identity(2, 2) / 3.0;
  p.Kp = MatrixXd::Ones(1, 2);
  p.omega = {MatrixXd::Identity(1, 1)};
  p.alpha = 2.0;
  const PotentialFunction r = potential_from_json(potential_to_json(p));
  EXPECT_EQ(r.method, p.method);
  EXPECT_EQ(r.Pp, p.Pp);
  EXPECT_EQ(r.omega.size(), 1u);
  EXPECT_EQ(r.alpha, 2.0);
}

TEST(GameIo, TrajectoryCsvHeader) {
  Trajectory t;
  t.x = MatrixXd::Ones(2, 3);
  t.u = MatrixXd::Zero(2, 2);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,x1,x2,x3,u1,u2");
}
