#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rgd/pde.hpp"

using namespace rgd;

namespace {

double max_rel_error(const PutScenario& s, const PDEGrid& g) {
  double worst = 0.0;
  for (std::size_t i = 0; i < g.x_nodes.size(); ++i) {
    const double x = g.x_nodes[i];
    if (x < 0.5 * s.strike || x > 2.0 * s.strike) continue;
    const double ref = closed_form_bound(s, 0.0, x);
    worst = std::max(worst, std::abs(g.values(0, static_cast<Eigen::Index>(i)) - ref) / ref);
  }
  return worst;
}

PDEOptions grid(int n, int m) {
  PDEOptions o;
  o.space_nodes = n;
  o.time_steps = m;
  return o;
}

}  // namespace

TEST(Pde, TerminalSliceIsPayoff) {
  PutScenario s;
  const auto g = solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), grid(101, 50));
  for (std::size_t i = 0; i < g.x_nodes.size(); ++i)
    EXPECT_EQ(g.values(50, static_cast<Eigen::Index>(i)), std::max(s.strike - g.x_nodes[i], 0.0));
  EXPECT_EQ(g.t_nodes.back(), s.T);
  EXPECT_EQ(g.t_nodes.front(), 0.0);
}

TEST(Pde, MatchesClosedFormAndConverges) {
  PutScenario s;
  const auto drv = good_deal_driver(s, a_hi(s));
  const double e100 = max_rel_error(s, solve_semilinear_pde(s, drv, grid(100, 100)));
  const auto fine = solve_semilinear_pde(s, drv, grid(400, 400));
  const double e400 = max_rel_error(s, fine);
  EXPECT_LE(e400, 1e-3);
  EXPECT_GE(e100 / e400, 3.0);
  for (Eigen::Index i = 0; i < fine.values.cols(); ++i) {
    EXPECT_GE(fine.values(0, i), -1e-9);
    EXPECT_LE(fine.values(0, i), s.strike + 1e-9);
  }
}

TEST(Pde, ZeroDriverIsBlackScholesAtZeroRate) {
  PutScenario s;
  const double vol = beta_bar(s, a_hi(s));
  const auto g = solve_semilinear_pde(s, [](double, double) { return 0.0; }, grid(400, 400));
  for (std::size_t i = 0; i < g.x_nodes.size(); ++i) {
    const double x = g.x_nodes[i];
    if (x < 50 || x > 200) continue;
    const double ref = oracle::black_put(x, s.strike, vol, s.T);
    EXPECT_NEAR(g.values(0, static_cast<Eigen::Index>(i)), ref, 1e-3 * ref) << x;
  }
}

TEST(Pde, RhoDriverDominatesNodewise) {
  PutScenario s;
  s.delta = 0.05;
  const auto lo = solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), grid(400, 400));
  const auto hi = solve_semilinear_pde(s, rho_driver(s, a_hi(s)), grid(400, 400));
  EXPECT_GE((hi.values - lo.values).minCoeff(), -1e-6);
}

TEST(Pde, GoodDealDriverIsLinearDriftAtUpperMatrix) {
  PutScenario s;
  const auto c = closed_form_params(s, 0.0, 100.0);
  const auto d = good_deal_driver(s, a_hi(s));
  // a put has v_x <= 0, where the driver is the linear drift m x v_x
  for (double p : {-0.7, -0.1, 0.0})
    for (double x : {50.0, 100.0, 150.0}) EXPECT_NEAR(d(x, p), c.m * x * p, 1e-12);
  const double up = s.gamma + s.h * s.beta * std::sqrt(1 - s.rho * s.rho) * std::sqrt(s.a2_hi);
  EXPECT_NEAR(d(100.0, 0.3), up * 100.0 * 0.3, 1e-12);
}

TEST(Pde, GridAndStabilityErrors) {
  PutScenario s;
  const auto drv = good_deal_driver(s, a_hi(s));
  try {
    solve_semilinear_pde(s, drv, grid(3, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridError);
  }
  EXPECT_THROW(solve_semilinear_pde(s, drv, grid(50, 0)), Error);
  try {
    solve_semilinear_pde(s, [](double x, double p) { return 1e4 * x * std::abs(p) + 1e3; }, grid(50, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StabilityError);
  }
}

TEST(Pde, RobustSolverPicksUpperMatrixForZeroDrift) {
  PutScenario s;
  const auto r = solve_robust_pde(s, 5, grid(400, 400));
  const auto ref = solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), grid(400, 400));
  // the artificial Dirichlet edge at x_min makes v locally concave there, so compare on [K/2, 2K]
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.x_nodes.size(); ++i) {
    if (ref.x_nodes[i] < 0.5 * s.strike || ref.x_nodes[i] > 2.0 * s.strike) continue;
    const auto c = static_cast<Eigen::Index>(i);
    worst = std::max(worst, (r.grid.values.col(c) - ref.values.col(c)).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
  const Matrix& at_money = r.policy[static_cast<std::size_t>(r.choice[200])];
  EXPECT_LT((at_money - a_hi(s).matrix()).norm(), 1e-12);
}

TEST(Pde, InterpolationAndCsv) {
  PutScenario s;
  const auto g = solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), grid(401, 200));
  EXPECT_NEAR(g.value_at(0.0, 100.0), closed_form_bound(s, 0.0, 100.0), 1e-3);
  EXPECT_NEAR(g.delta_at(0.0, 100.0), closed_form_delta(s, 0.0, 100.0), 1e-3);
  EXPECT_NEAR(g.value_at(0.37, 93.0), closed_form_bound(s, 0.37, 93.0), 5e-3);
  std::ostringstream os;
  solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), grid(5, 1)).write_csv(os);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, 7), "t,x,v\r\n");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);
}
