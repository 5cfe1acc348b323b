#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "rgd/errors.hpp"
#include "rgd/montecarlo.hpp"

using namespace rgd;

namespace {

PriorSpec prior_at(const SPDMatrixd& a) { return {a, Vector::Zero(2)}; }

struct Moments {
  double mean;
  double se;
};

template <typename Derived>
Moments moments(const Eigen::DenseBase<Derived>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = v.sum() / n;
  const double var = (v.derived().array() - mean).square().sum() / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

TEST(MonteCarlo, SameSeedGivesIdenticalPaths) {
  const PutScenario s;
  const auto p1 = simulate(s, prior_at(a_hi(s)), std::nullopt, 5000, 10, 7);
  const auto p2 = simulate(s, prior_at(a_hi(s)), std::nullopt, 5000, 10, 7);
  const auto p3 = simulate(s, prior_at(a_hi(s)), std::nullopt, 5000, 10, 8);
  EXPECT_TRUE(p1.L_paths == p2.L_paths);
  EXPECT_TRUE(p1.S_paths == p2.S_paths);
  EXPECT_TRUE(p1.increments[1] == p2.increments[1]);
  EXPECT_FALSE(p1.L_paths == p3.L_paths);
}

TEST(MonteCarlo, BundleIsTheConcatenationOfItsBlocks) {
  const PutScenario s;
  const auto full = simulate(s, prior_at(a_lo(s)), std::nullopt, kPathBlock + 100, 4, 11);
  const auto b1 = simulate_block(s, prior_at(a_lo(s)), std::nullopt, 100, 4, 11, 1);
  EXPECT_TRUE(full.L_paths.bottomRows(100) == b1.L_paths);
  EXPECT_TRUE(full.increments[0].bottomRows(100) == b1.increments[0]);
}

TEST(MonteCarlo, PathsArePositiveAndIncrementsHaveCovarianceDtI) {
  const PutScenario s;
  const auto b = simulate(s, prior_at(a_hi(s)), std::nullopt, 20000, 5, 3);
  EXPECT_GT(b.S_paths.minCoeff(), 0.0);
  EXPECT_GT(b.L_paths.minCoeff(), 0.0);
  for (int k = 0; k < b.n_steps; ++k) {
    const Vector w0 = b.increments[0].col(k), w1 = b.increments[1].col(k);
    const double n = static_cast<double>(w0.size());
    // var(w^2) = 2 dt^2 and var(w0 w1) = dt^2 for Gaussian increments
    const double se_diag = std::sqrt(2.0 / n) * b.dt, se_off = b.dt / std::sqrt(n);
    EXPECT_LE(std::abs(w0.squaredNorm() / n - b.dt), 5.0 * se_diag);
    EXPECT_LE(std::abs(w1.squaredNorm() / n - b.dt), 5.0 * se_diag);
    EXPECT_LE(std::abs(w0.dot(w1) / n), 5.0 * se_off);
  }
}

TEST(MonteCarlo, MarketPriceKernelMakesSAMartingale) {
  PutScenario s;
  s.b = 0.05;
  const auto a = a_hi(s);
  const Vector xi = xi_hat(to_market_spec(s), a);
  const auto q = simulate(s, prior_at(a), NGDKernel{-xi}, 100000, 1, 5);
  const auto m = moments(q.S_paths.col(1));
  EXPECT_LE(std::abs(m.mean - s.S0), 3.0 * m.se);

  // under the reference measure S keeps its drift
  const auto p = simulate(s, prior_at(a), NGDKernel{Vector::Zero(2)}, 100000, 1, 5);
  const auto mp = moments(p.S_paths.col(1));
  EXPECT_LE(std::abs(mp.mean - s.S0 * std::exp(s.b * s.T)), 3.0 * mp.se);
  EXPECT_GT(mp.mean - s.S0, 3.0 * mp.se);
}

TEST(MonteCarlo, LognormalMomentOfL) {
  PutScenario s;
  s.gamma = 0.05;
  const auto b = simulate(s, prior_at(SPDMatrixd::identity(2)), std::nullopt, 100000, 2, 9);
  const auto m = moments(b.L_paths.col(2));
  EXPECT_LE(std::abs(m.mean - s.L0 * std::exp(s.gamma * s.T)), 3.0 * m.se);
}

TEST(MonteCarlo, KernelAboveSharpeBoundIsRejected) {
  const PutScenario s;
  Vector lam(2);
  lam << 0.0, 0.31;
  try {
    simulate(s, prior_at(a_hi(s)), NGDKernel{lam}, 10, 2, 1);
    FAIL() << "expected InfeasibleKernel";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleKernel);
  }
}

TEST(MonteCarlo, PriorOutsideBoundsIsRejected) {
  const PutScenario s;
  EXPECT_THROW(simulate(s, prior_at(SPDMatrixd(2.0 * Matrix::Identity(2, 2))), std::nullopt, 10, 2, 1), Error);
}

TEST(TrackingError, ZeroHedgeLeavesTheBoundIncrement) {
  const PutScenario s;
  const auto b = simulate(s, prior_at(a_hi(s)), std::nullopt, 200, 8, 2);
  const auto model = default_hedging_model(s);
  const HedgeFn none = [](double, double, const SPDMatrixd&) { return Eigen::Vector2d::Zero().eval(); };
  const Matrix r = tracking_error(s, b, model.bound, none);
  EXPECT_EQ(r.col(0).cwiseAbs().maxCoeff(), 0.0);
  const double start = closed_form_bound(s, 0.0, s.L0);
  for (int p = 0; p < b.n_paths; ++p)
    for (int k = 1; k <= b.n_steps; ++k)
      EXPECT_NEAR(r(p, k), closed_form_bound(s, k * b.dt, b.L_paths(p, k)) - start, 1e-12);
}

TEST(TrackingError, StartsAtZeroWithTheHedge) {
  const PutScenario s;
  const auto b = simulate(s, prior_at(a_lo(s)), std::nullopt, 100, 4, 2);
  const auto model = default_hedging_model(s);
  EXPECT_TRUE(model.closed_form);
  EXPECT_EQ(tracking_error(s, b, model.bound, model.hedge).col(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TrackingError, TerminalMeanUnderUpperPriorIsNonpositive) {
  const PutScenario s;
  const auto b = simulate(s, prior_at(a_hi(s)), NGDKernel{Vector::Zero(2)}, 100000, 50, 17);
  const auto model = default_hedging_model(s);
  const auto m = moments(tracking_error(s, b, model.bound, model.hedge).col(b.n_steps));
  EXPECT_LE(m.mean, 3.0 * m.se);
}

// Drift of R under (a, lambda): -K + h beta sqrt(1-rho^2) sqrt(det a / a11) L v_x + lambda.a^{1/2}(Z - phi),
// integrated along the same paths.
TEST(TrackingError, DriftMatchesTheCompensatorAlongPaths) {
  const PutScenario s;
  Matrix am(2, 2);
  am << 1.0, 0.1, 0.1, 0.9;
  const SPDMatrixd a(am);
  const NGDKernel kernel = adversarial_kernel(s, a);
  const auto b = simulate(s, prior_at(a), kernel, 20000, 50, 23);
  const auto model = default_hedging_model(s);
  const Matrix r = tracking_error(s, b, model.bound, model.hedge);

  const double r2 = std::sqrt(1.0 - s.rho * s.rho);
  const double det = am.determinant();
  Vector resid(b.n_paths);
  Vector drift(b.n_paths);
  for (int p = 0; p < b.n_paths; ++p) {
    double acc = 0.0;
    for (int k = 0; k < b.n_steps; ++k) {
      const double t = k * b.dt, L = b.L_paths(p, k);
      const Vector z = closed_form_Z(s, t, L) - closed_form_hedge(s, t, L, a);
      acc += (-k_compensator_rate(s, t, L, a) +
              s.h * s.beta * r2 * std::sqrt(det / am(0, 0)) * L * closed_form_delta(s, t, L) +
              kernel.lambda.dot(a.sqrt() * z)) *
             b.dt;
    }
    drift(p) = acc;
    resid(p) = r(p, b.n_steps) - acc;
  }
  const auto m = moments(resid);
  EXPECT_LE(std::abs(m.mean), 3.0 * m.se);
  EXPECT_LT(drift.mean(), -0.5);
}

TEST(Supermartingale, HalvingTheStepKeepsTheEstimate) {
  const PutScenario s;
  std::vector<MCCell> cells = {{"a_hi/zero", prior_at(a_hi(s)), NGDKernel{Vector::Zero(2)}, false}};
  const std::vector<TimePair> pairs = {{0.0, 0.5}, {0.5, 1.0}};
  MCOptions coarse;
  coarse.n_paths = 20000;
  coarse.n_steps = 20;
  MCOptions fine = coarse;
  fine.n_steps = 40;
  const auto r1 = supermartingale_test(s, cells, pairs, coarse);
  const auto r2 = supermartingale_test(s, cells, pairs, fine);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& c1 = r1.cells[0];
    const auto& c2 = r2.cells[0];
    const double combined = std::hypot(c1.std_error[i], c2.std_error[i]);
    EXPECT_LT(std::abs(c1.mean_increment[i] - c2.mean_increment[i]), 2.0 * combined);
  }
}

TEST(Supermartingale, AdversarialKernelIsAlignedWithTheResidualRisk) {
  const PutScenario s;
  const auto a = a_hi(s);
  const auto k = adversarial_kernel(s, a);
  EXPECT_NEAR(k.lambda.norm(), s.h, 1e-12);
  // at a diagonal a_hi the residual risk lives in the second coordinate
  EXPECT_NEAR(k.lambda(0), 0.0, 1e-12);
  EXPECT_LT(k.lambda(1), 0.0);
  const auto broken = adversarial_kernel(s, a, 2.0);
  EXPECT_GT(broken.lambda(0), 0.0);
}

TEST(Supermartingale, MartingaleKernelsHaveNormH) {
  PutScenario s;
  s.b = 0.03;
  Matrix am(2, 2);
  am << 1.0, 0.1, 0.1, 0.9;
  const SPDMatrixd a(am);
  const auto ks = martingale_kernels(s, a);
  ASSERT_EQ(ks.size(), 2u);
  const auto proj = make_projector(to_market_spec(s).sigma, a);
  const Vector xi = xi_hat(proj, to_market_spec(s).b);
  for (const auto& k : ks) {
    EXPECT_NEAR(k.lambda.norm(), s.h, 1e-12);
    EXPECT_LT((proj.im(k.lambda) + xi).norm(), 1e-12);
  }
}

TEST(Supermartingale, BrokenHedgeIsDetectedOnSmallSample) {
  const PutScenario s;
  std::vector<MCCell> cells = {{"a_hi/adversarial", prior_at(a_hi(s)), std::nullopt, true}};
  MCOptions o;
  o.n_paths = 30000;
  o.n_steps = 25;
  const auto good = supermartingale_test(s, cells, default_pairs(s), o);
  o.hedge_multiplier = 2.0;
  const auto bad = supermartingale_test(s, cells, default_pairs(s), o);
  EXPECT_TRUE(good.passed());
  EXPECT_FALSE(bad.passed());
}

TEST(Supermartingale, OffGridPairIsRejected) {
  const PutScenario s;
  MCOptions o;
  o.n_paths = 10;
  o.n_steps = 4;
  EXPECT_THROW(supermartingale_test(s, standard_cells(s), {{0.0, 0.3}}, o), Error);
}

TEST(TrackingReportIO, CsvAndJsonCarryEveryCellAndPair) {
  const PutScenario s;
  MCOptions o;
  o.n_paths = 500;
  o.n_steps = 10;
  o.seed = 42;
  const std::vector<PriorSpec> priors = {prior_at(a_hi(s)), prior_at(a_lo(s))};
  const std::vector<NGDKernel> kernels = {{Vector::Zero(2)}, adversarial_kernel(s, a_hi(s))};
  const auto r = supermartingale_test(s, priors, kernels, default_pairs(s), o);
  ASSERT_EQ(r.cells.size(), 4u);

  const std::string csv = r.to_csv();
  std::size_t rows = 0;
  for (std::size_t pos = 0; (pos = csv.find("\r\n", pos)) != std::string::npos; pos += 2) ++rows;
  EXPECT_EQ(rows, 1u + 4u * 5u);
  EXPECT_EQ(csv.rfind("cell,a11,a12,a22,lambda1,lambda2,s,t,mean_increment,std_error,verdict", 0), 0u);

  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["seed"].get<std::uint64_t>(), 42u);
  EXPECT_EQ(j["n_paths"].get<int>(), 500);
  ASSERT_EQ(j["cells"].size(), 4u);
  EXPECT_EQ(j["cells"][0]["pairs"].size(), 5u);
  EXPECT_DOUBLE_EQ(j["cells"][1]["pairs"][2]["mean_increment"].get<double>(), r.cells[1].mean_increment[2]);

  const auto again = supermartingale_test(s, priors, kernels, default_pairs(s), o);
  EXPECT_EQ(again.to_csv(), csv);
}

TEST(TrackingReportIO, StandardErrorsArePositive) {
  const PutScenario s;
  MCOptions o;
  o.n_paths = 300;
  o.n_steps = 5;
  const auto r = supermartingale_test(s, standard_cells(s), default_pairs(s), o);
  EXPECT_EQ(r.cells.size(), 12u);
  for (const auto& c : r.cells)
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      EXPECT_GT(c.std_error[i], 0.0);
      EXPECT_EQ(c.verdict[i], c.mean_increment[i] <= 3.0 * c.std_error[i]);
    }
}
