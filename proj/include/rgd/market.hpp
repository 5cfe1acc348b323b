#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgd/linalg.hpp"

namespace rgd {

/// Static description of the traded market and of the ambiguity about it.
///
/// `sigma` is d x n with d <= n traded assets driven by an n-dimensional
/// canonical process; volatility ambiguity is the Loewner interval
/// [a_lo, a_hi] and drift ambiguity the ball of radius `delta`.
struct MarketSpec {
  int n;
  int d;
  Matrix sigma;
  Vector b;
  double h;
  double delta;
  SPDMatrixd a_lo;
  SPDMatrixd a_hi;
  double T;
};

/// A constant prior: volatility matrix a in [a_lo, a_hi] and drift point theta.
struct PriorSpec {
  SPDMatrixd a;
  Vector theta;
};

/// Girsanov kernel of a candidate valuation measure.
struct NGDKernel {
  Vector lambda;
};

struct FeasibilityOptions {
  int points_per_axis = 5;
  double margin = 1e-9;
  Tolerances tol{};
};

struct Violation {
  std::string condition;
  std::string detail;
  std::optional<Matrix> witness;
};

/// Market price of risk a^{1/2} sigma^tr (sigma a sigma^tr)^{-1} b.
Vector xi_hat(const Projectord& proj, const Vector& b);
Vector xi_hat(const MarketSpec& spec, const SPDMatrixd& a);

/// xi_hat(a) + Pi^a(theta). Throws InfeasibleTheta when |theta| > delta or
/// the result reaches the Sharpe bound h.
Vector xi_theta(const MarketSpec& spec, const SPDMatrixd& a, const Vector& theta);

/// Candidate volatility matrices inside [lo, hi], sampled entrywise on
/// uniform grids and filtered by Loewner membership. Grids with
/// 2k-1 points contain those with k points.
std::vector<SPDMatrixd> loewner_grid(const SPDMatrixd& lo, const SPDMatrixd& hi, int points_per_axis,
                                     const Tolerances& tol = {});

struct SupResult {
  double value;
  Matrix argmax;
};

/// sup over loewner_grid of |xi_hat(a)|.
SupResult sup_xi_norm(const MarketSpec& spec, int points_per_axis, const Tolerances& tol = {});

/// Empty iff every MarketSpec invariant holds.
std::vector<Violation> validate(const MarketSpec& spec, const FeasibilityOptions& opts = {});

void check_prior(const MarketSpec& spec, const PriorSpec& prior, const Tolerances& tol = {});
void check_kernel(const MarketSpec& spec, const NGDKernel& kernel);

}  // namespace rgd
