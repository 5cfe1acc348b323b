#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rgd/linalg.hpp"
#include "rgd/market.hpp"
#include "rgd/markovian.hpp"

namespace rgd {

/// Paths of (S, L) under the measure with Brownian motion
///   W^Q = W^P - int (lambda + theta) dt,
/// where B = a^{1/2} W^P. `increments` hold the W^Q increments.
struct PathBundle {
  double dt = 0.0;
  int n_paths = 0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  std::vector<Matrix> increments;  // one n_paths x n_steps block per component
  Matrix S_paths;                  // n_paths x (n_steps + 1)
  Matrix L_paths;
  SPDMatrixd a = SPDMatrixd::identity(2);
  Vector theta = Vector::Zero(2);
  std::optional<Vector> lambda;
};

/// Paths are drawn in blocks of this many; block k uses a generator seeded
/// from (seed, k), so any block can be rebuilt on its own.
inline constexpr int kPathBlock = 4096;

/// Exact lognormal stepping. Throws InfeasibleKernel if |lambda| > h.
PathBundle simulate(const PutScenario& s, const PriorSpec& prior, const std::optional<NGDKernel>& kernel,
                    int n_paths, int n_steps, std::uint64_t seed);

/// Paths [block * kPathBlock, block * kPathBlock + count) of the bundle above.
PathBundle simulate_block(const PutScenario& s, const PriorSpec& prior, const std::optional<NGDKernel>& kernel,
                          int count, int n_steps, std::uint64_t seed, std::uint64_t block);

using BoundFn = std::function<double(double t, double L)>;
using HedgeFn = std::function<Eigen::Vector2d(double t, double L, const SPDMatrixd& a)>;

/// R_t = bound(t, L_t) - bound(0, L_0) - int phi.(a^{1/2} xi_hat dt + dB), left-point
/// sums. Rows are paths, columns time nodes.
Matrix tracking_error(const PutScenario& s, const PathBundle& bundle, const BoundFn& bound, const HedgeFn& hedge);

/// Closed form when b = 0 and delta = 0, otherwise the robust PDE grid with
/// the hedge read off the saddle point of the generator.
struct HedgingModel {
  BoundFn bound;
  HedgeFn hedge;
  bool closed_form = false;
};

HedgingModel default_hedging_model(const PutScenario& s);

/// The kernel attaining max_{|lambda| <= h} lambda.a^{1/2}(Z - c phi_bar). Z is
/// always parallel to the loading of L, so the maximizer does not depend on (t, L).
NGDKernel adversarial_kernel(const PutScenario& s, const SPDMatrixd& a, double hedge_multiplier = 1.0);

/// -xi_hat(a) +- eta with eta spanning Ker(sigma a^{1/2}) and |lambda| = h.
std::vector<NGDKernel> martingale_kernels(const PutScenario& s, const SPDMatrixd& a);

struct TimePair {
  double s;
  double t;
};

std::vector<TimePair> default_pairs(const PutScenario& s);

struct MCCell {
  std::string label;
  PriorSpec prior;
  std::optional<NGDKernel> kernel;
  bool adversarial = false;  // kernel is recomputed from the prior and the multiplier
};

/// Priors {a_hi, a_lo, an off-diagonal interior point} crossed with the kernels
/// {0, the two martingale kernels, adversarial}.
std::vector<MCCell> standard_cells(const PutScenario& s);

struct MCOptions {
  int n_paths = 100000;
  int n_steps = 50;
  std::uint64_t seed = 20240917;
  double hedge_multiplier = 1.0;  // 2 breaks the hedge on purpose
  double threshold = 3.0;          // in standard errors
};

/// Linear fit of R_t - R_s on L_s evaluated at quantiles of L_s.
struct ConditionalCheck {
  std::vector<double> nodes;
  std::vector<double> fitted;
  std::vector<double> std_error;
  bool passed = true;
};

struct CellReport {
  std::string label;
  PriorSpec prior{SPDMatrixd::identity(2), Vector::Zero(2)};
  Vector lambda;
  std::vector<TimePair> pairs;
  std::vector<double> mean_increment;
  std::vector<double> std_error;
  std::vector<bool> verdict;
  std::vector<ConditionalCheck> conditional;

  bool passed() const;
};

struct TrackingReport {
  std::uint64_t seed = 0;
  int n_paths = 0;
  int n_steps = 0;
  double hedge_multiplier = 1.0;
  double threshold = 3.0;
  std::vector<CellReport> cells;

  bool passed() const;
  std::string to_csv() const;
  std::string to_json() const;
};

/// Every cell runs on the same seed, so the cells share their Brownian draws.
TrackingReport supermartingale_test(const PutScenario& s, const std::vector<MCCell>& cells,
                                    const std::vector<TimePair>& pairs, const MCOptions& opts = {},
                                    const HedgingModel* model = nullptr);

/// Cross product of priors and kernels.
TrackingReport supermartingale_test(const PutScenario& s, const std::vector<PriorSpec>& priors,
                                    const std::vector<NGDKernel>& kernels, const std::vector<TimePair>& pairs,
                                    const MCOptions& opts = {});

}  // namespace rgd
