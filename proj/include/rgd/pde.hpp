#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "rgd/markovian.hpp"

namespace rgd {

/// Nonlinear part of the valuation PDE as a function of (x, dv/dx). The PDE is
///   v_t + 1/2 vol^2 x^2 v_xx + driver(x, v_x) = 0,  v(T, x) = (K - x)^+.
using Driver = std::function<double(double x, double p)>;

/// Initial data for the backward march: the payoff averaged against a kernel
/// with vanishing moments up to order three, or the plain cell average, which
/// keeps convexity (what the volatility sup needs).
enum class PayoffSmoothing { FourthOrder, CellAverage };

struct PDEOptions {
  int space_nodes = 400;
  int time_steps = 400;
  double width = 8.0;         // half-width of the log-spot domain in units of vol sqrt(T)
  double vol = 0.0;           // 0 means beta_bar at a_hi
  int rannacher_steps = 2;    // leading steps replaced by two implicit half steps
  PayoffSmoothing smoothing = PayoffSmoothing::FourthOrder;
};

/// v on a (time x space) grid; row j of `values` is time t_nodes[j].
struct PDEGrid {
  std::vector<double> x_nodes;
  std::vector<double> t_nodes;
  Matrix values;

  double value_at(double t, double x) const;
  /// dv/dx by centered differences, linear in t.
  double delta_at(double t, double x) const;
  void write_csv(std::ostream& os) const;
};

double beta_bar(const PutScenario& s, const SPDMatrixd& a);

/// gamma x p - F(a^{1/2} beta x p e) with F the robust generator at a.
Driver good_deal_driver(const PutScenario& s, const SPDMatrixd& a);
/// gamma x p + (h + delta) |a^{1/2} beta x p e|, the driver built from F'.
Driver rho_driver(const PutScenario& s, const SPDMatrixd& a);

PDEGrid solve_semilinear_pde(const PutScenario& s, const Driver& driver, const PDEOptions& opts = {});

/// Sup over a Loewner grid of volatility matrices of the good-deal
/// Hamiltonian, with the maximizing matrix lagged by one time step. Uses
/// the options' smoothing as given; CellAverage is the safe choice.
struct RobustPDEResult {
  PDEGrid grid;
  std::vector<Matrix> policy;  // candidate matrices
  std::vector<int> choice;     // policy index per node at t = 0
};

RobustPDEResult solve_robust_pde(const PutScenario& s, int a_points_per_axis, const PDEOptions& opts = {});

}  // namespace rgd
