#pragma once

#include <utility>

#include "rgd/linalg.hpp"
#include "rgd/market.hpp"

namespace rgd {

/// Put on a non-traded asset L, hedged with a correlated traded asset S:
///   dS = S (b dt + sigma_S dB^1),  dL = L (gamma dt + beta (rho dB^1 + sqrt(1-rho^2) dB^2)),
/// with diagonal volatility bounds diag(a1_lo, a2_lo) <= a <= diag(a1_hi, a2_hi).
struct PutScenario {
  double S0 = 100.0;
  double L0 = 100.0;
  double sigma_S = 0.2;
  double beta = 0.2;
  double rho = 0.5;
  double gamma = 0.0;
  double b = 0.0;
  double strike = 100.0;
  double T = 1.0;
  double a1_lo = 0.8;
  double a2_lo = 0.8;
  double a1_hi = 1.2;
  double a2_hi = 1.2;
  double h = 0.3;
  double delta = 0.0;
};

MarketSpec to_market_spec(const PutScenario& s);
/// Throws InvalidArgument naming the first broken invariant.
void check_scenario(const PutScenario& s);

SPDMatrixd a_hi(const PutScenario& s);
SPDMatrixd a_lo(const PutScenario& s);

/// (rho, sqrt(1 - rho^2)), the loading of L on B.
Vector l_loading(const PutScenario& s);

/// Parameters of the closed form, evaluated at (t, L).
struct ClosedFormPut {
  double m;
  double beta_bar;
  double rho_bar;
  double d_plus;
  double d_minus;
};

ClosedFormPut closed_form_params(const PutScenario& s, double t, double L);
double closed_form_bound(const PutScenario& s, double t, double L);
/// dv/dx and d^2v/dx^2 of the closed form.
double closed_form_delta(const PutScenario& s, double t, double L);
double closed_form_gamma(const PutScenario& s, double t, double L);
Vector closed_form_Z(const PutScenario& s, double t, double L);
Vector closed_form_hedge(const PutScenario& s, double t, double L, const SPDMatrixd& a);
double k_compensator_rate(const PutScenario& s, double t, double L, const SPDMatrixd& a);
/// Derivative of closed_form_bound in gamma.
double gamma_sensitivity(const PutScenario& s, double t, double L);

double superreplication_price(const PutScenario& s, double t, double L);

/// Drift-free control regime: sigma_S = 1, gamma = 0, beta = 1, delta = 0, rho = 0.
struct ControlPoint {
  double beta_of_a;  // variance rate of L
  double gamma_of_a;
};

ControlPoint control_domain_point(const PutScenario& s, const SPDMatrixd& a);

struct ControlBound {
  double value;
  Matrix argmax;
};

/// Put value with drift gamma(a) and variance rate beta(a), maximized over a
/// grid of SPD matrices inside the Loewner interval.
ControlBound robust_control_bound(const PutScenario& s, int points_per_axis);

/// Undiscounted Black put on a forward.
double black_put(double forward, double strike, double vol, double tau);

}  // namespace rgd
