#include "rgd/markovian.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "rgd/normal.hpp"

namespace rgd {

namespace {

void require_closed_form_regime(const PutScenario& s) {
  require(s.b == 0.0 && s.delta == 0.0, ErrorCode::RegimeError,
          "closed form needs b = 0 and delta = 0; use robust_control_bound or the PDE instead");
}

void require_time(const PutScenario& s, double t, double L) {
  require(t >= 0.0 && t <= s.T, ErrorCode::InvalidArgument, "t must lie in [0, T]");
  require(L > 0.0, ErrorCode::InvalidArgument, "L must be positive");
}

std::vector<double> linspace(double lo, double hi, int k) {
  if (k <= 1 || hi <= lo) return {hi};
  std::vector<double> v(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (k - 1);
  return v;
}

}  // namespace

SPDMatrixd a_hi(const PutScenario& s) {
  Vector d(2);
  d << s.a1_hi, s.a2_hi;
  return SPDMatrixd::diagonal(d);
}

SPDMatrixd a_lo(const PutScenario& s) {
  Vector d(2);
  d << s.a1_lo, s.a2_lo;
  return SPDMatrixd::diagonal(d);
}

Vector l_loading(const PutScenario& s) {
  Vector e(2);
  e << s.rho, std::sqrt(std::max(0.0, 1.0 - s.rho * s.rho));
  return e;
}

MarketSpec to_market_spec(const PutScenario& s) {
  Matrix sigma(1, 2);
  sigma << s.sigma_S, 0.0;
  Vector b(1);
  b << s.b;
  return MarketSpec{2, 1, sigma, b, s.h, s.delta, a_lo(s), a_hi(s), s.T};
}

void check_scenario(const PutScenario& s) {
  auto need = [](bool ok, const char* what) { require(ok, ErrorCode::InvalidArgument, what); };
  need(s.S0 > 0 && s.L0 > 0, "S0 and L0 must be positive");
  need(s.sigma_S > 0 && s.beta > 0, "sigma_S and beta must be positive");
  need(s.rho >= -1 && s.rho <= 1, "rho must lie in [-1, 1]");
  need(s.strike > 0 && s.T > 0, "strike and T must be positive");
  need(s.a1_lo > 0 && s.a2_lo > 0, "volatility bounds must be positive");
  need(s.a1_lo <= s.a1_hi && s.a2_lo <= s.a2_hi, "Loewner violation: a_lo <= a_hi fails on the diagonal");
  need(std::isfinite(s.gamma) && std::isfinite(s.b), "gamma and b must be finite");
  const auto v = validate(to_market_spec(s));
  if (!v.empty()) throw Error(ErrorCode::InvalidArgument, v.front().condition + ": " + v.front().detail);
}

ClosedFormPut closed_form_params(const PutScenario& s, double t, double L) {
  require_closed_form_regime(s);
  require_time(s, t, L);
  const double r2 = 1.0 - s.rho * s.rho;
  const double bb = s.beta * std::sqrt(s.rho * s.rho * s.a1_hi + r2 * s.a2_hi);
  const double m = s.gamma - s.h * s.beta * std::sqrt(r2) * std::sqrt(s.a2_hi);
  const double rb = s.beta * s.rho * std::sqrt(s.a1_hi) / bb;
  const double tau = s.T - t;
  ClosedFormPut out{m, bb, rb, 0.0, 0.0};
  if (tau > 0.0) {
    const double sd = bb * std::sqrt(tau);
    out.d_plus = (std::log(L / s.strike) + (m + 0.5 * bb * bb) * tau) / sd;
    out.d_minus = out.d_plus - sd;
  }
  return out;
}

double closed_form_bound(const PutScenario& s, double t, double L) {
  const auto c = closed_form_params(s, t, L);
  const double tau = s.T - t;
  if (tau <= 0.0) return std::max(s.strike - L, 0.0);
  return s.strike * norm_cdf(-c.d_minus) - L * std::exp(c.m * tau) * norm_cdf(-c.d_plus);
}

double closed_form_delta(const PutScenario& s, double t, double L) {
  const auto c = closed_form_params(s, t, L);
  const double tau = s.T - t;
  if (tau <= 0.0) return L < s.strike ? -1.0 : 0.0;
  return -std::exp(c.m * tau) * norm_cdf(-c.d_plus);
}

double closed_form_gamma(const PutScenario& s, double t, double L) {
  const auto c = closed_form_params(s, t, L);
  const double tau = s.T - t;
  if (tau <= 0.0) return 0.0;
  return std::exp(c.m * tau) * norm_pdf(c.d_plus) / (L * c.beta_bar * std::sqrt(tau));
}

Vector closed_form_Z(const PutScenario& s, double t, double L) {
  return s.beta * L * closed_form_delta(s, t, L) * l_loading(s);
}

Vector closed_form_hedge(const PutScenario& s, double t, double L, const SPDMatrixd& a) {
  const double v = s.beta * L * closed_form_delta(s, t, L);
  Vector out = Vector::Zero(2);
  out(0) = v * (s.rho + a(0, 1) / a(0, 0) * std::sqrt(1.0 - s.rho * s.rho));
  return out;
}

double k_compensator_rate(const PutScenario& s, double t, double L, const SPDMatrixd& a) {
  const double vx = closed_form_delta(s, t, L);
  const double vxx = closed_form_gamma(s, t, L);
  const double r2 = 1.0 - s.rho * s.rho;
  const double r = std::sqrt(r2);
  const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(0, 1);
  const double drift = s.h * s.beta * r * L * vx * (std::sqrt(det / a(0, 0)) - std::sqrt(s.a2_hi));
  const double diff = s.rho * s.rho * (s.a1_hi - a(0, 0)) + r2 * (s.a2_hi - a(1, 1)) - 2.0 * s.rho * r * a(0, 1);
  return drift + 0.5 * s.beta * s.beta * L * L * vxx * diff;
}

double gamma_sensitivity(const PutScenario& s, double t, double L) {
  const auto c = closed_form_params(s, t, L);
  const double tau = s.T - t;
  if (tau <= 0.0) return 0.0;
  return -tau * L * std::exp(c.m * tau) * norm_cdf(-c.d_plus);
}

double superreplication_price(const PutScenario& s, double t, double L) {
  require(std::abs(s.rho) < 1.0, ErrorCode::RegimeError, "superreplication formula needs |rho| < 1");
  require_time(s, t, L);
  return t < s.T ? s.strike : std::max(s.strike - L, 0.0);
}

ControlPoint control_domain_point(const PutScenario& s, const SPDMatrixd& a) {
  require(s.sigma_S == 1.0 && s.gamma == 0.0 && s.beta == 1.0 && s.delta == 0.0 && s.rho == 0.0,
          ErrorCode::RegimeError, "control domain needs sigma_S = 1, gamma = 0, beta = 1, delta = 0, rho = 0");
  const double a11 = a(0, 0), a12 = a(0, 1), a22 = a(1, 1);
  const double arg = s.h * s.h - s.b * s.b / a11;
  require(arg > 0.0, ErrorCode::InfeasibleTheta, "h^2 <= b^2 / a11");
  const double det = a11 * a22 - a12 * a12;
  return {a22, -s.b * a12 / a11 - std::sqrt(arg) * std::sqrt(det) / std::sqrt(a11)};
}

double black_put(double forward, double strike, double vol, double tau) {
  if (tau <= 0.0 || vol <= 0.0) return std::max(strike - forward, 0.0);
  const double sd = vol * std::sqrt(tau);
  const double dp = (std::log(forward / strike) + 0.5 * sd * sd) / sd;
  return strike * norm_cdf(-(dp - sd)) - forward * norm_cdf(-dp);
}

ControlBound robust_control_bound(const PutScenario& s, int points_per_axis) {
  require(points_per_axis >= 2, ErrorCode::GridError, "control grid needs at least two points per axis");
  const Matrix lo = a_lo(s).matrix();
  const Matrix hi = a_hi(s).matrix();
  ControlBound best{-std::numeric_limits<double>::infinity(), Matrix()};
  auto better = [&](double v, const Matrix& a) {
    if (best.argmax.size() == 0) return true;
    const double tie = 1e-12 * std::max(1.0, std::abs(best.value));
    if (v > best.value + tie) return true;
    if (v < best.value - tie) return false;
    // ties: larger a22, then larger a11, then smaller |a12|
    const Matrix& b = best.argmax;
    if (a(1, 1) != b(1, 1)) return a(1, 1) > b(1, 1);
    if (a(0, 0) != b(0, 0)) return a(0, 0) > b(0, 0);
    return std::abs(a(0, 1)) < std::abs(b(0, 1));
  };
  for (double a11 : linspace(s.a1_lo, s.a1_hi, points_per_axis)) {
    for (double a22 : linspace(s.a2_lo, s.a2_hi, points_per_axis)) {
      const double r = std::min(std::sqrt((a11 - s.a1_lo) * (a22 - s.a2_lo)),
                                std::sqrt((s.a1_hi - a11) * (s.a2_hi - a22)));
      std::vector<double> off = r > 0.0 ? linspace(-r, r, points_per_axis) : std::vector<double>{};
      off.push_back(0.0);
      for (double a12 : off) {
        Matrix m(2, 2);
        m << a11, a12, a12, a22;
        if (!loewner_leq<double>(lo, m) || !loewner_leq<double>(m, hi)) continue;
        if (a11 * a22 - a12 * a12 <= 0.0) continue;
        const SPDMatrixd a(m);
        const auto cp = control_domain_point(s, a);
        const double v = black_put(s.L0 * std::exp(cp.gamma_of_a * s.T), s.strike, std::sqrt(cp.beta_of_a), s.T);
        if (better(v, m)) best = {v, m};
      }
    }
  }
  return best;
}

}  // namespace rgd
