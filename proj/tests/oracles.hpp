#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "rgd/generator.hpp"

namespace oracle {

using rgd::Matrix;
using rgd::Vector;

// F^theta written out with an independently computed matrix square root.
inline double expanded_gen_theta(const Matrix& sigma, const Matrix& a, const Vector& b, double h, const Vector& z,
                                 const Vector& theta) {
  const Matrix c = a.sqrt();
  const Matrix sas = sigma * a * sigma.transpose();
  const Matrix pi = c * sigma.transpose() * sas.inverse() * sigma * c;
  const Matrix perp = Matrix::Identity(a.rows(), a.cols()) - pi;
  const Vector xi = c * sigma.transpose() * sas.inverse() * b;
  const Vector q = xi + pi * theta;
  return -(perp * theta).dot(perp * z) + xi.dot(pi * z) - std::sqrt(h * h - q.squaredNorm()) * (perp * z).norm();
}

// Maximizes phi -> F(phi, theta) over the subspace spanned by `basis` inside
// the cube [-radius, radius]^d by repeated grid zooming (F is concave in phi).
inline Vector zoom_argmax_phi(const rgd::GenPoint& p, const Vector& theta, const Matrix& basis, double radius,
                              int points = 41, int rounds = 16) {
  const auto d = basis.cols();
  Vector center = Vector::Zero(d);
  double half = radius;
  for (int r = 0; r < rounds; ++r) {
    Vector best = center;
    double best_v = -std::numeric_limits<double>::infinity();
    Eigen::Index total = 1;
    for (Eigen::Index i = 0; i < d; ++i) total *= points;
    for (Eigen::Index idx = 0; idx < total; ++idx) {
      Vector c(d);
      Eigen::Index rest = idx;
      for (Eigen::Index i = 0; i < d; ++i) {
        c(i) = center(i) - half + 2.0 * half * static_cast<double>(rest % points) / (points - 1);
        rest /= points;
      }
      const double v = rgd::lemma_objective(p, basis * c, theta);
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    center = best;
    half *= 4.0 / (points - 1);
  }
  return basis * center;
}

// Minimum of F^theta over a dense random sample of the delta-ball plus its boundary.
inline double sampled_min_theta(const rgd::GenPoint& p, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = p.dim();
  double best = rgd::gen_theta(p, Vector::Zero(n));
  for (int k = 0; k < samples; ++k) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
    const double r = k % 2 ? p.delta : p.delta * std::pow(u(rng), 1.0 / static_cast<double>(n));
    v *= r / v.norm();
    best = std::min(best, rgd::gen_theta(p, v));
  }
  return best;
}

// Cheap independent normal CDF via the complementary error function.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double black_put(double fwd, double strike, double vol, double tau) {
  if (tau <= 0.0 || vol <= 0.0) return std::max(strike - fwd, 0.0);
  const double s = vol * std::sqrt(tau);
  const double d1 = (std::log(fwd / strike) + 0.5 * s * s) / s;
  const double d2 = d1 - s;
  return strike * norm_cdf(-d2) - fwd * norm_cdf(-d1);
}

}  // namespace oracle
