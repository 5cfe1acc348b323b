#pragma once

#include <vector>

#include "rgd/linalg.hpp"
#include "rgd/market.hpp"

namespace rgd {

/// Arguments of the generators at one (a, z). `z` is already premultiplied,
/// i.e. callers pass a^{1/2} Z.
struct GenPoint {
  Projectord proj;  // carries sigma and a
  Vector xi;
  double h;
  double delta;
  Vector z;

  const SPDMatrixd& a() const noexcept { return proj.a(); }
  Eigen::Index dim() const noexcept { return proj.dim(); }
};

/// Checks |xi| + delta < h. The risk-neutral point h = delta = 0, xi = 0 is
/// accepted as well.
GenPoint make_gen_point(Projectord proj, Vector xi, double h, double delta, Vector z);
GenPoint make_gen_point(const MarketSpec& spec, const SPDMatrixd& a, Vector z);

struct SaddleResult {
  Vector phi_bar;    // maximizer in the scaled coordinates a^{1/2} phi
  Vector hedge;      // a^{-1/2} phi_bar, lies in Im sigma^tr
  Vector theta_bar;  // worst-case drift point, |theta_bar| <= delta
  Vector theta_bar_im;
  double value;
  double minmax_gap;  // G(theta_bar) - inf_theta F(phi_bar, theta), bounds the duality gap
};

/// F^theta(z).
double gen_theta(const GenPoint& p, const Vector& theta);

/// inf over the delta-ball of F^theta(z) together with its saddle point.
SaddleResult gen_robust(const GenPoint& p);

/// -(h + delta)|z|.
double gen_rho(const GenPoint& p);

/// Maximizer of phi -> lemma_objective(p, phi, theta) over Im (sigma a^{1/2})^tr.
Vector phi_bar_of(const GenPoint& p, const Vector& theta);

/// Value of that maximization, in closed form.
double g_value(const GenPoint& p, const Vector& theta);

/// xi.phi - theta.(z - phi) - h|z - phi|.
double lemma_objective(const GenPoint& p, const Vector& phi, const Vector& theta);

/// Finite sample of the closed delta-ball with a proven covering radius.
struct BallGrid {
  std::vector<Vector> points;
  double covering_radius;
};

struct BallGridOptions {
  int directions = 64;  // n = 2
  int radii = 16;       // n = 2
  int points_per_axis = 17;  // n = 1 and n >= 3
};

BallGrid ball_grid(Eigen::Index n, double delta, const BallGridOptions& opts = {});

struct MinmaxOptions {
  BallGridOptions theta{};
  int phi_points_per_axis = 0;  // 0 picks a default by dim C
  double radius = 0.0;          // 0 picks 10 (1+|z|) h / (h - |xi| - delta)
};

struct MinmaxReport {
  double inf_sup;
  double sup_inf;
  double gap;
  double resolution_bound;
  double radius;
};

/// Brute-force evaluation of both sides of the minmax identity over a ball
/// grid of U and a cube grid of the truncated subspace C.
MinmaxReport minmax_check(const GenPoint& p, const MinmaxOptions& opts = {});

struct LipschitzProbe {
  double lhs;
  double bound;
};

LipschitzProbe lipschitz_probe(const GenPoint& p, const Vector& z1, const Vector& z2);

/// Orthonormal basis (columns) of Im (sigma a^{1/2})^tr.
Matrix image_basis(const Projectord& proj);

}  // namespace rgd
