#include "rgd/generator.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rgd {

namespace {

// sqrt(h^2 - |xi + Pi(theta)|^2); zero is only accepted at the risk-neutral point h = 0.
double tilt_root(const GenPoint& p, const Vector& theta) {
  require(theta.size() == p.dim(), ErrorCode::InvalidArgument, "theta must have n entries");
  const double q = (p.xi + p.proj.im(theta)).norm();
  const double arg = p.h * p.h - q * q;
  require(arg > 0.0 || (p.h == 0.0 && q == 0.0), ErrorCode::InfeasibleTheta,
          "|xi + Pi(theta)| reaches the Sharpe bound h");
  return std::sqrt(std::max(arg, 0.0));
}

std::vector<double> linspace(double lo, double hi, int k) {
  if (k <= 1) return {0.5 * (lo + hi)};
  std::vector<double> v(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (k - 1);
  return v;
}

// All points of the cube grid {values}^dim, as columns.
Matrix cube_grid(Eigen::Index dim, const std::vector<double>& values) {
  const auto k = static_cast<Eigen::Index>(values.size());
  Eigen::Index total = 1;
  for (Eigen::Index i = 0; i < dim; ++i) total *= k;
  Matrix out(dim, total);
  for (Eigen::Index c = 0; c < total; ++c) {
    Eigen::Index rest = c;
    for (Eigen::Index i = 0; i < dim; ++i) {
      out(i, c) = values[static_cast<std::size_t>(rest % k)];
      rest /= k;
    }
  }
  return out;
}

}  // namespace

GenPoint make_gen_point(Projectord proj, Vector xi, double h, double delta, Vector z) {
  require(xi.size() == proj.dim() && z.size() == proj.dim(), ErrorCode::InvalidArgument,
          "xi and z must have n entries");
  require(h >= 0.0 && delta >= 0.0, ErrorCode::InvalidArgument, "h and delta must be nonnegative");
  const double x = xi.norm();
  require(x + delta < h || (h == 0.0 && delta == 0.0 && x == 0.0), ErrorCode::InfeasibleTheta,
          "|xi| + delta must stay below h");
  return GenPoint{std::move(proj), std::move(xi), h, delta, std::move(z)};
}

GenPoint make_gen_point(const MarketSpec& spec, const SPDMatrixd& a, Vector z) {
  auto proj = make_projector(spec.sigma, a);
  Vector xi = xi_hat(proj, spec.b);
  return make_gen_point(std::move(proj), std::move(xi), spec.h, spec.delta, std::move(z));
}

double lemma_objective(const GenPoint& p, const Vector& phi, const Vector& theta) {
  const Vector r = p.z - phi;
  return p.xi.dot(phi) - theta.dot(r) - p.h * r.norm();
}

Vector phi_bar_of(const GenPoint& p, const Vector& theta) {
  const double root = tilt_root(p, theta);
  Vector out = p.proj.im(p.z);
  if (root == 0.0) return out;
  const double w = p.proj.ker(p.z).norm();
  out += (w / root) * (p.xi + p.proj.im(theta));
  return out;
}

double g_value(const GenPoint& p, const Vector& theta) {
  const double root = tilt_root(p, theta);
  const Vector w = p.proj.ker(p.z);
  return -p.proj.ker(theta).dot(w) + p.xi.dot(p.proj.im(p.z)) - root * w.norm();
}

double gen_theta(const GenPoint& p, const Vector& theta) {
  require(theta.size() == p.dim(), ErrorCode::InvalidArgument, "theta must have n entries");
  require(theta.norm() <= p.delta + 1e-12, ErrorCode::InfeasibleTheta, "|theta| exceeds delta");
  return g_value(p, theta);
}

double gen_rho(const GenPoint& p) { return -(p.h + p.delta) * p.z.norm(); }

SaddleResult gen_robust(const GenPoint& p) {
  const Eigen::Index n = p.dim();
  SaddleResult out{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), 0.0, 0.0};
  const double zn = p.z.norm();
  if (zn == 0.0) return out;

  // G(theta) = xi.Pi(z) - Pi^perp(theta).w - sqrt(h^2 - |xi + Pi(theta)|^2)|w| with w = Pi^perp(z).
  // Spending s of the radius against xi and the rest along w gives the
  // concave objective sqrt(delta^2 - s^2) + sqrt(h^2 - (|xi| - s)^2), maximal at
  // s = delta |xi| / (h + delta).
  const Vector w = p.proj.ker(p.z);
  const double wn = w.norm();
  if (p.delta > 0.0 && wn > 1e-14 * zn) {
    const double hd = p.h + p.delta;
    const double ratio = p.xi.norm() / hd;
    out.theta_bar = -(p.delta / hd) * p.xi + p.delta * std::sqrt(std::max(0.0, 1.0 - ratio * ratio)) / wn * w;
  }
  out.theta_bar_im = p.proj.im(out.theta_bar);
  out.value = g_value(p, out.theta_bar);
  out.phi_bar = phi_bar_of(p, out.theta_bar);
  out.hedge = p.a().inverse_sqrt() * out.phi_bar;
  const double r = (p.z - out.phi_bar).norm();
  const double lower = p.xi.dot(out.phi_bar) - (p.delta + p.h) * r;
  out.minmax_gap = std::abs(out.value - lower);
  return out;
}

BallGrid ball_grid(Eigen::Index n, double delta, const BallGridOptions& opts) {
  require(n >= 1 && delta >= 0.0, ErrorCode::InvalidArgument, "ball grid needs n >= 1 and delta >= 0");
  BallGrid out;
  if (delta == 0.0) {
    out.points.push_back(Vector::Zero(n));
    out.covering_radius = 0.0;
    return out;
  }
  if (n == 2) {
    require(opts.directions >= 3 && opts.radii >= 1, ErrorCode::GridError, "polar grid too coarse");
    out.points.push_back(Vector::Zero(2));
    for (int i = 1; i <= opts.radii; ++i) {
      const double r = delta * i / opts.radii;
      for (int j = 0; j < opts.directions; ++j) {
        const double phi = 2.0 * std::numbers::pi * j / opts.directions;
        Vector v(2);
        v << r * std::cos(phi), r * std::sin(phi);
        out.points.push_back(std::move(v));
      }
    }
    out.covering_radius = delta / (2.0 * opts.radii) + delta * std::numbers::pi / opts.directions;
    return out;
  }
  const int k = opts.points_per_axis;
  require(k >= 2, ErrorCode::GridError, "ball grid needs at least two points per axis");
  require(std::pow(static_cast<double>(k), static_cast<double>(n)) <= 2.0e6, ErrorCode::GridError,
          "ball grid too large");
  const Matrix cube = cube_grid(n, linspace(-delta, delta, k));
  out.points.reserve(static_cast<std::size_t>(cube.cols()));
  for (Eigen::Index c = 0; c < cube.cols(); ++c) {
    Vector v = cube.col(c);
    const double r = v.norm();
    if (r > delta) v *= delta / r;
    out.points.push_back(std::move(v));
  }
  out.covering_radius = std::sqrt(static_cast<double>(n)) * delta / (k - 1);
  return out;
}

Matrix image_basis(const Projectord& proj) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(proj.p_im());
  return es.eigenvectors().rightCols(proj.traded());
}

MinmaxReport minmax_check(const GenPoint& p, const MinmaxOptions& opts) {
  const double slack = p.h - p.xi.norm() - p.delta;
  require(slack > 0.0, ErrorCode::InvalidArgument, "minmax check needs |xi| + delta < h");
  const Eigen::Index d = p.proj.traded();
  const double zn = p.z.norm();
  const double radius = opts.radius > 0.0 ? opts.radius : 10.0 * (1.0 + zn) * p.h / slack;
  int k = opts.phi_points_per_axis;
  if (k <= 0) k = d == 1 ? 2001 : d == 2 ? 201 : d == 3 ? 41 : 11;
  require(k >= 2, ErrorCode::GridError, "phi grid needs at least two points per axis");

  const Matrix basis = image_basis(p.proj);
  const Matrix phis = basis * cube_grid(d, linspace(-radius, radius, k));
  const Eigen::Index m = phis.cols();
  const Matrix resid = p.z.replicate(1, m) - phis;
  const Vector base = (phis.transpose() * p.xi) - p.h * resid.colwise().norm().transpose();

  const BallGrid thetas = ball_grid(p.dim(), p.delta, opts.theta);
  Vector lower = Vector::Constant(m, std::numeric_limits<double>::infinity());
  double inf_sup = std::numeric_limits<double>::infinity();
  for (const auto& th : thetas.points) {
    const Vector row = base - resid.transpose() * th;
    inf_sup = std::min(inf_sup, row.maxCoeff());
    lower = lower.cwiseMin(row);
  }
  const double sup_inf = lower.maxCoeff();

  const double rd = std::sqrt(static_cast<double>(d));
  const double eps_phi = rd * radius / (k - 1);
  const double bound = (zn + radius * rd) * thetas.covering_radius + (p.xi.norm() + p.delta + p.h) * eps_phi;
  return MinmaxReport{inf_sup, sup_inf, std::abs(inf_sup - sup_inf), bound, radius};
}

LipschitzProbe lipschitz_probe(const GenPoint& p, const Vector& z1, const Vector& z2) {
  GenPoint q = p;
  q.z = z1;
  const double f1 = gen_robust(q).value;
  q.z = z2;
  const double f2 = gen_robust(q).value;
  return {std::abs(f1 - f2), (p.delta + p.xi.norm() + p.h) * (z1 - z2).norm()};
}

}  // namespace rgd
