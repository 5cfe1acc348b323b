#include "rgd/market.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rgd {

namespace {

std::vector<double> linspace(double lo, double hi, int k) {
  if (k <= 1 || hi <= lo) return {lo};
  std::vector<double> v(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (k - 1);
  return v;
}

constexpr double kMaxGridCandidates = 2.0e5;

std::string describe(const Matrix& m) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) os << "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ", ";
      os << m(i, j);
    }
  }
  os << ']';
  return os.str();
}

}  // namespace

Vector xi_hat(const Projectord& proj, const Vector& b) {
  require(b.size() == proj.traded(), ErrorCode::InvalidArgument, "drift must have d entries");
  const Matrix& m = proj.loading();
  const Matrix gram = m * m.transpose();
  return m.transpose() * gram.ldlt().solve(b);
}

Vector xi_hat(const MarketSpec& spec, const SPDMatrixd& a) {
  return xi_hat(make_projector(spec.sigma, a), spec.b);
}

Vector xi_theta(const MarketSpec& spec, const SPDMatrixd& a, const Vector& theta) {
  require(theta.size() == spec.n, ErrorCode::InvalidArgument, "theta must have n entries");
  require(theta.norm() <= spec.delta + 1e-14, ErrorCode::InfeasibleTheta, "|theta| exceeds delta");
  const auto proj = make_projector(spec.sigma, a);
  Vector out = xi_hat(proj, spec.b) + proj.im(theta);
  require(out.norm() < spec.h, ErrorCode::InfeasibleTheta, "|xi_theta| reaches the Sharpe bound h");
  return out;
}

std::vector<SPDMatrixd> loewner_grid(const SPDMatrixd& lo, const SPDMatrixd& hi, int points_per_axis,
                                     const Tolerances& tol) {
  const Eigen::Index n = lo.size();
  require(hi.size() == n, ErrorCode::InvalidArgument, "bounds differ in dimension");
  const Matrix& l = lo.matrix();
  const Matrix& u = hi.matrix();
  const Matrix gap = u - l;

  struct Axis {
    Eigen::Index i, j;
    std::vector<double> values;
  };
  std::vector<Axis> axes;
  double combos = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      std::vector<double> vals;
      if (i == j) {
        vals = linspace(l(i, i), u(i, i), points_per_axis);
      } else {
        const double r = std::sqrt(std::max(0.0, gap(i, i)) * std::max(0.0, gap(j, j)));
        const double from = std::max(l(i, j), u(i, j)) - r;
        const double to = std::min(l(i, j), u(i, j)) + r;
        vals = to > from ? linspace(from, to, points_per_axis) : std::vector<double>{0.5 * (l(i, j) + u(i, j))};
        if (to > from) {
          // keep both corner values so a_lo and a_hi themselves are sampled
          vals.push_back(l(i, j));
          vals.push_back(u(i, j));
          std::sort(vals.begin(), vals.end());
          vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        }
      }
      combos *= static_cast<double>(vals.size());
      axes.push_back({i, j, std::move(vals)});
    }
  }

  std::vector<SPDMatrixd> out;
  auto try_add = [&](const Matrix& m) {
    if (!loewner_leq<double>(l, m, tol.loewner) || !loewner_leq<double>(m, u, tol.loewner)) return;
    try {
      out.emplace_back(m, tol);
    } catch (const Error&) {
      // boundary of the SPD cone
    }
  };

  if (combos > kMaxGridCandidates) {
    // Too many entries for a product grid: walk the segment from lo to hi.
    for (double s : linspace(0.0, 1.0, points_per_axis)) try_add(l + s * gap);
    return out;
  }

  std::vector<std::size_t> idx(axes.size(), 0);
  Matrix m(n, n);
  while (true) {
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const double v = axes[k].values[idx[k]];
      m(axes[k].i, axes[k].j) = v;
      m(axes[k].j, axes[k].i) = v;
    }
    try_add(m);
    std::size_t k = 0;
    while (k < axes.size() && ++idx[k] == axes[k].values.size()) idx[k++] = 0;
    if (k == axes.size()) break;
  }
  return out;
}

SupResult sup_xi_norm(const MarketSpec& spec, int points_per_axis, const Tolerances& tol) {
  SupResult best{-1.0, Matrix()};
  for (const auto& a : loewner_grid(spec.a_lo, spec.a_hi, points_per_axis, tol)) {
    const double v = xi_hat(make_projector(spec.sigma, a, tol), spec.b).norm();
    if (v > best.value) best = {v, a.matrix()};
  }
  return best;
}

std::vector<Violation> validate(const MarketSpec& spec, const FeasibilityOptions& opts) {
  std::vector<Violation> out;
  auto add = [&](std::string cond, std::string detail, std::optional<Matrix> w = std::nullopt) {
    out.push_back({std::move(cond), std::move(detail), std::move(w)});
  };

  bool shapes_ok = true;
  if (spec.n < 1 || spec.d < 1 || spec.d > spec.n) {
    add("dimensions", "need 1 <= d <= n");
    shapes_ok = false;
  }
  if (spec.sigma.rows() != spec.d || spec.sigma.cols() != spec.n) {
    add("dimensions", "sigma must be d x n");
    shapes_ok = false;
  }
  if (spec.b.size() != spec.d) {
    add("dimensions", "b must have d entries");
    shapes_ok = false;
  }
  if (spec.a_lo.size() != spec.n || spec.a_hi.size() != spec.n) {
    add("dimensions", "volatility bounds must be n x n");
    shapes_ok = false;
  }
  if (!(spec.h >= 0.0)) add("sharpe_bound", "h must be nonnegative");
  if (!(spec.delta >= 0.0)) add("drift_radius", "delta must be nonnegative");
  if (!(spec.T > 0.0)) add("horizon", "T must be positive");
  if (!shapes_ok) return out;

  bool bounds_ok = true;
  const double lo_gap = detail::smallest_eigenvalue(spec.a_hi.matrix() - spec.a_lo.matrix());
  if (lo_gap < -opts.tol.loewner) {
    std::ostringstream os;
    os << "Loewner violation: a_lo <= a_hi fails, smallest eigenvalue of a_hi - a_lo is " << lo_gap;
    add("loewner", os.str(), spec.a_lo.matrix());
    bounds_ok = false;
  }

  Matrix ss = spec.sigma * spec.sigma.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(ss, Eigen::EigenvaluesOnly);
  const double ups = es.eigenvalues().minCoeff();
  const double lam = es.eigenvalues().maxCoeff();
  if (!(ups > 0.0) || lam / ups >= opts.tol.max_condition) {
    add("ellipticity", "sigma sigma^tr is not uniformly elliptic");
    bounds_ok = false;
  }
  if (!bounds_ok || !(spec.h >= 0.0) || !(spec.delta >= 0.0)) return out;

  try {
    const auto sup = sup_xi_norm(spec, opts.points_per_axis, opts.tol);
    if (sup.value < 0.0) {
      add("feasibility", "no sampled volatility matrix lies in [a_lo, a_hi]");
      return out;
    }
    const double worst = sup.value + spec.delta;
    // h = 0 with zero drift and no drift ambiguity is the risk-neutral-only case.
    const bool ok = worst == 0.0 || worst < spec.h - opts.margin;
    if (!ok) {
      std::ostringstream os;
      os << "sup |xi_hat(a)| + delta = " << worst << " is not below h - margin = " << spec.h - opts.margin
         << " at a = " << describe(sup.argmax);
      add("feasibility", os.str(), sup.argmax);
    }
  } catch (const Error& e) {
    add("feasibility", e.what());
  }
  return out;
}

void check_prior(const MarketSpec& spec, const PriorSpec& prior, const Tolerances& tol) {
  require(prior.a.size() == spec.n, ErrorCode::InvalidArgument, "prior matrix must be n x n");
  require(prior.theta.size() == spec.n, ErrorCode::InvalidArgument, "prior theta must have n entries");
  require(loewner_between(prior.a, spec.a_lo, spec.a_hi, tol.loewner), ErrorCode::InvalidArgument,
          "prior volatility outside [a_lo, a_hi]");
  require(prior.theta.norm() <= spec.delta + 1e-14, ErrorCode::InfeasibleTheta, "|theta| exceeds delta");
}

void check_kernel(const MarketSpec& spec, const NGDKernel& kernel) {
  require(kernel.lambda.size() == spec.n, ErrorCode::InvalidArgument, "kernel must have n entries");
  require(kernel.lambda.norm() <= spec.h + 1e-14, ErrorCode::InfeasibleKernel, "|lambda| exceeds h");
}

}  // namespace rgd
