#include "rgd/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include <Eigen/SparseLU>

#include "rgd/generator.hpp"

namespace rgd {

namespace {

struct Mesh {
  Vector y;
  Vector x;
  double dy;
  double dt;
};

Mesh make_mesh(const PutScenario& s, const PDEOptions& opts, double vol) {
  require(opts.space_nodes >= 5, ErrorCode::GridError, "need at least 5 space nodes");
  require(opts.time_steps >= 1, ErrorCode::GridError, "need at least one time step");
  require(opts.width > 0.0 && vol > 0.0 && std::isfinite(vol), ErrorCode::GridError, "degenerate spatial domain");
  const double half = opts.width * vol * std::sqrt(s.T);
  const double y0 = std::log(s.strike) - half;
  Mesh m;
  m.dy = 2.0 * half / (opts.space_nodes - 1);
  m.dt = s.T / opts.time_steps;
  m.y = Vector::LinSpaced(opts.space_nodes, y0, y0 + 2.0 * half);
  m.x = m.y.array().exp();
  for (Eigen::Index i = 1; i < m.x.size(); ++i)
    require(m.x(i) > m.x(i - 1), ErrorCode::GridError, "space nodes are not increasing");
  return m;
}

// Five-point stencils for u_y and u_yy on interior nodes, three-point next to the boundary.
struct Stencil {
  int first;
  double d1[5];
  double d2[5];
};

Stencil stencil_at(Eigen::Index i, Eigen::Index n, double dy) {
  Stencil st{};
  if (i >= 2 && i <= n - 3) {
    st.first = -2;
    const double c1 = 1.0 / (12.0 * dy), c2 = 1.0 / (12.0 * dy * dy);
    const double d1[5] = {c1, -8.0 * c1, 0.0, 8.0 * c1, -c1};
    const double d2[5] = {-c2, 16.0 * c2, -30.0 * c2, 16.0 * c2, -c2};
    std::copy(d1, d1 + 5, st.d1);
    std::copy(d2, d2 + 5, st.d2);
  } else {
    st.first = -1;
    const double c1 = 1.0 / (2.0 * dy), c2 = 1.0 / (dy * dy);
    const double d1[5] = {-c1, 0.0, c1, 0.0, 0.0};
    const double d2[5] = {c2, -2.0 * c2, c2, 0.0, 0.0};
    std::copy(d1, d1 + 5, st.d1);
    std::copy(d2, d2 + 5, st.d2);
  }
  return st;
}

double apply(const double* w, const Stencil& st, const Vector& u, Eigen::Index i) {
  double acc = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Eigen::Index j = i + st.first + k;
    if (w[k] != 0.0) acc += w[k] * u(j);
  }
  return acc;
}

// dv/dx at interior nodes.
Vector node_slopes(const Mesh& m, const Vector& u) {
  const Eigen::Index n = u.size();
  Vector p = Vector::Zero(n);
  for (Eigen::Index i = 1; i < n - 1; ++i) {
    const auto st = stencil_at(i, n, m.dy);
    p(i) = apply(st.d1, st, u, i) / m.x(i);
  }
  return p;
}

// Mean of (K - e^y)^+ over [lo, hi].
double payoff_mean(double strike, double lo, double hi) {
  const double k = std::log(strike);
  double acc = 0.0;
  if (lo < k) {
    const double top = std::min(hi, k);
    acc = strike * (top - lo) - (std::exp(top) - std::exp(lo));
  }
  return acc / (hi - lo);
}

// Payoff convolved with 4/3 box(dy) - 1/3 box(2 dy): the zeroth moment is one and
// the first three vanish, so smooth data move by O(dy^4) while the kink is smoothed.
Vector smoothed_payoff(double strike, const Mesh& m, bool fourth_order) {
  Vector u(m.y.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double y = m.y(i);
    const double cell = payoff_mean(strike, y - 0.5 * m.dy, y + 0.5 * m.dy);
    u(i) = fourth_order ? 4.0 / 3.0 * cell - 1.0 / 3.0 * payoff_mean(strike, y - m.dy, y + m.dy) : cell;
  }
  return u;
}

// Per-node variance and driver callback: the core time stepper shared by the
// fixed-driver and the policy-iteration solvers.
using NodeVariance = std::function<void(const Vector& u, Vector& var)>;
using NodeDriver = std::function<void(const Vector& u, const Vector& var, Vector& out)>;

PDEGrid march(const PutScenario& s, const Mesh& m, const PDEOptions& opts, const NodeVariance& variance,
              const NodeDriver& driver) {
  const Eigen::Index n = m.x.size();
  const int steps = opts.time_steps;
  PDEGrid g;
  g.x_nodes.assign(m.x.data(), m.x.data() + n);
  g.t_nodes.resize(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) g.t_nodes[static_cast<std::size_t>(j)] = s.T * j / steps;
  g.t_nodes.back() = s.T;
  g.values.resize(steps + 1, n);

  g.values.row(steps) = (s.strike - m.x.array()).max(0.0).matrix().transpose();
  Vector u = smoothed_payoff(s.strike, m, opts.smoothing == PayoffSmoothing::FourthOrder);

  std::vector<Stencil> stencils;
  for (Eigen::Index i = 0; i < n; ++i) stencils.push_back(stencil_at(i, n, m.dy));

  Vector var(n), drv(n), drv_prev(n), rhs(n);
  bool have_prev = false;
  const double cap = 10.0 * s.strike;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Vector lu_var;
  double lu_dt = -1.0, lu_theta = -1.0;
  auto factor = [&](double dt, double theta) {
    if (dt == lu_dt && theta == lu_theta && lu_var.size() == var.size() && lu_var == var) return;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(5 * n));
    trips.emplace_back(0, 0, 1.0);
    trips.emplace_back(n - 1, n - 1, 1.0);
    for (Eigen::Index i = 1; i < n - 1; ++i) {
      const auto& st = stencils[static_cast<std::size_t>(i)];
      const double k = 0.5 * var(i);
      for (int c = 0; c < 5; ++c) {
        double w = -theta * dt * k * (st.d2[c] - st.d1[c]);
        if (st.first + c == 0) w += 1.0;
        if (w != 0.0) trips.emplace_back(i, i + st.first + c, w);
      }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    lu.compute(a);
    require(lu.info() == Eigen::Success, ErrorCode::StabilityError, "implicit PDE system is singular");
    lu_var = var;
    lu_dt = dt;
    lu_theta = theta;
  };

  // theta = 1 is implicit Euler, theta = 1/2 Crank-Nicolson; d is the driver term.
  auto step = [&](double dt, double theta, const Vector& d) {
    for (Eigen::Index i = 1; i < n - 1; ++i) {
      const auto& st = stencils[static_cast<std::size_t>(i)];
      const double lu_i = 0.5 * var(i) * (apply(st.d2, st, u, i) - apply(st.d1, st, u, i));
      rhs(i) = u(i) + (1.0 - theta) * dt * lu_i + dt * d(i);
    }
    rhs(0) = s.strike;
    rhs(n - 1) = 0.0;
    factor(dt, theta);
    u = lu.solve(rhs);
  };

  for (int j = steps - 1; j >= 0; --j) {
    const int taken = steps - 1 - j;
    variance(u, var);
    driver(u, var, drv);
    if (taken < opts.rannacher_steps) {
      drv_prev = drv;
      step(0.5 * m.dt, 1.0, drv);
      driver(u, var, drv);
      step(0.5 * m.dt, 1.0, drv);
      have_prev = true;
    } else {
      Vector ext = drv;
      if (have_prev) ext = 1.5 * drv - 0.5 * drv_prev;
      drv_prev = drv;
      have_prev = true;
      step(m.dt, 0.5, ext);
    }
    if (!(u.cwiseAbs().maxCoeff() <= cap)) throw Error(ErrorCode::StabilityError, "PDE solution left [-10K, 10K]");
    g.values.row(j) = u.transpose();
  }
  return g;
}

// Generator values at the two unit directions +-a^{1/2} beta e.
std::pair<double, double> generator_slopes(const PutScenario& s, const SPDMatrixd& a) {
  const MarketSpec spec = to_market_spec(s);
  const Vector u = a.sqrt() * (s.beta * l_loading(s));
  const double up = gen_robust(make_gen_point(spec, a, u)).value;
  const double down = gen_robust(make_gen_point(spec, a, -u)).value;
  return {up, down};
}

std::size_t locate(const std::vector<double>& nodes, double v) {
  auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
  std::size_t i = it == nodes.begin() ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
  return std::min(i, nodes.size() - 2);
}

}  // namespace

double beta_bar(const PutScenario& s, const SPDMatrixd& a) {
  const Vector e = l_loading(s);
  return s.beta * std::sqrt(e.dot(a.matrix() * e));
}

Driver good_deal_driver(const PutScenario& s, const SPDMatrixd& a) {
  const auto [up, down] = generator_slopes(s, a);
  const double gamma = s.gamma;
  return [=](double x, double p) { return gamma * x * p - x * std::abs(p) * (p >= 0.0 ? up : down); };
}

Driver rho_driver(const PutScenario& s, const SPDMatrixd& a) {
  const double k = (s.h + s.delta) * beta_bar(s, a);
  const double gamma = s.gamma;
  return [=](double x, double p) { return gamma * x * p + k * x * std::abs(p); };
}

PDEGrid solve_semilinear_pde(const PutScenario& s, const Driver& driver, const PDEOptions& opts) {
  const double vol = opts.vol > 0.0 ? opts.vol : beta_bar(s, a_hi(s));
  const Mesh m = make_mesh(s, opts, vol);
  const double v2 = vol * vol;
  auto variance = [v2](const Vector&, Vector& var) { var.setConstant(v2); };
  auto drv = [&](const Vector& u, const Vector&, Vector& out) {
    const Vector p = node_slopes(m, u);
    out.setZero();
    for (Eigen::Index i = 1; i < u.size() - 1; ++i) out(i) = driver(m.x(i), p(i));
  };
  return march(s, m, opts, variance, drv);
}

RobustPDEResult solve_robust_pde(const PutScenario& s, int a_points_per_axis, const PDEOptions& opts) {
  RobustPDEResult out;
  struct Candidate {
    double var, up, down;
  };
  std::vector<Candidate> cands;
  double widest = 0.0;
  const Vector e = l_loading(s);
  for (const auto& a : loewner_grid(a_lo(s), a_hi(s), a_points_per_axis)) {
    const auto [up, down] = generator_slopes(s, a);
    const double var = s.beta * s.beta * e.dot(a.matrix() * e);
    cands.push_back({var, up, down});
    out.policy.push_back(a.matrix());
    widest = std::max(widest, var);
  }
  require(!cands.empty(), ErrorCode::GridError, "no volatility matrix in the Loewner grid");

  PDEOptions o = opts;
  const double vol = opts.vol > 0.0 ? opts.vol : std::sqrt(widest);
  const Mesh m = make_mesh(s, o, vol);
  const Eigen::Index n = m.x.size();
  std::vector<int> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int l, int r) {
    return cands[static_cast<std::size_t>(l)].var > cands[static_cast<std::size_t>(r)].var;
  });
  std::vector<int> choice(static_cast<std::size_t>(n), order.front());

  // Hamiltonian of candidate c at node i, from the current slopes.
  auto pick = [&](const Vector& u) {
    for (Eigen::Index i = 1; i < n - 1; ++i) {
      const double x = m.x(i);
      // three-point differences: their sign follows the convexity of u, which
      // the five-point stencil does not guarantee next to the kink
      const double uy = (u(i + 1) - u(i - 1)) / (2.0 * m.dy);
      const double uyy = (u(i + 1) - 2.0 * u(i) + u(i - 1)) / (m.dy * m.dy);
      const double p = uy / x;
      // candidates run by decreasing variance, so ties keep the widest one
      double best = -std::numeric_limits<double>::infinity();
      int arg = order.front();
      for (const int c : order) {
        const auto& k = cands[static_cast<std::size_t>(c)];
        const double hval = 0.5 * k.var * (uyy - uy) - x * std::abs(p) * (p >= 0.0 ? k.up : k.down);
        if (hval > best + 1e-12 * (1.0 + std::abs(best))) {
          best = hval;
          arg = c;
        }
      }
      choice[static_cast<std::size_t>(i)] = arg;
    }
  };
  auto variance = [&](const Vector& u, Vector& var) {
    pick(u);
    for (Eigen::Index i = 0; i < n; ++i) var(i) = cands[static_cast<std::size_t>(choice[static_cast<std::size_t>(i)])].var;
  };
  auto drv = [&](const Vector& u, const Vector&, Vector& out_d) {
    out_d.setZero();
    const Vector slopes = node_slopes(m, u);
    for (Eigen::Index i = 1; i < n - 1; ++i) {
      const auto& k = cands[static_cast<std::size_t>(choice[static_cast<std::size_t>(i)])];
      const double x = m.x(i);
      const double p = slopes(i);
      out_d(i) = s.gamma * x * p - x * std::abs(p) * (p >= 0.0 ? k.up : k.down);
    }
  };
  out.grid = march(s, m, o, variance, drv);
  out.choice = choice;
  return out;
}

double PDEGrid::value_at(double t, double x) const {
  const double tc = std::clamp(t, t_nodes.front(), t_nodes.back());
  const double xc = std::clamp(x, x_nodes.front(), x_nodes.back());
  const std::size_t j = locate(t_nodes, tc);
  const std::size_t i = locate(x_nodes, xc);
  const double wt = (tc - t_nodes[j]) / (t_nodes[j + 1] - t_nodes[j]);
  const double wx = (std::log(xc) - std::log(x_nodes[i])) / (std::log(x_nodes[i + 1]) - std::log(x_nodes[i]));
  const auto ji = static_cast<Eigen::Index>(j);
  const auto ii = static_cast<Eigen::Index>(i);
  const double lo = (1 - wx) * values(ji, ii) + wx * values(ji, ii + 1);
  const double hi = (1 - wx) * values(ji + 1, ii) + wx * values(ji + 1, ii + 1);
  return (1 - wt) * lo + wt * hi;
}

double PDEGrid::delta_at(double t, double x) const {
  const double tc = std::clamp(t, t_nodes.front(), t_nodes.back());
  const std::size_t j = locate(t_nodes, tc);
  const double wt = (tc - t_nodes[j]) / (t_nodes[j + 1] - t_nodes[j]);
  std::size_t i = locate(x_nodes, std::clamp(x, x_nodes.front(), x_nodes.back()));
  i = std::clamp<std::size_t>(i, 1, x_nodes.size() - 3);
  auto slope = [&](std::size_t row, std::size_t k) {
    const auto r = static_cast<Eigen::Index>(row);
    const auto c = static_cast<Eigen::Index>(k);
    return (values(r, c + 1) - values(r, c - 1)) / (x_nodes[k + 1] - x_nodes[k - 1]);
  };
  const double wx = std::clamp((x - x_nodes[i]) / (x_nodes[i + 1] - x_nodes[i]), 0.0, 1.0);
  auto at_row = [&](std::size_t row) { return (1 - wx) * slope(row, i) + wx * slope(row, i + 1); };
  return (1 - wt) * at_row(j) + wt * at_row(j + 1);
}

void PDEGrid::write_csv(std::ostream& os) const {
  os << "t,x,v\r\n";
  char buf[96];
  for (std::size_t j = 0; j < t_nodes.size(); ++j) {
    for (std::size_t i = 0; i < x_nodes.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\r\n", t_nodes[j], x_nodes[i],
                    values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
      os << buf;
    }
  }
}

}  // namespace rgd
