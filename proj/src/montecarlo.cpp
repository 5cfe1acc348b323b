#include "rgd/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rgd/format.hpp"
#include "rgd/generator.hpp"
#include "rgd/pde.hpp"

namespace rgd {

namespace {

using Vector2 = Eigen::Vector2d;

// Runs fn(k) for k < count on up to hardware_concurrency threads. Every k
// writes to its own slot, so the result does not depend on scheduling.
template <typename Fn>
void for_each_block(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count && !failed; k = next++) {
        try {
          fn(k);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::mt19937_64 block_engine(std::uint64_t seed, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

Vector2 to_fixed(const Vector& v) { return Vector2(v(0), v(1)); }

int node_of(double t, double dt, int n_steps) {
  const double k = t / dt;
  const long r = std::lround(k);
  require(std::abs(k - static_cast<double>(r)) < 1e-8 && r >= 0 && r <= n_steps, ErrorCode::InvalidArgument,
          "time pair does not fall on the simulation grid");
  return static_cast<int>(r);
}

double quantile(std::vector<double> v, double q) {
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

// OLS of y on (1, x) with heteroskedasticity-robust (HC0) standard errors,
// evaluated at the 10/30/50/70/90% quantiles of x.
ConditionalCheck conditional_fit(const std::vector<double>& x, const std::vector<double>& y, double threshold) {
  ConditionalCheck out;
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  for (double v : x) mx += v;
  mx /= n;
  double sx = 0.0;
  for (double v : x) sx += (v - mx) * (v - mx);
  sx = std::sqrt(sx / n);

  if (sx <= 1e-12 * (1.0 + std::abs(mx))) {
    double m = 0.0, q = 0.0;
    for (double v : y) m += v;
    m /= n;
    for (double v : y) q += (v - m) * (v - m);
    out.nodes = {mx};
    out.fitted = {m};
    out.std_error = {std::sqrt(q / (n - 1.0) / n)};
    out.passed = m <= threshold * out.std_error.front();
    return out;
  }

  Eigen::Matrix2d xtx = Eigen::Matrix2d::Zero();
  Vector2 xty = Vector2::Zero();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vector2 r(1.0, (x[i] - mx) / sx);
    xtx += r * r.transpose();
    xty += r * y[i];
  }
  const Eigen::Matrix2d inv = xtx.inverse();
  const Vector2 coef = inv * xty;
  Eigen::Matrix2d meat = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vector2 r(1.0, (x[i] - mx) / sx);
    const double e = y[i] - r.dot(coef);
    meat += e * e * r * r.transpose();
  }
  const Eigen::Matrix2d cov = inv * meat * inv;
  for (double q : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double node = quantile(x, q);
    const Vector2 r(1.0, (node - mx) / sx);
    const double fit = r.dot(coef);
    const double se = std::sqrt(std::max(r.dot(cov * r), 0.0));
    out.nodes.push_back(node);
    out.fitted.push_back(fit);
    out.std_error.push_back(se);
    if (fit > threshold * se) out.passed = false;
  }
  return out;
}

std::string num(double v) { return format_double(v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

PathBundle simulate_block(const PutScenario& s, const PriorSpec& prior, const std::optional<NGDKernel>& kernel,
                          int count, int n_steps, std::uint64_t seed, std::uint64_t block) {
  require(count >= 0 && n_steps >= 1, ErrorCode::InvalidArgument, "need count >= 0 and n_steps >= 1");
  require(prior.a.size() == 2 && prior.theta.size() == 2, ErrorCode::InvalidArgument, "the put market has n = 2");
  if (kernel) {
    require(kernel->lambda.size() == 2, ErrorCode::InvalidArgument, "kernel must have 2 entries");
    require(kernel->lambda.norm() <= s.h + 1e-14, ErrorCode::InfeasibleKernel, "|lambda| exceeds h");
  }

  PathBundle out;
  out.dt = s.T / n_steps;
  out.n_paths = count;
  out.n_steps = n_steps;
  out.seed = seed;
  out.a = prior.a;
  out.theta = prior.theta;
  if (kernel) out.lambda = kernel->lambda;
  out.increments.assign(2, Matrix(count, n_steps));
  out.S_paths.resize(count, n_steps + 1);
  out.L_paths.resize(count, n_steps + 1);

  const Eigen::Matrix2d root = prior.a.sqrt();
  const Vector2 shift = to_fixed(prior.theta) + (kernel ? to_fixed(kernel->lambda) : Vector2::Zero());
  const Vector2 e = to_fixed(l_loading(s));
  // log-returns per unit dW: rows of diag(sigma_S, beta e^tr) a^{1/2}
  const Vector2 s_load = s.sigma_S * root.row(0).transpose();
  const Vector2 l_load = s.beta * (root.transpose() * e);
  const double dt = out.dt;
  const double sq = std::sqrt(dt);
  const double s_drift = (s.b - 0.5 * s_load.squaredNorm() + s_load.dot(shift)) * dt;
  const double l_drift = (s.gamma - 0.5 * l_load.squaredNorm() + l_load.dot(shift)) * dt;

  auto gen = block_engine(seed, block);
  std::normal_distribution<double> normal;
  for (int p = 0; p < count; ++p) {
    double ls = std::log(s.S0), ll = std::log(s.L0);
    out.S_paths(p, 0) = s.S0;
    out.L_paths(p, 0) = s.L0;
    for (int k = 0; k < n_steps; ++k) {
      const Vector2 dw(sq * normal(gen), sq * normal(gen));
      out.increments[0](p, k) = dw(0);
      out.increments[1](p, k) = dw(1);
      ls += s_drift + s_load.dot(dw);
      ll += l_drift + l_load.dot(dw);
      out.S_paths(p, k + 1) = std::exp(ls);
      out.L_paths(p, k + 1) = std::exp(ll);
    }
  }
  return out;
}

PathBundle simulate(const PutScenario& s, const PriorSpec& prior, const std::optional<NGDKernel>& kernel,
                    int n_paths, int n_steps, std::uint64_t seed) {
  check_scenario(s);
  const auto spec = to_market_spec(s);
  check_prior(spec, prior);
  if (kernel) check_kernel(spec, *kernel);
  require(n_paths >= 1, ErrorCode::InvalidArgument, "need at least one path");

  const auto blocks = static_cast<std::size_t>((n_paths + kPathBlock - 1) / kPathBlock);
  std::vector<PathBundle> parts(blocks);
  for_each_block(blocks, [&](std::size_t k) {
    const int first = static_cast<int>(k) * kPathBlock;
    parts[k] = simulate_block(s, prior, kernel, std::min(kPathBlock, n_paths - first), n_steps, seed, k);
  });

  PathBundle out = simulate_block(s, prior, kernel, 0, n_steps, seed, 0);
  out.n_paths = n_paths;
  out.increments.assign(2, Matrix(n_paths, n_steps));
  out.S_paths.resize(n_paths, n_steps + 1);
  out.L_paths.resize(n_paths, n_steps + 1);
  Eigen::Index row = 0;
  for (const auto& part : parts) {
    const Eigen::Index c = part.n_paths;
    for (int j = 0; j < 2; ++j) out.increments[static_cast<std::size_t>(j)].middleRows(row, c) = part.increments[static_cast<std::size_t>(j)];
    out.S_paths.middleRows(row, c) = part.S_paths;
    out.L_paths.middleRows(row, c) = part.L_paths;
    row += c;
  }
  return out;
}

Matrix tracking_error(const PutScenario& s, const PathBundle& bundle, const BoundFn& bound, const HedgeFn& hedge) {
  const int n = bundle.n_steps;
  Matrix out = Matrix::Zero(bundle.n_paths, n + 1);
  if (bundle.n_paths == 0) return out;

  const Eigen::Matrix2d root = bundle.a.sqrt();
  const Vector2 shift = to_fixed(bundle.theta) + (bundle.lambda ? to_fixed(*bundle.lambda) : Vector2::Zero());
  const auto spec = to_market_spec(s);
  // a^{1/2} xi_hat: the drift of B that the traded asset pays for
  const Vector2 premium = root * to_fixed(xi_hat(spec, bundle.a));
  const double dt = bundle.dt;

  for (Eigen::Index p = 0; p < bundle.n_paths; ++p) {
    const double start = bound(0.0, bundle.L_paths(p, 0));
    double gains = 0.0;
    for (int k = 0; k < n; ++k) {
      const double t = k * dt;
      const Vector2 phi = hedge(t, bundle.L_paths(p, k), bundle.a);
      const Vector2 dw(bundle.increments[0](p, k), bundle.increments[1](p, k));
      const Vector2 db = root * (shift * dt + dw);
      gains += phi.dot(premium * dt + db);
      const double t1 = k + 1 == n ? s.T : (k + 1) * dt;
      out(p, k + 1) = bound(t1, bundle.L_paths(p, k + 1)) - start - gains;
    }
  }
  return out;
}

HedgingModel default_hedging_model(const PutScenario& s) {
  HedgingModel m;
  if (s.b == 0.0 && s.delta == 0.0) {
    m.closed_form = true;
    m.bound = [s](double t, double L) { return closed_form_bound(s, t, L); };
    m.hedge = [s](double t, double L, const SPDMatrixd& a) { return to_fixed(closed_form_hedge(s, t, L, a)); };
    return m;
  }
  auto grid = std::make_shared<PDEGrid>(solve_robust_pde(s, 5).grid);
  const auto spec = to_market_spec(s);
  const Vector e = l_loading(s);
  m.bound = [grid](double t, double L) { return grid->value_at(t, L); };
  m.hedge = [grid, spec, e, s](double t, double L, const SPDMatrixd& a) {
    const Vector z = a.sqrt() * (s.beta * L * grid->delta_at(t, L) * e);
    return to_fixed(gen_robust(make_gen_point(spec, a, z)).hedge);
  };
  return m;
}

NGDKernel adversarial_kernel(const PutScenario& s, const SPDMatrixd& a, double hedge_multiplier) {
  // a put has dv/dx <= 0, so Z points along -e
  const Vector z = -(a.sqrt() * l_loading(s));
  const auto sr = gen_robust(make_gen_point(to_market_spec(s), a, z));
  const Vector u = z - hedge_multiplier * sr.phi_bar;
  const double un = u.norm();
  if (un <= 1e-14) return {Vector::Zero(2)};
  return {s.h / un * u};
}

std::vector<NGDKernel> martingale_kernels(const PutScenario& s, const SPDMatrixd& a) {
  const auto spec = to_market_spec(s);
  const auto proj = make_projector(spec.sigma, a);
  const Vector xi = xi_hat(proj, spec.b);
  Vector k = proj.ker(Vector::Unit(2, 0));
  const Vector k2 = proj.ker(Vector::Unit(2, 1));
  if (k2.norm() > k.norm()) k = k2;
  k.normalize();
  const double r = std::sqrt(std::max(s.h * s.h - xi.squaredNorm(), 0.0));
  return {{-xi + r * k}, {-xi - r * k}};
}

std::vector<TimePair> default_pairs(const PutScenario& s) {
  std::vector<TimePair> out;
  for (int i = 0; i < 5; ++i) out.push_back({s.T * i / 5.0, s.T * (i + 1) / 5.0});
  return out;
}

std::vector<MCCell> standard_cells(const PutScenario& s) {
  const double w1 = s.a1_hi - s.a1_lo, w2 = s.a2_hi - s.a2_lo;
  Matrix mid(2, 2);
  mid << s.a1_lo + 0.5 * w1, 0.25 * std::min(w1, w2), 0.25 * std::min(w1, w2), s.a2_lo + 0.5 * w2;
  const std::vector<std::pair<std::string, SPDMatrixd>> priors = {
      {"a_hi", a_hi(s)}, {"a_lo", a_lo(s)}, {"a_mid", SPDMatrixd(mid)}};
  std::vector<MCCell> out;
  for (const auto& [name, a] : priors) {
    const PriorSpec prior{a, Vector::Zero(2)};
    const auto mk = martingale_kernels(s, a);
    out.push_back({name + "/zero", prior, NGDKernel{Vector::Zero(2)}, false});
    out.push_back({name + "/eta_plus", prior, mk[0], false});
    out.push_back({name + "/eta_minus", prior, mk[1], false});
    out.push_back({name + "/adversarial", prior, std::nullopt, true});
  }
  return out;
}

bool CellReport::passed() const {
  return std::all_of(verdict.begin(), verdict.end(), [](bool v) { return v; });
}

bool TrackingReport::passed() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellReport& c) { return c.passed(); });
}

std::string TrackingReport::to_csv() const {
  std::ostringstream os;
  os << "cell,a11,a12,a22,lambda1,lambda2,s,t,mean_increment,std_error,verdict,cond_passed,seed,n_paths,n_steps,"
        "hedge_multiplier\r\n";
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      os << csv_field(c.label) << ',' << num(c.prior.a(0, 0)) << ',' << num(c.prior.a(0, 1)) << ','
         << num(c.prior.a(1, 1)) << ',' << num(c.lambda(0)) << ',' << num(c.lambda(1)) << ','
         << num(c.pairs[i].s) << ',' << num(c.pairs[i].t) << ',' << num(c.mean_increment[i]) << ','
         << num(c.std_error[i]) << ',' << (c.verdict[i] ? "pass" : "fail") << ','
         << (c.conditional[i].passed ? "pass" : "fail") << ',' << seed << ',' << n_paths << ',' << n_steps << ','
         << num(hedge_multiplier) << "\r\n";
    }
  }
  return os.str();
}

std::string TrackingReport::to_json() const {
  using nlohmann::json;
  json j;
  j["seed"] = seed;
  j["n_paths"] = n_paths;
  j["n_steps"] = n_steps;
  j["hedge_multiplier"] = hedge_multiplier;
  j["threshold"] = threshold;
  j["passed"] = passed();
  j["cells"] = json::array();
  for (const auto& c : cells) {
    json cj;
    cj["label"] = c.label;
    cj["a"] = {{c.prior.a(0, 0), c.prior.a(0, 1)}, {c.prior.a(1, 0), c.prior.a(1, 1)}};
    cj["theta"] = {c.prior.theta(0), c.prior.theta(1)};
    cj["lambda"] = {c.lambda(0), c.lambda(1)};
    cj["pairs"] = json::array();
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      const auto& cc = c.conditional[i];
      cj["pairs"].push_back({{"s", c.pairs[i].s},
                             {"t", c.pairs[i].t},
                             {"mean_increment", c.mean_increment[i]},
                             {"std_error", c.std_error[i]},
                             {"verdict", c.verdict[i] ? "pass" : "fail"},
                             {"conditional",
                              {{"nodes", cc.nodes}, {"fitted", cc.fitted}, {"std_error", cc.std_error},
                               {"passed", cc.passed}}}});
    }
    j["cells"].push_back(std::move(cj));
  }
  return j.dump(2);
}

TrackingReport supermartingale_test(const PutScenario& s, const std::vector<MCCell>& cells,
                                    const std::vector<TimePair>& pairs, const MCOptions& opts,
                                    const HedgingModel* model) {
  check_scenario(s);
  require(opts.n_paths >= 2 && opts.n_steps >= 1, ErrorCode::InvalidArgument, "need n_paths >= 2 and n_steps >= 1");
  require(!pairs.empty(), ErrorCode::InvalidArgument, "need at least one time pair");
  const auto spec = to_market_spec(s);
  const HedgingModel own = model ? HedgingModel{} : default_hedging_model(s);
  const HedgingModel& hm = model ? *model : own;
  const double c = opts.hedge_multiplier;
  const HedgeFn hedge = [&hm, c](double t, double L, const SPDMatrixd& a) -> Eigen::Vector2d {
    return c * hm.hedge(t, L, a);
  };

  const double dt = s.T / opts.n_steps;
  std::vector<std::pair<int, int>> nodes;
  for (const auto& p : pairs) {
    require(p.s < p.t, ErrorCode::InvalidArgument, "time pairs need s < t");
    nodes.emplace_back(node_of(p.s, dt, opts.n_steps), node_of(p.t, dt, opts.n_steps));
  }

  TrackingReport report;
  report.seed = opts.seed;
  report.n_paths = opts.n_paths;
  report.n_steps = opts.n_steps;
  report.hedge_multiplier = c;
  report.threshold = opts.threshold;

  const auto blocks = static_cast<std::size_t>((opts.n_paths + kPathBlock - 1) / kPathBlock);
  for (const auto& cell : cells) {
    check_prior(spec, cell.prior);
    const NGDKernel kernel = cell.adversarial ? adversarial_kernel(s, cell.prior.a, c)
                                              : cell.kernel.value_or(NGDKernel{Vector::Zero(2)});
    check_kernel(spec, kernel);

    // per block and pair: increments R_t - R_s and the level L_s
    std::vector<std::vector<std::vector<double>>> inc(blocks), level(blocks);
    for_each_block(blocks, [&](std::size_t k) {
      const int first = static_cast<int>(k) * kPathBlock;
      const int count = std::min(kPathBlock, opts.n_paths - first);
      const auto bundle = simulate_block(s, cell.prior, kernel, count, opts.n_steps, opts.seed, k);
      const Matrix r = tracking_error(s, bundle, hm.bound, hedge);
      inc[k].resize(pairs.size());
      level[k].resize(pairs.size());
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [a, b] = nodes[i];
        for (int p = 0; p < count; ++p) {
          inc[k][i].push_back(r(p, b) - r(p, a));
          level[k][i].push_back(bundle.L_paths(p, a));
        }
      }
    });

    CellReport cr;
    cr.label = cell.label;
    cr.prior = cell.prior;
    cr.lambda = kernel.lambda;
    cr.pairs = pairs;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::vector<double> y, x;
      for (std::size_t k = 0; k < blocks; ++k) {
        y.insert(y.end(), inc[k][i].begin(), inc[k][i].end());
        x.insert(x.end(), level[k][i].begin(), level[k][i].end());
      }
      const auto n = static_cast<double>(y.size());
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= n;
      double ss = 0.0;
      for (double v : y) ss += (v - mean) * (v - mean);
      const double se = std::sqrt(ss / (n - 1.0) / n);
      cr.mean_increment.push_back(mean);
      cr.std_error.push_back(se);
      cr.verdict.push_back(mean <= opts.threshold * se);
      cr.conditional.push_back(conditional_fit(x, y, opts.threshold));
    }
    report.cells.push_back(std::move(cr));
  }
  return report;
}

TrackingReport supermartingale_test(const PutScenario& s, const std::vector<PriorSpec>& priors,
                                    const std::vector<NGDKernel>& kernels, const std::vector<TimePair>& pairs,
                                    const MCOptions& opts) {
  std::vector<MCCell> cells;
  for (std::size_t i = 0; i < priors.size(); ++i)
    for (std::size_t j = 0; j < kernels.size(); ++j)
      cells.push_back({"prior" + std::to_string(i) + "/kernel" + std::to_string(j), priors[i], kernels[j], false});
  return supermartingale_test(s, cells, pairs, opts);
}

}  // namespace rgd
