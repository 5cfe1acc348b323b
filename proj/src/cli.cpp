#include "rgd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgd/config.hpp"
#include "rgd/errors.hpp"
#include "rgd/format.hpp"
#include "rgd/generator.hpp"
#include "rgd/montecarlo.hpp"
#include "rgd/pde.hpp"

namespace rgd {

namespace {

using nlohmann::json;

std::string num(double v) { return format_double(v); }

struct Session {
  ScenarioConfig cfg;
  std::string hash;
  std::ostream& out;
  std::ostream& err;

  bool as_json() const { return cfg.output.format == OutputFormat::Json; }

  // Writes <dir>/<name>.<ext> when an output directory is set, stdout otherwise.
  void emit(const std::string& name, const std::string& body) const {
    if (cfg.output.dir.empty()) {
      out << body;
      if (!body.empty() && body.back() != '\n') out << '\n';
      return;
    }
    std::filesystem::create_directories(cfg.output.dir);
    const auto path = std::filesystem::path(cfg.output.dir) / (name + "." + to_string(cfg.output.format));
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorCode::ConfigError, "cannot write " + path.string());
    f << body;
    out << path.string() << '\n';
  }

  json stamp() const { return {{"version", RGD_VERSION}, {"config_hash", hash}, {"seed", cfg.numerics.seed}}; }
};

// RFC-4180 table whose rows all end with the config hash and tool version.
class Table {
 public:
  Table(std::vector<std::string> header, const Session& s) : header_(std::move(header)), session_(s) {}

  void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

  std::string csv() const {
    std::string o;
    auto line = [&](const std::vector<std::string>& cells, const std::string& tail) {
      for (std::size_t i = 0; i < cells.size(); ++i) o += (i ? "," : "") + quote(cells[i]);
      o += tail + "\r\n";
    };
    line(header_, ",config_hash,version");
    for (const auto& r : rows_) line(r, "," + session_.hash + "," + RGD_VERSION);
    return o;
  }

  json to_json() const {
    json j = session_.stamp();
    j["rows"] = json::array();
    for (const auto& r : rows_) {
      json o = json::object();
      for (std::size_t i = 0; i < header_.size(); ++i) o[header_[i]] = typed(r[i]);
      j["rows"].push_back(std::move(o));
    }
    return j;
  }

  std::string render() const { return session_.as_json() ? to_json().dump(2) + "\n" : csv(); }

 private:
  // numbers go out as JSON numbers, empty cells as null
  static json typed(const std::string& cell) {
    if (cell.empty()) return nullptr;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() + cell.size() && std::isfinite(v)) return v;
    return cell;
  }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  const Session& session_;
};

bool closed_form_regime(const PutScenario& s) { return s.b == 0.0 && s.delta == 0.0; }

bool control_regime(const PutScenario& s) {
  return s.sigma_S == 1.0 && s.gamma == 0.0 && s.beta == 1.0 && s.delta == 0.0 && s.rho == 0.0;
}

PDEOptions pde_options(const ScenarioConfig& c) {
  PDEOptions o;
  o.space_nodes = c.numerics.space_nodes;
  o.time_steps = c.numerics.time_steps;
  return o;
}

struct Valuation {
  std::string method;
  double robust;
  double upper_prior;
};

Valuation value_at_zero(const ScenarioConfig& c) {
  const auto& s = c.put;
  if (closed_form_regime(s)) {
    const double v = closed_form_bound(s, 0.0, s.L0);
    return {"closed_form", v, v};
  }
  const double at_hi = solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), pde_options(c)).value_at(0.0, s.L0);
  if (control_regime(s)) return {"control_grid", robust_control_bound(s, c.numerics.control_points).value, at_hi};
  PDEOptions o = pde_options(c);
  o.smoothing = PayoffSmoothing::CellAverage;
  return {"robust_pde", solve_robust_pde(s, 5, o).grid.value_at(0.0, s.L0), at_hi};
}

std::optional<double> superreplication(const PutScenario& s) {
  try {
    return superreplication_price(s, 0.0, s.L0);
  } catch (const Error&) {
    return std::nullopt;
  }
}

SPDMatrixd prior_from(const std::string& text, const PutScenario& s) {
  if (text.empty()) return a_hi(s);
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--prior: '" + part + "' is not a number");
    }
  }
  require(v.size() == 3, ErrorCode::InvalidArgument, "--prior expects a11,a12,a22");
  Matrix m(2, 2);
  m << v[0], v[1], v[1], v[2];
  return SPDMatrixd(m);
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  auto number = [](const std::string& t) {
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      require(used == t.size(), ErrorCode::InvalidArgument, "");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--values: '" + t + "' is not a number");
    }
  };
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto p1 = text.find(':'), p2 = text.rfind(':');
    const double lo = number(text.substr(0, p1)), hi = number(text.substr(p1 + 1, p2 - p1 - 1));
    const double n = number(text.substr(p2 + 1));
    require(n >= 1 && n == std::floor(n), ErrorCode::InvalidArgument, "--values lo:hi:n needs a positive integer n");
    const int k = static_cast<int>(n);
    for (int i = 0; i < k; ++i) out.push_back(k == 1 ? lo : lo + (hi - lo) * i / (k - 1));
    return out;
  }
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(number(part));
  return out;
}

// --- subcommands -----------------------------------------------------------

int cmd_value(const Session& ses) {
  const auto& s = ses.cfg.put;
  const auto v = value_at_zero(ses.cfg);
  const auto vhat = superreplication(s);
  Table t({"method", "pi_u_0", "pi_u_aBar", "V_hat"}, ses);
  t.row({v.method, num(v.robust), num(v.upper_prior), vhat ? num(*vhat) : ""});
  ses.emit("value", t.render());
  return kExitOk;
}

int cmd_hedge(const Session& ses, double t, std::optional<double> level, const std::string& prior) {
  const auto& s = ses.cfg.put;
  const double L = level.value_or(s.L0);
  require(t >= 0.0 && t <= s.T, ErrorCode::InvalidArgument, "--t must lie in [0, T]");
  require(L > 0.0, ErrorCode::InvalidArgument, "--L must be positive");
  const SPDMatrixd a = prior_from(prior, s);
  check_prior(to_market_spec(s), PriorSpec{a, Vector::Zero(2)});
  const auto model = default_hedging_model(s);
  const Eigen::Vector2d phi = model.hedge(t, L, a);
  Table tab({"t", "L", "a11", "a12", "a22", "phi1", "phi2", "position_S", "method"}, ses);
  tab.row({num(t), num(L), num(a(0, 0)), num(a(0, 1)), num(a(1, 1)), num(phi(0)), num(phi(1)),
           num(phi(0) / s.sigma_S), model.closed_form ? "closed_form" : "robust_pde"});
  ses.emit("hedge", tab.render());
  return kExitOk;
}

int cmd_pde(const Session& ses) {
  const auto& s = ses.cfg.put;
  const bool cf = closed_form_regime(s);
  PDEGrid g;
  if (cf) {
    g = solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), pde_options(ses.cfg));
  } else {
    PDEOptions o = pde_options(ses.cfg);
    o.smoothing = PayoffSmoothing::CellAverage;
    g = solve_robust_pde(s, 5, o).grid;
  }
  Table tab({"t", "x", "v", "closed_form"}, ses);
  for (std::size_t j = 0; j < g.t_nodes.size(); ++j)
    for (std::size_t i = 0; i < g.x_nodes.size(); ++i) {
      const double t = g.t_nodes[j], x = g.x_nodes[i];
      tab.row({num(t), num(x), num(g.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))),
               cf ? num(closed_form_bound(s, t, x)) : ""});
    }
  ses.emit("pde", tab.render());
  return kExitOk;
}

MCOptions mc_options(const ScenarioConfig& c) {
  MCOptions o;
  o.n_paths = c.numerics.n_paths;
  o.n_steps = c.numerics.n_steps;
  o.seed = c.numerics.seed;
  o.threshold = c.numerics.mc_threshold;
  o.hedge_multiplier = c.numerics.hedge_multiplier;
  return o;
}

std::string stamped(const Session& ses, const TrackingReport& r) {
  if (ses.as_json()) {
    json j = json::parse(r.to_json());
    j.update(ses.stamp());
    return j.dump(2) + "\n";
  }
  std::istringstream in(r.to_csv());
  std::string line, o;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    o += line + (header ? std::string(",config_hash,version") : "," + ses.hash + "," + RGD_VERSION) + "\r\n";
    header = false;
  }
  return o;
}

int cmd_simulate(const Session& ses) {
  const auto& s = ses.cfg.put;
  const auto r = supermartingale_test(s, standard_cells(s), default_pairs(s), mc_options(ses.cfg));
  ses.emit("simulate", stamped(ses, r));
  return kExitOk;
}

int cmd_check(const Session& ses) {
  const auto& c = ses.cfg;
  const auto& s = c.put;
  const auto spec = to_market_spec(s);
  Table tab({"criterion", "value", "bound", "status"}, ses);
  std::vector<std::string> failed;
  auto record = [&](const std::string& name, double value, double bound, bool ok) {
    tab.row({name, num(value), num(bound), ok ? "pass" : "fail"});
    if (!ok) failed.push_back(name);
  };

  // projections at the corners and an interior point
  double proj_err = 0.0;
  const auto w1 = s.a1_hi - s.a1_lo, w2 = s.a2_hi - s.a2_lo;
  Matrix mid(2, 2);
  mid << s.a1_lo + 0.5 * w1, 0.25 * std::min(w1, w2), 0.25 * std::min(w1, w2), s.a2_lo + 0.5 * w2;
  for (const auto& a : {a_hi(s), a_lo(s), SPDMatrixd(mid)}) {
    const auto p = make_projector(spec.sigma, a);
    proj_err = std::max(proj_err, (p.p_im() * p.p_im() - p.p_im()).cwiseAbs().maxCoeff());
    proj_err = std::max(proj_err, (p.p_im() * p.p_ker()).cwiseAbs().maxCoeff());
    proj_err = std::max(proj_err, (p.loading() * p.p_ker()).cwiseAbs().maxCoeff());
  }
  record("projection_identities", proj_err, 1e-12, proj_err <= 1e-12);

  // closed-form saddle against the brute-force minmax
  double worst = 0.0, allowed = 0.0;
  bool saddle_ok = true;
  for (const double angle : {0.3, 1.4, 2.5, 4.0, 5.5}) {
    Vector z(2);
    z << std::cos(angle), std::sin(angle);
    const auto p = make_gen_point(spec, a_hi(s), 5.0 * z);
    if (p.h - p.xi.norm() - p.delta <= 0.0) continue;
    const auto sr = gen_robust(p);
    const auto mm = minmax_check(p);
    const double diff = std::max(std::abs(mm.inf_sup - sr.value), mm.gap);
    worst = std::max(worst, diff);
    allowed = std::max(allowed, mm.resolution_bound);
    saddle_ok = saddle_ok && std::abs(mm.inf_sup - sr.value) <= mm.resolution_bound + 1e-9 &&
                mm.gap <= mm.resolution_bound + 1e-9;
  }
  record("saddle_oracle", worst, allowed, saddle_ok);

  if (closed_form_regime(s)) {
    const auto g = solve_semilinear_pde(s, good_deal_driver(s, a_hi(s)), pde_options(c));
    double rel = 0.0;
    for (std::size_t i = 1; i + 1 < g.x_nodes.size(); ++i) {
      const double x = g.x_nodes[i];
      if (x < 0.5 * s.strike || x > 2.0 * s.strike) continue;
      const double ref = closed_form_bound(s, 0.0, x);
      rel = std::max(rel, std::abs(g.values(0, static_cast<Eigen::Index>(i)) - ref) / ref);
    }
    record("pde_vs_closed_form", rel, c.numerics.pde_tolerance, rel <= c.numerics.pde_tolerance);
  } else {
    tab.row({"pde_vs_closed_form", "", "", "skipped"});
  }

  const MCOptions mo = mc_options(c);
  const auto report = supermartingale_test(s, standard_cells(s), default_pairs(s), mo);
  double worst_t = -std::numeric_limits<double>::infinity();
  for (const auto& cell : report.cells)
    for (std::size_t i = 0; i < cell.pairs.size(); ++i)
      worst_t = std::max(worst_t, cell.mean_increment[i] / cell.std_error[i]);
  record("supermartingale", worst_t, mo.threshold, report.passed());

  if (c.numerics.hedge_multiplier == 1.0) {
    MCOptions broken = mo;
    broken.hedge_multiplier = 2.0;
    const std::vector<MCCell> cells = {{"a_hi/adversarial", {a_hi(s), Vector::Zero(2)}, std::nullopt, true}};
    const auto r = supermartingale_test(s, cells, default_pairs(s), broken);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.cells[0].pairs.size(); ++i)
      best = std::max(best, r.cells[0].mean_increment[i] / r.cells[0].std_error[i]);
    record("supermartingale_power", best, mo.threshold, !r.passed());
  }

  ses.emit("check", tab.render());
  for (const auto& f : failed) ses.err << "check failed: " << f << '\n';
  return failed.empty() ? kExitOk : kExitFailure;
}

int cmd_sweep(const Session& ses, const std::string& param, const std::string& values) {
  static const std::map<std::string, std::function<void(PutScenario&, double)>> setters = {
      {"gamma", [](PutScenario& s, double v) { s.gamma = v; }},
      {"h", [](PutScenario& s, double v) { s.h = v; }},
      {"rho", [](PutScenario& s, double v) { s.rho = v; }},
      {"a2_hi", [](PutScenario& s, double v) { s.a2_hi = v; }},
      {"b", [](PutScenario& s, double v) { s.b = v; }},
  };
  const auto it = setters.find(param);
  require(it != setters.end(), ErrorCode::InvalidArgument,
          "unknown sweep parameter '" + param + "' (expected gamma, h, rho, a2_hi or b)");
  // +1: bound should not decrease along the grid, -1: should not increase
  const int direction = param == "gamma" ? -1 : (param == "h" || param == "a2_hi") ? 1 : 0;

  Table tab({"param", "value", "bound", "hedge_atm", "sensitivity", "monotone"}, ses);
  std::optional<double> prev;
  for (const double v : parse_values(values)) {
    ScenarioConfig c = ses.cfg;
    it->second(c.put, v);
    check_scenario(c.put);
    const double bound = value_at_zero(c).robust;
    const auto model = default_hedging_model(c.put);
    const double hedge = model.hedge(0.0, c.put.strike, a_hi(c.put))(0);
    std::string sens;
    if (param == "gamma" && closed_form_regime(c.put)) sens = num(gamma_sensitivity(c.put, 0.0, c.put.L0));
    std::string mono;
    if (direction != 0) {
      const bool ok = !prev || direction * (bound - *prev) >= -1e-12 * (1.0 + std::abs(*prev));
      mono = ok ? "1" : "0";
    }
    prev = bound;
    tab.row({param, num(v), num(bound), num(hedge), sens, mono});
  }
  ses.emit("sweep_" + param, tab.render());
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::StabilityError ? kExitFailure : kExitInput;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust good-deal valuation and hedging under volatility and drift ambiguity", "rgd"};
  app.set_version_flag("--version", std::string("rgd ") + RGD_VERSION);
  app.require_subcommand(1);

  std::string config_path, out_dir, format, grid;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  app.add_option("--config", config_path, "Scenario file (flat key = value)");
  app.add_option("--seed", seed, "Monte Carlo seed");
  app.add_option("--out", out_dir, "Write outputs into this directory instead of stdout");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--grid", grid, "PDE grid as SPACExTIME, e.g. 400x400");
  app.add_option("--paths", paths, "Monte Carlo paths");

  auto* value = app.add_subcommand("value", "Robust bound, single-prior bound at a_hi and superreplication price");
  auto* hedge = app.add_subcommand("hedge", "Robust hedge at (t, L)");
  double t = 0.0;
  std::optional<double> level;
  std::string prior;
  hedge->add_option("--t", t, "Time");
  hedge->add_option("--L", level, "Level of the non-traded asset (default L0)");
  hedge->add_option("--prior", prior, "Volatility matrix a11,a12,a22 (default a_hi)");
  auto* pde = app.add_subcommand("pde", "Valuation PDE on the full grid");
  auto* simulate_cmd = app.add_subcommand("simulate", "Tracking-error statistics over the standard cells");
  auto* check = app.add_subcommand("check", "Run the invariant suite; exit 1 on failure");
  auto* sweep = app.add_subcommand("sweep", "Bound and hedge along a parameter grid");
  std::string param, values;
  sweep->add_option("--param", param, "gamma, h, rho, a2_hi or b")->required();
  sweep->add_option("--values", values, "lo:hi:n or a comma-separated list");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{} : load_config(config_path);
    if (seed) cfg.numerics.seed = *seed;
    if (paths) cfg.numerics.n_paths = *paths;
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    if (!format.empty()) cfg.output.format = format == "json" ? OutputFormat::Json : OutputFormat::Csv;
    if (!grid.empty()) {
      const auto x = grid.find('x');
      require(x != std::string::npos, ErrorCode::InvalidArgument, "--grid expects SPACExTIME");
      try {
        cfg.numerics.space_nodes = std::stoi(grid.substr(0, x));
        cfg.numerics.time_steps = std::stoi(grid.substr(x + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "--grid expects SPACExTIME, got '" + grid + "'");
      }
    }
    check_config(cfg);
    const Session ses{cfg, config_hash(cfg), out, err};

    if (*value) return cmd_value(ses);
    if (*hedge) return cmd_hedge(ses, t, level, prior);
    if (*pde) return cmd_pde(ses);
    if (*simulate_cmd) return cmd_simulate(ses);
    if (*check) return cmd_check(ses);
    if (*sweep) return cmd_sweep(ses, param, values);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::RegimeError)
      err << "hint: closed forms need b = 0 and delta = 0; the PDE paths cover the rest\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitInput;
}

}  // namespace rgd
