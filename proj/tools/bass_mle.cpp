// Command-line driver: simulate paths, fit them, run Monte Carlo
// experiments and check the error-bound diagnostics.
//
// Exit codes: 0 success, 1 inequality/bound violation, 2 validation error,
// 3 insufficient data.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bassmle/bassmle.hpp"
#include "bassmle/io.hpp"

namespace {

using namespace bassmle;
using bassmle::io::json;

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kInvalid = 2;
constexpr int kInsufficient = 3;

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Natural or transformed parameter flags shared by several commands.
struct ParamFlags {
  std::optional<double> alpha, beta, alpha_p, beta_p;
  Count m = 2000;

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "innovation rate alpha");
    app->add_option("--beta", beta, "imitation rate beta");
    app->add_option("--alpha-p", alpha_p, "transformed alpha' = alpha - beta");
    app->add_option("--beta-p", beta_p, "transformed beta' = beta / (alpha - beta)");
    app->add_option("--m", m, "market size");
  }

  bool natural_given() const { return alpha || beta; }
  bool transformed_given() const { return alpha_p || beta_p; }

  MarketParams market(std::optional<MarketParams> fallback = std::nullopt) const {
    if (natural_given() && transformed_given())
      throw ValidationFailure("give either --alpha/--beta or --alpha-p/--beta-p, not both");
    if (natural_given()) {
      if (!alpha || !beta) throw ValidationFailure("--alpha and --beta go together");
      MarketParams p{*alpha, *beta, m};
      p.validate();
      return p;
    }
    if (transformed_given()) {
      if (!alpha_p || !beta_p) throw ValidationFailure("--alpha-p and --beta-p go together");
      return from_transformed({*alpha_p, *beta_p}, m);
    }
    if (fallback) return *fallback;
    throw ValidationFailure("model parameters are required");
  }
};

struct ResponseFlags {
  std::string kind = "const";
  double scale = 1.0;

  void add(CLI::App* app) {
    app->add_option("--x", kind, "price response: const (x = scale) or exp (x = e^-r)")
        ->check(CLI::IsMember({"const", "exp"}));
    app->add_option("--x-scale", scale, "value of the constant price response");
  }

  ResponseSpec spec() const {
    ResponseSpec r;
    r.kind = kind == "exp" ? ResponseSpec::Kind::exponential : ResponseSpec::Kind::constant;
    r.scale = scale;
    return r;
  }
};

std::string fmt(double v) { return io::format_double(v); }

// ---- simulate ---------------------------------------------------------------

struct SimulateCmd {
  ParamFlags params;
  ResponseFlags response;
  std::optional<double> horizon;
  std::optional<Count> target_n;
  double tail = 0.0;
  std::optional<double> price;
  std::string price_file;
  std::uint64_t seed = 0;
  std::string out;
  bool transformed = false;

  int run() const {
    const auto p = params.market();
    if (transformed) to_transformed(p);  // alpha <= beta is rejected here
    if (horizon.has_value() == target_n.has_value())
      throw ValidationFailure("give exactly one of --horizon or --target-n");
    if (price && !price_file.empty())
      throw ValidationFailure("give at most one of --price or --price-file");

    SimConfig cfg;
    cfg.params = p;
    cfg.x = response.spec().make();
    cfg.policy = price_file.empty() ? PricingPolicy::constant(price.value_or(0.0))
                                    : PricingPolicy::schedule(io::read_price_csv(price_file));
    if (horizon) cfg.stop = StopAtHorizon{*horizon};
    else cfg.stop = StopAtCount{*target_n, tail};
    cfg.seed = seed;
    const auto path = simulate(cfg);
    if (!out.empty()) io::write_path(out, path);

    std::cout << "n=" << path.adoptions() << "\n"
              << "final_time=" << fmt(path.horizon) << "\n"
              << "seed=" << seed << "\n";
    if (transformed) {
      const auto tp = to_transformed(p);
      std::cout << "alpha_p=" << fmt(tp.alpha_p) << "\nbeta_p=" << fmt(tp.beta_p) << "\n";
    }
    return kOk;
  }
};

// ---- fit --------------------------------------------------------------------

struct FitCmd {
  std::string path_file;
  ResponseFlags response;
  std::string report;
  std::string parametrization = "transformed";

  int run() const {
    const auto path = io::read_path(path_file);
    const auto st = PathStatistics::from(path, response.spec().make());
    json out;
    if (parametrization == "transformed") {
      out = io::fit_to_json(fit_mle(st));
    } else if (parametrization == "natural") {
      out = io::fit_to_json(fit_mle_natural(st));
    } else {
      const auto t = fit_mle(st);
      const auto n = fit_mle_natural(st);
      out = {{"transformed", io::fit_to_json(t)},
             {"natural", io::fit_to_json(n)},
             {"alpha_hat_difference", std::abs(t.natural_hat.alpha - n.natural_hat.alpha)},
             {"beta_hat_difference", std::abs(t.natural_hat.beta - n.natural_hat.beta)}};
    }
    const auto text = out.dump(2) + "\n";
    if (report.empty()) std::cout << text;
    else io::write_file(report, text);
    return kOk;
  }
};

// ---- experiment -------------------------------------------------------------

struct ExperimentCmd {
  std::string config;
  std::string out_dir = ".";

  int run() const {
    io::RunConfig rc;
    try {
      rc = io::run_config_from_json(json::parse(io::read_file(config)));
    } catch (const json::parse_error& e) {
      throw ValidationFailure(std::string("bad JSON config: ") + e.what());
    }
    const auto report = run_mse_experiment(rc.experiment);
    const auto tp = to_transformed(rc.experiment.truth);
    const auto bound = verify_mse_bound(report, BoundConstants::from(tp, rc.delta_bar));
    std::optional<MInvarianceReport> minv;
    if (rc.m_invariance)
      minv = run_m_invariance_check(rc.experiment, rc.m_invariance->n, rc.m_invariance->m_grid);

    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    io::write_file((dir / "report.csv").string(), io::report_to_csv(report));
    io::write_file((dir / "report.json").string(),
                   io::report_to_json(rc, report, bound, minv).dump(2) + "\n");

    std::cout << "slope=" << fmt(report.total_slope.slope) << " ci=[" << fmt(report.total_slope.ci_low)
              << ", " << fmt(report.total_slope.ci_high) << "]\n"
              << "slope_beta_natural=" << fmt(report.beta_natural_slope.slope) << "\n"
              << "scaled_ratio=" << fmt(report.scaled_ratio) << "\n"
              << "bound_check=" << (bound.all_pass ? "pass" : "fail")
              << " alpha_theta=" << fmt(bound.alpha_theta)
              << " empirical_constant=" << fmt(bound.empirical_constant)
              << " required_delta_bar=" << fmt(bound.required_delta_bar) << "\n";
    for (const auto& row : report.rows)
      if (row.invalid)
        std::cout << "warning: n=" << row.n << " excluded " << row.excluded << " of "
                  << row.replications << " fits\n";
    if (minv) {
      int invalid = 0;
      for (const auto& r : minv->rows) invalid += r.row.invalid ? 1 : 0;
      std::cout << "m_invariance_slope=" << fmt(minv->slope) << " " << (minv->pass ? "pass" : "fail")
                << " invalid_rows=" << invalid << "/" << minv->rows.size() << "\n";
    }
    return kOk;
  }
};

// ---- verify -----------------------------------------------------------------

struct VerifyCmd {
  std::string check = "all";
  ParamFlags params;
  ResponseFlags response;
  std::optional<Count> n;
  std::optional<double> delta;
  std::optional<Count> state;
  double delta_bar1 = 1.0;
  double delta_bar2 = 1.0;
  double price = 0.0;
  std::string config;
  std::string report;

  int fisher(const TransformedParams& tp, Count m) const {
    std::vector<Count> ns = n ? std::vector<Count>{*n} : DiagnosticsConfig{}.sandwich_n;
    std::vector<double> betas =
        params.beta_p && n ? std::vector<double>{tp.beta_p} : DiagnosticsConfig{}.sandwich_beta_p;
    if (!n) betas.push_back(tp.beta_p);
    int rc = kOk;
    for (Count nn : ns) {
      if (nn > m) {
        if (n) throw DomainError("--n must not exceed --m");
        continue;
      }
      for (double b : betas) {
        const auto s = fisher_sandwich(nn, m, b);
        const bool ok = s.lower <= s.exact && s.exact <= s.upper;
        std::cout << "fisher n=" << nn << " m=" << m << " beta_p=" << fmt(b)
                  << " lower=" << fmt(s.lower) << " exact=" << fmt(s.exact)
                  << " upper=" << fmt(s.upper) << (ok ? " pass" : " FAIL") << "\n";
        if (!ok) rc = kViolation;
      }
    }
    return rc;
  }

  int hellinger(const TransformedParams& tp, Count m) const {
    const DeltaBar bar{delta_bar1, delta_bar2};
    const auto x = response.spec().make();
    std::vector<Count> states = state ? std::vector<Count>{*state} : std::vector<Count>{};
    if (!state)
      for (Count j : DiagnosticsConfig{}.states)
        if (j < m) states.push_back(j);
    std::vector<HellingerRow> rows;
    if (delta) {
      for (Count j : states)
        for (Direction dir : {Direction::alpha_p, Direction::beta_p})
          rows.push_back({j, dir, *delta, hellinger_gap(j, m, tp, *delta, dir, price, x, bar)});
    } else {
      DiagnosticsConfig cfg;
      cfg.truth = tp;
      cfg.m = m;
      cfg.price = price;
      cfg.response = response.spec();
      cfg.delta_bar = bar;
      cfg.states = states;
      cfg.sandwich_n.clear();
      rows = run_diagnostics(cfg).hellinger;
    }
    int rc = kOk;
    for (const auto& r : rows) {
      const bool ok = r.gap.bound_holds && r.gap.exp_bound_holds;
      std::cout << "hellinger state=" << r.state
                << " dir=" << (r.direction == Direction::alpha_p ? "alpha_p" : "beta_p")
                << " delta=" << fmt(r.delta) << " hellinger_sq=" << fmt(r.gap.hellinger_sq)
                << " bound=" << fmt(r.gap.kl_bound) << " affinity=" << fmt(r.gap.affinity)
                << (ok ? " pass" : " FAIL") << "\n";
      if (!ok) rc = kViolation;
    }
    return rc;
  }

  int bound(std::optional<io::RunConfig> rc_cfg, const TransformedParams& tp) const {
    MseReport rep;
    if (!report.empty()) {
      rep = io::report_from_json(json::parse(io::read_file(report)));
    } else if (rc_cfg) {
      rep = run_mse_experiment(rc_cfg->experiment);
    } else {
      throw ValidationFailure("--check bound needs --report or --config");
    }
    const auto c = BoundConstants::from(tp, {delta_bar1, delta_bar2});
    const auto b = verify_mse_bound(rep, c);
    std::cout << "R=" << fmt(c.r) << " R_alt=" << fmt(c.r_alt) << " alpha_theta=" << fmt(c.alpha_theta)
              << "\n";
    for (const auto& r : b.rows)
      std::cout << "bound n=" << r.n << " mse_total=" << fmt(r.mse_total) << " bound=" << fmt(r.bound)
                << (r.pass ? " pass" : " FAIL") << "\n";
    std::cout << "empirical_constant=" << fmt(b.empirical_constant)
              << " required_delta_bar=" << fmt(b.required_delta_bar) << "\n";
    return b.all_pass ? kOk : kViolation;
  }

  int run() const {
    std::optional<io::RunConfig> rc_cfg;
    if (!config.empty()) {
      try {
        rc_cfg = io::run_config_from_json(json::parse(io::read_file(config)));
      } catch (const json::parse_error& e) {
        throw ValidationFailure(std::string("bad JSON config: ") + e.what());
      }
    }
    const MarketParams reference{0.3, 0.1, params.m};
    MarketParams market{};
    TransformedParams tp{};
    if (params.beta_p && !params.alpha_p && !params.natural_given()) {
      // --beta-p alone: pair it with the reference alpha'.
      tp = {to_transformed(reference).alpha_p, *params.beta_p};
      market = from_transformed(tp, params.m);
    } else {
      market = params.market(rc_cfg ? std::optional(rc_cfg->experiment.truth) : reference);
      tp = to_transformed(market);
    }
    const Count m = market.m;

    int rc = kOk;
    auto merge = [&rc](int r) { rc = std::max(rc, r); };
    if (check == "fisher" || check == "all") merge(fisher(tp, m));
    if (check == "hellinger" || check == "all") merge(hellinger(tp, m));
    if (check == "bound" || (check == "all" && (!report.empty() || rc_cfg))) merge(bound(rc_cfg, tp));
    std::cout << (rc == kOk ? "all checks pass" : "inequality violated") << "\n";
    return rc;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bass diffusion simulation and maximum-likelihood toolkit"};
  app.require_subcommand(1);

  SimulateCmd sim;
  auto* s = app.add_subcommand("simulate", "simulate an adoption path");
  sim.params.add(s);
  sim.response.add(s);
  s->add_option("--horizon", sim.horizon, "observation horizon");
  s->add_option("--target-n", sim.target_n, "stop at this many adoptions");
  s->add_option("--tail", sim.tail, "adoption-free window after the n-th adoption");
  s->add_option("--price", sim.price, "constant price");
  s->add_option("--price-file", sim.price_file, "price schedule CSV (start,end,price)");
  s->add_option("--seed", sim.seed, "random seed");
  s->add_option("--out", sim.out, "output path file (.json or .csv)");
  s->add_flag("--transformed", sim.transformed, "also report (alpha', beta'); requires alpha > beta");

  FitCmd fit;
  auto* f = app.add_subcommand("fit", "maximum-likelihood fit of a path file");
  f->add_option("--path", fit.path_file, "path file (.json or .csv)")->required();
  fit.response.add(f);
  f->add_option("--report", fit.report, "write the JSON report here instead of stdout");
  f->add_option("--parametrization", fit.parametrization)
      ->check(CLI::IsMember({"transformed", "natural", "both"}));

  ExperimentCmd exp;
  auto* e = app.add_subcommand("experiment", "Monte Carlo MSE experiment");
  e->add_option("--config", exp.config, "run config JSON")->required();
  e->add_option("--out-dir", exp.out_dir, "directory for report.csv and report.json");

  VerifyCmd ver;
  auto* v = app.add_subcommand("verify", "check the Fisher, Hellinger and MSE-bound inequalities");
  v->add_option("--check", ver.check)->check(CLI::IsMember({"fisher", "hellinger", "bound", "all"}));
  ver.params.add(v);
  ver.response.add(v);
  v->add_option("--n", ver.n, "adoption count for the Fisher sandwich");
  v->add_option("--delta", ver.delta, "absolute perturbation for the Hellinger check");
  v->add_option("--state", ver.state, "adoption state j for the Hellinger check");
  v->add_option("--delta-bar1", ver.delta_bar1, "radius factor for alpha'");
  v->add_option("--delta-bar2", ver.delta_bar2, "radius factor for beta'");
  v->add_option("--price", ver.price, "constant price for the Hellinger check");
  v->add_option("--config", ver.config, "run config JSON (parameters; bound check runs it)");
  v->add_option("--report", ver.report, "report.json from a previous experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kInvalid;
  }

  try {
    if (s->parsed()) return sim.run();
    if (f->parsed()) return fit.run();
    if (e->parsed()) return exp.run();
    if (v->parsed()) return ver.run();
  } catch (const InsufficientData& ex) {
    std::cerr << "insufficient data: " << ex.what() << "\n";
    return kInsufficient;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
