#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config_io.hpp"
#include "robust_bundling/adversary.hpp"
#include "robust_bundling/domain_variant.hpp"
#include "robust_bundling/mechanism.hpp"
#include "robust_bundling/saddle_core.hpp"
#include "robust_bundling/verifier.hpp"
#include "robust_bundling/worst_case.hpp"

namespace {

using namespace rbcli;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kSchema = 2;
constexpr int kNonConvergence = 3;

struct Flags {
  std::string config;
  std::string solution;
  std::string out;
  std::string what;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load_config(const Flags& f) {
  if (f.config.empty()) {
    throw UsageError("--config is required");
  }
  RunConfig cfg = parse_config(read_json_file(f.config));
  if (f.seed) {
    cfg.seed = *f.seed;
  }
  if (f.trials) {
    cfg.trials = *f.trials;
  }
  return cfg;
}

std::string out_path(const Flags& f, const RunConfig& cfg, const std::string& name) {
  if (!f.out.empty()) {
    return f.out;
  }
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw UsageError("cannot write " + path);
  }
  os << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

rb::NatureOptions nature_options(const RunConfig& cfg) {
  rb::NatureOptions o;
  o.trials = cfg.trials;
  o.seed = cfg.seed;
  o.support_size = cfg.support_size;
  o.bins = cfg.bins;
  return o;
}

rb::SweepOptions sweep_options(const RunConfig& cfg) {
  rb::SweepOptions o;
  o.price_step = cfg.price_step;
  o.menu_grid = cfg.menu_grid;
  return o;
}

const rb::AmbiguityProblem& moment_of(const RunConfig& cfg) {
  if (cfg.is_domain()) {
    throw UsageError("command needs a moment-variant config");
  }
  return std::get<rb::AmbiguityProblem>(cfg.problem);
}

rb::SaddleSolution load_moment_solution(const Flags& f, const RunConfig& cfg) {
  if (f.solution.empty()) {
    throw UsageError("--solution is required");
  }
  rb::SaddleSolution sol = parse_moment_solution(read_json_file(f.solution));
  const auto& p = moment_of(cfg);
  bool match = sol.n() == p.n && sol.partition == p.partition;
  for (std::size_t k = 0; match && k < p.partition.size(); ++k) {
    match = sol.kernels[k] == p.dispersions[k].kernel;
  }
  if (!match) {
    throw SchemaError(f.solution, "solution does not match the config's items, partition or kernels");
  }
  return sol;
}

rb::DomainSolution load_domain_solution(const Flags& f, const RunConfig& cfg) {
  if (f.solution.empty()) {
    throw UsageError("--solution is required");
  }
  rb::DomainSolution sol = parse_domain_solution(read_json_file(f.solution));
  const auto& p = std::get<rb::DomainProblem>(cfg.problem);
  if (sol.problem.partition != p.partition || sol.problem.means != p.means || sol.problem.caps != p.caps) {
    throw SchemaError(f.solution, "solution does not match the config's partition, means or caps");
  }
  return sol;
}

int cmd_solve(const Flags& f) {
  const RunConfig cfg = load_config(f);
  json out;
  if (cfg.is_domain()) {
    out = solution_json(rb::solve_domain(std::get<rb::DomainProblem>(cfg.problem)));
  } else {
    out = solution_json(rb::minimize_guarantee(moment_of(cfg)));
  }
  const std::string path = out_path(f, cfg, "solution.json");
  write_json(path, out);
  std::cout << "guarantee " << fmt(out["guarantee"].get<double>()) << " -> " << path << "\n";
  return kOk;
}

int cmd_domain_solve(const Flags& f) {
  const RunConfig cfg = load_config(f);
  if (!cfg.is_domain()) {
    throw SchemaError("problem.variant", "domain-solve needs \"domain\"");
  }
  return cmd_solve(f);
}

int cmd_verify(const Flags& f) {
  const RunConfig cfg = load_config(f);
  rb::CertifyOptions opt;
  opt.nature = nature_options(cfg);
  opt.sweep = sweep_options(cfg);
  rb::SaddleReport report;
  if (cfg.is_domain()) {
    report = rb::domain_saddle_check(load_domain_solution(f, cfg), opt);
  } else {
    const rb::SaddleSolution sol = load_moment_solution(f, cfg);
    opt.problem = &moment_of(cfg);
    report = rb::certify(sol, opt);
  }
  const std::string path = out_path(f, cfg, "report.json");
  write_json(path, report_json(report));
  for (const auto& c : report.checks) {
    if (!c.passed) {
      std::cerr << "FAILED " << c.name << ": " << fmt(c.value) << " > " << fmt(c.threshold) << "\n";
    }
  }
  std::cout << (report.passed() ? "all checks passed" : "some checks failed") << " -> " << path << "\n";
  return report.passed() ? kOk : kCheckFailed;
}

std::string distribution_csv(const rb::DiscreteDistribution& d, std::size_t n) {
  std::ostringstream os;
  for (std::size_t i = 0; i < n; ++i) {
    os << "v_" << (i + 1) << ",";
  }
  os << "weight\n";
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (double v : d.points[k]) {
      os << fmt(v) << ",";
    }
    os << fmt(d.weights[k]) << "\n";
  }
  return os.str();
}

int cmd_adversary(const Flags& f) {
  const RunConfig cfg = load_config(f);
  const std::string what = f.what.empty() ? "lp" : f.what;
  json summary{{"what", what}};
  rb::DiscreteDistribution dist;
  std::size_t n = 0;

  if (what == "lp") {
    rb::MomentTargets targets;
    rb::CurveDistribution curve;
    std::optional<rb::DirectMechanism> mech;
    rb::SupportFilter keep;
    std::optional<rb::DomainSolution> dsol;
    if (cfg.is_domain()) {
      dsol = load_domain_solution(f, cfg);
      targets = {dsol->problem.partition, dsol->problem.means, {}, {}};
      curve = dsol->curve();
      mech.emplace(dsol->menu());
      keep = [&](std::span<const double> v) { return rb::within_caps(dsol->problem, v); };
      summary["guarantee"] = dsol->guarantee;
    } else {
      const rb::SaddleSolution sol = load_moment_solution(f, cfg);
      targets = rb::MomentTargets::from_solution(sol);
      curve = rb::CurveDistribution::from_solution(sol);
      mech.emplace(rb::build_menu(sol));
      summary["guarantee"] = sol.guarantee;
    }
    n = curve.n;
    bool found = false;
    for (std::size_t t = 0; t < std::max<std::size_t>(cfg.trials, 1) && !found; ++t) {
      const std::uint64_t s = rb::trial_seed(cfg.seed, t);
      auto raw = rb::random_support(curve, targets.means, keep ? 4 * cfg.support_size : cfg.support_size, s);
      std::vector<std::vector<double>> support;
      for (auto& v : raw) {
        if (support.size() < cfg.support_size && (!keep || keep(v))) {
          support.push_back(std::move(v));
        }
      }
      const rb::LpOutcome res = rb::lp_feasible_distribution(targets, support, s ^ 0x5bd1e995ULL);
      if (const auto* d = std::get_if<rb::DiscreteDistribution>(&res)) {
        dist = *d;
        found = true;
        summary["trial"] = t;
        summary["revenue"] = rb::revenue(*mech, dist);
        summary["moment_residual"] = targets.max_residual(dist);
      }
    }
    if (!found) {
      std::cerr << "no feasible LP distribution in " << cfg.trials << " trials\n";
      return kCheckFailed;
    }
  } else if (what == "corner_transfer") {
    const rb::SaddleSolution sol = load_moment_solution(f, cfg);
    const rb::Prop3Outcome r = rb::prop3_check(sol, cfg.corner_epsilon, cfg.bins);
    dist = r.distribution;
    n = sol.n();
    summary.update({{"epsilon", r.epsilon},
                    {"alpha", r.alpha},
                    {"best_separate_sales", r.best_separate},
                    {"gap", r.gap},
                    {"bundled_mechanism_revenue", r.mechanism_revenue},
                    {"mean_residual", r.mean_residual},
                    {"dispersion_residual", r.dispersion_residual}});
  } else if (what == "flattened_tail") {
    const rb::SaddleSolution sol = load_moment_solution(f, cfg);
    const rb::Prop2Outcome r = rb::prop2_search(sol, cfg.epsilons, cfg.cut_fraction);
    if (!r.perturbation) {
      std::cerr << "no admissible epsilon among the configured values\n";
      return kCheckFailed;
    }
    const rb::Prop2Perturbation& p = *r.perturbation;
    dist = rb::discretize_curve(p.curve, cfg.bins);
    n = sol.n();
    json derivs = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      if (!p.in_max_set[i]) {
        continue;
      }
      const auto d = rb::prop2_derivative(sol.bundles[i], sol.kernels[i], p.cut_ell);
      const double h = 1e-4;
      const auto small = rb::prop2_distribution(sol, h, cfg.cut_fraction, 16);
      derivs.push_back({{"item", i},
                        {"implicit", d.implicit},
                        {"printed", d.printed},
                        {"finite_difference", (small.alpha_eps[i] - sol.bundles[i].alpha) / h}});
    }
    summary.update({{"found", r.found},
                    {"epsilon", r.epsilon},
                    {"tried", r.tried},
                    {"guarantee", r.guarantee},
                    {"best_pure_bundling", r.best_bundling},
                    {"gap", r.gap},
                    {"bundling_limit", r.bundling_limit},
                    {"moment_residual", r.moment_residual},
                    {"cut_ell", p.cut_ell},
                    {"alpha_eps", p.alpha_eps},
                    {"ell_eps", p.ell_eps},
                    {"dalpha_deps", derivs}});
  } else {
    throw UsageError("--what must be lp, corner_transfer or flattened_tail");
  }
  const std::string path = out_path(f, cfg, "adversary_" + what + ".csv");
  write_text(path, distribution_csv(dist, n));
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

std::string bundling_profit_csv(const rb::CurveDistribution& curve, const std::optional<rb::CurveDistribution>& perturbed) {
  std::vector<std::size_t> all(curve.n);
  for (std::size_t i = 0; i < curve.n; ++i) {
    all[i] = i;
  }
  const rb::ValueTail base = rb::group_value_tail(curve, all);
  std::optional<rb::ValueTail> alt;
  if (perturbed) {
    alt = rb::group_value_tail(*perturbed, all);
  }
  std::vector<double> prices;
  const double hi = 1.2 * base.top;
  for (int k = 1; k <= 600; ++k) {
    prices.push_back(hi * k / 600.0);
  }
  prices.insert(prices.end(), base.breaks.begin(), base.breaks.end());
  std::sort(prices.begin(), prices.end());
  prices.erase(std::unique(prices.begin(), prices.end()), prices.end());
  std::ostringstream os;
  os << "p,fstar,perturbed\n";
  for (double p : prices) {
    os << fmt(p) << "," << fmt(p * base.tail(p)) << ","
       << (alt ? fmt(p * alt->tail(p)) : std::string("nan")) << "\n";
  }
  return os.str();
}

int cmd_plot_data(const Flags& f) {
  const RunConfig cfg = load_config(f);
  const std::string what = f.what;
  if (what != "support" && what != "revenue_surface" && what != "price_density" && what != "bundling_profit") {
    throw UsageError("--what must be support, revenue_surface, price_density or bundling_profit");
  }
  std::optional<rb::CurveDistribution> curve;
  std::optional<rb::RandomPriceMenu> menu;
  std::optional<rb::CurveDistribution> perturbed;
  if (cfg.is_domain()) {
    const rb::DomainSolution sol = load_domain_solution(f, cfg);
    curve = sol.curve();
    menu.emplace(sol.menu());
  } else {
    const rb::SaddleSolution sol = load_moment_solution(f, cfg);
    curve = rb::CurveDistribution::from_solution(sol);
    menu.emplace(rb::build_menu(sol));
    const bool finest = std::all_of(sol.partition.begin(), sol.partition.end(),
                                    [](const auto& b) { return b.size() == 1; });
    if (what == "bundling_profit" && finest && sol.n() >= 2) {
      try {
        const rb::Prop2Outcome r = rb::prop2_search(sol, cfg.epsilons, cfg.cut_fraction);
        if (r.perturbation) {
          perturbed = r.perturbation->curve;
        }
      } catch (const rb::HypothesisViolated&) {
      }
    }
  }
  std::ostringstream os;
  if (what == "support") {
    rb::write_support_csv(os, *curve, 201);
  } else if (what == "price_density") {
    rb::write_price_density_csv(os, *menu, 201);
  } else if (what == "revenue_surface") {
    if (curve->n != 2) {
      throw SchemaError("problem.n", "revenue_surface needs exactly two items");
    }
    rb::write_revenue_surface_csv(os, rb::DirectMechanism(*menu), 101);
  } else {
    os << bundling_profit_csv(*curve, perturbed);
  }
  const std::string path = out_path(f, cfg, what + ".csv");
  write_text(path, os.str());
  std::cout << what << " -> " << path << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust bundled-sales saddle points: solve, certify and probe worst cases"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub, bool needs_solution) {
    sub->add_option("--config", flags.config, "JSON run config")->required();
    if (needs_solution) {
      sub->add_option("--solution", flags.solution, "solution file written by solve")->required();
    }
    sub->add_option("--out", flags.out, "output file (default: <output_dir>/<name>)");
    sub->add_option("--seed", flags.seed, "override the config seed");
    sub->add_option("--trials", flags.trials, "override the config trial count");
  };
  auto* solve = app.add_subcommand("solve", "solve the problem and write the solution file");
  add_common(solve, false);
  auto* domain = app.add_subcommand("domain-solve", "solve a capped-domain problem");
  add_common(domain, false);
  auto* verify = app.add_subcommand("verify", "certify a solution and write the saddle report");
  add_common(verify, true);
  auto* adversary = app.add_subcommand("adversary", "write a nature-side deviation distribution");
  add_common(adversary, true);
  adversary->add_option("--what", flags.what, "lp, corner_transfer or flattened_tail");
  auto* plot = app.add_subcommand("plot-data", "write figure data as CSV");
  add_common(plot, true);
  plot->add_option("--what", flags.what, "support, revenue_surface, price_density or bundling_profit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kSchema;
  }

  try {
    if (solve->parsed()) {
      return cmd_solve(flags);
    }
    if (domain->parsed()) {
      return cmd_domain_solve(flags);
    }
    if (verify->parsed()) {
      return cmd_verify(flags);
    }
    if (adversary->parsed()) {
      return cmd_adversary(flags);
    }
    return cmd_plot_data(flags);
  } catch (const rb::NonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const rb::NewtonDivergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSchema;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSchema;
  } catch (const rb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSchema;
  }
}
