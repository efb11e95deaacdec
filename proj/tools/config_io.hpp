#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "robust_bundling/domain_variant.hpp"
#include "robust_bundling/saddle_core.hpp"
#include "robust_bundling/verifier.hpp"

namespace rbcli {

using nlohmann::json;
namespace rb = robust_bundling;

/// Config or solution file does not match its schema; the message names the field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& path, const std::string& what) : std::runtime_error(path + ": " + what) {}
};

struct RunConfig {
  std::variant<rb::AmbiguityProblem, rb::DomainProblem> problem;
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  std::size_t support_size = 30;
  std::size_t bins = 10000;
  double price_step = 1e-3;
  std::size_t menu_grid = 40;
  std::vector<double> epsilons{1e-2, 1e-3, 1e-4, 1e-5};
  double cut_fraction = 0.5;
  double corner_epsilon = 0.01;
  std::string output_dir = ".";

  bool is_domain() const { return std::holds_alternative<rb::DomainProblem>(problem); }
};

namespace detail {

inline void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw SchemaError(path, "expected an object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) {
      throw SchemaError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) {
    throw SchemaError(join(path, key), "missing required key");
  }
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) {
    throw SchemaError(path, "expected a number");
  }
  const double x = v.get<double>();
  if (!std::isfinite(x)) {
    throw SchemaError(path, "must be finite");
  }
  return x;
}

inline double positive(const json& v, const std::string& path) {
  const double x = number(v, path);
  if (!(x > 0.0)) {
    throw SchemaError(path, "must be positive");
  }
  return x;
}

inline std::uint64_t count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw SchemaError(path, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

inline rb::Interval interval(const json& v, const std::string& path) {
  if (v.is_array()) {
    if (v.size() != 2) {
      throw SchemaError(path, "interval must be [lo, hi]");
    }
    const double lo = positive(v[0], index(path, 0));
    const double hi = positive(v[1], index(path, 1));
    if (!(lo <= hi)) {
      throw SchemaError(path, "interval needs lo <= hi");
    }
    return {lo, hi};
  }
  return rb::Interval::point(positive(v, path));
}

inline rb::Partition partition(const json& v, const std::string& path, std::size_t n) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "finest") {
      return rb::finest_partition(n);
    }
    if (s == "coarsest") {
      return rb::coarsest_partition(n);
    }
    throw SchemaError(path, "expected \"finest\", \"coarsest\" or a list of index lists");
  }
  if (!v.is_array()) {
    throw SchemaError(path, "expected \"finest\", \"coarsest\" or a list of index lists");
  }
  rb::Partition out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_array()) {
      throw SchemaError(index(path, k), "expected a list of item indices");
    }
    std::vector<std::size_t> block;
    for (std::size_t j = 0; j < v[k].size(); ++j) {
      block.push_back(count(v[k][j], index(index(path, k), j)));
    }
    out.push_back(std::move(block));
  }
  try {
    rb::validate_partition(out, n);
  } catch (const rb::InvalidArgument& e) {
    throw SchemaError(path, e.what());
  }
  return out;
}

inline rb::DispersionFunction kernel(const json& v, const std::string& path) {
  only_keys(v, path, {"kind", "a", "b"});
  const json& kind = field(v, path, "kind");
  if (kind == "quadratic") {
    if (v.contains("a") || v.contains("b")) {
      throw SchemaError(path, "quadratic kernel takes no coefficients");
    }
    return rb::DispersionFunction::quadratic();
  }
  if (kind == "quartic") {
    const double a = positive(field(v, path, "a"), join(path, "a"));
    const double b = number(field(v, path, "b"), join(path, "b"));
    if (b < 0.0) {
      throw SchemaError(join(path, "b"), "must be nonnegative");
    }
    return rb::DispersionFunction::quartic(a, b);
  }
  throw SchemaError(join(path, "kind"), "expected \"quadratic\" or \"quartic\"");
}

inline json kernel_json(const rb::DispersionFunction& phi) {
  if (phi.kind() == rb::DispersionFunction::Kind::Quadratic) {
    return {{"kind", "quadratic"}};
  }
  return {{"kind", "quartic"}, {"a", phi.a()}, {"b", phi.b()}};
}

inline std::size_t item_count(const json& p, const std::string& path) {
  const std::uint64_t n = count(field(p, path, "n"), join(path, "n"));
  if (n == 0) {
    throw SchemaError(join(path, "n"), "must be at least 1");
  }
  return n;
}

inline const json& sized_array(const json& p, const std::string& path, const char* key, std::size_t size) {
  const json& arr = field(p, path, key);
  if (!arr.is_array() || arr.size() != size) {
    throw SchemaError(join(path, key), "expected an array of length " + std::to_string(size));
  }
  return arr;
}

inline rb::AmbiguityProblem moment_problem(const json& p, const std::string& path) {
  only_keys(p, path, {"variant", "n", "partition", "means", "dispersions"});
  rb::AmbiguityProblem out;
  out.n = item_count(p, path);
  out.partition = partition(field(p, path, "partition"), join(path, "partition"), out.n);
  const json& means = sized_array(p, path, "means", out.n);
  for (std::size_t i = 0; i < out.n; ++i) {
    out.means.push_back(interval(means[i], index(join(path, "means"), i)));
  }
  const json& disp = sized_array(p, path, "dispersions", out.partition.size());
  for (std::size_t k = 0; k < disp.size(); ++k) {
    const std::string at = index(join(path, "dispersions"), k);
    only_keys(disp[k], at, {"kernel", "s"});
    rb::BundleDispersion d;
    d.kernel = disp[k].contains("kernel") ? kernel(disp[k]["kernel"], join(at, "kernel"))
                                          : rb::DispersionFunction::quadratic();
    d.s = interval(field(disp[k], at, "s"), join(at, "s"));
    out.dispersions.push_back(d);
  }
  return out;
}

inline rb::DomainProblem domain_problem(const json& p, const std::string& path) {
  only_keys(p, path, {"variant", "n", "partition", "means", "caps"});
  rb::DomainProblem out;
  const std::size_t n = item_count(p, path);
  out.partition = partition(field(p, path, "partition"), join(path, "partition"), n);
  const json& means = sized_array(p, path, "means", n);
  for (std::size_t i = 0; i < n; ++i) {
    out.means.push_back(positive(means[i], index(join(path, "means"), i)));
  }
  const json& caps = sized_array(p, path, "caps", out.partition.size());
  for (std::size_t k = 0; k < caps.size(); ++k) {
    out.caps.push_back(positive(caps[k], index(join(path, "caps"), k)));
    if (!(out.caps[k] > out.bundle_mean(k))) {
      throw SchemaError(index(join(path, "caps"), k), "must exceed the bundle's total mean");
    }
  }
  return out;
}

}  // namespace detail

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError(path, "cannot open file");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path, std::string("invalid JSON: ") + e.what());
  }
}

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  only_keys(j, "", {"problem", "seed", "trials", "support_size", "bins", "sweep", "prop2", "prop3",
                 "output_dir"});
  RunConfig cfg;
  const json& p = field(j, "", "problem");
  if (!p.is_object()) {
    throw SchemaError("problem", "expected an object");
  }
  const std::string variant = p.contains("variant") ? p["variant"].is_string() ? p["variant"].get<std::string>() : ""
                                                    : "moment";
  if (variant == "moment") {
    cfg.problem = moment_problem(p, "problem");
  } else if (variant == "domain") {
    cfg.problem = domain_problem(p, "problem");
  } else {
    throw SchemaError("problem.variant", "expected \"moment\" or \"domain\"");
  }
  if (j.contains("seed")) {
    cfg.seed = count(j["seed"], "seed");
  }
  if (j.contains("trials")) {
    cfg.trials = count(j["trials"], "trials");
  }
  if (j.contains("support_size")) {
    cfg.support_size = count(j["support_size"], "support_size");
  }
  if (j.contains("bins")) {
    cfg.bins = count(j["bins"], "bins");
    if (cfg.bins == 0) {
      throw SchemaError("bins", "must be at least 1");
    }
  }
  if (j.contains("sweep")) {
    only_keys(j["sweep"], "sweep", {"price_step", "menu_grid"});
    if (j["sweep"].contains("price_step")) {
      cfg.price_step = positive(j["sweep"]["price_step"], "sweep.price_step");
    }
    if (j["sweep"].contains("menu_grid")) {
      cfg.menu_grid = count(j["sweep"]["menu_grid"], "sweep.menu_grid");
      if (cfg.menu_grid == 0) {
        throw SchemaError("sweep.menu_grid", "must be at least 1");
      }
    }
  }
  if (j.contains("prop2")) {
    only_keys(j["prop2"], "prop2", {"epsilons", "cut_fraction"});
    if (j["prop2"].contains("epsilons")) {
      const json& eps = j["prop2"]["epsilons"];
      if (!eps.is_array() || eps.empty()) {
        throw SchemaError("prop2.epsilons", "expected a nonempty array");
      }
      cfg.epsilons.clear();
      for (std::size_t k = 0; k < eps.size(); ++k) {
        cfg.epsilons.push_back(positive(eps[k], index("prop2.epsilons", k)));
      }
    }
    if (j["prop2"].contains("cut_fraction")) {
      cfg.cut_fraction = number(j["prop2"]["cut_fraction"], "prop2.cut_fraction");
      if (!(cfg.cut_fraction > 0.0 && cfg.cut_fraction < 1.0)) {
        throw SchemaError("prop2.cut_fraction", "must lie in (0, 1)");
      }
    }
  }
  if (j.contains("prop3")) {
    only_keys(j["prop3"], "prop3", {"epsilon"});
    if (j["prop3"].contains("epsilon")) {
      cfg.corner_epsilon = positive(j["prop3"]["epsilon"], "prop3.epsilon");
    }
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) {
      throw SchemaError("output_dir", "expected a string");
    }
    cfg.output_dir = j["output_dir"].get<std::string>();
  }
  return cfg;
}

inline json partition_json(const rb::Partition& p) {
  json out = json::array();
  for (const auto& block : p) {
    out.push_back(block);
  }
  return out;
}

inline json solution_json(const rb::SaddleSolution& sol) {
  json bundles = json::array();
  json kernels = json::array();
  json sensitivity = json::array();
  for (std::size_t k = 0; k < sol.bundles.size(); ++k) {
    const auto& b = sol.bundles[k];
    bundles.push_back(
        {{"alpha", b.alpha}, {"beta", b.beta}, {"lambda", b.lambda}, {"m", b.m}, {"s", b.s}, {"ell", b.ell}});
    kernels.push_back(detail::kernel_json(sol.kernels[k]));
    const auto r = rb::sensitivity_check(b, sol.kernels[k]);
    sensitivity.push_back({{"fd_dalpha_dm", r.fd_dalpha_dm},
                           {"formula_dalpha_dm", r.formula_dalpha_dm},
                           {"dm_agree", r.dm_agree},
                           {"fd_dalpha_ds", r.fd_dalpha_ds},
                           {"formula_dalpha_ds", r.formula_dalpha_ds},
                           {"ds_agree", r.ds_agree},
                           {"ds_magnitude_agree", r.ds_magnitude_agree},
                           {"ds_sign_agree", r.ds_sign_agree}});
  }
  return {{"variant", "moment"},
          {"n", sol.n()},
          {"partition", partition_json(sol.partition)},
          {"kernels", kernels},
          {"bundles", bundles},
          {"chosen_m", sol.chosen_m},
          {"chosen_s", sol.chosen_s},
          {"item_shares", sol.item_shares},
          {"guarantee", sol.guarantee},
          {"sensitivity", sensitivity}};
}

inline json solution_json(const rb::DomainSolution& sol) {
  json bundles = json::array();
  for (std::size_t k = 0; k < sol.alphas.size(); ++k) {
    const double a = sol.alphas[k];
    const double cap = sol.problem.caps[k];
    bundles.push_back({{"alpha", a}, {"cap", cap}, {"m", sol.problem.bundle_mean(k)},
                       {"density_scale", 1.0 / std::log(cap / a)}});
  }
  return {{"variant", "domain"},
          {"n", sol.problem.n()},
          {"partition", partition_json(sol.problem.partition)},
          {"means", sol.problem.means},
          {"bundles", bundles},
          {"item_shares", sol.item_shares},
          {"guarantee", sol.guarantee}};
}

inline rb::SaddleSolution parse_moment_solution(const json& j) {
  using namespace detail;
  only_keys(j, "", {"variant", "n", "partition", "kernels", "bundles", "chosen_m", "chosen_s", "item_shares",
                    "guarantee", "sensitivity"});
  if (field(j, "", "variant") != "moment") {
    throw SchemaError("variant", "expected \"moment\"");
  }
  rb::SaddleSolution sol;
  const std::size_t n = item_count(j, "");
  sol.partition = partition(field(j, "", "partition"), "partition", n);
  const std::size_t nk = sol.partition.size();
  const json& kernels = sized_array(j, "", "kernels", nk);
  const json& bundles = sized_array(j, "", "bundles", nk);
  for (std::size_t k = 0; k < nk; ++k) {
    sol.kernels.push_back(kernel(kernels[k], index("kernels", k)));
    const std::string at = index("bundles", k);
    only_keys(bundles[k], at, {"alpha", "beta", "lambda", "m", "s", "ell"});
    rb::BundleSolution b;
    b.alpha = positive(field(bundles[k], at, "alpha"), join(at, "alpha"));
    b.beta = positive(field(bundles[k], at, "beta"), join(at, "beta"));
    b.lambda = positive(field(bundles[k], at, "lambda"), join(at, "lambda"));
    b.m = positive(field(bundles[k], at, "m"), join(at, "m"));
    b.s = positive(field(bundles[k], at, "s"), join(at, "s"));
    b.ell = positive(field(bundles[k], at, "ell"), join(at, "ell"));
    sol.bundles.push_back(b);
  }
  const json& m = sized_array(j, "", "chosen_m", n);
  const json& sh = sized_array(j, "", "item_shares", n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.chosen_m.push_back(positive(m[i], index("chosen_m", i)));
    sol.item_shares.push_back(positive(sh[i], index("item_shares", i)));
  }
  const json& s = sized_array(j, "", "chosen_s", nk);
  for (std::size_t k = 0; k < nk; ++k) {
    sol.chosen_s.push_back(positive(s[k], index("chosen_s", k)));
  }
  sol.guarantee = number(field(j, "", "guarantee"), "guarantee");
  return sol;
}

inline rb::DomainSolution parse_domain_solution(const json& j) {
  using namespace detail;
  only_keys(j, "", {"variant", "n", "partition", "means", "bundles", "item_shares", "guarantee"});
  if (field(j, "", "variant") != "domain") {
    throw SchemaError("variant", "expected \"domain\"");
  }
  rb::DomainSolution sol;
  const std::size_t n = item_count(j, "");
  sol.problem.partition = partition(field(j, "", "partition"), "partition", n);
  const json& means = sized_array(j, "", "means", n);
  const json& shares = sized_array(j, "", "item_shares", n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.problem.means.push_back(positive(means[i], index("means", i)));
    sol.item_shares.push_back(positive(shares[i], index("item_shares", i)));
  }
  const json& bundles = sized_array(j, "", "bundles", sol.problem.partition.size());
  for (std::size_t k = 0; k < bundles.size(); ++k) {
    const std::string at = index("bundles", k);
    only_keys(bundles[k], at, {"alpha", "cap", "m", "density_scale"});
    sol.alphas.push_back(positive(field(bundles[k], at, "alpha"), join(at, "alpha")));
    sol.problem.caps.push_back(positive(field(bundles[k], at, "cap"), join(at, "cap")));
  }
  sol.guarantee = number(field(j, "", "guarantee"), "guarantee");
  return sol;
}

inline json report_json(const rb::SaddleReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back(
        {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}});
  }
  return {{"passed", r.passed()},
          {"guarantee", r.guarantee},
          {"seller_best_deviation_value", r.seller_best_deviation_value},
          {"nature_worst_value_found", r.nature_worst_value_found ? json(*r.nature_worst_value_found) : json(nullptr)},
          {"failed", r.failed()},
          {"checks", checks}};
}

}  // namespace rbcli
