// wflow: scenario runner for the library.
//
// Exit codes: 0 pass, 2 a checked property failed, 1 error (bad input, solver failure).
// Artifacts go to --out (default "."); equal inputs and seeds give byte-identical files.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acceptance.hpp"
#include "wflow/dissipativity.hpp"
#include "wflow/io.hpp"

namespace fs = std::filesystem;
using namespace wflow;

namespace {

constexpr int kPass = 0;
constexpr int kError = 1;
constexpr int kFail = 2;

struct Context {
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

struct Scenario {
  json j;
  fs::path dir;

  const json& params() const {
    static const json empty = json::object();
    return j.contains("params") ? j.at("params") : empty;
  }
};

Scenario load_scenario(const std::string& file) {
  Scenario s{read_json_file(file), fs::path(file).parent_path()};
  if (!s.j.is_object()) throw SchemaError("$", "scenario must be an object");
  if (s.j.contains("params") && !s.j.at("params").is_object()) throw SchemaError("$.params", "expected an object");
  return s;
}

// A measure entry is either inline JSON or a path relative to the scenario file.
DiscreteMeasure measure_entry(const json& j, const fs::path& dir, const std::string& path) {
  if (j.is_string()) {
    const fs::path p = fs::path(j.get<std::string>());
    return measure_from_json(read_json_file((p.is_absolute() ? p : dir / p).string()));
  }
  return measure_from_json(j, path);
}

std::vector<DiscreteMeasure> scenario_measures(const Scenario& s, std::size_t at_least) {
  std::vector<DiscreteMeasure> out;
  if (s.j.contains("measures")) {
    const auto& ms = s.j.at("measures");
    if (!ms.is_array()) throw SchemaError("$.measures", "expected an array");
    for (std::size_t i = 0; i < ms.size(); ++i)
      out.push_back(measure_entry(ms[i], s.dir, "$.measures[" + std::to_string(i) + "]"));
  }
  if (out.size() < at_least)
    throw SchemaError("$.measures", "expected at least " + std::to_string(at_least) + " measure(s)");
  return out;
}

VelocityField scenario_field(const Scenario& s) {
  if (s.j.contains("functional")) return functional_from_json(s.j.at("functional"), "$.functional").subgradient_field();
  if (s.j.contains("field")) return field_from_json(s.j.at("field"), "$.field");
  throw SchemaError("$", "missing \"field\" or \"functional\"");
}

Functional scenario_functional(const Scenario& s) {
  if (s.j.contains("functional")) return functional_from_json(s.j.at("functional"), "$.functional");
  if (s.j.contains("field")) {
    const auto& f = s.j.at("field");
    if (f.is_object() && f.value("kind", "") == "pw") return functional_from_json(f, "$.field");
  }
  throw SchemaError("$.functional", "missing functional (or a field of kind \"pw\")");
}

double real_param(const Scenario& s, const std::string& key, std::optional<double> fallback = std::nullopt) {
  const auto& p = s.params();
  if (!p.contains(key)) {
    if (fallback) return *fallback;
    throw SchemaError("$.params." + key, "missing field");
  }
  if (!p.at(key).is_number()) throw SchemaError("$.params." + key, "expected a number");
  return p.at(key).get<double>();
}

std::vector<double> real_list_param(const Scenario& s, const std::string& key, std::vector<double> fallback = {}) {
  const auto& p = s.params();
  if (!p.contains(key)) {
    if (!fallback.empty()) return fallback;
    throw SchemaError("$.params." + key, "missing field");
  }
  const auto& a = p.at(key);
  if (!a.is_array() || a.empty()) throw SchemaError("$.params." + key, "expected a nonempty array");
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw SchemaError("$.params." + key + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(a[i].get<double>());
  }
  return out;
}

std::vector<std::size_t> count_list_param(const Scenario& s, const std::string& key) {
  std::vector<std::size_t> out;
  for (double v : real_list_param(s, key)) {
    if (!(v >= 1.0) || v != std::floor(v)) throw SchemaError("$.params." + key, "expected positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::uint64_t seed_of(const Scenario& s, const Context& ctx) {
  if (ctx.seed) return *ctx.seed;
  if (!s.j.contains("seed")) return 0;
  if (!s.j.at("seed").is_number_unsigned()) throw SchemaError("$.seed", "expected a nonnegative integer");
  return s.j.at("seed").get<std::uint64_t>();
}

SolverConfig solver_of(const Scenario& s, const Context& ctx) {
  SolverConfig cfg = s.j.contains("solver") ? solver_from_json(s.j.at("solver"), "$.solver") : SolverConfig{};
  if (ctx.tol) cfg.tol = *ctx.tol;
  return cfg;
}

Scheme scheme_of(const Scenario& s) {
  if (!s.j.contains("scheme")) throw SchemaError("$.scheme", "missing field");
  const auto& j = s.j.at("scheme");
  if (!j.is_object()) throw SchemaError("$.scheme", "expected an object");
  const std::string kind = j.value("kind", "implicit");
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) throw SchemaError(std::string("$.scheme.") + key, "expected a number");
    return j.at(key).get<double>();
  };
  if (kind == "implicit") return Scheme::implicit(number("tau"));
  if (kind == "explicit") return Scheme::explicit_euler(number("tau"));
  if (kind == "exponential") {
    const double n = number("n");
    if (!(n >= 1.0) || n != std::floor(n)) throw SchemaError("$.scheme.n", "expected a positive integer");
    return Scheme::exponential(static_cast<std::size_t>(n));
  }
  throw SchemaError("$.scheme.kind", "unknown scheme '" + kind + "'");
}

EvolveOptions options_of(const Scenario& s, const Context& ctx) {
  EvolveOptions opts;
  opts.merge_eps = real_param(s, "merge_eps", 1e-9);
  opts.record_stride = static_cast<std::size_t>(real_param(s, "record_stride", 1.0));
  opts.solver = solver_of(s, ctx);
  return opts;
}

// Step size of the scheme over [0, T], used to scale residual bounds.
double effective_tau(const Scheme& scheme, double horizon) {
  if (scheme.kind == Scheme::Kind::Exponential) return horizon / static_cast<double>(scheme.n);
  return horizon / static_cast<double>(std::max<std::size_t>(step_count(horizon, scheme.tau), 1));
}

std::vector<Point> point_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a nonempty array of points");
  std::vector<Point> pts;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].empty()) throw SchemaError(p, "expected an array of numbers");
    Point x(static_cast<Eigen::Index>(j[i].size()));
    for (std::size_t c = 0; c < j[i].size(); ++c) {
      if (!j[i][c].is_number()) throw SchemaError(p, "expected an array of numbers");
      x(static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    pts.push_back(x);
  }
  return pts;
}

json points_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  return a;
}

// Random measure with uniform atoms in [-spread, spread]^d, for generated targets and pairs.
DiscreteMeasure random_measure(std::mt19937_64& rng, int dim, std::int64_t denominator, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  const auto atoms = std::uniform_int_distribution<std::int64_t>(1, denominator)(rng);
  std::vector<std::int64_t> mult(static_cast<std::size_t>(atoms), 1);
  for (std::int64_t extra = denominator - atoms; extra > 0; --extra)
    ++mult[std::uniform_int_distribution<std::size_t>(0, mult.size() - 1)(rng)];
  std::vector<Point> pts(static_cast<std::size_t>(atoms), Point(dim));
  for (auto& p : pts)
    for (int c = 0; c < dim; ++c) p(c) = u(rng);
  return DiscreteMeasure(std::move(pts), std::move(mult));
}

fs::path artifact(const Context& ctx, const std::string& name) {
  fs::create_directories(ctx.out);
  return fs::path(ctx.out) / name;
}

void write_text(const Context& ctx, const std::string& name, const std::string& text) {
  std::ofstream f(artifact(ctx, name), std::ios::binary);
  if (!f) throw Error("cannot write '" + artifact(ctx, name).string() + "'");
  f << text;
}

void write_json(const Context& ctx, const std::string& name, const json& j) {
  write_json_file(artifact(ctx, name).string(), j);
}

template <class Writer>
void write_csv(const Context& ctx, const std::string& name, Writer writer) {
  std::ostringstream os;
  writer(os);
  write_text(ctx, name, os.str());
}

int verdict(bool pass) {
  std::cout << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kPass : kFail;
}

// Closed-form flow for a field spec, when one is known.
ReferenceFlow reference_for(const Scenario& s, const DiscreteMeasure& mu0) {
  const json spec = s.j.contains("field") ? s.j.at("field") : json{{"kind", "pw"}, {"params", s.j.at("functional")}};
  const std::string kind = spec.value("kind", "");
  const json params = spec.value("params", json::object());
  const int d = mu0.dim();
  if (kind == "linear") {
    (void)field_from_json(spec, "$.field");  // validates the shape before reading A and b raw
    Eigen::MatrixXd m(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) m(r, c) = params.at("A").at(r).at(c).get<double>();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    if (params.contains("b"))
      for (int r = 0; r < d; ++r) b(r) = params.at("b").at(r).get<double>();
    return linear_reference(m, b, mu0);
  }
  if (kind == "barycentric") {
    Point v0 = Point::Zero(d);
    if (params.contains("v0"))
      for (int r = 0; r < d; ++r) v0(r) = params.at("v0").at(r).get<double>();
    return barycentric_reference(params.value("a", 1.0), v0, mu0);
  }
  if (kind == "zero") return [mu0](double) { return mu0; };
  if (kind == "pw") {
    const auto phi = functional_from_json(params, "$.field.params");
    auto coef = [](const Profile& p) -> std::optional<double> {
      if (p.kind() == ProfileKind::Zero) return 0.0;
      if (p.kind() == ProfileKind::Quadratic) return p.coef();
      return std::nullopt;
    };
    const auto ap = coef(phi.potential()), aw = coef(phi.interaction());
    if (ap && aw) return pw_quadratic_reference(*ap, *aw, mu0);
  }
  return {};
}

// -- subcommands ---------------------------------------------------------------

int cmd_w2(const Context& ctx, const std::string& a, const std::string& b) {
  const auto mu = measure_from_json(read_json_file(a));
  const auto nu = measure_from_json(read_json_file(b));
  const auto r = w2_exact(mu, nu);
  const bool tie = has_alternative_optimum(r.plan);
  std::cout << "W2 " << format_double(r.distance) << "\nW2^2 " << format_double(r.squared) << '\n';
  if (tie) std::cout << "note: the optimal plan is not unique\n";
  write_csv(ctx, "plan.csv", [&](std::ostream& os) { write_plan_csv(os, r.plan); });
  write_json(ctx, "w2.json", {{"distance", r.distance}, {"squared", r.squared}, {"plan_unique", !tie},
                              {"plan", coupling_to_json(r.plan)}});
  return kPass;
}

int cmd_winf(const Context& ctx, const std::string& a, const std::string& b) {
  const double d = w_infinity(measure_from_json(read_json_file(a)), measure_from_json(read_json_file(b)));
  std::cout << "Winf " << format_double(d) << '\n';
  write_json(ctx, "w_inf.json", {{"distance", d}});
  return kPass;
}

int cmd_decompose(const Context& ctx, const std::string& file, double tol) {
  const auto gamma = coupling_from_json(read_json_file(file));
  const auto dec = geodesic_decompose(gamma, tol);
  std::cout << "segments " << dec.segments() << "\nplan_cost " << format_double(dec.plan_cost) << '\n';
  for (std::size_t k = 0; k < dec.segments(); ++k)
    std::cout << "[" << format_double(dec.breakpoints[k]) << ", " << format_double(dec.breakpoints[k + 1])
              << "] speed " << format_double(dec.speeds[k]) << '\n';
  write_json(ctx, "decomposition.json", {{"segments", dec.segments()},
                                         {"breakpoints", dec.breakpoints},
                                         {"speeds", dec.speeds},
                                         {"plan_cost", dec.plan_cost},
                                         {"optimal_geodesic", dec.segments() == 1}});
  return kPass;
}

int cmd_simulate(const Context& ctx, const Scenario& s) {
  const auto f = scenario_field(s);
  const auto mu0 = scenario_measures(s, 1).front();
  const auto opts = options_of(s, ctx);
  const double horizon = real_param(s, "T");
  const auto flow = evolve(f, mu0, scheme_of(s), horizon, opts);
  const auto sticky = sticky_diagnostics(flow, f.lambda());

  write_csv(ctx, "flow.csv", [&](std::ostream& os) { write_flow_csv(os, flow); });
  auto diag = flow_diagnostics_json(flow);
  diag["sticky"] = {{"cardinality_nonincreasing", sticky.cardinality_nonincreasing},
                    {"diameter_bound_ok", sticky.diameter_bound_ok},
                    {"moment_bound_ok", sticky.moment_bound_ok}};
  write_json(ctx, "diagnostics.json", diag);
  write_json(ctx, "final.json", measure_to_json(flow.final_measure()));

  std::size_t card = flow.diagnostics.front().support_cardinality;
  std::cout << "t 0 support " << card << '\n';
  for (std::size_t k = 1; k < flow.size(); ++k)
    if (flow.diagnostics[k].support_cardinality != card) {
      card = flow.diagnostics[k].support_cardinality;
      std::cout << "t " << format_double(flow.times[k]) << " support " << card << '\n';
    }
  std::cout << "final t " << format_double(flow.times.back()) << " support " << card << '\n';
  if (s.params().value("check_sticky", false)) return verdict(sticky.all());
  return kPass;
}

int cmd_jko(const Context& ctx, const Scenario& s) {
  const auto phi = scenario_functional(s);
  const auto mu = scenario_measures(s, 1).front();
  const double tau = real_param(s, "tau");
  const auto out = jko_step(phi, mu, tau, solver_of(s, ctx), real_param(s, "merge_eps", 1e-9));
  const double obj = jko_objective(phi, mu, out, tau);
  std::cout << "objective " << format_double(obj) << "\natoms " << out.size() << '\n';
  write_json(ctx, "jko.json", {{"measure", measure_to_json(out)}, {"objective", obj}});
  return kPass;
}

int cmd_verify(const Context& ctx, const Scenario& s) {
  const auto f = scenario_field(s);
  const auto ms = scenario_measures(s, 2);
  const double lambda = real_param(s, "lambda", f.lambda());
  const std::string mode_name = s.params().value("mode", "exhaustive");
  DissipativityMode mode;
  if (mode_name == "sampled")
    mode = DissipativityMode::sampled(static_cast<std::size_t>(real_param(s, "samples", 200.0)), seed_of(s, ctx));
  else if (mode_name == "assignment")
    mode = DissipativityMode::assignment();
  else if (mode_name != "exhaustive")
    throw SchemaError("$.params.mode", "unknown mode '" + mode_name + "'");

  const auto rep = total_dissipativity_check(f, ms[0], ms[1], lambda, mode);
  std::cout << "worst_gap " << format_double(rep.worst_gap) << "\ncouplings " << rep.couplings_checked << '\n';
  json out = {{"pass", rep.pass}, {"worst_gap", rep.worst_gap}, {"lambda", lambda},
              {"couplings_checked", rep.couplings_checked}};
  if (rep.witness) {
    out["witness"] = coupling_to_json(*rep.witness);
    write_csv(ctx, "witness_plan.csv", [&](std::ostream& os) { write_plan_csv(os, *rep.witness); });
  }
  write_json(ctx, "verify.json", out);
  return verdict(rep.pass);
}

int cmd_evi(const Context& ctx, const Scenario& s) {
  const auto f = scenario_field(s);
  auto ms = scenario_measures(s, 1);
  const auto mu0 = ms.front();
  std::vector<DiscreteMeasure> targets(ms.begin() + 1, ms.end());
  std::mt19937_64 rng(seed_of(s, ctx));
  const auto generated = static_cast<int>(real_param(s, "random_targets", 0.0));
  for (int k = 0; k < generated; ++k)
    targets.push_back(random_measure(rng, mu0.dim(), std::uniform_int_distribution<std::int64_t>(1, 5)(rng), 2.0));
  if (targets.empty()) throw SchemaError("$.measures", "need target measures or params.random_targets");

  const auto scheme = scheme_of(s);
  const double horizon = real_param(s, "T");
  const auto opts = options_of(s, ctx);
  const auto flow = evolve(f, mu0, scheme, horizon, opts);
  const double tau = effective_tau(scheme, horizon);
  const double dt = tau * static_cast<double>(std::max<std::size_t>(opts.record_stride, 1));
  const double c = real_param(s, "bound_constant", 5.0);
  const double lambda = real_param(s, "lambda", f.lambda());
  const double m0 = measure_stats(mu0).second_moment;

  bool pass = true;
  int ties = 0;
  double worst = -INFINITY;
  std::ostringstream csv;
  csv << "target,t,residual,tie\n";
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto rep = evi_residual(flow, f, lambda, targets[i]);
    for (std::size_t k = 0; k < rep.times.size(); ++k)
      csv << i << ',' << format_double(rep.times[k]) << ',' << format_double(rep.residuals[k]) << ','
          << (rep.tie[k] ? 1 : 0) << '\n';
    if (rep.any_tie) ++ties;
    const double bound = c * (tau + dt * dt) * (1.0 + measure_stats(targets[i]).second_moment + m0);
    const double r = rep.max_residual(true);
    worst = std::max(worst, r / bound);
    pass = pass && r <= bound;
  }
  write_text(ctx, "evi.csv", csv.str());
  std::cout << "targets " << targets.size() << "\nworst residual/bound " << format_double(worst) << '\n';
  if (ties > 0) std::cout << "warning: " << ties << " target(s) had tied optimal plans; tied samples skipped\n";
  return verdict(pass);
}

int cmd_contraction(const Context& ctx, const Scenario& s) {
  const auto f = scenario_field(s);
  const auto scheme = scheme_of(s);
  const auto times = real_list_param(s, "times");
  const double lambda = real_param(s, "lambda", f.lambda());
  const double slack = real_param(s, "slack", 1e-9);
  const auto opts = options_of(s, ctx);

  std::vector<std::pair<DiscreteMeasure, DiscreteMeasure>> pairs;
  if (s.j.contains("measures")) {
    const auto ms = scenario_measures(s, 2);
    pairs.emplace_back(ms[0], ms[1]);
  }
  std::mt19937_64 rng(seed_of(s, ctx));
  const auto generated = static_cast<int>(real_param(s, "random_pairs", 0.0));
  const int dim = static_cast<int>(real_param(s, "dim", 2.0));
  for (int k = 0; k < generated; ++k) {
    const auto n = std::uniform_int_distribution<std::int64_t>(1, 6)(rng);
    pairs.emplace_back(random_measure(rng, dim, n, 2.0), random_measure(rng, dim, n, 2.0));
  }
  if (pairs.empty()) throw SchemaError("$.measures", "need two measures or params.random_pairs");

  bool pass = true;
  double worst = 0.0;
  std::ostringstream csv;
  csv << "pair,t,ratio\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto rep = contraction_check(f, pairs[i].first, pairs[i].second, lambda, times, scheme, slack, opts);
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
      csv << i << ',' << format_double(rep.times[k]) << ',' << format_double(rep.ratios[k]) << '\n';
      worst = std::max(worst, rep.ratios[k]);
    }
    pass = pass && rep.pass;
  }
  write_text(ctx, "contraction.csv", csv.str());
  std::cout << "pairs " << pairs.size() << "\nworst ratio " << format_double(worst) << '\n';
  return verdict(pass);
}

int cmd_euler_study(const Context& ctx, const Scenario& s) {
  const auto f = scenario_field(s);
  const auto mu0 = scenario_measures(s, 1).front();
  const double t = real_param(s, "t", 1.0);
  const auto ns = count_list_param(s, "n");
  const std::string ref = s.params().value("reference", "closed_form");
  ReferenceFlow reference;
  if (ref == "closed_form") {
    reference = reference_for(s, mu0);
    if (!reference) std::cout << "note: no closed form for this field; using a fine implicit run\n";
  } else if (ref != "fine") {
    throw SchemaError("$.params.reference", "expected \"closed_form\" or \"fine\"");
  }
  const auto study = implicit_error_study(f, mu0, t, ns, reference, options_of(s, ctx));
  write_csv(ctx, "error_study.csv", [&](std::ostream& os) { write_error_study_csv(os, study); });
  for (const auto& r : study.rows)
    std::cout << "n " << r.n << " error " << format_double(r.error) << " bound " << format_double(r.bound) << '\n';
  return verdict(study.pass);
}

int cmd_meanfield(const Context& ctx, const Scenario& s) {
  const auto f = scenario_field(s);
  const auto mu0 = scenario_measures(s, 1).front();
  const auto ns = count_list_param(s, "N");
  const auto count = static_cast<std::uint64_t>(real_param(s, "seeds", 10.0));
  const std::uint64_t base = seed_of(s, ctx);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < count; ++k) seeds.push_back(base + k);
  const auto study =
      mean_field_study(f, mu0, atom_jitter_sampler(mu0, real_param(s, "jitter", 0.1)), ns, seeds,
                       real_param(s, "t", 1.0), real_param(s, "lambda", f.lambda()), scheme_of(s),
                       real_param(s, "slack", 1e-6), options_of(s, ctx));
  write_csv(ctx, "meanfield.csv", [&](std::ostream& os) { write_mean_field_csv(os, study); });
  double worst = -INFINITY;
  for (const auto& r : study.rows) worst = std::max(worst, r.final_error - r.bound);
  std::cout << "runs " << study.rows.size() << "\nmax(final - bound) " << format_double(worst) << '\n';
  return verdict(study.pass);
}

int cmd_perturb(const Context& ctx, const Scenario& s) {
  const auto& p = s.params();
  if (!p.contains("A")) throw SchemaError("$.params.A", "missing field");
  if (!p.contains("B")) throw SchemaError("$.params.B", "missing field");
  const auto a = point_list(p.at("A"), "$.params.A");
  const auto b = point_list(p.at("B"), "$.params.B");
  const double radius = real_param(s, "radius", 1e-3);
  const bool aligned = check_chords_alignment(a, b).aligned;
  std::vector<Point> bp;
  try {
    bp = perturb_for_injectivity(a, b, radius, seed_of(s, ctx));
  } catch (const DomainError&) {
    throw;
  } catch (const Error& e) {
    std::cout << e.what() << '\n';
    return verdict(false);
  }
  const bool ok = injective_family_ok(a, b, bp);
  write_json(ctx, "perturbed.json", {{"B", points_json(bp)}, {"aligned_before", aligned}, {"family_ok", ok}});
  std::cout << "aligned before " << (aligned ? "yes" : "no") << "\nfamily verified " << (ok ? "yes" : "no") << '\n';
  return verdict(ok);
}

int cmd_yosida(const Context& ctx, const Scenario& s) {
  const LagrangianOperator b(scenario_field(s));
  const auto& p = s.params();
  if (!p.contains("X")) throw SchemaError("$.params.X", "missing field");
  const auto pts = point_list(p.at("X"), "$.params.X");
  const auto x = LagrangianVector::from_points(pts);
  const auto taus = real_list_param(s, "taus");
  const auto est = minimal_selection_estimate(b, x, taus, solver_of(s, ctx));
  std::ostringstream csv;
  csv << "tau,weighted_norm\n";
  for (std::size_t i = 0; i < taus.size(); ++i)
    csv << format_double(taus[i]) << ',' << format_double(est.norms[i]) << '\n';
  write_text(ctx, "yosida.csv", csv.str());
  std::cout << "limit estimate " << format_double(est.norms.back()) << '\n';
  return verdict(est.nondecreasing);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wflow: Wasserstein flows of dissipative probability vector fields"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  app.add_option("--out", ctx.out, "Output directory for artifacts");
  app.add_option("--seed", ctx.seed, "Seed overriding the scenario seed");
  app.add_option("--tol", ctx.tol, "Solver tolerance overriding the scenario");

  int code = kPass;
  std::string a, b, file;
  double seg_tol = 1e-7;
  std::vector<std::size_t> criteria;

  auto* w2 = app.add_subcommand("w2", "Exact W2 distance and optimal plan between two measure files");
  w2->add_option("a", a, "First measure (JSON)")->required();
  w2->add_option("b", b, "Second measure (JSON)")->required();
  w2->callback([&] { code = cmd_w2(ctx, a, b); });

  auto* winf = app.add_subcommand("w-inf", "Exact W-infinity distance between two measure files");
  winf->add_option("a", a, "First measure (JSON)")->required();
  winf->add_option("b", b, "Second measure (JSON)")->required();
  winf->callback([&] { code = cmd_winf(ctx, a, b); });

  auto* dec = app.add_subcommand("decompose", "Split the interpolation of a coupling into geodesic pieces");
  dec->add_option("coupling", file, "Coupling (JSON)")->required();
  dec->add_option("--segment-tol", seg_tol, "Relative tolerance of the constant-speed test");
  dec->callback([&] { code = cmd_decompose(ctx, file, seg_tol); });

  auto* acc = app.add_subcommand("acceptance", "Run acceptance criteria (all, or the numbers given)");
  acc->add_option("criteria", criteria, "Criterion numbers");
  acc->callback([&] {
    code = acceptance::run(std::set<std::size_t>(criteria.begin(), criteria.end()), stdout) == 0 ? kPass : kFail;
  });

  const std::vector<std::pair<const char*, std::pair<const char*, int (*)(const Context&, const Scenario&)>>>
      scenario_cmds{
          {"simulate", {"Evolve a measure and write the trajectory", cmd_simulate}},
          {"jko", {"One minimizing-movement step", cmd_jko}},
          {"verify", {"Total dissipativity check between two measures", cmd_verify}},
          {"evi", {"EVI residuals along a flow", cmd_evi}},
          {"contraction", {"Contraction ratios of the flow", cmd_contraction}},
          {"euler-study", {"Implicit Euler error against a reference flow", cmd_euler_study}},
          {"meanfield", {"Mean-field transfer of initial errors", cmd_meanfield}},
          {"perturb", {"Perturb a point set to make the chord family injective", cmd_perturb}},
          {"yosida", {"Yosida approximations of the minimal selection", cmd_yosida}},
      };
  for (const auto& [name, info] : scenario_cmds) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->add_option("scenario", file, "Scenario (JSON)")->required();
    auto fn = info.second;
    sub->callback([&, fn] { code = fn(ctx, load_scenario(file)); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kError;
  } catch (const SchemaError& e) {
    std::cerr << "wflow: schema error at " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "wflow: " << e.what() << '\n';
    return kError;
  }
  return code;
}
