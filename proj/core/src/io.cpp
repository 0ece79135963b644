#include "wflow/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <ostream>

namespace wflow {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key, "missing field");
  return *it;
}

double as_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<std::int64_t>();
}

double real_or(const json& j, const std::string& key, double fallback, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_real(j.at(key), path + "." + key);
}

Point as_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a nonempty array of numbers");
  Point p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    p(static_cast<Eigen::Index>(i)) = as_real(j[i], path + "[" + std::to_string(i) + "]");
  return p;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    const Point row = as_point(j[static_cast<std::size_t>(r)], rp);
    if (r == 0) m.resize(rows, row.size());
    if (row.size() != m.cols()) throw SchemaError(rp, "ragged matrix");
    m.row(r) = row.transpose();
  }
  return m;
}

json point_json(const Point& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p(i));
  return a;
}

struct RawMeasure {
  std::vector<Point> atoms;
  std::vector<std::int64_t> mults;
};

RawMeasure raw_measure(const json& j, const std::string& path) {
  const auto dim = as_int(require(j, "dim", path), path + ".dim");
  if (dim < 1) throw SchemaError(path + ".dim", "must be positive");
  const auto& atoms = require(j, "atoms", path);
  if (!atoms.is_array() || atoms.empty()) throw SchemaError(path + ".atoms", "expected a nonempty array");
  RawMeasure raw;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const std::string ap = path + ".atoms[" + std::to_string(i) + "]";
    Point x = as_point(require(atoms[i], "x", ap), ap + ".x");
    if (x.size() != dim) throw SchemaError(ap + ".x", "dimension differs from dim");
    if (!x.allFinite()) throw SchemaError(ap + ".x", "non-finite coordinate");
    const auto k = as_int(require(atoms[i], "mult", ap), ap + ".mult");
    if (k <= 0) throw SchemaError(ap + ".mult", "must be positive");
    for (std::size_t prev = 0; prev < raw.atoms.size(); ++prev)
      if (raw.atoms[prev] == x) throw SchemaError(ap + ".x", "duplicate atom");
    raw.atoms.push_back(std::move(x));
    raw.mults.push_back(k);
    total += k;
  }
  if (j.contains("denominator")) {
    const auto n = as_int(j.at("denominator"), path + ".denominator");
    if (n != total) throw SchemaError(path + ".denominator", "must equal the sum of multiplicities");
  }
  return raw;
}

}  // namespace

json measure_to_json(const DiscreteMeasure& mu) {
  json atoms = json::array();
  for (std::size_t i = 0; i < mu.size(); ++i)
    atoms.push_back({{"x", point_json(mu.atom(i))}, {"mult", mu.multiplicity(i)}});
  return {{"dim", mu.dim()}, {"denominator", mu.denominator()}, {"atoms", atoms}};
}

DiscreteMeasure measure_from_json(const json& j, const std::string& path) {
  auto raw = raw_measure(j, path);
  return DiscreteMeasure(std::move(raw.atoms), std::move(raw.mults));
}

json coupling_to_json(const Coupling& gamma) {
  json mass = json::array();
  for (Eigen::Index i = 0; i < gamma.mass().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < gamma.mass().cols(); ++k) row.push_back(gamma.mass()(i, k));
    mass.push_back(row);
  }
  return {{"source", measure_to_json(gamma.source())}, {"target", measure_to_json(gamma.target())}, {"mass", mass}};
}

Coupling coupling_from_json(const json& j, const std::string& path) {
  const auto src_raw = raw_measure(require(j, "source", path), path + ".source");
  const auto tgt_raw = raw_measure(require(j, "target", path), path + ".target");
  const DiscreteMeasure src(src_raw.atoms, src_raw.mults);
  const DiscreteMeasure tgt(tgt_raw.atoms, tgt_raw.mults);
  // mass rows/columns follow the file order; map them to canonical order
  auto index_of = [](const DiscreteMeasure& mu, const Point& x) {
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (mu.atom(i) == x) return i;
    return mu.size();
  };
  const auto& mass = require(j, "mass", path);
  const std::string mp = path + ".mass";
  if (!mass.is_array() || mass.size() != src_raw.atoms.size())
    throw SchemaError(mp, "expected one row per source atom");
  Coupling::MassMatrix m = Coupling::MassMatrix::Zero(static_cast<Eigen::Index>(src.size()),
                                                      static_cast<Eigen::Index>(tgt.size()));
  for (std::size_t r = 0; r < mass.size(); ++r) {
    const std::string rp = mp + "[" + std::to_string(r) + "]";
    if (!mass[r].is_array() || mass[r].size() != tgt_raw.atoms.size())
      throw SchemaError(rp, "expected one entry per target atom");
    const auto i = index_of(src, src_raw.atoms[r]);
    for (std::size_t c = 0; c < mass[r].size(); ++c) {
      const auto v = as_int(mass[r][c], rp + "[" + std::to_string(c) + "]");
      if (v < 0) throw SchemaError(rp + "[" + std::to_string(c) + "]", "negative mass");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(index_of(tgt, tgt_raw.atoms[c]))) = v;
    }
  }
  try {
    return Coupling(src, tgt, std::move(m));
  } catch (const DomainError& e) {
    throw SchemaError(mp, e.what());
  }
}

namespace {

Profile profile_from_json(const json& j, const std::string& path) {
  if (j.is_null()) return Profile::zero();
  if (j.is_string()) return Profile::parse(j.get<std::string>(), 1.0);
  if (!j.is_object()) throw SchemaError(path, "expected a profile object");
  const auto& kind = require(j, "kind", path);
  if (!kind.is_string()) throw SchemaError(path + ".kind", "expected a string");
  try {
    return Profile::parse(kind.get<std::string>(), real_or(j, "coef", 1.0, path));
  } catch (const SchemaError&) {
    throw;
  } catch (const DomainError& e) {
    throw SchemaError(path, e.what());
  }
}

}  // namespace

Functional functional_from_json(const json& j, const std::string& path) {
  const json& p = j.is_object() && j.contains("params") ? j.at("params") : j;
  const std::string pp = j.is_object() && j.contains("params") ? path + ".params" : path;
  if (!p.is_object()) throw SchemaError(pp, "expected an object");
  const Profile pot = profile_from_json(p.contains("P") ? p.at("P") : json(), pp + ".P");
  const Profile inter = profile_from_json(p.contains("W") ? p.at("W") : json(), pp + ".W");
  return Functional(pot, inter);
}

VelocityField field_from_json(const json& j, const std::string& path) {
  const auto& kind_j = require(j, "kind", path);
  if (!kind_j.is_string()) throw SchemaError(path + ".kind", "expected a string");
  const std::string kind = kind_j.get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  const std::string pp = path + ".params";
  if (!params.is_object()) throw SchemaError(pp, "expected an object");

  auto build = [&]() -> VelocityField {
    if (kind == "linear") {
      const Eigen::MatrixXd a = as_matrix(require(params, "A", pp), pp + ".A");
      if (a.rows() != a.cols()) throw SchemaError(pp + ".A", "must be square");
      Eigen::VectorXd b = Eigen::VectorXd::Zero(a.rows());
      if (params.contains("b")) {
        b = as_point(params.at("b"), pp + ".b");
        if (b.size() != a.rows()) throw SchemaError(pp + ".b", "length differs from A");
      }
      return linear_field(a, b);
    }
    if (kind == "barycentric") {
      const double a = real_or(params, "a", 1.0, pp);
      if (!(a > 0.0)) throw SchemaError(pp + ".a", "must be positive");
      if (params.contains("v0")) return barycentric_field(a, as_point(params.at("v0"), pp + ".v0"));
      return barycentric_field(a);
    }
    if (kind == "pw") return functional_from_json(params, pp).subgradient_field();
    if (kind == "lipschitz") {
      const double l = real_or(params, "L", 1.0, pp);
      if (!(l >= 0.0)) throw SchemaError(pp + ".L", "must be nonnegative");
      return lipschitz_example_field(l);
    }
    if (kind == "constant") return constant_field(as_point(require(params, "v", pp), pp + ".v"));
    if (kind == "zero") return zero_field();
    if (kind == "superposition") {
      const auto& comps = require(params, "components", pp);
      if (!comps.is_array() || comps.empty()) throw SchemaError(pp + ".components", "expected a nonempty array");
      SuperpositionField sf;
      for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string cp = pp + ".components[" + std::to_string(i) + "]";
        const double w = as_real(require(comps[i], "weight", cp), cp + ".weight");
        sf.components.emplace_back(w, field_from_json(require(comps[i], "field", cp), cp + ".field"));
      }
      try {
        return barycentric_projection(sf);
      } catch (const DomainError& e) {
        throw SchemaError(pp + ".components", e.what());
      }
    }
    throw SchemaError(path + ".kind", "unknown field kind '" + kind + "'");
  };
  VelocityField f = build();
  if (j.contains("lambda")) f = f.with_claims(as_real(j.at("lambda"), path + ".lambda"), f.lip());
  return f;
}

SolverConfig solver_from_json(const json& j, const std::string& path) {
  SolverConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  cfg.tol = real_or(j, "tol", cfg.tol, path);
  if (!(cfg.tol > 0.0)) throw SchemaError(path + ".tol", "must be positive");
  if (j.contains("max_iter")) {
    const auto m = as_int(j.at("max_iter"), path + ".max_iter");
    if (m < 1) throw SchemaError(path + ".max_iter", "must be positive");
    cfg.max_iter = static_cast<int>(std::min<std::int64_t>(m, 1'000'000'000));
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    if (!s.is_string()) throw SchemaError(path + ".solver", "expected a string");
    const auto name = s.get<std::string>();
    using M = SolverConfig::Method;
    if (name == "auto") cfg.method = M::Auto;
    else if (name == "fixed_point") cfg.method = M::FixedPoint;
    else if (name == "prox") cfg.method = M::Prox;
    else if (name == "newton") cfg.method = M::Newton;
    else throw SchemaError(path + ".solver", "unknown solver '" + name + "'");
  }
  return cfg;
}

json solver_to_json(const SolverConfig& cfg) {
  static constexpr const char* names[] = {"auto", "fixed_point", "prox", "newton"};
  return {{"tol", cfg.tol}, {"max_iter", cfg.max_iter}, {"solver", names[static_cast<int>(cfg.method)]}};
}

json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open '" + file + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(file, std::string("invalid JSON: ") + e.what());
  }
}

void write_json_file(const std::string& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write '" + file + "'");
  out << j.dump(2) << '\n';
}

void write_flow_csv(std::ostream& os, const FlowResult& flow) {
  const int d = flow.lagrangian.empty() ? 0 : flow.lagrangian.front().dim();
  os << "t,particle_index";
  for (int c = 1; c <= d; ++c) os << ",x_" << c;
  os << '\n';
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const auto& m = flow.lagrangian[k].matrix();
    const std::string t = format_double(flow.times[k]);
    for (Eigen::Index n = 0; n < m.rows(); ++n) {
      os << t << ',' << n;
      for (Eigen::Index c = 0; c < m.cols(); ++c) os << ',' << format_double(m(n, c));
      os << '\n';
    }
  }
}

json flow_diagnostics_json(const FlowResult& flow) {
  json rows = json::array();
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const auto& d = flow.diagnostics[k];
    rows.push_back({{"t", flow.times[k]},
                    {"support_cardinality", d.support_cardinality},
                    {"diameter", d.diameter},
                    {"second_moment", d.second_moment},
                    {"field_norm", d.field_norm}});
  }
  return {{"diagnostics", rows}};
}

void write_plan_csv(std::ostream& os, const Coupling& gamma) {
  os << "i,j,mass,weight\n";
  for (const auto& e : gamma.support())
    os << e.i << ',' << e.j << ',' << e.mass << ','
       << format_double(static_cast<double>(e.mass) / static_cast<double>(gamma.denominator())) << '\n';
}

void write_error_study_csv(std::ostream& os, const ErrorStudy& study) {
  os << "n,error,bound,pass\n";
  for (const auto& r : study.rows)
    os << r.n << ',' << format_double(r.error) << ',' << format_double(r.bound) << ',' << (r.pass ? 1 : 0) << '\n';
}

void write_mean_field_csv(std::ostream& os, const MeanFieldStudy& study) {
  os << "N,seed,initial_error,final_error,bound,pass\n";
  for (const auto& r : study.rows)
    os << r.n << ',' << r.seed << ',' << format_double(r.initial_error) << ',' << format_double(r.final_error) << ','
       << format_double(r.bound) << ',' << (r.pass ? 1 : 0) << '\n';
}

}  // namespace wflow
