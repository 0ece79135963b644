#include "wflow/fields.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "wflow/error.hpp"

namespace wflow {

VelocityField::VelocityField(std::string name, PointEval eval, double lambda, std::optional<double> lip)
    : name_(std::move(name)), eval_(std::move(eval)), lambda_(lambda), lip_(lip) {
  if (!eval_) throw DomainError("VelocityField: empty evaluation function");
  if (lip_ && *lip_ < 0.0) throw DomainError("VelocityField: negative Lipschitz constant");
}

Point VelocityField::operator()(const Point& x, const DiscreteMeasure& mu) const {
  if (x.size() != mu.dim()) throw DomainError("VelocityField: point and measure dimensions differ");
  Point v = eval_(x, mu);
  if (v.size() != x.size()) throw DomainError("VelocityField '" + name_ + "': wrong output dimension");
  if (!v.allFinite()) throw DomainError("VelocityField '" + name_ + "': non-finite velocity");
  return v;
}

Eigen::MatrixXd VelocityField::apply_particles(const Eigen::MatrixXd& x) const {
  if (particle_eval_) return particle_eval_(x);
  const LagrangianVector lv(x);
  const DiscreteMeasure mu = iota_project(lv, 0.0);
  Eigen::MatrixXd v(x.rows(), x.cols());
  for (Eigen::Index n = 0; n < x.rows(); ++n) v.row(n) = (*this)(x.row(n).transpose(), mu).transpose();
  return v;
}

VelocityField VelocityField::with_particle_eval(ParticleEval fast) const {
  VelocityField out = *this;
  out.particle_eval_ = std::move(fast);
  return out;
}

VelocityField VelocityField::with_functional(std::shared_ptr<const Functional> phi) const {
  VelocityField out = *this;
  out.functional_ = std::move(phi);
  return out;
}

VelocityField VelocityField::with_claims(double lambda, std::optional<double> lip) const {
  VelocityField out = *this;
  out.lambda_ = lambda;
  out.lip_ = lip;
  return out;
}

// ---------------------------------------------------------------------------

VelocityField linear_field(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw DomainError("linear_field: A must be d x d and b in R^d");
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  const double lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().maxCoeff();
  const double lip = a.size() == 0 ? 0.0 : Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  auto eval = [a, b](const Point& x, const DiscreteMeasure&) -> Point { return a * x + b; };
  auto fast = [a, b](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return (x * a.transpose()).rowwise() + b.transpose();
  };
  return VelocityField("linear", eval, lambda, lip).with_particle_eval(fast);
}

VelocityField linear_field(const Eigen::MatrixXd& a) {
  return linear_field(a, Eigen::VectorXd::Zero(a.rows()));
}

VelocityField constant_field(const Point& v0) {
  auto eval = [v0](const Point& x, const DiscreteMeasure&) -> Point {
    if (x.size() != v0.size()) throw DomainError("constant_field: dimension mismatch");
    return v0;
  };
  return VelocityField("constant", eval, 0.0, 0.0);
}

VelocityField zero_field() {
  auto eval = [](const Point& x, const DiscreteMeasure&) -> Point { return Point::Zero(x.size()); };
  auto fast = [](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(x.rows(), x.cols()); };
  return VelocityField("zero", eval, 0.0, 0.0).with_particle_eval(fast);
}

VelocityField barycentric_field(double a, const Point& v0) {
  if (!(a > 0.0)) throw DomainError("barycentric_field: a must be positive");
  auto eval = [a, v0](const Point& x, const DiscreteMeasure& mu) -> Point {
    Point mean = Point::Zero(x.size());
    for (std::size_t i = 0; i < mu.size(); ++i) mean += mu.weight(i) * mu.atom(i);
    Point v = a * (mean - x);
    if (v0.size() == x.size()) v += v0;
    else if (v0.size() != 0) throw DomainError("barycentric_field: v0 dimension mismatch");
    return v;
  };
  auto fast = [a, v0](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd v = a * ((-x).rowwise() + mean);
    if (v0.size() == x.cols()) v.rowwise() += v0.transpose();
    else if (v0.size() != 0) throw DomainError("barycentric_field: v0 dimension mismatch");
    return v;
  };
  return VelocityField("barycentric", eval, 0.0, a).with_particle_eval(fast);
}

VelocityField barycentric_field(double a) { return barycentric_field(a, Point()); }

VelocityField lipschitz_example_field(double lip_l) {
  if (!(lip_l > 0.0)) throw DomainError("lipschitz_example_field: L must be positive");
  auto eval = [lip_l](const Point& x, const DiscreteMeasure& mu) -> Point {
    Point mean = Point::Zero(x.size());
    for (std::size_t i = 0; i < mu.size(); ++i) mean += mu.weight(i) * mu.atom(i);
    return lip_l * (x.array().sin() + mean.reverse().array().cos()).matrix();
  };
  return VelocityField("lipschitz", eval, 2.0 * lip_l, 2.0 * lip_l);
}

VelocityField barycentric_projection(const SuperpositionField& superposition) {
  const auto& comps = superposition.components;
  if (comps.empty()) throw DomainError("barycentric_projection: no components");
  double total = 0.0, lambda = 0.0, lip = 0.0;
  bool lip_known = true;
  for (const auto& [w, f] : comps) {
    if (!(w > 0.0)) throw DomainError("barycentric_projection: weights must be positive");
    total += w;
    lambda += w * f.lambda();
    if (f.lip()) lip += w * *f.lip();
    else lip_known = false;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("barycentric_projection: weights must sum to 1");
  auto eval = [comps](const Point& x, const DiscreteMeasure& mu) -> Point {
    Point g = Point::Zero(x.size());
    for (const auto& [w, f] : comps) g += w * f(x, mu);
    return g;
  };
  auto fast = [comps](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    for (const auto& [w, f] : comps) g += w * f.apply_particles(x);
    return g;
  };
  return VelocityField("superposition", eval, lambda, lip_known ? std::optional<double>(lip) : std::nullopt)
      .with_particle_eval(fast);
}

VelocityField lambda_transform(const VelocityField& f, double lambda) {
  if (lambda == 0.0) return f;
  auto eval = [f, lambda](const Point& x, const DiscreteMeasure& mu) -> Point { return f(x, mu) - lambda * x; };
  auto fast = [f, lambda](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return f.apply_particles(x) - lambda * x; };
  std::optional<double> lip;
  if (f.lip()) lip = *f.lip() + std::abs(lambda);
  return VelocityField(f.name() + "-lambda", eval, f.lambda() - lambda, lip).with_particle_eval(fast);
}

FieldEvaluation eval_on_measure(const VelocityField& f, const DiscreteMeasure& mu) {
  FieldEvaluation out;
  double sq = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    out.velocities.push_back(f(mu.atom(i), mu));
    sq += mu.weight(i) * out.velocities.back().squaredNorm();
  }
  out.l2_norm = std::sqrt(sq);
  return out;
}

}  // namespace wflow
