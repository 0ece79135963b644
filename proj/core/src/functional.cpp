#include "wflow/functional.hpp"

#include <cmath>
#include <memory>

#include "wflow/error.hpp"
#include "wflow/transport.hpp"

namespace wflow {

Profile::Profile(ProfileKind kind, double coef) : kind_(kind), coef_(coef) {
  if (!std::isfinite(coef)) throw DomainError("Profile: non-finite coefficient");
  if ((kind == ProfileKind::Abs || kind == ProfileKind::Quartic) && coef < 0.0)
    throw DomainError("Profile: abs and quartic profiles need a nonnegative coefficient");
  if (kind == ProfileKind::Zero) coef_ = 0.0;
}

Profile Profile::parse(const std::string& kind, double coef) {
  if (kind == "zero" || kind == "none") return {};
  if (kind == "quadratic") return quadratic(coef);
  if (kind == "abs") return abs(coef);
  if (kind == "quartic") return quartic(coef);
  throw DomainError("Profile: unknown kind '" + kind + "'");
}

std::string Profile::kind_name() const {
  switch (kind_) {
    case ProfileKind::Zero: return "zero";
    case ProfileKind::Quadratic: return "quadratic";
    case ProfileKind::Abs: return "abs";
    case ProfileKind::Quartic: return "quartic";
  }
  return "zero";
}

double Profile::value(const Point& z) const {
  switch (kind_) {
    case ProfileKind::Zero: return 0.0;
    case ProfileKind::Quadratic: return 0.5 * coef_ * z.squaredNorm();
    case ProfileKind::Abs: return coef_ * z.norm();
    case ProfileKind::Quartic: {
      const double r2 = z.squaredNorm();
      return 0.25 * coef_ * r2 * r2;
    }
  }
  return 0.0;
}

Point Profile::gradient(const Point& z) const {
  switch (kind_) {
    case ProfileKind::Zero: return Point::Zero(z.size());
    case ProfileKind::Quadratic: return coef_ * z;
    case ProfileKind::Abs: {
      const double r = z.norm();
      return r > 0.0 ? Point(coef_ / r * z) : Point(Point::Zero(z.size()));
    }
    case ProfileKind::Quartic: return coef_ * z.squaredNorm() * z;
  }
  return Point::Zero(z.size());
}

Eigen::MatrixXd Profile::hessian(const Point& z) const {
  const auto d = z.size();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  switch (kind_) {
    case ProfileKind::Zero: return Eigen::MatrixXd::Zero(d, d);
    case ProfileKind::Quadratic: return coef_ * id;
    case ProfileKind::Abs: {
      const double r = z.norm();
      if (r == 0.0) return Eigen::MatrixXd::Zero(d, d);
      return coef_ * (id / r - z * z.transpose() / (r * r * r));
    }
    case ProfileKind::Quartic: return coef_ * (z.squaredNorm() * id + 2.0 * z * z.transpose());
  }
  return Eigen::MatrixXd::Zero(d, d);
}

double Profile::lambda() const noexcept {
  return kind_ == ProfileKind::Quadratic && coef_ < 0.0 ? -coef_ : 0.0;
}

// ---------------------------------------------------------------------------

Functional::Functional(Profile potential, Profile interaction)
    : potential_(potential), interaction_(interaction) {}

double Functional::value(const DiscreteMeasure& mu) const {
  double v = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) v += mu.weight(i) * potential_.value(mu.atom(i));
  double w = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < mu.size(); ++j)
      w += mu.weight(i) * mu.weight(j) * interaction_.value(mu.atom(i) - mu.atom(j));
  return v + 0.5 * w;
}

std::vector<Point> Functional::field_on(const DiscreteMeasure& mu) const {
  std::vector<Point> out;
  out.reserve(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    Point v = -potential_.gradient(mu.atom(i));
    for (std::size_t j = 0; j < mu.size(); ++j)
      if (j != i) v -= mu.weight(j) * interaction_.gradient(mu.atom(i) - mu.atom(j));
    out.push_back(std::move(v));
  }
  return out;
}

double Functional::lifted_value(const LagrangianVector& x) const { return value(iota_project(x, 0.0)); }

double Functional::particle_value(const Eigen::MatrixXd& x) const {
  const auto n = x.rows();
  double v = 0.0, w = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    v += potential_.value(x.row(a).transpose());
    if (interaction_.kind() == ProfileKind::Zero) continue;
    for (Eigen::Index b = a + 1; b < n; ++b) w += interaction_.value((x.row(a) - x.row(b)).transpose());
  }
  const double nn = static_cast<double>(n);
  return v / nn + w / (nn * nn);
}

Eigen::MatrixXd Functional::particle_field(const Eigen::MatrixXd& x) const {
  const auto n = x.rows();
  Eigen::MatrixXd v(n, x.cols());
  for (Eigen::Index a = 0; a < n; ++a) v.row(a) = -potential_.gradient(x.row(a).transpose()).transpose();
  if (interaction_.kind() != ProfileKind::Zero) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a + 1; b < n; ++b) {
        const Point g = inv_n * interaction_.gradient((x.row(a) - x.row(b)).transpose());
        v.row(a) -= g.transpose();
        v.row(b) += g.transpose();
      }
  }
  return v;
}

VelocityField Functional::subgradient_field() const {
  auto self = std::make_shared<const Functional>(*this);
  auto eval = [self](const Point& x, const DiscreteMeasure& mu) -> Point {
    Point v = -self->potential().gradient(x);
    for (std::size_t j = 0; j < mu.size(); ++j) v -= mu.weight(j) * self->interaction().gradient(x - mu.atom(j));
    return v;
  };
  auto fast = [self](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return self->particle_field(x); };
  const std::string name = "pw(" + potential_.kind_name() + "," + interaction_.kind_name() + ")";
  return VelocityField(name, eval, lambda_conv(), lipschitz()).with_particle_eval(fast).with_functional(self);
}

double Functional::lambda_conv() const noexcept { return potential_.lambda() + interaction_.lambda(); }

std::optional<double> Functional::lipschitz() const noexcept {
  auto lip = [](const Profile& p) -> std::optional<double> {
    switch (p.kind()) {
      case ProfileKind::Zero: return 0.0;
      case ProfileKind::Quadratic: return std::abs(p.coef());
      default: return p.coef() == 0.0 ? std::optional<double>(0.0) : std::nullopt;
    }
  };
  const auto a = lip(potential_), b = lip(interaction_);
  if (!a || !b) return std::nullopt;
  return *a + *b;
}

FunctionalEvaluation functional_value_and_field(const Functional& phi, const DiscreteMeasure& mu) {
  return {phi.value(mu), phi.field_on(mu)};
}

double jko_objective(const Functional& phi, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tau) {
  if (!(tau > 0.0)) throw DomainError("jko_objective: tau must be positive");
  return w2_exact(mu, nu).squared / (2.0 * tau) + phi.value(nu);
}

}  // namespace wflow
