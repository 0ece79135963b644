#pragma once

// JSON and CSV formats. Numbers are printed with std::to_chars (shortest
// round-trip, '.' decimal separator, locale independent) so equal inputs give
// byte-identical files.

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "wflow/error.hpp"
#include "wflow/fields.hpp"
#include "wflow/flows.hpp"
#include "wflow/functional.hpp"
#include "wflow/measures.hpp"
#include "wflow/operators.hpp"
#include "wflow/transport.hpp"

namespace wflow {

using json = nlohmann::json;

/// Malformed input; `path()` locates the offending field, e.g. "$.field.params.a".
class SchemaError : public DomainError {
 public:
  SchemaError(const std::string& path, const std::string& what) : DomainError(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

std::string format_double(double v);

// {"dim": d, "denominator": N, "atoms": [{"x": [...], "mult": k}, ...]}
json measure_to_json(const DiscreteMeasure& mu);
DiscreteMeasure measure_from_json(const json& j, const std::string& path = "$");

// {"source": measure, "target": measure, "mass": [[...]]}
json coupling_to_json(const Coupling& gamma);
Coupling coupling_from_json(const json& j, const std::string& path = "$");

// {"kind": "linear"|"barycentric"|"pw"|"superposition"|"lipschitz"|"constant"|"zero",
//  "params": {...}, "lambda": optional claim override}
VelocityField field_from_json(const json& j, const std::string& path = "$");
/// {"P": {"kind": ..., "coef": ...}, "W": {...}}, also accepted as a "pw" field spec.
Functional functional_from_json(const json& j, const std::string& path = "$");

// {"tol": 1e-10, "max_iter": 100000, "solver": "auto"|"fixed_point"|"prox"|"newton"}
SolverConfig solver_from_json(const json& j, const std::string& path = "$");
json solver_to_json(const SolverConfig& cfg);

json read_json_file(const std::string& file);
void write_json_file(const std::string& file, const json& j);

/// Columns t, particle_index, x_1..x_d.
void write_flow_csv(std::ostream& os, const FlowResult& flow);
json flow_diagnostics_json(const FlowResult& flow);

/// Columns i, j, mass, weight over the support.
void write_plan_csv(std::ostream& os, const Coupling& gamma);
void write_error_study_csv(std::ostream& os, const ErrorStudy& study);
void write_mean_field_csv(std::ostream& os, const MeanFieldStudy& study);

}  // namespace wflow
