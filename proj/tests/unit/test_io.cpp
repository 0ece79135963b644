#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "wflow/io.hpp"

using namespace wflow;
using testutil::pt;
using testutil::pt1;

namespace {

std::string schema_path(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("format_double is shortest round trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.5) == "-2.5");
    CHECK(format_double(1e-300) == "1e-300");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
      const double v = u(rng) / 7.0;
      CHECK(std::stod(format_double(v)) == v);
    }
  }

  TEST_CASE("measure JSON round trip") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 50; ++rep) {
      const auto mu = testutil::random_measure(rng, 1 + rep % 3, 1 + rep % 7);
      const auto j = measure_to_json(mu);
      CHECK(measure_from_json(j) == mu);
      CHECK(measure_from_json(json::parse(j.dump())) == mu);
      CHECK(j.dump() == measure_to_json(measure_from_json(j)).dump());
    }
  }

  TEST_CASE("measure JSON in file order is canonicalized") {
    const auto j = json::parse(R"({"dim": 1, "denominator": 3,
      "atoms": [{"x": [2.0], "mult": 1}, {"x": [-1.0], "mult": 2}]})");
    const auto mu = measure_from_json(j);
    CHECK(mu.atom(0)(0) == -1.0);
    CHECK(mu.multiplicity(0) == 2);
  }

  TEST_CASE("measure schema errors carry paths") {
    CHECK(schema_path([] { measure_from_json(json::parse(R"({"denominator": 1, "atoms": []})")); }) == "$.dim");
    CHECK(schema_path([] {
            measure_from_json(json::parse(R"({"dim": 2, "denominator": 1, "atoms": [{"x": [1], "mult": 1}]})"));
          }) == "$.atoms[0].x");
    CHECK(schema_path([] {
            measure_from_json(json::parse(R"({"dim": 1, "denominator": 2, "atoms": [{"x": [1], "mult": 1}]})"));
          }) == "$.denominator");
    CHECK(schema_path([] {
            measure_from_json(
                json::parse(R"({"dim": 1, "denominator": 2, "atoms": [{"x": [1], "mult": 1}, {"x": [1], "mult": 1}]})"));
          }) == "$.atoms[1].x");
    CHECK(schema_path([] {
            measure_from_json(json::parse(R"({"dim": 1, "denominator": 1, "atoms": [{"x": [1], "mult": 0}]})"));
          }) == "$.atoms[0].mult");
    CHECK(schema_path([] {
            measure_from_json(json::parse(R"({"dim": 1, "denominator": 1, "atoms": [{"x": ["a"], "mult": 1}]})"));
          }).rfind("$.atoms[0].x", 0) == 0);
  }

  TEST_CASE("coupling JSON round trip and file-order remapping") {
    const DiscreteMeasure src({pt1(0), pt1(1)}, {1, 1});
    const DiscreteMeasure tgt({pt1(5), pt1(3)}, {1, 1});
    Coupling::MassMatrix m(2, 2);
    m << 0, 1, 1, 0;
    const Coupling g(src, tgt, m);
    CHECK(coupling_from_json(coupling_to_json(g)).mass() == g.mass());

    // target listed as 5 then 3 in the file: the anti-diagonal in file order is the diagonal canonically
    const auto j = json::parse(R"({
      "source": {"dim": 1, "denominator": 2, "atoms": [{"x": [0], "mult": 1}, {"x": [1], "mult": 1}]},
      "target": {"dim": 1, "denominator": 2, "atoms": [{"x": [5], "mult": 1}, {"x": [3], "mult": 1}]},
      "mass": [[0, 1], [1, 0]]})");
    const auto c = coupling_from_json(j);
    CHECK(c.mass()(0, 0) == 1);
    CHECK(c.mass()(1, 1) == 1);

    auto bad = j;
    bad["mass"] = json::parse("[[1, 0], [1, 0]]");
    CHECK(schema_path([&] { coupling_from_json(bad); }) == "$.mass");
    bad["mass"] = json::parse("[[1, 0, 0], [0, 1]]");
    CHECK(schema_path([&] { coupling_from_json(bad); }) == "$.mass[0]");
  }

  TEST_CASE("field specs build the advertised fields") {
    const auto mu = DiscreteMeasure({pt1(0), pt1(2)}, {1, 1});
    const auto lin = field_from_json(json::parse(R"({"kind": "linear", "params": {"A": [[-1]], "b": [0.5]}})"));
    CHECK(lin(pt1(2.0), mu)(0) == doctest::Approx(-1.5));
    const auto bary = field_from_json(json::parse(R"({"kind": "barycentric", "params": {"a": 2}})"));
    CHECK(bary(pt1(0.0), mu)(0) == doctest::Approx(2.0));
    const auto pwf = field_from_json(
        json::parse(R"({"kind": "pw", "params": {"P": null, "W": {"kind": "abs", "coef": 1}}})"));
    CHECK(pwf(pt1(0.0), mu)(0) == doctest::Approx(0.5));
    CHECK(pwf.functional() != nullptr);
    const auto cst = field_from_json(json::parse(R"({"kind": "constant", "params": {"v": [3]}})"));
    CHECK(cst(pt1(9.0), mu)(0) == 3.0);
    CHECK(field_from_json(json::parse(R"({"kind": "zero"})"))(pt1(1), mu)(0) == 0.0);
    const auto claimed = field_from_json(json::parse(R"({"kind": "zero", "lambda": 0.25})"));
    CHECK(claimed.lambda() == 0.25);
    const auto sup = field_from_json(json::parse(R"({"kind": "superposition", "params": {"components": [
        {"weight": 0.25, "field": {"kind": "constant", "params": {"v": [1]}}},
        {"weight": 0.75, "field": {"kind": "constant", "params": {"v": [-1]}}}]}})"));
    CHECK(sup(pt1(0), mu)(0) == doctest::Approx(-0.5));
  }

  TEST_CASE("field schema errors carry paths") {
    CHECK(schema_path([] { field_from_json(json::parse(R"({"params": {}})")); }) == "$.kind");
    CHECK(schema_path([] { field_from_json(json::parse(R"({"kind": "spiral"})")); }) == "$.kind");
    CHECK(schema_path([] { field_from_json(json::parse(R"({"kind": "barycentric", "params": {"a": -1}})")); }) ==
          "$.params.a");
    CHECK(schema_path([] { field_from_json(json::parse(R"({"kind": "linear", "params": {"A": [[1, 2]]}})")); }) ==
          "$.params.A");
    CHECK(schema_path([] {
            field_from_json(json::parse(R"({"kind": "pw", "params": {"W": {"kind": "cubic", "coef": 1}}})"));
          }) == "$.params.W");
    CHECK(schema_path([] {
            field_from_json(json::parse(
                R"({"kind": "superposition", "params": {"components": [{"weight": 1, "field": {"kind": "x"}}]}})"));
          }) == "$.params.components[0].field.kind");
    CHECK(schema_path([] { field_from_json(json::parse(R"({"kind": "zero", "lambda": "big"})")); }) == "$.lambda");
  }

  TEST_CASE("functional specs") {
    const auto phi = functional_from_json(json::parse(R"({"P": {"kind": "quadratic", "coef": 2}, "W": "abs"})"));
    CHECK(phi.potential().kind() == ProfileKind::Quadratic);
    CHECK(phi.potential().coef() == 2.0);
    CHECK(phi.interaction().kind() == ProfileKind::Abs);
    const auto wrapped = functional_from_json(json::parse(R"({"params": {"W": {"kind": "quartic", "coef": 1}}})"));
    CHECK(wrapped.potential().kind() == ProfileKind::Zero);
    CHECK(wrapped.interaction().kind() == ProfileKind::Quartic);
  }

  TEST_CASE("solver config round trip and errors") {
    const auto cfg = solver_from_json(json::parse(R"({"tol": 1e-8, "max_iter": 50, "solver": "newton"})"));
    CHECK(cfg.tol == 1e-8);
    CHECK(cfg.max_iter == 50);
    CHECK(cfg.method == SolverConfig::Method::Newton);
    const auto back = solver_from_json(solver_to_json(cfg));
    CHECK(back.tol == cfg.tol);
    CHECK(back.method == cfg.method);
    CHECK(solver_from_json(json()).method == SolverConfig::Method::Auto);
    CHECK(schema_path([] { solver_from_json(json::parse(R"({"solver": "magic"})")); }) == "$.solver");
    CHECK(schema_path([] { solver_from_json(json::parse(R"({"tol": 0})")); }) == "$.tol");
  }

  TEST_CASE("json files") {
    const auto dir = std::filesystem::temp_directory_path() / "wflow_io_test";
    std::filesystem::create_directories(dir);
    const auto file = (dir / "m.json").string();
    const auto mu = DiscreteMeasure({pt({0, 1}), pt({2, 3})}, {1, 2});
    write_json_file(file, measure_to_json(mu));
    CHECK(measure_from_json(read_json_file(file)) == mu);
    {
      std::ofstream(dir / "bad.json") << "{ not json";
    }
    CHECK_THROWS_AS(read_json_file((dir / "bad.json").string()), SchemaError);
    CHECK_THROWS_AS(read_json_file((dir / "missing.json").string()), Error);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("CSV writers are deterministic") {
    const Functional phi(Profile::zero(), Profile::abs(1.0));
    auto render = [&] {
      const auto flow = evolve(phi, DiscreteMeasure({pt1(-1), pt1(1)}, {1, 1}), Scheme::implicit(0.5), 1.0);
      std::ostringstream os;
      write_flow_csv(os, flow);
      return os.str() + flow_diagnostics_json(flow).dump();
    };
    const auto a = render();
    CHECK(a == render());
    CHECK(a.rfind("t,particle_index,x_1\n0,0,-1\n0,1,1\n0.5,0,-0.75\n", 0) == 0);

    std::ostringstream plan;
    const auto w = w2_exact(DiscreteMeasure({pt1(0), pt1(1)}, {1, 1}), DiscreteMeasure({pt1(5)}, {1}));
    write_plan_csv(plan, w.plan);
    CHECK(plan.str() == "i,j,mass,weight\n0,0,1,0.5\n1,0,1,0.5\n");

    ErrorStudy es;
    es.rows.push_back({4, 0.25, 1.0, true});
    std::ostringstream eo;
    write_error_study_csv(eo, es);
    CHECK(eo.str() == "n,error,bound,pass\n4,0.25,1,1\n");

    MeanFieldStudy ms;
    ms.rows.push_back({8, 3, 0.5, 0.25, 0.5000001, true});
    std::ostringstream mo;
    write_mean_field_csv(mo, ms);
    CHECK(mo.str() == "N,seed,initial_error,final_error,bound,pass\n8,3,0.5,0.25,0.5000001,1\n");
  }
}
