#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gmr3/error.hpp"
#include "gmr3/simulation.hpp"
#include "support.hpp"

using namespace gmr3;
namespace ts = testing_support;

namespace {

std::string bytes(const Dataset& d) {
  std::ostringstream os;
  d.write_csv(os);
  return os.str();
}

std::vector<Level> response_levels(const Dataset& d) {
  std::vector<Level> out;
  for (std::size_t j : d.schema().responses()) out.push_back(d.schema()[j].level);
  return out;
}

}  // namespace

TEST_CASE("generate: determinism") {
  for (Scenario s : all_scenarios()) {
    SimConfig c;
    c.scenario = s;
    c.n = 100;
    CHECK(bytes(generate(c, 7).data) == bytes(generate(c, 7).data));
    CHECK(bytes(generate(c, 7).data) != bytes(generate(c, 8).data));
  }
}

TEST_CASE("generate: response mixes per scenario") {
  const Level N = Level::Numeric, B = Level::Binary, O = Level::Ordinal;
  SimConfig c;
  c.n = 200;
  c.scenario = Scenario::BinaryOrdinal;
  CHECK(response_levels(generate(c, 1).data) == std::vector<Level>{B, B, B, B, O, O, O, O});
  c.scenario = Scenario::NumericOrdinal;
  CHECK(response_levels(generate(c, 1).data) == std::vector<Level>{N, N, N, N, O, O, O, O});
  c.scenario = Scenario::MixedNumericBinary;
  CHECK(response_levels(generate(c, 1).data) == std::vector<Level>{N, N, N, N, B, B, B, B});
}

TEST_CASE("generate: truth structure") {
  SimConfig c;
  c.scenario = Scenario::BinaryOrdinal;
  SimData sim = generate(c, 3);
  CHECK(sim.data.n() == 500);
  CHECK(sim.data.schema().predictors().size() == 8);
  CHECK((sim.truth.b.transpose() * sim.truth.b - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sim.truth.v.cwiseAbs().maxCoeff() < 1.0);
  CHECK(sim.truth.m == Vector::Zero(8));
  for (int r = 4; r < 8; ++r) CHECK(sim.truth.thresholds[static_cast<std::size_t>(r)] == simulation_thresholds());
  const auto& y = sim.data.column("Y5");
  CHECK(y.minCoeff() == 1.0);
  CHECK(y.maxCoeff() == 4.0);
}

TEST_CASE("generate: ordinal predictors are quintile codes") {
  SimConfig c;
  c.scenario = Scenario::OrdinalPredictors;
  SimData sim = generate(c, 4);
  for (std::size_t j : sim.data.schema().predictors()) {
    CHECK(sim.data.schema()[j].level == Level::Ordinal);
    std::vector<int> count(5, 0);
    for (Index i = 0; i < sim.data.n(); ++i) ++count[static_cast<std::size_t>(sim.data.code(j, i) - 1)];
    CHECK(count == std::vector<int>{100, 100, 100, 100, 100});
    const Vector& w = sim.truth.scores[j];
    for (Index k = 1; k < 5; ++k) CHECK(w[k] > w[k - 1]);
  }
}

TEST_CASE("draw_response: ordinal proportions at theta = 0") {
  Rng rng(5);
  const Index n = 100000;
  Vector y = draw_response(Family::Ordinal, Vector::Zero(n), simulation_thresholds(), rng);
  const Vector t = simulation_thresholds();
  std::vector<double> expect;
  double prev = 0.0;
  for (Index k = 0; k < t.size(); ++k) {
    const double f = ts::sigmoid(t[k]);
    expect.push_back(f - prev);
    prev = f;
  }
  expect.push_back(1.0 - prev);
  CHECK(expect[0] == doctest::Approx(0.268941).epsilon(1e-5));
  CHECK(expect[1] == doctest::Approx(0.231059).epsilon(1e-5));
  for (int c = 0; c < 4; ++c) {
    const double observed = (y.array() == c + 1.0).cast<double>().sum() / static_cast<double>(n);
    const double se = std::sqrt(expect[static_cast<std::size_t>(c)] * (1 - expect[static_cast<std::size_t>(c)]) / n);
    CHECK(std::abs(observed - expect[static_cast<std::size_t>(c)]) < 4.0 * se);
  }
}

TEST_CASE("rmse") {
  Matrix a = Matrix::Random(3, 4);
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, (a.array() + 0.25).matrix()) == doctest::Approx(0.25));
  CHECK(rmse(Matrix::Identity(2, 2), Matrix::Zero(2, 2)) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(rmse(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), ContractError);
}

TEST_CASE("monotone_descent") {
  CHECK(monotone_descent({3.0, 2.0, 2.0, 1.0}));
  CHECK(monotone_descent({3.0, 3.0 + 5e-11}));
  CHECK_FALSE(monotone_descent({3.0, 3.0 + 1e-8}));
}

TEST_CASE("scenario names round trip") {
  for (Scenario s : all_scenarios()) CHECK(parse_scenario(to_string(s)) == s);
  CHECK(parse_scenario("binary-ordinal-responses") == Scenario::BinaryOrdinal);
  CHECK_THROWS(parse_scenario("poisson"));
}

TEST_CASE("run_study: reproducible table with monotone fits") {
  std::vector<SimConfig> configs;
  for (Scenario s : all_scenarios()) {
    SimConfig c;
    c.scenario = s;
    c.n = 200;
    configs.push_back(c);
  }
  auto a = run_study(configs, 5, 77);
  auto b = run_study(configs, 5, 77);
  REQUIRE(a.size() == 20);
  std::ostringstream sa, sb;
  write_study_csv(sa, a);
  write_study_csv(sb, b);
  CHECK(sa.str() == sb.str());
  for (const auto& r : a) {
    CHECK(r.error.empty());
    CHECK(r.monotone);
    CHECK(r.rmse > 0.0);
  }
  CHECK(a[0].scenario == Scenario::MixedNumericBinary);
  CHECK(a[0].rep == 0);
  CHECK(a[5].scenario == Scenario::OrdinalPredictors);
  CHECK(median_rmse(a, Scenario::MixedNumericBinary, 200) > 0.0);
  CHECK(std::isnan(median_rmse(a, Scenario::MixedNumericBinary, 999)));
}

TEST_CASE("generate_survey: schema and category coverage") {
  SimData sim = generate_survey(837, 1);
  CHECK(sim.data.n() == 837);
  CHECK(sim.data.schema().size() == eurobarometer_schema().size());
  for (std::size_t j = 0; j < sim.data.schema().size(); ++j) {
    const auto& v = sim.data.schema()[j];
    if (!v.is_discrete()) continue;
    const int offset = v.level == Level::Binary && v.role == Role::Response ? 1 : 0;
    std::vector<int> seen(static_cast<std::size_t>(v.n_categories()), 0);
    for (Index i = 0; i < sim.data.n(); ++i) ++seen[static_cast<std::size_t>(sim.data.code(j, i) + offset - 1)];
    CHECK(*std::min_element(seen.begin(), seen.end()) > 0);
  }
  CHECK(bytes(generate_survey(100, 2).data) == bytes(generate_survey(100, 2).data));
}
