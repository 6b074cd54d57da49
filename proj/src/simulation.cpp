#include "gmr3/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "gmr3/csv.hpp"
#include "gmr3/error.hpp"
#include "gmr3/likelihood.hpp"
#include "gmr3/parallel.hpp"
#include "gmr3/rng.hpp"

namespace gmr3 {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::MixedNumericBinary: return "mixed-numeric-binary";
    case Scenario::OrdinalPredictors: return "ordinal-predictors";
    case Scenario::BinaryOrdinal: return "r1";
    case Scenario::NumericOrdinal: return "r2";
  }
  return "unknown";
}

Scenario parse_scenario(const std::string& text) {
  for (Scenario s : all_scenarios())
    if (text == to_string(s)) return s;
  if (text == "binary-ordinal-responses") return Scenario::BinaryOrdinal;
  if (text == "numeric-ordinal-responses") return Scenario::NumericOrdinal;
  throw DataError("unknown scenario '" + text + "'");
}

std::vector<Scenario> all_scenarios() {
  return {Scenario::MixedNumericBinary, Scenario::OrdinalPredictors, Scenario::BinaryOrdinal,
          Scenario::NumericOrdinal};
}

Vector simulation_thresholds() { return (Vector(3) << -1.0, 0.0, 1.0).finished(); }

namespace {

std::vector<std::string> labels(int c) {
  std::vector<std::string> out;
  for (int k = 1; k <= c; ++k) out.push_back(std::to_string(k));
  return out;
}

bool all_categories(const Vector& y, Family f, int c) {
  if (f == Family::Numeric) return true;
  std::vector<char> seen(static_cast<std::size_t>(c), 0);
  for (Index i = 0; i < y.size(); ++i) seen[static_cast<std::size_t>(y[i] + (f == Family::Binary ? 0 : -1))] = 1;
  return std::find(seen.begin(), seen.end(), 0) == seen.end();
}

Matrix orthonormal_columns(int rows, int cols, Rng& rng) {
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

}  // namespace

Vector draw_response(Family f, const Vector& theta, const Vector& t, Rng& rng) {
  Vector y(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    switch (f) {
      case Family::Numeric: y[i] = theta[i] + rng.normal(); break;
      case Family::Binary: y[i] = rng.uniform() < logistic_cdf(theta[i]) ? 1.0 : 0.0; break;
      case Family::Ordinal: {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        const double latent = theta[i] + std::log(u / (1.0 - u));
        int c = 1;
        for (Index k = 0; k < t.size(); ++k)
          if (latent >= t[k]) c = static_cast<int>(k) + 2;
        y[i] = c;
        break;
      }
    }
  }
  return y;
}

SimData generate(const SimConfig& config, std::uint64_t seed) {
  if (config.n < 2 || config.p < 1 || config.r < 2 || config.s < 1 || config.s > std::min(config.p, config.r))
    throw ContractError("generate: invalid simulation sizes");
  Rng rng(derive_seed(seed, "simulate"));
  const Index n = config.n;
  const int P = config.p;
  const int R = config.r;
  const bool ordinal_predictors = config.scenario == Scenario::OrdinalPredictors;

  Matrix x(n, P);
  for (Index j = 0; j < P; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = rng.normal();

  SimTruth truth;
  truth.b = orthonormal_columns(P, config.s, rng);
  truth.v.resize(R, config.s);
  for (Index j = 0; j < config.s; ++j)
    for (Index i = 0; i < R; ++i) truth.v(i, j) = rng.uniform(-1.0, 1.0);
  truth.m = Vector::Zero(R);
  truth.scores.assign(static_cast<std::size_t>(P), Vector());

  Matrix codes(n, P);
  if (ordinal_predictors) {
    // quintile classes; generation uses the class means
    for (Index j = 0; j < P; ++j) {
      std::vector<Index> order(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      std::sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a, j) < x(b, j); });
      Vector sums = Vector::Zero(5), counts = Vector::Zero(5);
      for (Index k = 0; k < n; ++k) {
        const int c = static_cast<int>((k * 5) / n);
        codes(order[static_cast<std::size_t>(k)], j) = c + 1;
        sums[c] += x(order[static_cast<std::size_t>(k)], j);
        counts[c] += 1.0;
      }
      Vector means = sums.cwiseQuotient(counts);
      truth.scores[static_cast<std::size_t>(j)] = means;
      for (Index i = 0; i < n; ++i) x(i, j) = means[static_cast<Index>(codes(i, j)) - 1];
    }
  }

  std::vector<Family> families(static_cast<std::size_t>(R));
  const int half = R / 2;
  for (int r = 0; r < R; ++r) {
    const bool first = r < half;
    switch (config.scenario) {
      case Scenario::MixedNumericBinary:
      case Scenario::OrdinalPredictors: families[static_cast<std::size_t>(r)] = first ? Family::Numeric : Family::Binary; break;
      case Scenario::BinaryOrdinal: families[static_cast<std::size_t>(r)] = first ? Family::Binary : Family::Ordinal; break;
      case Scenario::NumericOrdinal: families[static_cast<std::size_t>(r)] = first ? Family::Numeric : Family::Ordinal; break;
    }
  }
  truth.thresholds.assign(static_cast<std::size_t>(R), Vector());
  for (int r = 0; r < R; ++r)
    if (families[static_cast<std::size_t>(r)] == Family::Ordinal) truth.thresholds[static_cast<std::size_t>(r)] = simulation_thresholds();

  const Matrix theta = x * truth.coefficients();
  std::vector<VariableSpec> specs;
  std::vector<Vector> columns;
  for (int j = 0; j < P; ++j) {
    VariableSpec v{"X" + std::to_string(j + 1), Role::Predictor, ordinal_predictors ? Level::Ordinal : Level::Numeric, {}};
    if (ordinal_predictors) v.categories = labels(5);
    specs.push_back(v);
    columns.push_back(ordinal_predictors ? Vector(codes.col(j)) : Vector(x.col(j)));
  }
  for (int r = 0; r < R; ++r) {
    const Family f = families[static_cast<std::size_t>(r)];
    VariableSpec v{"Y" + std::to_string(r + 1), Role::Response, Level::Numeric, {}};
    int c = 0;
    if (f == Family::Binary) {
      v.level = Level::Binary;
      v.categories = {"0", "1"};
      c = 2;
    } else if (f == Family::Ordinal) {
      v.level = Level::Ordinal;
      v.categories = labels(4);
      c = 4;
    }
    specs.push_back(v);
    // redraw the noise if a category is empty (rare at small N)
    Vector y;
    for (int attempt = 0;; ++attempt) {
      Rng noise(derive_seed(seed, "simulate-response", static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(attempt)));
      y = draw_response(f, theta.col(r), truth.thresholds[static_cast<std::size_t>(r)], noise);
      if (all_categories(y, f, c)) break;
      if (attempt == 99) throw DataError("generate: response Y" + std::to_string(r + 1) + " leaves a category empty");
    }
    columns.push_back(y);
  }
  return {Dataset(VariableSchema(std::move(specs)), std::move(columns)), std::move(truth)};
}

SimData generate_survey(Index n, std::uint64_t seed, double signal) {
  const VariableSchema schema = eurobarometer_schema();
  Rng rng(derive_seed(seed, "survey"));
  const auto preds = schema.predictors();
  const auto resps = schema.responses();
  const int P = static_cast<int>(preds.size());
  const int R = static_cast<int>(resps.size());

  // category probabilities per discrete predictor, by name
  auto probabilities = [](const std::string& name) -> std::vector<double> {
    if (name == "PA") return {0.30, 0.45, 0.25};
    if (name == "G") return {0.5, 0.5};
    if (name == "U") return {0.30, 0.40, 0.30};
    return {0.03, 0.04, 0.12, 0.25, 0.15, 0.15, 0.13, 0.10, 0.03};
  };

  SimTruth truth;
  truth.scores.assign(static_cast<std::size_t>(P), Vector());
  std::vector<Vector> columns(schema.size());
  Matrix phi(n, P);
  for (int p = 0; p < P; ++p) {
    const auto& spec = schema[preds[static_cast<std::size_t>(p)]];
    Vector col(n);
    if (!spec.is_discrete()) {
      for (Index i = 0; i < n; ++i) col[i] = std::round(rng.uniform(18.0, 90.0));
      Standardized s = standardize(col);
      phi.col(p) = s.values;
    } else {
      const auto pr = probabilities(spec.name);
      const int c = spec.n_categories();
      // every category receives at least its expected share rounded down
      std::vector<int> pool;
      for (int k = 0; k < c; ++k)
        for (int m = 0; m < static_cast<int>(std::floor(pr[static_cast<std::size_t>(k)] * static_cast<double>(n))); ++m) pool.push_back(k + 1);
      while (static_cast<Index>(pool.size()) < n) {
        double u = rng.uniform(), acc = 0.0;
        int k = 0;
        for (; k < c - 1; ++k) {
          acc += pr[static_cast<std::size_t>(k)];
          if (u < acc) break;
        }
        pool.push_back(k + 1);
      }
      rng.shuffle(pool.begin(), pool.end());
      for (Index i = 0; i < n; ++i) col[i] = pool[static_cast<std::size_t>(i)];
      // concave increasing true scores
      Vector raw(c), counts = Vector::Zero(c);
      for (int k = 0; k < c; ++k) raw[k] = std::sqrt(static_cast<double>(k + 1));
      for (Index i = 0; i < n; ++i) counts[static_cast<Index>(col[i]) - 1] += 1.0;
      const double total = counts.sum();
      const double mean = counts.dot(raw) / total;
      Vector centered = (raw.array() - mean).matrix();
      Vector w = centered / std::sqrt(counts.dot(centered.cwiseAbs2()) / total);
      truth.scores[static_cast<std::size_t>(p)] = w;
      for (Index i = 0; i < n; ++i) phi(i, p) = w[static_cast<Index>(col[i]) - 1];
    }
    columns[preds[static_cast<std::size_t>(p)]] = col;
  }

  // rank-2 weights with every predictor clearly active
  truth.b.resize(P, 2);
  const double rows[5][2] = {{0.6, 0.3}, {-0.5, 0.4}, {0.3, -0.5}, {0.4, 0.4}, {0.7, -0.2}};
  for (int p = 0; p < P; ++p) {
    truth.b(p, 0) = signal * rows[p % 5][0];
    truth.b(p, 1) = signal * rows[p % 5][1];
  }
  truth.v = orthonormal_columns(R, 2, rng);
  truth.v *= std::sqrt(static_cast<double>(R) / 2.0);  // unit-scale loadings on average
  truth.m = Vector::Zero(R);
  truth.thresholds.assign(static_cast<std::size_t>(R), Vector());
  const Matrix theta = phi * truth.coefficients();
  for (int r = 0; r < R; ++r) {
    const std::size_t j = resps[static_cast<std::size_t>(r)];
    const auto& spec = schema[j];
    Family f = spec.level == Level::Binary ? Family::Binary : Family::Ordinal;
    if (f == Family::Binary) truth.m[r] = 0.3;
    else truth.thresholds[static_cast<std::size_t>(r)] = (Vector(3) << -1.5, 0.0, 1.5).finished();
    Vector shifted = (theta.col(r).array() + truth.m[r]).matrix();
    Vector y;
    for (int attempt = 0;; ++attempt) {
      Rng noise(derive_seed(seed, "survey-response", static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(attempt)));
      y = draw_response(f, shifted, truth.thresholds[static_cast<std::size_t>(r)], noise);
      if (all_categories(y, f, spec.n_categories())) break;
      if (attempt == 99) throw DataError("generate_survey: response " + spec.name + " leaves a category empty");
    }
    columns[j] = y;
  }
  return {Dataset(schema, std::move(columns)), std::move(truth)};
}

double rmse(const Matrix& truth, const Matrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw ContractError("rmse: shape mismatch");
  if (truth.size() == 0) return 0.0;
  return std::sqrt((truth - estimate).squaredNorm() / static_cast<double>(truth.size()));
}

bool monotone_descent(const std::vector<double>& trace, double slack) {
  for (std::size_t k = 1; k < trace.size(); ++k)
    if (trace[k] > trace[k - 1] + slack) return false;
  return true;
}

std::vector<StudyRow> run_study(const std::vector<SimConfig>& configs, int replications, std::uint64_t seed,
                                const FitOptions& options) {
  if (replications < 1) throw ContractError("run_study needs at least one replication");
  const std::size_t reps = static_cast<std::size_t>(replications);
  std::vector<StudyRow> rows(configs.size() * reps);
  parallel_jobs(rows.size(), [&](std::size_t job) {
    const SimConfig& cfg = configs[job / reps];
    StudyRow& row = rows[job];
    row.scenario = cfg.scenario;
    row.n = cfg.n;
    row.rep = static_cast<int>(job % reps);
    row.seed = derive_seed(seed, to_string(cfg.scenario), static_cast<std::uint64_t>(cfg.n),
                           static_cast<std::uint64_t>(row.rep));
    try {
      SimData sim = generate(cfg, row.seed);
      FitResult f = fit(sim.data, cfg.s, options);
      row.rmse = rmse(sim.truth.coefficients(), f.params.coefficients());
      row.iterations = f.iterations;
      row.converged = f.converged;
      row.monotone = monotone_descent(f.nll_trace);
    } catch (const Error& e) {
      row.error = e.what();
    }
  });
  return rows;
}

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
  csv::write_row(out, {"scenario", "n", "rep", "rmse", "iterations", "converged", "monotone", "seed", "error"});
  for (const auto& r : rows) {
    std::ostringstream num;
    num << std::setprecision(6) << r.rmse;
    csv::write_row(out, {to_string(r.scenario), std::to_string(r.n), std::to_string(r.rep),
                         r.error.empty() ? num.str() : "", std::to_string(r.iterations), r.converged ? "1" : "0",
                         r.monotone ? "1" : "0", std::to_string(r.seed), r.error});
  }
}

double median_rmse(const std::vector<StudyRow>& rows, Scenario scenario, Index n) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.scenario == scenario && r.n == n && r.error.empty()) v.push_back(r.rmse);
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

}  // namespace gmr3
