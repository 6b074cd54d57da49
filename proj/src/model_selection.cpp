#include "gmr3/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "gmr3/error.hpp"
#include "gmr3/parallel.hpp"
#include "gmr3/rng.hpp"

namespace gmr3 {

int count_parameters(const VariableSchema& schema, int rank, bool count_sigma2) {
  if (rank < 1) throw ContractError("count_parameters needs S >= 1");
  int P = 0, R = 0, k_scaling = 0, k_intercepts = 0, k_thresholds = 0;
  bool numeric_response = false;
  for (const auto& v : schema.variables()) {
    if (v.role == Role::Predictor) {
      ++P;
      if (v.is_discrete()) k_scaling += v.n_categories() - 2;
    } else {
      ++R;
      if (v.level == Level::Ordinal) {
        k_thresholds += v.n_categories() - 1;
      } else {
        ++k_intercepts;
        numeric_response = numeric_response || v.level == Level::Numeric;
      }
    }
  }
  int k = (P + R - rank) * rank + k_scaling + k_intercepts + k_thresholds;
  if (count_sigma2 && numeric_response) ++k;
  return k;
}

NullFit fit_null(const Dataset& data, bool count_sigma2) {
  const ResponseModel model = response_model(data);
  const Index n = model.n();
  const Index R = model.r();
  NullFit out;
  out.m = Vector::Zero(R);
  out.thresholds.assign(static_cast<std::size_t>(R), Vector());
  double sse = 0.0;
  double cells = 0.0;
  for (Index r = 0; r < R; ++r) {
    const auto f = model.family[static_cast<std::size_t>(r)];
    const Vector y = model.y.col(r);
    if (f == Family::Numeric) {
      out.m[r] = y.mean();
      sse += (y.array() - out.m[r]).square().sum();
      cells += static_cast<double>(n);
    } else if (f == Family::Binary) {
      double p = y.mean();
      if (p <= 0.0 || p >= 1.0)
        throw NumericalError("null model: binary response '" + model.names[static_cast<std::size_t>(r)] +
                             "' has proportion " + std::to_string(p) + " (separation)");
      out.m[r] = std::log(p / (1.0 - p));
    } else {
      out.thresholds[static_cast<std::size_t>(r)] = null_thresholds(y, model.n_categories[static_cast<std::size_t>(r)]);
    }
  }
  if (cells > 0.0) {
    out.sigma2 = sse / cells;
    if (!(out.sigma2 > 0.0)) throw NumericalError("null model: numeric responses are constant");
  }
  Matrix theta = Matrix::Zero(n, R);
  theta.rowwise() += out.m.transpose();
  out.nll = nll(model, theta, out.thresholds, out.sigma2).total;

  int k = model.count(Family::Numeric) + model.count(Family::Binary);
  for (Index r = 0; r < R; ++r)
    if (model.family[static_cast<std::size_t>(r)] == Family::Ordinal)
      k += model.n_categories[static_cast<std::size_t>(r)] - 1;
  if (count_sigma2 && cells > 0.0) ++k;
  out.n_parameters = k;
  return out;
}

InformationCriteria information_criteria(double nll, int k, Index n, double null_nll) {
  InformationCriteria ic;
  ic.aic = 2.0 * nll + 2.0 * k;
  ic.bic = 2.0 * nll + std::log(static_cast<double>(n)) * k;
  ic.r2_adjusted = 1.0 - (nll + k) / null_nll;
  return ic;
}

SelectionReport select_rank(const Dataset& data, const std::vector<int>& ranks, const FitOptions& options,
                            bool count_sigma2) {
  SelectionReport report;
  NullFit null_fit = fit_null(data, count_sigma2);
  report.null_nll = null_fit.nll;
  report.rows.resize(ranks.size());
  parallel_jobs(ranks.size(), [&](std::size_t j) {
    FitResult f = fit(data, ranks[j], options);
    SelectionRow& row = report.rows[j];
    row.rank = ranks[j];
    row.nll = f.nll();
    row.k = count_parameters(data.schema(), ranks[j], count_sigma2);
    row.converged = f.converged;
    InformationCriteria ic = information_criteria(row.nll, row.k, data.n(), report.null_nll);
    row.aic = ic.aic;
    row.bic = ic.bic;
    row.r2_adjusted = ic.r2_adjusted;
  });
  if (!report.rows.empty()) {
    auto by = [&](auto key, bool maximize) {
      const SelectionRow* best = &report.rows.front();
      for (const auto& r : report.rows)
        if (maximize ? key(r) > key(*best) : key(r) < key(*best)) best = &r;
      return best->rank;
    };
    report.chosen_aic = by([](const SelectionRow& r) { return r.aic; }, false);
    report.chosen_bic = by([](const SelectionRow& r) { return r.bic; }, false);
    report.chosen_r2 = by([](const SelectionRow& r) { return r.r2_adjusted; }, true);
  }
  return report;
}

namespace {

// Response (binary or ordinal) whose smallest category is rarest.
int stratum_response(const Dataset& data) {
  int best = -1;
  double rarest = std::numeric_limits<double>::infinity();
  for (std::size_t j : data.schema().responses()) {
    const auto& v = data.schema()[j];
    if (!v.is_discrete()) continue;
    std::map<int, double> counts;
    for (Index i = 0; i < data.n(); ++i) counts[data.code(j, i)] += 1.0;
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& [c, k] : counts) smallest = std::min(smallest, k);
    if (smallest < rarest) {
      rarest = smallest;
      best = static_cast<int>(j);
    }
  }
  return best;
}

bool training_complete(const Dataset& data, const std::vector<int>& folds, int v) {
  for (std::size_t j = 0; j < data.schema().size(); ++j) {
    const auto& spec = data.schema()[j];
    if (!spec.is_discrete()) continue;
    const bool binary_resp = spec.level == Level::Binary && spec.role == Role::Response;
    std::vector<char> seen(static_cast<std::size_t>(spec.n_categories()), 0);
    for (Index i = 0; i < data.n(); ++i) {
      if (folds[static_cast<std::size_t>(i)] == v) continue;
      int c = data.code(j, i) + (binary_resp ? 1 : 0);
      seen[static_cast<std::size_t>(c - 1)] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) return false;
  }
  return true;
}

}  // namespace

std::vector<int> assign_folds(const Dataset& data, int folds, std::uint64_t seed) {
  const Index n = data.n();
  if (folds < 2 || folds > n) throw ContractError("cross-validation needs 2 <= V <= N");
  Rng rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order.begin(), order.end());
  const int strat = stratum_response(data);
  if (strat >= 0) {
    const Vector& key = data.column(static_cast<std::size_t>(strat));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return key[a] < key[b]; });
  }
  std::vector<int> label(static_cast<std::size_t>(n));
  // deal round-robin, starting each repeat at a random fold
  const int offset = static_cast<int>(rng.below(static_cast<std::uint64_t>(folds)));
  for (std::size_t k = 0; k < order.size(); ++k)
    label[static_cast<std::size_t>(order[k])] = static_cast<int>((k + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(folds));
  return label;
}

CvReport cross_validate(const Dataset& data, const std::vector<int>& ranks, const CvOptions& options) {
  if (options.repeats < 1) throw ContractError("cross-validation needs L >= 1");
  const int V = options.folds;
  const int L = options.repeats;
  CvReport report;

  std::vector<std::optional<ModelParams>> warm(ranks.size());
  if (options.warm_start) {
    parallel_jobs(ranks.size(), [&](std::size_t j) { warm[j] = fit(data, ranks[j], options.fit).params; });
  }

  std::vector<std::vector<int>> fold_sets(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    bool ok = false;
    for (int attempt = 0; attempt < options.max_fold_retries && !ok; ++attempt) {
      auto labels = assign_folds(data, V, derive_seed(options.seed, "cv", static_cast<std::uint64_t>(l),
                                                      static_cast<std::uint64_t>(attempt)));
      ok = true;
      for (int v = 0; v < V && ok; ++v) ok = training_complete(data, labels, v);
      if (ok) fold_sets[static_cast<std::size_t>(l)] = std::move(labels);
    }
    if (!ok)
      throw DataError("cross-validation: no fold assignment keeps every category in every training set after " +
                      std::to_string(options.max_fold_retries) + " attempts");
  }

  const std::size_t jobs = ranks.size() * static_cast<std::size_t>(L * V);
  std::vector<double> estimates(jobs, 0.0);
  parallel_jobs(jobs, [&](std::size_t job) {
    const std::size_t j = job / static_cast<std::size_t>(L * V);
    const int lv = static_cast<int>(job % static_cast<std::size_t>(L * V));
    const int l = lv / V;
    const int v = lv % V;
    const auto& labels = fold_sets[static_cast<std::size_t>(l)];
    std::vector<Index> train, test;
    for (Index i = 0; i < data.n(); ++i) (labels[static_cast<std::size_t>(i)] == v ? test : train).push_back(i);
    Dataset dtrain = data.subset(train);
    Dataset dtest = data.subset(test);
    FitOptions fo = options.fit;
    if (options.warm_start) fo.warm_start = warm[j];
    FitResult f = fit(dtrain, ranks[j], fo);
    Prediction pred = predict(f.params, dtest, true);
    NllResult loss = nll(dtest, pred.theta, f.params.thresholds, f.params.sigma2);
    estimates[job] = loss.total / static_cast<double>(test.size());
  });

  for (std::size_t j = 0; j < ranks.size(); ++j) {
    CvCurvePoint pt;
    pt.rank = ranks[j];
    pt.fold_estimates.assign(estimates.begin() + static_cast<long>(j * static_cast<std::size_t>(L * V)),
                             estimates.begin() + static_cast<long>((j + 1) * static_cast<std::size_t>(L * V)));
    const double k = static_cast<double>(pt.fold_estimates.size());
    // mean over repeats of the mean over folds equals the mean of all L*V estimates
    double sum = 0.0;
    for (double e : pt.fold_estimates) sum += e;
    pt.mean = sum / k;
    double ss = 0.0;
    for (double e : pt.fold_estimates) ss += (e - pt.mean) * (e - pt.mean);
    pt.se = k > 1 ? std::sqrt(ss / (k - 1.0)) / std::sqrt(k) : 0.0;
    report.curve.push_back(std::move(pt));
  }
  if (!report.curve.empty()) {
    const CvCurvePoint* best = &report.curve.front();
    for (const auto& p : report.curve)
      if (p.mean < best->mean) best = &p;
    report.chosen_min = best->rank;
    const double limit = best->mean + best->se;
    int simplest = best->rank;
    for (const auto& p : report.curve)
      if (p.mean <= limit && p.rank < simplest) simplest = p.rank;
    report.chosen_one_se = simplest;
  }
  return report;
}

}  // namespace gmr3
