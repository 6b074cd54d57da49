#include "gmr3/baseline.hpp"

#include <cmath>

#include "gmr3/error.hpp"
#include "gmr3/model_selection.hpp"
#include "gmr3/parallel.hpp"
#include "gmr3/rng.hpp"

namespace gmr3 {

DummyDesign dummy_design(const Dataset& data) {
  DummyDesign d;
  std::vector<Vector> cols;
  for (std::size_t j : data.schema().predictors()) {
    const auto& spec = data.schema()[j];
    const Vector& x = data.column(j);
    if (!spec.is_discrete()) {
      cols.push_back(standardize(x).values);
      d.columns.push_back(spec.name);
      continue;
    }
    for (int c = 2; c <= spec.n_categories(); ++c) {
      cols.push_back((x.array() == static_cast<double>(c)).cast<double>().matrix());
      d.columns.push_back(spec.name + std::to_string(c));
    }
  }
  d.x.resize(data.n(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) d.x.col(static_cast<Index>(k)) = cols[k];
  return d;
}

namespace {

/// Newton direction for a convex objective; a ridge keeps singular or
/// indefinite Hessians usable.
Vector newton_direction(Matrix h, const Vector& g) {
  double ridge = 0.0;
  const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 20; ++attempt) {
    Matrix hr = h;
    hr.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(hr);
    if (llt.info() == Eigen::Success) {
      Vector step = -llt.solve(g);
      if (step.allFinite()) return step;
    }
    ridge = ridge == 0.0 ? 1e-10 * scale : ridge * 10.0;
  }
  return -g / scale;
}

template <class Objective>
void damped_newton(Vector& w, Objective& obj, const NewtonOptions& options, SeparateFit& out) {
  Vector g;
  Matrix h;
  double value = obj(w, &g, &h);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    out.gradient_norm = g.norm();
    if (out.gradient_norm < options.gradient_tolerance) break;
    Vector step = newton_direction(h, g);
    // predicted decrease below the objective's rounding error: values cannot
    // be compared, so take the full step
    const double predicted = -0.5 * g.dot(step);
    if (predicted >= 0.0 && predicted <= 1e-13 * std::max(1.0, std::abs(value))) {
      Vector trial = w + step;
      double v = obj(trial, nullptr, nullptr);
      if (std::isfinite(v)) {
        w = trial;
        value = obj(w, &g, &h);
        continue;
      }
    }
    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      Vector trial = w + scale * step;
      double v = obj(trial, nullptr, nullptr);
      if (std::isfinite(v) && v <= value) {
        w = trial;
        value = v;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    value = obj(w, &g, &h);
  }
  out.gradient_norm = g.norm();
  out.iterations = it;
  out.converged = out.gradient_norm < options.gradient_tolerance;
  out.nll = value;
}

Vector thresholds_from_gaps(const Vector& gamma) {
  Vector t(gamma.size());
  for (Index c = 0; c < gamma.size(); ++c) t[c] = c == 0 ? gamma[0] : t[c - 1] + std::exp(gamma[c]);
  return t;
}

}  // namespace

SeparateFit fit_binary_logistic(const Matrix& x, const Vector& y, const NewtonOptions& options) {
  const Index n = x.rows();
  const Index k = x.cols();
  if (y.size() != n) throw ContractError("fit_binary_logistic: length mismatch");
  const double pbar = y.mean();
  if (!(pbar > 0.0 && pbar < 1.0)) throw DataError("fit_binary_logistic: response has a single category");
  Vector w = Vector::Zero(k + 1);
  w[0] = std::log(pbar / (1.0 - pbar));
  auto obj = [&](const Vector& par, Vector* g, Matrix* h) {
    Vector eta = (x * par.tail(k)).array() + par[0];
    double value = 0.0;
    Vector resid(n), weight(n);
    for (Index i = 0; i < n; ++i) {
      value += cell_nll(Family::Binary, y[i], eta[i], Vector(), 1.0);
      const double f = logistic_cdf(eta[i]);
      resid[i] = f - y[i];
      weight[i] = f * (1.0 - f);
    }
    if (g) {
      g->resize(k + 1);
      (*g)[0] = resid.sum();
      g->tail(k) = x.transpose() * resid;
      h->resize(k + 1, k + 1);
      (*h)(0, 0) = weight.sum();
      Vector xw = x.transpose() * weight;
      h->block(1, 0, k, 1) = xw;
      h->block(0, 1, 1, k) = xw.transpose();
      h->block(1, 1, k, k) = x.transpose() * weight.asDiagonal() * x;
    }
    return value;
  };
  SeparateFit out;
  out.family = Family::Binary;
  damped_newton(w, obj, options, out);
  out.intercept = w[0];
  out.slopes = w.tail(k);
  out.n_parameters = static_cast<int>(k) + 1;
  const double biggest = k > 0 ? out.slopes.cwiseAbs().maxCoeff() : 0.0;
  out.separation = !out.converged || biggest > options.separation_bound;
  return out;
}

SeparateFit fit_proportional_odds(const Matrix& x, const Vector& y, int n_categories, const NewtonOptions& options) {
  const Index n = x.rows();
  const Index k = x.cols();
  const int C = n_categories;
  if (y.size() != n) throw ContractError("fit_proportional_odds: length mismatch");
  if (C < 2) throw ContractError("fit_proportional_odds: need at least two categories");
  Vector t0 = null_thresholds(y, C);  // throws on empty categories
  Vector w = Vector::Zero(k + C - 1);
  w[k] = t0[0];
  for (int c = 1; c < C - 1; ++c) w[k + c] = std::log(t0[c] - t0[c - 1]);

  auto density = [](double z) {
    const double f = logistic_cdf(z);
    return f * (1.0 - f);
  };
  auto obj = [&](const Vector& par, Vector* g, Matrix* h) {
    const Vector beta = par.head(k);
    const Vector gamma = par.tail(C - 1);
    const Vector t = thresholds_from_gaps(gamma);
    if (!t.allFinite()) return std::numeric_limits<double>::infinity();
    const Vector eta = x * beta;
    double value = 0.0;
    Vector gu;
    Matrix hu;
    if (g) {
      gu = Vector::Zero(k + C - 1);
      hu = Matrix::Zero(k + C - 1, k + C - 1);
    }
    for (Index i = 0; i < n; ++i) {
      const int yi = static_cast<int>(y[i]);
      value += cell_nll(Family::Ordinal, yi, eta[i], t, 1.0);
      if (!g) continue;
      const double p = std::max(ordinal_category_prob(yi, eta[i], t), kProbFloor);
      const bool has_a = yi > 1;
      const bool has_b = yi < C;
      const double a = has_a ? t[yi - 2] - eta[i] : 0.0;
      const double b = has_b ? t[yi - 1] - eta[i] : 0.0;
      const double fa = has_a ? density(a) : 0.0;
      const double fb = has_b ? density(b) : 0.0;
      const double dfa = has_a ? fa * (1.0 - 2.0 * logistic_cdf(a)) : 0.0;
      const double dfb = has_b ? fb * (1.0 - 2.0 * logistic_cdf(b)) : 0.0;
      const double la = fa / p, lb = -fb / p;
      const double haa = dfa / p + la * la;
      const double hbb = -dfb / p + lb * lb;
      const double hab = -fa * fb / (p * p);
      const auto xi = x.row(i).transpose();
      gu.head(k) -= (la + lb) * xi;
      hu.topLeftCorner(k, k) += (haa + 2.0 * hab + hbb) * xi * xi.transpose();
      if (has_a) {
        const Index ja = k + yi - 2;
        gu[ja] += la;
        hu(ja, ja) += haa;
        hu.block(0, ja, k, 1) -= (haa + hab) * xi;
      }
      if (has_b) {
        const Index jb = k + yi - 1;
        gu[jb] += lb;
        hu(jb, jb) += hbb;
        hu.block(0, jb, k, 1) -= (hab + hbb) * xi;
      }
      if (has_a && has_b) hu(k + yi - 2, k + yi - 1) += hab;
    }
    if (g) {
      hu = hu.selfadjointView<Eigen::Upper>();
      Matrix jac = Matrix::Identity(k + C - 1, k + C - 1);
      for (int c = 0; c < C - 1; ++c) {
        jac(k + c, k) = 1.0;
        for (int j = 1; j <= c; ++j) jac(k + c, k + j) = std::exp(gamma[j]);
      }
      *g = jac.transpose() * gu;
      *h = jac.transpose() * hu * jac;
      Matrix curvature = Matrix::Zero(k + C - 1, k + C - 1);
      for (int j = 1; j < C - 1; ++j) {
        double s = 0.0;
        for (int c = j; c < C - 1; ++c) s += gu[k + c];
        curvature(k + j, k + j) = std::exp(gamma[j]) * s;
      }
      Matrix full = *h + curvature;
      if (Eigen::LLT<Matrix>(full).info() == Eigen::Success) *h = full;
    }
    return value;
  };
  SeparateFit out;
  out.family = Family::Ordinal;
  damped_newton(w, obj, options, out);
  out.slopes = w.head(k);
  out.thresholds = thresholds_from_gaps(w.tail(C - 1));
  out.n_parameters = static_cast<int>(k) + C - 1;
  const double biggest = k > 0 ? out.slopes.cwiseAbs().maxCoeff() : 0.0;
  out.separation = !out.converged || biggest > options.separation_bound;
  return out;
}

SeparateFit fit_linear(const Matrix& x, const Vector& y, bool count_sigma2) {
  const Index n = x.rows();
  const Index k = x.cols();
  Matrix design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = x;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < k + 1) throw NumericalError("fit_linear: design is rank deficient");
  Vector coef = qr.solve(y);
  Vector fitted = design * coef;
  SeparateFit out;
  out.family = Family::Numeric;
  out.intercept = coef[0];
  out.slopes = coef.tail(k);
  out.sigma2 = (y - fitted).squaredNorm() / static_cast<double>(n);
  if (!(out.sigma2 > 0.0)) throw NumericalError("fit_linear: zero residual variance");
  for (Index i = 0; i < n; ++i) out.nll += cell_nll(Family::Numeric, y[i], fitted[i], Vector(), out.sigma2);
  out.n_parameters = static_cast<int>(k) + 1 + (count_sigma2 ? 1 : 0);
  out.converged = true;
  return out;
}

Matrix SeparateFits::coefficient_table() const {
  Matrix out(static_cast<Index>(columns.size()), static_cast<Index>(fits.size()));
  for (std::size_t r = 0; r < fits.size(); ++r) out.col(static_cast<Index>(r)) = fits[r].slopes;
  return out;
}

SeparateFits fit_separate(const Dataset& data, bool count_sigma2, const NewtonOptions& options) {
  DummyDesign d = dummy_design(data);
  SeparateFits out;
  out.columns = d.columns;
  const ResponseModel model = response_model(data);
  out.fits.resize(static_cast<std::size_t>(model.r()));
  for (Index r = 0; r < model.r(); ++r) {
    const std::size_t rr = static_cast<std::size_t>(r);
    SeparateFit f;
    switch (model.family[rr]) {
      case Family::Numeric: f = fit_linear(d.x, model.y.col(r), count_sigma2); break;
      case Family::Binary: f = fit_binary_logistic(d.x, model.y.col(r), options); break;
      case Family::Ordinal: f = fit_proportional_odds(d.x, model.y.col(r), model.n_categories[rr], options); break;
    }
    f.response = model.names[rr];
    out.deviance += f.deviance();
    out.n_parameters += f.n_parameters;
    out.fits[rr] = std::move(f);
  }
  return out;
}

int separate_parameter_count(const VariableSchema& schema, bool count_sigma2) {
  int slopes = 0;
  for (std::size_t j : schema.predictors()) slopes += schema[j].is_discrete() ? schema[j].n_categories() - 1 : 1;
  int k = 0;
  for (std::size_t j : schema.responses()) {
    const auto& v = schema[j];
    k += slopes;
    if (v.level == Level::Ordinal) k += v.n_categories() - 1;
    else k += 1 + (v.level == Level::Numeric && count_sigma2 ? 1 : 0);
  }
  return k;
}

CriteriaRow criteria_from_deviance(const std::string& model, double deviance, int k, Index n) {
  return {model, deviance, k, deviance + 2.0 * k, deviance + std::log(static_cast<double>(n)) * k};
}

ComparisonReport compare(const Dataset& data, const FitResult& reduced, const CompareOptions& options) {
  ComparisonReport rep;
  const SeparateFits full = fit_separate(data, options.count_sigma2, options.newton);
  rep.separate = criteria_from_deviance("separate", full.deviance, full.n_parameters, data.n());
  rep.reduced = criteria_from_deviance("gmr3", 2.0 * reduced.nll(),
                                       count_parameters(data.schema(), reduced.params.rank, options.count_sigma2),
                                       data.n());
  for (const auto& f : full.fits)
    if (f.separation) rep.separated.push_back(f.response);

  const ContrastTable contrasts = category_contrasts(reduced.params);
  if (contrasts.rows != full.columns) throw ContractError("compare: contrast rows differ from the dummy design");
  rep.rows = full.columns;
  rep.columns = contrasts.columns;
  rep.separate_coefficients = full.coefficient_table();
  rep.reduced_contrasts = contrasts.values;

  auto indices = balanced_bootstrap_indices(data.n(), options.replicates, derive_seed(options.seed, "bootstrap"));

  std::vector<std::optional<Matrix>> sep(indices.size());
  parallel_jobs(indices.size(), [&](std::size_t b) {
    try {
      sep[b] = fit_separate(data.subset(indices[b]), options.count_sigma2, options.newton).coefficient_table();
    } catch (const Error&) {
    }
  });
  std::vector<Matrix> sep_draws;
  for (auto& s : sep)
    if (s) sep_draws.push_back(std::move(*s));
  rep.separate_failures = static_cast<int>(indices.size() - sep_draws.size());

  BootstrapOptions bo;
  bo.replicates = options.replicates;
  bo.seed = options.seed;
  bo.fit = options.fit;
  BootstrapReplicates reps = run_bootstrap(data, reduced, std::move(indices), bo);
  rep.reduced_failures = static_cast<int>(reps.failures.size());
  std::vector<Matrix> red_draws;
  for (const auto& p : reps.params) red_draws.push_back(category_contrasts(p).values);

  rep.separate_se = bootstrap_se(sep_draws);
  rep.reduced_se = bootstrap_se(red_draws);
  return rep;
}

}  // namespace gmr3
