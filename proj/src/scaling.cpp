#include "gmr3/scaling.hpp"

#include <cmath>

#include "gmr3/error.hpp"

namespace gmr3 {

std::string to_string(Direction d) { return d == Direction::Increasing ? "increasing" : "decreasing"; }

Direction parse_direction(const std::string& text) {
  if (text == "increasing") return Direction::Increasing;
  if (text == "decreasing") return Direction::Decreasing;
  throw DataError("unknown direction '" + text + "'");
}

Vector weighted_monotone_regression(const Vector& values, const Vector& weights, Direction direction) {
  const Index n = values.size();
  if (weights.size() != n) throw ContractError("weighted_monotone_regression: length mismatch");
  for (Index i = 0; i < n; ++i)
    if (!(weights[i] > 0.0)) throw ContractError("weighted_monotone_regression: weights must be positive");
  if (n == 0) return values;

  // Decreasing fits are increasing fits of the negated values.
  const double sign = direction == Direction::Increasing ? 1.0 : -1.0;
  struct Block {
    double mean;
    double weight;
    Index size;
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    blocks.push_back({sign * values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      double w = prev.weight + top.weight;
      prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / w;
      prev.weight = w;
      prev.size += top.size;
    }
  }
  Vector fitted(n);
  Index k = 0;
  for (const auto& b : blocks)
    for (Index s = 0; s < b.size; ++s) fitted[k++] = sign * b.mean;
  return fitted;
}

Vector rescale_scores(const Vector& scores, const Vector& counts) {
  const double total = counts.sum();
  const double mean = counts.dot(scores) / total;
  Vector centered = (scores.array() - mean).matrix();
  const double var = counts.dot(centered.cwiseProduct(centered)) / total;
  if (!(var > 1e-24)) throw NumericalError("degenerate quantification (zero variance after rescaling)");
  return centered / std::sqrt(var);
}

Quantification quantify(const Vector& unconstrained, const Vector& counts, Level level) {
  Quantification q;
  q.level = level;
  if (level == Level::Ordinal) {
    Vector inc = weighted_monotone_regression(unconstrained, counts, Direction::Increasing);
    Vector dec = weighted_monotone_regression(unconstrained, counts, Direction::Decreasing);
    double sse_inc = counts.dot((unconstrained - inc).cwiseAbs2());
    double sse_dec = counts.dot((unconstrained - dec).cwiseAbs2());
    if (sse_dec < sse_inc) {
      q.direction = Direction::Decreasing;
      q.scores = rescale_scores(dec, counts);
    } else {
      q.direction = Direction::Increasing;
      q.scores = rescale_scores(inc, counts);
    }
  } else if (level == Level::Binary || level == Level::Nominal) {
    q.scores = rescale_scores(unconstrained, counts);
  } else {
    throw ContractError("quantify: numeric predictors are not optimally scaled");
  }
  return q;
}

Quantification update_quantification(const Matrix& z_tilde, const Vector& a_p, const IndicatorMatrix& g_p,
                                     Level level) {
  if (z_tilde.cols() != a_p.size() || z_tilde.rows() != g_p.g.rows())
    throw ContractError("update_quantification: shape mismatch");
  const double aa = a_p.squaredNorm();
  if (!(aa > 0.0)) throw NumericalError("update_quantification: a_p = 0 leaves the direction undetermined");
  // Q = a_p (x) G_p, so Q'Q = a'a G'G and Q'vec(Z) = G' Z a.
  Vector h = g_p.g.transpose() * (z_tilde * a_p);
  Vector w = h.cwiseQuotient(g_p.category_counts) / aa;
  return quantify(w, g_p.category_counts, level);
}

namespace {

PredictorTransform numeric_transform(const VariableSpec& v, const Standardized& s) {
  PredictorTransform t;
  t.name = v.name;
  t.level = Level::Numeric;
  t.mean = s.mean;
  t.sd = s.sd;
  return t;
}

}  // namespace

ScaledPredictors initial_scaling(const Dataset& data) {
  const auto preds = data.schema().predictors();
  ScaledPredictors out;
  out.phi.resize(data.n(), static_cast<Index>(preds.size()));
  for (std::size_t p = 0; p < preds.size(); ++p) {
    const auto& v = data.schema()[preds[p]];
    const Vector& x = data.column(preds[p]);
    if (!v.is_discrete()) {
      Standardized s = standardize(x);
      out.phi.col(static_cast<Index>(p)) = s.values;
      out.transforms.push_back(numeric_transform(v, s));
      out.codes.emplace_back();
      out.counts.emplace_back();
      continue;
    }
    IndicatorMatrix g = build_indicator(x, v.n_categories());
    Vector raw = Vector::LinSpaced(v.n_categories(), 1.0, static_cast<double>(v.n_categories()));
    PredictorTransform t;
    t.name = v.name;
    t.level = v.level;
    t.categories = v.categories;
    t.quantification.level = v.level;
    t.quantification.scores = rescale_scores(raw, g.category_counts);
    out.phi.col(static_cast<Index>(p)) = apply_scaling(x, t);
    out.transforms.push_back(std::move(t));
    out.codes.push_back(x);
    out.counts.push_back(g.category_counts);
  }
  return out;
}

ScaledPredictors scaling_with_scores(const Dataset& data, const std::vector<PredictorTransform>& start) {
  ScaledPredictors out = initial_scaling(data);
  if (start.size() != out.transforms.size())
    throw ContractError("scaling_with_scores: predictor count mismatch");
  for (std::size_t p = 0; p < start.size(); ++p) {
    auto& t = out.transforms[p];
    if (t.is_numeric()) continue;
    if (start[p].quantification.scores.size() != t.quantification.scores.size())
      throw ContractError("scaling_with_scores: category count mismatch for '" + t.name + "'");
    t.quantification = start[p].quantification;
    try {
      t.quantification.scores = rescale_scores(start[p].quantification.scores, out.counts[p]);
    } catch (const NumericalError&) {
      // keep the integer-code start when the warm scores collapse on this sample
      continue;
    }
    out.phi.col(static_cast<Index>(p)) = apply_scaling(out.codes[p], t);
  }
  return out;
}

Vector apply_scaling(const Vector& raw, const PredictorTransform& transform, bool neutral_unknown) {
  if (transform.is_numeric()) return ((raw.array() - transform.mean) / transform.sd).matrix();
  const Vector& w = transform.quantification.scores;
  Vector out(raw.size());
  for (Index i = 0; i < raw.size(); ++i) {
    int c = static_cast<int>(raw[i]);
    if (c < 1 || c > w.size()) {
      if (neutral_unknown) {
        out[i] = 0.0;
        continue;
      }
      throw DataError("unseen category for predictor '" + transform.name + "' at row " + std::to_string(i + 1));
    }
    out[i] = w[c - 1];
  }
  return out;
}

Matrix apply_scaling(const Dataset& data, const std::vector<PredictorTransform>& transforms,
                     bool neutral_unknown) {
  const auto preds = data.schema().predictors();
  if (preds.size() != transforms.size()) throw ContractError("apply_scaling: predictor count mismatch");
  Matrix phi(data.n(), static_cast<Index>(preds.size()));
  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (data.schema()[preds[p]].name != transforms[p].name)
      throw DataError("apply_scaling: predictor '" + data.schema()[preds[p]].name +
                      "' does not match fitted '" + transforms[p].name + "'");
    phi.col(static_cast<Index>(p)) = apply_scaling(data.column(preds[p]), transforms[p], neutral_unknown);
  }
  return phi;
}

}  // namespace gmr3
