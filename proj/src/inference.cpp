#include "gmr3/inference.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>

#include "gmr3/error.hpp"
#include "gmr3/parallel.hpp"
#include "gmr3/rng.hpp"

namespace gmr3 {

std::vector<std::vector<Index>> balanced_bootstrap_indices(Index n, int b_total, std::uint64_t seed) {
  if (n < 1 || b_total < 1) throw ContractError("balanced bootstrap needs N >= 1 and B_total >= 1");
  std::vector<Index> pool(static_cast<std::size_t>(n) * static_cast<std::size_t>(b_total));
  for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = static_cast<Index>(k % static_cast<std::size_t>(n));
  Rng rng(seed);
  rng.shuffle(pool.begin(), pool.end());
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(b_total));
  for (int b = 0; b < b_total; ++b) {
    auto first = pool.begin() + static_cast<long>(b) * n;
    out[static_cast<std::size_t>(b)].assign(first, first + n);
  }
  return out;
}

Matrix procrustes_rotation(const Matrix& v_ref, const Matrix& v_cand) {
  if (v_ref.cols() != v_cand.cols() || v_ref.rows() != v_cand.rows())
    throw ContractError("procrustes_rotation: shape mismatch");
  Eigen::JacobiSVD<Matrix> svd(v_cand.transpose() * v_ref, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Identified align_replicate(const Identified& reference, const Identified& candidate) {
  Matrix t = procrustes_rotation(reference.v, candidate.v);
  return {candidate.b * t, candidate.v * t};
}

ModelParams align_params(const ModelParams& reference, const ModelParams& candidate) {
  if (reference.transforms.size() != candidate.transforms.size() || reference.rank != candidate.rank)
    throw ContractError("align_params: models differ in shape");
  ModelParams out = candidate;
  for (std::size_t p = 0; p < out.transforms.size(); ++p) {
    auto& q = out.transforms[p].quantification;
    if (out.transforms[p].is_numeric()) continue;
    if (q.scores.dot(reference.transforms[p].quantification.scores) < 0.0) {
      q.scores = -q.scores;
      if (q.level == Level::Ordinal)
        q.direction = q.direction == Direction::Increasing ? Direction::Decreasing : Direction::Increasing;
      out.b.row(static_cast<Index>(p)) *= -1.0;
    }
  }
  Identified a = align_replicate({reference.b, reference.v}, {out.b, out.v});
  out.b = a.b;
  out.v = a.v;
  return out;
}

BootstrapReplicates run_bootstrap(const Dataset& data, const FitResult& reference, const BootstrapOptions& options) {
  return run_bootstrap(data, reference,
                       balanced_bootstrap_indices(data.n(), options.replicates, derive_seed(options.seed, "bootstrap")),
                       options);
}

BootstrapReplicates run_bootstrap(const Dataset& data, const FitResult& reference,
                                  std::vector<std::vector<Index>> indices, const BootstrapOptions& options) {
  if (!reference.converged) throw ContractError("bootstrap requires a converged reference fit");
  const std::size_t total = indices.size();
  std::vector<std::optional<ModelParams>> fits(total);
  std::vector<std::string> errors(total);
  FitOptions fo = options.fit;
  fo.warm_start = reference.params;
  const int rank = reference.params.rank;

  parallel_jobs(total, [&](std::size_t b) {
    try {
      Dataset sample = data.subset(indices[b]);
      FitResult f = fit(sample, rank, fo);
      if (!f.converged) {
        errors[b] = "replicate " + std::to_string(b) + ": no convergence in " + std::to_string(f.iterations) +
                    " iterations";
        return;
      }
      fits[b] = align_params(reference.params, f.params);
    } catch (const Error& e) {
      errors[b] = "replicate " + std::to_string(b) + ": " + e.what();
    }
  });

  BootstrapReplicates out;
  out.seed = options.seed;
  for (std::size_t b = 0; b < total; ++b) {
    if (fits[b]) {
      out.params.push_back(std::move(*fits[b]));
      out.replicate_ids.push_back(static_cast<int>(b));
    } else {
      out.failures.push_back(errors[b]);
    }
  }
  out.indices = std::move(indices);
  const double rate = total == 0 ? 0.0 : static_cast<double>(out.failures.size()) / static_cast<double>(total);
  if (rate > options.max_failure_rate) {
    std::string msg = "bootstrap: " + std::to_string(out.failures.size()) + " of " + std::to_string(total) +
                      " replicates failed";
    if (!out.failures.empty()) msg += "; first: " + out.failures.front();
    throw ConvergenceError(msg);
  }
  return out;
}

double chi_square_quantile(double p, int df) {
  if (!(p > 0.0 && p < 1.0) || df < 1) throw ContractError("chi_square_quantile: need 0 < p < 1 and df >= 1");
  return boost::math::quantile(boost::math::chi_squared(static_cast<double>(df)), p);
}

ConfidenceRegion confidence_region(const Matrix& points, double level) {
  const Index k = points.rows();
  const Index s = points.cols();
  if (k < 10) throw ContractError("confidence region needs at least 10 draws");
  if (s < 1) throw ContractError("confidence region needs at least one dimension");
  ConfidenceRegion out;
  out.level = level;
  out.center = points.colwise().mean().transpose();
  Matrix centered = points.rowwise() - out.center.transpose();
  out.covariance = centered.transpose() * centered / static_cast<double>(k - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.covariance);
  const Vector& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  const double rel = 1e-12;
  const Vector origin_offset = -out.center;
  if (top <= 0.0) {
    // all draws coincide
    out.degenerate = true;
    out.quantile = chi_square_quantile(level, 1);
    out.contains_origin = out.center.norm() == 0.0;
    out.distance2 = out.contains_origin ? 0.0 : std::numeric_limits<double>::infinity();
    return out;
  }
  if (lambda.minCoeff() > rel * top) {
    out.quantile = chi_square_quantile(level, static_cast<int>(s));
    out.distance2 = origin_offset.dot(out.covariance.ldlt().solve(origin_offset));
    out.contains_origin = out.distance2 <= out.quantile;
    return out;
  }
  // singular: test on the principal axis, and require the origin to lie in
  // the span of the draws
  out.degenerate = true;
  out.quantile = chi_square_quantile(level, 1);
  Vector axis = eig.eigenvectors().col(s - 1);
  const double along = axis.dot(origin_offset);
  const double off = (origin_offset - along * axis).norm();
  out.distance2 = along * along / top;
  const double scale = std::max(1.0, out.center.norm());
  out.contains_origin = out.distance2 <= out.quantile && off <= 1e-9 * scale;
  return out;
}

Matrix weight_draws(const BootstrapReplicates& reps, Index predictor) {
  if (reps.params.empty()) throw ContractError("weight_draws: no replicates");
  Matrix out(static_cast<Index>(reps.params.size()), reps.params.front().b.cols());
  for (std::size_t k = 0; k < reps.params.size(); ++k) out.row(static_cast<Index>(k)) = reps.params[k].b.row(predictor);
  return out;
}

Matrix implied_coefficients(const Matrix& b, const Matrix& v) {
  if (b.cols() != v.cols()) throw ContractError("implied_coefficients: B and V differ in rank");
  return b * v.transpose();
}

ContrastTable category_contrasts(const ModelParams& params) {
  ContrastTable out;
  out.columns = params.response_names;
  const Matrix bv = implied_coefficients(params.b, params.v);
  std::vector<Vector> rows;
  for (std::size_t p = 0; p < params.transforms.size(); ++p) {
    const auto& t = params.transforms[p];
    const Vector coef = bv.row(static_cast<Index>(p)).transpose();
    if (t.is_numeric()) {
      out.rows.push_back(t.name);
      rows.push_back(coef);
      continue;
    }
    const Vector& w = t.quantification.scores;
    for (Index c = 1; c < w.size(); ++c) {
      out.rows.push_back(t.name + std::to_string(c + 1));
      rows.push_back((w[c] - w[0]) * coef);
    }
  }
  out.values.resize(static_cast<Index>(rows.size()), bv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.values.row(static_cast<Index>(i)) = rows[i].transpose();
  return out;
}

Matrix bootstrap_se(const std::vector<Matrix>& draws) {
  if (draws.size() < 2) throw ContractError("bootstrap_se needs at least two replicates");
  const double k = static_cast<double>(draws.size());
  Matrix mean = Matrix::Zero(draws.front().rows(), draws.front().cols());
  for (const auto& d : draws) {
    if (d.rows() != mean.rows() || d.cols() != mean.cols()) throw ContractError("bootstrap_se: shape mismatch");
    mean += d;
  }
  mean /= k;
  Matrix ss = Matrix::Zero(mean.rows(), mean.cols());
  for (const auto& d : draws) ss += (d - mean).cwiseAbs2();
  return (ss / (k - 1.0)).cwiseSqrt();
}

}  // namespace gmr3
