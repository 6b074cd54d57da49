#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gmr3/error.hpp"
#include "gmr3/inference.hpp"
#include "gmr3/rng.hpp"
#include "gmr3/simulation.hpp"
#include "support.hpp"

using namespace gmr3;
namespace ts = testing_support;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Matrix rotation(double angle) {
  Matrix r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

Matrix cloud(Rng& g, Index k, double cx, double cy, double sx, double sy, double rho) {
  Matrix pts(k, 2);
  for (Index i = 0; i < k; ++i) {
    const double a = g.normal(), b = g.normal();
    pts(i, 0) = cx + sx * a;
    pts(i, 1) = cy + sy * (rho * a + std::sqrt(1.0 - rho * rho) * b);
  }
  return pts;
}

/// Even-odd ray casting of the origin against the ellipse boundary traced as a
/// fine polygon from the sample mean and covariance.
bool origin_inside_polygon(const Matrix& pts, double level) {
  const Eigen::Vector2d c = pts.colwise().mean().transpose();
  Matrix centred = pts.rowwise() - c.transpose();
  Eigen::Matrix2d cov = centred.transpose() * centred / static_cast<double>(pts.rows() - 1);
  Eigen::Matrix2d l = cov.llt().matrixL();
  const double radius = std::sqrt(-2.0 * std::log(1.0 - level));
  const int m = 20000;
  std::vector<Eigen::Vector2d> poly;
  for (int k = 0; k < m; ++k) {
    const double a = 2.0 * std::numbers::pi * k / m;
    poly.push_back(c + radius * l * Eigen::Vector2d(std::cos(a), std::sin(a)));
  }
  bool inside = false;
  for (int i = 0, j = m - 1; i < m; j = i++) {
    const auto& p = poly[static_cast<std::size_t>(i)];
    const auto& q = poly[static_cast<std::size_t>(j)];
    if ((p.y() > 0.0) != (q.y() > 0.0) && 0.0 < (q.x() - p.x()) * (0.0 - p.y()) / (q.y() - p.y()) + p.x())
      inside = !inside;
  }
  return inside;
}

/// Quantile of chi-square with one degree of freedom by bisection on erf.
double chi2_1_quantile(double p) {
  double lo = 0.0, hi = 50.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (std::erf(std::sqrt(mid / 2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("balanced_bootstrap_indices: exact counts and determinism") {
  auto small = balanced_bootstrap_indices(3, 2, 1);
  REQUIRE(small.size() == 2);
  std::vector<int> count(3, 0);
  for (const auto& s : small) {
    CHECK(s.size() == 3);
    for (Index i : s) ++count[static_cast<std::size_t>(i)];
  }
  CHECK(count == std::vector<int>{2, 2, 2});

  auto big = balanced_bootstrap_indices(100, 1000, 5);
  std::vector<int> total(100, 0);
  for (const auto& s : big) {
    CHECK(s.size() == 100);
    for (Index i : s) ++total[static_cast<std::size_t>(i)];
  }
  CHECK(std::all_of(total.begin(), total.end(), [](int c) { return c == 1000; }));
  CHECK(big == balanced_bootstrap_indices(100, 1000, 5));
  CHECK(big != balanced_bootstrap_indices(100, 1000, 6));
  CHECK_THROWS_AS(balanced_bootstrap_indices(0, 3, 1), ContractError);
}

TEST_CASE("align_replicate: signs, rotation and invariance") {
  Rng g(1);
  Eigen::HouseholderQR<Matrix> qr(Matrix::NullaryExpr(6, 2, [&] { return g.normal(); }));
  Matrix v = qr.householderQ() * Matrix::Identity(6, 2);
  Matrix b = Matrix::NullaryExpr(4, 2, [&] { return g.normal(); });
  Identified ref{b, v};

  Matrix flip = Eigen::Vector2d(-1.0, 1.0).asDiagonal();
  Identified flipped = align_replicate(ref, {b * flip, v * flip});
  CHECK(flipped.b == b);
  CHECK(flipped.v == v);

  Matrix r = rotation(std::numbers::pi / 4.0);
  Identified back = align_replicate(ref, {b * r, v * r});
  CHECK(max_abs(back.b - b) < 1e-10);
  CHECK(max_abs(back.v - v) < 1e-10);

  for (int k = 0; k < 20; ++k) {
    Matrix rr = rotation(g.uniform(0.0, 6.28)) * (k % 2 ? flip : Matrix::Identity(2, 2));
    Identified cand{(b + 0.1 * Matrix::NullaryExpr(4, 2, [&] { return g.normal(); })) * rr, v * rr};
    Identified a = align_replicate(ref, cand);
    CHECK(max_abs(a.b * a.v.transpose() - cand.b * cand.v.transpose()) < 1e-10);
    CHECK(max_abs(a.v.transpose() * a.v - Matrix::Identity(2, 2)) < 1e-10);
  }
}

TEST_CASE("align_params: a sign-flipped quantification is restored") {
  ts::Instance inst = ts::random_instance(3);
  FitResult f = fit(inst.data, inst.rank);
  ModelParams cand = f.params;
  std::size_t discrete = cand.transforms.size();
  for (std::size_t p = 0; p < cand.transforms.size(); ++p)
    if (!cand.transforms[p].is_numeric()) discrete = p;
  REQUIRE(discrete < cand.transforms.size());
  cand.transforms[discrete].quantification.scores *= -1.0;
  cand.b.row(static_cast<Index>(discrete)) *= -1.0;
  ModelParams a = align_params(f.params, cand);
  CHECK(max_abs(a.transforms[discrete].quantification.scores - f.params.transforms[discrete].quantification.scores) == 0.0);
  CHECK(max_abs(a.b - f.params.b) < 1e-10);
  Matrix phi = apply_scaling(inst.data, f.params.transforms);
  CHECK(max_abs(canonical(a, phi) - canonical(f.params, phi)) < 1e-10);
}

TEST_CASE("run_bootstrap: identity resamples reproduce the reference") {
  SimData sim = generate_survey(300, 11);
  FitOptions fo;
  fo.tolerance = 1e-10;
  fo.max_iterations = 5000;
  FitResult ref = fit(sim.data, 2, fo);
  REQUIRE(ref.converged);
  std::vector<Index> id(static_cast<std::size_t>(sim.data.n()));
  std::iota(id.begin(), id.end(), 0);
  BootstrapOptions bo;
  bo.fit = fo;
  BootstrapReplicates reps = run_bootstrap(sim.data, ref, {id, id, id}, bo);
  REQUIRE(reps.params.size() == 3);
  for (const auto& p : reps.params) {
    CHECK(max_abs(p.b - ref.params.b) < 1e-6);
    CHECK(max_abs(p.v - ref.params.v) < 1e-6);
    CHECK(max_abs(p.m - ref.params.m) < 1e-6);
  }
}

TEST_CASE("run_bootstrap: aligned replicates stay orthonormal and deterministic") {
  SimData sim = generate_survey(300, 12);
  FitResult ref = fit(sim.data, 2);
  BootstrapOptions bo;
  bo.replicates = 20;
  bo.seed = 99;
  BootstrapReplicates a = run_bootstrap(sim.data, ref, bo);
  BootstrapReplicates b = run_bootstrap(sim.data, ref, bo);
  CHECK(a.indices == b.indices);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t k = 0; k < a.params.size(); ++k) {
    CHECK(a.params[k].b == b.params[k].b);
    CHECK(max_abs(a.params[k].v.transpose() * a.params[k].v - Matrix::Identity(2, 2)) < 1e-8);
  }
  Matrix draws = weight_draws(a, 0);
  CHECK(draws.rows() == static_cast<Index>(a.params.size()));
  CHECK(draws.cols() == 2);
}

TEST_CASE("run_bootstrap: too many failed replicates is an error") {
  // a rare binary response makes many resamples lose a category
  Rng g(13);
  const Index n = 40;
  std::vector<VariableSpec> specs{{"x", Role::Predictor, Level::Numeric, {}},
                                  {"y", Role::Response, Level::Binary, {"0", "1"}},
                                  {"z", Role::Response, Level::Numeric, {}}};
  Vector x(n), y = Vector::Zero(n), z(n);
  for (Index i = 0; i < n; ++i) x[i] = g.normal(), z[i] = x[i] + g.normal();
  y[0] = 1.0;
  y[1] = 1.0;
  Dataset d(VariableSchema(specs), {x, y, z});
  FitResult ref = fit(d, 1);
  REQUIRE(ref.converged);
  BootstrapOptions bo;
  bo.replicates = 40;
  bo.seed = 1;
  CHECK_THROWS_AS(run_bootstrap(d, ref, bo), ConvergenceError);
  bo.max_failure_rate = 1.0;
  BootstrapReplicates reps = run_bootstrap(d, ref, bo);
  CHECK(!reps.failures.empty());
  CHECK(reps.params.size() + reps.failures.size() == 40);
}

TEST_CASE("run_bootstrap: non-converged reference is refused") {
  ts::Instance inst = ts::random_instance(14);
  FitOptions o;
  o.max_iterations = 1;
  o.tolerance = 1e-15;
  FitResult f = fit(inst.data, inst.rank, o);
  CHECK_THROWS_AS(run_bootstrap(inst.data, f, BootstrapOptions{}), ContractError);
}

TEST_CASE("chi_square_quantile against closed forms") {
  CHECK(chi_square_quantile(0.95, 2) == doctest::Approx(-2.0 * std::log(0.05)).epsilon(1e-12));
  CHECK(std::abs(chi_square_quantile(0.95, 2) - 5.9915) < 5e-5);
  for (double p : {0.5, 0.9, 0.95, 0.99}) CHECK(chi_square_quantile(p, 1) == doctest::Approx(chi2_1_quantile(p)).epsilon(1e-10));
  CHECK_THROWS_AS(chi_square_quantile(1.0, 2), ContractError);
}

TEST_CASE("confidence_region: constructed cases") {
  Rng g(15);
  ConfidenceRegion tight = confidence_region(cloud(g, 200, 1.0, 1.0, 0.01, 0.01, 0.0));
  CHECK_FALSE(tight.contains_origin);
  CHECK_FALSE(tight.degenerate);

  Matrix sym(200, 2);
  sym.topRows(100) = cloud(g, 100, 0.0, 0.0, 1.0, 1.0, 0.3);
  sym.bottomRows(100) = -sym.topRows(100);
  ConfidenceRegion centred = confidence_region(sym);
  CHECK(centred.contains_origin);
  CHECK(centred.distance2 < 1e-20);
  CHECK(centred.quantile == doctest::Approx(5.991464547).epsilon(1e-9));
  CHECK(centred.covariance.isApprox(centred.covariance.transpose()));

  CHECK_THROWS_AS(confidence_region(Matrix::Zero(9, 2)), ContractError);
}

TEST_CASE("confidence_region agrees with a geometric point-in-ellipse test") {
  Rng g(16);
  struct Case {
    double cx, cy, sx, sy, rho;
  };
  const Case cases[] = {{0.5, 0.2, 0.3, 0.2, 0.0},
                        {0.6, 0.6, 0.2, 0.2, 0.9},
                        {0.6, -0.6, 0.2, 0.2, 0.9},
                        {2.0, 0.0, 0.8, 0.1, -0.5},
                        {0.1, 0.1, 0.05, 0.05, 0.2}};
  int inside = 0;
  for (const Case& c : cases) {
    Matrix pts = cloud(g, 300, c.cx, c.cy, c.sx, c.sy, c.rho);
    ConfidenceRegion r = confidence_region(pts);
    CHECK(r.contains_origin == origin_inside_polygon(pts, 0.95));
    inside += r.contains_origin ? 1 : 0;
  }
  // the cases are built to exercise both outcomes
  CHECK(inside > 0);
  CHECK(inside < 5);
}

TEST_CASE("confidence_region: singular covariance uses the principal marginal") {
  Rng g(17);
  Matrix line(50, 2);
  for (Index i = 0; i < 50; ++i) {
    const double a = 0.1 + 0.3 * g.normal();
    line(i, 0) = a;
    line(i, 1) = 2.0 * a;
  }
  ConfidenceRegion on = confidence_region(line);
  CHECK(on.degenerate);
  CHECK(on.contains_origin);
  Matrix shifted = line;
  shifted.col(1).array() += 1.0;
  ConfidenceRegion off = confidence_region(shifted);
  CHECK(off.degenerate);
  CHECK_FALSE(off.contains_origin);
  ConfidenceRegion point = confidence_region(Matrix::Ones(12, 2));
  CHECK(point.degenerate);
  CHECK_FALSE(point.contains_origin);
}

TEST_CASE("confidence_region: other ranks use chi-square with S degrees of freedom") {
  Rng g(18);
  Matrix pts(100, 3);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = g.normal();
  ConfidenceRegion r = confidence_region(pts);
  CHECK(r.quantile == doctest::Approx(chi_square_quantile(0.95, 3)));
  Matrix one(100, 1);
  for (Index i = 0; i < 100; ++i) one(i, 0) = 5.0 + g.normal() * 0.1;
  CHECK_FALSE(confidence_region(one).contains_origin);
}

TEST_CASE("implied_coefficients: published row and degenerate cases") {
  ModelParams p = ts::published_model();
  Matrix bv = implied_coefficients(p.b, p.v);
  const double row_a[] = {-0.16, -0.27, -0.05, 0.06, 0.17, 0.50, 0.23};
  for (int r = 0; r < 7; ++r) CHECK(std::abs(bv(0, r) - row_a[r]) < 1e-9);
  CHECK(max_abs(implied_coefficients(Matrix::Zero(3, 2), p.v.leftCols(2))) == 0.0);
  Rng g(19);
  Matrix b = Matrix::NullaryExpr(4, 3, [&] { return g.normal(); });
  CHECK(implied_coefficients(b, Matrix::Identity(3, 3)) == b);
}

TEST_CASE("category_contrasts: published table") {
  ContrastTable t = category_contrasts(ts::published_model());
  REQUIRE(t.rows.size() == 1 + 2 + 1 + 2 + 8);
  CHECK(t.rows.front() == "A");
  const auto at = [&](const std::string& name) {
    auto it = std::find(t.rows.begin(), t.rows.end(), name);
    REQUIRE(it != t.rows.end());
    return t.values.row(static_cast<Index>(it - t.rows.begin()));
  };
  const double pa3[] = {-1.55, -0.68, -1.45, -0.53, -0.92, 0.26, -0.75};
  Vector row = at("PA3").transpose();
  for (int r = 0; r < 7; ++r) CHECK(std::abs(row[r] - pa3[r]) < 0.02);
  CHECK(at("E2").cwiseAbs().maxCoeff() == 0.0);
  // monotone quantification gives contrasts monotone in c
  for (int r = 0; r < 7; ++r) {
    double prev = 0.0;
    for (int c = 2; c <= 9; ++c) {
      const double cur = std::abs(at("E" + std::to_string(c))[r]);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("category_contrasts equal differences in canonical values") {
  ts::Instance inst = ts::random_instance(21);
  FitResult f = fit(inst.data, inst.rank);
  ContrastTable t = category_contrasts(f.params);
  std::size_t row = 0;
  const Index P = static_cast<Index>(f.params.transforms.size());
  for (Index p = 0; p < P; ++p) {
    const auto& tr = f.params.transforms[static_cast<std::size_t>(p)];
    if (tr.is_numeric()) {
      Matrix phi0 = Matrix::Zero(1, P), phi1 = Matrix::Zero(1, P);
      phi1(0, p) = 1.0;
      CHECK(max_abs(canonical(f.params, phi1) - canonical(f.params, phi0) - t.values.row(static_cast<Index>(row))) < 1e-12);
      ++row;
      continue;
    }
    for (Index c = 1; c < tr.quantification.scores.size(); ++c, ++row) {
      Matrix phi1 = Matrix::Zero(1, P), phic = Matrix::Zero(1, P);
      phi1(0, p) = tr.quantification.scores[0];
      phic(0, p) = tr.quantification.scores[c];
      CHECK(max_abs(canonical(f.params, phic) - canonical(f.params, phi1) - t.values.row(static_cast<Index>(row))) < 1e-12);
    }
  }
  CHECK(row == t.rows.size());
}

TEST_CASE("category_contrasts: binary predictor at full rank matches a dummy-coded fit") {
  // With S = R and a binary predictor the model is an unrestricted regression
  // on the indicator, so the contrast is the dummy coefficient.
  Rng g(22);
  const Index n = 200;
  std::vector<VariableSpec> specs{{"d", Role::Predictor, Level::Binary, {"no", "yes"}},
                                  {"x", Role::Predictor, Level::Numeric, {}},
                                  {"y1", Role::Response, Level::Numeric, {}},
                                  {"y2", Role::Response, Level::Numeric, {}}};
  Vector dcol(n), x(n), y1(n), y2(n);
  for (Index i = 0; i < n; ++i) {
    dcol[i] = 1.0 + static_cast<double>(i % 2);
    x[i] = g.normal();
    y1[i] = 0.8 * (dcol[i] - 1.0) + 0.3 * x[i] + g.normal();
    y2[i] = -0.5 * (dcol[i] - 1.0) + 0.6 * x[i] + g.normal();
  }
  Dataset data(VariableSchema(specs), {dcol, x, y1, y2});
  FitOptions o;
  o.tolerance = 1e-13;
  o.max_iterations = 20000;
  FitResult f = fit(data, 2, o);
  ContrastTable t = category_contrasts(f.params);
  REQUIRE(t.rows[0] == "d2");
  Matrix design(n, 3);
  design.col(0).setOnes();
  design.col(1) = (dcol.array() - 1.0).matrix();
  design.col(2) = ts::standardized(x);
  Matrix y(n, 2);
  y << y1, y2;
  Matrix ols = design.colPivHouseholderQr().solve(y);
  CHECK(max_abs(t.values.row(0) - ols.row(1)) < 1e-6);
  CHECK(max_abs(t.values.row(1) - ols.row(2)) < 1e-6);
}

TEST_CASE("bootstrap_se") {
  Matrix a = Matrix::Constant(2, 3, 1.5);
  CHECK(max_abs(bootstrap_se({a, a, a})) == 0.0);
  const double eps = 0.01;
  Matrix b = a;
  b(1, 2) += 2.0 * eps;
  Matrix se = bootstrap_se({a, b});
  CHECK(se(1, 2) == doctest::Approx(eps * std::sqrt(2.0)).epsilon(1e-10));
  CHECK(se(0, 0) == 0.0);
  CHECK_THROWS_AS(bootstrap_se({a}), ContractError);
}
