#include "gmr3/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gmr3::kernels {

namespace {

const Vector kNoThresholds;

inline const Vector& thresholds_of(const CellGrid& g, Index r) {
  if (g.model->family[static_cast<std::size_t>(r)] != Family::Ordinal) return kNoThresholds;
  return (*g.thresholds)[static_cast<std::size_t>(r)];
}

inline double nll_at(const CellGrid& g, Index i, Index r) {
  return gmr3::cell_nll(g.model->family[static_cast<std::size_t>(r)], g.model->y(i, r), (*g.theta)(i, r),
                        thresholds_of(g, r), g.sigma2);
}

inline double z_at(const CellGrid& g, double kappa, Index i, Index r) {
  double th = (*g.theta)(i, r);
  double xi = gmr3::cell_score(g.model->family[static_cast<std::size_t>(r)], g.model->y(i, r), th,
                               thresholds_of(g, r), g.sigma2);
  return th - xi / kappa;
}

// Below this many cells a parallel region costs more than it saves.
constexpr Index kParallelCells = 4096;

}  // namespace

namespace reference {

void cell_nll(const CellGrid& g, Matrix& out) {
  const Index n = g.model->n();
  const Index R = g.model->r();
  out.resize(n, R);
  for (Index r = 0; r < R; ++r)
    for (Index i = 0; i < n; ++i) out(i, r) = nll_at(g, i, r);
}

void working_response(const CellGrid& g, double kappa, Matrix& z) {
  const Index n = g.model->n();
  const Index R = g.model->r();
  z.resize(n, R);
  for (Index r = 0; r < R; ++r)
    for (Index i = 0; i < n; ++i) z(i, r) = z_at(g, kappa, i, r);
}

}  // namespace reference

void cell_nll(const CellGrid& g, Matrix& out) {
  const Index n = g.model->n();
  const Index R = g.model->r();
  out.resize(n, R);
  const Index cells = n * R;
#pragma omp parallel for schedule(static) if (cells >= kParallelCells)
  for (Index k = 0; k < cells; ++k) {
    Index r = k / n;
    Index i = k - r * n;
    out(i, r) = nll_at(g, i, r);
  }
}

void working_response(const CellGrid& g, double kappa, Matrix& z) {
  const Index n = g.model->n();
  const Index R = g.model->r();
  z.resize(n, R);
  const Index cells = n * R;
#pragma omp parallel for schedule(static) if (cells >= kParallelCells)
  for (Index k = 0; k < cells; ++k) {
    Index r = k / n;
    Index i = k - r * n;
    z(i, r) = z_at(g, kappa, i, r);
  }
}

double ordered_sum(const Matrix& m) {
  double s = 0.0;
  const double* p = m.data();
  const Index n = m.size();
  for (Index k = 0; k < n; ++k) s += p[k];
  return s;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace gmr3::kernels
