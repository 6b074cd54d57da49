#pragma once

// Cell-wise kernels over the N x R response grid.
//
// Every cell is independent, so the OpenMP variants split the flattened
// index range across threads and write each cell exactly once. Reductions
// are taken serially over the filled matrix, which keeps results bitwise
// identical to the serial reference for any thread count.

#include <vector>

#include "gmr3/likelihood.hpp"

namespace gmr3::kernels {

struct CellGrid {
  const ResponseModel* model = nullptr;
  const Matrix* theta = nullptr;
  const std::vector<Vector>* thresholds = nullptr;
  double sigma2 = 1.0;
};

namespace reference {
void cell_nll(const CellGrid& grid, Matrix& out);
void working_response(const CellGrid& grid, double kappa, Matrix& z);
}  // namespace reference

void cell_nll(const CellGrid& grid, Matrix& out);
void working_response(const CellGrid& grid, double kappa, Matrix& z);

/// Column-major sequential sum.
double ordered_sum(const Matrix& m);

/// Threads used by the parallel kernels and job loops (1 without OpenMP).
int max_threads();
void set_max_threads(int n);

}  // namespace gmr3::kernels
