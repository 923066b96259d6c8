#pragma once

#include <utility>
#include <vector>

#include "decaf/mat.hpp"

namespace decaf {

// Thin SVD: for an m x n input with p = min(m, n), u is m x p, v is n x p,
// sigma holds p non-increasing nonnegative values and m = u diag(sigma) v^T.
struct SvdResult {
  Mat u;
  std::vector<double> sigma;
  Mat v;
};

// Rank-r truncation of the SVD plus the discarded energy
// tail_energy = sum of squared singular values beyond the first r.
struct TsvdResult {
  Mat u_r;
  std::vector<double> sigma_r;
  Mat v_r;
  double tail_energy = 0.0;
};

// How the truncated SVD is refactored into adapter-shaped matrices.
//   balanced:   A = (V_r S^{1/2})^T, B = U_r S^{1/2}  (both carry sqrt(sigma))
//   sigma_left: A = V_r^T,           B = U_r S        (all weight on B)
enum class SplitMode { balanced, sigma_left };

SvdResult svd_full(const Mat& m);
TsvdResult tsvd(const Mat& m, int r);

// Returns (A: r x k, B: d x r) with B*A equal to u_r diag(sigma_r) v_r^T.
std::pair<Mat, Mat> factor_split(const TsvdResult& t, SplitMode mode = SplitMode::balanced);

double spectral_norm(const Mat& m);

// Eigenvalues of a symmetric matrix, sorted descending by value.
std::vector<double> symmetric_eigenvalues(const Mat& m);

}  // namespace decaf
