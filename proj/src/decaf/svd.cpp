#include "decaf/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace decaf {

namespace {

constexpr double kJacobiRelTol = 1e-14;
constexpr int kMaxSweeps = 64;

// One-sided (Hestenes) Jacobi on the columns of x, accumulating the right
// rotations into v. Requires x.rows() >= x.cols(). Converges when every
// column pair is orthogonal to relative precision kJacobiRelTol.
void one_sided_jacobi(Mat& x, Mat& v) {
  const int n = x.cols();
  const int m = x.rows();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          const double xp = x(i, p), xq = x(i, q);
          app += xp * xp;
          aqq += xq * xq;
          apq += xp * xq;
        }
        // sqrt(app)*sqrt(aqq) instead of sqrt(app*aqq): the product can
        // underflow for the denormal-scale columns repeated refactorization
        // produces
        if (app == 0.0 || aqq == 0.0) continue;
        if (std::fabs(apq) <= kJacobiRelTol * std::sqrt(app) * std::sqrt(aqq)) continue;
        const double zeta = (aqq - app) / (2.0 * apq);
        if (!std::isfinite(zeta)) continue;  // rotation below fp resolution
        // asymptotic angle for huge zeta keeps 1 + zeta^2 from overflowing
        const double t = std::fabs(zeta) > 1e8
                             ? 1.0 / (2.0 * zeta)
                             : (zeta >= 0.0 ? 1.0 : -1.0) /
                                   (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        if (t == 0.0) continue;
        rotated = true;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double xp = x(i, p), xq = x(i, q);
          x(i, p) = c * xp - s * xq;
          x(i, q) = s * xp + c * xq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
  throw std::runtime_error("svd: Jacobi sweeps did not converge");
}

// Fill columns of u whose singular value is (numerically) zero with unit
// vectors orthogonal to all other columns, so u stays column-orthonormal.
void complete_orthonormal(Mat& u, const std::vector<bool>& needs_fill) {
  const int m = u.rows();
  const int p = u.cols();
  for (int j = 0; j < p; ++j) {
    if (!needs_fill[j]) continue;
    for (int cand = 0; cand < m; ++cand) {
      std::vector<double> e(m, 0.0);
      e[cand] = 1.0;
      for (int l = 0; l < p; ++l) {
        if (needs_fill[l] && l >= j) continue;  // only project on settled columns
        double proj = 0.0;
        for (int i = 0; i < m; ++i) proj += u(i, l) * e[i];
        for (int i = 0; i < m; ++i) e[i] -= proj * u(i, l);
      }
      double norm = 0.0;
      for (double val : e) norm += val * val;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (int i = 0; i < m; ++i) u(i, j) = e[i] / norm;
        break;
      }
    }
  }
}

SvdResult svd_tall(const Mat& input) {
  const int m = input.rows();
  const int n = input.cols();
  Mat x = input;

  // Exact power-of-two prescaling keeps column products out of the denormal
  // range, where the Gram accumulations would drown in rounding noise.
  int exponent = 0;
  const double amax = max_abs(x);
  if (amax > 0.0) {
    exponent = std::ilogb(amax);
    if (exponent != 0)
      for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = std::scalbn(x.data()[i], -exponent);
  }

  Mat v = Mat::identity(n);
  one_sided_jacobi(x, v);

  std::vector<double> sigma(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += x(i, j) * x(i, j);
    sigma[j] = std::sqrt(acc);
  }

  // Stable descending order: ties keep converged column order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sigma[a] > sigma[b]; });

  const double scale = *std::max_element(sigma.begin(), sigma.end());
  const double zero_tol = scale > 0.0 ? scale * 1e-300 : 0.0;

  SvdResult out;
  out.u = Mat(m, n);
  out.v = Mat(n, n);
  out.sigma.resize(n);
  std::vector<bool> needs_fill(n, false);
  for (int jj = 0; jj < n; ++jj) {
    const int j = order[jj];
    if (sigma[j] > zero_tol && sigma[j] > 0.0) {
      out.sigma[jj] = std::scalbn(sigma[j], exponent);
      for (int i = 0; i < m; ++i) out.u(i, jj) = x(i, j) / sigma[j];
    } else {
      out.sigma[jj] = 0.0;
      needs_fill[jj] = true;
    }
    for (int i = 0; i < n; ++i) out.v(i, jj) = v(i, j);
  }
  complete_orthonormal(out.u, needs_fill);
  return out;
}

// Deterministic sign: largest-magnitude entry of each left vector positive.
void fix_signs(SvdResult& s) {
  const int p = static_cast<int>(s.sigma.size());
  for (int j = 0; j < p; ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < s.u.rows(); ++i) {
      const double a = std::fabs(s.u(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (s.u(arg, j) < 0.0) {
      for (int i = 0; i < s.u.rows(); ++i) s.u(i, j) = -s.u(i, j);
      for (int i = 0; i < s.v.rows(); ++i) s.v(i, j) = -s.v(i, j);
    }
  }
}

}  // namespace

SvdResult svd_full(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("svd_full: empty matrix");
  if (!m.all_finite()) throw std::invalid_argument("svd_full: non-finite entries");
  SvdResult s;
  if (m.rows() >= m.cols()) {
    s = svd_tall(m);
  } else {
    SvdResult st = svd_tall(transpose(m));
    s.u = std::move(st.v);
    s.v = std::move(st.u);
    s.sigma = std::move(st.sigma);
  }
  fix_signs(s);
  return s;
}

TsvdResult tsvd(const Mat& m, int r) {
  const int p = std::min(m.rows(), m.cols());
  if (r < 1 || r > p) throw std::invalid_argument("tsvd: rank out of range");
  SvdResult s = svd_full(m);
  TsvdResult t;
  t.u_r = Mat(m.rows(), r);
  t.v_r = Mat(m.cols(), r);
  t.sigma_r.assign(s.sigma.begin(), s.sigma.begin() + r);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < m.rows(); ++i) t.u_r(i, j) = s.u(i, j);
    for (int i = 0; i < m.cols(); ++i) t.v_r(i, j) = s.v(i, j);
  }
  t.tail_energy = 0.0;
  for (int j = r; j < p; ++j) t.tail_energy += s.sigma[j] * s.sigma[j];
  return t;
}

std::pair<Mat, Mat> factor_split(const TsvdResult& t, SplitMode mode) {
  const int d = t.u_r.rows();
  const int k = t.v_r.rows();
  const int r = static_cast<int>(t.sigma_r.size());
  Mat a(r, k);
  Mat b(d, r);
  for (int j = 0; j < r; ++j) {
    const double s = t.sigma_r[j];
    const double left = mode == SplitMode::balanced ? std::sqrt(s) : s;
    const double right = mode == SplitMode::balanced ? std::sqrt(s) : 1.0;
    for (int i = 0; i < d; ++i) b(i, j) = t.u_r(i, j) * left;
    for (int i = 0; i < k; ++i) a(j, i) = t.v_r(i, j) * right;
  }
  return {std::move(a), std::move(b)};
}

double spectral_norm(const Mat& m) {
  if (!m.all_finite()) throw std::invalid_argument("spectral_norm: non-finite entries");
  SvdResult s = svd_full(m);
  return s.sigma.empty() ? 0.0 : s.sigma.front();
}

std::vector<double> symmetric_eigenvalues(const Mat& input) {
  if (input.rows() != input.cols()) throw std::invalid_argument("symmetric_eigenvalues: not square");
  const int n = input.rows();
  Mat a = input;
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(a(i, j)));
  if (scale == 0.0) return std::vector<double>(n, 0.0);

  // Cyclic two-sided Jacobi; plenty accurate for the dense N <= 1024 mixing
  // matrices and covariance blocks this project deals with.
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a(p, q)));
    if (off <= kJacobiRelTol * scale) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= kJacobiRelTol * scale * 1e-2) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        if (!std::isfinite(theta)) continue;
        const double t = std::fabs(theta) > 1e8
                             ? 1.0 / (2.0 * theta)
                             : (theta >= 0.0 ? 1.0 : -1.0) /
                                   (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<double>());
  return eig;
}

}  // namespace decaf
