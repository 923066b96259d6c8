#pragma once

#include <optional>
#include <vector>

#include "decaf/mat.hpp"
#include "decaf/rng.hpp"

namespace decaf {

// Trainable low-rank factors. The effective update to the frozen weights is
// delta_w = (eta / rank) * b * a, with a: rank x k and b: d x rank. All
// adapter-space norms are flattened Euclidean norms, i.e.
// ||(a, b)||^2 = ||a||_F^2 + ||b||_F^2.
struct AdapterPair {
  Mat a;
  Mat b;
  int rank = 0;
  double eta = 1.0;

  int d() const { return b.rows(); }
  int k() const { return a.cols(); }
  double scaling() const { return eta / static_cast<double>(rank); }
};

// Frozen pre-trained weights plus, for the frozen-A variants, the one shared
// A matrix that never trains.
struct FrozenBase {
  Mat w0;
  std::optional<Mat> a0;
};

// a filled with iid N(0, sigma^2) draws, b identically zero, so the initial
// effective weight equals w0 exactly.
AdapterPair init_adapter(int d, int k, int r, double sigma, double eta, Rng& rng);

Mat delta_w(const AdapterPair& p);
Mat effective_weight(const FrozenBase& base, const AdapterPair& p);

// Mean adapter of an ensemble (arithmetic mean of each factor).
AdapterPair mean_adapter(const std::vector<AdapterPair>& states);

// (1/N) sum_i (||A_i - mean A||_F^2 + ||B_i - mean B||_F^2); zero iff all
// pairs coincide.
double adapter_disagreement(const std::vector<AdapterPair>& states);

double flat_norm(const Mat& ga, const Mat& gb);  // sqrt(||ga||^2 + ||gb||^2)

}  // namespace decaf
