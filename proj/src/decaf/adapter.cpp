#include "decaf/adapter.hpp"

#include <cmath>
#include <stdexcept>

namespace decaf {

AdapterPair init_adapter(int d, int k, int r, double sigma, double eta, Rng& rng) {
  if (d < 1 || k < 1 || r < 1) throw std::invalid_argument("init_adapter: dimensions must be positive");
  if (r > std::min(d, k)) throw std::invalid_argument("init_adapter: rank exceeds min(d, k)");
  if (sigma < 0.0) throw std::invalid_argument("init_adapter: sigma must be nonnegative");
  if (eta <= 0.0) throw std::invalid_argument("init_adapter: eta must be positive");
  AdapterPair p;
  p.rank = r;
  p.eta = eta;
  p.a = Mat(r, k);
  p.b = Mat(d, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < k; ++j) p.a(i, j) = sigma == 0.0 ? 0.0 : rng.gaussian(0.0, sigma);
  return p;
}

Mat delta_w(const AdapterPair& p) {
  if (p.a.rows() != p.rank || p.b.cols() != p.rank)
    throw std::invalid_argument("delta_w: factor shapes inconsistent with rank");
  return p.scaling() * matmul(p.b, p.a);
}

Mat effective_weight(const FrozenBase& base, const AdapterPair& p) {
  if (base.w0.rows() != p.d() || base.w0.cols() != p.k())
    throw std::invalid_argument("effective_weight: w0 shape mismatch");
  return base.w0 + delta_w(p);
}

AdapterPair mean_adapter(const std::vector<AdapterPair>& states) {
  if (states.empty()) throw std::invalid_argument("mean_adapter: empty state list");
  AdapterPair mean = states.front();
  for (std::size_t i = 1; i < states.size(); ++i) {
    if (!states[i].a.same_shape(mean.a) || !states[i].b.same_shape(mean.b))
      throw std::invalid_argument("mean_adapter: shape mismatch across agents");
    add_scaled(mean.a, 1.0, states[i].a);
    add_scaled(mean.b, 1.0, states[i].b);
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  mean.a = inv * mean.a;
  mean.b = inv * mean.b;
  return mean;
}

double adapter_disagreement(const std::vector<AdapterPair>& states) {
  if (states.empty()) throw std::invalid_argument("adapter_disagreement: empty state list");
  const AdapterPair mean = mean_adapter(states);
  double acc = 0.0;
  for (const AdapterPair& s : states) {
    const double da = frobenius_dist(s.a, mean.a);
    const double db = frobenius_dist(s.b, mean.b);
    acc += da * da + db * db;
  }
  return acc / static_cast<double>(states.size());
}

double flat_norm(const Mat& ga, const Mat& gb) {
  const double na = frobenius_norm(ga);
  const double nb = frobenius_norm(gb);
  return std::sqrt(na * na + nb * nb);
}

}  // namespace decaf
