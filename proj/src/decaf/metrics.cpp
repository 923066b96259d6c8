#include "decaf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace decaf {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

}  // namespace

double interference(const std::vector<AdapterPair>& states, const MixingMatrix& m, int i) {
  if (static_cast<int>(states.size()) != m.n_agents)
    throw std::invalid_argument("interference: one state per agent required");
  if (i < 0 || i >= m.n_agents) throw std::invalid_argument("interference: agent out of range");
  Mat prod_sum(states.front().b.rows(), states.front().a.cols());
  Mat a_sum(states.front().a.rows(), states.front().a.cols());
  Mat b_sum(states.front().b.rows(), states.front().b.cols());
  for (int j = 0; j < m.n_agents; ++j) {
    const double w = m.weights(i, j);
    if (w == 0.0) continue;
    add_scaled(prod_sum, w, matmul(states[j].b, states[j].a));
    add_scaled(a_sum, w, states[j].a);
    add_scaled(b_sum, w, states[j].b);
  }
  return frobenius_dist(prod_sum, matmul(b_sum, a_sum));
}

double consensus_diff(const std::vector<AdapterPair>& states, const MixingMatrix& m) {
  double worst = 0.0;
  for (int i = 0; i < m.n_agents; ++i) worst = std::max(worst, interference(states, m, i));
  return worst;
}

double global_loss_at_mean(const FrozenBase& base, const std::vector<AdapterPair>& states,
                           const std::vector<AgentDataset>& datasets) {
  if (states.size() != datasets.size())
    throw std::invalid_argument("global_loss_at_mean: states/datasets mismatch");
  const AdapterPair mean = mean_adapter(states);
  double acc = 0.0;
  for (const AgentDataset& ds : datasets) acc += loss(base, mean, ds, full_batch(ds));
  return acc / static_cast<double>(datasets.size());
}

double avg_grad_norm_sq(const FrozenBase& base, const std::vector<AdapterPair>& states,
                        const std::vector<AgentDataset>& datasets) {
  if (states.size() != datasets.size())
    throw std::invalid_argument("avg_grad_norm_sq: states/datasets mismatch");
  const AdapterPair mean = mean_adapter(states);
  Mat ga(mean.a.rows(), mean.a.cols());
  Mat gb(mean.b.rows(), mean.b.cols());
  const double inv = 1.0 / static_cast<double>(datasets.size());
  for (const AgentDataset& ds : datasets) {
    const AdapterGrad g = grad_adapter(base, mean, ds, full_batch(ds));
    add_scaled(ga, inv, g.ga);
    add_scaled(gb, inv, g.gb);
  }
  const double n = flat_norm(ga, gb);
  return n * n;
}

double theorem2_bound(double alpha, double G, double eta, double c, int r, double rho, double T) {
  if (rho < 0.0 || rho >= 1.0) throw std::invalid_argument("theorem2_bound: rho must lie in [0, 1)");
  if (r < 1) throw std::invalid_argument("theorem2_bound: rank must be >= 1");
  const double gap = 1.0 - std::sqrt(rho);
  const double first = 2.0 * alpha * G * eta * c / (std::sqrt(static_cast<double>(r)) * gap);
  const double drift = alpha * eta * c * G / (static_cast<double>(r) * gap);
  const double decay = rho == 0.0 ? (T > 0.0 ? 0.0 : 1.0) : std::pow(rho, T / 2.0);
  return first + (decay * c + drift) * drift;
}

double smoothness_constant(double L, double C, double c, double G, double eta, int r) {
  if (r < 1) throw std::invalid_argument("smoothness_constant: rank must be >= 1");
  const double rr = static_cast<double>(r);
  return eta * (2.0 * L * C * std::sqrt(rr) * c + G) / rr;
}

double step_size_ceiling(double rho, double l_hat) {
  if (l_hat <= 0.0) return 0.0;
  return (1.0 - std::sqrt(rho)) / (4.0 * std::sqrt(2.0) * l_hat);
}

namespace {

AdapterGrad global_grad(const FrozenBase& base, const std::vector<AgentDataset>& datasets,
                        const AdapterPair& w) {
  AdapterGrad out;
  out.ga = Mat(w.a.rows(), w.a.cols());
  out.gb = Mat(w.b.rows(), w.b.cols());
  const double inv = 1.0 / static_cast<double>(datasets.size());
  for (const AgentDataset& ds : datasets) {
    const AdapterGrad g = grad_adapter(base, w, ds, full_batch(ds));
    add_scaled(out.ga, inv, g.ga);
    add_scaled(out.gb, inv, g.gb);
  }
  return out;
}

}  // namespace

double gradient_lipschitz_ratio(const FrozenBase& base, const std::vector<AgentDataset>& datasets,
                                const AdapterPair& w, const AdapterPair& w_prime, bool frozen_a) {
  const AdapterGrad g = global_grad(base, datasets, w);
  const AdapterGrad gp = global_grad(base, datasets, w_prime);
  double num, den;
  if (frozen_a) {
    num = frobenius_dist(g.gb, gp.gb);
    den = frobenius_dist(w.b, w_prime.b);
  } else {
    num = flat_norm(g.ga - gp.ga, g.gb - gp.gb);
    den = flat_norm(w.a - w_prime.a, w.b - w_prime.b);
  }
  if (den == 0.0) throw std::invalid_argument("gradient_lipschitz_ratio: degenerate pair");
  return num / den;
}

double empirical_smoothness(const FrozenBase& base, const std::vector<AgentDataset>& datasets,
                            const AdapterPair& center, int n_pairs, double radius, Rng& rng) {
  if (n_pairs < 1) throw std::invalid_argument("empirical_smoothness: n_pairs must be >= 1");
  if (radius <= 0.0) throw std::invalid_argument("empirical_smoothness: radius must be positive");
  auto perturb = [&]() {
    AdapterPair v = center;
    Mat da(v.a.rows(), v.a.cols());
    Mat db(v.b.rows(), v.b.cols());
    for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] = rng.gaussian();
    for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] = rng.gaussian();
    const double n = flat_norm(da, db);
    const double target = radius * rng.uniform();
    if (n > 0.0) {
      add_scaled(v.a, target / n, da);
      add_scaled(v.b, target / n, db);
    }
    return v;
  };
  double best = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    const AdapterPair w = perturb();
    const AdapterPair wp = perturb();
    if (flat_norm(w.a - wp.a, w.b - wp.b) == 0.0) continue;  // coincident draw, skip
    best = std::max(best, gradient_lipschitz_ratio(base, datasets, w, wp));
  }
  return best;
}

std::string metrics_csv_header(int n_agents) {
  std::string h =
      "iter,global_loss,avg_grad_norm_sq,disagreement,interference_max,tsvd_error_max,"
      "tsvd_bound_max,consensus_diff,consensus_diff_bound,comm_bytes";
  for (int i = 0; i < n_agents; ++i) h += ",loss_agent_" + std::to_string(i);
  return h;
}

std::string metrics_csv_row(const MetricsRecord& rec) {
  std::string row = std::to_string(rec.iter);
  row += ',' + fmt(rec.global_loss);
  row += ',' + fmt(rec.avg_grad_norm_sq);
  row += ',' + fmt(rec.disagreement);
  auto opt = [&](double v) { row += ','; if (v >= 0.0) row += fmt(v); };
  opt(rec.interference_max);
  opt(rec.tsvd_error_max);
  opt(rec.tsvd_bound_max);
  opt(rec.consensus_diff);
  opt(rec.consensus_diff_bound);
  row += ',' + std::to_string(rec.comm_bytes);
  for (double l : rec.per_agent_losses) row += ',' + fmt(l);
  return row;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records,
                       int n_agents) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  out << metrics_csv_header(n_agents) << '\n';
  for (const MetricsRecord& rec : records) out << metrics_csv_row(rec) << '\n';
  if (!out) throw std::runtime_error("write_metrics_csv: write failed for " + path);
}

}  // namespace decaf
