#include "decaf/objective.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "decaf/svd.hpp"

namespace decaf {

namespace {

Mat gaussian_mat(int rows, int cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian(0.0, stddev);
  return m;
}

void check_batch(const AgentDataset& data, const std::vector<int>& batch) {
  if (batch.empty()) throw std::invalid_argument("objective: empty batch");
  for (int s : batch)
    if (s < 0 || s >= data.n_samples())
      throw std::invalid_argument("objective: batch index out of range");
}

}  // namespace

GeneratedTask generate_data(const TaskSpec& spec, int n_agents, double eta, Rng& rng) {
  if (n_agents < 1) throw std::invalid_argument("generate_data: n_agents must be positive");
  if (spec.d < 1 || spec.k < 1 || spec.n_samples_per_agent < 1)
    throw std::invalid_argument("generate_data: task dimensions must be positive");
  if (spec.ground_truth_rank < 1 || spec.ground_truth_rank > std::min(spec.d, spec.k))
    throw std::invalid_argument("generate_data: ground_truth_rank out of range");
  if (spec.heterogeneity < 0.0 || spec.heterogeneity > 1.0)
    throw std::invalid_argument("generate_data: heterogeneity must lie in [0, 1]");
  if (spec.noise_std < 0.0) throw std::invalid_argument("generate_data: noise_std must be >= 0");

  const int rs = spec.ground_truth_rank;
  const double scale = eta / static_cast<double>(rs);
  // Factor scales keep the target update's Frobenius norm near eta/sqrt(r*),
  // so losses and gradients stay O(1) across dimensions.
  const double sa = 1.0 / std::sqrt(static_cast<double>(spec.k));
  const double sb = 1.0 / std::sqrt(static_cast<double>(spec.d));

  GeneratedTask task;
  task.w0 = gaussian_mat(spec.d, spec.k, 1.0, rng);
  const Mat a_star = gaussian_mat(rs, spec.k, sa, rng);
  const Mat b_star = gaussian_mat(spec.d, rs, sb, rng);
  task.delta_global = scale * matmul(b_star, a_star);

  const double h = spec.heterogeneity;
  task.agent_delta.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    const Mat ai = gaussian_mat(rs, spec.k, sa, rng);
    const Mat bi = gaussian_mat(spec.d, rs, sb, rng);
    Mat delta = (1.0 - h) * task.delta_global;
    add_scaled(delta, h * scale, matmul(bi, ai));
    task.agent_delta.push_back(std::move(delta));
  }

  // One shared input design across agents: data heterogeneity comes entirely
  // from the per-agent targets (and noise), so heterogeneity 0 with zero
  // noise gives bit-identical datasets and an exact kappa = 0 regime.
  const Mat inputs = gaussian_mat(spec.n_samples_per_agent, spec.k, 1.0, rng);
  task.data.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    AgentDataset ds;
    ds.noise_std = spec.noise_std;
    ds.inputs = inputs;
    ds.targets = Mat(spec.n_samples_per_agent, spec.d);
    const Mat w_star = task.w0 + task.agent_delta[i];
    for (int s = 0; s < spec.n_samples_per_agent; ++s) {
      for (int row = 0; row < spec.d; ++row) {
        double acc = 0.0;
        for (int col = 0; col < spec.k; ++col) acc += w_star(row, col) * ds.inputs(s, col);
        if (spec.noise_std > 0.0) acc += rng.gaussian(0.0, spec.noise_std);
        ds.targets(s, row) = acc;
      }
    }
    task.data.push_back(std::move(ds));
  }
  return task;
}

double loss(const FrozenBase& base, const AdapterPair& p, const AgentDataset& data,
            const std::vector<int>& batch) {
  check_batch(data, batch);
  const Mat w = effective_weight(base, p);
  double acc = 0.0;
  for (int s : batch) {
    for (int row = 0; row < w.rows(); ++row) {
      double r = -data.targets(s, row);
      for (int col = 0; col < w.cols(); ++col) r += w(row, col) * data.inputs(s, col);
      acc += r * r;
    }
  }
  return acc / (2.0 * static_cast<double>(batch.size()));
}

Mat grad_w(const FrozenBase& base, const AdapterPair& p, const AgentDataset& data,
           const std::vector<int>& batch) {
  check_batch(data, batch);
  const Mat w = effective_weight(base, p);
  Mat g(w.rows(), w.cols());
  std::vector<double> resid(w.rows());
  for (int s : batch) {
    for (int row = 0; row < w.rows(); ++row) {
      double r = -data.targets(s, row);
      for (int col = 0; col < w.cols(); ++col) r += w(row, col) * data.inputs(s, col);
      resid[row] = r;
    }
    for (int row = 0; row < w.rows(); ++row)
      for (int col = 0; col < w.cols(); ++col) g(row, col) += resid[row] * data.inputs(s, col);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  return inv * g;
}

AdapterGrad adapter_grad_from_w(const AdapterPair& p, const Mat& gw) {
  AdapterGrad g;
  const double s = p.scaling();
  g.ga = s * matmul(transpose(p.b), gw);
  g.gb = s * matmul(gw, transpose(p.a));
  return g;
}

AdapterGrad grad_adapter(const FrozenBase& base, const AdapterPair& p, const AgentDataset& data,
                         const std::vector<int>& batch) {
  return adapter_grad_from_w(p, grad_w(base, p, data, batch));
}

std::vector<int> full_batch(const AgentDataset& data) {
  std::vector<int> idx(data.n_samples());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<int> sample_batch(const AgentDataset& data, int batch_size, Rng& rng) {
  if (batch_size < 1 || batch_size > data.n_samples())
    throw std::invalid_argument("sample_batch: batch_size out of range");
  return rng.sample_without_replacement(data.n_samples(), batch_size);
}

double nonsmoothness_ratio(double t, int dim) {
  if (t <= 0.0) throw std::invalid_argument("nonsmoothness_ratio: t must be positive");
  if (dim < 1) throw std::invalid_argument("nonsmoothness_ratio: dim must be positive");
  AdapterPair p;
  p.rank = dim;  // square factors with eta/rank scaling forced to 1
  p.eta = static_cast<double>(dim);
  p.a = t * Mat::identity(dim);
  p.b = t * Mat::identity(dim);
  const Mat w = delta_w(p);           // f(W) = 0.5||W||_F^2, so grad_W f = W
  const AdapterGrad g = adapter_grad_from_w(p, w);
  const double num = flat_norm(g.ga, g.gb);  // gradient at the origin is zero
  const double den = flat_norm(p.a, p.b);
  return num / den;
}

ConstantEstimates estimate_constants(const FrozenBase& base, const std::vector<AdapterPair>& states,
                                     const std::vector<AgentDataset>& datasets, int batch_size,
                                     int n_probes, Rng& rng) {
  if (states.empty() || states.size() != datasets.size())
    throw std::invalid_argument("estimate_constants: states and datasets must align");
  if (n_probes < 2) throw std::invalid_argument("estimate_constants: n_probes must be >= 2");
  const int n_agents = static_cast<int>(states.size());

  ConstantEstimates est;

  // L: closed form for the quadratic loss, lambda_max of the per-agent
  // empirical input covariance.
  for (const AgentDataset& ds : datasets) {
    const int n = ds.n_samples();
    const int k = ds.inputs.cols();
    Mat cov(k, k);
    for (int s = 0; s < n; ++s)
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) cov(i, j) += ds.inputs(s, i) * ds.inputs(s, j);
    cov = (1.0 / static_cast<double>(n)) * cov;
    est.L = std::max(est.L, symmetric_eigenvalues(cov).front());
  }

  for (const AdapterPair& s : states) {
    est.c = std::max(est.c, spectral_norm(s.a));
    est.c = std::max(est.c, spectral_norm(s.b));
  }

  // Probe points: the mean adapter plus mild random perturbations of it.
  const AdapterPair center = mean_adapter(states);
  const double jitter = 0.1 * (1.0 + std::max(max_abs(center.a), max_abs(center.b)));
  std::vector<AdapterPair> probes;
  probes.push_back(center);
  for (int p = 1; p < n_probes; ++p) {
    AdapterPair v = center;
    for (std::size_t i = 0; i < v.a.size(); ++i) v.a.data()[i] += rng.gaussian(0.0, jitter);
    for (std::size_t i = 0; i < v.b.size(); ++i) v.b.data()[i] += rng.gaussian(0.0, jitter);
    probes.push_back(std::move(v));
  }

  for (const AdapterPair& v : probes) {
    std::vector<AdapterGrad> grads;
    grads.reserve(n_agents);
    for (int i = 0; i < n_agents; ++i) {
      const Mat gw = grad_w(base, v, datasets[i], full_batch(datasets[i]));
      est.G = std::max(est.G, frobenius_norm(gw));
      grads.push_back(adapter_grad_from_w(v, gw));
    }
    AdapterGrad mean;
    mean.ga = Mat(grads[0].ga.rows(), grads[0].ga.cols());
    mean.gb = Mat(grads[0].gb.rows(), grads[0].gb.cols());
    for (const AdapterGrad& g : grads) {
      add_scaled(mean.ga, 1.0 / n_agents, g.ga);
      add_scaled(mean.gb, 1.0 / n_agents, g.gb);
    }
    double acc = 0.0;
    for (const AdapterGrad& g : grads) {
      const double da = frobenius_dist(g.ga, mean.ga);
      const double db = frobenius_dist(g.gb, mean.gb);
      acc += da * da + db * db;
    }
    est.kappa = std::max(est.kappa, std::sqrt(acc / n_agents));
  }

  // zeta: spread of the mini-batch gradient around its mean, per agent at its
  // own state. Exactly zero when the batch is the whole dataset.
  for (int i = 0; i < n_agents; ++i) {
    const int n = datasets[i].n_samples();
    const int m = batch_size <= 0 ? n : std::min(batch_size, n);
    if (m == n) continue;  // deterministic batch, zero variance
    std::vector<AdapterGrad> draws;
    draws.reserve(n_probes);
    for (int p = 0; p < n_probes; ++p)
      draws.push_back(
          grad_adapter(base, states[i], datasets[i], sample_batch(datasets[i], m, rng)));
    AdapterGrad mean;
    mean.ga = Mat(draws[0].ga.rows(), draws[0].ga.cols());
    mean.gb = Mat(draws[0].gb.rows(), draws[0].gb.cols());
    for (const AdapterGrad& g : draws) {
      add_scaled(mean.ga, 1.0 / n_probes, g.ga);
      add_scaled(mean.gb, 1.0 / n_probes, g.gb);
    }
    double acc = 0.0;
    for (const AdapterGrad& g : draws) {
      const double da = frobenius_dist(g.ga, mean.ga);
      const double db = frobenius_dist(g.gb, mean.gb);
      acc += da * da + db * db;
    }
    est.zeta = std::max(est.zeta, std::sqrt(acc / n_probes));
  }
  return est;
}

void save_dataset(const std::string& prefix, const AgentDataset& data) {
  write_csv(prefix + "_x.csv", data.inputs);
  write_csv(prefix + "_y.csv", data.targets);
}

AgentDataset load_dataset(const std::string& prefix, double noise_std) {
  AgentDataset ds;
  ds.inputs = read_csv(prefix + "_x.csv");
  ds.targets = read_csv(prefix + "_y.csv");
  if (ds.inputs.rows() != ds.targets.rows())
    throw std::runtime_error("load_dataset: inputs/targets row mismatch for " + prefix);
  ds.noise_std = noise_std;
  return ds;
}

}  // namespace decaf
