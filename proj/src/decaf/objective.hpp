#pragma once

#include <string>
#include <vector>

#include "decaf/adapter.hpp"
#include "decaf/mat.hpp"
#include "decaf/rng.hpp"

namespace decaf {

// One agent's regression data: row s of inputs is x_s (length k), row s of
// targets is y_s (length d).
struct AgentDataset {
  Mat inputs;
  Mat targets;
  double noise_std = 0.0;

  int n_samples() const { return inputs.rows(); }
};

// Synthetic matrix-regression task. heterogeneity 0 gives every agent the
// same ground-truth weight; 1 gives fully independent per-agent targets.
struct TaskSpec {
  int d = 16;
  int k = 12;
  int n_samples_per_agent = 32;
  double heterogeneity = 0.0;
  double noise_std = 0.0;
  int ground_truth_rank = 4;
};

// Everything generate_data derives from the task seed: the frozen base
// weights, the implied optimal updates, and the per-agent samples.
struct GeneratedTask {
  Mat w0;
  Mat delta_global;                 // global low-rank target update
  std::vector<Mat> agent_delta;     // per-agent target update (after mixing)
  std::vector<AgentDataset> data;
};

// Draws a global low-rank target w0 + (eta/r*) B* A* with Gaussian factors,
// interpolates per-agent targets by the heterogeneity knob, then samples
// x ~ N(0, I_k) and y = W*_i x + noise.
GeneratedTask generate_data(const TaskSpec& spec, int n_agents, double eta, Rng& rng);

// Empirical least-squares loss over the batch:
// (1 / (2|S|)) sum_{s in S} ||(w0 + delta_w) x_s - y_s||^2.
double loss(const FrozenBase& base, const AdapterPair& p, const AgentDataset& data,
            const std::vector<int>& batch);

// Gradient of the batch loss w.r.t. the full weight matrix, evaluated at the
// effective weight.
Mat grad_w(const FrozenBase& base, const AdapterPair& p, const AgentDataset& data,
           const std::vector<int>& batch);

struct AdapterGrad {
  Mat ga;  // r x k
  Mat gb;  // d x r
};

// Chain rule through delta_w = (eta/r) b a:
//   ga = (eta/r) b^T grad_w,  gb = (eta/r) grad_w a^T.
AdapterGrad grad_adapter(const FrozenBase& base, const AdapterPair& p, const AgentDataset& data,
                         const std::vector<int>& batch);
AdapterGrad adapter_grad_from_w(const AdapterPair& p, const Mat& gw);

std::vector<int> full_batch(const AgentDataset& data);
std::vector<int> sample_batch(const AgentDataset& data, int batch_size, Rng& rng);

// Diagnostic for the missing smoothness guarantee of the raw reparameterized
// objective: for f(W) = 0.5 ||W||_F^2 with w0 = 0 and factors a = b = t I,
// returns ||grad(w_t) - grad(w_0)|| / ||w_t - w_0||, which grows like t^2.
double nonsmoothness_ratio(double t, int dim = 8);

// Trajectory-local estimates of the constants the convergence bounds use.
// All of these are empirical: maxima over the supplied states/probes, not
// global suprema (the quadratic loss has no global gradient bound).
struct ConstantEstimates {
  double L = 0.0;      // max over agents of lambda_max of input covariance
  double G = 0.0;      // max observed ||grad_W f_i||_F over probe points
  double c = 0.0;      // max observed sigma_1 of any factor
  double zeta = 0.0;   // max over agents of batch-gradient std dev
  double kappa = 0.0;  // max over probes of rms agent-vs-global gradient gap
};

ConstantEstimates estimate_constants(const FrozenBase& base, const std::vector<AdapterPair>& states,
                                     const std::vector<AgentDataset>& datasets, int batch_size,
                                     int n_probes, Rng& rng);

// CSV dump/load for cross-implementation comparison; writes
// <prefix>_x.csv and <prefix>_y.csv.
void save_dataset(const std::string& prefix, const AgentDataset& data);
AgentDataset load_dataset(const std::string& prefix, double noise_std = 0.0);

}  // namespace decaf
