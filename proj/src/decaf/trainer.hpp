#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decaf/consensus.hpp"
#include "decaf/metrics.hpp"
#include "decaf/objective.hpp"
#include "decaf/optimizer.hpp"
#include "decaf/topology.hpp"

namespace decaf {

enum class Algorithm { local, local_fa, fedavg, fedavg_fa, dlora, dlora_fa, decaf };
enum class Schedule { constant, cosine };

// Where the local gradient is evaluated on communication rounds. The
// pseudocode computes it before consensus and applies it to the merged
// state; post_consensus re-evaluates at the merged state on the same batch.
enum class GradPoint { pre_consensus, post_consensus };

const char* to_string(Algorithm alg);
Algorithm algorithm_from_string(const std::string& name);
const char* to_string(Schedule s);
const char* to_string(GradPoint g);

ConsensusMode consensus_mode_for(Algorithm alg);
bool uses_frozen_a(Algorithm alg);
bool algorithm_communicates(Algorithm alg);

struct RunConfig {
  Algorithm algorithm = Algorithm::dlora;
  OptimizerKind optimizer = OptimizerKind::sgd;
  OptHyper opt;
  TopologyKind topology = TopologyKind::fully_connected;
  std::optional<GridDims> torus_dims;
  std::optional<Mat> custom_weights;
  int n_agents = 8;
  TaskSpec task;
  int r = 4;
  double eta = 1.0;
  double sigma_init = 0.02;
  double alpha = 0.05;
  Schedule schedule = Schedule::constant;
  int batch_size = 0;  // 0 = full batch
  long long tau = 1;
  long long iters = 2000;
  std::uint64_t seed = 42;
  long long metric_interval = 10;
  SplitMode split_mode = SplitMode::balanced;
  GradPoint grad_point = GradPoint::pre_consensus;
  int threads = 0;  // 0 = hardware parallelism
};

// Per communication round: how many directed messages were exchanged and
// their bytes-equivalent volume.
struct LedgerEntry {
  long long iter = 0;
  long long edges = 0;
  long long bytes = 0;
};

struct RunSummary {
  std::vector<double> final_per_agent_losses;
  double final_global_loss = 0.0;      // loss of the mean adapter on the union
  double final_union_loss_mean = 0.0;  // per-agent adapters on the union, averaged
  double final_avg_grad_norm_sq = 0.0;
  ConstantEstimates constants;  // empirical: trajectory maxima, not suprema
  double l_hat = 0.0;
  double rho = 0.0;
  double spectral_gap = 0.0;
  double alpha_ceiling = 0.0;
  bool step_size_ok = true;
  long long total_comm_bytes = 0;
  long long comm_rounds = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct RunResult {
  std::vector<MetricsRecord> records;
  std::vector<LedgerEntry> ledger;
  std::vector<AdapterPair> final_states;
  RunSummary summary;
};

using ProgressFn = std::function<void(const MetricsRecord&)>;

void validate_config(const RunConfig& cfg);

// Executes the full synchronous loop: per iteration every agent samples a
// batch and evaluates its gradients, consensus runs when t mod tau == 0
// (1-based t), and the local optimizer update is applied to the merged state.
// Identical configs give identical results for any thread count.
RunResult run(const RunConfig& cfg, const ProgressFn& progress = nullptr);

// One run per value with everything else (seeds included) held fixed.
// Sweepable axes: r, topology, n_agents, tau, alpha, heterogeneity.
std::vector<std::pair<std::string, RunResult>> sweep(const RunConfig& base, const std::string& axis,
                                                     const std::vector<std::string>& values,
                                                     const ProgressFn& progress = nullptr);

RunConfig apply_sweep_value(const RunConfig& base, const std::string& axis,
                            const std::string& value);

void write_ledger_csv(const std::string& path, const std::vector<LedgerEntry>& ledger);

}  // namespace decaf
