#pragma once

#include <string>
#include <vector>

#include "decaf/adapter.hpp"
#include "decaf/objective.hpp"
#include "decaf/topology.hpp"

namespace decaf {

// One sampled row of the run. The interference/tsvd/consensus fields are
// only meaningful on communication iterations and are left unset (negative
// sentinel) elsewhere; the CSV writer emits empty cells for those.
struct MetricsRecord {
  long long iter = 0;
  double global_loss = 0.0;
  std::vector<double> per_agent_losses;
  double avg_grad_norm_sq = 0.0;
  double disagreement = 0.0;
  double interference_max = -1.0;
  double tsvd_error_max = -1.0;
  double tsvd_bound_max = -1.0;
  double consensus_diff = -1.0;
  double consensus_diff_bound = -1.0;
  long long comm_bytes = 0;  // cumulative

  bool has_comm_fields() const { return interference_max >= 0.0; }
};

// Model consensus interference for agent i:
//   || sum_j pi_ij B^j A^j  -  (sum_j pi_ij B^j)(sum_j pi_ij A^j) ||_F
// Zero whenever all neighbor A's (or all B's) coincide.
double interference(const std::vector<AdapterPair>& states, const MixingMatrix& m, int i);

// Max over agents of the interference; the live-trajectory consensus error
// between individual and product merging.
double consensus_diff(const std::vector<AdapterPair>& states, const MixingMatrix& m);

// Global full-batch loss and squared adapter-gradient norm at the mean
// adapter. Both average over the union of agent datasets and never touch any
// agent RNG stream.
double global_loss_at_mean(const FrozenBase& base, const std::vector<AdapterPair>& states,
                           const std::vector<AgentDataset>& datasets);
double avg_grad_norm_sq(const FrozenBase& base, const std::vector<AdapterPair>& states,
                        const std::vector<AgentDataset>& datasets);

// Closed-form consensus-difference bound
//   2 a G eta c / (sqrt(r) (1 - sqrt(rho)))
//   + (rho^{T/2} c + a eta c G / (r (1 - sqrt(rho)))) * a eta c G / (r (1 - sqrt(rho)))
double theorem2_bound(double alpha, double G, double eta, double c, int r, double rho, double T);

// Derived smoothness constant eta (2 L C sqrt(r) c + G) / r.
double smoothness_constant(double L, double C, double c, double G, double eta, int r);

// Step-size ceiling (1 - sqrt(rho)) / (4 sqrt(2) L_hat).
double step_size_ceiling(double rho, double l_hat);

// Observed gradient-Lipschitz ratio between two adapter points for the
// global full-batch objective. With frozen_a set, only the B block of the
// gradient and displacement is measured.
double gradient_lipschitz_ratio(const FrozenBase& base, const std::vector<AgentDataset>& datasets,
                                const AdapterPair& w, const AdapterPair& w_prime,
                                bool frozen_a = false);

// Max ratio over randomly sampled pairs in a ball of the given radius around
// center; a lower bound on the local Lipschitz constant of the adapter
// gradient.
double empirical_smoothness(const FrozenBase& base, const std::vector<AgentDataset>& datasets,
                            const AdapterPair& center, int n_pairs, double radius, Rng& rng);

std::string metrics_csv_header(int n_agents);
std::string metrics_csv_row(const MetricsRecord& rec);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records,
                       int n_agents);

}  // namespace decaf
