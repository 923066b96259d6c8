#pragma once

#include <string>
#include <vector>

#include "decaf/adapter.hpp"
#include "decaf/consensus.hpp"

namespace decaf {

enum class OptimizerKind { sgd, msgd, adam };
enum class AdamHt { amsgrad, ema };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptHyper {
  OptimizerKind mode = OptimizerKind::sgd;
  double beta = 0.9;  // msgd momentum coefficient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  AdamHt ht = AdamHt::amsgrad;
};

// Per-agent optimizer buffers. The adam tracker follows the difference-rule
// accumulator scheme: the per-round second moment V feeds a consensus-tracked
// accumulator U-hat whose elementwise max with epsilon is the denominator.
// No bias correction is applied anywhere.
struct OptState {
  OptimizerKind mode = OptimizerKind::sgd;
  // msgd velocity
  Mat vel_a, vel_b;
  // adam buffers
  Mat m_a, m_b;            // first moment
  Mat vt_a, vt_b;          // current second-moment tracker V_t
  Mat prev_vt_a, prev_vt_b;
  Mat uhat_a, uhat_b;      // consensus-tracked accumulator (pre-round)
  Mat uhat_half_a, uhat_half_b;  // post-consensus accumulator for this round
  bool adam_started = false;
};

OptState make_opt_state(OptimizerKind mode, int d, int k, int r);

AdapterPair sgd_step(const AdapterPair& p, const Mat& ga, const Mat& gb, double alpha);

// Velocity update v <- beta v - alpha g applied additively to both factors;
// with beta = 0 this reproduces sgd_step bit for bit.
AdapterPair msgd_step(const AdapterPair& p, const Mat& ga, const Mat& gb, OptState& st,
                      double alpha, double beta);

// First phase of an adam iteration: updates M and V from the fresh gradient
// and, on the very first step, seeds U-hat with V_1. Must run before any
// buffer consensus of the round.
void adam_accumulate(OptState& st, const Mat& ga, const Mat& gb, const OptHyper& hp);

// Second phase: descends p_half using the pre-round U-hat floored at epsilon,
// then rolls U-hat forward with the difference-tracking rule
// uhat <- uhat_half - V_{t-1} + V_t.
AdapterPair adam_apply(const AdapterPair& p_half, OptState& st, const OptHyper& hp, double alpha);

// accumulate + apply with no communication in between (single-agent path and
// unit tests).
AdapterPair adam_step(const AdapterPair& p_half, const Mat& ga, const Mat& gb, OptState& st,
                      const OptHyper& hp, double alpha);

// Merges the U-hat accumulators across agents according to the consensus
// mode, writing the result into each state's uhat_half buffers. msgd
// velocities are deliberately not communicated.
void consensus_opt_buffers(std::vector<OptState>& states, const MixingMatrix& m, ConsensusMode mode,
                           int rank, SplitMode split_mode = SplitMode::balanced);

}  // namespace decaf
