#pragma once

#include <string>
#include <vector>

#include "decaf/adapter.hpp"
#include "decaf/svd.hpp"
#include "decaf/topology.hpp"

namespace decaf {

// The communication/merge rule used at each gossip round.
//   individual:   average A and B separately (DLoRA / FedAvg)
//   product_tsvd: average the products B^j A^j, truncate to rank r, refactor
//                 (DeCAF)
//   frozen_a:     average B only; A is shared and never moves (FA variants)
//   none:         no communication (Local baselines)
enum class ConsensusMode { individual, product_tsvd, frozen_a, none };

const char* to_string(ConsensusMode mode);

// Fully synchronous: every output is computed from the pre-round snapshot.
std::vector<AdapterPair> individual_consensus(const std::vector<AdapterPair>& states,
                                              const MixingMatrix& m);

// Per-agent record of the truncation step: the Frobenius error actually paid
// and its closed-form bound sqrt((|Nb(i)|-1) r) c^2 with c the round's max
// factor singular value over the neighborhood.
struct TsvdRoundError {
  double measured = 0.0;
  double bound = 0.0;
};

struct ProductConsensusResult {
  std::vector<AdapterPair> states;
  std::vector<TsvdRoundError> errors;
};

ProductConsensusResult product_consensus_tsvd(const std::vector<AdapterPair>& states,
                                              const MixingMatrix& m,
                                              SplitMode split_mode = SplitMode::balanced);

// Convenience evaluation of one agent's truncation error without applying
// the merge.
TsvdRoundError tsvd_round_error(const std::vector<AdapterPair>& states, const MixingMatrix& m,
                                int i, SplitMode split_mode = SplitMode::balanced);

// Requires all agents to share an identical A (within 1e-12); only B is
// averaged, which makes the consensus of products equal the product of
// consensus exactly.
std::vector<AdapterPair> frozen_a_consensus(const std::vector<AdapterPair>& states,
                                            const MixingMatrix& m);

// Bytes-equivalent volume of one synchronous round: every agent receives the
// payload from each neighbor other than itself.
long long round_message_bytes(const MixingMatrix& m, long long payload_bytes_per_edge);
long long directed_edges(const MixingMatrix& m);

}  // namespace decaf
