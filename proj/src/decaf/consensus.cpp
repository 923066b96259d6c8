#include "decaf/consensus.hpp"

#include <cmath>
#include <stdexcept>

namespace decaf {

namespace {

void check_states(const std::vector<AdapterPair>& states, const MixingMatrix& m) {
  if (static_cast<int>(states.size()) != m.n_agents)
    throw std::invalid_argument("consensus: one state per agent required");
  for (const AdapterPair& s : states) {
    if (!s.a.same_shape(states.front().a) || !s.b.same_shape(states.front().b))
      throw std::invalid_argument("consensus: adapter shapes differ across agents");
    if (s.rank != states.front().rank)
      throw std::invalid_argument("consensus: adapter ranks differ across agents");
  }
}

Mat averaged_product(const std::vector<AdapterPair>& states, const MixingMatrix& m, int i) {
  Mat acc(states.front().b.rows(), states.front().a.cols());
  for (int j = 0; j < m.n_agents; ++j) {
    const double w = m.weights(i, j);
    if (w == 0.0) continue;
    add_scaled(acc, w, matmul(states[j].b, states[j].a));
  }
  return acc;
}

double neighborhood_sigma_max(const std::vector<AdapterPair>& states, const MixingMatrix& m, int i) {
  double c = 0.0;
  for (int j = 0; j < m.n_agents; ++j) {
    if (m.weights(i, j) == 0.0) continue;
    c = std::max(c, spectral_norm(states[j].a));
    c = std::max(c, spectral_norm(states[j].b));
  }
  return c;
}

}  // namespace

const char* to_string(ConsensusMode mode) {
  switch (mode) {
    case ConsensusMode::individual: return "individual";
    case ConsensusMode::product_tsvd: return "product_tsvd";
    case ConsensusMode::frozen_a: return "frozen_a";
    case ConsensusMode::none: return "none";
  }
  return "?";
}

std::vector<AdapterPair> individual_consensus(const std::vector<AdapterPair>& states,
                                              const MixingMatrix& m) {
  check_states(states, m);
  std::vector<AdapterPair> out(states.size());
  for (int i = 0; i < m.n_agents; ++i) {
    AdapterPair next = states[i];
    next.a = Mat(next.a.rows(), next.a.cols());
    next.b = Mat(next.b.rows(), next.b.cols());
    for (int j = 0; j < m.n_agents; ++j) {
      const double w = m.weights(i, j);
      if (w == 0.0) continue;
      add_scaled(next.a, w, states[j].a);
      add_scaled(next.b, w, states[j].b);
    }
    out[i] = std::move(next);
  }
  return out;
}

ProductConsensusResult product_consensus_tsvd(const std::vector<AdapterPair>& states,
                                              const MixingMatrix& m, SplitMode split_mode) {
  check_states(states, m);
  ProductConsensusResult res;
  res.states.resize(states.size());
  res.errors.resize(states.size());
  const int r = states.front().rank;
  for (int i = 0; i < m.n_agents; ++i) {
    const Mat avg = averaged_product(states, m, i);
    const TsvdResult trunc = tsvd(avg, r);

    AdapterPair next = states[i];
    if (trunc.sigma_r.front() == 0.0) {
      // A zero average admits any rank-r factorization; keep the incoming A
      // and zero B so the product is exact and the A-side information (the
      // usual Gaussian initialization) survives the round.
      next.b = Mat(next.b.rows(), next.b.cols());
    } else {
      auto [a, b] = factor_split(trunc, split_mode);
      next.a = std::move(a);
      next.b = std::move(b);
    }
    res.states[i] = std::move(next);

    const double nb = static_cast<double>(neighborhood(m, i).size());
    const double c = neighborhood_sigma_max(states, m, i);
    res.errors[i].measured = frobenius_dist(avg, matmul(res.states[i].b, res.states[i].a));
    res.errors[i].bound = std::sqrt((nb - 1.0) * static_cast<double>(r)) * c * c;
  }
  return res;
}

TsvdRoundError tsvd_round_error(const std::vector<AdapterPair>& states, const MixingMatrix& m,
                                int i, SplitMode split_mode) {
  check_states(states, m);
  if (i < 0 || i >= m.n_agents) throw std::invalid_argument("tsvd_round_error: agent out of range");
  const Mat avg = averaged_product(states, m, i);
  const TsvdResult trunc = tsvd(avg, states.front().rank);
  auto [a, b] = factor_split(trunc, split_mode);
  TsvdRoundError err;
  err.measured = frobenius_dist(avg, matmul(b, a));
  const double nb = static_cast<double>(neighborhood(m, i).size());
  const double c = neighborhood_sigma_max(states, m, i);
  err.bound = std::sqrt((nb - 1.0) * static_cast<double>(states.front().rank)) * c * c;
  return err;
}

std::vector<AdapterPair> frozen_a_consensus(const std::vector<AdapterPair>& states,
                                            const MixingMatrix& m) {
  check_states(states, m);
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j)
      if (frobenius_dist(states[i].a, states[j].a) > 1e-12)
        throw std::invalid_argument("frozen_a_consensus: agents do not share an identical A");

  std::vector<AdapterPair> out(states.size());
  for (int i = 0; i < m.n_agents; ++i) {
    AdapterPair next = states[i];
    next.b = Mat(next.b.rows(), next.b.cols());
    for (int j = 0; j < m.n_agents; ++j) {
      const double w = m.weights(i, j);
      if (w == 0.0) continue;
      add_scaled(next.b, w, states[j].b);
    }
    out[i] = std::move(next);
  }
  return out;
}

long long directed_edges(const MixingMatrix& m) {
  long long edges = 0;
  for (int i = 0; i < m.n_agents; ++i)
    for (int j = 0; j < m.n_agents; ++j)
      if (i != j && m.weights(i, j) > 0.0) ++edges;
  return edges;
}

long long round_message_bytes(const MixingMatrix& m, long long payload_bytes_per_edge) {
  return directed_edges(m) * payload_bytes_per_edge;
}

}  // namespace decaf
