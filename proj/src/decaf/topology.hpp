#pragma once

#include <optional>
#include <string>
#include <vector>

#include "decaf/mat.hpp"

namespace decaf {

enum class TopologyKind { fully_connected, ring, bipartite, torus, star, custom };

const char* to_string(TopologyKind kind);
TopologyKind topology_kind_from_string(const std::string& name);

// Symmetric doubly stochastic gossip matrix. Every row/column sums to one
// within 1e-12, every diagonal entry is positive (each agent always hears
// itself), and the structure is immutable after construction.
struct MixingMatrix {
  int n_agents = 0;
  Mat weights;
  TopologyKind kind = TopologyKind::custom;
};

struct SpectralReport {
  double rho = 0.0;           // max(|lambda_2|, |lambda_N|)^2
  double spectral_gap = 0.0;  // 1 - sqrt(rho)
  bool connected = false;
};

struct GridDims {
  int rows = 0;
  int cols = 0;
};

// Built-in topologies are all regular graphs with uniform weights over the
// closed neighborhood, so double stochasticity holds by construction:
//   fully_connected / star : every entry 1/N
//   ring                   : 1/3 on self and the two cyclic neighbors
//   bipartite              : complete bipartite with equal sides, 1/(N/2+1)
//   torus                  : wraparound grid, uniform over {self,up,down,left,right}
// Torus takes n_agents as a perfect square unless explicit dims are given.
MixingMatrix build_topology(TopologyKind kind, int n_agents,
                            std::optional<GridDims> torus_dims = std::nullopt);

// Custom matrices are validated against all MixingMatrix invariants.
MixingMatrix custom_topology(const Mat& weights);
MixingMatrix load_topology_csv(const std::string& path);

void validate_mixing_matrix(const MixingMatrix& m);

SpectralReport spectral_report(const MixingMatrix& m);

// Indices j with pi_ij > 0, ascending; always contains i itself.
std::vector<int> neighborhood(const MixingMatrix& m, int i);

}  // namespace decaf
