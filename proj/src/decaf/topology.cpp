#include "decaf/topology.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "decaf/svd.hpp"

namespace decaf {

namespace {

constexpr double kStochasticTol = 1e-12;

MixingMatrix uniform_over_neighborhoods(TopologyKind kind, int n,
                                        const std::vector<std::vector<int>>& nbhd) {
  // All built-in graphs are regular, so uniform closed-neighborhood weights
  // give a symmetric doubly stochastic matrix.
  MixingMatrix m;
  m.n_agents = n;
  m.kind = kind;
  m.weights = Mat(n, n);
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 / static_cast<double>(nbhd[i].size());
    for (int j : nbhd[i]) m.weights(i, j) = w;
  }
  validate_mixing_matrix(m);
  return m;
}

std::vector<std::vector<int>> torus_neighborhoods(int rows, int cols) {
  const int n = rows * cols;
  std::vector<std::vector<int>> nbhd(n);
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = id(r, c);
      std::vector<int> set = {i,
                              id((r + rows - 1) % rows, c),
                              id((r + 1) % rows, c),
                              id(r, (c + cols - 1) % cols),
                              id(r, (c + 1) % cols)};
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
      nbhd[i] = std::move(set);
    }
  }
  return nbhd;
}

}  // namespace

const char* to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::fully_connected: return "fully_connected";
    case TopologyKind::ring: return "ring";
    case TopologyKind::bipartite: return "bipartite";
    case TopologyKind::torus: return "torus";
    case TopologyKind::star: return "star";
    case TopologyKind::custom: return "custom";
  }
  return "?";
}

TopologyKind topology_kind_from_string(const std::string& name) {
  if (name == "fully_connected") return TopologyKind::fully_connected;
  if (name == "ring") return TopologyKind::ring;
  if (name == "bipartite") return TopologyKind::bipartite;
  if (name == "torus") return TopologyKind::torus;
  if (name == "star") return TopologyKind::star;
  if (name == "custom") return TopologyKind::custom;
  throw std::invalid_argument("unknown topology kind '" + name + "'");
}

MixingMatrix build_topology(TopologyKind kind, int n_agents, std::optional<GridDims> torus_dims) {
  if (n_agents < 1) throw std::invalid_argument("build_topology: n_agents must be >= 1");
  const int n = n_agents;
  std::vector<std::vector<int>> nbhd(n);
  switch (kind) {
    case TopologyKind::fully_connected:
    case TopologyKind::star: {
      // Star models server-coordinated uniform averaging, which equals the
      // fully connected consensus step under full participation.
      for (int i = 0; i < n; ++i) {
        nbhd[i].resize(n);
        for (int j = 0; j < n; ++j) nbhd[i][j] = j;
      }
      break;
    }
    case TopologyKind::ring: {
      for (int i = 0; i < n; ++i) {
        std::vector<int> set = {i, (i + n - 1) % n, (i + 1) % n};
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
        nbhd[i] = std::move(set);
      }
      break;
    }
    case TopologyKind::bipartite: {
      if (n % 2 != 0)
        throw std::invalid_argument("build_topology: bipartite requires an even number of agents");
      const int half = n / 2;
      for (int i = 0; i < n; ++i) {
        nbhd[i].push_back(i);
        const int lo = i < half ? half : 0;
        for (int j = lo; j < lo + half; ++j) nbhd[i].push_back(j);
        std::sort(nbhd[i].begin(), nbhd[i].end());
      }
      break;
    }
    case TopologyKind::torus: {
      GridDims dims;
      if (torus_dims) {
        dims = *torus_dims;
        if (dims.rows < 1 || dims.cols < 1 || dims.rows * dims.cols != n)
          throw std::invalid_argument("build_topology: torus grid dims must multiply to n_agents");
      } else {
        const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
        if (g * g != n)
          throw std::invalid_argument(
              "build_topology: torus requires a perfect-square number of agents or explicit grid dims");
        dims = {g, g};
      }
      nbhd = torus_neighborhoods(dims.rows, dims.cols);
      break;
    }
    case TopologyKind::custom:
      throw std::invalid_argument("build_topology: custom topologies need an explicit matrix");
  }
  return uniform_over_neighborhoods(kind, n, nbhd);
}

MixingMatrix custom_topology(const Mat& weights) {
  MixingMatrix m;
  m.n_agents = weights.rows();
  m.weights = weights;
  m.kind = TopologyKind::custom;
  validate_mixing_matrix(m);
  return m;
}

MixingMatrix load_topology_csv(const std::string& path) {
  return custom_topology(read_csv(path));
}

void validate_mixing_matrix(const MixingMatrix& m) {
  const int n = m.n_agents;
  if (n < 1) throw std::invalid_argument("mixing matrix: needs at least one agent");
  if (m.weights.rows() != n || m.weights.cols() != n)
    throw std::invalid_argument("mixing matrix: weights must be n_agents x n_agents");
  if (!m.weights.all_finite()) throw std::invalid_argument("mixing matrix: non-finite entries");
  for (int i = 0; i < n; ++i) {
    if (m.weights(i, i) <= 0.0)
      throw std::invalid_argument("mixing matrix: diagonal entry " + std::to_string(i) +
                                  " must be positive (self-loop)");
    double row = 0.0, col = 0.0;
    for (int j = 0; j < n; ++j) {
      const double w = m.weights(i, j);
      if (w < 0.0) throw std::invalid_argument("mixing matrix: negative weight");
      if (std::fabs(w - m.weights(j, i)) > kStochasticTol)
        throw std::invalid_argument("mixing matrix: not symmetric");
      row += w;
      col += m.weights(j, i);
    }
    if (std::fabs(row - 1.0) > kStochasticTol || std::fabs(col - 1.0) > kStochasticTol)
      throw std::invalid_argument("mixing matrix: rows/columns must sum to 1 (doubly stochastic)");
  }
}

SpectralReport spectral_report(const MixingMatrix& m) {
  validate_mixing_matrix(m);
  const int n = m.n_agents;

  std::vector<double> eig = symmetric_eigenvalues(m.weights);
  if (std::fabs(eig.front() - 1.0) > 1e-10)
    throw std::runtime_error("spectral_report: leading eigenvalue is not 1");

  SpectralReport rep;
  if (n == 1) {
    rep.rho = 0.0;
    rep.connected = true;
  } else {
    const double second = std::max(std::fabs(eig[1]), std::fabs(eig[n - 1]));
    rep.rho = std::min(second * second, 1.0);

    // Connectivity from the support of the off-diagonal weights.
    std::vector<int> stack = {0};
    std::vector<bool> seen(n, false);
    seen[0] = true;
    int reached = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j) {
        if (!seen[j] && i != j && m.weights(i, j) > 0.0) {
          seen[j] = true;
          ++reached;
          stack.push_back(j);
        }
      }
    }
    rep.connected = reached == n;
  }
  rep.spectral_gap = 1.0 - std::sqrt(rep.rho);
  return rep;
}

std::vector<int> neighborhood(const MixingMatrix& m, int i) {
  if (i < 0 || i >= m.n_agents) throw std::invalid_argument("neighborhood: agent index out of range");
  std::vector<int> out;
  for (int j = 0; j < m.n_agents; ++j)
    if (m.weights(i, j) > 0.0) out.push_back(j);
  return out;
}

}  // namespace decaf
