#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qdsg {

/// Undirected communication graph with node positions in the unit square.
/// Adjacency lists are sorted and never contain the node itself.
struct Graph {
  int n = 0;
  std::vector<std::array<double, 2>> coords;
  std::vector<std::vector<int>> adjacency;

  int degree(int i) const { return static_cast<int>(adjacency[i].size()); }
  bool has_edge(int i, int j) const;
  std::size_t edge_count() const;  // undirected edges
};

/// Doubly stochastic mixing weights, dense row-major storage.
struct MixingMatrix {
  int n = 0;
  std::vector<double> w;  // n*n, row-major
  double sigma2 = 0.0;    // second largest singular value

  double at(int i, int j) const { return w[static_cast<std::size_t>(i) * n + j]; }
};

bool is_connected(const Graph& g);

/// Samples node coordinates uniformly on [0,1]^2 and connects pairs with
/// Euclidean distance strictly below `radius`. Resamples all coordinates
/// until the graph is connected, up to 1000 attempts; each attempt advances
/// the seeded RNG deterministically.
///
/// Throws RetryExhausted when no connected graph was found (radius too small
/// for n), ValidationError on bad arguments.
Graph generate_geometric_graph(int n, double radius, std::uint64_t seed);

/// a_ij = 1 / (2 max(|N_i|,|N_j|)) on edges, a_ii = 1 - sum_j a_ij.
/// Doubly stochastic by construction; sigma2 is filled from a dense SVD.
MixingMatrix lazy_metropolis(const Graph& g);

/// Second largest singular value of a dense square matrix (row-major).
/// Returns 0 for 1x1 input. Throws NumericalFailure if the decomposition
/// does not converge.
double second_singular_value(const std::vector<double>& m, int n);

/// Writes "i j" per undirected edge (i < j) and "i x y" per node with six
/// decimal digits, for external plotting.
void save_graph(const Graph& g, const std::string& edge_path, const std::string& coord_path);

}  // namespace qdsg
