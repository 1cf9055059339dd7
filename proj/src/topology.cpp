#include "qdsg/topology.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

#include "qdsg/errors.hpp"
#include "qdsg/rng.hpp"

namespace qdsg {

bool Graph::has_edge(int i, int j) const {
  const auto& nb = adjacency[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::size_t Graph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& nb : adjacency) twice += nb.size();
  return twice / 2;
}

bool is_connected(const Graph& g) {
  if (g.n <= 1) return true;
  std::vector<char> seen(g.n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : g.adjacency[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count == g.n;
}

Graph generate_geometric_graph(int n, double radius, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n", "node count must be >= 1");
  if (!(radius > 0.0)) throw ValidationError("radius", "must be > 0");

  constexpr int kMaxAttempts = 1000;
  const double r_sq = radius * radius;
  Rng rng(seed);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Graph g;
    g.n = n;
    g.coords.resize(n);
    for (auto& c : g.coords) {
      c[0] = rng.uniform01();
      c[1] = rng.uniform01();
    }
    g.adjacency.assign(n, {});
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double dx = g.coords[i][0] - g.coords[j][0];
        const double dy = g.coords[i][1] - g.coords[j][1];
        if (dx * dx + dy * dy < r_sq) {
          g.adjacency[i].push_back(j);
          g.adjacency[j].push_back(i);
        }
      }
    }
    if (is_connected(g)) return g;
  }
  throw RetryExhausted("no connected geometric graph after 1000 attempts (n=" + std::to_string(n) +
                       ", radius=" + std::to_string(radius) + ")");
}

MixingMatrix lazy_metropolis(const Graph& g) {
  const int n = g.n;
  MixingMatrix m;
  m.n = n;
  m.w.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    double off_sum = 0.0;
    for (int j : g.adjacency[i]) {
      const double a = 1.0 / (2.0 * std::max(g.degree(i), g.degree(j)));
      m.w[static_cast<std::size_t>(i) * n + j] = a;
      off_sum += a;
    }
    m.w[static_cast<std::size_t>(i) * n + i] = 1.0 - off_sum;
  }
  m.sigma2 = second_singular_value(m.w, n);
  return m;
}

double second_singular_value(const std::vector<double>& m, int n) {
  if (n < 1 || m.size() != static_cast<std::size_t>(n) * n)
    throw ValidationError("m", "matrix must be square n*n");
  if (n == 1) return 0.0;
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> a(m.data(), n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  if (svd.info() != Eigen::Success)
    throw NumericalFailure("singular value decomposition did not converge");
  return svd.singularValues()(1);
}

void save_graph(const Graph& g, const std::string& edge_path, const std::string& coord_path) {
  std::ofstream edges(edge_path);
  if (!edges) throw IoError("cannot open " + edge_path);
  for (int i = 0; i < g.n; ++i)
    for (int j : g.adjacency[i])
      if (i < j) edges << i << " " << j << "\n";

  std::ofstream coords(coord_path);
  if (!coords) throw IoError("cannot open " + coord_path);
  char buf[96];
  for (int i = 0; i < g.n; ++i) {
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f\n", i, g.coords[i][0], g.coords[i][1]);
    coords << buf;
  }
}

}  // namespace qdsg
