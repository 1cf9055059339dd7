#include "qdsg/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qdsg/errors.hpp"
#include "qdsg/rng.hpp"

namespace qdsg {

bool Box::contains(const Vec& x) const {
  for (int c = 0; c < dim(); ++c)
    if (x[c] < lower[c] || x[c] > upper[c]) return false;
  return true;
}

Box symmetric_unit_box(int d) {
  return Box{Vec(d, -1.0), Vec(d, 1.0)};
}

Vec project_box(const Vec& x, const Box& box) {
  Vec out = x;
  project_box_into(box, out);
  return out;
}

void project_box_into(const Box& box, Vec& x) {
  for (std::size_t c = 0; c < x.size(); ++c) {
    if (x[c] < box.lower[c])
      x[c] = box.lower[c];
    else if (x[c] > box.upper[c])
      x[c] = box.upper[c];
  }
}

Objective make_objective(LossKind kind, Vec a, double b, double reg, const Box& box) {
  if (static_cast<int>(a.size()) != box.dim())
    throw ConfigMismatch("objective dimension does not match the box");
  if (reg < 0.0) throw ValidationError("lambda", "must be nonnegative");
  Objective obj;
  obj.kind = kind;
  obj.a = std::move(a);
  obj.b = b;
  obj.reg = reg;
  obj.lipschitz = lipschitz_bound(obj, box);
  obj.strong_convexity = reg > 0.0 ? 2.0 * reg : 0.0;
  return obj;
}

double eval(const Objective& obj, const Vec& x) {
  const double r = dot(obj.a, x) - obj.b;
  double v = obj.kind == LossKind::quadratic ? r * r : std::fabs(r);
  if (obj.reg > 0.0) v += obj.reg * norm_sq(x);
  return v;
}

void subgrad_into(const Objective& obj, const Vec& x, Vec& out) {
  const double r = dot(obj.a, x) - obj.b;
  out.resize(x.size());
  if (obj.kind == LossKind::quadratic) {
    const double s = 2.0 * r;
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = s * obj.a[c];
  } else {
    // sign(0) := 0, a valid subgradient selection at the kink
    const double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = s * obj.a[c];
  }
  if (obj.reg > 0.0)
    for (std::size_t c = 0; c < x.size(); ++c) out[c] += 2.0 * obj.reg * x[c];
}

Vec subgrad(const Objective& obj, const Vec& x) {
  Vec out;
  subgrad_into(obj, x, out);
  return out;
}

double lipschitz_bound(const Objective& obj, const Box& box) {
  double sup_norm_x_sq = 0.0;
  for (int c = 0; c < box.dim(); ++c)
    sup_norm_x_sq += std::max(box.lower[c] * box.lower[c], box.upper[c] * box.upper[c]);
  const double sup_norm_x = std::sqrt(sup_norm_x_sq);

  if (obj.kind == LossKind::absolute) return norm(obj.a) + 2.0 * obj.reg * sup_norm_x;

  // sup of |a.x - b| over the box sits at a corner chosen by the sign of a_c.
  double hi = -obj.b, lo = -obj.b;
  for (std::size_t c = 0; c < obj.a.size(); ++c) {
    hi += std::max(obj.a[c] * box.lower[c], obj.a[c] * box.upper[c]);
    lo += std::min(obj.a[c] * box.lower[c], obj.a[c] * box.upper[c]);
  }
  const double sup_res = std::max(std::max(hi, -lo), 0.0);
  return 2.0 * sup_res * norm(obj.a) + 2.0 * obj.reg * sup_norm_x;
}

double total_eval(const std::vector<Objective>& objs, const Vec& x) {
  double s = 0.0;
  for (const auto& o : objs) s += eval(o, x);
  return s;
}

Vec total_subgrad(const std::vector<Objective>& objs, const Vec& x) {
  Vec g(x.size(), 0.0), gi;
  for (const auto& o : objs) {
    subgrad_into(o, x, gi);
    for (std::size_t c = 0; c < x.size(); ++c) g[c] += gi[c];
  }
  return g;
}

Dataset generate_dataset(int n, int d, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n", "must be >= 1");
  if (d < 1) throw ValidationError("d", "must be >= 1");
  Rng rng(seed);
  Dataset data;
  data.a.resize(n);
  data.b.resize(n);
  for (int i = 0; i < n; ++i) {
    data.a[i].resize(d);
    for (int c = 0; c < d; ++c) data.a[i][c] = rng.uniform01();
    data.b[i] = rng.uniform01();
  }
  return data;
}

std::vector<Objective> make_objectives(const Dataset& data, LossKind kind, double reg,
                                       const Box& box) {
  std::vector<Objective> objs;
  objs.reserve(data.size());
  for (int i = 0; i < data.size(); ++i)
    objs.push_back(make_objective(kind, data.a[i], data.b[i], reg, box));
  return objs;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path);
  char buf[32];
  for (int i = 0; i < data.size(); ++i) {
    for (double v : data.a[i]) {
      std::snprintf(buf, sizeof(buf), "%.17g ", v);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g\n", data.b[i]);
    out << buf;
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Dataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Vec values;
    double v;
    while (ss >> v) values.push_back(v);
    if (values.size() < 2) throw ParseError("dataset line needs at least two values");
    if (!data.a.empty() && values.size() != data.a.front().size() + 1)
      throw ParseError("inconsistent dataset dimensions");
    data.b.push_back(values.back());
    values.pop_back();
    data.a.push_back(std::move(values));
  }
  if (data.a.empty()) throw ParseError("empty dataset file");
  return data;
}

}  // namespace qdsg
