#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdsg/vecmath.hpp"

namespace qdsg {

/// Rectangular constraint set.
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x) const;
};

/// [-1, 1]^d, the constraint set used by the regression experiments.
Box symmetric_unit_box(int d);

Vec project_box(const Vec& x, const Box& box);
void project_box_into(const Box& box, Vec& x);

enum class LossKind { quadratic, absolute };

/// One node's local objective over a sample (a, b):
///   quadratic: (a.x - b)^2 + reg ||x||^2
///   absolute:  |a.x - b|   + reg ||x||^2
/// `lipschitz` bounds the subgradient norm over the construction box;
/// `strong_convexity` is 2*reg (0 when unregularized).
struct Objective {
  LossKind kind = LossKind::quadratic;
  Vec a;
  double b = 0.0;
  double reg = 0.0;
  double lipschitz = 0.0;
  double strong_convexity = 0.0;
};

Objective make_objective(LossKind kind, Vec a, double b, double reg, const Box& box);

double eval(const Objective& obj, const Vec& x);
Vec subgrad(const Objective& obj, const Vec& x);
void subgrad_into(const Objective& obj, const Vec& x, Vec& out);

/// Subgradient norm bound over the box, exact at a sign-chosen corner.
double lipschitz_bound(const Objective& obj, const Box& box);

double total_eval(const std::vector<Objective>& objs, const Vec& x);
Vec total_subgrad(const std::vector<Objective>& objs, const Vec& x);

struct Dataset {
  std::vector<Vec> a;
  Vec b;

  int size() const { return static_cast<int>(b.size()); }
};

/// n samples with all entries of a_i and b_i i.i.d. uniform on [0,1),
/// deterministic per seed. Draw order: a_i entries then b_i, per sample.
Dataset generate_dataset(int n, int d, std::uint64_t seed);

std::vector<Objective> make_objectives(const Dataset& data, LossKind kind, double reg,
                                       const Box& box);

/// Plain text, one line per sample: "a_1 ... a_d b", 17 significant digits.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

struct ReferenceSolution {
  Vec x_star;
  double f_star = 0.0;
  double tol = 0.0;  // certified duality / optimality gap at termination
};

/// High-accuracy centralized solution of min over the box of sum f_i.
/// Quadratic losses use projected gradient with backtracking; absolute
/// losses use a primal-dual splitting. Both run until a computable
/// optimality certificate falls below tol. Throws NoProgress if the 1e7
/// iteration cap is reached first.
ReferenceSolution solve_reference(const std::vector<Objective>& objs, const Box& box, double tol);

}  // namespace qdsg
