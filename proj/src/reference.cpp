#include <algorithm>
#include <cmath>

#include "qdsg/errors.hpp"
#include "qdsg/problems.hpp"

namespace qdsg {

namespace {

constexpr long kIterationCap = 10'000'000;

Vec box_midpoint(const Box& box) {
  Vec x(box.dim());
  for (int c = 0; c < box.dim(); ++c) x[c] = 0.5 * (box.lower[c] + box.upper[c]);
  return x;
}

// Upper bound on f(x) - f* for convex f over the box: the linearization gap
// max_{y in box} g(x)^T (x - y), exact per coordinate.
double linearization_gap(const Vec& g, const Vec& x, const Box& box) {
  double gap = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c)
    gap += g[c] > 0.0 ? g[c] * (x[c] - box.lower[c]) : g[c] * (x[c] - box.upper[c]);
  return gap;
}

// Projected gradient with backtracking for the smooth (quadratic) case.
ReferenceSolution solve_quadratic(const std::vector<Objective>& objs, const Box& box,
                                  double tol) {
  Vec x = box_midpoint(box);
  double fx = total_eval(objs, x);
  Vec best_x = x;
  double best_f = fx;
  double t = 1.0;

  for (long it = 0; it < kIterationCap; ++it) {
    const Vec g = total_subgrad(objs, x);
    const double gap = linearization_gap(g, x, box);
    if (gap <= tol) {
      ReferenceSolution sol;
      sol.x_star = best_f <= fx ? best_x : x;
      sol.f_star = total_eval(objs, sol.x_star);
      sol.tol = std::max(gap, 0.0);
      return sol;
    }
    // shrink t until the quadratic upper model holds at the trial point
    Vec x_next;
    double f_next = 0.0;
    for (;;) {
      x_next = x;
      for (std::size_t c = 0; c < x.size(); ++c) x_next[c] -= t * g[c];
      project_box_into(box, x_next);
      f_next = total_eval(objs, x_next);
      double lin = fx, move_sq = 0.0;
      for (std::size_t c = 0; c < x.size(); ++c) {
        const double dxc = x_next[c] - x[c];
        lin += g[c] * dxc;
        move_sq += dxc * dxc;
      }
      if (f_next <= lin + move_sq / (2.0 * t) + 1e-15 * std::fabs(fx)) break;
      t *= 0.5;
      if (t < 1e-18) break;
    }
    x = std::move(x_next);
    fx = f_next;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    t = std::min(t * 1.25, 1e12);
  }
  throw NoProgress("quadratic reference solve hit the iteration cap");
}

// Primal-dual splitting for sum_i |a_i.x - b_i| + reg_total ||x||^2 over the
// box. Feasible primal iterates plus an explicit dual value give a certified
// optimality gap, which drives termination.
ReferenceSolution solve_absolute(const std::vector<Objective>& objs, const Box& box, double tol) {
  const int n = static_cast<int>(objs.size());
  const int d = box.dim();
  double reg_total = 0.0;
  for (const auto& o : objs) reg_total += o.reg;

  // spectral norm of the stacked data matrix, by power iteration on A^T A
  Vec u(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double a_norm = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vec w(d, 0.0);
    for (const auto& o : objs) {
      const double s = dot(o.a, u);
      for (int c = 0; c < d; ++c) w[c] += s * o.a[c];
    }
    a_norm = std::sqrt(norm(w));
    const double nw = norm(w);
    if (nw == 0.0) break;
    for (int c = 0; c < d; ++c) u[c] = w[c] / nw;
  }
  if (a_norm == 0.0) a_norm = 1.0;
  const double tau = 0.95 / a_norm;
  const double sigma = 0.95 / a_norm;

  Vec x = box_midpoint(box);
  Vec x_bar = x;
  Vec y(n, 0.0);
  Vec best_x = x;
  double best_f = total_eval(objs, x);

  for (long it = 0; it < kIterationCap; ++it) {
    for (int i = 0; i < n; ++i) {
      const double yi = y[i] + sigma * (dot(objs[i].a, x_bar) - objs[i].b);
      y[i] = std::clamp(yi, -1.0, 1.0);
    }
    Vec aty(d, 0.0);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) aty[c] += y[i] * objs[i].a[c];

    Vec x_next(d);
    const double shrink = 1.0 / (1.0 + 2.0 * tau * reg_total);
    for (int c = 0; c < d; ++c) x_next[c] = (x[c] - tau * aty[c]) * shrink;
    project_box_into(box, x_next);
    for (int c = 0; c < d; ++c) x_bar[c] = 2.0 * x_next[c] - x[c];
    x = std::move(x_next);

    if (it % 50 == 0 || it == kIterationCap - 1) {
      const double fx = total_eval(objs, x);
      if (fx < best_f) {
        best_f = fx;
        best_x = x;
      }
      // dual value: -b.y + sum_c min_{x_c in box} (A^T y)_c x_c + reg x_c^2
      double dual = 0.0;
      for (int i = 0; i < n; ++i) dual -= objs[i].b * y[i];
      for (int c = 0; c < d; ++c) {
        const double s = aty[c];
        if (reg_total > 0.0) {
          const double xc = std::clamp(-s / (2.0 * reg_total), box.lower[c], box.upper[c]);
          dual += s * xc + reg_total * xc * xc;
        } else {
          dual += std::min(s * box.lower[c], s * box.upper[c]);
        }
      }
      const double gap = best_f - dual;
      if (gap <= tol) {
        ReferenceSolution sol;
        sol.x_star = best_x;
        sol.f_star = best_f;
        sol.tol = std::max(gap, 0.0);
        return sol;
      }
    }
  }
  throw NoProgress("absolute reference solve hit the iteration cap");
}

}  // namespace

ReferenceSolution solve_reference(const std::vector<Objective>& objs, const Box& box,
                                  double tol) {
  if (objs.empty()) throw ValidationError("objectives", "must be nonempty");
  if (!(tol > 0.0)) throw ValidationError("tol", "must be > 0");
  const bool all_quadratic =
      std::all_of(objs.begin(), objs.end(),
                  [](const Objective& o) { return o.kind == LossKind::quadratic; });
  const bool all_absolute =
      std::all_of(objs.begin(), objs.end(),
                  [](const Objective& o) { return o.kind == LossKind::absolute; });
  if (all_quadratic) return solve_quadratic(objs, box, tol);
  if (all_absolute) return solve_absolute(objs, box, tol);
  throw ConfigMismatch("mixed loss kinds are not supported by the reference solver");
}

}  // namespace qdsg
