#include <doctest.h>

#include <cmath>
#include <fstream>

#include "qdsg/errors.hpp"
#include "qdsg/problems.hpp"
#include "qdsg/rng.hpp"
#include "test_util.hpp"

using namespace qdsg;

namespace {

Vec random_point(const Box& box, Rng& rng) {
  Vec x(box.dim());
  for (int c = 0; c < box.dim(); ++c)
    x[c] = box.lower[c] + (box.upper[c] - box.lower[c]) * rng.uniform01();
  return x;
}

}  // namespace

TEST_CASE("objective evaluation") {
  Box box = symmetric_unit_box(2);
  Objective quad = make_objective(LossKind::quadratic, {1.0, 0.0}, 0.0, 0.0, box);
  CHECK(eval(quad, {1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval(quad, {0.0, 0.7}) == 0.0);  // residual zero

  Box line = symmetric_unit_box(1);
  Objective abs = make_objective(LossKind::absolute, {2.0}, 1.0, 0.0, line);
  CHECK(eval(abs, {0.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval(abs, {0.5}) == 0.0);
}

TEST_CASE("subgradients") {
  Box box = symmetric_unit_box(2);
  Objective quad = make_objective(LossKind::quadratic, {1.0, 0.0}, 0.0, 0.0, box);
  CHECK(subgrad(quad, {1.0, 1.0}) == Vec{2.0, 0.0});

  Objective abs = make_objective(LossKind::absolute, {3.0, -1.0}, 0.5, 0.0, box);
  // at the kink the zero vector is a valid selection
  const Vec kink{0.5, 1.0};
  REQUIRE(dot(abs.a, kink) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(subgrad(abs, kink) == Vec{0.0, 0.0});
}

TEST_CASE("quadratic subgradient matches central differences") {
  Box box = symmetric_unit_box(3);
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    Objective obj = make_objective(LossKind::quadratic,
                                   {rng.uniform01(), rng.uniform01(), rng.uniform01()},
                                   rng.uniform01(), 0.0, box);
    const Vec x = random_point(box, rng);
    const Vec g = subgrad(obj, x);
    const double h = 1e-5;
    for (int c = 0; c < 3; ++c) {
      Vec xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      const double fd = (eval(obj, xp) - eval(obj, xm)) / (2.0 * h);
      CHECK(std::fabs(fd - g[c]) <= 1e-6);
    }
  }
}

TEST_CASE("subgradient inequality holds for both kinds") {
  Box box = symmetric_unit_box(3);
  Rng rng(23);
  long failures = 0;
  for (int t = 0; t < 100000; ++t) {
    const LossKind kind = (t % 2 == 0) ? LossKind::quadratic : LossKind::absolute;
    const double reg = (t % 4 < 2) ? 0.0 : 0.05;
    Objective obj = make_objective(kind, {rng.uniform01(), rng.uniform01(), rng.uniform01()},
                                   rng.uniform01(), reg, box);
    const Vec x = random_point(box, rng);
    const Vec y = random_point(box, rng);
    const Vec g = subgrad(obj, x);
    double lin = eval(obj, x);
    for (int c = 0; c < 3; ++c) lin += g[c] * (y[c] - x[c]);
    if (eval(obj, y) < lin - 1e-10) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("strong convexity inequality with regularization") {
  Box box = symmetric_unit_box(2);
  Rng rng(29);
  long failures = 0;
  for (int t = 0; t < 50000; ++t) {
    const LossKind kind = (t % 2 == 0) ? LossKind::quadratic : LossKind::absolute;
    Objective obj = make_objective(kind, {rng.uniform01(), rng.uniform01()}, rng.uniform01(),
                                   0.05, box);
    REQUIRE(obj.strong_convexity == doctest::Approx(0.1));
    const Vec x = random_point(box, rng);
    const Vec y = random_point(box, rng);
    const Vec g = subgrad(obj, x);
    double lin = eval(obj, x);
    for (int c = 0; c < 2; ++c) lin += g[c] * (y[c] - x[c]);
    const double lhs = eval(obj, y) - lin;
    if (lhs < 0.5 * obj.strong_convexity * dist_sq(x, y) - 1e-10) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("Lipschitz bound") {
  Box box = symmetric_unit_box(2);
  Objective abs = make_objective(LossKind::absolute, {3.0, 4.0}, 0.3, 0.0, box);
  CHECK(abs.lipschitz == doctest::Approx(5.0).epsilon(1e-15));

  Box line = symmetric_unit_box(1);
  Objective quad = make_objective(LossKind::quadratic, {1.0}, 0.0, 0.0, line);
  CHECK(quad.lipschitz == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("Lipschitz bound dominates sampled subgradient norms") {
  Box box = symmetric_unit_box(4);
  Rng rng(31);
  for (int variant = 0; variant < 4; ++variant) {
    const LossKind kind = variant % 2 == 0 ? LossKind::quadratic : LossKind::absolute;
    const double reg = variant < 2 ? 0.0 : 0.1;
    Vec a(4);
    for (auto& v : a) v = 2.0 * rng.uniform01() - 1.0;
    Objective obj = make_objective(kind, a, rng.uniform01(), reg, box);
    double max_norm = 0.0;
    for (int t = 0; t < 10000; ++t)
      max_norm = std::max(max_norm, norm(subgrad(obj, random_point(box, rng))));
    CHECK(obj.lipschitz >= max_norm);
  }
}

TEST_CASE("box projection") {
  Box box = symmetric_unit_box(2);
  CHECK(project_box({0.3, -0.8}, box) == Vec{0.3, -0.8});
  CHECK(project_box({2.0, -3.0}, box) == Vec{1.0, -1.0});

  Rng rng(37);
  long failures = 0;
  for (int t = 0; t < 50000; ++t) {
    Vec x{4.0 * rng.uniform01() - 2.0, 4.0 * rng.uniform01() - 2.0};
    Vec y{4.0 * rng.uniform01() - 2.0, 4.0 * rng.uniform01() - 2.0};
    const Vec px = project_box(x, box);
    const Vec py = project_box(y, box);
    if (project_box(px, box) != px) ++failures;              // idempotent
    if (dist(px, py) > dist(x, y) + 1e-15) ++failures;       // nonexpansive
  }
  CHECK(failures == 0);
}

TEST_CASE("dataset generation") {
  Dataset a = generate_dataset(1000, 9, 5);
  Dataset b = generate_dataset(1000, 9, 5);
  CHECK(a.a == b.a);
  CHECK(a.b == b.b);

  double sum = 0.0;
  long count = 0;
  for (const auto& row : a.a)
    for (double v : row) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
      sum += v;
      ++count;
    }
  for (double v : a.b) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    sum += v;
    ++count;
  }
  REQUIRE(count >= 10000);
  CHECK(std::fabs(sum / count - 0.5) <= 0.02);
}

TEST_CASE("dataset text round trip") {
  Dataset data = generate_dataset(7, 3, 123);
  auto dir = test_util::fresh_dir("dataset_io");
  save_dataset(data, dir + "/dataset.txt");
  Dataset back = load_dataset(dir + "/dataset.txt");
  REQUIRE(back.size() == data.size());
  CHECK(back.a == data.a);  // 17 significant digits reproduce doubles exactly
  CHECK(back.b == data.b);
}

TEST_CASE("dataset loader rejects malformed files") {
  auto dir = test_util::fresh_dir("dataset_bad");
  {
    std::ofstream out(dir + "/ragged.txt");
    out << "0.1 0.2 0.3\n0.4 0.5\n";
  }
  CHECK_THROWS_AS(load_dataset(dir + "/ragged.txt"), ParseError);
  {
    std::ofstream out(dir + "/short.txt");
    out << "0.25\n";
  }
  CHECK_THROWS_AS(load_dataset(dir + "/short.txt"), ParseError);
  {
    std::ofstream out(dir + "/empty.txt");
  }
  CHECK_THROWS_AS(load_dataset(dir + "/empty.txt"), ParseError);
  CHECK_THROWS_AS(load_dataset(dir + "/missing.txt"), IoError);
}

TEST_CASE("reference solution: interior quadratic minimum") {
  Box box = symmetric_unit_box(1);
  std::vector<Objective> objs{make_objective(LossKind::quadratic, {1.0}, 0.5, 0.0, box)};
  ReferenceSolution sol = solve_reference(objs, box, 1e-12);
  CHECK(std::fabs(sol.x_star[0] - 0.5) <= 1e-7);
  CHECK(sol.f_star <= 1e-12);
}

TEST_CASE("reference solution: absolute loss pinned at the boundary") {
  Box box = symmetric_unit_box(1);
  std::vector<Objective> objs{make_objective(LossKind::absolute, {1.0}, 2.0, 0.0, box)};
  ReferenceSolution sol = solve_reference(objs, box, 1e-10);

  // 1-D grid search oracle at resolution 1e-6
  double best_f = 1e300, best_x = 0.0;
  for (long i = 0; i <= 2000000; ++i) {
    const double x = -1.0 + static_cast<double>(i) * 1e-6;
    const double f = std::fabs(x - 2.0);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  CHECK(std::fabs(sol.x_star[0] - best_x) <= 1e-6);
  CHECK(std::fabs(sol.f_star - best_f) <= 1e-8);
  CHECK(sol.f_star == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reference solution: 1-D least squares closed form") {
  Box box = symmetric_unit_box(1);
  Dataset data = generate_dataset(20, 1, 77);
  auto objs = make_objectives(data, LossKind::quadratic, 0.0, box);
  ReferenceSolution sol = solve_reference(objs, box, 1e-12);

  double num = 0.0, den = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    num += data.a[i][0] * data.b[i];
    den += data.a[i][0] * data.a[i][0];
  }
  const double x_closed = std::clamp(num / den, -1.0, 1.0);
  double f_closed = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const double r = data.a[i][0] * x_closed - data.b[i];
    f_closed += r * r;
  }
  CHECK(std::fabs(sol.x_star[0] - x_closed) <= 1e-6);
  CHECK(std::fabs(sol.f_star - f_closed) <= 1e-8);
}

TEST_CASE("reference solution: regularized absolute loss vs grid search") {
  Box box = symmetric_unit_box(1);
  std::vector<Objective> objs{make_objective(LossKind::absolute, {1.0}, 0.5, 0.1, box)};
  ReferenceSolution sol = solve_reference(objs, box, 1e-10);

  double best_f = 1e300;
  for (long i = 0; i <= 2000000; ++i) {
    const double x = -1.0 + static_cast<double>(i) * 1e-6;
    const double f = std::fabs(x - 0.5) + 0.1 * x * x;
    best_f = std::min(best_f, f);
  }
  CHECK(std::fabs(sol.f_star - best_f) <= 1e-7);
}

TEST_CASE("reference value lower-bounds random feasible points") {
  Box box = symmetric_unit_box(4);
  Rng rng(41);
  for (LossKind kind : {LossKind::quadratic, LossKind::absolute}) {
    Dataset data = generate_dataset(15, 4, 88);
    auto objs = make_objectives(data, kind, 0.0, box);
    ReferenceSolution sol = solve_reference(objs, box, 1e-9);
    for (int t = 0; t < 1000; ++t)
      CHECK(sol.f_star <= total_eval(objs, random_point(box, rng)) + 1e-9);
  }
}

TEST_CASE("reference solver input validation") {
  Box box = symmetric_unit_box(1);
  std::vector<Objective> objs{make_objective(LossKind::quadratic, {1.0}, 0.0, 0.0, box)};
  CHECK_THROWS_AS(solve_reference(objs, box, 0.0), ValidationError);
  CHECK_THROWS_AS(solve_reference({}, box, 1e-9), ValidationError);
}
