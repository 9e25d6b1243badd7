#include <doctest.h>

#include <cmath>

#include "ewn/rng.hpp"
#include "ewn/svm.hpp"

using namespace ewn;

namespace {
LabeledSet planar(std::vector<double> X, std::vector<int> y) {
  LabeledSet s;
  s.d = 2;
  s.m = static_cast<int>(y.size());
  s.X = std::move(X);
  s.y = std::move(y);
  return s;
}
}  // namespace

TEST_CASE("oracle: symmetric pair") {
  auto s = planar({1, 0, -1, 0}, {1, -1});
  auto sol = max_margin_oracle(s);
  CHECK(sol.margin == doctest::Approx(1.0));
  CHECK(sol.w_star[0] == doctest::Approx(1.0));
  CHECK(std::fabs(sol.w_star[1]) < 1e-12);
}

TEST_CASE("oracle: single point margin is its norm") {
  auto s = planar({2, 1}, {1});
  auto sol = max_margin_oracle(s);
  CHECK(sol.margin == doctest::Approx(std::sqrt(5.0)));
  CHECK(sol.w_star[0] == doctest::Approx(2 / std::sqrt(5.0)));
  CHECK(sol.w_star[1] == doctest::Approx(1 / std::sqrt(5.0)));
}

TEST_CASE("oracle: inseparable input throws") {
  auto s = planar({1, 0, -1, 0, 0, 1, 0, -1}, {1, 1, -1, -1});
  // +/- points interleaved around the origin: no homogeneous separator
  CHECK_THROWS_AS(max_margin_oracle(s), InseparableError);
}

TEST_CASE("oracle vs direction sweep on random planar sets") {
  Rng rng(71);
  for (int t = 0; t < 10; ++t) {
    // random separable set
    double th = rng.uniform(0, 2 * M_PI);
    double wx = std::cos(th), wy = std::sin(th);
    LabeledSet s;
    s.d = 2;
    while (s.m < 20) {
      double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
      double v = wx * x + wy * y;
      if (std::fabs(v) < 0.15) continue;
      s.X.push_back(x);
      s.X.push_back(y);
      s.y.push_back(v > 0 ? 1 : -1);
      ++s.m;
    }
    auto sol = max_margin_oracle(s);
    double best = -1e300;
    const int sweeps = 100000;
    for (int a = 0; a < sweeps; ++a) {
      double phi = 2 * M_PI * a / sweeps;
      double ux = std::cos(phi), uy = std::sin(phi);
      double mn = 1e300;
      for (int i = 0; i < s.m; ++i)
        mn = std::min(mn, s.y[i] * (ux * s.row(i)[0] + uy * s.row(i)[1]));
      best = std::max(best, mn);
    }
    CHECK(sol.margin >= best - 1e-12);
    CHECK(std::fabs(sol.margin - best) <= 1e-4);
  }
}

TEST_CASE("oracle in higher dimension agrees with 2d embedding") {
  Rng rng(73);
  LabeledSet s2 = planar({0.9, 0.1, -0.8, -0.3, 0.7, 0.6, -0.6, -0.7}, {1, -1, 1, -1});
  auto sol2 = max_margin_oracle(s2);
  LabeledSet s3;
  s3.d = 3;
  s3.m = s2.m;
  s3.y = s2.y;
  for (int i = 0; i < s2.m; ++i) {
    s3.X.push_back(s2.row(i)[0]);
    s3.X.push_back(s2.row(i)[1]);
    s3.X.push_back(0.0);
  }
  auto sol3 = max_margin_oracle(s3);
  CHECK(sol3.margin == doctest::Approx(sol2.margin).epsilon(1e-6));
}

TEST_CASE("oracle duals reconstruct w_star") {
  Rng rng(79);
  auto s = gen_linsep(20, 2, 0.3, 4);
  auto sol = max_margin_oracle(s);
  std::vector<double> r(2, 0.0);
  for (size_t a = 0; a < sol.support_indices.size(); ++a)
    for (int c = 0; c < 2; ++c)
      r[c] += sol.duals[a] * s.y[sol.support_indices[a]] * s.row(sol.support_indices[a])[c];
  CHECK(r[0] == doctest::Approx(sol.w_star[0]).epsilon(1e-8));
  CHECK(r[1] == doctest::Approx(sol.w_star[1]).epsilon(1e-8));
}
