#include "pelrec/errors.hpp"
#include "pelrec/image.hpp"
#include "pelrec/regression.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace pelrec;

namespace {

Frame from_function(int w, int h, auto&& f) {
  Frame out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(x, y) = f(double(x), double(y));
  }
  return out;
}

Frame random_frame(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  Frame out(w, h);
  for (double& v : out.intensities()) v = u(rng);
  return out;
}

}  // namespace

TEST_CASE("frame construction validates shape and values") {
  CHECK_THROWS_AS(Frame(0, 3), ConfigError);
  CHECK_THROWS_AS(Frame(2, 2, std::vector<double>(3, 0.0)), ConfigError);
  CHECK_THROWS_AS(Frame(1, 1, std::vector<double>{std::nan("")}), ConfigError);
  const Frame f(3, 2, 7.0);
  CHECK(f.size() == 6);
  CHECK(f(2, 1) == 7.0);
}

TEST_CASE("bilinear_sample examples") {
  const Frame f = random_frame(10, 10, 3);
  CHECK(bilinear_sample(f, {3, 7}) == f(3, 7));

  Frame cell(2, 2);
  cell(0, 0) = 0.0;
  cell(1, 0) = 1.0;
  cell(0, 1) = 1.0;
  cell(1, 1) = 2.0;
  // hand evaluation: 0.25 * (0 + 1 + 1 + 2)
  CHECK(bilinear_sample(cell, {0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-15));

  const Frame c(8, 6, 42.5);
  CHECK(bilinear_sample(c, {3.3, 2.9}) == doctest::Approx(42.5).epsilon(1e-15));
}

TEST_CASE("bilinear_sample never extrapolates") {
  const Frame f(5, 4, 1.0);
  CHECK_THROWS_AS(bilinear_sample(f, {-0.1, 1.0}), BoundaryError);
  CHECK_THROWS_AS(bilinear_sample(f, {4.0, 1.0}), BoundaryError);
  CHECK_THROWS_AS(bilinear_sample(f, {4.5, 1.0}), BoundaryError);
  CHECK_THROWS_AS(bilinear_sample(f, {1.0, 3.0}), BoundaryError);
  CHECK_THROWS_AS(bilinear_sample(f, {1.0, -0.5}), BoundaryError);
  CHECK_NOTHROW(bilinear_sample(f, {3.99, 2.99}));
}

TEST_CASE("bilinear_sample reproduces globally bilinear functions") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = coef(rng), b = coef(rng), c = coef(rng), d = coef(rng);
    auto fn = [&](double x, double y) { return a + b * x + c * y + d * x * y; };
    const Frame f = from_function(17, 13, fn);
    std::uniform_real_distribution<double> px(0.0, 15.999), py(0.0, 11.999);
    for (int i = 0; i < 200; ++i) {
      const double x = px(rng), y = py(rng);
      CHECK(std::abs(bilinear_sample(f, {x, y}) - fn(x, y)) <= 1e-9);
    }
  }
}

TEST_CASE("spatial_gradient of constants and ramps") {
  const Frame c(6, 6, 9.0);
  const Gradient g0 = spatial_gradient(c, {2.3, 1.7});
  CHECK(g0.gx == 0.0);
  CHECK(g0.gy == 0.0);

  const Frame ramp_x = from_function(6, 6, [](double x, double) { return x; });
  const Gradient gx = spatial_gradient(ramp_x, {2.3, 1.7});
  CHECK(gx.gx == doctest::Approx(1.0));
  CHECK(gx.gy == doctest::Approx(0.0));

  const Frame ramp_y = from_function(6, 6, [](double, double y) { return y; });
  const Gradient gy = spatial_gradient(ramp_y, {2.3, 1.7});
  CHECK(gy.gx == doctest::Approx(0.0));
  CHECK(gy.gy == doctest::Approx(1.0));
}

TEST_CASE("literal-index gradient convention transposes the ramp response") {
  const Frame ramp_x = from_function(6, 6, [](double x, double) { return x; });
  const Gradient g = spatial_gradient(ramp_x, {2.3, 1.7}, GradientConvention::kLiteralIndex);
  CHECK(g.gx == doctest::Approx(0.0));
  CHECK(g.gy == doctest::Approx(1.0));
  // Sampling is unaffected by the toggle.
  CHECK(bilinear_sample(ramp_x, {2.3, 1.7}) == doctest::Approx(2.3));
}

TEST_CASE("spatial_gradient matches analytic partials of bilinear functions") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_real_distribution<double> px(0.0, 9.999);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = coef(rng), b = coef(rng), c = coef(rng), d = coef(rng);
    const Frame f = from_function(
        11, 11, [&](double x, double y) { return a + b * x + c * y + d * x * y; });
    for (int i = 0; i < 200; ++i) {
      const double x = px(rng), y = px(rng);
      const Gradient g = spatial_gradient(f, {x, y});
      CHECK(std::abs(g.gx - (b + d * y)) <= 1e-9);
      CHECK(std::abs(g.gy - (c + d * x)) <= 1e-9);
    }
  }
}

TEST_CASE("spatial_gradient agrees with central finite differences of the interpolant") {
  const Frame f = random_frame(12, 12, 99);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const double x = 3 + frac(rng), y = 5 + frac(rng);
    const Gradient g = spatial_gradient(f, {x, y});
    const double fdx = (bilinear_sample(f, {x + h, y}) - bilinear_sample(f, {x - h, y})) / (2 * h);
    const double fdy = (bilinear_sample(f, {x, y + h}) - bilinear_sample(f, {x, y - h})) / (2 * h);
    CHECK(g.gx == doctest::Approx(fdx).epsilon(1e-6));
    CHECK(g.gy == doctest::Approx(fdy).epsilon(1e-6));
  }
}

TEST_CASE("dfd examples") {
  const Frame f = random_frame(10, 10, 4);
  CHECK(dfd(f, f, {4, 4}, {}) == 0.0);

  // previous shifted by exactly d: current(x, y) = previous(x - 2, y - 1)
  const Frame prev = random_frame(12, 12, 8);
  Frame cur(12, 12);
  for (int y = 1; y < 12; ++y)
    for (int x = 2; x < 12; ++x) cur(x, y) = prev(x - 2, y - 1);
  CHECK(dfd(cur, prev, {6, 5}, {2.0, 1.0}) == 0.0);

  // ramp pair: current = x - 0.5, previous = x. With d = 0.2 the residual is
  // (x - 0.5) - (x - 0.2) = -0.3, the shift mismatch.
  const Frame ramp_prev = from_function(10, 10, [](double x, double) { return x; });
  const Frame ramp_cur = from_function(10, 10, [](double x, double) { return x - 0.5; });
  CHECK(dfd(ramp_cur, ramp_prev, {5, 5}, {0.2, 0.0}) == doctest::Approx(-0.3));
  CHECK(dfd(ramp_cur, ramp_prev, {5, 5}, {0.5, 0.0}) == doctest::Approx(0.0));

  CHECK_THROWS_AS(dfd(f, f, {0, 0}, {0.5, 0.0}), BoundaryError);
}

TEST_CASE("mask offsets") {
  for (int h = 1; h <= 4; ++h) {
    const MaskSpec square{MaskKind::kSquareWindow, h};
    CHECK(square.offsets().size() == static_cast<std::size_t>((2 * h + 1) * (2 * h + 1)));
    const MaskSpec causal{MaskKind::kCausalHalf, h};
    const auto offs = causal.offsets();
    CHECK(offs.size() == static_cast<std::size_t>(h * (2 * h + 1) + h + 1));
    for (const auto& o : offs) {
      CHECK((o.dy < 0 || (o.dy == 0 && o.dx <= 0)));
    }
    CHECK(offs.back().dx == 0);
    CHECK(offs.back().dy == 0);
  }
  CHECK_THROWS_AS(MaskSpec({MaskKind::kSquareWindow, 0}).offsets(), ConfigError);
}

TEST_CASE("build_system examples") {
  const Frame f = random_frame(20, 20, 21);
  const MaskSpec m3{MaskKind::kSquareWindow, 1};

  const ObservationSystem same = build_system(f, f, {10, 10}, {}, m3);
  CHECK(same.rows() == 9);
  CHECK(same.z.isZero(0.0));

  const ObservationSystem corner = build_system(f, f, {0, 0}, {}, m3);
  CHECK(corner.rows() == 4);

  // far corner: only (W-2, H-2) has a full cell
  CHECK_THROWS_AS(build_system(f, f, {19, 19}, {}, m3), InsufficientObservationsError);

  for (Eigen::Index i = 0; i < same.rows(); ++i) {
    const PixelLocation r = same.locations[static_cast<std::size_t>(i)];
    const Gradient g = spatial_gradient(f, r);
    CHECK(same.g(i, 0) == -g.gx);
    CHECK(same.g(i, 1) == -g.gy);
  }
}

TEST_CASE("build_system row count matches brute-force cell count") {
  const Frame f = random_frame(15, 11, 2);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> disp(-3.0, 3.0);
  std::uniform_int_distribution<int> px(0, 14), py(0, 10);
  for (int trial = 0; trial < 300; ++trial) {
    const DisplacementVector d{disp(rng), disp(rng)};
    const int x = px(rng), y = py(rng);
    for (MaskKind kind : {MaskKind::kSquareWindow, MaskKind::kCausalHalf}) {
      const MaskSpec mask{kind, 2};
      long expected = 0;
      for (const auto& o : mask.offsets()) {
        const int cx = x + o.dx, cy = y + o.dy;
        if (cx < 0 || cy < 0 || cx >= 15 || cy >= 11) continue;
        const double sx = std::floor(cx - d.dx), sy = std::floor(cy - d.dy);
        if (sx >= 0 && sy >= 0 && sx + 1 <= 14 && sy + 1 <= 10) ++expected;
      }
      if (expected < 3) {
        CHECK_THROWS_AS(build_system(f, f, {double(x), double(y)}, d, mask),
                        InsufficientObservationsError);
      } else {
        CHECK(build_system(f, f, {double(x), double(y)}, d, mask).rows() == expected);
      }
    }
  }
}

TEST_CASE("linear intensity fields satisfy z = G s for the true shift s") {
  const Eigen::Vector2d shift(0.5, 0.25);
  const Frame prev = from_function(10, 10, [](double x, double y) { return 3 * x + 2 * y; });
  const Frame cur = from_function(
      10, 10, [&](double x, double y) { return 3 * (x - shift(0)) + 2 * (y - shift(1)); });
  const ObservationSystem s = build_system(cur, prev, {5, 5}, {}, MaskSpec{});
  CHECK((s.z - s.g * shift).norm() <= 1e-12);
  CHECK((s.z + s.g * shift).norm() > 1.0);
}

TEST_CASE("one least-squares step recovers a shift of a textured frame") {
  const Frame base = from_function(
      16, 16, [](double x, double y) { return 3 * x + 2 * y + 0.4 * x * y; });
  // current(r) = base(r - s) exactly for a bilinear base
  const Frame cur = from_function(16, 16, [](double x, double y) {
    const double u = x - 0.3, v = y - 0.2;
    return 3 * u + 2 * v + 0.4 * u * v;
  });
  const ObservationSystem s = build_system(cur, base, {8, 8}, {0.3, 0.2}, MaskSpec{});
  CHECK(s.z.norm() <= 1e-9);
  const UpdateVector u = ols(s);
  CHECK(u.norm() <= 1e-9);
}
