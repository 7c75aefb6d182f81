#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "dmcc/calibration.hpp"
#include "dmcc/image.hpp"
#include "dmcc/rng.hpp"
#include "dmcc/types.hpp"

using namespace dmcc;

namespace {

// Reference least-squares fit written independently of the library: solve
// M * (S S^T) = T S^T per row with Gaussian elimination.
std::array<double, 9> normal_equations_fit(const std::vector<WhitePoint>& src,
                                           const std::vector<WhitePoint>& tgt) {
  double sst[3][3] = {};
  double tst[3][3] = {};
  for (std::size_t k = 0; k < src.size(); ++k) {
    const Vec3 s = src[k].rgb;
    const Vec3 t = tgt[k].rgb;
    const double sv[3] = {s.r, s.g, s.b};
    const double tv[3] = {t.r, t.g, t.b};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        sst[i][j] += sv[i] * sv[j];
        tst[i][j] += tv[i] * sv[j];
      }
  }
  // Invert sst via Gauss-Jordan.
  double a[3][6] = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a[i][j] = sst[i][j];
    a[i][3 + i] = 1.0;
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    for (int j = 0; j < 6; ++j) std::swap(a[col][j], a[piv][j]);
    const double d = a[col][col];
    for (int j = 0; j < 6; ++j) a[col][j] /= d;
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (int j = 0; j < 6; ++j) a[r][j] -= f * a[col][j];
    }
  }
  std::array<double, 9> m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += tst[i][k] * a[k][3 + j];
      m[i * 3 + j] = v;
    }
  return m;
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("diagonal calibration of proportional whites is the identity") {
  SensorMap m = calibrate_diagonal({{0.4, 0.8, 0.6}}, {{0.2, 0.4, 0.3}});
  CHECK(m.kind() == SensorMap::Kind::diagonal);
  Vec3 d = m.diagonal_entries();
  CHECK(d.r == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.g == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.b == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("diagonal calibration recovers a G-normalized channel gain") {
  // wt = D * ws with D G-normalized: M must equal D exactly.
  const Vec3 ws{0.5, 1.0, 0.7};
  const Vec3 gains{0.8, 1.0, 1.3};
  WhitePoint target{{ws.r * gains.r, ws.g * gains.g, ws.b * gains.b}};
  SensorMap m = calibrate_diagonal({ws}, target);
  Vec3 d = m.diagonal_entries();
  CHECK(d.r == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(d.g == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d.b == doctest::Approx(1.3).epsilon(1e-14));
}

TEST_CASE("diagonal calibration maps the source white onto the target chromaticity") {
  WhitePoint ws{{0.37, 0.91, 0.55}};
  WhitePoint wt{{0.62, 0.88, 0.41}};
  SensorMap m = calibrate_diagonal(ws, wt);
  Vec3 mapped = m.apply(ws.rgb);
  Illuminant a = Illuminant::from_rgb(mapped);
  Illuminant b = Illuminant::from_rgb(wt.rgb);
  CHECK(angular_error_deg(a.rgb(), b.rgb()) <= 1e-9);
}

TEST_CASE("white point validation") {
  CHECK_THROWS_AS(calibrate_diagonal({{0.0, 1.0, 1.0}}, {{1.0, 1.0, 1.0}}), DataError);
  CHECK_THROWS_AS(calibrate_diagonal({{1.0, 1.0, 1.0}}, {{1.0, -2.0, 1.0}}), DataError);
  CHECK_THROWS_AS(calibrate_diagonal({{1.0, std::nan(""), 1.0}}, {{1.0, 1.0, 1.0}}), DataError);
}

TEST_CASE("full calibration recovers an exact linear map") {
  const std::array<double, 9> truth{0.9, 0.05, 0.02, 0.03, 1.1, 0.04, 0.01, 0.06, 1.2};
  SensorMap t = SensorMap::full(truth);
  auto rng = make_rng_stream(5, 0x200);
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  std::vector<WhitePoint> src, tgt;
  for (int i = 0; i < 12; ++i) {
    Vec3 s{dist(rng), dist(rng), dist(rng)};
    src.push_back({s});
    tgt.push_back({t.apply(s)});
  }
  SensorMap m = calibrate_full(src, tgt);
  CHECK(m.kind() == SensorMap::Kind::full);
  for (int i = 0; i < 9; ++i) CHECK(m.matrix()[i] == doctest::Approx(truth[i]).epsilon(1e-9));
}

TEST_CASE("full calibration under noise matches an independent normal-equations fit") {
  const std::array<double, 9> truth{0.95, 0.04, 0.01, 0.02, 1.05, 0.03, 0.02, 0.05, 1.15};
  SensorMap t = SensorMap::full(truth);
  auto rng = make_rng_stream(6, 0x201);
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<WhitePoint> src, tgt;
  for (int i = 0; i < 40; ++i) {
    Vec3 s{dist(rng), dist(rng), dist(rng)};
    Vec3 y = t.apply(s);
    src.push_back({s});
    tgt.push_back({{y.r + std::fabs(noise(rng)), y.g + std::fabs(noise(rng)),
                    y.b + std::fabs(noise(rng))}});
  }
  SensorMap m = calibrate_full(src, tgt);
  std::array<double, 9> ref = normal_equations_fit(src, tgt);
  for (int i = 0; i < 9; ++i) CHECK(m.matrix()[i] == doctest::Approx(ref[i]).epsilon(1e-9));
}

TEST_CASE("full calibration rejects rank-deficient sample sets") {
  std::vector<WhitePoint> src, tgt;
  for (int i = 1; i <= 6; ++i) {
    double f = 0.1 * i;
    src.push_back({{f, 2 * f, 3 * f}});  // one direction only
    tgt.push_back({{f, 2 * f, 3 * f}});
  }
  CHECK_THROWS_AS(calibrate_full(src, tgt), NumericError);
}

TEST_CASE("full calibration input validation") {
  std::vector<WhitePoint> two{{{1, 1, 1}}, {{1, 2, 1}}};
  std::vector<WhitePoint> three{{{1, 1, 1}}, {{1, 2, 1}}, {{2, 1, 1}}};
  CHECK_THROWS_AS(calibrate_full(two, two), DataError);
  CHECK_THROWS_AS(calibrate_full(three, two), DataError);
}

TEST_CASE("sensor map constructors validate") {
  CHECK_THROWS_AS(SensorMap::diagonal({1.0, 0.0, 1.0}), DataError);
  CHECK_THROWS_AS(SensorMap::diagonal({1.0, -1.0, 1.0}), DataError);
  // Singular full matrix.
  CHECK_THROWS_AS(SensorMap::full({1, 2, 3, 2, 4, 6, 0, 0, 1}), DataError);
  CHECK(SensorMap::identity().is_identity());
  CHECK_FALSE(SensorMap::diagonal({1.0, 1.0, 1.5}).is_identity());
}

TEST_CASE("map_image applies per-channel gains exactly") {
  SensorMap m = SensorMap::diagonal({0.5, 1.0, 2.0});
  LinearImage img = LinearImage::create(2, 1, {0, 0, 0}, 4.0);
  img.set(0, {0.8, 0.6, 0.4});
  img.set(1, {0.1, 0.2, 0.3});
  LinearImage out = map_image(m, img);
  CHECK(out.at(0).r == 0.4);
  CHECK(out.at(0).g == 0.6);
  CHECK(out.at(0).b == 0.8);
  CHECK(out.at(1).b == 0.6);
  CHECK(out.saturation_level == 4.0);
}

TEST_CASE("map_image clamps negatives produced by full maps") {
  SensorMap m = SensorMap::full({1.0, -2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
  LinearImage img = LinearImage::create(1, 1, {0, 0, 0}, 1.0);
  img.set(0, {0.1, 0.4, 0.5});
  LinearImage out = map_image(m, img);
  CHECK(out.at(0).r == 0.0);  // 0.1 - 0.8 clamps
  CHECK(out.at(0).g == 0.4);
}

TEST_CASE("map_illuminant preserves direction information") {
  SensorMap m = SensorMap::diagonal({0.7, 1.0, 1.4});
  Illuminant l = Illuminant::from_rgb({0.5, 0.8, 0.3});
  Illuminant mapped = map_illuminant(m, l);
  Vec3 expect{0.7 * 0.5, 1.0 * 0.8, 1.4 * 0.3};
  CHECK(angular_error_deg(mapped.rgb(), expect) <= 1e-9);
  CHECK(mapped.rgb().norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("map_illuminant rejects maps leaving the positive octant") {
  SensorMap m = SensorMap::full({1.0, -2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
  Illuminant l = Illuminant::from_rgb({0.5, 0.7, 0.5});
  CHECK_THROWS_AS(map_illuminant(m, l), NumericError);
}

TEST_CASE("fingerprint is stable and discriminating") {
  SensorMap a = SensorMap::diagonal({0.7, 1.0, 1.4});
  SensorMap b = SensorMap::diagonal({0.7, 1.0, 1.4});
  SensorMap c = SensorMap::diagonal({0.7, 1.0, 1.4000000001});
  std::string fa = calibration_fingerprint(a);
  CHECK(fa.size() == 16);
  CHECK(fa == calibration_fingerprint(b));
  CHECK(fa != calibration_fingerprint(c));
  // Same numbers under a different kind tag must not collide.
  SensorMap d = SensorMap::full({0.7, 0, 0, 0, 1.0, 0, 0, 0, 1.4});
  CHECK(fa != calibration_fingerprint(d));
}

}  // TEST_SUITE
