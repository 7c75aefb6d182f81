#include <doctest.h>

#include <cmath>
#include <random>

#include "dmcc/augment.hpp"
#include "dmcc/image.hpp"
#include "dmcc/rng.hpp"
#include "dmcc/types.hpp"

using namespace dmcc;

TEST_SUITE("augment") {

TEST_CASE("config validation") {
  AugmentConfig ok;
  ok.validate();
  AugmentConfig wide;
  wide.radius = 0.2;
  CHECK_THROWS_AS(wide.validate(), DataError);
  AugmentConfig negative;
  negative.radius = -0.01;
  CHECK_THROWS_AS(negative.validate(), DataError);
  AugmentConfig bad_count;
  bad_count.samples_per_image = -1;
  CHECK_THROWS_AS(bad_count.validate(), DataError);
}

TEST_CASE("disc sampling is uniform by area") {
  const Chromaticity center{1.0 / 3.0, 1.0 / 3.0};
  const double radius = 0.05;
  auto rng = make_rng_stream(31, 0x400);
  const int n = 100000;
  double sum_r = 0.0, sum_g = 0.0;
  int inside_half = 0;
  for (int i = 0; i < n; ++i) {
    Chromaticity c = sample_in_disc(center, radius, rng);
    const double dr = c.r - center.r;
    const double dg = c.g - center.g;
    const double dist = std::sqrt(dr * dr + dg * dg);
    CHECK(dist <= radius + 1e-12);
    if (dist <= radius / 2.0) ++inside_half;
    sum_r += c.r;
    sum_g += c.g;
  }
  CHECK(sum_r / n == doctest::Approx(center.r).epsilon(0.002));
  CHECK(sum_g / n == doctest::Approx(center.g).epsilon(0.002));
  // Area of the half-radius disc is a quarter of the full disc.
  CHECK(static_cast<double>(inside_half) / n == doctest::Approx(0.25).epsilon(0.06));
}

TEST_CASE("sample_illuminant always lands strictly inside the simplex") {
  AugmentConfig cfg;
  cfg.radius = 0.05;
  const Chromaticity center{0.03, 0.5};  // close to the r = 0 edge
  auto rng = make_rng_stream(32, 0x401);
  for (int i = 0; i < 5000; ++i) {
    Chromaticity c = sample_illuminant(center, cfg, rng);
    CHECK(c.valid());
    const double dr = c.r - center.r;
    const double dg = c.g - center.g;
    CHECK(std::sqrt(dr * dr + dg * dg) <= cfg.radius + 1e-12);
  }
}

TEST_CASE("zero radius reproduces the center") {
  AugmentConfig cfg;
  cfg.radius = 0.0;
  const Chromaticity center{0.31, 0.35};
  auto rng = make_rng_stream(33, 0x402);
  Chromaticity c = sample_illuminant(center, cfg, rng);
  CHECK(c.r == center.r);
  CHECK(c.g == center.g);
}

TEST_CASE("sampling is deterministic per stream") {
  AugmentConfig cfg;
  const Chromaticity center{1.0 / 3.0, 1.0 / 3.0};
  auto rng_a = make_rng_stream(7, 0x403);
  auto rng_b = make_rng_stream(7, 0x403);
  for (int i = 0; i < 100; ++i) {
    Chromaticity a = sample_illuminant(center, cfg, rng_a);
    Chromaticity b = sample_illuminant(center, cfg, rng_b);
    CHECK(a.r == b.r);
    CHECK(a.g == b.g);
  }
  auto rng_c = make_rng_stream(7, 0x404);
  Chromaticity c = sample_illuminant(center, cfg, rng_c);
  Chromaticity a0 = sample_illuminant(center, cfg, rng_a);
  CHECK(c.r != a0.r);
}

TEST_CASE("relight single-pixel closed form") {
  LinearImage img = LinearImage::create(1, 1, {0, 0, 0}, 1.0);
  img.set(0, {0.1, 0.2, 0.3});
  Illuminant old_l = Illuminant::from_rgb({1.0, 1.0, 1.0});
  Illuminant new_l = Illuminant::from_chromaticity({0.5, 0.25});
  // Gains: new (0.5,0.25,0.25)/0.25 = (2,1,1) over old (1,1,1).
  LinearImage out = relight(img, old_l, new_l);
  CHECK(out.at(0).r == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(out.at(0).g == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(out.at(0).b == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("relight to the same illuminant is the identity") {
  LinearImage img = LinearImage::create(2, 2, {0, 0, 0}, 4.0);
  for (std::size_t i = 0; i < 4; ++i) img.set(i, {0.1 * (i + 1), 0.2, 0.05 * (i + 1)});
  Illuminant l = Illuminant::from_rgb({0.4, 0.8, 0.5});
  LinearImage out = relight(img, l, l);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("relight round trip restores the image") {
  auto rng = make_rng_stream(34, 0x405);
  std::uniform_real_distribution<double> dist(0.01, 1.0);
  LinearImage img = LinearImage::create(6, 5, {0, 0, 0}, 2.0);
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    img.set(i, {dist(rng), dist(rng), dist(rng)});
  Illuminant a = Illuminant::from_chromaticity({0.30, 0.36});
  Illuminant b = Illuminant::from_chromaticity({0.42, 0.31});
  LinearImage round = relight(relight(img, a, b), b, a);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(round.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-9));
}

TEST_CASE("relight scales channels by the G-normalized ratio") {
  LinearImage img = LinearImage::create(1, 1, {0, 0, 0}, 1.0);
  img.set(0, {1.0, 1.0, 1.0});
  Illuminant old_l = Illuminant::from_rgb({0.5, 1.0, 0.8});
  Illuminant new_l = Illuminant::from_rgb({0.7, 1.0, 0.4});
  LinearImage out = relight(img, old_l, new_l);
  // Gains ((0.7,1,0.4)/1) over ((0.5,1,0.8)/1) = (1.4, 1, 0.5).
  CHECK(out.at(0).r == doctest::Approx(1.4).epsilon(1e-12));
  CHECK(out.at(0).g == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.at(0).b == doctest::Approx(0.5).epsilon(1e-12));
}

}  // TEST_SUITE
