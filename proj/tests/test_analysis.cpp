#include "finola/analysis.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "finola/train.hpp"
#include "support.hpp"

using namespace finola;
using namespace finola::testing;

namespace {

FeatureMap map_from(const RealMatrix& data, int w, int h) {
  FeatureMap m(w, h, static_cast<int>(data.rows()));
  m.data = data;
  return m;
}

FeatureMap random_image(std::mt19937_64& rng, int w, int h, int c = 1) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  FeatureMap m(w, h, c);
  for (int i = 0; i < m.data.size(); ++i) m.data(i) = uni(rng);
  return m;
}

}  // namespace

TEST_CASE("psnr hits the cap, the closed forms and is symmetric") {
  auto rng = make_rng(81);
  const FeatureMap img = random_image(rng, 6, 5);
  CHECK(psnr(img, img, 1.0) == 99.0);

  FeatureMap zero = map_from(RealMatrix::Zero(1, 30), 6, 5);
  FeatureMap half = map_from(RealMatrix::Constant(1, 30, 0.5), 6, 5);
  CHECK(psnr(zero, half, 1.0) == doctest::Approx(10.0 * std::log10(4.0)));

  FeatureMap ones = map_from(RealMatrix::Constant(1, 30, 1.0), 6, 5);
  CHECK(psnr(zero, ones, 255.0) == doctest::Approx(20.0 * std::log10(255.0)));

  const FeatureMap other = random_image(rng, 6, 5);
  CHECK(psnr(img, other, 1.0) == doctest::Approx(psnr(other, img, 1.0)));

  // Loop oracle.
  double mse = 0.0;
  for (int i = 0; i < 30; ++i) {
    const double d = img.data(0, i) - other.data(0, i);
    mse += d * d;
  }
  mse /= 30.0;
  CHECK(psnr(img, other, 1.0) == doctest::Approx(10.0 * std::log10(1.0 / mse)));

  CHECK_THROWS_AS(psnr(img, zero, 0.0), ConfigError);
  FeatureMap wrong(5, 6, 1);
  CHECK_THROWS_AS(psnr(img, wrong, 1.0), ShapeMismatchError);
}

TEST_CASE("zig-zag scan is a permutation starting along the top-left edge") {
  const auto& order = zigzag_order_8x8();
  REQUIRE(order.size() == 64);
  CHECK(order[0] == std::pair<int, int>{0, 0});
  CHECK(order[1] == std::pair<int, int>{0, 1});
  CHECK(order[2] == std::pair<int, int>{1, 0});
  CHECK(order[3] == std::pair<int, int>{2, 0});
  CHECK(order[4] == std::pair<int, int>{1, 1});
  CHECK(order[5] == std::pair<int, int>{0, 2});
  std::set<int> seen;
  for (auto [r, c] : order) {
    CHECK(r >= 0);
    CHECK(r < 8);
    CHECK(c >= 0);
    CHECK(c < 8);
    seen.insert(r * 8 + c);
  }
  CHECK(seen.size() == 64);
  // Diagonals are visited in nondecreasing r+c order.
  for (size_t i = 0; i + 1 < 64; ++i)
    CHECK(order[i].first + order[i].second <= order[i + 1].first + order[i + 1].second);
}

TEST_CASE("keeping all 64 coefficients reproduces the image") {
  auto rng = make_rng(82);
  for (auto [w, h] : {std::pair{16, 16}, std::pair{8, 8}, std::pair{10, 7}}) {
    const FeatureMap img = random_image(rng, w, h);
    const FeatureMap out = dct_baseline(img, 64);
    CHECK(out.width == w);
    CHECK(out.height == h);
    CHECK((out.data - img.data).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("a constant image survives the single-coefficient budget") {
  FeatureMap img = map_from(RealMatrix::Constant(1, 64, 0.37), 8, 8);
  const FeatureMap out = dct_baseline(img, 1);
  CHECK((out.data.array() - 0.37).abs().maxCoeff() < 1e-10);
}

TEST_CASE("larger coefficient budgets do not hurt smooth images") {
  const Dataset data = make_synthetic_dataset(4, 16, 97);
  for (int i = 0; i < data.count; ++i) {
    FeatureMap img(16, 16, 1);
    img.data = data.images.block(0, i * 256, 1, 256).cast<double>();
    double prev = -1.0;
    for (int keep : {1, 3, 6, 10, 64}) {
      const double score = psnr(dct_baseline(img, keep), img, 1.0);
      CHECK(score >= prev - 1e-9);
      prev = score;
    }
  }
}

TEST_CASE("out-of-range coefficient budgets are rejected") {
  auto rng = make_rng(83);
  const FeatureMap img = random_image(rng, 8, 8);
  CHECK_THROWS_AS(dct_baseline(img, 0), ConfigError);
  CHECK_THROWS_AS(dct_baseline(img, 65), ConfigError);
}

TEST_CASE("grid-aligned latents quantize without error") {
  LatentSet set;
  QuantSpec spec;
  spec.bits = 8;
  spec.min = RealVector::Zero(3);
  spec.max = RealVector::Constant(3, 255.0 * 0.5);
  RealVector q(3);
  q << 0.0, 0.5 * 17.0, 0.5 * 255.0;  // codes 0, 17, 255 exactly
  set.vectors.push_back(q);
  set.positions.push_back({0, 0});

  const QuantResult res = quantize_uniform(set, spec, 16, 16);
  CHECK(res.codes[0][0] == 0u);
  CHECK(res.codes[0][1] == 17u);
  CHECK(res.codes[0][2] == 255u);
  CHECK((res.dequantized.vectors[0] - q).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(res.bits_per_pixel == doctest::Approx(3.0 * 8.0 / 256.0));
}

TEST_CASE("one-bit quantization snaps to the channel extremes") {
  auto rng = make_rng(84);
  LatentSet set;
  for (int i = 0; i < 6; ++i) {
    set.vectors.push_back(random_vector(rng, 4, 2.0));
    set.positions.push_back({i, 0});
  }
  const QuantSpec spec = fit_quant_spec(set, 1);
  const QuantResult res = quantize_uniform(set, spec, 8, 8);
  for (int i = 0; i < 6; ++i)
    for (int ch = 0; ch < 4; ++ch) {
      const double v = res.dequantized.vectors[static_cast<size_t>(i)][ch];
      const bool at_min = std::abs(v - spec.min[ch]) < 1e-12;
      const bool at_max = std::abs(v - spec.max[ch]) < 1e-12;
      CHECK((at_min || at_max));
    }
}

TEST_CASE("dequantization error stays within half a step") {
  auto rng = make_rng(85);
  for (int bits : {2, 4, 8, 12}) {
    LatentSet set;
    for (int i = 0; i < 10; ++i) {
      set.vectors.push_back(random_vector(rng, 8, 3.0));
      set.positions.push_back({i, i});
    }
    const QuantSpec spec = fit_quant_spec(set, bits);
    const QuantResult res = quantize_uniform(set, spec, 16, 16);
    for (size_t i = 0; i < 10; ++i)
      for (int ch = 0; ch < 8; ++ch) {
        const double err = std::abs(res.dequantized.vectors[i][ch] - set.vectors[i][ch]);
        CHECK(err <= 0.5 * spec.step(ch) * (1.0 + 1e-12));
      }
  }
}

TEST_CASE("constant channels get a widened quantization range") {
  LatentSet set;
  RealVector q = RealVector::Constant(2, 3.0);
  set.vectors.push_back(q);
  set.vectors.push_back(q);
  set.positions.push_back({0, 0});
  set.positions.push_back({1, 1});
  const QuantSpec spec = fit_quant_spec(set, 8);
  CHECK(spec.max[0] > spec.min[0]);
  const QuantResult res = quantize_uniform(set, spec, 4, 4);
  CHECK(std::abs(res.dequantized.vectors[0][0] - 3.0) <= 0.5 * spec.step(0));
}

TEST_CASE("quantization bit depths outside 1..16 are rejected") {
  LatentSet set;
  set.vectors.push_back(RealVector::Zero(2));
  set.positions.push_back({0, 0});
  CHECK_THROWS_AS(fit_quant_spec(set, 0), ConfigError);
  CHECK_THROWS_AS(fit_quant_spec(set, 17), ConfigError);
}

TEST_CASE("planes have vanishing curvature") {
  FeatureMap z(12, 12, 2);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      z.at(x, y)[0] = 0.3 + 0.7 * x - 1.2 * y;
      z.at(x, y)[1] = -4.0;
    }
  const CurvatureField field = gaussian_curvature(z, 0.5);
  CHECK(field.kappa.data.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(field.scores[0] < 1e-12);
}

TEST_CASE("a sphere patch recovers 1 over R squared") {
  const double R = 10.0, spacing = 0.1;
  const int n = 21;  // spans [-1, 1] around the pole
  FeatureMap z(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double px = (x - n / 2) * spacing;
      const double py = (y - n / 2) * spacing;
      z.at(x, y)[0] = std::sqrt(R * R - px * px - py * py);
    }
  const CurvatureField field = gaussian_curvature(z, spacing);
  for (int y = 1; y + 1 < n; ++y)
    for (int x = 1; x + 1 < n; ++x)
      CHECK(field.kappa.at(x, y)[0] == doctest::Approx(0.01).epsilon(0.02));
}

TEST_CASE("curvature is even in the height field sign") {
  auto rng = make_rng(86);
  FeatureMap z = random_image(rng, 9, 9, 3);
  FeatureMap neg = z;
  neg.data = -z.data;
  const CurvatureField a = gaussian_curvature(z);
  const CurvatureField b = gaussian_curvature(neg);
  CHECK((a.kappa.data - b.kappa.data).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("channel ranking is sorted by score") {
  auto rng = make_rng(87);
  const FeatureMap z = random_image(rng, 10, 10, 5);
  const CurvatureField field = gaussian_curvature(z);
  REQUIRE(field.ranking.size() == 5);
  for (size_t i = 0; i + 1 < 5; ++i)
    CHECK(field.scores[static_cast<size_t>(field.ranking[i])] >=
          field.scores[static_cast<size_t>(field.ranking[i + 1])]);
}

TEST_CASE("latent interpolation passes through its endpoints and extrapolates") {
  auto rng = make_rng(88);
  const RealVector q1 = random_vector(rng, 5);
  const RealVector q2 = random_vector(rng, 5);
  CHECK((latent_interpolate(q1, q2, 1.0) - q1).norm() == 0.0);
  CHECK((latent_interpolate(q1, q2, 0.0) - q2).norm() == 0.0);
  CHECK((latent_interpolate(q1, q2, 2.0) - (2.0 * q1 - q2)).norm() < 1e-14);
  CHECK((latent_mean({q1, q1, q1}) - q1).norm() < 1e-15);
  CHECK((latent_mean({q1, q2}) - 0.5 * (q1 + q2)).norm() < 1e-14);
}

TEST_CASE("full-rank principal components reproduce the inputs") {
  auto rng = make_rng(89);
  std::vector<RealVector> latents;
  for (int i = 0; i < 12; ++i) latents.push_back(random_vector(rng, 6, 2.0));
  const PcaResult pca = latent_pca(latents, 6);
  for (size_t i = 0; i < latents.size(); ++i)
    CHECK((pca.reconstructions[i] - latents[i]).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((pca.components.transpose() * pca.components - RealMatrix::Identity(6, 6))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  for (int k = 0; k + 1 < 6; ++k) CHECK(pca.eigenvalues[k] >= pca.eigenvalues[k + 1] - 1e-12);
}

TEST_CASE("rank-one data is explained by a single component") {
  auto rng = make_rng(90);
  const RealVector axis = random_vector(rng, 5).normalized();
  std::vector<RealVector> latents;
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int i = 0; i < 8; ++i) latents.push_back(uni(rng) * axis);
  const PcaResult pca = latent_pca(latents, 1);
  for (size_t i = 0; i < latents.size(); ++i)
    CHECK((pca.reconstructions[i] - latents[i]).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(std::abs(pca.components.col(0).dot(axis)) - 1.0) < 1e-10);
}
