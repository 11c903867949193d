#include "finola/masking.hpp"

#include <doctest.h>

#include <set>

#include "support.hpp"

using namespace finola;
using namespace finola::testing;

TEST_CASE("block placement decides group count and location class") {
  SUBCASE("corner placement needs one group") {
    const QuadrantMask m = build_mask(8, 8, {0, 0});
    CHECK(m.location_class == LocationClass::corner);
    REQUIRE(m.groups.size() == 1);
    CHECK(m.groups[0].dx == 4);
    CHECK(m.groups[0].dy == 4);
    CHECK(m.groups[0].cells.size() == 16);
  }
  SUBCASE("edge placement splits horizontally") {
    const QuadrantMask m = build_mask(8, 8, {2, 0});
    CHECK(m.location_class == LocationClass::edge);
    REQUIRE(m.groups.size() == 2);
    std::set<std::pair<int, int>> offsets;
    for (const auto& g : m.groups) {
      offsets.insert({g.dx, g.dy});
      CHECK(g.cells.size() == 8);
    }
    CHECK(offsets == std::set<std::pair<int, int>>{{-4, 4}, {4, 4}});
  }
  SUBCASE("interior placement needs all four diagonal directions") {
    const QuadrantMask m = build_mask(8, 8, {2, 2});
    CHECK(m.location_class == LocationClass::middle);
    REQUIRE(m.groups.size() == 4);
    std::set<std::pair<int, int>> offsets;
    for (const auto& g : m.groups) {
      offsets.insert({g.dx, g.dy});
      CHECK(g.cells.size() == 4);
    }
    CHECK(offsets ==
          std::set<std::pair<int, int>>{{-4, -4}, {-4, 4}, {4, -4}, {4, 4}});
  }
  SUBCASE("far corner mirrors the near one") {
    const QuadrantMask m = build_mask(8, 8, {4, 4});
    CHECK(m.location_class == LocationClass::corner);
    REQUIRE(m.groups.size() == 1);
    CHECK(m.groups[0].dx == -4);
    CHECK(m.groups[0].dy == -4);
  }
}

TEST_CASE("prediction targets tile the masked region exactly once") {
  for (int n : {8, 16}) {
    for (int ox = 0; ox <= n / 2; ++ox)
      for (int oy = 0; oy <= n / 2; ++oy) {
        const QuadrantMask m = build_mask(n, n, {ox, oy});
        std::set<int> covered;
        int targets = 0;
        for (const auto& g : m.groups)
          for (GridPos cell : g.cells) {
            CHECK(m.is_unmasked(cell.x, cell.y));
            for (auto [tx, ty] : {std::pair{cell.x + g.dx, cell.y},
                                  std::pair{cell.x, cell.y + g.dy},
                                  std::pair{cell.x + g.dx, cell.y + g.dy}}) {
              CHECK(tx >= 0);
              CHECK(tx < n);
              CHECK(ty >= 0);
              CHECK(ty < n);
              CHECK_FALSE(m.is_unmasked(tx, ty));
              covered.insert(ty * n + tx);
              ++targets;
            }
          }
        // No collisions and nothing missed.
        CHECK(targets == n * n - (n / 2) * (n / 2));
        CHECK(static_cast<int>(covered.size()) == targets);
      }
  }
}

TEST_CASE("random placements stay in range and reach every offset") {
  auto rng = make_rng(101);
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < 2000; ++i) {
    const QuadrantMask m = sample_mask(8, 8, rng);
    CHECK(m.offset.x >= 0);
    CHECK(m.offset.x <= 4);
    CHECK(m.offset.y >= 0);
    CHECK(m.offset.y <= 4);
    seen.insert({m.offset.x, m.offset.y});
  }
  CHECK(seen.size() == 25);

  auto rng_a = make_rng(7);
  auto rng_b = make_rng(7);
  const QuadrantMask a = sample_mask(16, 16, rng_a);
  const QuadrantMask b = sample_mask(16, 16, rng_b);
  CHECK(a.offset.x == b.offset.x);
  CHECK(a.offset.y == b.offset.y);
}

TEST_CASE("invalid grids and offsets are rejected") {
  CHECK_THROWS_AS(build_mask(7, 8, {0, 0}), ConfigError);
  CHECK_THROWS_AS(build_mask(8, 5, {0, 0}), ConfigError);
  CHECK_NOTHROW(build_mask(8, 6, {0, 0}));  // rectangular but even is fine
  CHECK_THROWS_AS(build_mask(8, 8, {5, 0}), PositionOutOfRangeError);
  CHECK_THROWS_AS(build_mask(8, 8, {0, -1}), PositionOutOfRangeError);
}

TEST_CASE("zero matrices predict a copy of the source cell") {
  FinolaParams p;
  p.A = p.B = p.A_minus = p.B_minus = RealMatrix::Zero(3, 3);
  p.epsilon = 1e-6;
  auto rng = make_rng(102);
  FeatureMap z(8, 8, 3);
  z.data = random_matrix(rng, 3, 64);

  const QuadrantMask m = build_mask(8, 8, {2, 2});
  const FeatureMap pred = predict_masked(z, m, p);
  for (const auto& g : m.groups)
    for (GridPos cell : g.cells) {
      const RealVector src = z.at(cell.x, cell.y);
      CHECK((pred.at(cell.x + g.dx, cell.y) - src).norm() == 0.0);
      CHECK((pred.at(cell.x, cell.y + g.dy) - src).norm() == 0.0);
      CHECK((pred.at(cell.x + g.dx, cell.y + g.dy) - src).norm() == 0.0);
    }
}

TEST_CASE("each masked cell gets the stepped value of its source") {
  auto rng = make_rng(103);
  const FinolaParams p = random_params(rng, 4);
  FeatureMap z(8, 8, 4);
  z.data = random_matrix(rng, 4, 64);

  for (GridPos offset : {GridPos{0, 0}, GridPos{3, 1}, GridPos{4, 4}}) {
    const QuadrantMask m = build_mask(8, 8, offset);
    const FeatureMap pred = predict_masked(z, m, p);
    for (const auto& g : m.groups) {
      const StepDir hdir = g.dx > 0 ? StepDir::right : StepDir::left;
      const StepDir vdir = g.dy > 0 ? StepDir::down : StepDir::up;
      for (GridPos cell : g.cells) {
        const RealVector across = step<double>(z.at(cell.x, cell.y), hdir, p);
        const RealVector below = step<double>(z.at(cell.x, cell.y), vdir, p);
        const RealVector diag = step<double>(across, vdir, p);
        CHECK((pred.at(cell.x + g.dx, cell.y) - across).norm() == 0.0);
        CHECK((pred.at(cell.x, cell.y + g.dy) - below).norm() == 0.0);
        CHECK((pred.at(cell.x + g.dx, cell.y + g.dy) - diag).norm() == 0.0);
      }
    }
    // The unmasked block itself carries no prediction.
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        if (m.is_unmasked(x, y)) CHECK(pred.at(x, y).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("the mask image is an indicator of the unmasked block") {
  const QuadrantMask m = build_mask(8, 8, {1, 3});
  const FeatureMap img = mask_to_image(m);
  CHECK(img.channels == 1);
  double total = 0.0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const double v = img.at(x, y)[0];
      CHECK(v == (m.is_unmasked(x, y) ? 1.0 : 0.0));
      total += v;
    }
  CHECK(total == 16.0);
}
