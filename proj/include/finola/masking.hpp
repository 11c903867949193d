#pragma once

#include "finola/core.hpp"
#include "finola/types.hpp"

#include <random>
#include <vector>

namespace finola {

enum class LocationClass { corner, edge, middle };

/// One group of unmasked cells sharing a target-offset triple. Every cell in
/// the group predicts (x+dx, y), (x, y+dy) and (x+dx, y+dy).
struct MaskGroup {
  int dx = 0;  // ±block_w
  int dy = 0;  // ±block_h
  std::vector<GridPos> cells;
};

/// Quadrant-block mask: an unmasked (W/2)×(H/2) rectangle at `offset`; all
/// other cells are masked. Each unmasked cell predicts exactly three masked
/// cells, and the targets tile the masked region exactly once.
struct QuadrantMask {
  int width = 0;
  int height = 0;
  int block_w = 0;
  int block_h = 0;
  GridPos offset;
  LocationClass location_class = LocationClass::corner;
  std::vector<MaskGroup> groups;

  bool is_unmasked(int x, int y) const {
    return x >= offset.x && x < offset.x + block_w && y >= offset.y && y < offset.y + block_h;
  }
};

/// Deterministic construction for a given block offset; ox ∈ [0, W/2],
/// oy ∈ [0, H/2]. W and H must be even.
QuadrantMask build_mask(int width, int height, GridPos offset);

/// Uniformly random block placement over all valid offsets.
QuadrantMask sample_mask(int width, int height, std::mt19937_64& rng);

/// Norm+linear prediction of every masked cell from its unmasked source:
/// horizontal and vertical targets take one step with the direction matrix
/// picked by the offset sign, diagonal targets take the horizontal step and
/// then a vertical step on its result. Returns a full-size map with
/// predictions at masked cells and zeros elsewhere.
FeatureMap predict_masked(const FeatureMap& z_unmasked, const QuadrantMask& mask,
                          const FinolaParams& p);

/// 1-channel visualization: unmasked cells 1.0, masked 0.0.
FeatureMap mask_to_image(const QuadrantMask& mask);

}  // namespace finola
