#pragma once

#include "finola/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace finola {

/// 10·log10(peak²/MSE), capped at 99 dB (the zero-MSE sentinel).
double psnr(const FeatureMap& a, const FeatureMap& b, double peak);

/// Per-channel 8×8 block codec: orthonormal 2-D DCT-II, keep the first K
/// coefficients in zig-zag order, inverse transform. Images whose dims are
/// not multiples of 8 are reflect-padded and cropped back.
FeatureMap dct_baseline(const FeatureMap& image, int keep);

/// The 64 (row, col) pairs of an 8×8 block in zig-zag scan order.
const std::vector<std::pair<int, int>>& zigzag_order_8x8();

struct QuantSpec {
  int bits = 8;
  RealVector min;  // per latent channel
  RealVector max;

  double step(int channel) const { return (max[channel] - min[channel]) / ((1 << bits) - 1); }
};

/// Per-channel ranges over a latent set, widened when a channel is constant
/// so that max > min always holds.
QuantSpec fit_quant_spec(const LatentSet& latents, int bits);

struct QuantResult {
  std::vector<std::vector<std::uint32_t>> codes;  // per path, per channel
  LatentSet dequantized;
  double bits_per_pixel = 0.0;
};

/// Uniform per-channel quantization; values outside the spec range clamp to
/// it. bits_per_pixel = M·C·bits / (img_width·img_height).
QuantResult quantize_uniform(const LatentSet& latents, const QuantSpec& spec, int img_width,
                             int img_height);

struct CurvatureField {
  FeatureMap kappa;             // per-channel Gaussian curvature grids
  std::vector<double> scores;   // RMS of peak positive and peak negative curvature
  std::vector<int> ranking;     // channel indices, descending score
};

/// κ = (z_xx·z_yy − z_xy²)/(1 + z_x² + z_y²)² per channel, central differences
/// inside, one-sided at the border. `spacing` is the grid step in x and y.
CurvatureField gaussian_curvature(const FeatureMap& z, double spacing = 1.0);

RealVector latent_interpolate(const RealVector& q1, const RealVector& q2, double alpha);
RealVector latent_mean(const std::vector<RealVector>& latents);

struct PcaResult {
  RealVector mean;
  RealMatrix components;  // dim × K, descending eigenvalue order
  RealVector eigenvalues;
  std::vector<RealVector> reconstructions;
};

/// Projects each latent onto the top-K eigenvectors of the sample covariance
/// and reconstructs; K = dim with full-rank data reproduces the inputs.
PcaResult latent_pca(const std::vector<RealVector>& latents, int k);

}  // namespace finola
