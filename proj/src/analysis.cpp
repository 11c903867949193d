#include "finola/analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace finola {

double psnr(const FeatureMap& a, const FeatureMap& b, double peak) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ShapeMismatchError("psnr: image shapes differ");
  if (peak <= 0.0) throw ConfigError("psnr: peak must be positive");
  const double mse = (a.data - b.data).squaredNorm() / double(a.data.size());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

const std::vector<std::pair<int, int>>& zigzag_order_8x8() {
  static const std::vector<std::pair<int, int>> order = [] {
    std::vector<std::pair<int, int>> o;
    o.reserve(64);
    for (int s = 0; s <= 14; ++s) {
      const int lo = std::max(0, s - 7);
      const int hi = std::min(7, s);
      if (s % 2 == 1) {
        for (int r = lo; r <= hi; ++r) o.emplace_back(r, s - r);
      } else {
        for (int r = hi; r >= lo; --r) o.emplace_back(r, s - r);
      }
    }
    return o;
  }();
  return order;
}

namespace {

const Eigen::Matrix<double, 8, 8>& dct_matrix() {
  static const Eigen::Matrix<double, 8, 8> d = [] {
    Eigen::Matrix<double, 8, 8> m;
    const double pi = std::acos(-1.0);
    for (int k = 0; k < 8; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) m(k, n) = scale * std::cos(pi * (2 * n + 1) * k / 16.0);
    }
    return m;
  }();
  return d;
}

int mirror_index(int i, int n) {
  const int period = 2 * n;
  int j = i % period;
  if (j < 0) j += period;
  return j < n ? j : period - 1 - j;
}

}  // namespace

FeatureMap dct_baseline(const FeatureMap& image, int keep) {
  if (keep < 1 || keep > 64)
    throw ConfigError("dct_baseline: keep must be in [1,64], got " + std::to_string(keep));
  const int pw = (image.width + 7) / 8 * 8;
  const int ph = (image.height + 7) / 8 * 8;
  const auto& d = dct_matrix();
  const auto& zig = zigzag_order_8x8();

  FeatureMap out(image.width, image.height, image.channels);
  Eigen::Matrix<double, 8, 8> block;
  for (int c = 0; c < image.channels; ++c) {
    for (int by = 0; by < ph; by += 8) {
      for (int bx = 0; bx < pw; bx += 8) {
        for (int r = 0; r < 8; ++r)
          for (int col = 0; col < 8; ++col)
            block(r, col) = image.at(mirror_index(bx + col, image.width),
                                     mirror_index(by + r, image.height))[c];
        Eigen::Matrix<double, 8, 8> coeff = d * block * d.transpose();
        Eigen::Matrix<double, 8, 8> kept = Eigen::Matrix<double, 8, 8>::Zero();
        for (int i = 0; i < keep; ++i) {
          const auto [r, col] = zig[static_cast<size_t>(i)];
          kept(r, col) = coeff(r, col);
        }
        block = d.transpose() * kept * d;
        for (int r = 0; r < 8; ++r)
          for (int col = 0; col < 8; ++col) {
            const int x = bx + col;
            const int y = by + r;
            if (x < image.width && y < image.height) out.at(x, y)[c] = block(r, col);
          }
      }
    }
  }
  return out;
}

QuantSpec fit_quant_spec(const LatentSet& latents, int bits) {
  if (bits < 1 || bits > 16)
    throw ConfigError("fit_quant_spec: bits must be in [1,16], got " + std::to_string(bits));
  if (latents.vectors.empty()) throw ShapeMismatchError("fit_quant_spec: empty latent set");
  const Eigen::Index dim = latents.vectors[0].size();
  QuantSpec spec;
  spec.bits = bits;
  spec.min = RealVector::Constant(dim, std::numeric_limits<double>::infinity());
  spec.max = RealVector::Constant(dim, -std::numeric_limits<double>::infinity());
  for (const auto& v : latents.vectors) {
    if (v.size() != dim) throw ShapeMismatchError("fit_quant_spec: ragged latent set");
    spec.min = spec.min.cwiseMin(v);
    spec.max = spec.max.cwiseMax(v);
  }
  for (Eigen::Index k = 0; k < dim; ++k)
    if (!(spec.max[k] > spec.min[k])) {
      spec.min[k] -= 0.5;
      spec.max[k] += 0.5;
    }
  return spec;
}

QuantResult quantize_uniform(const LatentSet& latents, const QuantSpec& spec, int img_width,
                             int img_height) {
  if (latents.vectors.empty()) throw ShapeMismatchError("quantize_uniform: empty latent set");
  const Eigen::Index dim = latents.vectors[0].size();
  if (spec.min.size() != dim || spec.max.size() != dim)
    throw ShapeMismatchError("quantize_uniform: range vectors do not match latent dim");
  if (spec.bits < 1 || spec.bits > 16) throw ConfigError("quantize_uniform: bits out of [1,16]");
  for (Eigen::Index k = 0; k < dim; ++k)
    if (!(spec.max[k] > spec.min[k]))
      throw ConfigError("quantize_uniform: empty range on channel " + std::to_string(k));

  const std::uint32_t levels = (1u << spec.bits) - 1u;
  QuantResult result;
  result.dequantized = latents;
  for (const auto& v : latents.vectors) {
    std::vector<std::uint32_t> codes(static_cast<size_t>(dim));
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double step = spec.step(static_cast<int>(k));
      const double clamped = std::clamp(v[k], spec.min[k], spec.max[k]);
      codes[static_cast<size_t>(k)] = static_cast<std::uint32_t>(
          std::min<double>(levels, std::llround((clamped - spec.min[k]) / step)));
    }
    result.codes.push_back(std::move(codes));
  }
  for (size_t i = 0; i < latents.vectors.size(); ++i)
    for (Eigen::Index k = 0; k < dim; ++k)
      result.dequantized.vectors[i][k] =
          spec.min[k] + result.codes[i][static_cast<size_t>(k)] * spec.step(static_cast<int>(k));
  result.bits_per_pixel =
      double(latents.vectors.size()) * double(dim) * spec.bits / (double(img_width) * img_height);
  return result;
}

namespace {

/// First and second finite-difference fields of one channel; central inside,
/// one-sided at the border.
struct DiffFields {
  RealMatrix fx, fy, fxx, fyy, fxy;
};

DiffFields differentiate(const FeatureMap& z, int channel, double h) {
  const int w = z.width;
  const int ht = z.height;
  auto f = [&](int x, int y) { return z.at(x, y)[channel]; };
  DiffFields d;
  d.fx.resize(ht, w);
  d.fy.resize(ht, w);
  d.fxx.resize(ht, w);
  d.fyy.resize(ht, w);
  d.fxy.resize(ht, w);
  for (int y = 0; y < ht; ++y)
    for (int x = 0; x < w; ++x) {
      if (x == 0)
        d.fx(y, x) = (f(1, y) - f(0, y)) / h;
      else if (x == w - 1)
        d.fx(y, x) = (f(w - 1, y) - f(w - 2, y)) / h;
      else
        d.fx(y, x) = (f(x + 1, y) - f(x - 1, y)) / (2 * h);
      if (y == 0)
        d.fy(y, x) = (f(x, 1) - f(x, 0)) / h;
      else if (y == ht - 1)
        d.fy(y, x) = (f(x, ht - 1) - f(x, ht - 2)) / h;
      else
        d.fy(y, x) = (f(x, y + 1) - f(x, y - 1)) / (2 * h);
      if (x == 0)
        d.fxx(y, x) = (f(2, y) - 2 * f(1, y) + f(0, y)) / (h * h);
      else if (x == w - 1)
        d.fxx(y, x) = (f(w - 1, y) - 2 * f(w - 2, y) + f(w - 3, y)) / (h * h);
      else
        d.fxx(y, x) = (f(x + 1, y) - 2 * f(x, y) + f(x - 1, y)) / (h * h);
      if (y == 0)
        d.fyy(y, x) = (f(x, 2) - 2 * f(x, 1) + f(x, 0)) / (h * h);
      else if (y == ht - 1)
        d.fyy(y, x) = (f(x, ht - 1) - 2 * f(x, ht - 2) + f(x, ht - 3)) / (h * h);
      else
        d.fyy(y, x) = (f(x, y + 1) - 2 * f(x, y) + f(x, y - 1)) / (h * h);
    }
  // Mixed derivative as d/dy of the fx field, reusing the same stencils.
  for (int y = 0; y < ht; ++y)
    for (int x = 0; x < w; ++x) {
      if (y == 0)
        d.fxy(y, x) = (d.fx(1, x) - d.fx(0, x)) / h;
      else if (y == ht - 1)
        d.fxy(y, x) = (d.fx(ht - 1, x) - d.fx(ht - 2, x)) / h;
      else
        d.fxy(y, x) = (d.fx(y + 1, x) - d.fx(y - 1, x)) / (2 * h);
    }
  return d;
}

}  // namespace

CurvatureField gaussian_curvature(const FeatureMap& z, double spacing) {
  if (z.width < 3 || z.height < 3)
    throw ShapeMismatchError("gaussian_curvature: grid must be at least 3x3");
  CurvatureField field;
  field.kappa = FeatureMap(z.width, z.height, z.channels);
  field.scores.resize(static_cast<size_t>(z.channels));
  for (int c = 0; c < z.channels; ++c) {
    const DiffFields d = differentiate(z, c, spacing);
    double peak_pos = 0.0;
    double peak_neg = 0.0;
    for (int y = 0; y < z.height; ++y)
      for (int x = 0; x < z.width; ++x) {
        const double slope = 1.0 + d.fx(y, x) * d.fx(y, x) + d.fy(y, x) * d.fy(y, x);
        const double k =
            (d.fxx(y, x) * d.fyy(y, x) - d.fxy(y, x) * d.fxy(y, x)) / (slope * slope);
        field.kappa.at(x, y)[c] = k;
        peak_pos = std::max(peak_pos, k);
        peak_neg = std::min(peak_neg, k);
      }
    field.scores[static_cast<size_t>(c)] =
        std::sqrt((peak_pos * peak_pos + peak_neg * peak_neg) / 2.0);
  }
  field.ranking.resize(static_cast<size_t>(z.channels));
  std::iota(field.ranking.begin(), field.ranking.end(), 0);
  std::stable_sort(field.ranking.begin(), field.ranking.end(), [&](int a, int b) {
    return field.scores[static_cast<size_t>(a)] > field.scores[static_cast<size_t>(b)];
  });
  return field;
}

RealVector latent_interpolate(const RealVector& q1, const RealVector& q2, double alpha) {
  if (q1.size() != q2.size()) throw ShapeMismatchError("latent_interpolate: dims differ");
  return alpha * q1 + (1.0 - alpha) * q2;
}

RealVector latent_mean(const std::vector<RealVector>& latents) {
  if (latents.empty()) throw ShapeMismatchError("latent_mean: empty set");
  RealVector sum = RealVector::Zero(latents[0].size());
  for (const auto& v : latents) {
    if (v.size() != sum.size()) throw ShapeMismatchError("latent_mean: ragged set");
    sum += v;
  }
  return sum / double(latents.size());
}

PcaResult latent_pca(const std::vector<RealVector>& latents, int k) {
  if (latents.size() < 2) throw ShapeMismatchError("latent_pca: need at least 2 samples");
  const Eigen::Index dim = latents[0].size();
  if (k < 1 || k > dim) throw ShapeMismatchError("latent_pca: K out of [1, dim]");
  PcaResult result;
  result.mean = latent_mean(latents);
  RealMatrix cov = RealMatrix::Zero(dim, dim);
  for (const auto& v : latents) {
    const RealVector d = v - result.mean;
    cov += d * d.transpose();
  }
  cov /= double(latents.size() - 1);
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(cov);
  // SelfAdjointEigenSolver sorts ascending; take the trailing K columns.
  result.components.resize(dim, k);
  result.eigenvalues.resize(k);
  for (int i = 0; i < k; ++i) {
    result.components.col(i) = solver.eigenvectors().col(dim - 1 - i);
    result.eigenvalues[i] = solver.eigenvalues()[dim - 1 - i];
  }
  for (const auto& v : latents)
    result.reconstructions.push_back(result.mean +
                                     result.components * (result.components.transpose() * (v - result.mean)));
  return result;
}

}  // namespace finola
