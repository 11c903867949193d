#pragma once

#include "finola/core.hpp"
#include "finola/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace finola {

template <class Scalar>
struct ParamTensor {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Matrix<Scalar>::Zero(rows, cols);
    grad = Matrix<Scalar>::Zero(rows, cols);
  }
};

enum class DecoderBlockKind { up_conv, res_conv, final_conv };

struct DecoderBlock {
  DecoderBlockKind kind;
  int channels;
};

struct DecoderSpec {
  std::vector<DecoderBlock> blocks;
  int width = 32;
  int image_channels = 1;
};

/// Doubles map_size up to image_size with up-convs, inserts one residual conv
/// after the first upsampling stage, and ends with a 3×3 projection to image
/// channels.
DecoderSpec build_decoder_spec(int map_size, int image_size, int width, int image_channels);

struct ModelConfig {
  int image_size = 16;
  int image_channels = 1;
  int channels = 16;      // C
  int paths = 1;          // M
  int map_size = 4;
  Ordering ordering = Ordering::averaged;
  double epsilon = 1e-6;
  int decoder_width = 32;
  int encoder_widths[3] = {16, 24, 32};
};

/// Grid placements for M latents: center for M=1, quadrant centers for M=4.
std::vector<GridPos> model_path_positions(int paths, int map_size);

namespace nn {

/// All convolutions are 3×3 with padding 1. Kernels are stored flattened as
/// (out_c, 9·in_c) with row-of-kernel-major, channel-minor columns so the
/// forward pass is one GEMM against the im2col matrix.
template <class Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& input, int w, int h, int batch, int stride) {
  const int in_c = static_cast<int>(input.rows());
  const int w_out = stride == 2 ? (w + 1) / 2 : w;
  const int h_out = stride == 2 ? (h + 1) / 2 : h;
  const int s_in = w * h;
  const int s_out = w_out * h_out;
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(Eigen::Index(9) * in_c, Eigen::Index(s_out) * batch);
  for (int b = 0; b < batch; ++b)
    for (int oy = 0; oy < h_out; ++oy)
      for (int ox = 0; ox < w_out; ++ox) {
        const Eigen::Index col = Eigen::Index(b) * s_out + oy * w_out + ox;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= w) continue;
            cols.block((ky * 3 + kx) * in_c, col, in_c, 1) =
                input.col(Eigen::Index(b) * s_in + iy * w + ix);
          }
        }
      }
  return cols;
}

template <class Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& grad_cols, int in_c, int w, int h, int batch,
                      int stride) {
  const int w_out = stride == 2 ? (w + 1) / 2 : w;
  const int h_out = stride == 2 ? (h + 1) / 2 : h;
  const int s_in = w * h;
  const int s_out = w_out * h_out;
  Matrix<Scalar> grad_input = Matrix<Scalar>::Zero(in_c, Eigen::Index(s_in) * batch);
  for (int b = 0; b < batch; ++b)
    for (int oy = 0; oy < h_out; ++oy)
      for (int ox = 0; ox < w_out; ++ox) {
        const Eigen::Index col = Eigen::Index(b) * s_out + oy * w_out + ox;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= w) continue;
            grad_input.col(Eigen::Index(b) * s_in + iy * w + ix) +=
                grad_cols.block((ky * 3 + kx) * in_c, col, in_c, 1);
          }
        }
      }
  return grad_input;
}

template <class Scalar>
struct ConvCache {
  Matrix<Scalar> cols;
  Matrix<Scalar> out;  // post-activation when relu is applied
};

template <class Scalar>
struct ConvOp {
  ParamTensor<Scalar> kernel;
  ParamTensor<Scalar> bias;
  int in_c = 0;
  int out_c = 0;
  int stride = 1;
  bool relu = false;

  void configure(const std::string& name, int in_channels, int out_channels, int stride_,
                 bool relu_) {
    in_c = in_channels;
    out_c = out_channels;
    stride = stride_;
    relu = relu_;
    kernel.name = name + ".kernel";
    kernel.resize(out_c, Eigen::Index(9) * in_c);
    bias.name = name + ".bias";
    bias.resize(out_c, 1);
  }

  const Matrix<Scalar>& forward(const Matrix<Scalar>& input, int w, int h, int batch,
                                ConvCache<Scalar>& cache) const {
    cache.cols = im2col<Scalar>(input, w, h, batch, stride);
    cache.out = kernel.value * cache.cols;
    cache.out.colwise() += bias.value.col(0);
    if (relu) cache.out = cache.out.cwiseMax(Scalar(0));
    return cache.out;
  }

  Matrix<Scalar> backward(Matrix<Scalar> grad_out, const ConvCache<Scalar>& cache, int w, int h,
                          int batch) {
    if (relu)
      grad_out =
          ((cache.out.array() > Scalar(0)).template cast<Scalar>() * grad_out.array()).matrix();
    kernel.grad.noalias() += grad_out * cache.cols.transpose();
    bias.grad.col(0) += grad_out.rowwise().sum();
    const Matrix<Scalar> grad_cols = kernel.value.transpose() * grad_out;
    return col2im<Scalar>(grad_cols, in_c, w, h, batch, stride);
  }
};

template <class Scalar>
Matrix<Scalar> upsample2x(const Matrix<Scalar>& input, int w, int h, int batch) {
  const int c = static_cast<int>(input.rows());
  Matrix<Scalar> out(c, Eigen::Index(4) * w * h * batch);
  const int s_in = w * h;
  const int s_out = 4 * s_in;
  for (int b = 0; b < batch; ++b)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x)
        out.col(Eigen::Index(b) * s_out + y * 2 * w + x) =
            input.col(Eigen::Index(b) * s_in + (y / 2) * w + x / 2);
  return out;
}

template <class Scalar>
Matrix<Scalar> upsample2x_backward(const Matrix<Scalar>& grad_out, int w, int h, int batch) {
  const int c = static_cast<int>(grad_out.rows());
  const int s_in = w * h;
  const int s_out = 4 * s_in;
  Matrix<Scalar> grad_in = Matrix<Scalar>::Zero(c, Eigen::Index(s_in) * batch);
  for (int b = 0; b < batch; ++b)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x)
        grad_in.col(Eigen::Index(b) * s_in + (y / 2) * w + x / 2) +=
            grad_out.col(Eigen::Index(b) * s_out + y * 2 * w + x);
  return grad_in;
}

}  // namespace nn

template <class Scalar>
struct LossResult {
  Scalar value = 0;
  Matrix<Scalar> grad;
};

/// Mean squared error over all elements, restricted to mask≠0 entries when a
/// mask is given; grad is d(loss)/d(recon).
template <class Scalar>
LossResult<Scalar> loss_l2(const Matrix<Scalar>& recon, const Matrix<Scalar>& target,
                           const Matrix<Scalar>* mask = nullptr) {
  if (recon.rows() != target.rows() || recon.cols() != target.cols())
    throw ShapeMismatchError("loss_l2: shapes differ");
  LossResult<Scalar> result;
  const Matrix<Scalar> diff = recon - target;
  if (mask == nullptr) {
    result.value = diff.squaredNorm() / Scalar(diff.size());
    result.grad = Scalar(2) / Scalar(diff.size()) * diff;
    return result;
  }
  if (mask->rows() != recon.rows() || mask->cols() != recon.cols())
    throw ShapeMismatchError("loss_l2: mask shape differs");
  const Scalar count = mask->sum();
  if (count <= Scalar(0)) throw EmptyMaskError("loss_l2: mask selects no pixels");
  const Matrix<Scalar> masked = diff.cwiseProduct(*mask);
  result.value = masked.cwiseProduct(diff).sum() / count;
  result.grad = Scalar(2) / count * masked;
  return result;
}

/// Encoder → multi-path norm+linear propagation → decoder, with explicit
/// buffers for every intermediate and hand-written reverse passes. Forward is
/// deterministic for a fixed seed and single-threaded throughout.
template <class Scalar>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.image_size % cfg.map_size != 0)
      throw ConfigError("model: image size must be a multiple of the map size");
    positions_ = model_path_positions(cfg.paths, cfg.map_size);
    const int ic = cfg.image_channels;
    enc1_.configure("encoder.conv1", ic, cfg.encoder_widths[0], 2, true);
    enc2_.configure("encoder.conv2", cfg.encoder_widths[0], cfg.encoder_widths[1], 2, true);
    enc3_.configure("encoder.conv3", cfg.encoder_widths[1], cfg.encoder_widths[2], 2, true);
    linear_w_.name = "encoder.linear.weight";
    linear_w_.resize(Eigen::Index(cfg.paths) * cfg.channels, cfg.encoder_widths[2]);
    linear_b_.name = "encoder.linear.bias";
    linear_b_.resize(Eigen::Index(cfg.paths) * cfg.channels, 1);
    A_.name = "finola.A";
    A_.resize(cfg.channels, cfg.channels);
    B_.name = "finola.B";
    B_.resize(cfg.channels, cfg.channels);
    A_minus_.name = "finola.A_minus";
    A_minus_.resize(cfg.channels, cfg.channels);
    B_minus_.name = "finola.B_minus";
    B_minus_.resize(cfg.channels, cfg.channels);

    spec_ = build_decoder_spec(cfg.map_size, cfg.image_size, cfg.decoder_width, ic);
    int in_c = cfg.channels;
    int block_index = 0;
    for (const DecoderBlock& block : spec_.blocks) {
      const std::string name = "decoder.block" + std::to_string(block_index++);
      switch (block.kind) {
        case DecoderBlockKind::up_conv: {
          nn::ConvOp<Scalar> conv;
          conv.configure(name + ".up", in_c, block.channels, 1, true);
          dec_convs_.push_back(std::move(conv));
          in_c = block.channels;
          break;
        }
        case DecoderBlockKind::res_conv: {
          nn::ConvOp<Scalar> c1, c2;
          c1.configure(name + ".res1", in_c, block.channels, 1, true);
          c2.configure(name + ".res2", block.channels, block.channels, 1, false);
          dec_convs_.push_back(std::move(c1));
          dec_convs_.push_back(std::move(c2));
          break;
        }
        case DecoderBlockKind::final_conv: {
          nn::ConvOp<Scalar> conv;
          conv.configure(name + ".out", in_c, block.channels, 1, false);
          dec_convs_.push_back(std::move(conv));
          break;
        }
      }
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const DecoderSpec& decoder_spec() const { return spec_; }

  std::vector<ParamTensor<Scalar>*> parameters() {
    std::vector<ParamTensor<Scalar>*> out = {&enc1_.kernel, &enc1_.bias, &enc2_.kernel,
                                             &enc2_.bias,   &enc3_.kernel, &enc3_.bias,
                                             &linear_w_,    &linear_b_,  &A_,
                                             &B_,           &A_minus_,   &B_minus_};
    for (auto& conv : dec_convs_) {
      out.push_back(&conv.kernel);
      out.push_back(&conv.bias);
    }
    return out;
  }

  /// Uniform init: direction matrices in ±1/√C, kernels and the linear head
  /// in ±1/√fan_in, biases zero. Deterministic in registry order.
  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Matrix<Scalar>& m, double bound) {
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = Scalar(dist(rng));
    };
    for (ParamTensor<Scalar>* p : parameters()) {
      if (p->name.ends_with(".bias")) {
        p->value.setZero();
      } else if (p->name.starts_with("finola.")) {
        fill(p->value, 1.0 / std::sqrt(double(cfg_.channels)));
      } else {
        fill(p->value, 1.0 / std::sqrt(double(p->value.cols())));
      }
      p->grad.setZero();
    }
  }

  void zero_grad() {
    for (ParamTensor<Scalar>* p : parameters()) p->grad.setZero();
  }

  FinolaParamsT<Scalar> finola_params() const {
    return {A_.value, B_.value, A_minus_.value, B_minus_.value, Scalar(cfg_.epsilon)};
  }

  /// images: (image_channels, image_size²·batch). Returns latents (M·C, batch).
  const Matrix<Scalar>& encode(const Matrix<Scalar>& images, int batch) {
    const int n = cfg_.image_size;
    if (images.rows() != cfg_.image_channels ||
        images.cols() != Eigen::Index(n) * n * batch)
      throw ShapeMismatchError("encode: image batch has unexpected shape");
    cache_.batch = batch;
    const int n1 = (n + 1) / 2, n2 = (n1 + 1) / 2, n3 = (n2 + 1) / 2;
    enc1_.forward(images, n, n, batch, cache_.enc1);
    enc2_.forward(cache_.enc1.out, n1, n1, batch, cache_.enc2);
    enc3_.forward(cache_.enc2.out, n2, n2, batch, cache_.enc3);
    const int s3 = n3 * n3;
    cache_.pooled.resize(cfg_.encoder_widths[2], batch);
    for (int b = 0; b < batch; ++b)
      cache_.pooled.col(b) = cache_.enc3.out.block(0, Eigen::Index(b) * s3,
                                                   cfg_.encoder_widths[2], s3)
                                 .rowwise()
                                 .mean();
    cache_.latents = linear_w_.value * cache_.pooled;
    cache_.latents.colwise() += linear_b_.value.col(0);
    cache_.has_latents = true;
    return cache_.latents;
  }

  /// latents: (M·C, batch) → summed multi-path maps (C, map_size²·batch).
  const Matrix<Scalar>& generate_maps(const Matrix<Scalar>& latents, int batch) {
    const int c = cfg_.channels;
    const int s = cfg_.map_size * cfg_.map_size;
    if (latents.rows() != Eigen::Index(cfg_.paths) * c || latents.cols() != batch)
      throw ShapeMismatchError("generate_maps: latent batch has unexpected shape");
    cache_.batch = batch;
    const bool need_h = cfg_.ordering != Ordering::v_first;
    const bool need_v = cfg_.ordering != Ordering::h_first;
    const Eigen::Index path_cols = Eigen::Index(s) * batch * cfg_.paths;
    if (need_h) cache_.maps_h.resize(c, path_cols);
    if (need_v) cache_.maps_v.resize(c, path_cols);
    cache_.maps.resize(c, Eigen::Index(s) * batch);
    cache_.maps.setZero();
    const FinolaParamsT<Scalar> p = finola_params();
    for (int b = 0; b < batch; ++b)
      for (int i = 0; i < cfg_.paths; ++i) {
        const Vector<Scalar> q = latents.block(Eigen::Index(i) * c, b, c, 1);
        const Eigen::Index base = (Eigen::Index(b) * cfg_.paths + i) * s;
        if (need_h) {
          const FeatureMapT<Scalar> m = detail::propagate_single<Scalar>(
              q, positions_[static_cast<size_t>(i)], p, cfg_.map_size, cfg_.map_size,
              Ordering::h_first);
          cache_.maps_h.block(0, base, c, s) = m.data;
        }
        if (need_v) {
          const FeatureMapT<Scalar> m = detail::propagate_single<Scalar>(
              q, positions_[static_cast<size_t>(i)], p, cfg_.map_size, cfg_.map_size,
              Ordering::v_first);
          cache_.maps_v.block(0, base, c, s) = m.data;
        }
        auto cell_block = cache_.maps.block(0, Eigen::Index(b) * s, c, s);
        if (need_h && need_v)
          cell_block += Scalar(0.5) * (cache_.maps_h.block(0, base, c, s) +
                                       cache_.maps_v.block(0, base, c, s));
        else if (need_h)
          cell_block += cache_.maps_h.block(0, base, c, s);
        else
          cell_block += cache_.maps_v.block(0, base, c, s);
      }
    cache_.has_maps = true;
    return cache_.maps;
  }

  /// maps: (C, map_size²·batch) → reconstruction (image_channels, image_size²·batch).
  const Matrix<Scalar>& decode_maps(const Matrix<Scalar>& maps, int batch) {
    const int s = cfg_.map_size * cfg_.map_size;
    if (maps.rows() != cfg_.channels || maps.cols() != Eigen::Index(s) * batch)
      throw ShapeMismatchError("decode_maps: map batch has unexpected shape");
    cache_.batch = batch;
    cache_.dec.clear();
    cache_.dec_inputs.clear();
    // `current` points into these vectors; reserve so growth never reallocates.
    cache_.dec.reserve(dec_convs_.size());
    cache_.dec_inputs.reserve(spec_.blocks.size());
    int w = cfg_.map_size;
    const Matrix<Scalar>* current = &maps;
    size_t conv_index = 0;
    for (const DecoderBlock& block : spec_.blocks) {
      switch (block.kind) {
        case DecoderBlockKind::up_conv: {
          cache_.dec_inputs.push_back(nn::upsample2x<Scalar>(*current, w, w, batch));
          w *= 2;
          cache_.dec.emplace_back();
          current = &dec_convs_[conv_index].forward(cache_.dec_inputs.back(), w, w, batch,
                                                    cache_.dec.back());
          ++conv_index;
          break;
        }
        case DecoderBlockKind::res_conv: {
          cache_.dec_inputs.push_back(*current);
          cache_.dec.emplace_back();
          const Matrix<Scalar>& inner = dec_convs_[conv_index].forward(
              cache_.dec_inputs.back(), w, w, batch, cache_.dec.back());
          ++conv_index;
          cache_.dec.emplace_back();
          dec_convs_[conv_index].forward(inner, w, w, batch, cache_.dec.back());
          cache_.dec.back().out += cache_.dec_inputs[cache_.dec_inputs.size() - 1];
          current = &cache_.dec.back().out;
          ++conv_index;
          break;
        }
        case DecoderBlockKind::final_conv: {
          cache_.dec_inputs.push_back(*current);
          cache_.dec.emplace_back();
          current = &dec_convs_[conv_index].forward(cache_.dec_inputs.back(), w, w, batch,
                                                    cache_.dec.back());
          ++conv_index;
          break;
        }
      }
    }
    cache_.recon = *current;
    cache_.has_recon = true;
    return cache_.recon;
  }

  const Matrix<Scalar>& forward(const Matrix<Scalar>& images, int batch) {
    encode(images, batch);
    generate_maps(cache_.latents, batch);
    return decode_maps(cache_.maps, batch);
  }

  /// Reverse pass for the whole pipeline; call after forward. Gradients
  /// accumulate into every parameter's grad buffer.
  void backward(const Matrix<Scalar>& grad_recon) {
    if (!cache_.has_recon || !cache_.has_maps || !cache_.has_latents)
      throw GraphNotEvaluatedError("backward: run forward first");
    const Matrix<Scalar> grad_maps = backward_decoder(grad_recon);
    const Matrix<Scalar> grad_latents = backward_finola(grad_maps);
    backward_encoder(grad_latents);
  }

  /// Decoder-only reverse; returns d(loss)/d(maps).
  Matrix<Scalar> backward_decoder(const Matrix<Scalar>& grad_recon) {
    if (!cache_.has_recon) throw GraphNotEvaluatedError("backward_decoder: run decode first");
    const int batch = cache_.batch;
    Matrix<Scalar> grad = grad_recon;
    int w = cfg_.image_size;
    size_t conv_index = dec_convs_.size();
    size_t cache_index = cache_.dec.size();
    size_t input_index = cache_.dec_inputs.size();
    for (auto it = spec_.blocks.rbegin(); it != spec_.blocks.rend(); ++it) {
      switch (it->kind) {
        case DecoderBlockKind::final_conv: {
          --conv_index;
          --cache_index;
          --input_index;
          grad = dec_convs_[conv_index].backward(grad, cache_.dec[cache_index], w, w, batch);
          break;
        }
        case DecoderBlockKind::res_conv: {
          const Matrix<Scalar> grad_skip = grad;
          --conv_index;
          --cache_index;
          grad = dec_convs_[conv_index].backward(grad, cache_.dec[cache_index], w, w, batch);
          --conv_index;
          --cache_index;
          --input_index;
          grad = dec_convs_[conv_index].backward(grad, cache_.dec[cache_index], w, w, batch);
          grad += grad_skip;
          break;
        }
        case DecoderBlockKind::up_conv: {
          --conv_index;
          --cache_index;
          --input_index;
          grad = dec_convs_[conv_index].backward(grad, cache_.dec[cache_index], w, w, batch);
          w /= 2;
          grad = nn::upsample2x_backward<Scalar>(grad, w, w, batch);
          break;
        }
      }
    }
    return grad;
  }

  /// Propagation reverse; returns d(loss)/d(latents) and accumulates into the
  /// four direction matrices.
  Matrix<Scalar> backward_finola(const Matrix<Scalar>& grad_maps) {
    if (!cache_.has_maps) throw GraphNotEvaluatedError("backward_finola: run generate first");
    const int batch = cache_.batch;
    const int c = cfg_.channels;
    const int n = cfg_.map_size;
    const int s = n * n;
    Matrix<Scalar> grad_latents = Matrix<Scalar>::Zero(Eigen::Index(cfg_.paths) * c, batch);
    const bool need_h = cfg_.ordering != Ordering::v_first;
    const bool need_v = cfg_.ordering != Ordering::h_first;
    const Scalar weight = need_h && need_v ? Scalar(0.5) : Scalar(1);
    for (int b = 0; b < batch; ++b)
      for (int i = 0; i < cfg_.paths; ++i) {
        const Eigen::Index base = (Eigen::Index(b) * cfg_.paths + i) * s;
        const GridPos pos = positions_[static_cast<size_t>(i)];
        if (need_h)
          grad_latents.block(Eigen::Index(i) * c, b, c, 1) +=
              backward_single_ordering(cache_.maps_h, base,
                                       weight * grad_maps.block(0, Eigen::Index(b) * s, c, s), pos,
                                       Ordering::h_first);
        if (need_v)
          grad_latents.block(Eigen::Index(i) * c, b, c, 1) +=
              backward_single_ordering(cache_.maps_v, base,
                                       weight * grad_maps.block(0, Eigen::Index(b) * s, c, s), pos,
                                       Ordering::v_first);
      }
    return grad_latents;
  }

  /// Encoder reverse from d(loss)/d(latents).
  void backward_encoder(const Matrix<Scalar>& grad_latents) {
    if (!cache_.has_latents) throw GraphNotEvaluatedError("backward_encoder: run encode first");
    const int batch = cache_.batch;
    const int n = cfg_.image_size;
    const int n1 = (n + 1) / 2, n2 = (n1 + 1) / 2, n3 = (n2 + 1) / 2;
    linear_w_.grad.noalias() += grad_latents * cache_.pooled.transpose();
    linear_b_.grad.col(0) += grad_latents.rowwise().sum();
    const Matrix<Scalar> grad_pooled = linear_w_.value.transpose() * grad_latents;
    const int s3 = n3 * n3;
    Matrix<Scalar> grad_act3(cfg_.encoder_widths[2], Eigen::Index(s3) * batch);
    for (int b = 0; b < batch; ++b)
      for (int j = 0; j < s3; ++j)
        grad_act3.col(Eigen::Index(b) * s3 + j) = grad_pooled.col(b) / Scalar(s3);
    const Matrix<Scalar> g2 = enc3_.backward(grad_act3, cache_.enc3, n2, n2, batch);
    const Matrix<Scalar> g1 = enc2_.backward(g2, cache_.enc2, n1, n1, batch);
    enc1_.backward(g1, cache_.enc1, n, n, batch);
  }

 private:
  /// Walks one ordering's generation chains in exact reverse, accumulating
  /// into the direction matrices and returning the seed-cell gradient.
  Vector<Scalar> backward_single_ordering(const Matrix<Scalar>& maps, Eigen::Index base,
                                          Matrix<Scalar> grad, GridPos pos, Ordering ordering) {
    const int c = cfg_.channels;
    const int n = cfg_.map_size;
    auto cell = [&](int x, int y) { return maps.col(base + y * n + x); };
    auto g = [&](int x, int y) { return grad.col(y * n + x); };

    // One reverse step: target grad flows to its source cell through the
    // norm+linear update, and into the direction matrix.
    auto reverse_step = [&](int sx, int sy, int tx, int ty, ParamTensor<Scalar>& dir) {
      const Vector<Scalar> z = cell(sx, sy);
      const Vector<Scalar> gt = g(tx, ty);
      const auto stats = channel_stats<Scalar>(z);
      const Scalar d = stats.std + Scalar(cfg_.epsilon);
      const Vector<Scalar> zhat = (z.array() - stats.mean).matrix() / d;
      dir.grad.noalias() += gt * zhat.transpose();
      const Vector<Scalar> w = dir.value.transpose() * gt;
      Vector<Scalar> gz = gt + (w.array() - w.mean()).matrix() / d;
      if (stats.std > Scalar(0)) gz -= zhat * (w.dot(zhat) / (Scalar(c) * stats.std));
      g(sx, sy) += gz;
    };

    auto reverse_row = [&](int y) {
      for (int tx = 0; tx < pos.x; ++tx) reverse_step(tx + 1, y, tx, y, A_minus_);
      for (int tx = n - 1; tx > pos.x; --tx) reverse_step(tx - 1, y, tx, y, A_);
    };
    auto reverse_column = [&](int x) {
      for (int ty = 0; ty < pos.y; ++ty) reverse_step(x, ty + 1, x, ty, B_minus_);
      for (int ty = n - 1; ty > pos.y; --ty) reverse_step(x, ty - 1, x, ty, B_);
    };

    if (ordering == Ordering::h_first) {
      for (int x = 0; x < n; ++x) reverse_column(x);
      reverse_row(pos.y);
    } else {
      for (int y = 0; y < n; ++y) reverse_row(y);
      reverse_column(pos.x);
    }
    return g(pos.x, pos.y);
  }

  struct Cache {
    int batch = 0;
    nn::ConvCache<Scalar> enc1, enc2, enc3;
    Matrix<Scalar> pooled, latents;
    Matrix<Scalar> maps_h, maps_v, maps;
    std::vector<nn::ConvCache<Scalar>> dec;
    std::vector<Matrix<Scalar>> dec_inputs;
    Matrix<Scalar> recon;
    bool has_latents = false;
    bool has_maps = false;
    bool has_recon = false;
  };

  ModelConfig cfg_;
  DecoderSpec spec_;
  std::vector<GridPos> positions_;
  nn::ConvOp<Scalar> enc1_, enc2_, enc3_;
  ParamTensor<Scalar> linear_w_, linear_b_;
  ParamTensor<Scalar> A_, B_, A_minus_, B_minus_;
  std::vector<nn::ConvOp<Scalar>> dec_convs_;
  Cache cache_;
};

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_err = 0.0;
};

/// Central finite differences (step h) against the analytic gradients of the
/// L2 loss on one batch, per parameter group. At most `per_group` elements are
/// probed per group, evenly strided. Relative error uses a 1e-6 floor so
/// all-but-zero gradients do not flag spuriously. The default step sits below
/// the typical distance of relu pre-activations from zero; larger steps make
/// the difference quotient straddle kinks and report spurious errors.
GradCheckReport grad_check(Model<double>& model, const Matrix<double>& images,
                           const Matrix<double>& targets, int batch, double h = 1e-5,
                           int per_group = 128);

}  // namespace finola
