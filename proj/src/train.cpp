#include "finola/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace finola {

double scheduled_lr(const TrainConfig& cfg, int epoch) {
  cfg.validate();
  const double base = cfg.base_lr * cfg.batch_size / 256.0;
  if (epoch < cfg.warmup_epochs) return base * epoch / cfg.warmup_epochs;
  const double progress =
      double(epoch - cfg.warmup_epochs) / double(cfg.total_epochs - cfg.warmup_epochs);
  const double pi = std::acos(-1.0);
  return base * 0.5 * (1.0 + std::cos(pi * progress));
}

Dataset make_synthetic_dataset(int count, int image_size, std::uint64_t seed) {
  Dataset data;
  data.image_size = image_size;
  data.channels = 1;
  data.count = count;
  const int s = image_size * image_size;
  data.images.resize(1, Eigen::Index(s) * count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, image_size - 1.0);
  std::uniform_real_distribution<double> sigma(1.5, 3.5);
  for (int b = 0; b < count; ++b) {
    const double a0 = unit(rng);
    const double ax = sym(rng);
    const double ay = sym(rng);
    struct Bump {
      double cx, cy, s2, amp;
    } bumps[2];
    for (auto& bump : bumps) {
      bump.cx = pos(rng);
      bump.cy = pos(rng);
      const double sg = sigma(rng);
      bump.s2 = 2.0 * sg * sg;
      bump.amp = sym(rng);
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::vector<double> pixels(static_cast<size_t>(s));
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        double v = a0 + ax * x / (image_size - 1.0) + ay * y / (image_size - 1.0);
        for (const auto& bump : bumps) {
          const double dx = x - bump.cx;
          const double dy = y - bump.cy;
          v += bump.amp * std::exp(-(dx * dx + dy * dy) / bump.s2);
        }
        pixels[static_cast<size_t>(y * image_size + x)] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    const double span = hi - lo;
    for (int j = 0; j < s; ++j)
      data.images(0, Eigen::Index(b) * s + j) =
          span > 1e-9 ? float((pixels[static_cast<size_t>(j)] - lo) / span) : 0.5f;
  }
  return data;
}

double psnr_from_mse(double mse, double peak) {
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

double baseline_constant_mean_psnr(const Dataset& data) {
  const int s = data.image_size * data.image_size;
  double total_sq = 0.0;
  for (int b = 0; b < data.count; ++b) {
    const auto block = data.images.block(0, Eigen::Index(b) * s, data.channels, s);
    const double mean = block.template cast<double>().mean();
    total_sq += (block.template cast<double>().array() - mean).square().sum();
  }
  const double mse = total_sq / (double(data.count) * s * data.channels);
  return psnr_from_mse(mse);
}

double evaluate_psnr(Model<float>& model, const Dataset& data) {
  const int s = data.image_size * data.image_size;
  const int chunk = std::min(64, data.count);
  double total_sq = 0.0;
  for (int start = 0; start < data.count; start += chunk) {
    const int bs = std::min(chunk, data.count - start);
    const Matrix<float> batch =
        data.images.block(0, Eigen::Index(start) * s, data.channels, Eigen::Index(bs) * s);
    const Matrix<float> recon =
        model.forward(batch, bs).cwiseMax(0.0f).cwiseMin(1.0f);
    total_sq += (recon - batch).template cast<double>().squaredNorm();
  }
  const double mse = total_sq / (double(data.count) * s * data.channels);
  return psnr_from_mse(mse);
}

TrainResult train_model(Model<float>& model, const Dataset& data, const TrainConfig& cfg,
                        std::uint64_t seed) {
  cfg.validate();
  if (data.count < 1) throw ConfigError("train: empty dataset");
  if (data.image_size != model.config().image_size ||
      data.channels != model.config().image_channels)
    throw ShapeMismatchError("train: dataset does not match the model's image shape");
  const int s = data.image_size * data.image_size;
  AdamW<float> optimizer(model.parameters(), cfg);
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<size_t>(data.count));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  Matrix<float> batch;
  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (int start = 0; start < data.count; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, data.count - start);
      batch.resize(data.channels, Eigen::Index(bs) * s);
      for (int k = 0; k < bs; ++k)
        batch.block(0, Eigen::Index(k) * s, data.channels, s) = data.images.block(
            0, Eigen::Index(order[static_cast<size_t>(start + k)]) * s, data.channels, s);
      const Matrix<float>& recon = model.forward(batch, bs);
      const LossResult<float> loss = loss_l2<float>(recon, batch);
      model.zero_grad();
      model.backward(loss.grad);
      optimizer.step(lr);
      loss_sum += double(loss.value);
      ++batches;
    }
    const double mean_loss = loss_sum / batches;
    result.history.push_back({epoch, lr, mean_loss, psnr_from_mse(mean_loss)});
  }
  result.final_loss = result.history.empty() ? 0.0 : result.history.back().loss;
  result.final_psnr = evaluate_psnr(model, data);
  return result;
}

}  // namespace finola
