#pragma once

#include "finola/model.hpp"
#include "finola/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace finola {

struct TrainConfig {
  double base_lr = 1.5e-4;
  double weight_decay = 0.1;
  int batch_size = 128;
  int warmup_epochs = 10;
  int total_epochs = 100;
  std::string schedule = "cosine";
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (schedule != "cosine") throw ConfigError("train: unknown schedule '" + schedule + "'");
    if (warmup_epochs >= total_epochs)
      throw ConfigError("train: warmup_epochs must be below total_epochs");
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  }
};

/// Effective lr for an epoch: base_lr·batch/256, ramped linearly over the
/// warmup epochs (epoch 0 → 0) and cosine-decayed afterwards.
double scheduled_lr(const TrainConfig& cfg, int epoch);

/// Adam with decoupled weight decay, applied to every tensor.
template <class Scalar>
class AdamW {
 public:
  AdamW(std::vector<ParamTensor<Scalar>*> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (ParamTensor<Scalar>* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step(double lr) {
    ++t_;
    const Scalar b1 = Scalar(cfg_.beta1);
    const Scalar b2 = Scalar(cfg_.beta2);
    const Scalar bias1 = Scalar(1) - Scalar(std::pow(cfg_.beta1, t_));
    const Scalar bias2 = Scalar(1) - Scalar(std::pow(cfg_.beta2, t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      ParamTensor<Scalar>& p = *params_[i];
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = (b2 * v_[i].array() + (Scalar(1) - b2) * p.grad.array().square()).matrix();
      const auto m_hat = m_[i].array() / bias1;
      const auto v_hat = v_[i].array() / bias2;
      p.value.array() -= Scalar(lr) * (m_hat / (v_hat.sqrt() + Scalar(cfg_.adam_eps)) +
                                       Scalar(cfg_.weight_decay) * p.value.array());
    }
  }

 private:
  std::vector<ParamTensor<Scalar>*> params_;
  TrainConfig cfg_;
  std::vector<Matrix<Scalar>> m_, v_;
  long t_ = 0;
};

/// Image set in the same layout the model consumes: column b·S+j is pixel j
/// of image b, values in [0,1].
struct Dataset {
  int image_size = 0;
  int channels = 0;
  int count = 0;
  Matrix<float> images;
};

/// Smooth seeded images: linear ramp plus two Gaussian bumps, min-max
/// normalized per image.
Dataset make_synthetic_dataset(int count, int image_size, std::uint64_t seed);

/// PSNR (peak 1) of predicting every image by its own mean value, from the
/// aggregate MSE over the set.
double baseline_constant_mean_psnr(const Dataset& data);

double psnr_from_mse(double mse, double peak = 1.0);

struct EpochRow {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double psnr = 0.0;
};

struct TrainResult {
  std::vector<EpochRow> history;
  double final_loss = 0.0;
  double final_psnr = 0.0;
};

/// Full-set reconstruction PSNR with outputs clamped to [0,1].
double evaluate_psnr(Model<float>& model, const Dataset& data);

/// Single-threaded deterministic loop: per-epoch shuffle from `seed`, one
/// AdamW step per batch at the epoch's scheduled lr. The model must be
/// initialized by the caller.
TrainResult train_model(Model<float>& model, const Dataset& data, const TrainConfig& cfg,
                        std::uint64_t seed);

}  // namespace finola
