#pragma once

#include "finola/model.hpp"
#include "finola/train.hpp"
#include "finola/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace finola {

/// Binary P5 (1 channel) or P6 (3 channels), maxval 255, scaled to [0,1].
FeatureMap load_image(const std::filesystem::path& path);

/// Inverse of load_image; values are clamped to [0,1] and rounded to bytes,
/// so grid-aligned values round-trip exactly.
void save_image(const std::filesystem::path& path, const FeatureMap& image);

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

/// On-disk model state: "FNLA" magic, u16 format version, the seven dimension
/// fields, rng seed, epoch counter and named 64-bit tensors, all
/// little-endian. Model settings that are not plain dimensions travel as 1×1
/// "config.*" tensors.
struct Checkpoint {
  std::uint16_t version = 1;
  std::uint32_t channels = 0;
  std::uint32_t paths = 0;
  std::uint32_t map_w = 0;
  std::uint32_t map_h = 0;
  std::uint32_t image_w = 0;
  std::uint32_t image_h = 0;
  std::uint32_t image_channels = 0;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;
  std::vector<CheckpointTensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <class Scalar>
Checkpoint checkpoint_from_model(Model<Scalar>& model, std::uint64_t seed, std::uint32_t epoch) {
  const ModelConfig& cfg = model.config();
  Checkpoint ck;
  ck.channels = std::uint32_t(cfg.channels);
  ck.paths = std::uint32_t(cfg.paths);
  ck.map_w = ck.map_h = std::uint32_t(cfg.map_size);
  ck.image_w = ck.image_h = std::uint32_t(cfg.image_size);
  ck.image_channels = std::uint32_t(cfg.image_channels);
  ck.seed = seed;
  ck.epoch = epoch;
  auto scalar_tensor = [](const std::string& name, double v) {
    return CheckpointTensor{name, {1, 1}, {v}};
  };
  ck.tensors.push_back(scalar_tensor("config.ordering", double(int(cfg.ordering))));
  ck.tensors.push_back(scalar_tensor("config.epsilon", cfg.epsilon));
  ck.tensors.push_back(scalar_tensor("config.decoder_width", double(cfg.decoder_width)));
  for (int i = 0; i < 3; ++i)
    ck.tensors.push_back(scalar_tensor("config.encoder_width" + std::to_string(i),
                                       double(cfg.encoder_widths[i])));
  for (ParamTensor<Scalar>* p : model.parameters()) {
    CheckpointTensor t;
    t.name = p->name;
    t.dims = {std::uint32_t(p->value.rows()), std::uint32_t(p->value.cols())};
    t.data.resize(static_cast<size_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      t.data[static_cast<size_t>(i)] = double(p->value.data()[i]);
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

ModelConfig model_config_from_checkpoint(const Checkpoint& ck);

template <class Scalar>
void load_model_from_checkpoint(Model<Scalar>& model, const Checkpoint& ck) {
  for (ParamTensor<Scalar>* p : model.parameters()) {
    const CheckpointTensor* found = nullptr;
    for (const CheckpointTensor& t : ck.tensors)
      if (t.name == p->name) {
        found = &t;
        break;
      }
    if (found == nullptr)
      throw MalformedHeaderError("checkpoint: missing tensor " + p->name);
    if (found->dims.size() != 2 || found->dims[0] != std::uint32_t(p->value.rows()) ||
        found->dims[1] != std::uint32_t(p->value.cols()))
      throw ShapeMismatchError("checkpoint: tensor " + p->name + " has unexpected shape");
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      p->value.data()[i] = Scalar(found->data[static_cast<size_t>(i)]);
  }
}

/// Plain key=value run settings; '#' starts a comment, unknown keys are
/// rejected. as_lines() echoes every key in a fixed order for metric headers.
struct RunConfig {
  int channels = 16;
  int paths = 1;
  int map_size = 4;
  int image_size = 16;
  std::string ordering = "averaged";
  double epsilon = 1e-6;
  std::string constraint = "complex_free";
  TrainConfig train;
  std::string dataset;
  std::uint64_t seed = 0;

  std::vector<std::pair<std::string, std::string>> as_lines() const;
  Ordering ordering_mode() const;
};

RunConfig parse_run_config(const std::filesystem::path& path);
RunConfig parse_run_config_text(const std::string& text);

/// Dataset resolution: "synthetic:<count>x<size>[:<seed>]" or a directory of
/// .pgm files (sorted by name, identical shapes).
Dataset load_dataset(const std::string& spec);

void write_metrics_csv(const std::filesystem::path& path, const RunConfig& cfg,
                       const std::vector<EpochRow>& history);

}  // namespace finola
