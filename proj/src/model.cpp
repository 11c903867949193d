#include "finola/model.hpp"

#include <algorithm>
#include <string>

namespace finola {

DecoderSpec build_decoder_spec(int map_size, int image_size, int width, int image_channels) {
  if (map_size < 1 || image_size < map_size)
    throw ConfigError("build_decoder_spec: image size must be >= map size");
  int doublings = 0;
  int n = map_size;
  while (n < image_size) {
    n *= 2;
    ++doublings;
  }
  if (n != image_size)
    throw ConfigError("build_decoder_spec: image size must be map size times a power of 2");
  if (doublings < 1)
    throw ConfigError("build_decoder_spec: need at least one upsampling stage");
  DecoderSpec spec;
  spec.width = width;
  spec.image_channels = image_channels;
  for (int i = 0; i < doublings; ++i) {
    spec.blocks.push_back({DecoderBlockKind::up_conv, width});
    if (i == 0) spec.blocks.push_back({DecoderBlockKind::res_conv, width});
  }
  spec.blocks.push_back({DecoderBlockKind::final_conv, image_channels});
  return spec;
}

std::vector<GridPos> model_path_positions(int paths, int map_size) {
  if (paths == 1) return {default_origin(map_size, map_size)};
  if (paths == 4) {
    const auto centers = quadrant_centers(map_size, map_size);
    return {centers.begin(), centers.end()};
  }
  throw ConfigError("model supports 1 or 4 latent paths, got " + std::to_string(paths));
}

GradCheckReport grad_check(Model<double>& model, const Matrix<double>& images,
                           const Matrix<double>& targets, int batch, double h, int per_group) {
  model.zero_grad();
  const LossResult<double> base = loss_l2<double>(model.forward(images, batch), targets);
  model.backward(base.grad);

  auto evaluate = [&] {
    return loss_l2<double>(model.forward(images, batch), targets).value;
  };

  auto probe = [&](double* v, double analytic, double step) {
    const double saved = *v;
    *v = saved + step;
    const double up = evaluate();
    *v = saved - step;
    const double down = evaluate();
    *v = saved;
    const double numeric = (up - down) / (2 * step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    return std::abs(numeric - analytic) / denom;
  };

  GradCheckReport report;
  for (ParamTensor<double>* param : model.parameters()) {
    GradCheckGroup group;
    group.name = param->name;
    const Eigen::Index total = param->value.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, total / per_group);
    for (Eigen::Index i = 0; i < total; i += stride) {
      double* v = param->value.data() + i;
      const double analytic = param->grad.data()[i];
      double err = probe(v, analytic, h);
      // A difference quotient that straddles a relu kink reports an error
      // proportional to the step; a wrong gradient does not improve when the
      // step shrinks. Keep the best of three step sizes for flagged elements.
      if (err > 1e-4) err = std::min(err, probe(v, analytic, h / 4));
      if (err > 1e-4) err = std::min(err, probe(v, analytic, h / 16));
      group.max_rel_err = std::max(group.max_rel_err, err);
      ++group.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace finola
