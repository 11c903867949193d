#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "finola/analysis.hpp"
#include "finola/core.hpp"
#include "finola/io.hpp"
#include "finola/masking.hpp"
#include "finola/model.hpp"
#include "finola/train.hpp"
#include "finola/wave.hpp"

namespace fs = std::filesystem;
using namespace finola;

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Data: return "data";
    default: return "numerical";
  }
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Data: return 3;
    default: return 4;
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct LoadedModel {
  Checkpoint ck;
  ModelConfig cfg;
};

template <class Scalar>
LoadedModel load_into(Model<Scalar>*& out, std::unique_ptr<Model<Scalar>>& holder,
                      const std::string& path) {
  LoadedModel lm;
  lm.ck = load_checkpoint(path);
  lm.cfg = model_config_from_checkpoint(lm.ck);
  holder = std::make_unique<Model<Scalar>>(lm.cfg);
  load_model_from_checkpoint(*holder, lm.ck);
  out = holder.get();
  return lm;
}

FeatureMap require_model_image(const std::string& path, const ModelConfig& cfg) {
  FeatureMap img = load_image(path);
  if (img.width != cfg.image_size || img.height != cfg.image_size ||
      img.channels != cfg.image_channels)
    throw ShapeMismatchError("image " + path + " is " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) + "x" + std::to_string(img.channels) +
                             ", model expects " + std::to_string(cfg.image_size) + "x" +
                             std::to_string(cfg.image_size) + "x" +
                             std::to_string(cfg.image_channels));
  return img;
}

FeatureMap recon_to_image(const Matrix<float>& recon, int size, int channels) {
  FeatureMap out(size, size, channels);
  out.data = recon.cast<double>().cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

Matrix<float> encode_one(Model<float>& model, const FeatureMap& img) {
  const Matrix<float> batch = img.data.cast<float>();
  return model.encode(batch, 1);
}

std::vector<int> parse_worker_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      size_t used = 0;
      const int v = std::stoi(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad worker count '" + part + "' in '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty worker list");
  return out;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out = "model.ckpt";
  std::string metrics;
  std::int64_t seed = -1;
};

void run_train(const TrainArgs& a) {
  RunConfig cfg = parse_run_config(a.config);
  if (a.seed >= 0) cfg.seed = std::uint64_t(a.seed);
  if (cfg.dataset.empty()) throw ConfigError("run config is missing the dataset key");
  if (cfg.constraint != "complex_free")
    throw ConfigError("training uses free direction matrices; set constraint=complex_free");
  cfg.train.validate();

  const Dataset data = load_dataset(cfg.dataset);
  if (data.image_size != cfg.image_size)
    throw ShapeMismatchError("dataset images are " + std::to_string(data.image_size) +
                             "px, run config says " + std::to_string(cfg.image_size));

  ModelConfig mcfg;
  mcfg.image_size = cfg.image_size;
  mcfg.image_channels = data.channels;
  mcfg.channels = cfg.channels;
  mcfg.paths = cfg.paths;
  mcfg.map_size = cfg.map_size;
  mcfg.ordering = cfg.ordering_mode();
  mcfg.epsilon = cfg.epsilon;

  Model<float> model(mcfg);
  model.init(cfg.seed);
  const TrainResult result = train_model(model, data, cfg.train, cfg.seed);

  save_checkpoint(a.out, checkpoint_from_model(model, cfg.seed,
                                               std::uint32_t(cfg.train.total_epochs)));
  if (!a.metrics.empty()) write_metrics_csv(a.metrics, cfg, result.history);
  std::cout << "baseline_psnr_db," << fmt(baseline_constant_mean_psnr(data)) << "\n";
  std::cout << "psnr_db," << fmt(result.final_psnr) << "\n";
}

struct ReconstructArgs {
  std::string checkpoint;
  std::string image;
  std::string out;
  bool print_psnr = false;
};

void run_reconstruct(const ReconstructArgs& a) {
  Model<float>* model = nullptr;
  std::unique_ptr<Model<float>> holder;
  const LoadedModel lm = load_into(model, holder, a.checkpoint);
  const FeatureMap img = require_model_image(a.image, lm.cfg);

  const Matrix<float> batch = img.data.cast<float>();
  const Matrix<float>& recon = model->forward(batch, 1);
  const FeatureMap out = recon_to_image(recon, lm.cfg.image_size, lm.cfg.image_channels);
  if (!a.out.empty()) save_image(a.out, out);
  if (a.print_psnr) std::cout << "psnr_db," << fmt(psnr(out, img, 1.0)) << "\n";
}

struct WavesArgs {
  std::string checkpoint;
  std::string out = "spectrum.csv";
  std::string residual;
  int size = 16;
  std::uint64_t seed = 0;
};

void run_waves(const WavesArgs& a) {
  Model<double>* model = nullptr;
  std::unique_ptr<Model<double>> holder;
  load_into(model, holder, a.checkpoint);
  const FinolaParamsT<double> p = model->finola_params();
  const WaveBasis basis = build_wave_basis(p);

  std::ofstream spectrum(a.out);
  if (!spectrum) throw ConfigError("cannot write " + a.out);
  spectrum << "index,re,im,modulus\n";
  for (int k = 0; k < basis.channels(); ++k)
    spectrum << k << "," << fmt(basis.eig.values[k].real()) << ","
             << fmt(basis.eig.values[k].imag()) << "," << fmt(std::abs(basis.eig.values[k]))
             << "\n";

  if (a.residual.empty()) return;
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  RealVector q(basis.channels());
  for (int i = 0; i < q.size(); ++i) q[i] = uni(rng);
  LatentSet set;
  set.vectors.push_back(q);
  set.positions.push_back(default_origin(a.size, a.size));
  const FeatureMap z = propagate<double>(set, p, a.size, a.size, Ordering::h_first);
  const ComplexFeatureMap zeta = project_map(z, basis);
  const auto mask = exact_step_cells(a.size, a.size, set.positions[0], Ordering::h_first);
  const WaveResidualReport report = wave_residual(zeta, basis.eig.values, mask);

  std::ofstream res(a.residual);
  if (!res) throw ConfigError("cannot write " + a.residual);
  res << "subset,count,max,mean\n";
  res << "exact," << report.count_exact << "," << fmt(report.max_exact) << ","
      << fmt(report.mean_exact) << "\n";
  res << "all," << report.count_all << "," << fmt(report.max_all) << "," << fmt(report.mean_all)
      << "\n";
}

struct CurvatureArgs {
  std::string checkpoint;
  std::string image;
  std::string outdir = ".";
  int top = 0;  // 0 = all channels
};

void run_curvature(const CurvatureArgs& a) {
  Model<float>* model = nullptr;
  std::unique_ptr<Model<float>> holder;
  const LoadedModel lm = load_into(model, holder, a.checkpoint);
  const FeatureMap img = require_model_image(a.image, lm.cfg);

  const Matrix<float> latents = encode_one(*model, img);
  const Matrix<float>& maps = model->generate_maps(latents, 1);
  FeatureMap feature(lm.cfg.map_size, lm.cfg.map_size, lm.cfg.channels);
  feature.data = maps.cast<double>();

  const CurvatureField field = gaussian_curvature(feature);
  fs::create_directories(a.outdir);

  const int emit = a.top > 0 ? std::min(a.top, lm.cfg.channels) : lm.cfg.channels;
  std::ofstream ranking(fs::path(a.outdir) / "ranking.csv");
  if (!ranking) throw ConfigError("cannot write ranking.csv in " + a.outdir);
  ranking << "rank,channel,score,kappa_min,kappa_max\n";
  for (int rank = 0; rank < lm.cfg.channels; ++rank) {
    const int ch = field.ranking[static_cast<size_t>(rank)];
    const auto row = field.kappa.data.row(ch);
    const double lo = row.minCoeff();
    const double hi = row.maxCoeff();
    ranking << rank << "," << ch << "," << fmt(field.scores[static_cast<size_t>(ch)]) << ","
            << fmt(lo) << "," << fmt(hi) << "\n";
    if (rank >= emit) continue;
    FeatureMap heat(lm.cfg.map_size, lm.cfg.map_size, 1);
    if (hi > lo)
      heat.data = ((row.array() - lo) / (hi - lo)).matrix();
    else
      heat.data.setConstant(0.5);
    save_image(fs::path(a.outdir) / ("kappa_ch" + std::to_string(ch) + ".pgm"), heat);
  }
}

struct CompressArgs {
  std::string checkpoint;
  std::string image;
  std::string out;
  int bits = 8;
  bool print_psnr = false;
};

void run_compress(const CompressArgs& a) {
  Model<float>* model = nullptr;
  std::unique_ptr<Model<float>> holder;
  const LoadedModel lm = load_into(model, holder, a.checkpoint);
  const FeatureMap img = require_model_image(a.image, lm.cfg);

  const Matrix<float> latents = encode_one(*model, img);
  const auto positions = model_path_positions(lm.cfg.paths, lm.cfg.map_size);
  LatentSet set;
  for (int i = 0; i < lm.cfg.paths; ++i) {
    set.vectors.push_back(
        latents.block(Eigen::Index(i) * lm.cfg.channels, 0, lm.cfg.channels, 1).cast<double>());
    set.positions.push_back(positions[static_cast<size_t>(i)]);
  }

  const QuantSpec spec = fit_quant_spec(set, a.bits);
  const QuantResult quantized =
      quantize_uniform(set, spec, lm.cfg.image_size, lm.cfg.image_size);

  Matrix<float> restored(latents.rows(), 1);
  for (int i = 0; i < lm.cfg.paths; ++i)
    restored.block(Eigen::Index(i) * lm.cfg.channels, 0, lm.cfg.channels, 1) =
        quantized.dequantized.vectors[static_cast<size_t>(i)].cast<float>();

  const Matrix<float>& recon =
      model->decode_maps(model->generate_maps(restored, 1), 1);
  const FeatureMap out = recon_to_image(recon, lm.cfg.image_size, lm.cfg.image_channels);
  if (!a.out.empty()) save_image(a.out, out);
  std::cout << "bits_per_pixel," << fmt(quantized.bits_per_pixel) << "\n";
  if (a.print_psnr) std::cout << "psnr_db," << fmt(psnr(out, img, 1.0)) << "\n";
}

struct DctArgs {
  std::string image;
  std::string out;
  int keep = 64;
  bool print_psnr = false;
};

void run_baseline_dct(const DctArgs& a) {
  const FeatureMap img = load_image(a.image);
  const FeatureMap coded = dct_baseline(img, a.keep);
  if (!a.out.empty()) {
    FeatureMap clamped = coded;
    clamped.data = coded.data.cwiseMax(0.0).cwiseMin(1.0);
    save_image(a.out, clamped);
  }
  if (a.print_psnr) std::cout << "psnr_db," << fmt(psnr(coded, img, 1.0)) << "\n";
}

struct LatentStudyArgs {
  std::string checkpoint;
  std::string mode = "interpolate";
  std::vector<std::string> images;
  std::string out;
  double alpha = 0.5;
  int components = 1;
};

void run_latent_study(const LatentStudyArgs& a) {
  Model<float>* model = nullptr;
  std::unique_ptr<Model<float>> holder;
  const LoadedModel lm = load_into(model, holder, a.checkpoint);

  std::vector<RealVector> latents;
  for (const std::string& path : a.images)
    latents.push_back(encode_one(*model, require_model_image(path, lm.cfg)).col(0).cast<double>());

  RealVector chosen;
  if (a.mode == "interpolate") {
    if (latents.size() != 2)
      throw ConfigError("interpolate needs exactly two --image inputs, got " +
                        std::to_string(latents.size()));
    chosen = latent_interpolate(latents[0], latents[1], a.alpha);
  } else if (a.mode == "mean") {
    if (latents.empty()) throw ConfigError("mean needs at least one --image input");
    chosen = latent_mean(latents);
  } else if (a.mode == "pca") {
    if (latents.size() < 2) throw ConfigError("pca needs at least two --image inputs");
    const PcaResult pca = latent_pca(latents, a.components);
    chosen = pca.reconstructions[0];
  } else {
    throw ConfigError("unknown latent-study mode '" + a.mode + "'");
  }

  Matrix<float> column = chosen.cast<float>();
  const Matrix<float>& recon = model->decode_maps(model->generate_maps(column, 1), 1);
  save_image(a.out, recon_to_image(recon, lm.cfg.image_size, lm.cfg.image_channels));
}

struct GradcheckArgs {
  std::string out;
  int per_group = 64;
  int batch = 2;
  double step = 1e-5;
  double tol = 1e-3;
  std::uint64_t seed = 0;
};

int run_gradcheck(const GradcheckArgs& a) {
  ModelConfig cfg;
  cfg.image_size = 8;
  cfg.channels = 6;
  cfg.paths = 1;
  cfg.map_size = 4;
  cfg.decoder_width = 16;
  cfg.encoder_widths[0] = 8;
  cfg.encoder_widths[1] = 12;
  cfg.encoder_widths[2] = 16;
  Model<double> model(cfg);
  model.init(a.seed);

  std::mt19937_64 rng(a.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  RealMatrix images(1, Eigen::Index(64) * a.batch);
  for (Eigen::Index i = 0; i < images.size(); ++i) images(i) = uni(rng);

  const GradCheckReport report = grad_check(model, images, images, a.batch, a.step, a.per_group);
  if (!a.out.empty()) {
    std::ofstream csv(a.out);
    if (!csv) throw ConfigError("cannot write " + a.out);
    csv << "group,checked,max_rel_err\n";
    for (const GradCheckGroup& g : report.groups)
      csv << g.name << "," << g.checked << "," << fmt(g.max_rel_err) << "\n";
  }
  std::cout << "max_rel_err," << fmt(report.max_rel_err) << "\n";
  if (report.max_rel_err >= a.tol) {
    std::cerr << "error,numerical,gradient check max_rel_err " << fmt(report.max_rel_err)
              << " exceeds tolerance " << fmt(a.tol) << "\n";
    return 4;
  }
  return 0;
}

struct BenchArgs {
  int size = 64;
  int channels = 16;
  std::string workers;
  int repeats = 3;
  std::uint64_t seed = 0;
};

void run_bench_parallel(const BenchArgs& a) {
  std::string worker_spec = a.workers;
  if (worker_spec.empty()) {
    const char* env = std::getenv("FINOLA_WORKERS");
    worker_spec = env != nullptr ? env : "1,8";
  }
  const std::vector<int> workers = parse_worker_list(worker_spec);

  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double bound = 1.0 / std::sqrt(double(a.channels));
  auto fill = [&](RealMatrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = bound * uni(rng);
  };
  FinolaParams p;
  p.A.resize(a.channels, a.channels);
  p.B.resize(a.channels, a.channels);
  p.A_minus.resize(a.channels, a.channels);
  p.B_minus.resize(a.channels, a.channels);
  fill(p.A);
  fill(p.B);
  fill(p.A_minus);
  fill(p.B_minus);
  LatentSet q;
  RealVector v(a.channels);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = uni(rng);
  q.vectors.push_back(v);
  q.positions.push_back(default_origin(a.size, a.size));

  const FeatureMap reference = propagate<double>(q, p, a.size, a.size, Ordering::averaged);
  const double scale = reference.data.cwiseAbs().maxCoeff();

  for (int w : workers) {
    pool_run_partitioned(w, w, [](int, int) {});  // spin the pool up outside the timed runs
    double best = 1e300;
    double diff = 0.0;
    for (int r = 0; r < a.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const FeatureMap par = propagate_parallel(q, p, a.size, a.size, w);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
      diff = (par.data - reference.data).cwiseAbs().maxCoeff() / scale;
    }
    std::cout << "workers," << w << ",seconds," << fmt(best) << ",max_rel_diff," << fmt(diff)
              << ",equal," << (diff <= 1e-6 ? 1 : 0) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Norm+linear autoregressive feature-map toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train an autoencoder on a dataset");
  train->add_option("--config", train_args.config, "run config file (key=value)")->required();
  train->add_option("--out", train_args.out, "checkpoint output path");
  train->add_option("--metrics", train_args.metrics, "per-epoch metrics CSV");
  train->add_option("--seed", train_args.seed, "override the run config seed");
  train->callback([&] { run_train(train_args); });

  ReconstructArgs rec_args;
  CLI::App* rec = app.add_subcommand("reconstruct", "Run one image through a trained model");
  rec->add_option("--checkpoint", rec_args.checkpoint)->required();
  rec->add_option("--image", rec_args.image)->required();
  rec->add_option("--out", rec_args.out, "reconstructed image path");
  rec->add_flag("--psnr", rec_args.print_psnr, "print psnr_db,<value>");
  rec->callback([&] { run_reconstruct(rec_args); });

  WavesArgs waves_args;
  CLI::App* waves = app.add_subcommand("waves", "Dump the latent speed spectrum of a checkpoint");
  waves->add_option("--checkpoint", waves_args.checkpoint)->required();
  waves->add_option("--out", waves_args.out, "spectrum CSV path");
  waves->add_option("--residual", waves_args.residual, "transport residual CSV path");
  waves->add_option("--size", waves_args.size, "probe grid size for the residual report");
  waves->add_option("--seed", waves_args.seed, "probe latent seed");
  waves->callback([&] { run_waves(waves_args); });

  CurvatureArgs curv_args;
  CLI::App* curv = app.add_subcommand("curvature", "Per-channel curvature heatmaps of a feature map");
  curv->add_option("--checkpoint", curv_args.checkpoint)->required();
  curv->add_option("--image", curv_args.image)->required();
  curv->add_option("--outdir", curv_args.outdir, "output directory");
  curv->add_option("--top", curv_args.top, "emit heatmaps for the top-K channels only");
  curv->callback([&] { run_curvature(curv_args); });

  CompressArgs comp_args;
  CLI::App* comp = app.add_subcommand("compress", "Quantize latents and reconstruct");
  comp->add_option("--checkpoint", comp_args.checkpoint)->required();
  comp->add_option("--image", comp_args.image)->required();
  comp->add_option("--bits", comp_args.bits, "bits per latent channel");
  comp->add_option("--out", comp_args.out, "reconstructed image path");
  comp->add_flag("--psnr", comp_args.print_psnr, "print psnr_db,<value>");
  comp->callback([&] { run_compress(comp_args); });

  DctArgs dct_args;
  CLI::App* dct = app.add_subcommand("baseline-dct", "8x8 block DCT codec baseline");
  dct->add_option("--image", dct_args.image)->required();
  dct->add_option("--keep", dct_args.keep, "zig-zag coefficients kept per block (1..64)");
  dct->add_option("--out", dct_args.out, "decoded image path");
  dct->add_flag("--psnr", dct_args.print_psnr, "print psnr_db,<value>");
  dct->callback([&] { run_baseline_dct(dct_args); });

  LatentStudyArgs study_args;
  CLI::App* study = app.add_subcommand("latent-study", "Interpolate, average or project latents");
  study->add_option("--checkpoint", study_args.checkpoint)->required();
  study->add_option("--mode", study_args.mode, "interpolate | mean | pca");
  study->add_option("--image", study_args.images, "input images (repeatable)")->required();
  study->add_option("--out", study_args.out, "decoded image path")->required();
  study->add_option("--alpha", study_args.alpha, "interpolation weight of the first image");
  study->add_option("--components", study_args.components, "principal components kept");
  study->callback([&] { run_latent_study(study_args); });

  GradcheckArgs grad_args;
  int gradcheck_rc = 0;
  CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference audit of the backward pass");
  grad->add_option("--out", grad_args.out, "per-group report CSV");
  grad->add_option("--per-group", grad_args.per_group, "elements probed per parameter group");
  grad->add_option("--batch", grad_args.batch, "audit batch size");
  grad->add_option("--step", grad_args.step, "finite-difference step");
  grad->add_option("--tol", grad_args.tol, "max relative error accepted");
  grad->add_option("--seed", grad_args.seed, "model and data seed");
  grad->callback([&] { gradcheck_rc = run_gradcheck(grad_args); });

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench-parallel", "Time the threaded propagation");
  bench->add_option("--size", bench_args.size, "grid size");
  bench->add_option("--channels", bench_args.channels, "channel count");
  bench->add_option("--workers", bench_args.workers,
                    "comma-separated worker counts (default env FINOLA_WORKERS, else 1,8)");
  bench->add_option("--repeats", bench_args.repeats, "timing repetitions, best kept");
  bench->add_option("--seed", bench_args.seed, "probe seed");
  bench->callback([&] { run_bench_parallel(bench_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error,usage," << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error," << kind_name(e.kind()) << "," << one_line(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error,internal," << one_line(e.what()) << "\n";
    return 1;
  }
  return gradcheck_rc;
}
