#include "finola/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace finola {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedHeaderError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

/// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& text, size_t& pos) {
  while (pos < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    } else if (text[pos] == '#') {
      while (pos < text.size() && text[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const size_t start = pos;
  while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (start == pos) throw MalformedHeaderError("truncated image header");
  return text.substr(start, pos - start);
}

int parse_positive(const std::string& token, const char* what) {
  try {
    size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw MalformedHeaderError(std::string("bad ") + what + " '" + token + "' in image header");
  }
}

void append_bytes(std::string& out, const void* data, size_t n) {
  out.append(reinterpret_cast<const char*>(data), n);
}

template <class T>
void append_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  // Host is little-endian on every supported target; keep an explicit swap
  // path out of scope and assert the assumption once.
  static_assert(std::endian::native == std::endian::little);
  append_bytes(out, bytes, sizeof(T));
}

struct Reader {
  const std::string& data;
  size_t pos = 0;

  void need(size_t n, const char* what) const {
    if (pos + n > data.size())
      throw TruncatedPayloadError(std::string("checkpoint ends inside ") + what);
  }
  template <class T>
  T take(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, data.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string take_bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

FeatureMap load_image(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  size_t pos = 0;
  const std::string magic = next_token(text, pos);
  int channels = 0;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw MalformedHeaderError("unsupported image magic '" + magic + "' in " + path.string());
  const int width = parse_positive(next_token(text, pos), "width");
  const int height = parse_positive(next_token(text, pos), "height");
  const int maxval = parse_positive(next_token(text, pos), "maxval");
  if (maxval != 255)
    throw MalformedHeaderError("maxval " + std::to_string(maxval) + " unsupported, need 255");
  ++pos;  // single whitespace between header and payload
  const size_t expected = size_t(width) * height * channels;
  if (pos + expected > text.size())
    throw TruncatedPayloadError("image payload has " + std::to_string(text.size() - pos) +
                                " bytes, expected " + std::to_string(expected));
  FeatureMap image(width, height, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        image.at(x, y)[c] =
            static_cast<unsigned char>(text[pos + (size_t(y) * width + x) * channels + c]) / 255.0;
  return image;
}

void save_image(const std::filesystem::path& path, const FeatureMap& image) {
  if (image.channels != 1 && image.channels != 3)
    throw ShapeMismatchError("save_image: only 1- or 3-channel images, got " +
                             std::to_string(image.channels));
  std::string out;
  out += image.channels == 1 ? "P5" : "P6";
  out += "\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) {
        const double v = std::clamp(image.at(x, y)[c], 0.0, 1.0);
        out += static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot write " + path.string());
  file << out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::string out;
  out += "FNLA";
  append_le(out, ck.version);
  for (std::uint32_t dim : {ck.channels, ck.paths, ck.map_w, ck.map_h, ck.image_w, ck.image_h,
                            ck.image_channels})
    append_le(out, dim);
  append_le(out, ck.seed);
  append_le(out, ck.epoch);
  append_le(out, std::uint32_t(ck.tensors.size()));
  for (const CheckpointTensor& t : ck.tensors) {
    append_le(out, std::uint16_t(t.name.size()));
    out += t.name;
    append_le(out, std::uint8_t(t.dims.size()));
    std::uint64_t count = 1;
    for (std::uint32_t d : t.dims) {
      append_le(out, d);
      count *= d;
    }
    if (count != t.data.size())
      throw ShapeMismatchError("checkpoint tensor " + t.name + " dims do not match its data");
    for (double v : t.data) append_le(out, v);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot write " + path.string());
  file << out;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Reader r{text};
  if (r.take_bytes(4, "magic") != "FNLA")
    throw MalformedHeaderError("checkpoint magic mismatch in " + path.string());
  Checkpoint ck;
  ck.version = r.take<std::uint16_t>("version");
  if (ck.version != 1)
    throw MalformedHeaderError("checkpoint format version " + std::to_string(ck.version) +
                               " unsupported");
  ck.channels = r.take<std::uint32_t>("dims");
  ck.paths = r.take<std::uint32_t>("dims");
  ck.map_w = r.take<std::uint32_t>("dims");
  ck.map_h = r.take<std::uint32_t>("dims");
  ck.image_w = r.take<std::uint32_t>("dims");
  ck.image_h = r.take<std::uint32_t>("dims");
  ck.image_channels = r.take<std::uint32_t>("dims");
  ck.seed = r.take<std::uint64_t>("seed");
  ck.epoch = r.take<std::uint32_t>("epoch");
  const std::uint32_t tensor_count = r.take<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    CheckpointTensor t;
    const std::uint16_t name_len = r.take<std::uint16_t>("tensor name");
    t.name = r.take_bytes(name_len, "tensor name");
    const std::uint8_t ndim = r.take<std::uint8_t>("tensor rank");
    std::uint64_t count = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      t.dims.push_back(r.take<std::uint32_t>("tensor dims"));
      count *= t.dims.back();
    }
    t.data.resize(count);
    for (std::uint64_t j = 0; j < count; ++j) t.data[j] = r.take<double>("tensor data");
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

ModelConfig model_config_from_checkpoint(const Checkpoint& ck) {
  if (ck.map_w != ck.map_h || ck.image_w != ck.image_h)
    throw MalformedHeaderError("checkpoint: only square maps and images are supported");
  ModelConfig cfg;
  cfg.channels = int(ck.channels);
  cfg.paths = int(ck.paths);
  cfg.map_size = int(ck.map_w);
  cfg.image_size = int(ck.image_w);
  cfg.image_channels = int(ck.image_channels);
  for (const CheckpointTensor& t : ck.tensors) {
    if (t.data.size() != 1) continue;
    if (t.name == "config.ordering") cfg.ordering = Ordering(int(t.data[0]));
    if (t.name == "config.epsilon") cfg.epsilon = t.data[0];
    if (t.name == "config.decoder_width") cfg.decoder_width = int(t.data[0]);
    for (int i = 0; i < 3; ++i)
      if (t.name == "config.encoder_width" + std::to_string(i))
        cfg.encoder_widths[i] = int(t.data[0]);
  }
  return cfg;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::as_lines() const {
  return {{"channels", std::to_string(channels)},
          {"paths", std::to_string(paths)},
          {"map_size", std::to_string(map_size)},
          {"image_size", std::to_string(image_size)},
          {"ordering", ordering},
          {"epsilon", format_double(epsilon)},
          {"constraint", constraint},
          {"base_lr", format_double(train.base_lr)},
          {"weight_decay", format_double(train.weight_decay)},
          {"batch_size", std::to_string(train.batch_size)},
          {"warmup_epochs", std::to_string(train.warmup_epochs)},
          {"total_epochs", std::to_string(train.total_epochs)},
          {"schedule", train.schedule},
          {"beta1", format_double(train.beta1)},
          {"beta2", format_double(train.beta2)},
          {"adam_eps", format_double(train.adam_eps)},
          {"dataset", dataset},
          {"seed", std::to_string(seed)}};
}

Ordering RunConfig::ordering_mode() const {
  if (ordering == "h_first") return Ordering::h_first;
  if (ordering == "v_first") return Ordering::v_first;
  if (ordering == "averaged") return Ordering::averaged;
  throw ConfigError("unknown ordering '" + ordering + "'");
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("run config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "channels")
        cfg.channels = std::stoi(value);
      else if (key == "paths")
        cfg.paths = std::stoi(value);
      else if (key == "map_size")
        cfg.map_size = std::stoi(value);
      else if (key == "image_size")
        cfg.image_size = std::stoi(value);
      else if (key == "ordering")
        cfg.ordering = value;
      else if (key == "epsilon")
        cfg.epsilon = std::stod(value);
      else if (key == "constraint")
        cfg.constraint = value;
      else if (key == "base_lr")
        cfg.train.base_lr = std::stod(value);
      else if (key == "weight_decay")
        cfg.train.weight_decay = std::stod(value);
      else if (key == "batch_size")
        cfg.train.batch_size = std::stoi(value);
      else if (key == "warmup_epochs")
        cfg.train.warmup_epochs = std::stoi(value);
      else if (key == "total_epochs")
        cfg.train.total_epochs = std::stoi(value);
      else if (key == "schedule")
        cfg.train.schedule = value;
      else if (key == "beta1")
        cfg.train.beta1 = std::stod(value);
      else if (key == "beta2")
        cfg.train.beta2 = std::stod(value);
      else if (key == "adam_eps")
        cfg.train.adam_eps = std::stod(value);
      else if (key == "dataset")
        cfg.dataset = value;
      else if (key == "seed")
        cfg.seed = std::stoull(value);
      else
        throw ConfigError("run config line " + std::to_string(line_no) + ": unknown key '" + key +
                          "'");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("run config line " + std::to_string(line_no) + ": bad value for '" + key +
                        "'");
    }
  }
  if (cfg.ordering != "h_first" && cfg.ordering != "v_first" && cfg.ordering != "averaged")
    throw ConfigError("unknown ordering '" + cfg.ordering + "'");
  if (cfg.constraint != "complex_free" && cfg.constraint != "real_speed" &&
      cfg.constraint != "all_one")
    throw ConfigError("unknown constraint '" + cfg.constraint + "'");
  return cfg;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open run config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(std::move(buf).str());
}

Dataset load_dataset(const std::string& spec) {
  if (spec.rfind("synthetic:", 0) == 0) {
    const std::string rest = spec.substr(10);
    int count = 0, size = 0;
    std::uint64_t seed = 1234;
    char sep = 0;
    std::istringstream in(rest);
    if (!(in >> count) || !(in >> sep) || sep != 'x' || !(in >> size) || count < 1 || size < 1)
      throw ConfigError("bad synthetic dataset spec '" + spec +
                        "', expected synthetic:<count>x<size>[:<seed>]");
    if (in >> sep) {
      if (sep != ':' || !(in >> seed))
        throw ConfigError("bad synthetic dataset seed in '" + spec + "'");
    }
    return make_synthetic_dataset(count, size, seed);
  }

  namespace fs = std::filesystem;
  if (!fs::is_directory(spec))
    throw ConfigError("dataset '" + spec + "' is neither a synthetic spec nor a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(spec))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("dataset directory '" + spec + "' holds no .pgm files");

  Dataset data;
  for (size_t i = 0; i < files.size(); ++i) {
    const FeatureMap img = load_image(files[i]);
    if (img.width != img.height)
      throw ConfigError("dataset image " + files[i].string() + " is not square");
    if (i == 0) {
      data.image_size = img.width;
      data.channels = img.channels;
      data.count = int(files.size());
      data.images.resize(data.channels,
                         Eigen::Index(data.image_size) * data.image_size * data.count);
    } else if (img.width != data.image_size || img.channels != data.channels) {
      throw ConfigError("dataset image " + files[i].string() + " does not match the first image");
    }
    data.images.block(0, Eigen::Index(i) * img.cells(), data.channels, img.cells()) =
        img.data.cast<float>();
  }
  return data;
}

void write_metrics_csv(const std::filesystem::path& path, const RunConfig& cfg,
                       const std::vector<EpochRow>& history) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write metrics file " + path.string());
  for (const auto& [key, value] : cfg.as_lines()) out << "# " << key << "=" << value << "\n";
  out << "epoch,lr,loss,psnr\n";
  for (const EpochRow& row : history)
    out << row.epoch << "," << format_double(row.lr) << "," << format_double(row.loss) << ","
        << format_double(row.psnr) << "\n";
}

}  // namespace finola
