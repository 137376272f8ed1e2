// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fedlmd/errors.hpp"
#include "fedlmd/rng.hpp"

namespace fedlmd {

int64_t Dataset::feature_dim() const { return shape_numel(feature_shape); }

Tensor Dataset::gather(std::span<const int64_t> indices) const {
  const int64_t d = feature_dim();
  std::vector<int64_t> shape;
  shape.push_back(static_cast<int64_t>(indices.size()));
  shape.insert(shape.end(), feature_shape.begin(), feature_shape.end());
  Tensor out = Tensor::zeros(shape);
  float* dst = out.ptr();
  for (size_t i = 0; i < indices.size(); ++i) {
    const int64_t idx = indices[i];
    if (idx < 0 || idx >= size()) throw ShapeError("gather index out of range");
    std::memcpy(dst + static_cast<int64_t>(i) * d, example(idx), sizeof(float) * d);
  }
  return out;
}

std::vector<int64_t> Dataset::label_histogram() const {
  std::vector<int64_t> h(static_cast<size_t>(num_classes), 0);
  for (int lbl : labels) {
    if (lbl < 1 || lbl > num_classes) throw DataError("label out of range in dataset");
    ++h[static_cast<size_t>(lbl - 1)];
  }
  return h;
}

// --- IDX ---

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_be32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() < 16) throw DataError("truncated IDX image file: " + path);
  if (be32(bytes.data()) != kImagesMagic)
    throw DataError("bad magic number in IDX image file: " + path);
  IdxImages out;
  out.count = be32(bytes.data() + 4);
  out.rows = be32(bytes.data() + 8);
  out.cols = be32(bytes.data() + 12);
  const size_t need = 16 + static_cast<size_t>(out.count * out.rows * out.cols);
  if (bytes.size() < need) throw DataError("truncated IDX image file: " + path);
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + static_cast<int64_t>(need));
  return out;
}

std::vector<uint8_t> read_idx_labels(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() < 8) throw DataError("truncated IDX label file: " + path);
  if (be32(bytes.data()) != kLabelsMagic)
    throw DataError("bad magic number in IDX label file: " + path);
  const uint32_t n = be32(bytes.data() + 4);
  if (bytes.size() < 8 + static_cast<size_t>(n)) throw DataError("truncated IDX label file: " + path);
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<int64_t>(n)};
}

void write_idx_images(const std::string& path, const IdxImages& imgs) {
  if (static_cast<int64_t>(imgs.pixels.size()) != imgs.count * imgs.rows * imgs.cols)
    throw DataError("image buffer does not match header");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write file: " + path);
  put_be32(f, kImagesMagic);
  put_be32(f, static_cast<uint32_t>(imgs.count));
  put_be32(f, static_cast<uint32_t>(imgs.rows));
  put_be32(f, static_cast<uint32_t>(imgs.cols));
  f.write(reinterpret_cast<const char*>(imgs.pixels.data()),
          static_cast<std::streamsize>(imgs.pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write file: " + path);
  put_be32(f, kLabelsMagic);
  put_be32(f, static_cast<uint32_t>(labels.size()));
  f.write(reinterpret_cast<const char*>(labels.data()),
          static_cast<std::streamsize>(labels.size()));
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         double norm_mean, double norm_std, int num_classes, Split split,
                         const std::string& name) {
  if (!(norm_std > 0.0)) throw ConfigError("normalize std must be positive");
  IdxImages imgs = read_idx_images(images_path);
  std::vector<uint8_t> raw_labels = read_idx_labels(labels_path);
  if (static_cast<int64_t>(raw_labels.size()) != imgs.count)
    throw DataError("image/label count mismatch: " + std::to_string(imgs.count) + " images vs " +
                    std::to_string(raw_labels.size()) + " labels");
  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.feature_shape = {imgs.rows, imgs.cols, 1};
  ds.features.resize(imgs.pixels.size());
  const float inv = 1.0f / 255.0f;
  const float mean = static_cast<float>(norm_mean);
  const float stdinv = static_cast<float>(1.0 / norm_std);
  for (size_t i = 0; i < imgs.pixels.size(); ++i)
    ds.features[i] = (static_cast<float>(imgs.pixels[i]) * inv - mean) * stdinv;
  ds.labels.reserve(raw_labels.size());
  int max_label = 0;
  for (uint8_t l : raw_labels) {
    ds.labels.push_back(static_cast<int>(l) + 1);
    max_label = std::max(max_label, static_cast<int>(l) + 1);
  }
  ds.num_classes = num_classes > 0 ? num_classes : max_label;
  if (max_label > ds.num_classes) throw DataError("label exceeds configured class count");
  return ds;
}

// --- CSV ---

Dataset load_csv_dataset(const std::string& path, int num_classes, Split split,
                         const std::string& name) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty CSV file: " + path);
  if (line.rfind("label", 0) != 0)
    throw DataError("CSV header must start with 'label': " + path);
  int64_t dim = std::count(line.begin(), line.end(), ',');
  if (dim < 1) throw DataError("CSV has no feature columns: " + path);
  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.feature_shape = {dim};
  int max_label = 0;
  int64_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    if (!std::getline(ss, tok, ',')) throw DataError("bad CSV row at line " + std::to_string(lineno));
    int lbl;
    try {
      lbl = std::stoi(tok);
    } catch (...) {
      throw DataError("bad label at line " + std::to_string(lineno));
    }
    if (lbl < 0) throw DataError("negative label at line " + std::to_string(lineno));
    ds.labels.push_back(lbl + 1);
    max_label = std::max(max_label, lbl + 1);
    int64_t got = 0;
    while (std::getline(ss, tok, ',')) {
      try {
        ds.features.push_back(std::stof(tok));
      } catch (...) {
        throw DataError("bad feature value at line " + std::to_string(lineno));
      }
      ++got;
    }
    if (got != dim)
      throw DataError("row width mismatch at line " + std::to_string(lineno) + ": expected " +
                      std::to_string(dim) + " features, got " + std::to_string(got));
  }
  ds.num_classes = num_classes > 0 ? num_classes : max_label;
  if (max_label > ds.num_classes) throw DataError("label exceeds configured class count");
  return ds;
}

// --- synthetic ---

Dataset synth_gaussian_dataset(int num_classes, int per_class, int dim, uint64_t seed,
                               double spacing, Split split) {
  if (num_classes < 2) throw ConfigError("synth dataset needs >= 2 classes");
  if (dim < 1) throw ConfigError("synth dataset needs dim >= 1");
  if (per_class < 0) throw ConfigError("negative per-class count");
  Dataset ds;
  ds.name = "synth";
  ds.split = split;
  ds.num_classes = num_classes;
  ds.feature_shape = {dim};
  // class means: spacing * random unit direction
  std::vector<std::vector<double>> means(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    Rng rng(seed, "synth-mean", static_cast<uint64_t>(c), 0);
    std::vector<double> u(static_cast<size_t>(dim));
    double norm = 0.0;
    for (auto& x : u) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& x : u) x = spacing * x / norm;
    means[static_cast<size_t>(c)] = std::move(u);
  }
  const char* tag = split == Split::Train ? "synth-train" : "synth-test";
  for (int c = 0; c < num_classes; ++c) {
    for (int j = 0; j < per_class; ++j) {
      Rng rng(seed, tag, static_cast<uint64_t>(c), static_cast<uint64_t>(j));
      for (int d = 0; d < dim; ++d)
        ds.features.push_back(
            static_cast<float>(means[static_cast<size_t>(c)][static_cast<size_t>(d)] + rng.normal()));
      ds.labels.push_back(c + 1);
    }
  }
  return ds;
}

namespace {

constexpr int kImgSide = 28;

// Per-class template: a few soft blobs on a shared background, values in [0,1].
std::vector<double> class_template(int c, uint64_t seed) {
  std::vector<double> img(kImgSide * kImgSide, 0.0);
  auto add_blob = [&](double cy, double cx, double sigma, double amp) {
    for (int y = 0; y < kImgSide; ++y) {
      for (int x = 0; x < kImgSide; ++x) {
        const double dy = y - cy, dx = x - cx;
        img[static_cast<size_t>(y * kImgSide + x)] +=
            amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      }
    }
  };
  Rng bg(seed, "img-template", 0xFFFF, 0);
  add_blob(bg.uniform(8, 20), bg.uniform(8, 20), bg.uniform(5, 8), 0.35);
  Rng rng(seed, "img-template", static_cast<uint64_t>(c), 0);
  const int blobs = 2 + static_cast<int>(rng.below(2));  // 2..3
  for (int b = 0; b < blobs; ++b)
    add_blob(rng.uniform(5, 23), rng.uniform(5, 23), rng.uniform(2.0, 4.5), rng.uniform(0.5, 0.9));
  double mx = 0.0;
  for (double v : img) mx = std::max(mx, v);
  for (auto& v : img) v /= std::max(mx, 1e-9);
  return img;
}

}  // namespace

void synth_image_raw(int num_classes, int per_class, uint64_t seed, Split split, double noise,
                     int max_shift, IdxImages& images, std::vector<uint8_t>& labels) {
  if (num_classes < 2 || num_classes > 255) throw ConfigError("image classes must be in [2,255]");
  if (per_class < 0) throw ConfigError("negative per-class count");
  images.count = static_cast<int64_t>(num_classes) * per_class;
  images.rows = kImgSide;
  images.cols = kImgSide;
  images.pixels.assign(static_cast<size_t>(images.count) * kImgSide * kImgSide, 0);
  labels.assign(static_cast<size_t>(images.count), 0);
  std::vector<std::vector<double>> templates(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) templates[static_cast<size_t>(c)] = class_template(c, seed);
  const char* tag = split == Split::Train ? "img-train" : "img-test";
  int64_t at = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto& tpl = templates[static_cast<size_t>(c)];
    for (int j = 0; j < per_class; ++j, ++at) {
      Rng rng(seed, tag, static_cast<uint64_t>(c), static_cast<uint64_t>(j));
      const int dy = static_cast<int>(rng.below(static_cast<uint64_t>(2 * max_shift + 1))) - max_shift;
      const int dx = static_cast<int>(rng.below(static_cast<uint64_t>(2 * max_shift + 1))) - max_shift;
      const double amp = rng.uniform(0.7, 1.3);
      uint8_t* dst = images.pixels.data() + at * kImgSide * kImgSide;
      for (int y = 0; y < kImgSide; ++y) {
        for (int x = 0; x < kImgSide; ++x) {
          const int sy = y - dy, sx = x - dx;
          double v = 0.0;
          if (sy >= 0 && sy < kImgSide && sx >= 0 && sx < kImgSide)
            v = amp * tpl[static_cast<size_t>(sy * kImgSide + sx)];
          v += noise * rng.normal();
          v = std::clamp(v, 0.0, 1.0);
          dst[y * kImgSide + x] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
      }
      labels[static_cast<size_t>(at)] = static_cast<uint8_t>(c);
    }
  }
}

Dataset synth_image_dataset(int num_classes, int per_class, uint64_t seed, Split split,
                            double norm_mean, double norm_std, double noise, int max_shift) {
  if (!(norm_std > 0.0)) throw ConfigError("normalize std must be positive");
  IdxImages imgs;
  std::vector<uint8_t> raw_labels;
  synth_image_raw(num_classes, per_class, seed, split, noise, max_shift, imgs, raw_labels);
  Dataset ds;
  ds.name = "synth_image";
  ds.split = split;
  ds.num_classes = num_classes;
  ds.feature_shape = {kImgSide, kImgSide, 1};
  ds.features.resize(imgs.pixels.size());
  const float inv = 1.0f / 255.0f;
  const float mean = static_cast<float>(norm_mean);
  const float stdinv = static_cast<float>(1.0 / norm_std);
  for (size_t i = 0; i < imgs.pixels.size(); ++i)
    ds.features[i] = (static_cast<float>(imgs.pixels[i]) * inv - mean) * stdinv;
  ds.labels.reserve(raw_labels.size());
  for (uint8_t l : raw_labels) ds.labels.push_back(static_cast<int>(l) + 1);
  return ds;
}

Dataset limit_per_class(const Dataset& ds, int64_t per_class) {
  if (per_class <= 0) return ds;
  Dataset out;
  out.name = ds.name;
  out.split = ds.split;
  out.num_classes = ds.num_classes;
  out.feature_shape = ds.feature_shape;
  std::vector<int64_t> taken(static_cast<size_t>(ds.num_classes), 0);
  const int64_t d = ds.feature_dim();
  for (int64_t i = 0; i < ds.size(); ++i) {
    auto& t = taken[static_cast<size_t>(ds.labels[static_cast<size_t>(i)] - 1)];
    if (t >= per_class) continue;
    ++t;
    out.labels.push_back(ds.labels[static_cast<size_t>(i)]);
    const float* src = ds.example(i);
    out.features.insert(out.features.end(), src, src + d);
  }
  return out;
}

}  // namespace fedlmd
