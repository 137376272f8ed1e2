// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedlmd/tensor.hpp"

namespace fedlmd {

enum class Split { Train, Test };

// In-memory labeled dataset. Features are stored contiguously, one row per
// example; labels are 1-based.
struct Dataset {
  std::string name;
  Split split{Split::Train};
  int num_classes{0};
  std::vector<int64_t> feature_shape;
  std::vector<float> features;
  std::vector<int> labels;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  int64_t feature_dim() const;
  const float* example(int64_t i) const { return features.data() + i * feature_dim(); }
  // Batch tensor of shape {B, ...feature_shape} gathered by index.
  Tensor gather(std::span<const int64_t> indices) const;
  std::vector<int64_t> label_histogram() const;
};

// --- IDX (MNIST byte format, big-endian) ---

struct IdxImages {
  int64_t count{0};
  int64_t rows{0};
  int64_t cols{0};
  std::vector<uint8_t> pixels;  // count*rows*cols
};

IdxImages read_idx_images(const std::string& path);
std::vector<uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& imgs);
void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels);

// Loads an IDX image/label pair. Pixels are scaled to [0,1] then normalized
// as (x - mean) / std. File labels are 0-based and stored 1-based.
// num_classes = 0 infers max(label)+1.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         double norm_mean = 0.0, double norm_std = 1.0, int num_classes = 0,
                         Split split = Split::Train, const std::string& name = "idx");

// CSV with header `label,f1,...,fd`; labels 0-based in the file.
Dataset load_csv_dataset(const std::string& path, int num_classes = 0,
                         Split split = Split::Train, const std::string& name = "csv");

// Isotropic Gaussian blobs at class-specific means; separable when the mean
// spacing is large relative to the unit noise.
Dataset synth_gaussian_dataset(int num_classes, int per_class, int dim, uint64_t seed,
                               double spacing = 3.0, Split split = Split::Train);

// Deterministic 28x28 grayscale surrogate task: per-class blob templates with
// per-example jitter (shift, amplitude, pixel noise). Intended as a desk-scale
// stand-in where the real MNIST files are not on disk; read through the same
// normalization path as IDX data.
Dataset synth_image_dataset(int num_classes, int per_class, uint64_t seed, Split split,
                            double norm_mean = 0.0, double norm_std = 1.0, double noise = 0.25,
                            int max_shift = 4);
// Raw u8 form of the same generator, for writing IDX fixture files.
void synth_image_raw(int num_classes, int per_class, uint64_t seed, Split split, double noise,
                     int max_shift, IdxImages& images, std::vector<uint8_t>& labels);

// First `per_class` examples of each class, in file order. 0 = keep all.
Dataset limit_per_class(const Dataset& ds, int64_t per_class);

}  // namespace fedlmd
