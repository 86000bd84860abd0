#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttp/numeric.hpp"

namespace ttp {

struct LabeledDataset {
  RowMatrix features;       // n x d
  std::vector<int> labels;  // n entries in [0, k)
  std::string name;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  int class_count() const;
  void validate() const;
};

// IDX ingestion (big-endian magic 0x00000803 images / 0x00000801 labels).
// Pixels scale to [0,1] by division by 255; image/label counts are cross-checked.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a dataset back out as an IDX pair (rows x rows square images).
void save_idx(const LabeledDataset& data, const std::string& images_path,
              const std::string& labels_path);

// Gaussian clusters around distinct class means; deterministic by seed.
LabeledDataset make_blobs(int classes, int per_class, int dim, double spread, std::uint64_t seed);

// Deterministic stroke-rendered digit images (28x28, 10 classes) for desk-scale
// runs when no IDX corpus is on disk. Same regime as handwritten-digit data:
// pixels in [0,1], linear models in the low/mid 90s.
LabeledDataset make_synth_digits(int count, std::uint64_t seed);

// Disjoint forget/retain index split over a dataset.
struct Split {
  const LabeledDataset* dataset = nullptr;
  std::vector<int> forget_idx;
  std::vector<int> retain_idx;

  void validate() const;
};

// Uniform sample of `count` forget indices without replacement; complement retains.
Split select_forget(const LabeledDataset& dataset, int count, std::uint64_t seed);

Split split_from_indices(const LabeledDataset& dataset, std::vector<int> forget);

// split.idx.txt round-trip: "forget" / "retain" sections, one index per line.
void save_split(const Split& split, const std::string& path);
Split load_split(const LabeledDataset& dataset, const std::string& path);

}  // namespace ttp
