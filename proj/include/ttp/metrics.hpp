#pragma once

#include <span>
#include <string>
#include <vector>

#include "ttp/data.hpp"
#include "ttp/model.hpp"

namespace ttp {

enum class SplitTag { Retain, Test, Forget };

std::string to_string(SplitTag tag);

struct MetricRow {
  SplitTag tag = SplitTag::Test;
  double accuracy = 0.0;
  double conf_dist_mean = 0.0;
  double l2_uniformity_mean = 0.0;
  long n = 0;
};

// max(0, max_j p_j - 1/k); zero exactly at (or below) uniform confidence.
double confidence_distance(const Vector& p);

// || p - (1/k, ..., 1/k) ||_2
double l2_uniformity(const Vector& p);

// Accuracy (argmax, ties to the lowest class index) and metric means over an
// index set. Means use pairwise summation over ascending indices, so the row
// is invariant to the order the indices arrive in.
MetricRow evaluate(const ModelSpec& spec, const ParamVector& w, const LabeledDataset& data,
                   std::span<const int> index_set, SplitTag tag = SplitTag::Test);

// CSV with fixed header: split,n,accuracy,conf_dist,l2_uniformity
void save_metrics_csv(std::span<const MetricRow> rows, const std::string& path);
std::vector<MetricRow> load_metrics_csv(const std::string& path);

}  // namespace ttp
