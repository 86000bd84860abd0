#include "ttp/baselines.hpp"

#include "ttp/errors.hpp"
#include "ttp/rng.hpp"

namespace ttp {

Vector sample_l2_ball(int dim, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Vector dir(dim);
  for (int i = 0; i < dim; ++i) dir[i] = nd(rng);
  const double norm = dir.norm();
  if (norm == 0.0) return Vector::Zero(dim);
  const double r = radius * std::pow(u01(rng), 1.0 / double(dim));
  return dir * (r / norm);
}

ParamVector retrain_baseline(const ModelSpec& spec, const Split& split,
                             const OptimizerConfig& opt, std::optional<double> c_bound) {
  split.validate();
  const LabeledDataset& data = *split.dataset;
  LabeledDataset retain_only;
  retain_only.name = data.name + "-retain";
  retain_only.features.resize(Eigen::Index(split.retain_idx.size()), data.dim());
  retain_only.labels.reserve(split.retain_idx.size());
  Eigen::Index row = 0;
  for (int i : split.retain_idx) {
    retain_only.features.row(row++) = data.features.row(i);
    retain_only.labels.push_back(data.labels[std::size_t(i)]);
  }
  return pretrain(spec, retain_only, opt, c_bound);
}

ParamVector synthetic_baseline(const ModelSpec& spec, const Split& split, int k_samples,
                               double ball_radius, const OptimizerConfig& opt,
                               std::uint64_t seed) {
  if (k_samples < 1) throw DomainError("synthetic baseline requires k_samples >= 1");
  split.validate();
  const LabeledDataset& data = *split.dataset;
  const int k = spec.class_count;
  const Eigen::Index nr = Eigen::Index(split.retain_idx.size());
  const Eigen::Index nf = Eigen::Index(split.forget_idx.size());

  LabeledDataset aug;
  aug.name = data.name + "-synthetic";
  aug.features.resize(nr + nf * k_samples, data.dim());
  aug.labels.reserve(std::size_t(nr + nf * k_samples));
  Eigen::Index row = 0;
  for (int i : split.retain_idx) {
    aug.features.row(row++) = data.features.row(i);
    aug.labels.push_back(data.labels[std::size_t(i)]);
  }
  auto rng = derive_stream(seed, 0x73796e74u);
  std::uniform_int_distribution<int> lab(0, k - 1);
  for (int i : split.forget_idx) {
    for (int s = 0; s < k_samples; ++s) {
      const Vector offset = sample_l2_ball(int(data.dim()), ball_radius, rng);
      aug.features.row(row) = data.features.row(i);
      aug.features.row(row) += offset.transpose();
      ++row;
      aug.labels.push_back(lab(rng));
    }
  }
  return pretrain(spec, aug, opt);
}

ParamVector gaussian_uniform_baseline(const ModelSpec& spec, const LabeledDataset& dataset,
                                      double variance, const OptimizerConfig& opt,
                                      std::uint64_t seed) {
  if (!(variance > 0.0)) throw DomainError("variance must be > 0");
  dataset.validate();
  const Eigen::Index n = dataset.size();
  const int k = spec.class_count;
  LabeledDataset doubled;
  doubled.name = dataset.name + "-gaussuniform";
  doubled.features.resize(2 * n, dataset.dim());
  doubled.labels.reserve(std::size_t(2 * n));
  auto rng = derive_stream(seed, 0x67756e69u);
  std::normal_distribution<double> nd(0.0, std::sqrt(variance));
  std::uniform_int_distribution<int> lab(0, k - 1);
  // perturbed copies with the original labels
  for (Eigen::Index i = 0; i < n; ++i) {
    doubled.features.row(i) = dataset.features.row(i);
    for (Eigen::Index j = 0; j < dataset.dim(); ++j) doubled.features(i, j) += nd(rng);
    doubled.labels.push_back(dataset.labels[std::size_t(i)]);
  }
  // perturbed copies with uniform-random labels
  for (Eigen::Index i = 0; i < n; ++i) {
    doubled.features.row(n + i) = dataset.features.row(i);
    for (Eigen::Index j = 0; j < dataset.dim(); ++j) doubled.features(n + i, j) += nd(rng);
    doubled.labels.push_back(lab(rng));
  }
  return pretrain(spec, doubled, opt);
}

}  // namespace ttp
