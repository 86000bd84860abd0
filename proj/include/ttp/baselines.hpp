#pragma once

#include <random>

#include "ttp/optimize.hpp"

namespace ttp {

// Exact unlearning: pretrain on the retain indices only.
ParamVector retrain_baseline(const ModelSpec& spec, const Split& split,
                             const OptimizerConfig& opt,
                             std::optional<double> c_bound = std::nullopt);

// For each forget example, k_samples points uniform in the l2 ball of radius
// ball_radius around it get uniform-random labels and join the retain set;
// the model retrains over the augmented data.
ParamVector synthetic_baseline(const ModelSpec& spec, const Split& split, int k_samples,
                               double ball_radius, const OptimizerConfig& opt,
                               std::uint64_t seed);

// Trains on perturbed-original-labels plus perturbed-random-labels copies of
// the full dataset (size doubles); Gaussian perturbations with the given
// variance.
ParamVector gaussian_uniform_baseline(const ModelSpec& spec, const LabeledDataset& dataset,
                                      double variance, const OptimizerConfig& opt,
                                      std::uint64_t seed);

// Uniform draw from the l2 ball of radius r around the origin: normalized
// Gaussian direction, radius r * u^(1/d).
Vector sample_l2_ball(int dim, double radius, std::mt19937_64& rng);

}  // namespace ttp
