#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ttp/losses.hpp"
#include "ttp/numeric.hpp"

namespace ttp {

enum class ModelKind { LogReg, Mlp };

// Softmax classifier architecture descriptor. The final layer is affine; its
// outputs pass through a softmax.
struct ModelSpec {
  ModelKind kind = ModelKind::LogReg;
  int input_dim = 0;   // d
  int hidden_dim = 0;  // h (Mlp only)
  int class_count = 0; // k

  static ModelSpec logreg(int d, int k);
  static ModelSpec mlp(int d, int h, int k);

  std::size_t param_count() const;
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

// Flat 64-bit-float parameters. Layout is row-major weights then biases,
// input-to-output order:
//   LogReg: [W (k x d, row-major), b (k)]
//   Mlp:    [W1 (h x d), b1 (h), W2 (k x h), b2 (k)]
struct ParamVector {
  Vector values;
  ModelSpec spec;
};

struct Example {
  Vector x;
  int y = 0;
};

// One weighted per-example loss term; x aliases caller-owned storage.
struct LossTerm {
  Eigen::Map<const Vector> x;
  int y;
  LossKind loss;
  double weight;

  LossTerm(const double* px, Eigen::Index dim, int label, LossKind kind, double w)
      : x(px, dim), y(label), loss(kind), weight(w) {}
  LossTerm(const Example& e, LossKind kind, double w)
      : x(e.x.data(), e.x.size()), y(e.y), loss(kind), weight(w) {}
};

// --- core operations -------------------------------------------------------

// Softmax probabilities for one input; max-shifted exponentiation.
Vector forward(const ModelSpec& spec, const ParamVector& w, const Vector& x);

// Parameters whose outputs are exactly uniform on every input: the last affine
// layer is zeroed; earlier layers get a finite seeded init.
ParamVector make_uniform_params(const ModelSpec& spec, std::uint64_t seed = 0);

// Standard training init (zeros for LogReg, He-style normal for the Mlp).
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Per-example loss and exact gradient.
std::pair<double, ParamVector> loss_and_grad(const ModelSpec& spec, const ParamVector& w,
                                             const Example& ex, LossKind loss);

// (sum_i weight_i * Hess_i) v without materializing any Hessian.
ParamVector hvp(const ModelSpec& spec, const ParamVector& w, std::span<const LossTerm> batch,
                const ParamVector& v);

// Dense weighted Hessian + lambda I; LogReg only.
Matrix explicit_hessian(const ModelSpec& spec, const ParamVector& w,
                        std::span<const LossTerm> batch, double lambda);

// --- batched kernels (training / evaluation hot paths) ---------------------

// Logits for rows `idx` of X; result is n x k.
Matrix logits_batch(const ModelSpec& spec, const Vector& w, const RowMatrix& X,
                    std::span<const int> idx);

// Adds weight * sum_{i in idx} grad loss(w, X[i], labels[i]) to grad and
// returns weight * summed loss value. labels may be empty for to-uniform losses.
double batch_loss_grad(const ModelSpec& spec, const Vector& w, const RowMatrix& X,
                       std::span<const int> labels, std::span<const int> idx, LossKind kind,
                       double weight, Vector& grad);

// Same weighted-sum HVP as `hvp`, over dataset rows.
void batch_hvp(const ModelSpec& spec, const Vector& w, const RowMatrix& X,
               std::span<const int> labels, std::span<const int> idx, LossKind kind, double weight,
               const Vector& v, Vector& out);

// --- checkpoint file ("TTP1") ----------------------------------------------
// magic "TTP1", kind tag and dims as little-endian u64, parameter count,
// then raw little-endian doubles. Round-trips bit-exactly.

void save_checkpoint(const std::string& path, const ParamVector& w);
ParamVector load_checkpoint(const std::string& path);

}  // namespace ttp
