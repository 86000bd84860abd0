#include "ttp/model.hpp"

#include <cstring>
#include <fstream>

#include "ttp/errors.hpp"
#include "ttp/rng.hpp"

namespace ttp {

namespace {

using MapRowMat = Eigen::Map<const RowMatrix>;
using MapVec = Eigen::Map<const Vector>;
using MutRowMat = Eigen::Map<RowMatrix>;
using MutVec = Eigen::Map<Vector>;

// LogReg parameter views: W (k x d), b (k).
struct LogRegView {
  MapRowMat W;
  MapVec b;
};
LogRegView logreg_view(const ModelSpec& s, const Vector& w) {
  return {MapRowMat(w.data(), s.class_count, s.input_dim),
          MapVec(w.data() + std::size_t(s.class_count) * s.input_dim, s.class_count)};
}
struct LogRegMutView {
  MutRowMat W;
  MutVec b;
};
LogRegMutView logreg_view(const ModelSpec& s, Vector& w) {
  return {MutRowMat(w.data(), s.class_count, s.input_dim),
          MutVec(w.data() + std::size_t(s.class_count) * s.input_dim, s.class_count)};
}

// Mlp parameter views: W1 (h x d), b1 (h), W2 (k x h), b2 (k).
struct MlpView {
  MapRowMat W1;
  MapVec b1;
  MapRowMat W2;
  MapVec b2;
};
MlpView mlp_view(const ModelSpec& s, const Vector& w) {
  const std::size_t hd = std::size_t(s.hidden_dim) * s.input_dim;
  const std::size_t kh = std::size_t(s.class_count) * s.hidden_dim;
  return {MapRowMat(w.data(), s.hidden_dim, s.input_dim), MapVec(w.data() + hd, s.hidden_dim),
          MapRowMat(w.data() + hd + s.hidden_dim, s.class_count, s.hidden_dim),
          MapVec(w.data() + hd + s.hidden_dim + kh, s.class_count)};
}
struct MlpMutView {
  MutRowMat W1;
  MutVec b1;
  MutRowMat W2;
  MutVec b2;
};
MlpMutView mlp_view(const ModelSpec& s, Vector& w) {
  const std::size_t hd = std::size_t(s.hidden_dim) * s.input_dim;
  const std::size_t kh = std::size_t(s.class_count) * s.hidden_dim;
  return {MutRowMat(w.data(), s.hidden_dim, s.input_dim), MutVec(w.data() + hd, s.hidden_dim),
          MutRowMat(w.data() + hd + s.hidden_dim, s.class_count, s.hidden_dim),
          MutVec(w.data() + hd + s.hidden_dim + kh, s.class_count)};
}

void check_dims(const ModelSpec& spec, const ParamVector& w, Eigen::Index xdim) {
  spec.validate();
  if (w.spec != spec) throw ShapeError("parameter vector spec does not match model spec");
  if (w.values.size() != Eigen::Index(spec.param_count()))
    throw ShapeError("parameter vector length does not match spec parameter count");
  if (xdim >= 0 && xdim != spec.input_dim) throw ShapeError("input dimension mismatch");
}

Vector softmax_from_logits(const Vector& z) {
  const double m = z.maxCoeff();
  Vector p = (z.array() - m).exp();
  p /= p.sum();
  return p;
}

// log-probs and probs from logits, in place of z.
void logp_probs(const Vector& z, Vector& s, Vector& p) {
  const double m = z.maxCoeff();
  s = z.array() - m;
  const double lse = std::log(s.array().exp().sum());
  s.array() -= lse;
  p = s.array().exp();
}

Vector logits_one(const ModelSpec& spec, const Vector& w, const Vector& x) {
  if (spec.kind == ModelKind::LogReg) {
    auto v = logreg_view(spec, w);
    return v.W * x + v.b;
  }
  auto v = mlp_view(spec, w);
  Vector a = v.W1 * x + v.b1;
  Vector h = a.cwiseMax(0.0);
  return v.W2 * h + v.b2;
}

}  // namespace

ModelSpec ModelSpec::logreg(int d, int k) { return {ModelKind::LogReg, d, 0, k}; }
ModelSpec ModelSpec::mlp(int d, int h, int k) { return {ModelKind::Mlp, d, h, k}; }

std::size_t ModelSpec::param_count() const {
  if (kind == ModelKind::LogReg)
    return std::size_t(class_count) * input_dim + class_count;
  return std::size_t(hidden_dim) * input_dim + hidden_dim +
         std::size_t(class_count) * hidden_dim + class_count;
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("model spec requires d >= 1");
  if (class_count < 2) throw ConfigError("model spec requires k >= 2");
  if (kind == ModelKind::Mlp && hidden_dim < 1) throw ConfigError("mlp spec requires h >= 1");
}

Vector forward(const ModelSpec& spec, const ParamVector& w, const Vector& x) {
  check_dims(spec, w, x.size());
  require_finite(w.values, "parameters");
  return softmax_from_logits(logits_one(spec, w.values, x));
}

ParamVector make_uniform_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector w{Vector::Zero(Eigen::Index(spec.param_count())), spec};
  if (spec.kind == ModelKind::Mlp) {
    // hidden layer arbitrary but finite; the zeroed last layer makes outputs uniform
    auto rng = derive_stream(seed, 0x756e6966u);
    std::normal_distribution<double> nd(0.0, 0.5);
    auto v = mlp_view(spec, w.values);
    for (Eigen::Index i = 0; i < v.W1.size(); ++i)
      v.W1.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < v.b1.size(); ++i)
      v.b1.data()[i] = nd(rng);
  }
  return w;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector w{Vector::Zero(Eigen::Index(spec.param_count())), spec};
  if (spec.kind == ModelKind::Mlp) {
    auto rng = derive_stream(seed, 0x696e6974u);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto v = mlp_view(spec, w.values);
    const double s1 = std::sqrt(2.0 / spec.input_dim);
    const double s2 = std::sqrt(2.0 / spec.hidden_dim);
    for (Eigen::Index i = 0; i < v.W1.size(); ++i)
      v.W1.data()[i] = s1 * nd(rng);
    for (Eigen::Index i = 0; i < v.W2.size(); ++i)
      v.W2.data()[i] = s2 * nd(rng);
  }
  return w;
}

std::pair<double, ParamVector> loss_and_grad(const ModelSpec& spec, const ParamVector& w,
                                             const Example& ex, LossKind loss) {
  check_dims(spec, w, ex.x.size());
  if (loss == LossKind::CrossEntropy && (ex.y < 0 || ex.y >= spec.class_count))
    throw ShapeError("label out of range");
  ParamVector grad{Vector::Zero(w.values.size()), spec};
  Vector s, p;
  if (spec.kind == ModelKind::LogReg) {
    auto v = logreg_view(spec, w.values);
    Vector z = v.W * ex.x + v.b;
    logp_probs(z, s, p);
    const double val = detail::loss_value(loss, ex.y, p, s);
    const Vector dz = detail::loss_dz(loss, ex.y, p, s);
    auto g = logreg_view(spec, grad.values);
    g.W.noalias() = dz * ex.x.transpose();
    g.b = dz;
    return {val, std::move(grad)};
  }
  auto v = mlp_view(spec, w.values);
  Vector a = v.W1 * ex.x + v.b1;
  Vector h = a.cwiseMax(0.0);
  Vector r = (a.array() > 0.0).cast<double>();  // ReLU subgradient, 0 at the kink
  Vector z = v.W2 * h + v.b2;
  logp_probs(z, s, p);
  const double val = detail::loss_value(loss, ex.y, p, s);
  const Vector dz = detail::loss_dz(loss, ex.y, p, s);
  auto g = mlp_view(spec, grad.values);
  g.W2.noalias() = dz * h.transpose();
  g.b2 = dz;
  Vector da = (v.W2.transpose() * dz).cwiseProduct(r);
  g.W1.noalias() = da * ex.x.transpose();
  g.b1 = da;
  return {val, std::move(grad)};
}

ParamVector hvp(const ModelSpec& spec, const ParamVector& w, std::span<const LossTerm> batch,
                const ParamVector& v) {
  check_dims(spec, w, -1);
  if (v.values.size() != w.values.size()) throw ShapeError("hvp direction length mismatch");
  require_finite(v.values, "hvp direction");
  ParamVector out{Vector::Zero(w.values.size()), spec};
  Vector s, p;
  if (spec.kind == ModelKind::LogReg) {
    auto wv = logreg_view(spec, w.values);
    auto dv = logreg_view(spec, v.values);
    auto ov = logreg_view(spec, out.values);
    for (const LossTerm& t : batch) {
      if (t.x.size() != spec.input_dim) throw ShapeError("term input dimension mismatch");
      Vector z = wv.W * t.x + wv.b;
      logp_probs(z, s, p);
      const Vector rz = dv.W * t.x + dv.b;
      const Vector rdz = t.weight * (detail::loss_logits_hessian(t.loss, p, s) * rz);
      ov.W.noalias() += rdz * t.x.transpose();
      ov.b += rdz;
    }
    return out;
  }
  auto wv = mlp_view(spec, w.values);
  auto dv = mlp_view(spec, v.values);
  auto ov = mlp_view(spec, out.values);
  for (const LossTerm& t : batch) {
    if (t.x.size() != spec.input_dim) throw ShapeError("term input dimension mismatch");
    Vector a = wv.W1 * t.x + wv.b1;
    Vector h = a.cwiseMax(0.0);
    Vector r = (a.array() > 0.0).cast<double>();
    Vector z = wv.W2 * h + wv.b2;
    logp_probs(z, s, p);
    const Vector dz = detail::loss_dz(t.loss, t.y, p, s);
    // forward-over-reverse; relu'' vanishes so only first-order relu terms appear
    const Vector ra = dv.W1 * t.x + dv.b1;
    const Vector rh = r.cwiseProduct(ra);
    const Vector rz = dv.W2 * h + dv.b2 + wv.W2 * rh;
    const Vector rdz = detail::loss_logits_hessian(t.loss, p, s) * rz;
    ov.W2.noalias() += t.weight * (rdz * h.transpose() + dz * rh.transpose());
    ov.b2 += t.weight * rdz;
    const Vector rda = r.cwiseProduct(wv.W2.transpose() * rdz + dv.W2.transpose() * dz);
    ov.W1.noalias() += t.weight * (rda * t.x.transpose());
    ov.b1 += t.weight * rda;
  }
  return out;
}

Matrix explicit_hessian(const ModelSpec& spec, const ParamVector& w,
                        std::span<const LossTerm> batch, double lambda) {
  check_dims(spec, w, -1);
  if (spec.kind != ModelKind::LogReg)
    throw UnsupportedError("explicit_hessian supports LogReg only; use hvp for the Mlp");
  const Eigen::Index d = spec.input_dim, k = spec.class_count;
  const Eigen::Index z = Eigen::Index(spec.param_count());
  Matrix H = Matrix::Zero(z, z);
  const Eigen::Index n = Eigen::Index(batch.size());
  if (n > 0) {
    // bias-augmented features
    RowMatrix Xa(n, d + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (batch[i].x.size() != d) throw ShapeError("term input dimension mismatch");
      Xa.row(i).head(d) = batch[i].x;
      Xa(i, d) = 1.0;
    }
    auto wv = logreg_view(spec, w.values);
    Matrix G(k, d + 1);
    G.leftCols(d) = wv.W;
    G.col(d) = wv.b;
    RowMatrix Z = Xa * G.transpose();  // n x k logits
    // per-example logits Hessians, one k x k per row
    std::vector<Matrix> A(n);
    Vector s, p;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector zi = Z.row(i);
      logp_probs(zi, s, p);
      A[i] = batch[i].weight * detail::loss_logits_hessian(batch[i].loss, p, s);
    }
    // H[(j,m) block] = Xa^T diag(A_i(j,m)) Xa, assembled pairwise
    Vector c(n);
    RowMatrix Y(n, d + 1);
    Matrix M(d + 1, d + 1);
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index m = j; m < k; ++m) {
        for (Eigen::Index i = 0; i < n; ++i) c[i] = A[i](j, m);
        Y = c.asDiagonal() * Xa;
        M.noalias() = Xa.transpose() * Y;
        if (m == j) M = ((M + M.transpose()) * 0.5).eval();
        H.block(j * d, m * d, d, d) = M.topLeftCorner(d, d);
        H.block(j * d, k * d + m, d, 1) = M.topRightCorner(d, 1);
        H.block(k * d + j, m * d, 1, d) = M.bottomLeftCorner(1, d);
        H(k * d + j, k * d + m) = M(d, d);
        if (m != j) {
          H.block(m * d, j * d, d, d) = M.topLeftCorner(d, d).transpose();
          H.block(m * d, k * d + j, d, 1) = M.bottomLeftCorner(1, d).transpose();
          H.block(k * d + m, j * d, 1, d) = M.topRightCorner(d, 1).transpose();
          H(k * d + m, k * d + j) = M(d, d);
        }
      }
    }
  }
  H.diagonal().array() += lambda;
  return H;
}

Matrix logits_batch(const ModelSpec& spec, const Vector& w, const RowMatrix& X,
                    std::span<const int> idx) {
  const Eigen::Index m = Eigen::Index(idx.size());
  RowMatrix Xb(m, spec.input_dim);
  for (Eigen::Index i = 0; i < m; ++i) Xb.row(i) = X.row(idx[i]);
  if (spec.kind == ModelKind::LogReg) {
    auto v = logreg_view(spec, w);
    return ((Xb * v.W.transpose()).rowwise() + v.b.transpose());
  }
  auto v = mlp_view(spec, w);
  Matrix Hh = ((Xb * v.W1.transpose()).rowwise() + v.b1.transpose()).cwiseMax(0.0);
  return ((Hh * v.W2.transpose()).rowwise() + v.b2.transpose());
}

namespace {

// row-wise log-softmax; P and S are m x k outputs
void logp_probs_rows(const Matrix& Z, Matrix& S, Matrix& P) {
  S = Z.colwise() - Z.rowwise().maxCoeff();
  Vector lse = S.array().exp().rowwise().sum().log();
  S.colwise() -= lse;
  P = S.array().exp();
}

}  // namespace

double batch_loss_grad(const ModelSpec& spec, const Vector& w, const RowMatrix& X,
                       std::span<const int> labels, std::span<const int> idx, LossKind kind,
                       double weight, Vector& grad) {
  const Eigen::Index m = Eigen::Index(idx.size());
  if (m == 0) return 0.0;
  const Eigen::Index d = spec.input_dim, k = spec.class_count;
  RowMatrix Xb(m, d);
  for (Eigen::Index i = 0; i < m; ++i) Xb.row(i) = X.row(idx[i]);

  Matrix S, P;
  double value = 0.0;
  auto row_terms = [&](const Matrix& Z, Matrix& dZ) {
    logp_probs_rows(Z, S, P);
    dZ.resize(m, k);
    Vector s(k), p(k);
    for (Eigen::Index i = 0; i < m; ++i) {
      s = S.row(i);
      p = P.row(i);
      const int y = labels.empty() ? 0 : labels[idx[i]];
      value += detail::loss_value(kind, y, p, s);
      dZ.row(i) = detail::loss_dz(kind, y, p, s);
    }
  };

  if (spec.kind == ModelKind::LogReg) {
    auto v = logreg_view(spec, w);
    Matrix Z = (Xb * v.W.transpose()).rowwise() + v.b.transpose();
    Matrix dZ;
    row_terms(Z, dZ);
    auto g = logreg_view(spec, grad);
    g.W.noalias() += weight * (dZ.transpose() * Xb);
    g.b += weight * dZ.colwise().sum().transpose();
    return weight * value;
  }
  auto v = mlp_view(spec, w);
  Matrix A = (Xb * v.W1.transpose()).rowwise() + v.b1.transpose();
  Matrix Hh = A.cwiseMax(0.0);
  Matrix Z = (Hh * v.W2.transpose()).rowwise() + v.b2.transpose();
  Matrix dZ;
  row_terms(Z, dZ);
  auto g = mlp_view(spec, grad);
  g.W2.noalias() += weight * (dZ.transpose() * Hh);
  g.b2 += weight * dZ.colwise().sum().transpose();
  Matrix dA = (dZ * v.W2).cwiseProduct((A.array() > 0.0).cast<double>().matrix());
  g.W1.noalias() += weight * (dA.transpose() * Xb);
  g.b1 += weight * dA.colwise().sum().transpose();
  return weight * value;
}

void batch_hvp(const ModelSpec& spec, const Vector& w, const RowMatrix& X,
               std::span<const int> labels, std::span<const int> idx, LossKind kind, double weight,
               const Vector& v, Vector& out) {
  std::vector<LossTerm> terms;
  terms.reserve(idx.size());
  for (int i : idx)
    terms.emplace_back(X.row(i).data(), X.cols(), labels.empty() ? 0 : labels[i], kind, weight);
  ParamVector wv{w, spec};
  // spec copied into wrappers; cheap relative to the products
  ParamVector dir{v, spec};
  ParamVector r = hvp(spec, wv, terms, dir);
  out += r.values;
}

// --- checkpoint io ----------------------------------------------------------

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw FormatError("checkpoint truncated while reading header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamVector& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path);
  os.write("TTP1", 4);
  put_u64(os, w.spec.kind == ModelKind::LogReg ? 0 : 1);
  put_u64(os, std::uint64_t(w.spec.input_dim));
  if (w.spec.kind == ModelKind::Mlp) put_u64(os, std::uint64_t(w.spec.hidden_dim));
  put_u64(os, std::uint64_t(w.spec.class_count));
  put_u64(os, std::uint64_t(w.values.size()));
  for (Eigen::Index i = 0; i < w.values.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &w.values[i], 8);
    put_u64(os, bits);
  }
  if (!os) throw FormatError("checkpoint write failed: " + path);
}

ParamVector load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TTP1", 4) != 0)
    throw FormatError("bad checkpoint magic (expected TTP1)");
  const std::uint64_t tag = get_u64(is);
  ModelSpec spec;
  if (tag == 0) {
    const auto d = get_u64(is);
    const auto k = get_u64(is);
    spec = ModelSpec::logreg(int(d), int(k));
  } else if (tag == 1) {
    const auto d = get_u64(is);
    const auto h = get_u64(is);
    const auto k = get_u64(is);
    spec = ModelSpec::mlp(int(d), int(h), int(k));
  } else {
    throw FormatError("unknown model kind tag in checkpoint");
  }
  const std::uint64_t count = get_u64(is);
  if (count != spec.param_count()) throw FormatError("checkpoint parameter count mismatch");
  ParamVector w{Vector(Eigen::Index(count)), spec};
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t bits = get_u64(is);
    std::memcpy(&w.values[Eigen::Index(i)], &bits, 8);
  }
  return w;
}

}  // namespace ttp
