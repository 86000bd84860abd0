#include "ttp/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "ttp/errors.hpp"
#include "ttp/rng.hpp"

namespace ttp {

int LabeledDataset::class_count() const {
  int k = 0;
  for (int y : labels) k = std::max(k, y + 1);
  return std::max(k, 2);
}

void LabeledDataset::validate() const {
  if (features.rows() != Eigen::Index(labels.size()))
    throw ShapeError("dataset feature/label count mismatch");
  if (!features.allFinite()) throw NumericError("dataset features contain non-finite values");
  for (int y : labels)
    if (y < 0) throw DomainError("dataset label is negative");
}

// --- IDX -------------------------------------------------------------------

namespace {

std::uint32_t read_u32_be(std::istream& is, const std::string& path, std::size_t offset) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is)
    throw FormatError(path + ": truncated at byte offset " + std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw FormatError("cannot open " + images_path);
  const std::uint32_t img_magic = read_u32_be(imgs, images_path, 0);
  if (img_magic != 0x00000803u)
    throw FormatError(images_path + ": bad magic at byte offset 0 (expected 0x00000803)");
  const std::uint32_t n = read_u32_be(imgs, images_path, 4);
  const std::uint32_t rows = read_u32_be(imgs, images_path, 8);
  const std::uint32_t cols = read_u32_be(imgs, images_path, 12);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw FormatError("cannot open " + labels_path);
  const std::uint32_t lab_magic = read_u32_be(labs, labels_path, 0);
  if (lab_magic != 0x00000801u)
    throw FormatError(labels_path + ": bad magic at byte offset 0 (expected 0x00000801)");
  const std::uint32_t nl = read_u32_be(labs, labels_path, 4);
  if (n != nl)
    throw FormatError("image count " + std::to_string(n) + " != label count " +
                      std::to_string(nl) + " (byte offset 4)");

  const std::size_t dim = std::size_t(rows) * cols;
  LabeledDataset out;
  out.features.resize(n, Eigen::Index(dim));
  out.labels.resize(n);
  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), std::streamsize(dim));
    if (!imgs)
      throw FormatError(images_path + ": truncated at byte offset " +
                        std::to_string(16 + std::size_t(i) * dim));
    for (std::size_t j = 0; j < dim; ++j)
      out.features(i, Eigen::Index(j)) = double(buf[j]) / 255.0;
    char c;
    labs.read(&c, 1);
    if (!labs)
      throw FormatError(labels_path + ": truncated at byte offset " + std::to_string(8 + i));
    out.labels[i] = int(static_cast<unsigned char>(c));
  }
  out.name = images_path;
  return out;
}

void save_idx(const LabeledDataset& data, const std::string& images_path,
              const std::string& labels_path) {
  const Eigen::Index n = data.size();
  const auto side = Eigen::Index(std::lround(std::sqrt(double(data.dim()))));
  if (side * side != data.dim()) throw ShapeError("save_idx requires square images");
  std::ofstream imgs(images_path, std::ios::binary);
  std::ofstream labs(labels_path, std::ios::binary);
  if (!imgs || !labs) throw FormatError("cannot open IDX output files");
  write_u32_be(imgs, 0x00000803u);
  write_u32_be(imgs, std::uint32_t(n));
  write_u32_be(imgs, std::uint32_t(side));
  write_u32_be(imgs, std::uint32_t(side));
  write_u32_be(labs, 0x00000801u);
  write_u32_be(labs, std::uint32_t(n));
  std::vector<unsigned char> buf(static_cast<std::size_t>(data.dim()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      const double v = std::clamp(data.features(i, j), 0.0, 1.0);
      buf[std::size_t(j)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    imgs.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    labs.put(char(static_cast<unsigned char>(data.labels[std::size_t(i)])));
  }
}

// --- blobs -----------------------------------------------------------------

LabeledDataset make_blobs(int classes, int per_class, int dim, double spread, std::uint64_t seed) {
  if (classes < 2 || per_class < 1 || dim < 1) throw DomainError("make_blobs requires positive sizes");
  auto rng = derive_stream(seed, 0x626c6f62u);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix means(classes, dim);
  for (int c = 0; c < classes; ++c)
    for (int j = 0; j < dim; ++j) means(c, j) = 4.0 * nd(rng);
  LabeledDataset out;
  out.features.resize(Eigen::Index(classes) * per_class, dim);
  out.labels.resize(std::size_t(classes) * per_class);
  Eigen::Index row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j) out.features(row, j) = means(c, j) + spread * nd(rng);
      out.labels[std::size_t(row)] = c;
    }
  }
  out.name = "blobs";
  return out;
}

// --- synthetic digits ------------------------------------------------------

namespace {

struct Seg {
  bool is_arc;
  double a, b, c, d, e, f;  // line: x0 y0 x1 y1; arc: cx cy rx ry a0 a1
  int n;
};

const std::array<std::vector<Seg>, 10> kGlyphs = {{
    {{true, .5, .5, .28, .38, 0, 2 * M_PI, 80}},
    {{false, .45, .25, .55, .12, 0, 0, 30},
     {false, .55, .12, .55, .88, 0, 0, 30},
     {false, .38, .88, .72, .88, 0, 0, 30}},
    {{true, .5, .32, .24, .20, M_PI, 2.35 * M_PI, 40},
     {false, .71, .45, .30, .88, 0, 0, 30},
     {false, .30, .88, .74, .88, 0, 0, 30}},
    {{true, .48, .32, .22, .19, 1.05 * M_PI, 2.6 * M_PI, 40},
     {true, .48, .68, .24, .21, 1.45 * M_PI, 2.95 * M_PI, 40}},
    {{false, .62, .12, .28, .62, 0, 0, 30},
     {false, .28, .62, .78, .62, 0, 0, 30},
     {false, .62, .12, .62, .88, 0, 0, 30}},
    {{false, .70, .14, .34, .14, 0, 0, 30},
     {false, .34, .14, .32, .48, 0, 0, 30},
     {true, .50, .66, .22, .22, 1.25 * M_PI, 2.8 * M_PI, 40}},
    {{true, .52, .30, .26, .34, 0.75 * M_PI, 1.55 * M_PI, 30},
     {true, .50, .66, .21, .21, 0, 2 * M_PI, 50}},
    {{false, .28, .14, .74, .14, 0, 0, 30},
     {false, .74, .14, .44, .88, 0, 0, 30},
     {false, .38, .50, .66, .50, 0, 0, 30}},
    {{true, .5, .32, .19, .18, 0, 2 * M_PI, 45},
     {true, .5, .70, .23, .20, 0, 2 * M_PI, 50}},
    {{true, .5, .34, .21, .21, 0, 2 * M_PI, 50},
     {true, .48, .38, .30, .40, -0.15 * M_PI, 0.55 * M_PI, 25}},
}};

void render_digit(int label, std::mt19937_64& rng, double* out, int side) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  std::normal_distribution<double> nd(0.0, 1.0);

  std::vector<double> px, py;
  for (const Seg& s : kGlyphs[std::size_t(label)]) {
    for (int i = 0; i < s.n; ++i) {
      const double t = s.n > 1 ? double(i) / (s.n - 1) : 0.0;
      if (s.is_arc) {
        const double ang = s.e + t * (s.f - s.e);
        px.push_back(s.a + s.c * std::cos(ang));
        py.push_back(s.b + s.d * std::sin(ang));
      } else {
        px.push_back(s.a + t * (s.c - s.a));
        py.push_back(s.b + t * (s.d - s.b));
      }
    }
  }
  const double ang = uni(-0.21, 0.21);
  const double sx = uni(0.75, 1.05), sy = uni(0.75, 1.05);
  const double sh = uni(-0.18, 0.18);
  const double ca = std::cos(ang), sa = std::sin(ang);
  // rotation * (scale with shear)
  const double a11 = ca * sx, a12 = ca * sh * sx - sa * sy;
  const double a21 = sa * sx, a22 = sa * sh * sx + ca * sy;
  const double tx = uni(-0.09, 0.09), ty = uni(-0.09, 0.09);

  const double stroke = uni(0.045, 0.065) * side;
  const double inv2s2 = 1.0 / (2.0 * stroke * stroke * 0.55);
  const double amp = uni(0.85, 1.25);

  std::vector<double> img(std::size_t(side) * side, 0.0);
  std::vector<double> gx(static_cast<std::size_t>(side)), gy(static_cast<std::size_t>(side));
  const int win = std::max(3, int(std::ceil(4.0 * stroke)));
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double cx = px[i] - 0.5, cy = py[i] - 0.5;
    double x = (a11 * cx + a12 * cy + 0.5 + tx + 0.008 * nd(rng)) * side;
    double y = (a21 * cx + a22 * cy + 0.5 + ty + 0.008 * nd(rng)) * side;
    const int x0 = std::max(0, int(x) - win), x1 = std::min(side - 1, int(x) + win);
    const int y0 = std::max(0, int(y) - win), y1 = std::min(side - 1, int(y) + win);
    for (int c = x0; c <= x1; ++c) gx[std::size_t(c)] = std::exp(-(c - x) * (c - x) * inv2s2);
    for (int r = y0; r <= y1; ++r) gy[std::size_t(r)] = std::exp(-(r - y) * (r - y) * inv2s2);
    for (int r = y0; r <= y1; ++r) {
      double* row = img.data() + std::size_t(r) * side;
      const double gyr = gy[std::size_t(r)];
      for (int c = x0; c <= x1; ++c) row[c] += gyr * gx[std::size_t(c)];
    }
  }
  for (std::size_t j = 0; j < img.size(); ++j) {
    double v = std::clamp(img[j] * amp, 0.0, 1.0);
    v += 0.06 * nd(rng);
    out[j] = std::clamp(v, 0.0, 1.0);
  }
}

}  // namespace

LabeledDataset make_synth_digits(int count, std::uint64_t seed) {
  if (count < 1) throw DomainError("make_synth_digits requires count >= 1");
  const int side = 28;
  LabeledDataset out;
  out.features.resize(count, side * side);
  out.labels.resize(std::size_t(count));
  auto rng = derive_stream(seed, 0x64696769u);
  std::uniform_int_distribution<int> lab(0, 9);
  for (int i = 0; i < count; ++i) {
    out.labels[std::size_t(i)] = lab(rng);
    render_digit(out.labels[std::size_t(i)], rng, out.features.row(i).data(), side);
  }
  out.name = "synth-digits";
  return out;
}

// --- splits ------------------------------------------------------------------

void Split::validate() const {
  if (dataset == nullptr) throw ConfigError("split has no dataset");
  if (forget_idx.empty()) throw DomainError("forget set must be nonempty");
  const Eigen::Index n = dataset->size();
  std::set<int> seen;
  for (int i : forget_idx) {
    if (i < 0 || i >= n) throw DomainError("forget index out of range");
    if (!seen.insert(i).second) throw DomainError("duplicate forget index");
  }
  for (int i : retain_idx) {
    if (i < 0 || i >= n) throw DomainError("retain index out of range");
    if (!seen.insert(i).second) throw DomainError("forget and retain sets overlap");
  }
  if (Eigen::Index(seen.size()) != n) throw DomainError("split does not cover the training set");
}

Split select_forget(const LabeledDataset& dataset, int count, std::uint64_t seed) {
  const int n = int(dataset.size());
  if (count < 1 || count > n) throw DomainError("forget count must be in [1, n]");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = derive_stream(seed, 0x666f7267u);
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(perm[std::size_t(i)], perm[std::size_t(pick(rng))]);
  }
  std::vector<int> forget(perm.begin(), perm.begin() + count);
  return split_from_indices(dataset, std::move(forget));
}

Split split_from_indices(const LabeledDataset& dataset, std::vector<int> forget) {
  std::sort(forget.begin(), forget.end());
  Split s;
  s.dataset = &dataset;
  s.forget_idx = std::move(forget);
  std::vector<char> is_forget(static_cast<std::size_t>(dataset.size()), 0);
  for (int i : s.forget_idx) {
    if (i < 0 || i >= int(dataset.size())) throw DomainError("forget index out of range");
    is_forget[std::size_t(i)] = 1;
  }
  s.retain_idx.reserve(std::size_t(dataset.size()) - s.forget_idx.size());
  for (int i = 0; i < int(dataset.size()); ++i)
    if (!is_forget[std::size_t(i)]) s.retain_idx.push_back(i);
  s.validate();
  return s;
}

void save_split(const Split& split, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open split file for writing: " + path);
  os << "forget\n";
  for (int i : split.forget_idx) os << i << "\n";
  os << "retain\n";
  for (int i : split.retain_idx) os << i << "\n";
}

Split load_split(const LabeledDataset& dataset, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open split file: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "forget")
    throw FormatError(path + ": expected 'forget' header");
  std::vector<int> forget;
  while (std::getline(is, line) && line != "retain") forget.push_back(std::stoi(line));
  Split s = split_from_indices(dataset, std::move(forget));
  // cross-check the stored retain side
  std::vector<int> retain;
  while (std::getline(is, line))
    if (!line.empty()) retain.push_back(std::stoi(line));
  std::sort(retain.begin(), retain.end());
  if (retain != s.retain_idx) throw FormatError(path + ": retain indices are not the complement");
  return s;
}

}  // namespace ttp
