#include "ttp/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ttp/errors.hpp"

namespace ttp {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Retain: return "retain";
    case SplitTag::Test: return "test";
    case SplitTag::Forget: return "forget";
  }
  throw ConfigError("unknown split tag");
}

double confidence_distance(const Vector& p) {
  require_simplex(p);
  return std::max(0.0, p.maxCoeff() - 1.0 / double(p.size()));
}

double l2_uniformity(const Vector& p) {
  require_simplex(p);
  return (p.array() - 1.0 / double(p.size())).matrix().norm();
}

MetricRow evaluate(const ModelSpec& spec, const ParamVector& w, const LabeledDataset& data,
                   std::span<const int> index_set, SplitTag tag) {
  if (index_set.empty()) throw DomainError("evaluate requires a nonempty index set");
  if (w.spec != spec) throw ShapeError("parameter vector spec mismatch");
  std::vector<int> idx(index_set.begin(), index_set.end());
  std::sort(idx.begin(), idx.end());

  const Eigen::Index n = Eigen::Index(idx.size());
  const Matrix Z = logits_batch(spec, w.values, data.features, idx);
  const int k = spec.class_count;
  std::vector<double> correct(static_cast<std::size_t>(n)), cd(static_cast<std::size_t>(n)), l2(static_cast<std::size_t>(n));
  Vector z(k), p(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    z = Z.row(i);
    const double m = z.maxCoeff();
    p = (z.array() - m).exp();
    p /= p.sum();
    // argmax with ties to the lowest class index
    int arg = 0;
    double best = p[0];
    for (int j = 1; j < k; ++j)
      if (p[j] > best) {
        best = p[j];
        arg = j;
      }
    correct[std::size_t(i)] = (arg == data.labels[std::size_t(idx[std::size_t(i)])]) ? 1.0 : 0.0;
    cd[std::size_t(i)] = std::max(0.0, best - 1.0 / k);
    l2[std::size_t(i)] = (p.array() - 1.0 / k).matrix().norm();
  }
  MetricRow row;
  row.tag = tag;
  row.n = long(n);
  row.accuracy = pairwise_sum(correct) / double(n);
  row.conf_dist_mean = pairwise_sum(cd) / double(n);
  row.l2_uniformity_mean = pairwise_sum(l2) / double(n);
  return row;
}

void save_metrics_csv(std::span<const MetricRow> rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open metrics csv for writing: " + path);
  os << "split,n,accuracy,conf_dist,l2_uniformity\n";
  os.precision(17);
  for (const auto& r : rows)
    os << to_string(r.tag) << ',' << r.n << ',' << r.accuracy << ',' << r.conf_dist_mean << ','
       << r.l2_uniformity_mean << "\n";
}

std::vector<MetricRow> load_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open metrics csv: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "split,n,accuracy,conf_dist,l2_uniformity")
    throw FormatError(path + ": bad metrics header");
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tag;
    if (!std::getline(ss, tag, ',')) throw FormatError(path + ": bad metrics row: " + line);
    MetricRow r;
    if (tag == "retain")
      r.tag = SplitTag::Retain;
    else if (tag == "test")
      r.tag = SplitTag::Test;
    else if (tag == "forget")
      r.tag = SplitTag::Forget;
    else
      throw FormatError(path + ": unknown split tag: " + tag);
    char c;
    ss >> r.n >> c >> r.accuracy >> c >> r.conf_dist_mean >> c >> r.l2_uniformity_mean;
    if (ss.fail()) throw FormatError(path + ": bad metrics row: " + line);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace ttp
