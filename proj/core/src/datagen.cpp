#include "uda/datagen.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "uda/error.hpp"
#include "uda/linalg.hpp"

namespace uda {

void Dataset::validate() const {
  if (size() == 0) throw ContractError("dataset '" + domain_tag + "' is empty");
  if (!features.all_finite()) throw ContractError("dataset '" + domain_tag + "' has non-finite features");
  if (!labels) return;
  if (labels->size() != size()) {
    throw ContractError("dataset '" + domain_tag + "': label count does not match row count");
  }
  for (std::size_t i = 0; i < labels->size(); ++i) {
    const int y = (*labels)[i];
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw RangeError("dataset '" + domain_tag + "': label " + std::to_string(y) + " at row " +
                       std::to_string(i) + " outside [0," + std::to_string(class_count) + ")");
    }
  }
}

std::string to_string(ShiftBase base) {
  return base == ShiftBase::kTwoMoons ? "two_moons" : "gaussian_blobs";
}

ShiftBase parse_shift_base(const std::string& name) {
  if (name == "two_moons") return ShiftBase::kTwoMoons;
  if (name == "gaussian_blobs") return ShiftBase::kGaussianBlobs;
  throw ConfigError("unsupported shift base '" + name + "'");
}

void ShiftSpec::validate() const {
  if (n_per_domain == 0) throw ConfigError("shift spec: n_per_domain must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("shift spec: noise_sigma must be >= 0");
  if (class_count < 2) throw ConfigError("shift spec: class_count must be >= 2");
  if (base == ShiftBase::kTwoMoons && class_count != 2) {
    throw ConfigError("shift spec: two_moons has exactly 2 classes");
  }
  const std::size_t d = base == ShiftBase::kTwoMoons ? 2 : dim;
  if (d == 0) throw ConfigError("shift spec: dim must be >= 1");
  if (!translation.empty() && translation.size() != d) {
    throw ConfigError("shift spec: translation has " + std::to_string(translation.size()) +
                      " entries, feature width is " + std::to_string(d));
  }
}

namespace {

Dataset sample_base(const ShiftSpec& spec, Rng& rng, const std::string& tag) {
  const std::size_t n = spec.n_per_domain;
  const std::size_t c = spec.class_count;
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);

  Dataset d;
  d.domain_tag = tag;
  d.class_count = c;
  d.labels = std::vector<int>(n);
  if (spec.base == ShiftBase::kTwoMoons) {
    d.features = Tensor(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 2);
      const double t = angle(rng);
      double x0 = y == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double x1 = y == 0 ? std::sin(t) : 0.5 - std::sin(t);
      x0 += kMoonsJitter * jitter(rng);
      x1 += kMoonsJitter * jitter(rng);
      d.features(i, 0) = x0;
      d.features(i, 1) = x1;
      (*d.labels)[i] = y;
    }
  } else {
    const std::size_t dim = spec.dim;
    d.features = Tensor(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t y = i % c;
      const double phi = 2.0 * std::numbers::pi * static_cast<double>(y) / static_cast<double>(c);
      for (std::size_t k = 0; k < dim; ++k) {
        double center = 0.0;
        if (k == 0) center = kBlobRadius * std::cos(phi);
        if (k == 1) center = kBlobRadius * std::sin(phi);
        d.features(i, k) = center + kBlobStd * jitter(rng);
      }
      (*d.labels)[i] = static_cast<int>(y);
    }
  }
  return d;
}

void add_noise_inplace(Tensor& x, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : x.data()) v += noise(rng);
}

}  // namespace

std::pair<Dataset, Dataset> make_shift_pair(const ShiftSpec& spec) {
  spec.validate();
  Rng source_rng(spec.seed ^ kSourceSeedSalt);
  Rng target_rng(spec.seed ^ kTargetSeedSalt);
  Dataset source = sample_base(spec, source_rng, "source");
  Dataset target = sample_base(spec, target_rng, "target");

  Tensor& x = target.features;
  if (spec.rotation_deg != 0.0 && x.cols() >= 2) {
    const double a = spec.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double x0 = x(i, 0), x1 = x(i, 1);
      x(i, 0) = c * x0 - s * x1;
      x(i, 1) = s * x0 + c * x1;
    }
  }
  if (!spec.translation.empty()) {
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < x.cols(); ++k) x(i, k) += spec.translation[k];
  }
  add_noise_inplace(x, spec.noise_sigma, target_rng);
  return {std::move(source), std::move(target)};
}

Dataset add_gaussian_noise(const Dataset& d, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("add_gaussian_noise: sigma must be >= 0");
  Dataset out = d;
  Rng rng(seed);
  add_noise_inplace(out.features, sigma, rng);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string t = trim(cell);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError("csv: non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                     ", column '" + column + "'");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 std::size_t class_count) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: '" + path + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::ptrdiff_t label_idx = -1;
  if (!label_column.empty()) {
    const auto it = std::find(header.begin(), header.end(), label_column);
    if (it == header.end()) {
      throw ConfigError("csv: label column '" + label_column + "' not found in '" + path + "'");
    }
    label_idx = it - header.begin();
  }
  const std::size_t d = header.size() - (label_idx >= 0 ? 1 : 0);

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_double(cells[c], row, header[c]);
      if (static_cast<std::ptrdiff_t>(c) == label_idx) {
        if (v != std::floor(v)) {
          throw ParseError("csv: non-integer label '" + cells[c] + "' at row " + std::to_string(row));
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  if (row == 0) throw ContractError("csv: '" + path + "' has no data rows");

  Dataset ds;
  ds.features = Tensor(row, d, std::move(values));
  ds.domain_tag = path;
  if (label_idx >= 0) {
    if (class_count == 0) {
      class_count = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
    }
    ds.labels = std::move(labels);
  }
  ds.class_count = class_count;
  ds.validate();
  return ds;
}

void save_csv(const Dataset& d, const std::string& path, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot write '" + path + "'");
  for (std::size_t k = 0; k < d.dim(); ++k) out << (k ? "," : "") << 'f' << k;
  if (d.labels) out << ',' << label_column;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t k = 0; k < d.dim(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", d.features(i, k));
      out << (k ? "," : "") << buf;
    }
    if (d.labels) out << ',' << (*d.labels)[i];
    out << '\n';
  }
  if (!out) throw IoError("csv: write failed for '" + path + "'");
}

namespace {

void draw_indices(std::size_t n, std::size_t b, Rng& rng, std::vector<std::size_t>& out) {
  out.resize(b);
  if (n >= b) {
    // Partial Fisher-Yates: first b entries of a random permutation.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = 0; i < b; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(perm[i], perm[pick(rng)]);
      out[i] = perm[i];
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& v : out) v = pick(rng);
  }
}

}  // namespace

BatchPair sample_balanced_batch(const Dataset& source, const Dataset& target, std::size_t batch,
                                Rng& rng, std::span<const int> known_target_labels) {
  if (!source.has_labels()) throw ContractError("sample_balanced_batch: source has no labels");
  if (batch == 0) throw ContractError("sample_balanced_batch: batch size must be >= 1");
  if (source.size() == 0 || target.size() == 0) {
    throw ContractError("sample_balanced_batch: empty domain");
  }
  if (source.dim() != target.dim()) {
    throw ShapeError("sample_balanced_batch: source width " + std::to_string(source.dim()) +
                     " vs target width " + std::to_string(target.dim()));
  }
  BatchPair b;
  draw_indices(source.size(), batch, rng, b.source_index);
  draw_indices(target.size(), batch, rng, b.target_index);
  b.xs = gather_rows(source.features, b.source_index);
  b.xt = gather_rows(target.features, b.target_index);
  b.ys.reserve(batch);
  for (std::size_t i : b.source_index) b.ys.push_back((*source.labels)[i]);
  b.z.assign(2 * batch, 0.0);
  std::fill_n(b.z.begin(), batch, 1.0);
  if (!known_target_labels.empty()) {
    for (std::size_t r = 0; r < batch; ++r) {
      const int y = known_target_labels[b.target_index[r]];
      if (y >= 0) b.yt_labeled.emplace_back(r, y);
    }
  }
  return b;
}

Tensor pca2(const Tensor& features) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n < 2) throw ContractError("pca2: need at least 2 rows");
  Tensor centered = features;
  for (std::size_t k = 0; k < d; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += features(i, k);
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered(i, k) -= m;
  }
  const Svd svd = svd_jacobi(centered);
  Tensor out(n, 2);
  const std::size_t comps = std::min<std::size_t>(2, svd.s.size());
  for (std::size_t c = 0; c < comps; ++c) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < d; ++k)
      if (std::abs(svd.v(k, c)) > std::abs(svd.v(arg, c))) arg = k;
    const double sign = svd.v(arg, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += centered(i, k) * svd.v(k, c);
      out(i, c) = sign * s;
    }
  }
  return out;
}

}  // namespace uda
