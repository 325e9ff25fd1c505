#include "vforge/data.hpp"

#include "vforge/errors.hpp"
#include "vforge/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

namespace vforge {

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DataError("dataset: " + std::to_string(features.rows()) + " feature rows but " +
                    std::to_string(labels.size()) + " labels");
  }
  if (!features.allFinite()) throw DataError("dataset: non-finite feature value");
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DataError("dataset: label " + std::to_string(labels[i]) + " at row " +
                      std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) throw DataError("dataset: class " + std::to_string(c) + " has no samples");
  }
  if (ranges.size() != static_cast<std::size_t>(features.cols())) {
    throw DataError("dataset: feature range metadata does not match column count");
  }
}

std::vector<FeatureRange> Dataset::compute_ranges(const Matrix& features) {
  std::vector<FeatureRange> r(static_cast<std::size_t>(features.cols()));
  if (features.rows() == 0) return r;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    r[static_cast<std::size_t>(c)] = {features.col(c).minCoeff(), features.col(c).maxCoeff()};
  }
  return r;
}

namespace {

Matrix blob_centers(std::size_t k, std::size_t dims, double distance) {
  Matrix centers = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dims));
  if (dims >= k) {
    // Scaled basis vectors: pairwise distance = scale * sqrt(2).
    const double scale = distance / std::numbers::sqrt2;
    for (std::size_t c = 0; c < k; ++c) centers(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = scale;
  } else if (dims >= 2) {
    // Regular polygon with side length `distance`.
    const double radius = distance / (2.0 * std::sin(std::numbers::pi / static_cast<double>(k)));
    for (std::size_t c = 0; c < k; ++c) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
      centers(static_cast<Eigen::Index>(c), 0) = radius * std::cos(angle);
      centers(static_cast<Eigen::Index>(c), 1) = radius * std::sin(angle);
    }
  } else {
    for (std::size_t c = 0; c < k; ++c) centers(static_cast<Eigen::Index>(c), 0) = distance * static_cast<double>(c);
  }
  return centers;
}

}  // namespace

Dataset gen_blobs(const BlobsSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("blobs: num_classes must be >= 2");
  if (spec.dims < 1) throw ConfigError("blobs: dims must be >= 1");
  if (spec.samples_per_class < 1) throw ConfigError("blobs: samples_per_class must be >= 1");
  if (!(spec.spread >= 0.0)) throw ConfigError("blobs: spread must be >= 0");

  const double distance = spec.center_distance < 0.0 ? 4.0 * spec.spread : spec.center_distance;
  const Matrix centers = blob_centers(spec.num_classes, spec.dims, distance);

  const auto n = static_cast<Eigen::Index>(spec.num_classes * spec.samples_per_class);
  Dataset d{Matrix(n, static_cast<Eigen::Index>(spec.dims)), Labels(static_cast<std::size_t>(n)),
            spec.num_classes, {}};
  Rng rng(spec.seed);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (Eigen::Index j = 0; j < d.features.cols(); ++j) {
        d.features(row, j) = centers(static_cast<Eigen::Index>(c), j) + spec.spread * rng.normal();
      }
      d.labels[static_cast<std::size_t>(row)] = static_cast<int>(c);
    }
  }
  d.ranges = Dataset::compute_ranges(d.features);
  return d;
}

Dataset gen_rings(std::size_t num_rings, std::size_t samples_per_ring, double noise,
                  std::uint64_t seed) {
  if (num_rings < 1) throw ConfigError("rings: num_rings must be >= 1");
  if (samples_per_ring < 1) throw ConfigError("rings: samples_per_ring must be >= 1");
  if (!(noise >= 0.0)) throw ConfigError("rings: noise must be >= 0");

  const auto n = static_cast<Eigen::Index>(num_rings * samples_per_ring);
  Dataset d{Matrix(n, 2), Labels(static_cast<std::size_t>(n)), num_rings, {}};
  Rng rng(seed);
  Eigen::Index row = 0;
  for (std::size_t r = 0; r < num_rings; ++r) {
    for (std::size_t s = 0; s < samples_per_ring; ++s, ++row) {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double radius = static_cast<double>(r + 1) + noise * rng.normal();
      d.features(row, 0) = radius * std::cos(angle);
      d.features(row, 1) = radius * std::sin(angle);
      d.labels[static_cast<std::size_t>(row)] = static_cast<int>(r);
    }
  }
  d.ranges = Dataset::compute_ranges(d.features);
  return d;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string where(std::size_t line, std::size_t column) {
  return "row " + std::to_string(line) + ", column " + std::to_string(column + 1);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // Skip a UTF-8 byte order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) {
    throw DataError("csv: missing label column '" + label_column + "' in " + path.string());
  }
  const std::size_t label_idx = static_cast<std::size_t>(it - header.begin());
  const std::size_t dims = header.size() - 1;
  if (dims == 0) throw DataError("csv: no feature columns in " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<long long> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("csv: row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    std::vector<double> row;
    row.reserve(dims);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (c == label_idx) {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) {
          throw DataError("csv: non-integer label '" + cell + "' at " + where(line_no, c));
        }
        raw_labels.push_back(v);
      } else {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
          throw DataError("csv: non-numeric cell '" + cell + "' at " + where(line_no, c));
        }
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("csv: no data rows in " + path.string());

  std::map<long long, int> dense;
  for (long long v : raw_labels) dense.emplace(v, 0);
  int next = 0;
  for (auto& [raw, idx] : dense) idx = next++;

  Dataset d{Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dims)),
            Labels(rows.size()), dense.size(), {}};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < dims; ++c) {
      d.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    d.labels[r] = dense.at(raw_labels[r]);
  }
  d.ranges = Dataset::compute_ranges(d.features);
  d.validate();
  return d;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot write " + path.string());
  for (std::size_t c = 0; c < dataset.dims(); ++c) out << 'f' << c << ',';
  out << label_column << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < dataset.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < dataset.features.cols(); ++c) out << dataset.features(r, c) << ',';
    out << dataset.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

Dataset take_rows(const Dataset& dataset, const std::vector<std::size_t>& rows) {
  Dataset d{Matrix(static_cast<Eigen::Index>(rows.size()), dataset.features.cols()),
            Labels(rows.size()), dataset.num_classes, dataset.ranges};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.features.row(static_cast<Eigen::Index>(i)) = dataset.features.row(static_cast<Eigen::Index>(rows[i]));
    d.labels[i] = dataset.labels[rows[i]];
  }
  return d;
}

SplitDataset split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("split: test_fraction must lie in (0, 1)");
  }
  dataset.validate();

  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  }

  const Rng root(seed);
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    const auto n_test =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    if (n_test < 1 || n_test >= rows.size()) {
      throw DataError("split: class " + std::to_string(c) + " with " + std::to_string(rows.size()) +
                      " samples cannot be stratified at test_fraction " +
                      std::to_string(test_fraction));
    }
    Rng rng = root.child(static_cast<std::uint64_t>(c));
    rng.shuffle(std::span<std::size_t>(rows));
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {take_rows(dataset, train_rows), take_rows(dataset, test_rows), seed, test_fraction};
}

}  // namespace vforge
