#pragma once

#include "vforge/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace vforge {

struct FeatureRange {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const FeatureRange&) const = default;
};

struct Dataset {
  Matrix features;
  Labels labels;
  std::size_t num_classes = 0;
  std::vector<FeatureRange> ranges;

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws DataError if any invariant is broken.
  void validate() const;

  /// Per-column (min, max) of the current features.
  static std::vector<FeatureRange> compute_ranges(const Matrix& features);
};

struct SplitDataset {
  Dataset train;
  Dataset test;
  std::uint64_t split_seed = 0;
  double test_fraction = 0.0;
};

struct BlobsSpec {
  std::size_t num_classes = 3;
  std::size_t samples_per_class = 100;
  std::size_t dims = 2;
  double spread = 1.0;
  std::uint64_t seed = 0;
  /// Distance between any two class centers; negative means 4 * spread.
  double center_distance = -1.0;
};

/// Isotropic Gaussian clusters, rows grouped by class.
///
/// Centers sit on scaled basis vectors (a simplex with all pairwise distances
/// equal) when dims >= num_classes. With fewer dims they fall back to a
/// regular polygon of the given side length in the first two coordinates, or
/// an evenly spaced line when dims == 1.
Dataset gen_blobs(const BlobsSpec& spec);

inline Dataset gen_blobs(std::size_t num_classes, std::size_t samples_per_class, std::size_t dims,
                         double spread, std::uint64_t seed) {
  return gen_blobs(BlobsSpec{num_classes, samples_per_class, dims, spread, seed, -1.0});
}

/// Concentric 2-D rings of radius 1, 2, ...; ring index is the label.
Dataset gen_rings(std::size_t num_rings, std::size_t samples_per_ring, double noise,
                  std::uint64_t seed);

/// Reads a headered CSV. Labels are densified to 0..m-1 preserving order.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Writes features as f0..f{d-1} followed by the label column.
void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               const std::string& label_column);

/// Stratified split. Both parts inherit the source feature ranges.
SplitDataset split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// Rows of `dataset` selected by `rows`, in that order.
Dataset take_rows(const Dataset& dataset, const std::vector<std::size_t>& rows);

}  // namespace vforge
