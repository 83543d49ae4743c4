#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "trinoloc/errors.hpp"

namespace trinoloc {

enum class View : std::uint8_t { front = 0, left = 1, right = 2 };

inline constexpr std::array<View, 3> kViews = {View::front, View::left, View::right};

std::string_view view_name(View v);
View view_from_name(std::string_view name);

inline constexpr int kOrientationBins = 8;
/// Per-cell layout: 8 gradient-orientation bins, then intensity mean, then
/// intensity variance.
inline constexpr int kLocalDescriptorDim = kOrientationBins + 2;
inline constexpr int kDefaultPooledDim = 256;
inline constexpr int kDefaultCodebookSize = 16;
inline constexpr std::uint16_t kDescriptorFormatVersion = 1;

/// Grid of local feature points for one view. Column i of `points` is the
/// descriptor of grid cell i in row-major cell order.
struct LocalFeatureMap {
  Eigen::MatrixXf points;  // dim x point_count
  int grid_rows = 0;
  int grid_cols = 0;
  View source_view = View::front;

  int point_count() const { return static_cast<int>(points.cols()); }
  int dim() const { return static_cast<int>(points.rows()); }
};

/// Throws ValidationError unless the map has >= 1 finite point and a grid
/// shape consistent with its point count.
void validate_feature_map(const LocalFeatureMap& map);

/// Fixed-length pooled descriptor.
struct DescriptorVector {
  Eigen::VectorXf values;
  bool normalized = false;

  int dim() const { return static_cast<int>(values.size()); }
};

/// Cluster centers for soft-assignment pooling; immutable after construction.
struct VladCodebook {
  Eigen::MatrixXf centers;  // local_dim x K

  int size() const { return static_cast<int>(centers.cols()); }
  int dim() const { return static_cast<int>(centers.rows()); }
};

/// Normalizes a vector to unit Euclidean length, preserving direction.
/// Throws DegenerateVectorError when the input norm is zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> l2_normalize(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (!(n > Scalar(0)))
    throw DegenerateVectorError("cannot normalize a zero vector");
  return v / n;
}

/// Deterministic dense extractor: partitions the image into cell x cell
/// blocks and emits, per block, a magnitude-weighted gradient-orientation
/// histogram plus the block's intensity mean and variance. Pixels beyond the
/// last full cell are ignored.
LocalFeatureMap extract_grid_descriptors(const Eigen::MatrixXf& image, int cell,
                                         View view = View::front);

/// Standard-specified PRNG stream: identical output on every platform, which
/// keeps seeded projections stable across builds of the same library file.
Eigen::MatrixXf seeded_gaussian_matrix(int rows, int cols, std::uint64_t seed);

/// Soft-assignment VLAD pooling bound to one codebook, temperature and
/// projection. Query and reference pooling must share one instance (or equal
/// parameters) to agree bit for bit.
class VladPooler {
 public:
  VladPooler(VladCodebook codebook, int out_dim, double temperature,
             std::uint64_t projection_seed);

  DescriptorVector pool(const LocalFeatureMap& map) const;

  const VladCodebook& codebook() const { return codebook_; }
  int out_dim() const { return out_dim_; }
  double temperature() const { return temperature_; }
  std::uint64_t projection_seed() const { return seed_; }

 private:
  VladCodebook codebook_;
  int out_dim_;
  double temperature_;
  std::uint64_t seed_;
  Eigen::MatrixXf projection_;  // empty when K * local_dim == out_dim
};

/// One-shot convenience wrapper around VladPooler.
DescriptorVector vlad_pool(const LocalFeatureMap& map, const VladCodebook& codebook,
                           int out_dim, double temperature = 1.0,
                           std::uint64_t projection_seed = 0);

/// Binary descriptor-file round trip (magic "TLOC"). The file stores raw
/// points only; grid shape is restored as a single row and the view is
/// assigned by the caller.
void save_feature_map(const LocalFeatureMap& map, const std::filesystem::path& path);
LocalFeatureMap load_feature_map(const std::filesystem::path& path, View view);
std::string encode_feature_map(const LocalFeatureMap& map);
LocalFeatureMap decode_feature_map(const std::string& bytes, View view,
                                   const std::string& what);

}  // namespace trinoloc
