#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "trinoloc/descriptor.hpp"
#include "trinoloc/geo.hpp"
#include "trinoloc/ingestion.hpp"

namespace trinoloc {

inline constexpr std::uint16_t kLibraryFormatVersion = 1;

/// One stored location: GPS tag, three pooled per-view descriptors and the
/// three full feature maps the voting stage compares against.
struct ReferenceEntry {
  std::uint32_t id = 0;
  GeoTag geotag;
  std::array<DescriptorVector, 3> pooled;    // indexed by View
  std::array<LocalFeatureMap, 3> features;   // indexed by View

  const DescriptorVector& pooled_view(View v) const {
    return pooled[static_cast<std::size_t>(v)];
  }
  const LocalFeatureMap& features_view(View v) const {
    return features[static_cast<std::size_t>(v)];
  }
};

/// Hierarchical k-means index over a fixed set of vectors. Leaves hold
/// column indices into `points()`; every indexed vector appears in exactly
/// one leaf.
class KMeansTree {
 public:
  struct Node {
    Eigen::VectorXf center;
    std::vector<std::uint32_t> children;  // node indices; empty for leaves
    std::vector<std::uint32_t> items;     // column indices; leaves only
    bool leaf() const { return children.empty(); }
  };

  const std::vector<Node>& nodes() const { return nodes_; }
  const Eigen::MatrixXf& points() const { return points_; }
  const std::vector<std::uint32_t>& ids() const { return ids_; }
  int branching() const { return branching_; }
  int leaf_max() const { return leaf_max_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return ids_.size(); }
  int dim() const { return static_cast<int>(points_.rows()); }

 private:
  friend KMeansTree build_kmeans_tree(const Eigen::MatrixXf&,
                                      const std::vector<std::uint32_t>&, int, int,
                                      std::uint64_t);
  friend class LocationLibrary;

  Eigen::MatrixXf points_;  // dim x N, column j tagged ids_[j]
  std::vector<std::uint32_t> ids_;
  std::vector<Node> nodes_;  // nodes_[0] is the root
  int branching_ = 0;
  int leaf_max_ = 0;
  std::uint64_t seed_ = 0;
};

/// Recursive seeded k-means split (k = branching); Lloyd iterations run until
/// the largest center movement drops below 1e-4 or 25 iterations pass.
/// Clusters smaller than the branching factor become leaves.
KMeansTree build_kmeans_tree(const Eigen::MatrixXf& vectors,
                             const std::vector<std::uint32_t>& ids, int branching,
                             int leaf_max, std::uint64_t seed);

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;
};

/// Best-bin-first traversal bounded by `checks` leaf visits (0 = unlimited,
/// which degrades to an exact search). Results are ranked by ascending
/// Euclidean distance, ties broken by smaller id.
std::vector<Neighbor> knn_search(const KMeansTree& tree, const Eigen::VectorXf& query,
                                 int n, int checks = 0);

/// Pooling and indexing parameters persisted with the library so queries can
/// reproduce the reference pipeline exactly.
struct BuildMetadata {
  int local_dim = 0;
  int pooled_dim = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  VladCodebook codebook;
  double vlad_temperature = 1.0;
  std::uint64_t projection_seed = 0;
  std::uint64_t created_unix = 0;  // 0 unless the caller stamps it
};

struct BuildConfig {
  int codebook_size = kDefaultCodebookSize;
  int pooled_dim = kDefaultPooledDim;
  double vlad_temperature = 1.0;
  std::uint64_t projection_seed = 42;
  std::uint64_t codebook_seed = 7;
  int codebook_sample_max = 10000;
  int tree_branching = 8;
  int tree_leaf_max = 16;
  std::uint64_t tree_seed = 13;
};

struct BuildReport {
  std::size_t ingested = 0;
  std::size_t accepted = 0;
  std::vector<std::uint32_t> skipped_record_ids;  // degenerate descriptors
};

/// Immutable GPS-tagged reference store plus one per-view k-means tree over
/// the pooled descriptors. Safe for concurrent searches once built.
class LocationLibrary {
 public:
  const std::vector<ReferenceEntry>& entries() const { return entries_; }
  const ReferenceEntry& entry(std::uint32_t id) const;
  const KMeansTree& tree(View v) const { return trees_[static_cast<std::size_t>(v)]; }
  const BuildMetadata& metadata() const { return metadata_; }
  std::size_t size() const { return entries_.size(); }

  /// Pooler configured exactly as at build time.
  VladPooler make_pooler() const;

 private:
  friend struct LibraryBuild;
  friend LibraryBuild build_library(const IngestedDataset&, const BuildConfig&);
  friend void save_library(const LocationLibrary&, const std::filesystem::path&);
  friend LocationLibrary load_library(const std::filesystem::path&);

  std::vector<ReferenceEntry> entries_;
  std::array<KMeansTree, 3> trees_;
  BuildMetadata metadata_;
};

struct LibraryBuild {
  LocationLibrary library;
  BuildReport report;
};

/// Pools every view of every record, assigns sequential ids in manifest
/// order and indexes the three views. Records with degenerate descriptors
/// are skipped and counted in the report.
LibraryBuild build_library(const IngestedDataset& dataset, const BuildConfig& config = {});

/// Single-file binary persistence (magic "TLIB") with a trailing CRC32.
/// Round trips are bit-exact.
void save_library(const LocationLibrary& lib, const std::filesystem::path& path);
LocationLibrary load_library(const std::filesystem::path& path);

/// Seeded Lloyd k-means over columns; exposed for codebook construction.
Eigen::MatrixXf lloyd_kmeans(const Eigen::MatrixXf& vectors, int k, std::uint64_t seed,
                             int max_iterations = 25, double tolerance = 1e-4);

}  // namespace trinoloc
