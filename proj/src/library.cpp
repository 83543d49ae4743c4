#include "trinoloc/library.hpp"

#include <zlib.h>

#include <algorithm>
#include <queue>
#include <random>
#include <unordered_map>

#include "trinoloc/binary_io.hpp"

namespace trinoloc {

namespace {

struct KMeansAssignment {
  Eigen::MatrixXf centers;      // dim x k
  std::vector<int> assignment;  // per column of the input
};

std::vector<std::uint32_t> sample_distinct(std::size_t population, std::size_t count,
                                           std::mt19937_64& rng) {
  std::vector<std::uint32_t> indices(population);
  for (std::size_t i = 0; i < population; ++i) indices[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (population - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(count);
  return indices;
}

KMeansAssignment lloyd_assign(const Eigen::MatrixXf& x, int k, std::mt19937_64& rng,
                              int max_iterations, double tolerance) {
  const Eigen::Index n = x.cols();
  KMeansAssignment result;
  result.centers.resize(x.rows(), k);
  const auto init = sample_distinct(static_cast<std::size_t>(n),
                                    static_cast<std::size_t>(k), rng);
  for (int c = 0; c < k; ++c) result.centers.col(c) = x.col(init[c]);
  result.assignment.assign(static_cast<std::size_t>(n), 0);

  const Eigen::VectorXf x_sq = x.colwise().squaredNorm();
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Eigen::MatrixXf gram = x.transpose() * result.centers;  // n x k
    const Eigen::VectorXf c_sq = result.centers.colwise().squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      float best_d = x_sq[i] + c_sq[0] - 2.0f * gram(i, 0);
      for (int c = 1; c < k; ++c) {
        const float d = x_sq[i] + c_sq[c] - 2.0f * gram(i, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      result.assignment[static_cast<std::size_t>(i)] = best;
    }

    Eigen::MatrixXf sums = Eigen::MatrixXf::Zero(x.rows(), k);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(result.assignment[static_cast<std::size_t>(i)]) += x.col(i);
      ++counts[static_cast<std::size_t>(result.assignment[static_cast<std::size_t>(i)])];
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;  // stranded center stays put
      const Eigen::VectorXf updated =
          sums.col(c) / static_cast<float>(counts[static_cast<std::size_t>(c)]);
      movement = std::max(movement,
                          static_cast<double>((updated - result.centers.col(c)).norm()));
      result.centers.col(c) = updated;
    }
    if (movement < tolerance) break;
  }
  return result;
}

void put_feature_map(ByteWriter& w, const LocalFeatureMap& map) {
  w.put_u32(static_cast<std::uint32_t>(map.grid_rows));
  w.put_u32(static_cast<std::uint32_t>(map.grid_cols));
  w.put_matrix_f32(map.points);
}

LocalFeatureMap get_feature_map(ByteReader& r, View view) {
  LocalFeatureMap map;
  map.grid_rows = static_cast<int>(r.get_u32());
  map.grid_cols = static_cast<int>(r.get_u32());
  map.points = r.get_matrix_f32();
  map.source_view = view;
  return map;
}

std::uint32_t compute_crc(const std::string& bytes, std::size_t length) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(length));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

Eigen::MatrixXf lloyd_kmeans(const Eigen::MatrixXf& vectors, int k, std::uint64_t seed,
                             int max_iterations, double tolerance) {
  if (vectors.cols() < 1) throw ValidationError("k-means needs at least one vector");
  if (k < 1 || k > vectors.cols())
    throw ValidationError("k must be in [1, vector count], got " + std::to_string(k));
  std::mt19937_64 rng(seed);
  return lloyd_assign(vectors, k, rng, max_iterations, tolerance).centers;
}

KMeansTree build_kmeans_tree(const Eigen::MatrixXf& vectors,
                             const std::vector<std::uint32_t>& ids, int branching,
                             int leaf_max, std::uint64_t seed) {
  if (vectors.cols() < 1) throw ValidationError("cannot index an empty vector set");
  if (static_cast<std::size_t>(vectors.cols()) != ids.size())
    throw ValidationError("id count " + std::to_string(ids.size()) +
                          " does not match vector count " + std::to_string(vectors.cols()));
  if (branching < 2) throw ValidationError("branching factor must be >= 2");
  if (leaf_max < 1) throw ValidationError("leaf size must be >= 1");

  KMeansTree tree;
  tree.points_ = vectors;
  tree.ids_ = ids;
  tree.branching_ = branching;
  tree.leaf_max_ = leaf_max;
  tree.seed_ = seed;

  std::mt19937_64 rng(seed);

  // Recursive split; node content is assigned only after the children exist
  // because the nodes vector reallocates while growing.
  auto build = [&](auto&& self, std::vector<std::uint32_t> items) -> std::uint32_t {
    const auto index = static_cast<std::uint32_t>(tree.nodes_.size());
    tree.nodes_.emplace_back();

    KMeansTree::Node node;
    node.center = Eigen::VectorXf::Zero(vectors.rows());
    for (const auto item : items) node.center += vectors.col(item);
    node.center /= static_cast<float>(items.size());

    if (items.size() <= static_cast<std::size_t>(leaf_max) ||
        items.size() < static_cast<std::size_t>(branching)) {
      node.items = std::move(items);
      tree.nodes_[index] = std::move(node);
      return index;
    }

    Eigen::MatrixXf subset(vectors.rows(), static_cast<Eigen::Index>(items.size()));
    for (std::size_t j = 0; j < items.size(); ++j) subset.col(static_cast<Eigen::Index>(j)) = vectors.col(items[j]);
    const auto split = lloyd_assign(subset, branching, rng, 25, 1e-4);

    std::vector<std::vector<std::uint32_t>> buckets(static_cast<std::size_t>(branching));
    for (std::size_t j = 0; j < items.size(); ++j)
      buckets[static_cast<std::size_t>(split.assignment[j])].push_back(items[j]);
    std::size_t nonempty = 0;
    for (const auto& bucket : buckets)
      if (!bucket.empty()) ++nonempty;

    if (nonempty <= 1) {  // indistinguishable points; stop splitting
      node.items = std::move(items);
      tree.nodes_[index] = std::move(node);
      return index;
    }

    for (auto& bucket : buckets) {
      if (bucket.empty()) continue;
      node.children.push_back(self(self, std::move(bucket)));
    }
    tree.nodes_[index] = std::move(node);
    return index;
  };

  std::vector<std::uint32_t> all(ids.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  build(build, std::move(all));
  return tree;
}

std::vector<Neighbor> knn_search(const KMeansTree& tree, const Eigen::VectorXf& query,
                                 int n, int checks) {
  if (query.size() != tree.points().rows())
    throw ValidationError("query dim " + std::to_string(query.size()) +
                          " does not match index dim " +
                          std::to_string(tree.points().rows()));
  if (n < 1) throw ValidationError("neighbor count must be >= 1");
  if (checks < 0) throw ValidationError("checks must be >= 0 (0 = unlimited)");

  const Eigen::VectorXd q = query.cast<double>();
  using Entry = std::pair<double, std::uint32_t>;  // (key, node index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  frontier.emplace(0.0, 0u);

  std::vector<std::pair<double, std::uint32_t>> candidates;  // (squared dist, id)
  int visited_leaves = 0;
  while (!frontier.empty()) {
    const auto [key, index] = frontier.top();
    frontier.pop();
    const auto& node = tree.nodes()[index];
    if (node.leaf()) {
      for (const auto item : node.items) {
        const double d2 = (tree.points().col(item).cast<double>() - q).squaredNorm();
        candidates.emplace_back(d2, tree.ids()[item]);
      }
      if (checks > 0 && ++visited_leaves >= checks) break;
    } else {
      for (const auto child : node.children) {
        const double d =
            (tree.nodes()[child].center.cast<double>() - q).squaredNorm();
        frontier.emplace(d, child);
      }
    }
  }

  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() > static_cast<std::size_t>(n)) candidates.resize(static_cast<std::size_t>(n));
  std::vector<Neighbor> out;
  out.reserve(candidates.size());
  for (const auto& [d2, id] : candidates) out.push_back(Neighbor{id, std::sqrt(d2)});
  return out;
}

const ReferenceEntry& LocationLibrary::entry(std::uint32_t id) const {
  if (id >= entries_.size() || entries_[id].id != id)
    throw ValidationError("unknown reference id " + std::to_string(id));
  return entries_[id];
}

VladPooler LocationLibrary::make_pooler() const {
  return VladPooler(metadata_.codebook, metadata_.pooled_dim, metadata_.vlad_temperature,
                    metadata_.projection_seed);
}

LibraryBuild build_library(const IngestedDataset& dataset, const BuildConfig& config) {
  if (dataset.records.empty())
    throw ValidationError("cannot build a library from an empty dataset");

  const auto& first = dataset.records.front().views[0];
  const int local_dim = first.dim();
  const int point_count = first.point_count();
  for (const auto& rec : dataset.records) {
    for (View v : kViews) {
      const auto& map = rec.views[static_cast<std::size_t>(v)];
      validate_feature_map(map);
      if (map.dim() != local_dim || map.point_count() != point_count)
        throw ValidationError("record " + std::to_string(rec.id) + " view " +
                              std::string(view_name(v)) + " has shape " +
                              std::to_string(map.dim()) + "x" +
                              std::to_string(map.point_count()) + ", expected " +
                              std::to_string(local_dim) + "x" +
                              std::to_string(point_count));
    }
  }

  // Codebook from a seeded subsample of all local descriptors.
  const std::size_t total_points =
      dataset.records.size() * 3u * static_cast<std::size_t>(point_count);
  const std::size_t sample_count =
      std::min<std::size_t>(total_points, static_cast<std::size_t>(config.codebook_sample_max));
  std::mt19937_64 rng(config.codebook_seed);
  const auto picks = sample_distinct(total_points, sample_count, rng);
  Eigen::MatrixXf sample(local_dim, static_cast<Eigen::Index>(sample_count));
  for (std::size_t s = 0; s < sample_count; ++s) {
    const std::size_t flat = picks[s];
    const std::size_t rec = flat / (3u * point_count);
    const std::size_t within = flat % (3u * point_count);
    const std::size_t view = within / point_count;
    const std::size_t point = within % point_count;
    sample.col(static_cast<Eigen::Index>(s)) =
        dataset.records[rec].views[view].points.col(static_cast<Eigen::Index>(point));
  }
  const int k = std::max(1, std::min(config.codebook_size, static_cast<int>(sample_count)));
  VladCodebook codebook{lloyd_kmeans(sample, k, config.codebook_seed)};

  VladPooler pooler(codebook, config.pooled_dim, config.vlad_temperature,
                    config.projection_seed);

  LibraryBuild result;
  result.report.ingested = dataset.records.size();
  for (const auto& rec : dataset.records) {
    ReferenceEntry entry;
    entry.geotag = rec.geotag;
    try {
      for (View v : kViews) {
        const auto i = static_cast<std::size_t>(v);
        entry.features[i] = rec.views[i];
        entry.pooled[i] = pooler.pool(rec.views[i]);
      }
    } catch (const DegenerateVectorError&) {
      result.report.skipped_record_ids.push_back(rec.id);
      continue;
    }
    entry.id = static_cast<std::uint32_t>(result.library.entries_.size());
    result.library.entries_.push_back(std::move(entry));
  }
  result.report.accepted = result.library.entries_.size();
  if (result.library.entries_.empty())
    throw ValidationError("no usable records: every record produced degenerate descriptors");

  const auto n = static_cast<Eigen::Index>(result.library.entries_.size());
  for (View v : kViews) {
    Eigen::MatrixXf pooled(config.pooled_dim, n);
    std::vector<std::uint32_t> ids(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      pooled.col(i) =
          result.library.entries_[static_cast<std::size_t>(i)].pooled_view(v).values;
      ids[static_cast<std::size_t>(i)] =
          result.library.entries_[static_cast<std::size_t>(i)].id;
    }
    result.library.trees_[static_cast<std::size_t>(v)] =
        build_kmeans_tree(pooled, ids, config.tree_branching, config.tree_leaf_max,
                          config.tree_seed + static_cast<std::uint64_t>(v));
  }

  auto& meta = result.library.metadata_;
  meta.local_dim = local_dim;
  meta.pooled_dim = config.pooled_dim;
  meta.grid_rows = first.grid_rows;
  meta.grid_cols = first.grid_cols;
  meta.codebook = codebook;
  meta.vlad_temperature = config.vlad_temperature;
  meta.projection_seed = config.projection_seed;
  meta.created_unix = 0;
  return result;
}

void save_library(const LocationLibrary& lib, const std::filesystem::path& path) {
  ByteWriter w;
  w.put_magic("TLIB");
  w.put_u16(kLibraryFormatVersion);

  const auto& meta = lib.metadata();
  w.put_u32(static_cast<std::uint32_t>(meta.local_dim));
  w.put_u32(static_cast<std::uint32_t>(meta.pooled_dim));
  w.put_u32(static_cast<std::uint32_t>(meta.grid_rows));
  w.put_u32(static_cast<std::uint32_t>(meta.grid_cols));
  w.put_matrix_f32(meta.codebook.centers);
  w.put_f64(meta.vlad_temperature);
  w.put_u64(meta.projection_seed);
  w.put_u64(meta.created_unix);

  w.put_u32(static_cast<std::uint32_t>(lib.entries().size()));
  for (const auto& entry : lib.entries()) {
    w.put_u32(entry.id);
    w.put_f64(entry.geotag.lat);
    w.put_f64(entry.geotag.lon);
    w.put_f64(entry.geotag.heading);
    for (View v : kViews) {
      const auto& pooled = entry.pooled_view(v);
      w.put_u32(static_cast<std::uint32_t>(pooled.values.size()));
      for (Eigen::Index i = 0; i < pooled.values.size(); ++i) w.put_f32(pooled.values[i]);
      w.put_u8(pooled.normalized ? 1 : 0);
    }
    for (View v : kViews) put_feature_map(w, entry.features_view(v));
  }

  for (View v : kViews) {
    const auto& tree = lib.tree(v);
    w.put_u32(static_cast<std::uint32_t>(tree.branching()));
    w.put_u32(static_cast<std::uint32_t>(tree.leaf_max()));
    w.put_u64(tree.seed());
    w.put_u32(static_cast<std::uint32_t>(tree.ids().size()));
    for (const auto id : tree.ids()) w.put_u32(id);
    w.put_u32(static_cast<std::uint32_t>(tree.nodes().size()));
    for (const auto& node : tree.nodes()) {
      w.put_u32(static_cast<std::uint32_t>(node.center.size()));
      for (Eigen::Index i = 0; i < node.center.size(); ++i) w.put_f32(node.center[i]);
      w.put_u32(static_cast<std::uint32_t>(node.children.size()));
      for (const auto c : node.children) w.put_u32(c);
      w.put_u32(static_cast<std::uint32_t>(node.items.size()));
      for (const auto item : node.items) w.put_u32(item);
    }
  }

  std::string bytes = w.bytes();
  ByteWriter crc_writer;
  crc_writer.put_u32(compute_crc(bytes, bytes.size()));
  bytes += crc_writer.bytes();
  write_file_bytes(path, bytes);
}

LocationLibrary load_library(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < 10)
    throw IoError(IoErrorKind::truncated, path.string() + ": file too small");

  const std::size_t payload = bytes.size() - 4;
  ByteReader crc_reader(bytes);
  {
    ByteReader tail(bytes);
    // CRC is the last 4 bytes, over everything before it.
    std::string trailer = bytes.substr(payload);
    ByteReader tr(trailer);
    if (tr.get_u32() != compute_crc(bytes, payload))
      throw IoError(IoErrorKind::checksum_mismatch, path.string() + ": CRC32 mismatch");
  }

  ByteReader r(bytes);
  r.expect_magic("TLIB", path.string());
  const auto version = r.get_u16();
  if (version != kLibraryFormatVersion)
    throw IoError(IoErrorKind::version_mismatch,
                  path.string() + ": library format version " + std::to_string(version) +
                      ", expected " + std::to_string(kLibraryFormatVersion));

  LocationLibrary lib;
  auto& meta = lib.metadata_;
  meta.local_dim = static_cast<int>(r.get_u32());
  meta.pooled_dim = static_cast<int>(r.get_u32());
  meta.grid_rows = static_cast<int>(r.get_u32());
  meta.grid_cols = static_cast<int>(r.get_u32());
  meta.codebook.centers = r.get_matrix_f32();
  meta.vlad_temperature = r.get_f64();
  meta.projection_seed = r.get_u64();
  meta.created_unix = r.get_u64();

  const auto entry_count = r.get_u32();
  lib.entries_.reserve(entry_count);
  for (std::uint32_t e = 0; e < entry_count; ++e) {
    ReferenceEntry entry;
    entry.id = r.get_u32();
    const double lat = r.get_f64();
    const double lon = r.get_f64();
    const double heading = r.get_f64();
    entry.geotag = GeoTag(lat, lon, heading);
    for (View v : kViews) {
      const auto len = r.get_u32();
      DescriptorVector d;
      d.values.resize(len);
      for (std::uint32_t i = 0; i < len; ++i) d.values[i] = r.get_f32();
      d.normalized = r.get_u8() != 0;
      entry.pooled[static_cast<std::size_t>(v)] = std::move(d);
    }
    for (View v : kViews)
      entry.features[static_cast<std::size_t>(v)] = get_feature_map(r, v);
    lib.entries_.push_back(std::move(entry));
  }

  for (View v : kViews) {
    KMeansTree tree;
    tree.branching_ = static_cast<int>(r.get_u32());
    tree.leaf_max_ = static_cast<int>(r.get_u32());
    tree.seed_ = r.get_u64();
    const auto id_count = r.get_u32();
    if (id_count != entry_count)
      throw IoError(IoErrorKind::malformed,
                    path.string() + ": tree id count does not match entry count");
    tree.ids_.resize(id_count);
    for (auto& id : tree.ids_) id = r.get_u32();
    const auto node_count = r.get_u32();
    tree.nodes_.resize(node_count);
    for (auto& node : tree.nodes_) {
      const auto center_len = r.get_u32();
      node.center.resize(center_len);
      for (std::uint32_t i = 0; i < center_len; ++i) node.center[i] = r.get_f32();
      const auto child_count = r.get_u32();
      node.children.resize(child_count);
      for (auto& c : node.children) c = r.get_u32();
      const auto item_count = r.get_u32();
      node.items.resize(item_count);
      for (auto& item : node.items) item = r.get_u32();
    }

    // Tree vectors are not duplicated on disk; rebuild them from the pooled
    // entry descriptors in id order.
    tree.points_.resize(meta.pooled_dim, entry_count);
    std::unordered_map<std::uint32_t, std::size_t> index_of;
    index_of.reserve(entry_count);
    for (std::size_t i = 0; i < lib.entries_.size(); ++i)
      index_of.emplace(lib.entries_[i].id, i);
    for (std::size_t j = 0; j < tree.ids_.size(); ++j) {
      const auto it = index_of.find(tree.ids_[j]);
      if (it == index_of.end())
        throw IoError(IoErrorKind::malformed,
                      path.string() + ": tree references unknown id " +
                          std::to_string(tree.ids_[j]));
      tree.points_.col(static_cast<Eigen::Index>(j)) =
          lib.entries_[it->second].pooled_view(v).values;
    }
    lib.trees_[static_cast<std::size_t>(v)] = std::move(tree);
  }

  if (r.position() != payload)
    throw IoError(IoErrorKind::malformed, path.string() + ": trailing bytes in file");
  return lib;
}

}  // namespace trinoloc
