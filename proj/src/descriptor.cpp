#include "trinoloc/descriptor.hpp"

#include <cmath>
#include <random>
#include <string>

#include "trinoloc/binary_io.hpp"

namespace trinoloc {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

/// Uniform draw in (0, 1] from the top 53 bits of a mt19937_64 output.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

}  // namespace

std::string_view view_name(View v) {
  switch (v) {
    case View::front: return "front";
    case View::left: return "left";
    case View::right: return "right";
  }
  throw InternalError("unknown view tag");
}

View view_from_name(std::string_view name) {
  if (name == "front") return View::front;
  if (name == "left") return View::left;
  if (name == "right") return View::right;
  throw ValidationError("unknown view name: " + std::string(name));
}

void validate_feature_map(const LocalFeatureMap& map) {
  if (map.point_count() < 1 || map.dim() < 1)
    throw ValidationError("feature map must have >= 1 point and >= 1 dimension");
  if (static_cast<long long>(map.grid_rows) * map.grid_cols != map.point_count())
    throw ValidationError("grid shape " + std::to_string(map.grid_rows) + "x" +
                          std::to_string(map.grid_cols) + " inconsistent with " +
                          std::to_string(map.point_count()) + " points");
  if (!map.points.allFinite())
    throw ValidationError("feature map contains non-finite values");
}

LocalFeatureMap extract_grid_descriptors(const Eigen::MatrixXf& image, int cell,
                                         View view) {
  if (cell < 1) throw ValidationError("cell size must be >= 1");
  const int rows = static_cast<int>(image.rows());
  const int cols = static_cast<int>(image.cols());
  if (rows < cell || cols < cell)
    throw ValidationError("image " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " smaller than one " + std::to_string(cell) + "px cell");

  const int grid_rows = rows / cell;
  const int grid_cols = cols / cell;
  const int count = grid_rows * grid_cols;

  // Clamped central differences over the full image.
  Eigen::MatrixXf gx(rows, cols), gy(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int cl = std::max(c - 1, 0), cr = std::min(c + 1, cols - 1);
      const int ru = std::max(r - 1, 0), rd = std::min(r + 1, rows - 1);
      gx(r, c) = (image(r, cr) - image(r, cl)) * 0.5f;
      gy(r, c) = (image(rd, c) - image(ru, c)) * 0.5f;
    }
  }

  LocalFeatureMap map;
  map.points.resize(kLocalDescriptorDim, count);
  map.grid_rows = grid_rows;
  map.grid_cols = grid_cols;
  map.source_view = view;

  for (int gr = 0; gr < grid_rows; ++gr) {
    for (int gc = 0; gc < grid_cols; ++gc) {
      Eigen::VectorXf desc = Eigen::VectorXf::Zero(kLocalDescriptorDim);
      double sum = 0.0, sum_sq = 0.0;
      for (int r = gr * cell; r < (gr + 1) * cell; ++r) {
        for (int c = gc * cell; c < (gc + 1) * cell; ++c) {
          const double dx = gx(r, c), dy = gy(r, c);
          const double mag = std::sqrt(dx * dx + dy * dy);
          if (mag > 0.0) {
            double angle = std::atan2(dy, dx);  // [-pi, pi]
            if (angle < 0.0) angle += kTwoPi;
            int bin = static_cast<int>(angle / kTwoPi * kOrientationBins);
            bin = std::min(bin, kOrientationBins - 1);
            desc[bin] += static_cast<float>(mag);
          }
          sum += image(r, c);
          sum_sq += image(r, c) * image(r, c);
        }
      }
      const double n = static_cast<double>(cell) * cell;
      const double mean = sum / n;
      desc[kOrientationBins] = static_cast<float>(mean);
      desc[kOrientationBins + 1] = static_cast<float>(std::max(0.0, sum_sq / n - mean * mean));
      map.points.col(gr * grid_cols + gc) = desc;
    }
  }
  return map;
}

Eigen::MatrixXf seeded_gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXf m(rows, cols);
  // Box-Muller on raw generator output; std::normal_distribution is not
  // bit-stable across standard libraries.
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double u1 = unit_draw(rng);
      const double u2 = unit_draw(rng);
      m(i, j) = static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2));
    }
  }
  return m;
}

VladPooler::VladPooler(VladCodebook codebook, int out_dim, double temperature,
                       std::uint64_t projection_seed)
    : codebook_(std::move(codebook)),
      out_dim_(out_dim),
      temperature_(temperature),
      seed_(projection_seed) {
  if (codebook_.size() < 1 || codebook_.dim() < 1)
    throw ValidationError("codebook must have >= 1 center of dimension >= 1");
  if (!codebook_.centers.allFinite())
    throw ValidationError("codebook centers must be finite");
  if (out_dim_ < 1) throw ValidationError("pooled dimension must be >= 1");
  if (!(temperature_ > 0.0)) throw ValidationError("softmax temperature must be > 0");
  const int flat = codebook_.size() * codebook_.dim();
  if (flat != out_dim_) {
    projection_ = seeded_gaussian_matrix(out_dim_, flat, seed_) /
                  std::sqrt(static_cast<float>(out_dim_));
  }
}

DescriptorVector VladPooler::pool(const LocalFeatureMap& map) const {
  validate_feature_map(map);
  if (map.dim() != codebook_.dim())
    throw ValidationError("descriptor dim " + std::to_string(map.dim()) +
                          " does not match codebook dim " +
                          std::to_string(codebook_.dim()));

  const int k = codebook_.size();
  const int d = codebook_.dim();
  Eigen::MatrixXf residuals = Eigen::MatrixXf::Zero(d, k);

  for (int i = 0; i < map.point_count(); ++i) {
    const Eigen::VectorXf x = map.points.col(i);
    Eigen::VectorXf neg_sq(k);
    for (int c = 0; c < k; ++c)
      neg_sq[c] = -(x - codebook_.centers.col(c)).squaredNorm() /
                  static_cast<float>(temperature_);
    const float peak = neg_sq.maxCoeff();
    Eigen::VectorXf w = (neg_sq.array() - peak).exp();
    w /= w.sum();
    for (int c = 0; c < k; ++c)
      residuals.col(c) += w[c] * (x - codebook_.centers.col(c));
  }

  // Intra-normalize each residual block; zero blocks stay zero.
  for (int c = 0; c < k; ++c) {
    const float n = residuals.col(c).norm();
    if (n > 0.0f) residuals.col(c) /= n;
  }

  Eigen::VectorXf flat = Eigen::Map<Eigen::VectorXf>(residuals.data(), d * k);
  Eigen::VectorXf out = projection_.size() > 0 ? Eigen::VectorXf(projection_ * flat)
                                               : flat;
  DescriptorVector result;
  result.values = l2_normalize(out);
  result.normalized = true;
  return result;
}

DescriptorVector vlad_pool(const LocalFeatureMap& map, const VladCodebook& codebook,
                           int out_dim, double temperature,
                           std::uint64_t projection_seed) {
  return VladPooler(codebook, out_dim, temperature, projection_seed).pool(map);
}

std::string encode_feature_map(const LocalFeatureMap& map) {
  validate_feature_map(map);
  ByteWriter w;
  w.put_magic("TLOC");
  w.put_u16(kDescriptorFormatVersion);
  w.put_u32(static_cast<std::uint32_t>(map.dim()));
  w.put_u32(static_cast<std::uint32_t>(map.point_count()));
  for (int i = 0; i < map.point_count(); ++i)
    for (int r = 0; r < map.dim(); ++r) w.put_f32(map.points(r, i));
  return w.bytes();
}

LocalFeatureMap decode_feature_map(const std::string& bytes, View view,
                                   const std::string& what) {
  ByteReader r(bytes);
  r.expect_magic("TLOC", what);
  const auto version = r.get_u16();
  if (version != kDescriptorFormatVersion)
    throw IoError(IoErrorKind::version_mismatch,
                  what + ": descriptor format version " + std::to_string(version) +
                      ", expected " + std::to_string(kDescriptorFormatVersion));
  const auto dim = r.get_u32();
  const auto count = r.get_u32();
  if (dim < 1 || count < 1 || dim > (1u << 20) || count > (1u << 24))
    throw IoError(IoErrorKind::malformed, what + ": implausible header dims");
  LocalFeatureMap map;
  map.points.resize(dim, count);
  for (std::uint32_t i = 0; i < count; ++i)
    for (std::uint32_t d = 0; d < dim; ++d) map.points(d, i) = r.get_f32();
  map.grid_rows = 1;
  map.grid_cols = static_cast<int>(count);
  map.source_view = view;
  return map;
}

void save_feature_map(const LocalFeatureMap& map, const std::filesystem::path& path) {
  write_file_bytes(path, encode_feature_map(map));
}

LocalFeatureMap load_feature_map(const std::filesystem::path& path, View view) {
  return decode_feature_map(read_file_bytes(path), view, path.string());
}

}  // namespace trinoloc
