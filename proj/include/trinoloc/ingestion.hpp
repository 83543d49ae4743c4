#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trinoloc/descriptor.hpp"
#include "trinoloc/geo.hpp"

namespace trinoloc {

/// Camera pose for one capture request.
struct CapturePose {
  GeoTag geotag;
  double pitch = 0.0;  // degrees
  double fov = 90.0;   // degrees, (0, 120]

  CapturePose() = default;
  CapturePose(GeoTag tag, double pitch_deg, double fov_deg);
};

struct ViewPoses {
  CapturePose front;
  CapturePose left;
  CapturePose right;
};

/// Rotates the front heading 90 degrees counterclockwise and clockwise to
/// derive the left and right camera poses. Position, pitch and fov carry over.
ViewPoses derive_view_poses(const CapturePose& front);

/// Offsets the heading by a seeded uniform draw from [-5, 0) u (0, +5]
/// degrees; the offset is never exactly zero.
CapturePose perturb_pose(const CapturePose& pose, std::uint64_t seed);

inline constexpr int kMaxStreetviewImageSize = 640;

/// Static street-image request URL with a stable parameter order
/// (size, location, heading, pitch, fov, key). Numbers are formatted with
/// shortest round-trip precision so parse_streetview_url recovers the pose
/// exactly.
std::string build_streetview_url(const CapturePose& pose, int image_size,
                                 const std::string& api_key);

struct StreetviewRequest {
  CapturePose pose;
  int image_size = 0;
  std::string api_key;
};

/// Inverse of build_streetview_url.
StreetviewRequest parse_streetview_url(const std::string& url);

/// One manifest line: location id, GPS tag, per-view payload paths and
/// optional perturbed-partner paths.
struct ManifestRecord {
  std::uint32_t id = 0;
  GeoTag geotag;
  std::array<std::string, 3> view_paths;  // indexed by View
  std::optional<std::array<std::string, 3>> perturbed_paths;
};

/// Tab-separated, line-delimited dataset description. Relative payload paths
/// resolve against `base_dir` (the manifest's directory when read from disk).
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Payload source: maps a locator (path or URL) to raw bytes. The default
/// implementation reads local files; a networked fetcher can be wired in by
/// callers that hold an API key.
class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual std::string fetch(const std::string& locator) = 0;
};

class FileFetcher : public Fetcher {
 public:
  explicit FileFetcher(std::filesystem::path base_dir = {}) : base_dir_(std::move(base_dir)) {}
  std::string fetch(const std::string& locator) override;

 private:
  std::filesystem::path base_dir_;
};

/// Post-extraction record: three feature maps (plus perturbed partners when
/// the manifest provides them) and the GPS tag.
struct IngestedRecord {
  std::uint32_t id = 0;
  GeoTag geotag;
  std::array<LocalFeatureMap, 3> views;  // indexed by View
  std::optional<std::array<LocalFeatureMap, 3>> perturbed;
};

struct IngestedDataset {
  std::vector<IngestedRecord> records;
};

struct IngestOptions {
  int cell = 16;  // extractor cell size for image payloads
};

/// Reads every record in manifest order. Image payloads (PGM) run through
/// extract_grid_descriptors; descriptor payloads (TLOC) bypass the extractor.
IngestedDataset ingest_manifest(const std::filesystem::path& manifest_path,
                                Fetcher& fetcher, const IngestOptions& options = {});
IngestedDataset ingest_manifest(const std::filesystem::path& manifest_path,
                                const IngestOptions& options = {});

/// 8-bit PGM (P5 binary or P2 ASCII) to a luminance grid in [0, 255].
Eigen::MatrixXf decode_pgm(const std::string& bytes, const std::string& what);

}  // namespace trinoloc
