#include "trinoloc/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "trinoloc/binary_io.hpp"

namespace trinoloc {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw InternalError("failed to format double");
  return std::string(buf, end);
}

double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(IoErrorKind::malformed, what + ": not a number: '" + std::string(s) + "'");
  return v;
}

std::uint32_t parse_u32(std::string_view s, const std::string& what) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(IoErrorKind::malformed, what + ": not an id: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool valid_key_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '-';
}

}  // namespace

CapturePose::CapturePose(GeoTag tag, double pitch_deg, double fov_deg)
    : geotag(tag), pitch(pitch_deg), fov(fov_deg) {
  if (!std::isfinite(pitch))
    throw ValidationError("pitch is not finite");
  if (!(fov > 0.0 && fov <= 120.0))
    throw ValidationError("fov out of range (0, 120]: " + std::to_string(fov_deg));
}

ViewPoses derive_view_poses(const CapturePose& front) {
  ViewPoses poses;
  poses.front = front;
  poses.left = front;
  poses.left.geotag.heading = normalize_heading(front.geotag.heading - 90.0);
  poses.right = front;
  poses.right.geotag.heading = normalize_heading(front.geotag.heading + 90.0);
  return poses;
}

CapturePose perturb_pose(const CapturePose& pose, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const bool negative = (rng() & 1u) != 0;
  // (0, 1] scaled to (0, 5]; the offset cannot be zero.
  const double magnitude = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53 * 5.0;
  CapturePose out = pose;
  out.geotag.heading =
      normalize_heading(pose.geotag.heading + (negative ? -magnitude : magnitude));
  return out;
}

std::string build_streetview_url(const CapturePose& pose, int image_size,
                                 const std::string& api_key) {
  if (image_size < 1 || image_size > kMaxStreetviewImageSize)
    throw ValidationError("image size out of range [1, " +
                          std::to_string(kMaxStreetviewImageSize) +
                          "]: " + std::to_string(image_size));
  if (api_key.empty()) throw ValidationError("api key must be nonempty");
  if (!std::all_of(api_key.begin(), api_key.end(), valid_key_char))
    throw ValidationError("api key contains characters outside [A-Za-z0-9_-]");

  std::ostringstream url;
  url << "https://maps.googleapis.com/maps/api/streetview?size=" << image_size << "x"
      << image_size << "&location=" << format_double(pose.geotag.lat) << ","
      << format_double(pose.geotag.lon) << "&heading=" << format_double(pose.geotag.heading)
      << "&pitch=" << format_double(pose.pitch) << "&fov=" << format_double(pose.fov)
      << "&key=" << api_key;
  return url.str();
}

StreetviewRequest parse_streetview_url(const std::string& url) {
  const std::string prefix = "https://maps.googleapis.com/maps/api/streetview?";
  if (url.rfind(prefix, 0) != 0)
    throw ValidationError("not a street-image request URL: " + url);

  std::string size, location, heading, pitch, fov, key;
  std::string_view query(url);
  query.remove_prefix(prefix.size());
  while (!query.empty()) {
    const std::size_t amp = query.find('&');
    const std::string_view param = query.substr(0, amp);
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
    const std::size_t eq = param.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("malformed URL parameter: '" + std::string(param) + "'");
    const std::string_view name = param.substr(0, eq);
    const std::string value(param.substr(eq + 1));
    if (name == "size") size = value;
    else if (name == "location") location = value;
    else if (name == "heading") heading = value;
    else if (name == "pitch") pitch = value;
    else if (name == "fov") fov = value;
    else if (name == "key") key = value;
    else throw ValidationError("unexpected URL parameter: '" + std::string(name) + "'");
  }
  for (const auto& [name, value] :
       {std::pair<const char*, const std::string&>{"size", size},
        {"location", location},
        {"heading", heading},
        {"pitch", pitch},
        {"fov", fov},
        {"key", key}}) {
    if (value.empty())
      throw ValidationError("URL missing parameter '" + std::string(name) + "'");
  }

  const std::size_t x = size.find('x');
  if (x == std::string::npos) throw ValidationError("malformed size parameter: " + size);
  const auto w = parse_u32(std::string_view(size).substr(0, x), "size");
  const auto h = parse_u32(std::string_view(size).substr(x + 1), "size");
  if (w != h) throw ValidationError("expected a square size, got " + size);

  const std::size_t comma = location.find(',');
  if (comma == std::string::npos)
    throw ValidationError("malformed location parameter: " + location);

  StreetviewRequest req;
  req.pose = CapturePose(
      GeoTag(parse_double(std::string_view(location).substr(0, comma), "location"),
             parse_double(std::string_view(location).substr(comma + 1), "location"),
             parse_double(heading, "heading")),
      parse_double(pitch, "pitch"), parse_double(fov, "fov"));
  req.image_size = static_cast<int>(w);
  req.api_key = key;
  return req;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError(IoErrorKind::not_found, "cannot open manifest " + path.string());

  DatasetManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path() : ".";
  std::unordered_set<std::uint32_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    const std::string where =
        "record " + std::to_string(manifest.records.size()) + " (line " +
        std::to_string(line_no) + ")";
    const auto fields = split_tabs(line);
    if (fields.size() != 7 && fields.size() != 10)
      throw IoError(IoErrorKind::malformed,
                    where + ": expected 7 or 10 tab-separated fields, got " +
                        std::to_string(fields.size()));

    ManifestRecord rec;
    rec.id = parse_u32(fields[0], where);
    try {
      rec.geotag = GeoTag(parse_double(fields[1], where), parse_double(fields[2], where),
                          parse_double(fields[3], where));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    rec.view_paths = {std::string(fields[4]), std::string(fields[5]),
                      std::string(fields[6])};
    if (fields.size() == 10)
      rec.perturbed_paths = {{std::string(fields[7]), std::string(fields[8]),
                              std::string(fields[9])}};

    if (!seen.insert(rec.id).second)
      throw ValidationError(where + ": duplicate id " + std::to_string(rec.id));
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& rec : manifest.records) {
    out << rec.id << '\t' << format_double(rec.geotag.lat) << '\t'
        << format_double(rec.geotag.lon) << '\t' << format_double(rec.geotag.heading);
    for (const auto& p : rec.view_paths) out << '\t' << p;
    if (rec.perturbed_paths)
      for (const auto& p : *rec.perturbed_paths) out << '\t' << p;
    out << '\n';
  }
  write_file_bytes(path, out.str());
}

std::string FileFetcher::fetch(const std::string& locator) {
  std::filesystem::path p(locator);
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  return read_file_bytes(p);
}

Eigen::MatrixXf decode_pgm(const std::string& bytes, const std::string& what) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos)
      throw IoError(IoErrorKind::malformed, what + ": truncated PGM header");
    return bytes.substr(start, pos - start);
  };

  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2")
    throw IoError(IoErrorKind::malformed, what + ": not an 8-bit PGM image");
  const auto width = parse_u32(next_token(), what);
  const auto height = parse_u32(next_token(), what);
  const auto maxval = parse_u32(next_token(), what);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255)
    throw IoError(IoErrorKind::malformed, what + ": unsupported PGM geometry/maxval");

  Eigen::MatrixXf image(height, width);
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    if (pos + static_cast<std::size_t>(width) * height > bytes.size())
      throw IoError(IoErrorKind::truncated, what + ": PGM pixel data truncated");
    for (std::uint32_t r = 0; r < height; ++r)
      for (std::uint32_t c = 0; c < width; ++c)
        image(r, c) = static_cast<float>(static_cast<std::uint8_t>(bytes[pos++]));
  } else {
    for (std::uint32_t r = 0; r < height; ++r)
      for (std::uint32_t c = 0; c < width; ++c)
        image(r, c) = static_cast<float>(parse_u32(next_token(), what));
  }
  return image;
}

IngestedDataset ingest_manifest(const std::filesystem::path& manifest_path,
                                Fetcher& fetcher, const IngestOptions& options) {
  const DatasetManifest manifest = read_manifest(manifest_path);

  auto load_view = [&](const std::string& locator, View view,
                       const std::string& where) -> LocalFeatureMap {
    const std::string payload = fetcher.fetch(locator);
    if (payload.size() >= 4 && payload.compare(0, 4, "TLOC") == 0) {
      LocalFeatureMap map = decode_feature_map(payload, view, locator);
      return map;
    }
    if (payload.size() >= 2 && (payload.compare(0, 2, "P5") == 0 ||
                                payload.compare(0, 2, "P2") == 0)) {
      return extract_grid_descriptors(decode_pgm(payload, locator), options.cell, view);
    }
    throw IoError(IoErrorKind::malformed,
                  where + ": " + locator + " is neither a TLOC descriptor file nor a PGM image");
  };

  IngestedDataset dataset;
  dataset.records.reserve(manifest.records.size());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    const std::string where = "record " + std::to_string(i);
    try {
      IngestedRecord out;
      out.id = rec.id;
      out.geotag = rec.geotag;
      for (View v : kViews)
        out.views[static_cast<std::size_t>(v)] =
            load_view(rec.view_paths[static_cast<std::size_t>(v)], v, where);
      if (rec.perturbed_paths) {
        std::array<LocalFeatureMap, 3> perturbed;
        for (View v : kViews)
          perturbed[static_cast<std::size_t>(v)] =
              load_view((*rec.perturbed_paths)[static_cast<std::size_t>(v)], v, where);
        out.perturbed = std::move(perturbed);
      }
      dataset.records.push_back(std::move(out));
    } catch (const IoError& e) {
      throw IoError(e.kind(), where + ": " + e.what());
    }
  }
  return dataset;
}

IngestedDataset ingest_manifest(const std::filesystem::path& manifest_path,
                                const IngestOptions& options) {
  FileFetcher fetcher(manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                      : std::filesystem::path("."));
  return ingest_manifest(manifest_path, fetcher, options);
}

}  // namespace trinoloc
