#pragma once

#include "trinoloc/errors.hpp"

namespace trinoloc {

inline constexpr double kEarthRadiusMeters = 6'371'000.0;

/// WGS84 position plus camera heading in degrees clockwise from true north.
/// Heading is normalized to [0, 360) on construction; latitude/longitude are
/// validated against their legal ranges.
struct GeoTag {
  double lat = 0.0;      // degrees, [-90, 90]
  double lon = 0.0;      // degrees, [-180, 180)
  double heading = 0.0;  // degrees, [0, 360)

  GeoTag() = default;
  GeoTag(double lat_deg, double lon_deg, double heading_deg = 0.0);
};

/// Wraps an arbitrary finite angle into [0, 360).
double normalize_heading(double degrees);

/// Great-circle distance in meters over the mean Earth radius.
/// Symmetric; zero iff the two points share lat/lon. Heading is ignored.
double haversine_distance(const GeoTag& a, const GeoTag& b);

/// True iff the prediction lies within `threshold_m` meters of the truth.
bool within_threshold(const GeoTag& pred, const GeoTag& truth, double threshold_m);

}  // namespace trinoloc
