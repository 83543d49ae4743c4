#include "trinoloc/geo.hpp"

#include <cmath>
#include <string>

namespace trinoloc {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

GeoTag::GeoTag(double lat_deg, double lon_deg, double heading_deg)
    : lat(lat_deg), lon(lon_deg), heading(normalize_heading(heading_deg)) {
  if (!(lat >= -90.0 && lat <= 90.0))
    throw ValidationError("lat out of range [-90, 90]: " + std::to_string(lat_deg));
  if (!(lon >= -180.0 && lon < 180.0))
    throw ValidationError("lon out of range [-180, 180): " + std::to_string(lon_deg));
}

double normalize_heading(double degrees) {
  if (!std::isfinite(degrees))
    throw ValidationError("heading is not finite");
  double h = std::fmod(degrees, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h = 0.0;  // fmod can round up to 360 for tiny negatives
  return h;
}

double haversine_distance(const GeoTag& a, const GeoTag& b) {
  if (a.lat == b.lat && a.lon == b.lon) return 0.0;
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusMeters * std::asin(std::min(1.0, std::sqrt(h)));
}

bool within_threshold(const GeoTag& pred, const GeoTag& truth, double threshold_m) {
  if (!(threshold_m > 0.0))
    throw ValidationError("threshold must be positive, got " + std::to_string(threshold_m));
  return haversine_distance(pred, truth) <= threshold_m;
}

}  // namespace trinoloc
