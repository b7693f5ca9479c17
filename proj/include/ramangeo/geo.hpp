#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ramangeo/errors.hpp"

namespace ramangeo::geo {

enum class GeocodeStatus { full_match, partial_match, failed, skipped_synthetic };

std::string to_string(GeocodeStatus status);
GeocodeStatus geocode_status_from_string(const std::string& s);

/// One mineral sample's metadata as it flows through ingest.
struct SampleRecord {
    std::string id;
    std::string mineral_name;
    std::string locality;       // raw, as found in the file
    std::string locality_clean; // after clean_locality
    std::optional<double> latitude;
    std::optional<double> longitude;
    std::optional<std::string> country;
    bool is_synthetic = false;
    std::string spectrum_path;
    GeocodeStatus geocode_status = GeocodeStatus::failed;
};

/// Remove parenthesized text (nested pairs innermost-out), collapse
/// whitespace runs, normalize ','/';' delimiter runs to ", ", and trim
/// leading/trailing separators. Idempotent.
std::string clean_locality(std::string_view s);

const std::vector<std::string>& default_synthetic_keywords();

/// Case-insensitive whole-word search of the keywords over the locality and
/// mineral-name fields. Word boundaries are non-alphanumeric characters, so
/// "photosynthetic" does not match "synthetic".
bool detect_synthetic(const SampleRecord& record,
                      const std::vector<std::string>& keywords = default_synthetic_keywords());

struct Point {
    double lon = 0.0;
    double lat = 0.0;
};

using Ring = std::vector<Point>; // closed: first vertex == last

/// Polygons each hold an outer ring followed by interior (hole) rings.
struct MultiPolygon {
    std::vector<std::vector<Ring>> polygons;
};

struct CountryPolygonSet {
    struct Entry {
        std::string name;
        MultiPolygon shape;
    };
    std::vector<Entry> entries;
};

/// GeoJSON FeatureCollection with Polygon/MultiPolygon geometries; country
/// names come from properties "ADMIN", falling back to "NAME".
CountryPolygonSet load_country_polygons(const std::string& path);
CountryPolygonSet parse_country_polygons(const std::string& geojson_text);

/// Even-odd ray casting over all rings; points on any edge count as inside,
/// interior rings subtract.
bool point_in_polygon(const Point& pt, const MultiPolygon& poly);

/// Euclidean (degree-space) distance from the point to the nearest ring
/// segment of the shape.
double distance_to_rings(const Point& pt, const MultiPolygon& poly);

/// First containing polygon's country, else the nearest country within
/// tolerance_deg (coastal geocode fallback), else nothing.
std::optional<std::string> assign_country(const Point& pt, const CountryPolygonSet& countries,
                                          double tolerance_deg = 0.1);

/// Manifest CSV: id, mineral_name, locality_raw, locality_clean, lat, lon,
/// country, is_synthetic, geocode_status, spectrum_path.
void write_manifest(const std::string& path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_manifest(const std::string& path);

} // namespace ramangeo::geo
