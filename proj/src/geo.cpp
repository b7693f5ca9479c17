#include "ramangeo/geo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ramangeo/io.hpp"

namespace ramangeo::geo {

std::string to_string(GeocodeStatus status) {
    switch (status) {
        case GeocodeStatus::full_match: return "full_match";
        case GeocodeStatus::partial_match: return "partial_match";
        case GeocodeStatus::failed: return "failed";
        case GeocodeStatus::skipped_synthetic: return "skipped_synthetic";
    }
    return "failed";
}

GeocodeStatus geocode_status_from_string(const std::string& s) {
    if (s == "full_match") return GeocodeStatus::full_match;
    if (s == "partial_match") return GeocodeStatus::partial_match;
    if (s == "failed") return GeocodeStatus::failed;
    if (s == "skipped_synthetic") return GeocodeStatus::skipped_synthetic;
    throw ParseError("unknown geocode status '" + s + "'");
}

std::string clean_locality(std::string_view s) {
    std::string text(s);

    // drop parenthesized substrings, innermost pair first
    for (;;) {
        const std::size_t close = text.find(')');
        if (close == std::string::npos) break;
        const std::size_t open = text.rfind('(', close);
        if (open == std::string::npos) break;
        text.erase(open, close - open + 1);
    }

    // split on delimiter characters, collapse whitespace inside segments
    std::vector<std::string> segments;
    std::string current;
    auto flush = [&]() {
        while (!current.empty() && current.back() == ' ') current.pop_back();
        if (!current.empty()) segments.push_back(std::move(current));
        current.clear();
    };
    for (char c : text) {
        if (c == ',' || c == ';') {
            flush();
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty() && current.back() != ' ') current += ' ';
            continue;
        }
        current += c;
    }
    flush();

    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i) out += ", ";
        out += segments[i];
    }
    return out;
}

const std::vector<std::string>& default_synthetic_keywords() {
    static const std::vector<std::string> keywords = {"synthetic", "laboratory-grown", "lab-grown",
                                                      "man-made"};
    return keywords;
}

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool word_boundary(const std::string& text, std::size_t pos, std::size_t len) {
    const auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    if (pos > 0 && alnum(text[pos - 1])) return false;
    if (pos + len < text.size() && alnum(text[pos + len])) return false;
    return true;
}

bool contains_keyword(const std::string& haystack_lower, const std::string& keyword_lower) {
    std::size_t pos = 0;
    while ((pos = haystack_lower.find(keyword_lower, pos)) != std::string::npos) {
        if (word_boundary(haystack_lower, pos, keyword_lower.size())) return true;
        ++pos;
    }
    return false;
}

} // namespace

bool detect_synthetic(const SampleRecord& record, const std::vector<std::string>& keywords) {
    const std::string haystack = lowercase(record.locality + " " + record.mineral_name);
    for (const auto& keyword : keywords) {
        if (contains_keyword(haystack, lowercase(keyword))) return true;
    }
    return false;
}

namespace {

Ring parse_ring(const nlohmann::json& coords) {
    Ring ring;
    for (const auto& pt : coords) {
        ring.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
    }
    if (ring.size() >= 2 && (ring.front().lon != ring.back().lon ||
                             ring.front().lat != ring.back().lat)) {
        ring.push_back(ring.front()); // close unclosed rings
    }
    return ring;
}

std::vector<Ring> parse_polygon(const nlohmann::json& coords) {
    std::vector<Ring> rings;
    for (const auto& ring : coords) rings.push_back(parse_ring(ring));
    return rings;
}

} // namespace

CountryPolygonSet parse_country_polygons(const std::string& geojson_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(geojson_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid GeoJSON: " + std::string(e.what()));
    }
    if (doc.value("type", "") != "FeatureCollection") {
        throw ParseError("polygon file is not a GeoJSON FeatureCollection");
    }
    CountryPolygonSet set;
    std::size_t index = 0;
    for (const auto& feature : doc.at("features")) {
        const auto& props = feature.at("properties");
        std::string name;
        if (props.contains("ADMIN")) name = props.at("ADMIN").get<std::string>();
        else if (props.contains("NAME")) name = props.at("NAME").get<std::string>();
        else throw ParseError("feature " + std::to_string(index) + " has no ADMIN or NAME property");

        const auto& geometry = feature.at("geometry");
        const std::string type = geometry.at("type").get<std::string>();
        MultiPolygon shape;
        if (type == "Polygon") {
            shape.polygons.push_back(parse_polygon(geometry.at("coordinates")));
        } else if (type == "MultiPolygon") {
            for (const auto& poly : geometry.at("coordinates")) {
                shape.polygons.push_back(parse_polygon(poly));
            }
        } else {
            throw ParseError("feature '" + name + "' has unsupported geometry type " + type);
        }
        set.entries.push_back({std::move(name), std::move(shape)});
        ++index;
    }
    return set;
}

CountryPolygonSet load_country_polygons(const std::string& path) {
    return parse_country_polygons(read_text_file(path));
}

namespace {

constexpr double kEdgeEps = 1e-12;

bool on_segment(const Point& p, const Point& a, const Point& b) {
    const double dx = b.lon - a.lon, dy = b.lat - a.lat;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) {
        return std::fabs(p.lon - a.lon) <= kEdgeEps && std::fabs(p.lat - a.lat) <= kEdgeEps;
    }
    double t = ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = a.lon + t * dx, qy = a.lat + t * dy;
    const double d2 = (p.lon - qx) * (p.lon - qx) + (p.lat - qy) * (p.lat - qy);
    return d2 <= kEdgeEps * kEdgeEps;
}

double segment_distance(const Point& p, const Point& a, const Point& b) {
    const double dx = b.lon - a.lon, dy = b.lat - a.lat;
    const double len2 = dx * dx + dy * dy;
    double t = len2 == 0.0 ? 0.0 : ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = a.lon + t * dx, qy = a.lat + t * dy;
    return std::hypot(p.lon - qx, p.lat - qy);
}

bool ring_crossings_odd(const Point& p, const Ring& ring) {
    bool odd = false;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point& a = ring[i];
        const Point& b = ring[i + 1];
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            const double x_int = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if (p.lon < x_int) odd = !odd;
        }
    }
    return odd;
}

} // namespace

bool point_in_polygon(const Point& pt, const MultiPolygon& poly) {
    if (!std::isfinite(pt.lon) || !std::isfinite(pt.lat)) return false;
    for (const auto& polygon : poly.polygons) {
        bool inside = false;
        for (const auto& ring : polygon) {
            for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
                if (on_segment(pt, ring[i], ring[i + 1])) return true;
            }
            if (ring_crossings_odd(pt, ring)) inside = !inside;
        }
        if (inside) return true;
    }
    return false;
}

double distance_to_rings(const Point& pt, const MultiPolygon& poly) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& polygon : poly.polygons) {
        for (const auto& ring : polygon) {
            for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
                best = std::min(best, segment_distance(pt, ring[i], ring[i + 1]));
            }
        }
    }
    return best;
}

std::optional<std::string> assign_country(const Point& pt, const CountryPolygonSet& countries,
                                          double tolerance_deg) {
    for (const auto& entry : countries.entries) {
        if (point_in_polygon(pt, entry.shape)) return entry.name;
    }
    if (tolerance_deg > 0.0) {
        const std::string* nearest = nullptr;
        double best = tolerance_deg;
        for (const auto& entry : countries.entries) {
            const double d = distance_to_rings(pt, entry.shape);
            if (d <= best) {
                best = d;
                nearest = &entry.name;
            }
        }
        if (nearest) return *nearest;
    }
    return std::nullopt;
}

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

constexpr const char* kManifestHeader =
    "id,mineral_name,locality_raw,locality_clean,lat,lon,country,is_synthetic,geocode_status,"
    "spectrum_path";

} // namespace

void write_manifest(const std::string& path, const std::vector<SampleRecord>& records) {
    std::ostringstream os;
    os << kManifestHeader << '\n';
    for (const auto& r : records) {
        os << csv_escape(r.id) << ',' << csv_escape(r.mineral_name) << ','
           << csv_escape(r.locality) << ',' << csv_escape(r.locality_clean) << ','
           << (r.latitude ? format_coord(*r.latitude) : "") << ','
           << (r.longitude ? format_coord(*r.longitude) : "") << ','
           << csv_escape(r.country.value_or("")) << ',' << (r.is_synthetic ? "true" : "false")
           << ',' << to_string(r.geocode_status) << ',' << csv_escape(r.spectrum_path) << '\n';
    }
    write_text_file(path, os.str());
}

std::vector<SampleRecord> read_manifest(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<SampleRecord> records;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kManifestHeader) {
                throw ParseError("unexpected manifest header: " + line);
            }
            header_seen = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 10) {
            throw ParseError("manifest row has " + std::to_string(fields.size()) +
                             " fields, expected 10: " + line);
        }
        SampleRecord r;
        r.id = fields[0];
        r.mineral_name = fields[1];
        r.locality = fields[2];
        r.locality_clean = fields[3];
        if (!fields[4].empty()) r.latitude = std::stod(fields[4]);
        if (!fields[5].empty()) r.longitude = std::stod(fields[5]);
        if (!fields[6].empty()) r.country = fields[6];
        r.is_synthetic = fields[7] == "true";
        r.geocode_status = geocode_status_from_string(fields[8]);
        r.spectrum_path = fields[9];
        records.push_back(std::move(r));
    }
    if (!header_seen) throw EmptyError("manifest file is empty: " + path);
    return records;
}

} // namespace ramangeo::geo
