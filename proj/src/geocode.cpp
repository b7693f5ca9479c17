#include "ramangeo/geocode.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#ifdef RAMANGEO_ENABLE_HTTP
#include <httplib.h>
#endif

#include "ramangeo/io.hpp"

namespace ramangeo::geo {

std::int64_t SystemClock::now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void SystemClock::sleep_ms(std::int64_t ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool valid_coordinates(const GeocodeHit& hit) {
    return hit.lat >= -90.0 && hit.lat <= 90.0 && hit.lon >= -180.0 && hit.lon <= 180.0;
}

} // namespace

MockProvider::MockProvider(std::map<std::string, std::optional<GeocodeHit>> table,
                           int min_interval_ms)
    : min_interval_ms_(min_interval_ms) {
    for (auto& [key, value] : table) table_[lowercase(key)] = value;
}

MockProvider MockProvider::from_json_file(const std::string& path, int min_interval_ms) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid mock geocoder table: " + std::string(e.what()));
    }
    std::map<std::string, std::optional<GeocodeHit>> table;
    for (const auto& [key, value] : doc.items()) {
        if (value.is_null()) {
            table[key] = std::nullopt;
        } else {
            table[key] = GeocodeHit{value.at("lat").get<double>(), value.at("lon").get<double>()};
        }
    }
    return MockProvider(std::move(table), min_interval_ms);
}

std::optional<GeocodeHit> MockProvider::lookup(const std::string& query) {
    ++calls_;
    const auto it = table_.find(lowercase(query));
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

HttpGeocodeProvider::HttpGeocodeProvider(Service service, HttpProviderConfig config)
    : service_(service), config_(std::move(config)) {
    switch (service_) {
        case Service::nominatim:
            name_ = "nominatim";
            if (config_.host.empty()) config_.host = "nominatim.openstreetmap.org";
            break;
        case Service::photon:
            name_ = "photon";
            if (config_.host.empty()) config_.host = "photon.komoot.io";
            break;
        case Service::arcgis:
            name_ = "arcgis";
            if (config_.host.empty()) config_.host = "geocode.arcgis.com";
            break;
    }
}

#ifdef RAMANGEO_ENABLE_HTTP

namespace {

std::string url_encode(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xF];
        }
    }
    return out;
}

std::optional<std::string> http_get(const HttpProviderConfig& config, const std::string& path) {
    const std::string scheme = config.https ? "https://" : "http://";
    httplib::Client client(scheme + config.host);
    client.set_connection_timeout(config.timeout_s, 0);
    client.set_read_timeout(config.timeout_s, 0);
    client.set_follow_location(true);
    httplib::Headers headers = {{"User-Agent", "ramangeo/0.1 (mineral locality geocoding)"}};
    auto res = client.Get(path, headers);
    if (!res || res->status != 200) return std::nullopt;
    return res->body;
}

} // namespace

std::optional<GeocodeHit> HttpGeocodeProvider::lookup(const std::string& query) {
    std::string path;
    switch (service_) {
        case Service::nominatim:
            path = "/search?format=jsonv2&limit=1&q=" + url_encode(query);
            break;
        case Service::photon:
            path = "/api?limit=1&q=" + url_encode(query);
            break;
        case Service::arcgis:
            path = "/arcgis/rest/services/World/GeocodeServer/findAddressCandidates?f=json"
                   "&maxLocations=1&SingleLine=" +
                   url_encode(query);
            if (!config_.api_key.empty()) path += "&token=" + url_encode(config_.api_key);
            break;
    }
    const auto body = http_get(config_, path);
    if (!body) return std::nullopt;
    try {
        const auto doc = nlohmann::json::parse(*body);
        switch (service_) {
            case Service::nominatim: {
                if (!doc.is_array() || doc.empty()) return std::nullopt;
                return GeocodeHit{std::stod(doc[0].at("lat").get<std::string>()),
                                  std::stod(doc[0].at("lon").get<std::string>())};
            }
            case Service::photon: {
                const auto& features = doc.at("features");
                if (features.empty()) return std::nullopt;
                const auto& coords = features[0].at("geometry").at("coordinates");
                return GeocodeHit{coords.at(1).get<double>(), coords.at(0).get<double>()};
            }
            case Service::arcgis: {
                const auto& candidates = doc.at("candidates");
                if (candidates.empty()) return std::nullopt;
                const auto& loc = candidates[0].at("location");
                return GeocodeHit{loc.at("y").get<double>(), loc.at("x").get<double>()};
            }
        }
    } catch (const std::exception&) {
        return std::nullopt; // malformed response counts as a provider failure
    }
    return std::nullopt;
}

#else

std::optional<GeocodeHit> HttpGeocodeProvider::lookup(const std::string&) {
    return std::nullopt; // built without HTTP support
}

#endif

std::string GeocodeCache::normalize_key(const std::string& query) {
    return lowercase(query);
}

GeocodeCache::GeocodeCache(const std::string& path) : path_(path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError&) {
        return; // fresh cache file
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corrupt geocode cache line: " + std::string(e.what()));
        }
        Entry entry;
        entry.provider = rec.value("provider", "");
        if (rec.contains("lat") && !rec.at("lat").is_null()) {
            entry.hit = GeocodeHit{rec.at("lat").get<double>(), rec.at("lon").get<double>()};
        }
        entries_[rec.at("query").get<std::string>()] = std::move(entry);
    }
}

std::optional<std::optional<GeocodeHit>> GeocodeCache::find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.hit;
}

const std::string* GeocodeCache::provider_of(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second.provider;
}

void GeocodeCache::store(const std::string& key, const std::optional<GeocodeHit>& hit,
                         const std::string& provider, std::int64_t timestamp_ms) {
    entries_[key] = Entry{hit, provider};
    if (path_.empty()) return;
    nlohmann::json rec = {{"query", key},
                          {"lat", hit ? nlohmann::json(hit->lat) : nlohmann::json(nullptr)},
                          {"lon", hit ? nlohmann::json(hit->lon) : nlohmann::json(nullptr)},
                          {"provider", provider},
                          {"timestamp", timestamp_ms}};
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to geocode cache: " + path_);
    out << rec.dump() << '\n';
}

Geocoder::Geocoder(std::vector<std::shared_ptr<GeocodeProvider>> providers, GeocodeCache* cache,
                   Clock* clock)
    : providers_(std::move(providers)), cache_(cache), clock_(clock) {}

void Geocoder::rate_limit(GeocodeProvider& provider) {
    const int interval = provider.min_interval_ms();
    if (interval <= 0) return;
    const auto it = last_request_ms_.find(&provider);
    const std::int64_t now = clock_->now_ms();
    if (it != last_request_ms_.end() && now < it->second + interval) {
        clock_->sleep_ms(it->second + interval - now);
    }
    last_request_ms_[&provider] = clock_->now_ms();
}

std::optional<GeocodeOutcome> Geocoder::chain_lookup(const std::string& query) {
    const std::string key = GeocodeCache::normalize_key(query);
    if (cache_) {
        if (const auto cached = cache_->find(key)) {
            if (!*cached) return std::nullopt;
            const std::string* provider = cache_->provider_of(key);
            return GeocodeOutcome{(*cached)->lat, (*cached)->lon,
                                  provider ? *provider : std::string("cache"), query, 0};
        }
    }
    for (const auto& provider : providers_) {
        rate_limit(*provider);
        const auto hit = provider->lookup(query);
        if (hit && valid_coordinates(*hit)) {
            if (cache_) cache_->store(key, hit, provider->name(), clock_->now_ms());
            return GeocodeOutcome{hit->lat, hit->lon, provider->name(), query, 0};
        }
        // invalid coordinates are treated exactly like a failure: fall through
    }
    if (cache_) cache_->store(key, std::nullopt, "", clock_->now_ms());
    return std::nullopt;
}

std::optional<GeocodeOutcome> Geocoder::geocode(const std::string& cleaned_query) {
    if (cleaned_query.empty()) return std::nullopt;
    return chain_lookup(cleaned_query);
}

std::optional<GeocodeOutcome> Geocoder::partial_match(const std::string& cleaned_query) {
    std::vector<std::string> segments;
    std::size_t pos = 0;
    while (pos <= cleaned_query.size()) {
        const std::size_t sep = cleaned_query.find(", ", pos);
        if (sep == std::string::npos) {
            segments.push_back(cleaned_query.substr(pos));
            break;
        }
        segments.push_back(cleaned_query.substr(pos, sep - pos));
        pos = sep + 2;
    }
    for (std::size_t depth = 1; depth < segments.size(); ++depth) {
        std::string sub;
        for (std::size_t i = depth; i < segments.size(); ++i) {
            if (i > depth) sub += ", ";
            sub += segments[i];
        }
        if (auto outcome = chain_lookup(sub)) {
            outcome->depth = static_cast<int>(depth);
            return outcome;
        }
    }
    return std::nullopt;
}

std::optional<GeocodeOutcome> Geocoder::resolve(const std::string& cleaned_query) {
    if (auto full = geocode(cleaned_query)) return full;
    if (cleaned_query.empty()) return std::nullopt;
    return partial_match(cleaned_query);
}

ManifestResult build_manifest(std::vector<SampleRecord> records,
                              const CountryPolygonSet& countries, Geocoder& geocoder,
                              const std::vector<std::string>& synthetic_keywords,
                              double coastal_tolerance_deg) {
    ManifestResult result;
    for (auto& record : records) {
        ++result.stats.total;
        if (record.mineral_name.empty()) {
            ++result.stats.dropped_missing_name;
            continue;
        }
        record.locality_clean = clean_locality(record.locality);
        record.is_synthetic = detect_synthetic(record, synthetic_keywords);
        if (record.is_synthetic) {
            ++result.stats.synthetic;
            record.geocode_status = GeocodeStatus::skipped_synthetic;
            result.rows.push_back(std::move(record));
            continue;
        }
        ++result.stats.natural;

        const auto outcome = geocoder.resolve(record.locality_clean);
        if (outcome) {
            record.latitude = outcome->lat;
            record.longitude = outcome->lon;
            record.geocode_status =
                outcome->depth == 0 ? GeocodeStatus::full_match : GeocodeStatus::partial_match;
            ++result.stats.geocoded;
            record.country = assign_country({outcome->lon, outcome->lat}, countries,
                                            coastal_tolerance_deg);
        } else {
            record.geocode_status = GeocodeStatus::failed;
            ++result.stats.failed;
        }
        result.rows.push_back(std::move(record));
    }
    return result;
}

} // namespace ramangeo::geo
