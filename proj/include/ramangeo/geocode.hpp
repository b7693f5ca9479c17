#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ramangeo/geo.hpp"

namespace ramangeo::geo {

struct GeocodeHit {
    double lat = 0.0;
    double lon = 0.0;
};

/// Injectable time source so rate limiting is testable with a virtual clock.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    virtual void sleep_ms(std::int64_t ms) = 0;
};

class SystemClock : public Clock {
public:
    std::int64_t now_ms() override;
    void sleep_ms(std::int64_t ms) override;
};

/// Virtual clock for tests: sleeping advances time instantly and is recorded.
class ManualClock : public Clock {
public:
    std::int64_t now_ms() override { return now_; }
    void sleep_ms(std::int64_t ms) override {
        now_ += ms;
        total_slept_ += ms;
        ++sleeps_;
    }
    void advance(std::int64_t ms) { now_ += ms; }
    std::int64_t total_slept() const { return total_slept_; }
    int sleeps() const { return sleeps_; }

private:
    std::int64_t now_ = 0;
    std::int64_t total_slept_ = 0;
    int sleeps_ = 0;
};

class GeocodeProvider {
public:
    virtual ~GeocodeProvider() = default;
    /// Coordinates for the query, or nothing on failure (including timeouts).
    virtual std::optional<GeocodeHit> lookup(const std::string& query) = 0;
    virtual const std::string& name() const = 0;
    virtual int min_interval_ms() const = 0;
};

/// Deterministic query -> answer table for tests and offline runs. Keys are
/// matched case-insensitively; a null table entry is a recorded failure.
class MockProvider : public GeocodeProvider {
public:
    explicit MockProvider(std::map<std::string, std::optional<GeocodeHit>> table,
                          int min_interval_ms = 0);
    static MockProvider from_json_file(const std::string& path, int min_interval_ms = 0);

    std::optional<GeocodeHit> lookup(const std::string& query) override;
    const std::string& name() const override { return name_; }
    int min_interval_ms() const override { return min_interval_ms_; }
    int calls() const { return calls_; }

private:
    std::string name_ = "mock";
    std::map<std::string, std::optional<GeocodeHit>> table_;
    int min_interval_ms_;
    int calls_ = 0;
};

struct HttpProviderConfig {
    std::string host;     // e.g. "nominatim.openstreetmap.org"
    bool https = true;
    int timeout_s = 10;
    int min_interval_ms = 1000;
    std::string api_key;  // ArcGIS token, optional
};

/// The three real services share a GET + JSON shape and differ only in the
/// request path and response fields.
class HttpGeocodeProvider : public GeocodeProvider {
public:
    enum class Service { nominatim, photon, arcgis };

    HttpGeocodeProvider(Service service, HttpProviderConfig config);

    std::optional<GeocodeHit> lookup(const std::string& query) override;
    const std::string& name() const override { return name_; }
    int min_interval_ms() const override { return config_.min_interval_ms; }

private:
    Service service_;
    HttpProviderConfig config_;
    std::string name_;
};

/// Append-only geocode cache keyed by the normalized (lowercased, cleaned)
/// query. Failures are cached too, so warm reruns make zero provider calls.
class GeocodeCache {
public:
    GeocodeCache() = default;                     // in-memory only
    explicit GeocodeCache(const std::string& path); // loads existing, appends new

    static std::string normalize_key(const std::string& query);

    /// outer optional: cache hit?  inner optional: was the lookup a success?
    std::optional<std::optional<GeocodeHit>> find(const std::string& key) const;
    const std::string* provider_of(const std::string& key) const;

    void store(const std::string& key, const std::optional<GeocodeHit>& hit,
               const std::string& provider, std::int64_t timestamp_ms);
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        std::optional<GeocodeHit> hit;
        std::string provider;
    };
    std::unordered_map<std::string, Entry> entries_;
    std::string path_; // empty for in-memory caches
};

struct GeocodeOutcome {
    double lat = 0.0;
    double lon = 0.0;
    std::string provider;
    std::string matched_query;
    int depth = 0; // segments dropped before a match
};

/// Provider chain with per-provider rate limiting and a shared cache. The
/// chain short-circuits on the first valid result.
class Geocoder {
public:
    Geocoder(std::vector<std::shared_ptr<GeocodeProvider>> providers, GeocodeCache* cache,
             Clock* clock);

    /// Full-string lookup (cache first, then the provider chain in order).
    std::optional<GeocodeOutcome> geocode(const std::string& cleaned_query);

    /// Progressive truncation from the front, after a failed full lookup.
    std::optional<GeocodeOutcome> partial_match(const std::string& cleaned_query);

    /// Full lookup, then partial matching.
    std::optional<GeocodeOutcome> resolve(const std::string& cleaned_query);

private:
    void rate_limit(GeocodeProvider& provider);
    std::optional<GeocodeOutcome> chain_lookup(const std::string& query);

    std::vector<std::shared_ptr<GeocodeProvider>> providers_;
    GeocodeCache* cache_;
    Clock* clock_;
    std::unordered_map<const GeocodeProvider*, std::int64_t> last_request_ms_;
};

struct IngestStats {
    long long total = 0;
    long long natural = 0;
    long long synthetic = 0;
    long long geocoded = 0;
    long long failed = 0;
    long long dropped_missing_name = 0;
};

struct ManifestResult {
    std::vector<SampleRecord> rows;
    IngestStats stats;
};

/// clean -> synthetic detection -> geocode -> partial match -> spatial join.
/// Records without a mineral name are dropped; synthetic records skip
/// geocoding entirely.
ManifestResult build_manifest(std::vector<SampleRecord> records, const CountryPolygonSet& countries,
                              Geocoder& geocoder,
                              const std::vector<std::string>& synthetic_keywords =
                                  default_synthetic_keywords(),
                              double coastal_tolerance_deg = 0.1);

} // namespace ramangeo::geo
