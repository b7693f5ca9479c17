#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramangeo/errors.hpp"
#include "ramangeo/geo.hpp"

namespace ramangeo::metrics {

/// Square count matrix indexed [true][predicted] with its class-label order.
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<long long> counts; // classes.size() x classes.size(), row-major

    long long& at(std::size_t truth, std::size_t predicted) {
        return counts[truth * classes.size() + predicted];
    }
    long long at(std::size_t truth, std::size_t predicted) const {
        return counts[truth * classes.size() + predicted];
    }
    long long total() const;
    long long row_sum(std::size_t truth) const;
    long long col_sum(std::size_t predicted) const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& labels,
                                 std::vector<std::string> classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long support = 0;
    // zero-denominator convention: the metric is reported as 0 and flagged
    bool precision_defined = true;
    bool recall_defined = true;
    bool f1_defined = true;
};

struct MetricsReport {
    std::vector<std::string> classes;
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    double macro_precision = 0.0; // over classes with nonzero support
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    long long total = 0;
    int fold = 0; // -1 marks an aggregate
    std::optional<double> loss;
};

MetricsReport per_class_metrics(const ConfusionMatrix& cm, int fold = 0);

/// Elementwise mean and population standard deviation across folds. A class
/// absent from a fold's evaluation set does not contribute to that class's
/// mean; aggregate supports are summed.
std::pair<MetricsReport, MetricsReport> aggregate_folds(const std::vector<MetricsReport>& reports);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// Per-country and per-species tallies over a manifest (Section-3-style
/// statistics). Country shares are relative to natural samples with an
/// assigned country; species are counted over all retained rows.
struct DatasetStats {
    long long total = 0;
    long long natural = 0;
    long long synthetic = 0;
    long long geocoded = 0;
    long long missing_coordinates = 0;
    long long unique_species = 0;
    long long with_country = 0;
    std::vector<std::pair<std::string, long long>> country_counts; // descending
    std::vector<std::pair<std::string, long long>> species_counts; // descending
    std::vector<double> country_cumulative_pct; // aligned with country_counts
};

DatasetStats dataset_stats(const std::vector<geo::SampleRecord>& manifest);

/// Natural Earth admin name -> ISO 3166-1 alpha-3, for the choropleth table.
std::optional<std::string> iso3166_alpha3(const std::string& country_name);

/// report.json plus the per-country bar-chart CSVs; optionally a standalone
/// SVG bar chart of per-class F1.
void emit_metrics_report(const std::vector<MetricsReport>& folds, const MetricsReport& mean,
                         const MetricsReport& stddev, const std::string& out_dir,
                         bool write_svg = false, const std::string& config_hash = "");

/// stats.json, top_countries.csv (with cumulative percentages),
/// top_species.csv, and choropleth.csv keyed by ISO alpha-3.
void emit_dataset_stats(const DatasetStats& stats, const std::string& out_dir,
                        const std::string& config_hash = "");

} // namespace ramangeo::metrics
