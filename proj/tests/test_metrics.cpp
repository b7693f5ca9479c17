#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ramangeo/io.hpp"
#include "ramangeo/metrics.hpp"
#include "ramangeo/rng.hpp"

using namespace ramangeo;
using namespace ramangeo::metrics;

namespace {

geo::SampleRecord natural_record(const std::string& id, const std::string& mineral,
                                 const std::string& country) {
    geo::SampleRecord r;
    r.id = id;
    r.mineral_name = mineral;
    r.latitude = 0.0;
    r.longitude = 0.0;
    r.country = country;
    r.geocode_status = geo::GeocodeStatus::full_match;
    return r;
}

} // namespace

TEST_CASE("confusion matrix layout") {
    auto cm = confusion_matrix({0, 1, 2}, {0, 1, 2}, {"a", "b", "c"});
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t p = 0; p < 3; ++p) {
            CHECK(cm.at(t, p) == (t == p ? 1 : 0));
        }
    }

    auto cm0 = confusion_matrix({0, 0, 0, 0}, {0, 1, 2, 1}, {"a", "b", "c"});
    CHECK(cm0.col_sum(0) == 4);
    CHECK(cm0.col_sum(1) == 0);
    CHECK(cm0.col_sum(2) == 0);

    CHECK_THROWS_AS(confusion_matrix({3}, {0}, {"a", "b"}), IndexError);
    CHECK_THROWS_AS(confusion_matrix({0, 1}, {0}, {"a", "b"}), DimensionError);
}

TEST_CASE("confusion matrix row sums count labels") {
    Rng rng = seeded_rng(7);
    const int classes = 6, n = 500;
    std::vector<int> labels(n), predictions(n), label_counts(classes, 0);
    for (int i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(uniform_below(rng, classes));
        predictions[i] = static_cast<int>(uniform_below(rng, classes));
        ++label_counts[labels[i]];
    }
    auto cm = confusion_matrix(predictions, labels,
                               {"c0", "c1", "c2", "c3", "c4", "c5"});
    CHECK(cm.total() == n);
    for (std::size_t t = 0; t < classes; ++t) CHECK(cm.row_sum(t) == label_counts[t]);
}

TEST_CASE("per-class metrics from definitions") {
    SUBCASE("perfect diagonal") {
        auto cm = confusion_matrix({0, 1, 2, 1}, {0, 1, 2, 1}, {"a", "b", "c"});
        auto report = per_class_metrics(cm);
        CHECK(report.accuracy == 1.0);
        for (const auto& m : report.per_class) {
            CHECK(m.precision == 1.0);
            CHECK(m.recall == 1.0);
            CHECK(m.f1 == 1.0);
        }
        CHECK(report.macro_f1 == 1.0);
    }
    SUBCASE("hand-computed class") {
        // class a: TP=3, FN=2 (predicted b), FP=1 (one b predicted a)
        ConfusionMatrix cm;
        cm.classes = {"a", "b"};
        cm.counts = {3, 2, 1, 4};
        auto report = per_class_metrics(cm);
        CHECK(report.per_class[0].precision == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(report.per_class[0].recall == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(report.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(report.accuracy == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("never predicted, never true") {
        ConfusionMatrix cm;
        cm.classes = {"a", "b", "ghost"};
        cm.counts = {2, 0, 0, 0, 2, 0, 0, 0, 0};
        auto report = per_class_metrics(cm);
        const auto& ghost = report.per_class[2];
        CHECK(ghost.precision == 0.0);
        CHECK(ghost.recall == 0.0);
        CHECK(ghost.f1 == 0.0);
        CHECK_FALSE(ghost.precision_defined);
        CHECK_FALSE(ghost.recall_defined);
        CHECK_FALSE(ghost.f1_defined);
        // ghost has zero support, macro averages ignore it
        CHECK(report.macro_f1 == 1.0);
    }
    SUBCASE("empty matrix") {
        ConfusionMatrix cm;
        CHECK_THROWS_AS(per_class_metrics(cm), EmptyError);
    }
}

TEST_CASE("accuracy is exact integer trace over total") {
    Rng rng = seeded_rng(11);
    std::vector<int> labels, predictions;
    long long agree = 0;
    for (int i = 0; i < 997; ++i) {
        labels.push_back(static_cast<int>(uniform_below(rng, 5)));
        predictions.push_back(static_cast<int>(uniform_below(rng, 5)));
        if (labels.back() == predictions.back()) ++agree;
    }
    auto report = per_class_metrics(
        confusion_matrix(predictions, labels, {"a", "b", "c", "d", "e"}));
    CHECK(report.accuracy == static_cast<double>(agree) / 997.0);
}

TEST_CASE("F1 satisfies the harmonic-mean identity") {
    Rng rng = seeded_rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int classes = 4, n = 120;
        std::vector<int> labels, predictions;
        for (int i = 0; i < n; ++i) {
            labels.push_back(static_cast<int>(uniform_below(rng, classes)));
            predictions.push_back(static_cast<int>(uniform_below(rng, classes)));
        }
        auto report = per_class_metrics(
            confusion_matrix(predictions, labels, {"a", "b", "c", "d"}));
        for (const auto& m : report.per_class) {
            if (m.precision + m.recall > 0.0) {
                CHECK(std::fabs(m.f1 * (m.precision + m.recall) - 2.0 * m.precision * m.recall) <
                      1e-12);
            }
        }
    }
}

TEST_CASE("permuting class order permutes outputs consistently") {
    Rng rng = seeded_rng(17);
    const int n = 200;
    std::vector<int> labels, predictions;
    for (int i = 0; i < n; ++i) {
        labels.push_back(static_cast<int>(uniform_below(rng, 3)));
        predictions.push_back(static_cast<int>(uniform_below(rng, 3)));
    }
    auto base = per_class_metrics(confusion_matrix(predictions, labels, {"a", "b", "c"}));

    // permutation (a,b,c) -> (c,a,b): relabel indices accordingly
    const int perm[3] = {1, 2, 0}; // old index -> new index
    std::vector<int> labels2, predictions2;
    for (int i = 0; i < n; ++i) {
        labels2.push_back(perm[labels[i]]);
        predictions2.push_back(perm[predictions[i]]);
    }
    auto permuted = per_class_metrics(confusion_matrix(predictions2, labels2, {"c", "a", "b"}));

    CHECK(permuted.accuracy == base.accuracy);
    CHECK(permuted.macro_f1 == doctest::Approx(base.macro_f1).epsilon(1e-12));
    for (std::size_t c = 0; c < 3; ++c) {
        const auto it = std::find(permuted.classes.begin(), permuted.classes.end(), base.classes[c]);
        REQUIRE(it != permuted.classes.end());
        const std::size_t j = static_cast<std::size_t>(it - permuted.classes.begin());
        CHECK(permuted.per_class[j].precision == base.per_class[c].precision);
        CHECK(permuted.per_class[j].recall == base.per_class[c].recall);
        CHECK(permuted.per_class[j].f1 == base.per_class[c].f1);
        CHECK(permuted.per_class[j].support == base.per_class[c].support);
    }
}

TEST_CASE("aggregate_folds mean and population std") {
    ConfusionMatrix cm;
    cm.classes = {"a", "b"};
    cm.counts = {9, 1, 1, 9};
    auto r1 = per_class_metrics(cm, 0);
    auto r2 = r1;
    r2.fold = 1;

    SUBCASE("identical reports have zero std") {
        auto [mean, stddev] = aggregate_folds({r1, r2});
        CHECK(mean.accuracy == r1.accuracy);
        CHECK(stddev.accuracy == 0.0);
        CHECK(stddev.per_class[0].f1 == 0.0);
        CHECK(mean.fold == -1);
    }
    SUBCASE("two accuracies") {
        r1.accuracy = 0.9;
        r2.accuracy = 0.95;
        auto [mean, stddev] = aggregate_folds({r1, r2});
        CHECK(mean.accuracy == doctest::Approx(0.925).epsilon(1e-12));
        CHECK(stddev.accuracy == doctest::Approx(0.025).epsilon(1e-12));
    }
    SUBCASE("mismatched class lists") {
        auto bad = r2;
        bad.classes = {"a", "zz"};
        CHECK_THROWS_AS(aggregate_folds({r1, bad}), ConfigError);
    }
}

TEST_CASE("aggregate matches a flat-array statistics oracle") {
    Rng rng = seeded_rng(19);
    std::vector<MetricsReport> reports;
    std::vector<double> f1s_class0;
    for (int fold = 0; fold < 5; ++fold) {
        MetricsReport r;
        r.classes = {"a", "b"};
        r.fold = fold;
        r.total = 10;
        for (int c = 0; c < 2; ++c) {
            ClassMetrics m;
            m.precision = uniform_real(rng);
            m.recall = uniform_real(rng);
            m.f1 = uniform_real(rng);
            m.support = 5;
            r.per_class.push_back(m);
        }
        r.accuracy = uniform_real(rng);
        f1s_class0.push_back(r.per_class[0].f1);
        reports.push_back(std::move(r));
    }
    auto [mean, stddev] = aggregate_folds(reports);

    double m = 0.0;
    for (double v : f1s_class0) m += v;
    m /= 5.0;
    double var = 0.0;
    for (double v : f1s_class0) var += (v - m) * (v - m);
    var /= 5.0;
    CHECK(mean.per_class[0].f1 == doctest::Approx(m).epsilon(1e-12));
    CHECK(stddev.per_class[0].f1 == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("classes absent from a fold are excluded from that fold's mean") {
    MetricsReport r1;
    r1.classes = {"a", "b"};
    r1.per_class.resize(2);
    r1.per_class[0].f1 = 0.8;
    r1.per_class[0].support = 4;
    r1.per_class[1].f1 = 0.0;
    r1.per_class[1].support = 0; // absent
    MetricsReport r2 = r1;
    r2.per_class[1].f1 = 0.6;
    r2.per_class[1].support = 3;

    auto [mean, stddev] = aggregate_folds({r1, r2});
    CHECK(mean.per_class[0].f1 == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(mean.per_class[1].f1 == doctest::Approx(0.6).epsilon(1e-12)); // only fold 2 counts
    CHECK(stddev.per_class[1].f1 == 0.0);
    CHECK(mean.per_class[1].support == 3);
}

TEST_CASE("dataset_stats on a toy manifest") {
    std::vector<geo::SampleRecord> manifest;
    manifest.push_back(natural_record("1", "Quartz", "United States of America"));
    manifest.push_back(natural_record("2", "Quartz", "United States of America"));
    manifest.push_back(natural_record("3", "Diopside", "United States of America"));
    manifest.push_back(natural_record("4", "Beryl", "Canada"));
    auto stats = dataset_stats(manifest);
    CHECK(stats.total == 4);
    CHECK(stats.natural == 4);
    CHECK(stats.synthetic == 0);
    CHECK(stats.with_country == 4);
    CHECK(stats.unique_species == 3);
    REQUIRE(stats.country_counts.size() == 2);
    CHECK(stats.country_counts[0].first == "United States of America");
    CHECK(stats.country_counts[0].second == 3);
    CHECK(stats.country_cumulative_pct[0] == doctest::Approx(75.0).epsilon(1e-12));
    CHECK(stats.country_cumulative_pct[1] == doctest::Approx(100.0).epsilon(1e-12));

    CHECK_THROWS_AS(dataset_stats({}), EmptyError);
}

TEST_CASE("natural and synthetic counts partition the manifest") {
    Rng rng = seeded_rng(23);
    std::vector<geo::SampleRecord> manifest;
    for (int i = 0; i < 40; ++i) {
        auto r = natural_record(std::to_string(i), "Quartz", "Canada");
        r.is_synthetic = uniform_real(rng) < 0.3;
        if (r.is_synthetic) {
            r.country.reset();
            r.latitude.reset();
            r.longitude.reset();
            r.geocode_status = geo::GeocodeStatus::skipped_synthetic;
        }
        manifest.push_back(std::move(r));
    }
    auto stats = dataset_stats(manifest);
    CHECK(stats.natural + stats.synthetic == stats.total);
    CHECK(stats.geocoded + stats.missing_coordinates == stats.total);
}

TEST_CASE("report JSON round-trip is exact") {
    ConfusionMatrix cm;
    cm.classes = {"a", "b", "ghost"};
    cm.counts = {5, 1, 0, 2, 7, 0, 0, 0, 0};
    auto report = per_class_metrics(cm, 3);
    report.loss = 0.4375;

    auto parsed = report_from_json(report_to_json(report));
    CHECK(parsed.classes == report.classes);
    CHECK(parsed.accuracy == report.accuracy);
    CHECK(parsed.macro_f1 == report.macro_f1);
    CHECK(parsed.fold == 3);
    CHECK(parsed.loss == report.loss);
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        CHECK(parsed.per_class[c].precision == report.per_class[c].precision);
        CHECK(parsed.per_class[c].recall == report.per_class[c].recall);
        CHECK(parsed.per_class[c].f1 == report.per_class[c].f1);
        CHECK(parsed.per_class[c].support == report.per_class[c].support);
        CHECK(parsed.per_class[c].f1_defined == report.per_class[c].f1_defined);
    }
}

TEST_CASE("iso3166 mapping spot checks") {
    CHECK(iso3166_alpha3("United States of America") == "USA");
    CHECK(iso3166_alpha3("Dem. Rep. Congo") == "COD");
    CHECK(iso3166_alpha3("Czechia") == "CZE");
    CHECK(iso3166_alpha3("Namibia") == "NAM");
    CHECK(iso3166_alpha3("United Republic of Tanzania") == "TZA");
    CHECK_FALSE(iso3166_alpha3("Atlantis").has_value());
}

TEST_CASE("emit_metrics_report writes csv rows per class") {
    ConfusionMatrix cm;
    cm.classes = {"Brazil", "Canada", "Namibia"};
    cm.counts = {4, 1, 0, 0, 5, 0, 1, 0, 3};
    auto r0 = per_class_metrics(cm, 0);
    auto r1 = per_class_metrics(cm, 1);
    auto [mean, stddev] = aggregate_folds({r0, r1});

    const auto dir = (std::filesystem::temp_directory_path() / "ramangeo_report_test").string();
    std::filesystem::remove_all(dir);
    emit_metrics_report({r0, r1}, mean, stddev, dir, true, "cafe");

    const std::string f1csv = read_text_file(dir + "/per_country_f1.csv");
    int lines = 0;
    for (char c : f1csv) {
        if (c == '\n') ++lines;
    }
    CHECK(lines == 4); // header + 3 data rows

    auto doc = nlohmann::json::parse(read_text_file(dir + "/report.json"));
    CHECK(doc.at("schema_version") == 1);
    CHECK(doc.at("config_hash") == "cafe");
    CHECK(doc.at("folds").size() == 2);
    auto parsed_mean = report_from_json(doc.at("mean"));
    CHECK(parsed_mean.accuracy == mean.accuracy);

    CHECK(std::filesystem::exists(dir + "/per_country_f1.svg"));
    const std::string svg = read_text_file(dir + "/per_country_f1.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("Namibia") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("choropleth codes resolve for Natural-Earth-named fixtures") {
    std::vector<geo::SampleRecord> manifest;
    manifest.push_back(natural_record("1", "Quartz", "United States of America"));
    manifest.push_back(natural_record("2", "Beryl", "Namibia"));
    manifest.push_back(natural_record("3", "Diopside", "Dem. Rep. Congo"));
    auto stats = dataset_stats(manifest);

    const auto dir = (std::filesystem::temp_directory_path() / "ramangeo_stats_test").string();
    std::filesystem::remove_all(dir);
    emit_dataset_stats(stats, dir);

    const std::string choropleth = read_text_file(dir + "/choropleth.csv");
    std::size_t pos = choropleth.find('\n') + 1; // skip header
    while (pos < choropleth.size()) {
        std::size_t eol = choropleth.find('\n', pos);
        if (eol == std::string::npos) eol = choropleth.size();
        const std::string line = choropleth.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        const std::string code = line.substr(0, line.find(','));
        CHECK(code.size() == 3); // every fixture country resolves
    }

    // equal counts fall back to alphabetical order
    const std::string countries = read_text_file(dir + "/top_countries.csv");
    CHECK(countries.find("1,Dem. Rep. Congo,1,") != std::string::npos);
    CHECK(countries.find("3,United States of America,1,") != std::string::npos);
    std::filesystem::remove_all(dir);
}
