#include "ramangeo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "ramangeo/io.hpp"

namespace ramangeo::metrics {

long long ConfusionMatrix::total() const {
    long long t = 0;
    for (long long c : counts) t += c;
    return t;
}

long long ConfusionMatrix::row_sum(std::size_t truth) const {
    long long t = 0;
    for (std::size_t p = 0; p < classes.size(); ++p) t += at(truth, p);
    return t;
}

long long ConfusionMatrix::col_sum(std::size_t predicted) const {
    long long t = 0;
    for (std::size_t r = 0; r < classes.size(); ++r) t += at(r, predicted);
    return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& labels,
                                 std::vector<std::string> classes) {
    if (predictions.size() != labels.size()) {
        throw DimensionError("confusion_matrix: " + std::to_string(predictions.size()) +
                             " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm;
    cm.classes = std::move(classes);
    cm.counts.assign(cm.classes.size() * cm.classes.size(), 0);
    const int c = static_cast<int>(cm.classes.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= c || predictions[i] < 0 || predictions[i] >= c) {
            throw IndexError("confusion_matrix: pair (" + std::to_string(labels[i]) + ", " +
                             std::to_string(predictions[i]) + ") out of range for " +
                             std::to_string(c) + " classes");
        }
        ++cm.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(predictions[i]));
    }
    return cm;
}

MetricsReport per_class_metrics(const ConfusionMatrix& cm, int fold) {
    if (cm.classes.empty()) throw EmptyError("per_class_metrics: empty confusion matrix");
    MetricsReport report;
    report.classes = cm.classes;
    report.fold = fold;
    report.total = cm.total();
    if (report.total == 0) throw EmptyError("per_class_metrics: no evaluated samples");

    long long trace = 0;
    double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
    long long represented = 0;
    for (std::size_t c = 0; c < cm.classes.size(); ++c) {
        ClassMetrics m;
        const long long tp = cm.at(c, c);
        const long long fp = cm.col_sum(c) - tp;
        const long long fn = cm.row_sum(c) - tp;
        m.support = tp + fn;
        trace += tp;

        if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        else m.precision_defined = false;
        if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        else m.recall_defined = false;
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        } else {
            m.f1_defined = false;
        }

        if (m.support > 0) {
            sum_p += m.precision;
            sum_r += m.recall;
            sum_f += m.f1;
            ++represented;
        }
        report.per_class.push_back(m);
    }
    report.accuracy = static_cast<double>(trace) / static_cast<double>(report.total);
    if (represented > 0) {
        report.macro_precision = sum_p / static_cast<double>(represented);
        report.macro_recall = sum_r / static_cast<double>(represented);
        report.macro_f1 = sum_f / static_cast<double>(represented);
    }
    return report;
}

std::pair<MetricsReport, MetricsReport> aggregate_folds(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw EmptyError("aggregate_folds: no reports");
    const auto& classes = reports.front().classes;
    for (const auto& r : reports) {
        if (r.classes != classes) throw ConfigError("aggregate_folds: class lists differ");
    }

    MetricsReport mean, stddev;
    mean.classes = stddev.classes = classes;
    mean.fold = stddev.fold = -1;
    mean.per_class.resize(classes.size());
    stddev.per_class.resize(classes.size());

    auto moments = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= static_cast<double>(xs.size());
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        return std::pair<double, double>(m, std::sqrt(v / static_cast<double>(xs.size())));
    };

    for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<double> ps, rs, fs;
        long long support = 0;
        for (const auto& r : reports) {
            if (r.per_class[c].support == 0) continue; // absent from this fold's validation set
            ps.push_back(r.per_class[c].precision);
            rs.push_back(r.per_class[c].recall);
            fs.push_back(r.per_class[c].f1);
            support += r.per_class[c].support;
        }
        mean.per_class[c].support = stddev.per_class[c].support = support;
        if (ps.empty()) {
            mean.per_class[c].precision_defined = false;
            mean.per_class[c].recall_defined = false;
            mean.per_class[c].f1_defined = false;
            stddev.per_class[c] = mean.per_class[c];
            continue;
        }
        auto [pm, psd] = moments(ps);
        auto [rm, rsd] = moments(rs);
        auto [fm, fsd] = moments(fs);
        mean.per_class[c].precision = pm;
        mean.per_class[c].recall = rm;
        mean.per_class[c].f1 = fm;
        stddev.per_class[c].precision = psd;
        stddev.per_class[c].recall = rsd;
        stddev.per_class[c].f1 = fsd;
    }

    std::vector<double> accs, mps, mrs, mfs, losses;
    long long total = 0;
    for (const auto& r : reports) {
        accs.push_back(r.accuracy);
        mps.push_back(r.macro_precision);
        mrs.push_back(r.macro_recall);
        mfs.push_back(r.macro_f1);
        if (r.loss) losses.push_back(*r.loss);
        total += r.total;
    }
    mean.total = stddev.total = total;
    auto [am, asd] = moments(accs);
    auto [pm, psd] = moments(mps);
    auto [rm, rsd] = moments(mrs);
    auto [fm, fsd] = moments(mfs);
    mean.accuracy = am;
    stddev.accuracy = asd;
    mean.macro_precision = pm;
    stddev.macro_precision = psd;
    mean.macro_recall = rm;
    stddev.macro_recall = rsd;
    mean.macro_f1 = fm;
    stddev.macro_f1 = fsd;
    if (losses.size() == reports.size()) {
        auto [lm, lsd] = moments(losses);
        mean.loss = lm;
        stddev.loss = lsd;
    }
    return {mean, stddev};
}

nlohmann::json report_to_json(const MetricsReport& report) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        const auto& m = report.per_class[c];
        per_class.push_back({{"class", report.classes[c]},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support},
                             {"precision_defined", m.precision_defined},
                             {"recall_defined", m.recall_defined},
                             {"f1_defined", m.f1_defined}});
    }
    nlohmann::json j = {{"fold", report.fold},
                        {"accuracy", report.accuracy},
                        {"macro_precision", report.macro_precision},
                        {"macro_recall", report.macro_recall},
                        {"macro_f1", report.macro_f1},
                        {"total", report.total},
                        {"per_class", per_class}};
    if (report.loss) j["loss"] = *report.loss;
    return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport report;
    report.fold = j.at("fold").get<int>();
    report.accuracy = j.at("accuracy").get<double>();
    report.macro_precision = j.at("macro_precision").get<double>();
    report.macro_recall = j.at("macro_recall").get<double>();
    report.macro_f1 = j.at("macro_f1").get<double>();
    report.total = j.at("total").get<long long>();
    if (j.contains("loss")) report.loss = j.at("loss").get<double>();
    for (const auto& entry : j.at("per_class")) {
        report.classes.push_back(entry.at("class").get<std::string>());
        ClassMetrics m;
        m.precision = entry.at("precision").get<double>();
        m.recall = entry.at("recall").get<double>();
        m.f1 = entry.at("f1").get<double>();
        m.support = entry.at("support").get<long long>();
        m.precision_defined = entry.at("precision_defined").get<bool>();
        m.recall_defined = entry.at("recall_defined").get<bool>();
        m.f1_defined = entry.at("f1_defined").get<bool>();
        report.per_class.push_back(m);
    }
    return report;
}

DatasetStats dataset_stats(const std::vector<geo::SampleRecord>& manifest) {
    if (manifest.empty()) throw EmptyError("dataset_stats: empty manifest");
    DatasetStats stats;
    std::map<std::string, long long> countries;
    std::map<std::string, long long> species;
    for (const auto& r : manifest) {
        ++stats.total;
        if (r.is_synthetic) ++stats.synthetic;
        else ++stats.natural;
        if (r.latitude && r.longitude) ++stats.geocoded;
        else ++stats.missing_coordinates;
        if (!r.mineral_name.empty()) ++species[r.mineral_name];
        if (!r.is_synthetic && r.country) {
            ++countries[*r.country];
            ++stats.with_country;
        }
    }
    stats.unique_species = static_cast<long long>(species.size());

    auto by_count_desc = [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    stats.country_counts.assign(countries.begin(), countries.end());
    std::sort(stats.country_counts.begin(), stats.country_counts.end(), by_count_desc);
    stats.species_counts.assign(species.begin(), species.end());
    std::sort(stats.species_counts.begin(), stats.species_counts.end(), by_count_desc);

    long long running = 0;
    for (const auto& [name, count] : stats.country_counts) {
        running += count;
        stats.country_cumulative_pct.push_back(
            100.0 * static_cast<double>(running) / static_cast<double>(stats.with_country));
    }
    return stats;
}

namespace {

std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    return out + "\"";
}

std::string svg_bar_chart(const MetricsReport& mean, const std::string& metric_name) {
    // classes with nonzero support, one bar each
    std::vector<std::pair<std::string, double>> bars;
    for (std::size_t c = 0; c < mean.classes.size(); ++c) {
        if (mean.per_class[c].support > 0) bars.emplace_back(mean.classes[c], mean.per_class[c].f1);
    }
    const int bar_w = 28, gap = 10, left = 60, bottom = 70, top = 20;
    const int height = 260;
    const int width = left + static_cast<int>(bars.size()) * (bar_w + gap) + 20;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height + bottom << "\">\n";
    os << "<text x=\"10\" y=\"14\" font-size=\"12\">" << metric_name << "</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = tick / 4.0;
        const int y = top + static_cast<int>((1.0 - frac) * (height - top));
        os << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << width << "\" y2=\"" << y
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << 8 << "\" y=\"" << y + 4 << "\" font-size=\"10\">" << format_pct(frac * 100)
           << "%</text>\n";
    }
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const int x = left + static_cast<int>(i) * (bar_w + gap);
        const int h = static_cast<int>(bars[i].second * (height - top));
        os << "<rect x=\"" << x << "\" y=\"" << height - h << "\" width=\"" << bar_w << "\" height=\""
           << h << "\" fill=\"#4878a8\"/>\n";
        os << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << height + 12
           << "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-45 " << x + bar_w / 2 << ' '
           << height + 12 << ")\">" << bars[i].first << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace

void emit_metrics_report(const std::vector<MetricsReport>& folds, const MetricsReport& mean,
                         const MetricsReport& stddev, const std::string& out_dir, bool write_svg,
                         const std::string& config_hash) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json fold_array = nlohmann::json::array();
    for (const auto& r : folds) fold_array.push_back(report_to_json(r));
    const nlohmann::json doc = {{"schema_version", 1},
                                {"config_hash", config_hash},
                                {"folds", fold_array},
                                {"mean", report_to_json(mean)},
                                {"stddev", report_to_json(stddev)}};
    write_text_file(out_dir + "/report.json", doc.dump(2) + "\n");

    // per-country bar chart data, classes with nonzero aggregate support only
    std::ostringstream f1csv, pcsv;
    f1csv << "country,f1_mean,f1_std,support\n";
    pcsv << "country,precision_mean,precision_std,support\n";
    for (std::size_t c = 0; c < mean.classes.size(); ++c) {
        if (mean.per_class[c].support == 0) continue;
        f1csv << csv_field(mean.classes[c]) << ',' << mean.per_class[c].f1 << ','
              << stddev.per_class[c].f1 << ',' << mean.per_class[c].support << '\n';
        pcsv << csv_field(mean.classes[c]) << ',' << mean.per_class[c].precision << ','
             << stddev.per_class[c].precision << ',' << mean.per_class[c].support << '\n';
    }
    write_text_file(out_dir + "/per_country_f1.csv", f1csv.str());
    write_text_file(out_dir + "/per_country_precision.csv", pcsv.str());

    if (write_svg) {
        write_text_file(out_dir + "/per_country_f1.svg", svg_bar_chart(mean, "mean F1 by country"));
    }
}

void emit_dataset_stats(const DatasetStats& stats, const std::string& out_dir,
                        const std::string& config_hash) {
    std::filesystem::create_directories(out_dir);

    nlohmann::json country_rows = nlohmann::json::array();
    for (std::size_t i = 0; i < stats.country_counts.size(); ++i) {
        country_rows.push_back({{"country", stats.country_counts[i].first},
                                {"count", stats.country_counts[i].second},
                                {"cumulative_pct", stats.country_cumulative_pct[i]}});
    }
    nlohmann::json species_rows = nlohmann::json::array();
    for (const auto& [name, count] : stats.species_counts) {
        species_rows.push_back({{"species", name}, {"count", count}});
    }
    const nlohmann::json doc = {{"schema_version", 1},
                                {"config_hash", config_hash},
                                {"total", stats.total},
                                {"natural", stats.natural},
                                {"synthetic", stats.synthetic},
                                {"geocoded", stats.geocoded},
                                {"missing_coordinates", stats.missing_coordinates},
                                {"unique_species", stats.unique_species},
                                {"with_country", stats.with_country},
                                {"countries", country_rows},
                                {"species", species_rows}};
    write_text_file(out_dir + "/stats.json", doc.dump(2) + "\n");

    std::ostringstream countries_csv;
    countries_csv << "rank,country,sample_count,cumulative_percentage\n";
    for (std::size_t i = 0; i < stats.country_counts.size(); ++i) {
        countries_csv << (i + 1) << ',' << csv_field(stats.country_counts[i].first) << ','
                      << stats.country_counts[i].second << ','
                      << format_pct(stats.country_cumulative_pct[i]) << '\n';
    }
    write_text_file(out_dir + "/top_countries.csv", countries_csv.str());

    std::ostringstream species_csv;
    species_csv << "rank,species,sample_count\n";
    for (std::size_t i = 0; i < stats.species_counts.size(); ++i) {
        species_csv << (i + 1) << ',' << csv_field(stats.species_counts[i].first) << ','
                    << stats.species_counts[i].second << '\n';
    }
    write_text_file(out_dir + "/top_species.csv", species_csv.str());

    std::ostringstream choropleth;
    choropleth << "iso_a3,country,natural_sample_count\n";
    for (const auto& [name, count] : stats.country_counts) {
        const auto iso = iso3166_alpha3(name);
        choropleth << (iso ? *iso : "") << ',' << csv_field(name) << ',' << count << '\n';
    }
    write_text_file(out_dir + "/choropleth.csv", choropleth.str());
}

} // namespace ramangeo::metrics
