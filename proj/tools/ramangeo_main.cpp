// ramangeo: Raman mineral spectra -> country-of-origin pipeline.
// Subcommands: ingest, preprocess, train, crossval, predict, report.
// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 empty result,
// 5 non-finite loss abort, 1 anything else.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ramangeo/checkpoint.hpp"
#include "ramangeo/geo.hpp"
#include "ramangeo/geocode.hpp"
#include "ramangeo/io.hpp"
#include "ramangeo/metrics.hpp"
#include "ramangeo/model.hpp"
#include "ramangeo/spectra.hpp"
#include "ramangeo/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ramangeo;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool quiet = false;
    bool no_timing = false;
};

struct RunConfig {
    json doc; // merged config document

    std::string path(const std::string& key, const std::string& fallback = "") const {
        if (doc.contains("paths") && doc["paths"].contains(key)) {
            return doc["paths"][key].get<std::string>();
        }
        return fallback;
    }
    std::string out_dir() const { return path("out_dir", "out"); }

    ModelConfig model_config() const {
        return doc.contains("model") ? ModelConfig::from_json(doc["model"]) : ModelConfig{};
    }
    train::TrainConfig train_config() const {
        return doc.contains("train") ? train::TrainConfig::from_json(doc["train"])
                                     : train::TrainConfig{};
    }
    int grid_size() const {
        if (doc.contains("spectra") && doc["spectra"].contains("grid_size")) {
            return doc["spectra"]["grid_size"].get<int>();
        }
        return 4096;
    }
    std::string hash() const { return fnv1a_hex(doc.dump()); }
};

class Log {
public:
    explicit Log(bool quiet) : quiet_(quiet) {}
    template <typename T>
    Log& operator<<(const T& v) {
        if (!quiet_) std::cerr << v;
        return *this;
    }

private:
    bool quiet_;
};

RunConfig load_run_config(const GlobalArgs& args) {
    RunConfig cfg;
    cfg.doc = json::object();
    if (!args.config_path.empty()) {
        if (!fs::exists(args.config_path)) {
            throw IoError("config file not found: " + args.config_path);
        }
        try {
            cfg.doc = json::parse(read_text_file(args.config_path));
        } catch (const json::exception& e) {
            throw ConfigError("invalid config JSON: " + std::string(e.what()));
        }
    }
    // flags win over the config file
    if (args.seed) {
        cfg.doc["seed"] = *args.seed;
        cfg.doc["train"]["seed"] = *args.seed;
    }
    if (args.out_dir) cfg.doc["paths"]["out_dir"] = *args.out_dir;
    return cfg;
}

std::vector<std::shared_ptr<geo::GeocodeProvider>> build_providers(const RunConfig& cfg) {
    std::vector<std::shared_ptr<geo::GeocodeProvider>> providers;
    if (!cfg.doc.contains("ingest") || !cfg.doc["ingest"].contains("providers")) {
        throw ConfigError("no geocode providers configured (ingest.providers)");
    }
    for (const auto& p : cfg.doc["ingest"]["providers"]) {
        const std::string name = p.at("name").get<std::string>();
        if (name == "mock") {
            const std::string table = p.at("table").get<std::string>();
            if (!fs::exists(table)) throw IoError("mock geocoder table not found: " + table);
            providers.push_back(std::make_shared<geo::MockProvider>(
                geo::MockProvider::from_json_file(table, p.value("min_interval_ms", 0))));
            continue;
        }
        geo::HttpProviderConfig hc;
        hc.host = p.value("host", "");
        hc.https = p.value("https", true);
        hc.timeout_s = p.value("timeout_s", 10);
        hc.min_interval_ms = p.value("min_interval_ms", 1000);
        if (name == "arcgis") {
            if (const char* token = std::getenv("RAMANGEO_ARCGIS_TOKEN")) hc.api_key = token;
        }
        if (name == "nominatim") {
            providers.push_back(std::make_shared<geo::HttpGeocodeProvider>(
                geo::HttpGeocodeProvider::Service::nominatim, hc));
        } else if (name == "photon") {
            providers.push_back(std::make_shared<geo::HttpGeocodeProvider>(
                geo::HttpGeocodeProvider::Service::photon, hc));
        } else if (name == "arcgis") {
            providers.push_back(std::make_shared<geo::HttpGeocodeProvider>(
                geo::HttpGeocodeProvider::Service::arcgis, hc));
        } else {
            throw ConfigError("unknown geocode provider '" + name + "'");
        }
    }
    return providers;
}

std::vector<std::string> synthetic_keywords(const RunConfig& cfg) {
    if (cfg.doc.contains("ingest") && cfg.doc["ingest"].contains("synthetic_keywords")) {
        return cfg.doc["ingest"]["synthetic_keywords"].get<std::vector<std::string>>();
    }
    return geo::default_synthetic_keywords();
}

int cmd_ingest(const RunConfig& cfg, Log& log) {
    const std::string spectra_dir = cfg.path("spectra_dir");
    const std::string polygons_path = cfg.path("polygons");
    if (spectra_dir.empty() || !fs::is_directory(spectra_dir)) {
        throw IoError("spectra directory not found: " + spectra_dir);
    }
    if (polygons_path.empty() || !fs::exists(polygons_path)) {
        throw IoError("polygon file not found: " + polygons_path);
    }

    const auto countries = geo::load_country_polygons(polygons_path);

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(spectra_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw EmptyError("no .txt spectra in " + spectra_dir);

    std::vector<geo::SampleRecord> records;
    long long unparseable = 0;
    for (const auto& file : files) {
        try {
            const auto raw = spectra::parse_spectrum_file(read_text_file(file));
            geo::SampleRecord r;
            const auto rid = raw.metadata.find("RRUFFID");
            r.id = rid != raw.metadata.end() && !rid->second.empty()
                       ? rid->second
                       : fs::path(file).stem().string();
            const auto names = raw.metadata.find("NAMES");
            r.mineral_name = names != raw.metadata.end() ? names->second : "";
            const auto locality = raw.metadata.find("LOCALITY");
            r.locality = locality != raw.metadata.end() ? locality->second : "";
            r.spectrum_path = file;
            records.push_back(std::move(r));
        } catch (const Error& e) {
            ++unparseable;
            log << "ingest: skipping unparseable " << file << ": " << e.what() << "\n";
        }
    }

    auto providers = build_providers(cfg);
    const std::string cache_path = cfg.path("cache");
    if (!cache_path.empty()) fs::create_directories(fs::path(cache_path).parent_path());
    geo::GeocodeCache cache = cache_path.empty() ? geo::GeocodeCache() : geo::GeocodeCache(cache_path);
    geo::SystemClock clock;
    geo::Geocoder geocoder(providers, &cache, &clock);

    double tolerance = 0.1;
    if (cfg.doc.contains("ingest")) {
        tolerance = cfg.doc["ingest"].value("coastal_tolerance_deg", 0.1);
    }
    auto result = geo::build_manifest(std::move(records), countries, geocoder,
                                      synthetic_keywords(cfg), tolerance);
    if (result.rows.empty()) throw EmptyError("ingest produced no manifest rows");

    const std::string out = cfg.out_dir();
    fs::create_directories(out);
    geo::write_manifest(out + "/manifest.csv", result.rows);
    const json stats = {{"total", result.stats.total},
                        {"natural", result.stats.natural},
                        {"synthetic", result.stats.synthetic},
                        {"geocoded", result.stats.geocoded},
                        {"failed", result.stats.failed},
                        {"dropped_missing_name", result.stats.dropped_missing_name},
                        {"unparseable_files", unparseable},
                        {"config_hash", cfg.hash()}};
    write_text_file(out + "/ingest_stats.json", stats.dump(2) + "\n");
    log << "ingest: " << result.rows.size() << " manifest rows (" << result.stats.geocoded
        << " geocoded, " << result.stats.failed << " failed, " << result.stats.synthetic
        << " synthetic)\n";
    return 0;
}

int cmd_preprocess(const RunConfig& cfg, Log& log, std::optional<double> wmin_override,
                   std::optional<double> wmax_override) {
    const std::string out = cfg.out_dir();
    const std::string manifest_path = out + "/manifest.csv";
    if (!fs::exists(manifest_path)) throw IoError("manifest not found: " + manifest_path);
    const auto manifest = geo::read_manifest(manifest_path);

    std::vector<const geo::SampleRecord*> eligible;
    for (const auto& r : manifest) {
        const bool matched = r.geocode_status == geo::GeocodeStatus::full_match ||
                             r.geocode_status == geo::GeocodeStatus::partial_match;
        if (!r.is_synthetic && matched && r.country.has_value()) eligible.push_back(&r);
    }
    if (eligible.empty()) throw EmptyError("no geocoded natural samples to preprocess");

    spectra::SpectralWindow window;
    if (wmin_override && wmax_override) {
        window = {*wmin_override, *wmax_override};
        if (window.w_min >= window.w_max) throw ConfigError("window override: w_min >= w_max");
    } else if (wmin_override || wmax_override) {
        throw ConfigError("window override needs both --window-min and --window-max");
    } else {
        spectra::WindowAccumulator acc;
        for (const auto* r : eligible) {
            try {
                acc.add(spectra::parse_spectrum_file(read_text_file(r->spectrum_path)));
            } catch (const Error&) {
                // unreadable file surfaces in the resample pass below
            }
        }
        window = acc.finish();
    }

    spectra::ProcessedDataset dataset;
    dataset.grid_size = cfg.grid_size();
    dataset.window = window;
    dataset.config_hash = cfg.hash();
    for (const auto* r : eligible) {
        try {
            const auto raw = spectra::parse_spectrum_file(read_text_file(r->spectrum_path));
            auto processed = spectra::resample_to_grid(raw, window, dataset.grid_size);
            std::vector<float> row(processed.values.begin(), processed.values.end());
            dataset.rows.push_back(std::move(row));
            dataset.ids.push_back(r->id);
            dataset.countries.push_back(*r->country);
            dataset.minerals.push_back(r->mineral_name);
        } catch (const Error& e) {
            dataset.skipped.emplace_back(r->id, e.what());
        }
    }
    if (dataset.rows.empty()) throw EmptyError("preprocess produced no dataset rows");

    fs::create_directories(out);
    spectra::save_dataset(dataset, out + "/dataset");
    log << "preprocess: " << dataset.rows.size() << " rows on a " << dataset.grid_size
        << "-point grid over [" << window.w_min << ", " << window.w_max << "] cm^-1, "
        << dataset.skipped.size() << " skipped\n";
    return 0;
}

train::Dataset load_training_dataset(const RunConfig& cfg, Log& log) {
    const std::string out = cfg.out_dir();
    if (!fs::exists(out + "/dataset.json")) {
        throw IoError("processed dataset not found: " + out + "/dataset.json");
    }
    const auto stored = spectra::load_dataset(out + "/dataset");

    const auto tc = cfg.train_config();
    auto filtered = train::filter_rare_classes(stored.countries, tc.min_class_count);
    for (const auto& [label, count] : filtered.removed) {
        log << "train: dropping class '" << label << "' with " << count << " sample(s)\n";
    }

    std::set<std::string> label_set;
    for (const std::size_t i : filtered.kept) label_set.insert(stored.countries[i]);

    train::Dataset data;
    data.grid_size = static_cast<std::size_t>(stored.grid_size);
    data.class_labels.assign(label_set.begin(), label_set.end()); // sorted, deterministic
    for (const std::size_t i : filtered.kept) {
        data.x.push_back(stored.rows[i]);
        data.ids.push_back(stored.ids[i]);
        const auto it = std::find(data.class_labels.begin(), data.class_labels.end(),
                                  stored.countries[i]);
        data.y.push_back(static_cast<int>(it - data.class_labels.begin()));
    }
    if (data.class_labels.size() < 2) {
        throw EmptyError("fewer than two classes remain after filtering");
    }
    return data;
}

std::pair<ModelConfig, spectra::SpectralWindow> model_for_dataset(const RunConfig& cfg,
                                                                  const train::Dataset& data) {
    const auto stored = spectra::load_dataset(cfg.out_dir() + "/dataset");
    ModelConfig mc = cfg.model_config();
    mc.num_classes = static_cast<int>(data.class_labels.size());
    mc.input_length = static_cast<int>(data.grid_size);
    mc.validate();
    return {mc, stored.window};
}

int cmd_train(const RunConfig& cfg, Log& log, bool no_timing) {
    auto data = load_training_dataset(cfg, log);
    auto [mc, window] = model_for_dataset(cfg, data);
    auto tc = cfg.train_config();

    auto [train_idx, test_idx] = train::stratified_split(data.y, tc.holdout_fraction, tc.seed);
    log << "train: " << train_idx.size() << " train / " << test_idx.size() << " holdout rows, "
        << data.class_labels.size() << " classes, " << count_params(mc) << " parameters\n";

    train::TrainOptions options;
    options.record_timing = !no_timing;
    auto result = train::train<float>(mc, tc, data, train_idx, test_idx, options);

    const std::string out = cfg.out_dir();
    fs::create_directories(out);
    write_text_file(out + "/history.jsonl", train::history_to_jsonl(result.history));
    save_checkpoint(result.model, out + "/checkpoint.cnx1",
                    {.window = {{window.w_min, window.w_max}}});

    const auto predictions = train::predict_classes(result.model, data, test_idx);
    std::vector<int> labels;
    for (const std::size_t i : test_idx) labels.push_back(data.y[i]);
    auto report = metrics::per_class_metrics(
        metrics::confusion_matrix(predictions, labels, data.class_labels), 0);
    report.loss = train::evaluate_loss(result.model, data, test_idx);
    auto [mean, stddev] = metrics::aggregate_folds({report});
    metrics::emit_metrics_report({report}, mean, stddev, out, true, cfg.hash());

    log << "train: holdout accuracy " << report.accuracy << ", checkpoint at " << out
        << "/checkpoint.cnx1\n";
    return 0;
}

int cmd_crossval(const RunConfig& cfg, Log& log, bool no_timing) {
    auto data = load_training_dataset(cfg, log);
    auto [mc, window] = model_for_dataset(cfg, data);
    auto tc = cfg.train_config();
    log << "crossval: " << tc.folds << " folds over " << data.x.size() << " rows, "
        << data.class_labels.size() << " classes\n";

    auto cv = train::cross_validate<float>(mc, tc, data, !no_timing);

    const std::string out = cfg.out_dir();
    fs::create_directories(out);
    std::string history;
    std::vector<metrics::MetricsReport> reports;
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
        history += train::history_to_jsonl(cv.folds[f].result.history);
        save_checkpoint(cv.folds[f].result.model,
                        out + "/checkpoint_fold" + std::to_string(f) + ".cnx1",
                        {.window = {{window.w_min, window.w_max}}});
        reports.push_back(cv.folds[f].report);
    }
    write_text_file(out + "/history.jsonl", history);
    metrics::emit_metrics_report(reports, cv.mean, cv.stddev, out, true, cfg.hash());
    log << "crossval: mean accuracy " << cv.mean.accuracy << " (std " << cv.stddev.accuracy
        << ")\n";
    return 0;
}

int cmd_predict(Log& log, const std::string& checkpoint_path,
                const std::vector<std::string>& spectra_files, int top_k,
                std::optional<int> grid_override, std::optional<double> wmin_override,
                std::optional<double> wmax_override) {
    auto loaded = load_checkpoint<float>(checkpoint_path);
    const auto& mc = loaded.model.config;
    if (!loaded.extras.window) {
        throw ConfigError("checkpoint lacks the processing window needed to resample inputs");
    }
    spectra::SpectralWindow window{loaded.extras.window->first, loaded.extras.window->second};
    if (grid_override && *grid_override != mc.input_length) {
        throw ConfigError("requested grid " + std::to_string(*grid_override) +
                          " does not match checkpoint grid " + std::to_string(mc.input_length));
    }
    if ((wmin_override && *wmin_override != window.w_min) ||
        (wmax_override && *wmax_override != window.w_max)) {
        throw ConfigError("requested window [" +
                          std::to_string(wmin_override.value_or(window.w_min)) + ", " +
                          std::to_string(wmax_override.value_or(window.w_max)) +
                          "] does not match checkpoint window [" + std::to_string(window.w_min) +
                          ", " + std::to_string(window.w_max) + "]");
    }
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    int k = top_k;
    if (k > mc.num_classes) {
        log << "predict: clamping top_k from " << k << " to " << mc.num_classes << "\n";
        k = mc.num_classes;
    }

    json output = json::array();
    Graph<float> g(false);
    Rng unused = seeded_rng(0);
    for (const auto& file : spectra_files) {
        const auto raw = spectra::parse_spectrum_file(read_text_file(file));
        const auto processed = spectra::resample_to_grid(raw, window, mc.input_length);
        Tensor<float> x({1, static_cast<std::size_t>(mc.input_length)});
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = static_cast<float>(processed.values[i]);
        }
        auto logits = forward_sample(g, loaded.model, make_leaf(std::move(x)), Mode::eval, unused);
        auto probs = softmax(logits->value);

        std::vector<int> order(static_cast<std::size_t>(mc.num_classes));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
        });
        json ranked = json::array();
        for (int i = 0; i < k; ++i) {
            const auto c = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
            ranked.push_back({{"country", loaded.model.class_labels[c]},
                              {"probability", probs[c]}});
        }
        output.push_back({{"file", file}, {"predictions", ranked}});
    }
    std::cout << output.dump(2) << std::endl;
    return 0;
}

int cmd_report(const RunConfig& cfg, Log& log, const std::string& manifest_path) {
    const std::string path = manifest_path.empty() ? cfg.out_dir() + "/manifest.csv" : manifest_path;
    if (!fs::exists(path)) throw IoError("manifest not found: " + path);
    const auto manifest = geo::read_manifest(path);
    auto stats = metrics::dataset_stats(manifest);
    metrics::emit_dataset_stats(stats, cfg.out_dir(), cfg.hash());
    log << "report: " << stats.total << " rows, " << stats.country_counts.size()
        << " countries, " << stats.unique_species << " species; tables in " << cfg.out_dir()
        << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Raman mineral spectra -> country-of-origin pipeline"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "JSON run configuration");
    app.add_option("--seed", args.seed, "Override the global random seed");
    app.add_option("--out", args.out_dir, "Output directory (default: out)");
    app.add_flag("--quiet", args.quiet, "Suppress progress logging");
    app.add_flag("--no-timing", args.no_timing,
                 "Omit wall-clock timings from the training history (byte-reproducible runs)");

    auto* ingest = app.add_subcommand("ingest", "Scan spectra, geocode localities, write manifest");
    auto* preprocess =
        app.add_subcommand("preprocess", "Resample geocoded natural spectra onto the global grid");
    std::optional<double> wmin_override, wmax_override;
    preprocess->add_option("--window-min", wmin_override, "Override the window lower bound (cm^-1)");
    preprocess->add_option("--window-max", wmax_override, "Override the window upper bound (cm^-1)");

    auto* train_cmd = app.add_subcommand("train", "Train on an 80/20 stratified holdout");
    auto* crossval = app.add_subcommand("crossval", "Stratified k-fold cross-validation");

    auto* predict = app.add_subcommand("predict", "Rank countries for spectrum files");
    std::string checkpoint_path;
    std::vector<std::string> predict_files;
    int top_k = 5;
    std::optional<int> grid_override;
    std::optional<double> pwmin, pwmax;
    predict->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    predict->add_option("files", predict_files, "Spectrum files")->required();
    predict->add_option("--top-k", top_k, "Ranked predictions per file (default 5)");
    predict->add_option("--grid", grid_override, "Expected grid size (must match the checkpoint)");
    predict->add_option("--window-min", pwmin, "Expected window minimum (must match)");
    predict->add_option("--window-max", pwmax, "Expected window maximum (must match)");

    auto* report = app.add_subcommand("report", "Dataset statistics tables from a manifest");
    std::string report_manifest;
    report->add_option("--manifest", report_manifest, "Manifest CSV (default: <out>/manifest.csv)");

    CLI11_PARSE(app, argc, argv);

    Log log(args.quiet);
    try {
        const RunConfig cfg = load_run_config(args);
        if (ingest->parsed()) return cmd_ingest(cfg, log);
        if (preprocess->parsed()) return cmd_preprocess(cfg, log, wmin_override, wmax_override);
        if (train_cmd->parsed()) return cmd_train(cfg, log, args.no_timing);
        if (crossval->parsed()) return cmd_crossval(cfg, log, args.no_timing);
        if (predict->parsed()) {
            return cmd_predict(log, checkpoint_path, predict_files, top_k, grid_override,
                               pwmin, pwmax);
        }
        if (report->parsed()) return cmd_report(cfg, log, report_manifest);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const NumericError& e) {
        // training divergence: leave a diagnostics file next to the outputs
        try {
            const RunConfig cfg = load_run_config(args);
            fs::create_directories(cfg.out_dir());
            const json diag = {{"error", e.what()}};
            write_text_file(cfg.out_dir() + "/nan_diagnostics.json", diag.dump(2) + "\n");
            std::cerr << "error: " << e.what() << " (diagnostics: " << cfg.out_dir()
                      << "/nan_diagnostics.json)\n";
        } catch (...) {
            std::cerr << "error: " << e.what() << "\n";
        }
        return 5;
    } catch (const EmptyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ChecksumError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
