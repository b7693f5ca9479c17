// Python bindings for the main pipeline operations: spectrum parsing and
// resampling, locality cleaning and spatial join, checkpoint-backed
// prediction, a small training entry point, and the metrics helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "ramangeo/checkpoint.hpp"
#include "ramangeo/geo.hpp"
#include "ramangeo/io.hpp"
#include "ramangeo/metrics.hpp"
#include "ramangeo/model.hpp"
#include "ramangeo/spectra.hpp"
#include "ramangeo/train.hpp"

namespace py = pybind11;
using namespace ramangeo;

namespace {

py::dict raw_to_dict(const spectra::RawSpectrum& raw) {
    py::dict out;
    out["wavenumbers"] = raw.wavenumbers;
    out["intensities"] = raw.intensities;
    out["metadata"] = raw.metadata;
    return out;
}

ModelConfig model_config_from_json_text(const std::string& text) {
    return ModelConfig::from_json(nlohmann::json::parse(text));
}

train::TrainConfig train_config_from_json_text(const std::string& text) {
    return train::TrainConfig::from_json(nlohmann::json::parse(text));
}

/// Checkpoint-backed classifier for inference from Python.
class Classifier {
public:
    explicit Classifier(const std::string& checkpoint_path)
        : loaded_(load_checkpoint<float>(checkpoint_path)) {}

    explicit Classifier(LoadedCheckpoint<float> loaded) : loaded_(std::move(loaded)) {}

    std::vector<std::string> class_labels() const { return loaded_.model.class_labels; }
    int grid_size() const { return loaded_.model.config.input_length; }

    std::optional<std::pair<double, double>> window() const { return loaded_.extras.window; }

    /// Rank countries for one already-processed grid row.
    std::vector<std::pair<std::string, double>> predict_processed(
        const std::vector<double>& values, int top_k = 5) const {
        const auto& mc = loaded_.model.config;
        if (values.size() != static_cast<std::size_t>(mc.input_length)) {
            throw DimensionError("expected " + std::to_string(mc.input_length) + " values, got " +
                                 std::to_string(values.size()));
        }
        Graph<float> g(false);
        Rng unused = seeded_rng(0);
        Tensor<float> x({1, values.size()});
        for (std::size_t i = 0; i < values.size(); ++i) x[i] = static_cast<float>(values[i]);
        auto logits = forward_sample(g, loaded_.model, make_leaf(std::move(x)), Mode::eval, unused);
        auto probs = softmax(logits->value);

        std::vector<int> order(static_cast<std::size_t>(mc.num_classes));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
        });
        const int k = std::min<int>(top_k, mc.num_classes);
        std::vector<std::pair<std::string, double>> out;
        for (int i = 0; i < k; ++i) {
            const auto c = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
            out.emplace_back(loaded_.model.class_labels[c], static_cast<double>(probs[c]));
        }
        return out;
    }

    /// Parse + resample a spectrum file, then rank countries for it.
    std::vector<std::pair<std::string, double>> predict_file(const std::string& path,
                                                             int top_k = 5) const {
        if (!loaded_.extras.window) {
            throw ConfigError("checkpoint lacks the processing window needed to resample inputs");
        }
        const auto raw = spectra::parse_spectrum_file(read_text_file(path));
        const spectra::SpectralWindow window{loaded_.extras.window->first,
                                             loaded_.extras.window->second};
        const auto processed =
            spectra::resample_to_grid(raw, window, loaded_.model.config.input_length);
        return predict_processed(processed.values, top_k);
    }

    void save(const std::string& path) const { save_checkpoint(loaded_.model, path, loaded_.extras); }

private:
    LoadedCheckpoint<float> loaded_;
};

/// Holdout training over in-memory rows; returns the classifier and the
/// history as JSONL text.
std::pair<Classifier, std::string> train_holdout(
    const std::vector<std::vector<float>>& rows, const std::vector<int>& labels,
    const std::vector<std::string>& class_labels, const std::string& model_config_json,
    const std::string& train_config_json, std::optional<std::pair<double, double>> window) {
    if (rows.empty()) throw EmptyError("train_holdout: no rows");
    train::Dataset data;
    data.grid_size = rows.front().size();
    data.x = rows;
    data.y = labels;
    data.class_labels = class_labels;
    for (std::size_t i = 0; i < rows.size(); ++i) data.ids.push_back(std::to_string(i));

    ModelConfig mc = model_config_from_json_text(model_config_json);
    mc.num_classes = static_cast<int>(class_labels.size());
    mc.input_length = static_cast<int>(data.grid_size);
    train::TrainConfig tc = train_config_from_json_text(train_config_json);

    auto [train_idx, val_idx] = train::stratified_split(data.y, tc.holdout_fraction, tc.seed);
    auto result = train::train<float>(mc, tc, data, train_idx, val_idx, {.record_timing = false});

    CheckpointExtras extras;
    if (window) extras.window = *window;
    LoadedCheckpoint<float> loaded{std::move(result.model), extras};
    return {Classifier(std::move(loaded)), train::history_to_jsonl(result.history)};
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Raman mineral spectra -> country-of-origin pipeline (C++ core)";

    py::register_exception<Error>(m, "RamangeoError");

    m.def(
        "parse_spectrum",
        [](const std::string& text) { return raw_to_dict(spectra::parse_spectrum_file(text)); },
        py::arg("text"), "Parse RRUFF-style spectrum text into wavenumbers/intensities/metadata");

    m.def(
        "parse_spectrum_file",
        [](const std::string& path) {
            return raw_to_dict(spectra::parse_spectrum_file(read_text_file(path)));
        },
        py::arg("path"));

    m.def(
        "resample",
        [](const std::vector<double>& wavenumbers, const std::vector<double>& intensities,
           double w_min, double w_max, int grid_size) {
            spectra::RawSpectrum raw{wavenumbers, intensities, {}};
            return spectra::resample_to_grid(raw, {w_min, w_max}, grid_size).values;
        },
        py::arg("wavenumbers"), py::arg("intensities"), py::arg("w_min"), py::arg("w_max"),
        py::arg("grid_size"),
        "Min-max normalize, spline-interpolate, and resample onto the uniform grid");

    m.def("minmax_normalize", &spectra::minmax_normalize, py::arg("intensities"));
    m.def("clean_locality", [](const std::string& s) { return geo::clean_locality(s); },
          py::arg("locality"));
    m.def(
        "detect_synthetic",
        [](const std::string& mineral_name, const std::string& locality) {
            geo::SampleRecord r;
            r.mineral_name = mineral_name;
            r.locality = locality;
            return geo::detect_synthetic(r);
        },
        py::arg("mineral_name"), py::arg("locality"));

    m.def("iso3166_alpha3", &metrics::iso3166_alpha3, py::arg("country_name"));

    m.def(
        "count_params",
        [](const std::string& model_config_json) {
            return count_params(model_config_from_json_text(model_config_json));
        },
        py::arg("model_config_json"));

    py::class_<geo::CountryPolygonSet>(m, "CountryPolygonSet")
        .def_static("load", &geo::load_country_polygons, py::arg("path"))
        .def("assign",
             [](const geo::CountryPolygonSet& set, double lat, double lon, double tolerance) {
                 return geo::assign_country({lon, lat}, set, tolerance);
             },
             py::arg("lat"), py::arg("lon"), py::arg("tolerance_deg") = 0.1)
        .def("__len__", [](const geo::CountryPolygonSet& set) { return set.entries.size(); });

    py::class_<Classifier>(m, "Classifier")
        .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
        .def_property_readonly("class_labels", &Classifier::class_labels)
        .def_property_readonly("grid_size", &Classifier::grid_size)
        .def_property_readonly("window", &Classifier::window)
        .def("predict_processed", &Classifier::predict_processed, py::arg("values"),
             py::arg("top_k") = 5)
        .def("predict_file", &Classifier::predict_file, py::arg("path"), py::arg("top_k") = 5)
        .def("save", &Classifier::save, py::arg("path"));

    m.def("train_holdout", &train_holdout, py::arg("rows"), py::arg("labels"),
          py::arg("class_labels"), py::arg("model_config_json") = "{}",
          py::arg("train_config_json") = "{}", py::arg("window") = std::nullopt,
          "Train on an in-memory dataset with a stratified holdout; returns "
          "(classifier, history_jsonl)");

    m.def(
        "evaluate",
        [](const std::vector<int>& predictions, const std::vector<int>& labels,
           const std::vector<std::string>& classes) {
            auto report = metrics::per_class_metrics(
                metrics::confusion_matrix(predictions, labels, classes));
            return metrics::report_to_json(report).dump();
        },
        py::arg("predictions"), py::arg("labels"), py::arg("classes"),
        "Confusion-matrix metrics as a JSON string");
}
