#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramangeo/errors.hpp"
#include "ramangeo/metrics.hpp"
#include "ramangeo/model.hpp"
#include "ramangeo/rng.hpp"

namespace ramangeo::train {

enum class OptimizerKind { schedule_free_adamw, adamw };

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.35;
    int folds = 5;
    double holdout_fraction = 0.2;
    int batch_size = 64;
    int epochs = 100;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::schedule_free_adamw;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int min_class_count = 2;

    void validate() const {
        if (learning_rate < 0.0) throw ConfigError("train: learning_rate must be >= 0");
        if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
        if (folds < 2) throw ConfigError("train: folds must be >= 2");
        if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
            throw ConfigError("train: holdout_fraction must be in (0, 1)");
        }
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (clip_norm <= 0.0) throw ConfigError("train: clip_norm must be > 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
            throw ConfigError("train: betas must be in [0, 1)");
        }
        if (eps <= 0.0) throw ConfigError("train: eps must be > 0");
        if (min_class_count < 1) throw ConfigError("train: min_class_count must be >= 1");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"learning_rate", learning_rate},
            {"weight_decay", weight_decay},
            {"folds", folds},
            {"holdout_fraction", holdout_fraction},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"clip_norm", clip_norm},
            {"seed", seed},
            {"optimizer",
             optimizer == OptimizerKind::schedule_free_adamw ? "schedule_free_adamw" : "adamw"},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"min_class_count", min_class_count}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
        if (j.contains("folds")) c.folds = j.at("folds").get<int>();
        if (j.contains("holdout_fraction")) c.holdout_fraction = j.at("holdout_fraction").get<double>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
        if (j.contains("clip_norm")) c.clip_norm = j.at("clip_norm").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("optimizer")) {
            const auto name = j.at("optimizer").get<std::string>();
            if (name == "schedule_free_adamw") c.optimizer = OptimizerKind::schedule_free_adamw;
            else if (name == "adamw") c.optimizer = OptimizerKind::adamw;
            else throw ConfigError("train: unknown optimizer '" + name + "'");
        }
        if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
        if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
        if (j.contains("eps")) c.eps = j.at("eps").get<double>();
        if (j.contains("min_class_count")) c.min_class_count = j.at("min_class_count").get<int>();
        return c;
    }
};

/// Processed spectra with integer class labels, ready for training.
struct Dataset {
    std::size_t grid_size = 0;
    std::vector<std::vector<float>> x;
    std::vector<int> y;
    std::vector<std::string> class_labels;
    std::vector<std::string> ids;
};

struct FilterResult {
    std::vector<std::size_t> kept;                 // indices into the input rows
    std::map<std::string, long long> removed;      // per removed class
};

/// Keep rows whose class has at least min_count samples.
FilterResult filter_rare_classes(const std::vector<std::string>& labels, int min_count = 2);

/// Seeded per-class split; the test share of every class is within one
/// sample of holdout_fraction and every class keeps at least one training row.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<int>& labels, double holdout_fraction, std::uint64_t seed);

/// Per-sample validation-fold index in [0, k); per-class fold counts differ
/// by at most one.
std::vector<int> stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

/// Global L2 clipping across all gradients; returns the pre-clip norm.
template <typename T>
double clip_grad_norm(const std::vector<NodePtr<T>>& params, double max_norm) {
    if (max_norm <= 0.0) throw ValueError("clip_grad_norm: max_norm must be > 0");
    double sq = 0.0;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) {
            sq += static_cast<double>(p->grad[i]) * static_cast<double>(p->grad[i]);
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const T scale = static_cast<T>(max_norm / norm);
        for (const auto& p : params) {
            for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
        }
    }
    return norm;
}

/// Decoupled-weight-decay Adam and its schedule-free variant. Both exclude
/// layer-norm affines, biases, and layer-scale gammas from decay. The
/// schedule-free optimizer keeps a base iterate z and the running average x;
/// model parameters hold the gradient-evaluation point y between steps, and
/// eval_mode()/train_mode() swap x in and out.
template <typename T>
class Optimizer {
public:
    explicit Optimizer(const TrainConfig& config) : config_(config) {}
    virtual ~Optimizer() = default;

    virtual void step(const std::vector<std::pair<std::string, NodePtr<T>>>& params) = 0;
    virtual void eval_mode(const std::vector<std::pair<std::string, NodePtr<T>>>&) {}
    virtual void train_mode(const std::vector<std::pair<std::string, NodePtr<T>>>&) {}
    long long steps_taken() const { return step_count_; }

protected:
    static bool decays(const std::string& name) {
        return name.ends_with(".weight"); // conv and linear weights only
    }
    TrainConfig config_;
    long long step_count_ = 0;
};

template <typename T>
class AdamW : public Optimizer<T> {
public:
    using Optimizer<T>::Optimizer;

    void step(const std::vector<std::pair<std::string, NodePtr<T>>>& params) override {
        auto& cfg = this->config_;
        if (m_.empty()) {
            for (const auto& [name, p] : params) {
                m_.emplace_back(p->value.size(), 0.0);
                v_.emplace_back(p->value.size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw DimensionError("adamw: parameter set changed");
        ++this->step_count_;
        const double t = static_cast<double>(this->step_count_);
        const double bc1 = 1.0 - std::pow(cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& [name, p] = params[i];
            if (p->grad.size() != p->value.size()) throw DimensionError("adamw: missing gradient");
            const bool decay = this->decays(name) && cfg.weight_decay > 0.0;
            for (std::size_t j = 0; j < p->value.size(); ++j) {
                const double g = static_cast<double>(p->grad[j]);
                m_[i][j] = cfg.beta1 * m_[i][j] + (1.0 - cfg.beta1) * g;
                v_[i][j] = cfg.beta2 * v_[i][j] + (1.0 - cfg.beta2) * g * g;
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                double update = cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
                if (decay) {
                    update += cfg.learning_rate * cfg.weight_decay *
                              static_cast<double>(p->value[j]);
                }
                p->value[j] -= static_cast<T>(update);
            }
        }
    }

private:
    std::vector<std::vector<double>> m_, v_;
};

template <typename T>
class ScheduleFreeAdamW : public Optimizer<T> {
public:
    using Optimizer<T>::Optimizer;

    /// Disables the running average (test hook): x tracks z exactly, so the
    /// z trajectory can be compared against plain Adam.
    void set_averaging_enabled(bool enabled) { averaging_ = enabled; }

    void step(const std::vector<std::pair<std::string, NodePtr<T>>>& params) override {
        auto& cfg = this->config_;
        if (z_.empty()) {
            for (const auto& [name, p] : params) {
                z_.emplace_back(p->value.values().begin(), p->value.values().end());
                x_.emplace_back(p->value.values().begin(), p->value.values().end());
                v_.emplace_back(p->value.size(), 0.0);
            }
        }
        if (z_.size() != params.size()) {
            throw DimensionError("schedule_free_adamw: parameter set changed");
        }
        ++this->step_count_;
        const double t = static_cast<double>(this->step_count_);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        const double c = averaging_ ? 1.0 / t : 1.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& [name, p] = params[i];
            if (p->grad.size() != p->value.size()) {
                throw DimensionError("schedule_free_adamw: missing gradient");
            }
            const bool decay = this->decays(name) && cfg.weight_decay > 0.0;
            for (std::size_t j = 0; j < p->value.size(); ++j) {
                const double g = static_cast<double>(p->grad[j]);
                const double y = static_cast<double>(p->value[j]); // evaluation point
                v_[i][j] = cfg.beta2 * v_[i][j] + (1.0 - cfg.beta2) * g * g;
                const double vhat = v_[i][j] / bc2;
                double direction = g / (std::sqrt(vhat) + cfg.eps);
                if (decay) direction += cfg.weight_decay * y;
                z_[i][j] -= cfg.learning_rate * direction;
                // running equal-weight average of z; the incremental forms
                // keep a no-op step bit-identical
                x_[i][j] += c * (z_[i][j] - x_[i][j]);
                // next evaluation point y = (1-beta1) z + beta1 x
                p->value[j] = static_cast<T>(z_[i][j] + cfg.beta1 * (x_[i][j] - z_[i][j]));
            }
        }
    }

    /// Put the averaged iterate into the parameters (for eval/checkpoint).
    void eval_mode(const std::vector<std::pair<std::string, NodePtr<T>>>& params) override {
        if (z_.empty()) return;
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (std::size_t j = 0; j < x_[i].size(); ++j) {
                params[i].second->value[j] = static_cast<T>(x_[i][j]);
            }
        }
    }

    /// Restore the evaluation point y to continue training.
    void train_mode(const std::vector<std::pair<std::string, NodePtr<T>>>& params) override {
        if (z_.empty()) return;
        auto& cfg = this->config_;
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (std::size_t j = 0; j < x_[i].size(); ++j) {
                params[i].second->value[j] =
                    static_cast<T>(z_[i][j] + cfg.beta1 * (x_[i][j] - z_[i][j]));
            }
        }
    }

private:
    bool averaging_ = true;
    std::vector<std::vector<double>> z_, x_, v_;
};

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(const TrainConfig& config) {
    if (config.optimizer == OptimizerKind::adamw) return std::make_unique<AdamW<T>>(config);
    return std::make_unique<ScheduleFreeAdamW<T>>(config);
}

struct EpochRecord {
    int fold = 0;
    int epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
    std::optional<double> wall_ms; // absent when timing is disabled
};

template <typename T>
struct TrainResult {
    Model<T> model;
    std::vector<EpochRecord> history;
};

struct TrainOptions {
    int fold_id = 0;
    bool record_timing = true;
    std::uint64_t init_seed_offset = 0; // distinguishes fold initializations
};

/// Argmax eval-mode predictions for the given rows.
template <typename T>
std::vector<int> predict_classes(const Model<T>& model, const Dataset& data,
                                 const std::vector<std::size_t>& indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    Graph<T> g(false);
    Rng unused = seeded_rng(0);
    for (const std::size_t idx : indices) {
        Tensor<T> x({1, data.grid_size});
        for (std::size_t i = 0; i < data.grid_size; ++i) {
            x[i] = static_cast<T>(data.x[idx][i]);
        }
        auto logits = forward_sample(g, model, make_leaf(std::move(x)), Mode::eval, unused);
        int best = 0;
        for (std::size_t c = 1; c < logits->value.size(); ++c) {
            if (logits->value[c] > logits->value[best]) best = static_cast<int>(c);
        }
        out.push_back(best);
    }
    return out;
}

/// Mean eval-mode cross-entropy over the given rows.
template <typename T>
double evaluate_loss(const Model<T>& model, const Dataset& data,
                     const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw EmptyError("evaluate_loss: no rows");
    Graph<T> g(false);
    Rng unused = seeded_rng(0);
    double total = 0.0;
    for (const std::size_t idx : indices) {
        Tensor<T> x({1, data.grid_size});
        for (std::size_t i = 0; i < data.grid_size; ++i) {
            x[i] = static_cast<T>(data.x[idx][i]);
        }
        auto logits = forward_sample(g, model, make_leaf(std::move(x)), Mode::eval, unused);
        Tensor<T> row({1, logits->value.size()}, logits->value.values());
        auto loss = g.softmax_cross_entropy(make_leaf(std::move(row)), {data.y[idx]});
        total += static_cast<double>(loss->value[0]);
    }
    return total / static_cast<double>(indices.size());
}

/// One training run: seeded shuffle, minibatch forward/backward, global
/// gradient clipping, optimizer step. The returned model carries the
/// schedule-free averaged iterate. NaN loss aborts with a diagnostic.
template <typename T>
TrainResult<T> train(const ModelConfig& model_config, const TrainConfig& train_config,
                     const Dataset& data, const std::vector<std::size_t>& train_idx,
                     const std::vector<std::size_t>& val_idx, const TrainOptions& options = {}) {
    model_config.validate();
    train_config.validate();
    if (train_idx.empty()) throw EmptyError("train: empty training set");
    if (data.grid_size != static_cast<std::size_t>(model_config.input_length)) {
        throw DimensionError("train: dataset grid " + std::to_string(data.grid_size) +
                             " != model input_length " + std::to_string(model_config.input_length));
    }

    TrainResult<T> result;
    result.model =
        init_model<T>(model_config, train_config.seed + options.init_seed_offset);
    result.model.class_labels = data.class_labels;
    auto named = result.model.named_parameters();
    auto params = result.model.parameters();
    auto optimizer = make_optimizer<T>(train_config);

    Rng shuffle_rng = seeded_rng(train_config.seed, 1000 + static_cast<std::uint64_t>(options.fold_id));
    Rng mask_rng = seeded_rng(train_config.seed, 2000 + static_cast<std::uint64_t>(options.fold_id));

    std::vector<std::size_t> order(train_idx);
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle(order, shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(train_config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
            const std::size_t bsz = stop - start;

            Graph<T> g;
            std::vector<NodePtr<T>> rows;
            std::vector<int> targets;
            rows.reserve(bsz);
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t idx = order[k];
                Tensor<T> x({1, data.grid_size});
                for (std::size_t i = 0; i < data.grid_size; ++i) {
                    x[i] = static_cast<T>(data.x[idx][i]);
                }
                rows.push_back(
                    forward_sample(g, result.model, make_leaf(std::move(x)), Mode::train, mask_rng));
                targets.push_back(data.y[idx]);
            }
            auto logits = g.stack_rows(rows);
            auto loss = g.softmax_cross_entropy(logits, targets);
            const double loss_value = static_cast<double>(loss->value[0]);
            if (!std::isfinite(loss_value)) {
                double pnorm = 0.0;
                for (const auto& p : params) {
                    for (std::size_t i = 0; i < p->value.size(); ++i) {
                        pnorm += static_cast<double>(p->value[i]) * static_cast<double>(p->value[i]);
                    }
                }
                throw NumericError("non-finite loss at fold " + std::to_string(options.fold_id) +
                                   ", epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(start / train_config.batch_size) +
                                   " (parameter norm " + std::to_string(std::sqrt(pnorm)) + ")");
            }
            epoch_loss += loss_value * static_cast<double>(bsz);
            seen += bsz;

            for (auto& p : params) p->zero_grad();
            g.backward(loss);
            clip_grad_norm(params, train_config.clip_norm);
            optimizer->step(named);
        }

        EpochRecord record;
        record.fold = options.fold_id;
        record.epoch = epoch;
        record.train_loss = epoch_loss / static_cast<double>(seen);
        if (!val_idx.empty()) {
            optimizer->eval_mode(named);
            record.val_loss = evaluate_loss(result.model, data, val_idx);
            const auto predictions = predict_classes(result.model, data, val_idx);
            std::size_t hits = 0;
            for (std::size_t i = 0; i < val_idx.size(); ++i) {
                if (predictions[i] == data.y[val_idx[i]]) ++hits;
            }
            record.val_accuracy = static_cast<double>(hits) / static_cast<double>(val_idx.size());
            optimizer->train_mode(named);
        }
        if (options.record_timing) {
            record.wall_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        }
        result.history.push_back(record);
    }

    optimizer->eval_mode(named); // final parameters are the averaged iterate
    return result;
}

template <typename T>
struct FoldOutcome {
    TrainResult<T> result;
    metrics::MetricsReport report;
};

template <typename T>
struct CrossValResult {
    std::vector<FoldOutcome<T>> folds;
    metrics::MetricsReport mean;
    metrics::MetricsReport stddev;
};

/// k independent trainings from k fresh initializations; fold f validates on
/// stratified fold f and trains on the rest.
template <typename T>
CrossValResult<T> cross_validate(const ModelConfig& model_config, const TrainConfig& train_config,
                                 const Dataset& data, bool record_timing = true) {
    const auto assignment = stratified_kfold(data.y, train_config.folds, train_config.seed);
    CrossValResult<T> out;
    std::vector<metrics::MetricsReport> reports;
    for (int fold = 0; fold < train_config.folds; ++fold) {
        std::vector<std::size_t> train_idx, val_idx;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == fold) val_idx.push_back(i);
            else train_idx.push_back(i);
        }
        TrainOptions options;
        options.fold_id = fold;
        options.record_timing = record_timing;
        options.init_seed_offset = 7919ULL * static_cast<std::uint64_t>(fold + 1);
        auto result = train<T>(model_config, train_config, data, train_idx, val_idx, options);

        const auto predictions = predict_classes(result.model, data, val_idx);
        std::vector<int> labels;
        labels.reserve(val_idx.size());
        for (std::size_t idx : val_idx) labels.push_back(data.y[idx]);
        auto report = metrics::per_class_metrics(
            metrics::confusion_matrix(predictions, labels, data.class_labels), fold);
        report.loss = evaluate_loss(result.model, data, val_idx);
        reports.push_back(report);
        out.folds.push_back({std::move(result), std::move(report)});
    }
    auto [mean, stddev] = metrics::aggregate_folds(reports);
    out.mean = std::move(mean);
    out.stddev = std::move(stddev);
    return out;
}

/// History JSONL: one record per epoch.
std::string history_to_jsonl(const std::vector<EpochRecord>& history);

} // namespace ramangeo::train
