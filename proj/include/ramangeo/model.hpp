#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ramangeo/errors.hpp"
#include "ramangeo/graph.hpp"
#include "ramangeo/rng.hpp"
#include "ramangeo/tensor.hpp"

namespace ramangeo {

/// Architecture hyperparameters. Defaults follow the four-stage layout
/// with depths [2,2,3,2] and channel dims [32,64,128,256].
struct ModelConfig {
    std::array<int, 4> depths{2, 2, 3, 2};
    std::array<int, 4> dims{32, 64, 128, 256};
    int num_classes = 2;
    int input_length = 4096;
    double drop_path_max = 0.1;
    double dropout_rate = 0.0;
    int expansion_ratio = 4;
    double layer_scale_init = 1e-6;

    // The stem divides the length by 4 and each of the three stage
    // transitions halves it again, hence the divisibility requirement.
    void validate() const {
        for (int d : depths) {
            if (d < 1) throw ConfigError("model: every stage depth must be >= 1");
        }
        for (int d : dims) {
            if (d < 1) throw ConfigError("model: every stage dim must be >= 1");
        }
        if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
        if (input_length <= 0 || input_length % 32 != 0) {
            throw ConfigError("model: input_length " + std::to_string(input_length) +
                              " must be a positive multiple of 32");
        }
        if (drop_path_max < 0.0 || drop_path_max >= 1.0) {
            throw ConfigError("model: drop_path_max must be in [0, 1)");
        }
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw ConfigError("model: dropout_rate must be in [0, 1)");
        }
        if (expansion_ratio < 1) throw ConfigError("model: expansion_ratio must be >= 1");
    }

    int total_blocks() const { return depths[0] + depths[1] + depths[2] + depths[3]; }

    nlohmann::json to_json() const {
        return nlohmann::json{{"depths", depths},
                              {"dims", dims},
                              {"num_classes", num_classes},
                              {"input_length", input_length},
                              {"drop_path_max", drop_path_max},
                              {"dropout_rate", dropout_rate},
                              {"expansion_ratio", expansion_ratio},
                              {"layer_scale_init", layer_scale_init}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        if (j.contains("depths")) c.depths = j.at("depths").get<std::array<int, 4>>();
        if (j.contains("dims")) c.dims = j.at("dims").get<std::array<int, 4>>();
        if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<int>();
        if (j.contains("input_length")) c.input_length = j.at("input_length").get<int>();
        if (j.contains("drop_path_max")) c.drop_path_max = j.at("drop_path_max").get<double>();
        if (j.contains("dropout_rate")) c.dropout_rate = j.at("dropout_rate").get<double>();
        if (j.contains("expansion_ratio")) c.expansion_ratio = j.at("expansion_ratio").get<int>();
        if (j.contains("layer_scale_init")) c.layer_scale_init = j.at("layer_scale_init").get<double>();
        return c;
    }
};

/// Exact trainable parameter count for a config, by closed-form summation.
inline long long count_params(const ModelConfig& config) {
    config.validate();
    long long total = 0;
    // stem: conv(1 -> dims[0], K=4) + bias, then layer norm affine
    total += static_cast<long long>(config.dims[0]) * 4 + config.dims[0] + 2LL * config.dims[0];
    for (int s = 0; s < 4; ++s) {
        const long long d = config.dims[static_cast<std::size_t>(s)];
        const long long e = config.expansion_ratio;
        // dwconv(K=7, groups=d) + bias, norm affine, two pointwise convs, gamma
        const long long per_block = (d * 7 + d) + 2 * d + (e * d * d + e * d) + (d * e * d + d) + d;
        total += per_block * config.depths[static_cast<std::size_t>(s)];
    }
    for (int s = 0; s < 3; ++s) {
        const long long din = config.dims[static_cast<std::size_t>(s)];
        const long long dout = config.dims[static_cast<std::size_t>(s + 1)];
        total += 2 * din + dout * din * 2 + dout; // norm + conv(K=2) + bias
    }
    total += 2LL * config.dims[3];                                        // final norm
    total += static_cast<long long>(config.dims[3]) * config.num_classes + config.num_classes;
    return total;
}

template <typename T>
struct BlockParams {
    NodePtr<T> dw_weight, dw_bias;
    NodePtr<T> norm_gamma, norm_beta;
    NodePtr<T> pw1_weight, pw1_bias;
    NodePtr<T> pw2_weight, pw2_bias;
    NodePtr<T> layer_scale;
    T drop_path_rate = T(0);
};

template <typename T>
struct DownsampleParams {
    NodePtr<T> norm_gamma, norm_beta;
    NodePtr<T> conv_weight, conv_bias;
};

template <typename T>
struct Model {
    ModelConfig config;
    std::vector<std::string> class_labels; // ordered country names, size num_classes

    NodePtr<T> stem_weight, stem_bias;
    NodePtr<T> stem_norm_gamma, stem_norm_beta;
    std::vector<std::vector<BlockParams<T>>> stages;
    std::vector<DownsampleParams<T>> downsamples; // between stages 1-2, 2-3, 3-4
    NodePtr<T> final_norm_gamma, final_norm_beta;
    NodePtr<T> head_weight, head_bias;

    /// Parameters in a fixed order; this order defines the checkpoint layout.
    std::vector<std::pair<std::string, NodePtr<T>>> named_parameters() const {
        std::vector<std::pair<std::string, NodePtr<T>>> out;
        out.emplace_back("stem.conv.weight", stem_weight);
        out.emplace_back("stem.conv.bias", stem_bias);
        out.emplace_back("stem.norm.gamma", stem_norm_gamma);
        out.emplace_back("stem.norm.beta", stem_norm_beta);
        for (std::size_t s = 0; s < stages.size(); ++s) {
            if (s > 0) {
                const auto& ds = downsamples[s - 1];
                const std::string p = "downsample." + std::to_string(s - 1) + ".";
                out.emplace_back(p + "norm.gamma", ds.norm_gamma);
                out.emplace_back(p + "norm.beta", ds.norm_beta);
                out.emplace_back(p + "conv.weight", ds.conv_weight);
                out.emplace_back(p + "conv.bias", ds.conv_bias);
            }
            for (std::size_t b = 0; b < stages[s].size(); ++b) {
                const auto& blk = stages[s][b];
                const std::string p =
                    "stages." + std::to_string(s) + ".blocks." + std::to_string(b) + ".";
                out.emplace_back(p + "dwconv.weight", blk.dw_weight);
                out.emplace_back(p + "dwconv.bias", blk.dw_bias);
                out.emplace_back(p + "norm.gamma", blk.norm_gamma);
                out.emplace_back(p + "norm.beta", blk.norm_beta);
                out.emplace_back(p + "pwconv1.weight", blk.pw1_weight);
                out.emplace_back(p + "pwconv1.bias", blk.pw1_bias);
                out.emplace_back(p + "pwconv2.weight", blk.pw2_weight);
                out.emplace_back(p + "pwconv2.bias", blk.pw2_bias);
                out.emplace_back(p + "layer_scale", blk.layer_scale);
            }
        }
        out.emplace_back("final_norm.gamma", final_norm_gamma);
        out.emplace_back("final_norm.beta", final_norm_beta);
        out.emplace_back("head.weight", head_weight);
        out.emplace_back("head.bias", head_bias);
        return out;
    }

    std::vector<NodePtr<T>> parameters() const {
        std::vector<NodePtr<T>> out;
        for (auto& [name, node] : named_parameters()) out.push_back(node);
        return out;
    }

    long long parameter_count() const {
        long long n = 0;
        for (const auto& p : parameters()) n += static_cast<long long>(p->value.size());
        return n;
    }
};

namespace detail {

template <typename T>
NodePtr<T> param(std::vector<std::size_t> shape, std::string name) {
    return make_leaf<T>(Tensor<T>(std::move(shape)), true, std::move(name));
}

} // namespace detail

/// Allocate all parameter tensors, zero-filled, with per-block drop-path
/// rates ramped linearly from 0 to drop_path_max in network order.
template <typename T>
Model<T> build_model(const ModelConfig& config) {
    config.validate();
    Model<T> m;
    m.config = config;

    const auto dim = [&](int s) { return static_cast<std::size_t>(config.dims[static_cast<std::size_t>(s)]); };

    m.stem_weight = detail::param<T>({dim(0), 1, 4}, "stem.conv.weight");
    m.stem_bias = detail::param<T>({dim(0)}, "stem.conv.bias");
    m.stem_norm_gamma = detail::param<T>({dim(0)}, "stem.norm.gamma");
    m.stem_norm_beta = detail::param<T>({dim(0)}, "stem.norm.beta");

    const int total_blocks = config.total_blocks();
    int block_index = 0;
    m.stages.resize(4);
    for (int s = 0; s < 4; ++s) {
        if (s > 0) {
            DownsampleParams<T> ds;
            const std::string p = "downsample." + std::to_string(s - 1) + ".";
            ds.norm_gamma = detail::param<T>({dim(s - 1)}, p + "norm.gamma");
            ds.norm_beta = detail::param<T>({dim(s - 1)}, p + "norm.beta");
            ds.conv_weight = detail::param<T>({dim(s), dim(s - 1), 2}, p + "conv.weight");
            ds.conv_bias = detail::param<T>({dim(s)}, p + "conv.bias");
            m.downsamples.push_back(std::move(ds));
        }
        const std::size_t d = dim(s);
        const std::size_t e = static_cast<std::size_t>(config.expansion_ratio);
        for (int b = 0; b < config.depths[static_cast<std::size_t>(s)]; ++b) {
            BlockParams<T> blk;
            const std::string p = "stages." + std::to_string(s) + ".blocks." + std::to_string(b) + ".";
            blk.dw_weight = detail::param<T>({d, 1, 7}, p + "dwconv.weight");
            blk.dw_bias = detail::param<T>({d}, p + "dwconv.bias");
            blk.norm_gamma = detail::param<T>({d}, p + "norm.gamma");
            blk.norm_beta = detail::param<T>({d}, p + "norm.beta");
            blk.pw1_weight = detail::param<T>({e * d, d, 1}, p + "pwconv1.weight");
            blk.pw1_bias = detail::param<T>({e * d}, p + "pwconv1.bias");
            blk.pw2_weight = detail::param<T>({d, e * d, 1}, p + "pwconv2.weight");
            blk.pw2_bias = detail::param<T>({d}, p + "pwconv2.bias");
            blk.layer_scale = detail::param<T>({d}, p + "layer_scale");
            blk.drop_path_rate =
                total_blocks > 1
                    ? static_cast<T>(config.drop_path_max * block_index / (total_blocks - 1))
                    : T(0);
            ++block_index;
            m.stages[static_cast<std::size_t>(s)].push_back(std::move(blk));
        }
    }

    m.final_norm_gamma = detail::param<T>({dim(3)}, "final_norm.gamma");
    m.final_norm_beta = detail::param<T>({dim(3)}, "final_norm.beta");
    m.head_weight = detail::param<T>({static_cast<std::size_t>(config.num_classes), dim(3)},
                                     "head.weight");
    m.head_bias = detail::param<T>({static_cast<std::size_t>(config.num_classes)}, "head.bias");
    return m;
}

/// Fresh model: conv/linear weights ~ TruncNormal(0, 0.02^2) clipped at two
/// standard deviations, biases zero, norm affines (1, 0), layer scale gammas
/// at layer_scale_init. Same seed, same bits.
template <typename T>
Model<T> init_model(const ModelConfig& config, std::uint64_t seed) {
    Model<T> m = build_model<T>(config);
    Rng rng = seeded_rng(seed);
    for (auto& [name, node] : m.named_parameters()) {
        const bool sampled = name.ends_with("conv.weight") || name == "head.weight" ||
                             name.ends_with("pwconv1.weight") || name.ends_with("pwconv2.weight") ||
                             name.ends_with("dwconv.weight");
        if (sampled) {
            for (std::size_t i = 0; i < node->value.size(); ++i) {
                node->value[i] = static_cast<T>(truncated_normal(rng, 0.02, 2.0));
            }
        } else if (name.ends_with("norm.gamma")) {
            node->value.fill(T(1));
        } else if (name.ends_with("layer_scale")) {
            node->value.fill(static_cast<T>(config.layer_scale_init));
        }
        // biases and norm betas stay zero
    }
    return m;
}

/// One residual block: x + DropPath(gamma . PW2(GELU(PW1(LN(DWConv(x)))))).
template <typename T>
NodePtr<T> forward_block(Graph<T>& g, const BlockParams<T>& blk, const NodePtr<T>& x, Mode mode,
                         Rng& rng, double layer_norm_eps = 1e-6) {
    const std::size_t channels = x->value.extent(0);
    if (blk.dw_weight->value.extent(0) != channels) {
        throw DimensionError("forward_block: input channels " + std::to_string(channels) +
                             " != block channels " + std::to_string(blk.dw_weight->value.extent(0)));
    }
    auto h = g.conv1d(x, blk.dw_weight, blk.dw_bias,
                      {.stride = 1, .padding = 3, .groups = static_cast<int>(channels)});
    h = g.layer_norm(h, blk.norm_gamma, blk.norm_beta, static_cast<T>(layer_norm_eps));
    h = g.conv1d(h, blk.pw1_weight, blk.pw1_bias);
    h = g.gelu(h);
    h = g.conv1d(h, blk.pw2_weight, blk.pw2_bias);
    h = g.channel_scale(h, blk.layer_scale);
    h = g.drop_path(h, blk.drop_path_rate, mode, rng);
    return g.add(x, h);
}

/// Observed intermediate shapes and pooled features, for conformance checks.
template <typename T>
struct ForwardTrace {
    std::vector<std::pair<std::size_t, std::size_t>> stage_shapes; // (channels, length)
    std::vector<T> pooled; // after Eq.-7 pooling and layer norm, before the head
};

/// Full forward pass for one sample shaped [1, input_length]; returns the
/// [num_classes] logit vector.
template <typename T>
NodePtr<T> forward_sample(Graph<T>& g, const Model<T>& m, const NodePtr<T>& x, Mode mode, Rng& rng,
                          double layer_norm_eps = 1e-6, ForwardTrace<T>* trace = nullptr) {
    const T eps = static_cast<T>(layer_norm_eps);
    if (x->value.rank() != 2 || x->value.extent(0) != 1 ||
        x->value.extent(1) != static_cast<std::size_t>(m.config.input_length)) {
        throw DimensionError("forward: expected input [1, " + std::to_string(m.config.input_length) +
                             "], got " + x->value.shape_str());
    }
    auto h = g.conv1d(x, m.stem_weight, m.stem_bias, {.stride = 4, .padding = 0, .groups = 1});
    h = g.layer_norm(h, m.stem_norm_gamma, m.stem_norm_beta, eps);
    for (std::size_t s = 0; s < m.stages.size(); ++s) {
        if (s > 0) {
            const auto& ds = m.downsamples[s - 1];
            h = g.layer_norm(h, ds.norm_gamma, ds.norm_beta, eps);
            h = g.conv1d(h, ds.conv_weight, ds.conv_bias, {.stride = 2, .padding = 0, .groups = 1});
        }
        for (const auto& blk : m.stages[s]) {
            h = forward_block(g, blk, h, mode, rng, layer_norm_eps);
        }
        if (trace) trace->stage_shapes.emplace_back(h->value.extent(0), h->value.extent(1));
    }
    h = g.global_avg_pool(h);
    h = g.layer_norm(h, m.final_norm_gamma, m.final_norm_beta, eps);
    if (trace) trace->pooled = h->value.values();
    if (m.config.dropout_rate > 0.0) {
        h = g.dropout(h, static_cast<T>(m.config.dropout_rate), mode, rng);
    }
    return g.linear(h, m.head_weight, m.head_bias);
}

/// Batched forward: [B, 1, input_length] -> logits [B, num_classes].
template <typename T>
NodePtr<T> forward(Graph<T>& g, const Model<T>& m, const Tensor<T>& batch, Mode mode, Rng& rng,
                   double layer_norm_eps = 1e-6) {
    if (batch.rank() != 3 || batch.extent(1) != 1) {
        throw DimensionError("forward: expected batch [B, 1, L], got " + batch.shape_str());
    }
    const std::size_t b = batch.extent(0);
    const std::size_t length = batch.extent(2);
    std::vector<NodePtr<T>> rows;
    rows.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
        Tensor<T> sample({1, length});
        std::copy_n(batch.data() + i * length, length, sample.data());
        rows.push_back(forward_sample(g, m, make_leaf(std::move(sample)), mode, rng, layer_norm_eps));
    }
    return g.stack_rows(rows);
}

} // namespace ramangeo
