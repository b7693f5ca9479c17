#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ramangeo/errors.hpp"
#include "ramangeo/rng.hpp"
#include "ramangeo/tensor.hpp"

namespace ramangeo {

enum class Mode { train, eval };

/// A value in the computation. Leaves with requires_grad are parameters;
/// everything else is produced by a Graph op.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad; // same shape as value once gradients are needed
    bool requires_grad = false;
    std::string name;

    void ensure_grad() {
        if (!grad.same_shape(value)) grad = Tensor<T>(value.shape());
    }
    void zero_grad() {
        ensure_grad();
        grad.fill(T(0));
    }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_leaf(Tensor<T> value, bool requires_grad = false, std::string name = {}) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    if (requires_grad) n->zero_grad();
    return n;
}

struct Conv1dSpec {
    int stride = 1;
    int padding = 0;
    int groups = 1;
};

/// Row-wise numerically stable softmax of a [B, C] (or [C]) tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    const std::size_t cols = logits.rank() == 1 ? logits.extent(0) : logits.extent(logits.rank() - 1);
    if (cols == 0) throw EmptyError("softmax: empty class axis");
    const std::size_t rows = logits.size() / cols;
    Tensor<T> out(logits.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = logits.data() + r * cols;
        T* o = out.data() + r * cols;
        T m = in[0];
        for (std::size_t c = 1; c < cols; ++c) m = std::max(m, in[c]);
        T denom = T(0);
        for (std::size_t c = 0; c < cols; ++c) {
            o[c] = std::exp(in[c] - m);
            denom += o[c];
        }
        for (std::size_t c = 0; c < cols; ++c) o[c] /= denom;
    }
    return out;
}

/// Records executed primitives in topological order and replays their
/// adjoints in reverse. Single-threaded by contract; one backward pass
/// per recorded graph.
template <typename T>
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    std::size_t recorded_ops() const { return steps_.size(); }

    NodePtr<T> conv1d(const NodePtr<T>& x, const NodePtr<T>& weight, const NodePtr<T>& bias,
                      const Conv1dSpec& spec = {}) {
        const Tensor<T>& xv = x->value;
        const Tensor<T>& wv = weight->value;
        if (xv.rank() != 2) {
            throw DimensionError("conv1d: input must be [channels, length], got " + xv.shape_str());
        }
        if (wv.rank() != 3) {
            throw DimensionError("conv1d: weight must be [out, in/groups, kernel], got " + wv.shape_str());
        }
        const int c_in = static_cast<int>(xv.extent(0));
        const int length = static_cast<int>(xv.extent(1));
        const int c_out = static_cast<int>(wv.extent(0));
        const int kernel = static_cast<int>(wv.extent(2));
        const int groups = spec.groups;
        if (spec.stride < 1) throw ValueError("conv1d: stride must be >= 1");
        if (spec.padding < 0) throw ValueError("conv1d: padding must be >= 0");
        if (groups < 1 || c_in % groups != 0 || c_out % groups != 0) {
            throw DimensionError("conv1d: channels (in=" + std::to_string(c_in) + ", out=" +
                                 std::to_string(c_out) + ") not divisible by groups=" +
                                 std::to_string(groups));
        }
        if (static_cast<int>(wv.extent(1)) != c_in / groups) {
            throw DimensionError("conv1d: weight in-channel axis " + std::to_string(wv.extent(1)) +
                                 " != input channels/groups " + std::to_string(c_in / groups));
        }
        if (bias && bias->value.size() != static_cast<std::size_t>(c_out)) {
            throw DimensionError("conv1d: bias length " + std::to_string(bias->value.size()) +
                                 " != out channels " + std::to_string(c_out));
        }
        if (length + 2 * spec.padding < kernel) {
            throw DimensionError("conv1d: padded length " + std::to_string(length + 2 * spec.padding) +
                                 " shorter than kernel " + std::to_string(kernel));
        }
        const int l_out = (length + 2 * spec.padding - kernel) / spec.stride + 1;
        const int cg_in = c_in / groups;
        const int cg_out = c_out / groups;

        Tensor<T> out({static_cast<std::size_t>(c_out), static_cast<std::size_t>(l_out)});
        for (int oc = 0; oc < c_out; ++oc) {
            const int g = oc / cg_out;
            for (int i = 0; i < l_out; ++i) {
                T acc = bias ? bias->value[static_cast<std::size_t>(oc)] : T(0);
                const int base = i * spec.stride - spec.padding;
                for (int icl = 0; icl < cg_in; ++icl) {
                    const int ic = g * cg_in + icl;
                    const T* xr = xv.data() + static_cast<std::size_t>(ic) * length;
                    const T* wr = wv.data() + (static_cast<std::size_t>(oc) * cg_in + icl) * kernel;
                    for (int k = 0; k < kernel; ++k) {
                        const int j = base + k;
                        if (j >= 0 && j < length) acc += xr[j] * wr[k];
                    }
                }
                out.at(static_cast<std::size_t>(oc), static_cast<std::size_t>(i)) = acc;
            }
        }

        auto result = wrap(std::move(out), "conv1d",
                           bias ? std::vector<NodePtr<T>>{x, weight, bias}
                                : std::vector<NodePtr<T>>{x, weight});
        if (should_record({x, weight, bias})) {
            record({x, weight, bias}, result, [=]() {
                const Tensor<T>& dout = result->grad;
                const int stride = spec.stride, padding = spec.padding;
                for (int oc = 0; oc < c_out; ++oc) {
                    const int g = oc / cg_out;
                    for (int i = 0; i < l_out; ++i) {
                        const T d = dout.at(static_cast<std::size_t>(oc), static_cast<std::size_t>(i));
                        if (bias && bias->requires_grad) {
                            bias->grad[static_cast<std::size_t>(oc)] += d;
                        }
                        const int base = i * stride - padding;
                        for (int icl = 0; icl < cg_in; ++icl) {
                            const int ic = g * cg_in + icl;
                            const std::size_t xoff = static_cast<std::size_t>(ic) * length;
                            const std::size_t woff = (static_cast<std::size_t>(oc) * cg_in + icl) * kernel;
                            for (int k = 0; k < kernel; ++k) {
                                const int j = base + k;
                                if (j < 0 || j >= length) continue;
                                if (x->requires_grad) {
                                    x->grad[xoff + j] += d * weight->value[woff + k];
                                }
                                if (weight->requires_grad) {
                                    weight->grad[woff + k] += d * x->value[xoff + j];
                                }
                            }
                        }
                    }
                }
            });
        }
        return result;
    }

    /// Normalizes across the channel axis (axis 0 of a [C] or [C, L] tensor)
    /// at every position, then applies the gamma/beta affine.
    NodePtr<T> layer_norm(const NodePtr<T>& x, const NodePtr<T>& gamma, const NodePtr<T>& beta,
                          T eps = T(1e-6)) {
        const Tensor<T>& xv = x->value;
        if (xv.rank() != 1 && xv.rank() != 2) {
            throw DimensionError("layer_norm: expected [C] or [C, L], got " + xv.shape_str());
        }
        const std::size_t channels = xv.extent(0);
        const std::size_t positions = xv.rank() == 2 ? xv.extent(1) : 1;
        if (channels == 0) throw EmptyError("layer_norm: empty channel axis");
        if (gamma->value.size() != channels || beta->value.size() != channels) {
            throw DimensionError("layer_norm: affine length (gamma " +
                                 std::to_string(gamma->value.size()) + ", beta " +
                                 std::to_string(beta->value.size()) + ") != channels " +
                                 std::to_string(channels));
        }
        if (eps <= T(0)) throw ValueError("layer_norm: eps must be positive");

        Tensor<T> out(xv.shape());
        // per-position inverse stddev and mean, kept for the backward pass
        auto inv_std = std::make_shared<std::vector<T>>(positions);
        auto means = std::make_shared<std::vector<T>>(positions);
        for (std::size_t l = 0; l < positions; ++l) {
            T mean = T(0);
            for (std::size_t c = 0; c < channels; ++c) mean += xv[c * positions + l];
            mean /= static_cast<T>(channels);
            T var = T(0);
            for (std::size_t c = 0; c < channels; ++c) {
                const T d = xv[c * positions + l] - mean;
                var += d * d;
            }
            var /= static_cast<T>(channels);
            const T inv = T(1) / std::sqrt(var + eps);
            (*means)[l] = mean;
            (*inv_std)[l] = inv;
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t idx = c * positions + l;
                out[idx] = gamma->value[c] * ((xv[idx] - mean) * inv) + beta->value[c];
            }
        }

        auto result = wrap(std::move(out), "layer_norm", {x, gamma, beta});
        if (should_record({x, gamma, beta})) {
            record({x, gamma, beta}, result, [=]() {
                const Tensor<T>& dout = result->grad;
                const T cn = static_cast<T>(channels);
                for (std::size_t l = 0; l < positions; ++l) {
                    const T mean = (*means)[l];
                    const T inv = (*inv_std)[l];
                    T sum_dxhat = T(0);
                    T sum_dxhat_xc = T(0);
                    for (std::size_t c = 0; c < channels; ++c) {
                        const std::size_t idx = c * positions + l;
                        const T xc = x->value[idx] - mean;
                        const T dxhat = dout[idx] * gamma->value[c];
                        sum_dxhat += dxhat;
                        sum_dxhat_xc += dxhat * xc;
                        if (gamma->requires_grad) gamma->grad[c] += dout[idx] * (xc * inv);
                        if (beta->requires_grad) beta->grad[c] += dout[idx];
                    }
                    if (x->requires_grad) {
                        const T dvar = sum_dxhat_xc * T(-0.5) * inv * inv * inv;
                        const T dmean = -inv * sum_dxhat;
                        for (std::size_t c = 0; c < channels; ++c) {
                            const std::size_t idx = c * positions + l;
                            const T xc = x->value[idx] - mean;
                            x->grad[idx] += dout[idx] * gamma->value[c] * inv +
                                            dvar * T(2) * xc / cn + dmean / cn;
                        }
                    }
                }
            });
        }
        return result;
    }

    /// Elementwise x * Phi(x) with the exact normal CDF (erf form).
    NodePtr<T> gelu(const NodePtr<T>& x) {
        static const T inv_sqrt2 = T(1) / std::sqrt(T(2));
        static const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * T(M_PI));
        Tensor<T> out(x->value.shape());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const T v = x->value[i];
            out[i] = v * T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        }
        auto result = wrap(std::move(out), "gelu", {x});
        if (should_record({x})) {
            record({x}, result, [=]() {
                for (std::size_t i = 0; i < result->grad.size(); ++i) {
                    const T v = x->value[i];
                    const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
                    const T pdf = std::exp(T(-0.5) * v * v) * inv_sqrt2pi;
                    x->grad[i] += result->grad[i] * (cdf + v * pdf);
                }
            });
        }
        return result;
    }

    /// Affine map over the trailing axis: [..., C_in] -> [..., C_out].
    NodePtr<T> linear(const NodePtr<T>& x, const NodePtr<T>& weight, const NodePtr<T>& bias) {
        const Tensor<T>& xv = x->value;
        const Tensor<T>& wv = weight->value;
        if (xv.rank() < 1) throw DimensionError("linear: input must have at least one axis");
        if (wv.rank() != 2) {
            throw DimensionError("linear: weight must be [out, in], got " + wv.shape_str());
        }
        const std::size_t c_in = xv.extent(xv.rank() - 1);
        const std::size_t c_out = wv.extent(0);
        if (wv.extent(1) != c_in) {
            throw DimensionError("linear: weight in-axis " + std::to_string(wv.extent(1)) +
                                 " != input trailing axis " + std::to_string(c_in));
        }
        if (bias && bias->value.size() != c_out) {
            throw DimensionError("linear: bias length " + std::to_string(bias->value.size()) +
                                 " != out features " + std::to_string(c_out));
        }
        const std::size_t rows = xv.size() / std::max<std::size_t>(c_in, 1);
        std::vector<std::size_t> out_shape(xv.shape());
        out_shape.back() = c_out;

        Tensor<T> out(out_shape);
        for (std::size_t r = 0; r < rows; ++r) {
            const T* xr = xv.data() + r * c_in;
            T* o = out.data() + r * c_out;
            for (std::size_t oc = 0; oc < c_out; ++oc) {
                T acc = bias ? bias->value[oc] : T(0);
                const T* wr = wv.data() + oc * c_in;
                for (std::size_t i = 0; i < c_in; ++i) acc += xr[i] * wr[i];
                o[oc] = acc;
            }
        }

        auto result = wrap(std::move(out), "linear",
                           bias ? std::vector<NodePtr<T>>{x, weight, bias}
                                : std::vector<NodePtr<T>>{x, weight});
        if (should_record({x, weight, bias})) {
            record({x, weight, bias}, result, [=]() {
                for (std::size_t r = 0; r < rows; ++r) {
                    const T* d = result->grad.data() + r * c_out;
                    const T* xr = x->value.data() + r * c_in;
                    for (std::size_t oc = 0; oc < c_out; ++oc) {
                        const T dv = d[oc];
                        if (bias && bias->requires_grad) bias->grad[oc] += dv;
                        const std::size_t woff = oc * c_in;
                        for (std::size_t i = 0; i < c_in; ++i) {
                            if (x->requires_grad) x->grad[r * c_in + i] += dv * weight->value[woff + i];
                            if (weight->requires_grad) weight->grad[woff + i] += dv * xr[i];
                        }
                    }
                }
            });
        }
        return result;
    }

    /// [C, L] -> [C], mean over the position axis.
    NodePtr<T> global_avg_pool(const NodePtr<T>& x) {
        const Tensor<T>& xv = x->value;
        if (xv.rank() != 2) {
            throw DimensionError("global_avg_pool: expected [C, L], got " + xv.shape_str());
        }
        const std::size_t channels = xv.extent(0);
        const std::size_t length = xv.extent(1);
        if (length == 0) throw EmptyError("global_avg_pool: empty position axis");
        Tensor<T> out({channels});
        for (std::size_t c = 0; c < channels; ++c) {
            T acc = T(0);
            for (std::size_t l = 0; l < length; ++l) acc += xv.at(c, l);
            out[c] = acc / static_cast<T>(length);
        }
        auto result = wrap(std::move(out), "global_avg_pool", {x});
        if (should_record({x})) {
            record({x}, result, [=]() {
                const T scale = T(1) / static_cast<T>(length);
                for (std::size_t c = 0; c < channels; ++c) {
                    const T d = result->grad[c] * scale;
                    for (std::size_t l = 0; l < length; ++l) x->grad[c * length + l] += d;
                }
            });
        }
        return result;
    }

    /// Stochastic depth: one Bernoulli draw for the whole tensor. Identity in
    /// eval mode and at rate 0 (no rng draw is consumed in either case).
    NodePtr<T> drop_path(const NodePtr<T>& x, T rate, Mode mode, Rng& rng) {
        check_rate(rate, "drop_path");
        if (mode == Mode::eval || rate == T(0)) return x;
        const bool drop = uniform_real(rng) < static_cast<double>(rate);
        const T scale = drop ? T(0) : T(1) / (T(1) - rate);
        Tensor<T> out(x->value.shape());
        if (!drop) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] * scale;
        }
        auto result = wrap(std::move(out), "drop_path", {x});
        if (should_record({x})) {
            record({x}, result, [=]() {
                if (scale == T(0)) return;
                for (std::size_t i = 0; i < result->grad.size(); ++i) {
                    x->grad[i] += result->grad[i] * scale;
                }
            });
        }
        return result;
    }

    /// Per-element inverted dropout. Identity in eval mode and at rate 0.
    NodePtr<T> dropout(const NodePtr<T>& x, T rate, Mode mode, Rng& rng) {
        check_rate(rate, "dropout");
        if (mode == Mode::eval || rate == T(0)) return x;
        const T keep_scale = T(1) / (T(1) - rate);
        auto mask = std::make_shared<std::vector<T>>(x->value.size());
        Tensor<T> out(x->value.shape());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const T m = uniform_real(rng) < static_cast<double>(rate) ? T(0) : keep_scale;
            (*mask)[i] = m;
            out[i] = x->value[i] * m;
        }
        auto result = wrap(std::move(out), "dropout", {x});
        if (should_record({x})) {
            record({x}, result, [=]() {
                for (std::size_t i = 0; i < result->grad.size(); ++i) {
                    x->grad[i] += result->grad[i] * (*mask)[i];
                }
            });
        }
        return result;
    }

    NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
        if (!a->value.same_shape(b->value)) {
            throw DimensionError("add: shape mismatch " + a->value.shape_str() + " vs " +
                                 b->value.shape_str());
        }
        Tensor<T> out(a->value.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
        auto result = wrap(std::move(out), "add", {a, b});
        if (should_record({a, b})) {
            record({a, b}, result, [=]() {
                for (std::size_t i = 0; i < result->grad.size(); ++i) {
                    if (a->requires_grad) a->grad[i] += result->grad[i];
                    if (b->requires_grad) b->grad[i] += result->grad[i];
                }
            });
        }
        return result;
    }

    NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
        if (!a->value.same_shape(b->value)) {
            throw DimensionError("mul: shape mismatch " + a->value.shape_str() + " vs " +
                                 b->value.shape_str());
        }
        Tensor<T> out(a->value.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
        auto result = wrap(std::move(out), "mul", {a, b});
        if (should_record({a, b})) {
            record({a, b}, result, [=]() {
                for (std::size_t i = 0; i < result->grad.size(); ++i) {
                    if (a->requires_grad) a->grad[i] += result->grad[i] * b->value[i];
                    if (b->requires_grad) b->grad[i] += result->grad[i] * a->value[i];
                }
            });
        }
        return result;
    }

    /// Per-channel scaling of a [C] or [C, L] tensor (the layer-scale gamma).
    NodePtr<T> channel_scale(const NodePtr<T>& x, const NodePtr<T>& gamma) {
        const Tensor<T>& xv = x->value;
        if (xv.rank() != 1 && xv.rank() != 2) {
            throw DimensionError("channel_scale: expected [C] or [C, L], got " + xv.shape_str());
        }
        const std::size_t channels = xv.extent(0);
        const std::size_t positions = xv.rank() == 2 ? xv.extent(1) : 1;
        if (gamma->value.size() != channels) {
            throw DimensionError("channel_scale: gamma length " + std::to_string(gamma->value.size()) +
                                 " != channels " + std::to_string(channels));
        }
        Tensor<T> out(xv.shape());
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t l = 0; l < positions; ++l) {
                out[c * positions + l] = xv[c * positions + l] * gamma->value[c];
            }
        }
        auto result = wrap(std::move(out), "channel_scale", {x, gamma});
        if (should_record({x, gamma})) {
            record({x, gamma}, result, [=]() {
                for (std::size_t c = 0; c < channels; ++c) {
                    for (std::size_t l = 0; l < positions; ++l) {
                        const std::size_t idx = c * positions + l;
                        if (x->requires_grad) x->grad[idx] += result->grad[idx] * gamma->value[c];
                        if (gamma->requires_grad) gamma->grad[c] += result->grad[idx] * x->value[idx];
                    }
                }
            });
        }
        return result;
    }

    /// B same-length vectors -> one [B, C] tensor.
    NodePtr<T> stack_rows(const std::vector<NodePtr<T>>& rows) {
        if (rows.empty()) throw EmptyError("stack_rows: no rows");
        const std::size_t cols = rows[0]->value.size();
        for (const auto& r : rows) {
            if (r->value.rank() != 1 || r->value.size() != cols) {
                throw DimensionError("stack_rows: rows must be equal-length vectors");
            }
        }
        Tensor<T> out({rows.size(), cols});
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::copy_n(rows[r]->value.data(), cols, out.data() + r * cols);
        }
        std::vector<NodePtr<T>> inputs(rows.begin(), rows.end());
        auto result = wrap(std::move(out), "stack_rows", inputs);
        if (should_record(inputs)) {
            record(inputs, result, [=]() {
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (!rows[r]->requires_grad) continue;
                    for (std::size_t c = 0; c < cols; ++c) {
                        rows[r]->grad[c] += result->grad[r * cols + c];
                    }
                }
            });
        }
        return result;
    }

    /// Sum of all elements, as a rank-0 scalar.
    NodePtr<T> sum(const NodePtr<T>& x) {
        T acc = T(0);
        for (std::size_t i = 0; i < x->value.size(); ++i) acc += x->value[i];
        auto result = wrap(Tensor<T>::scalar(acc), "sum", {x});
        if (should_record({x})) {
            record({x}, result, [=]() {
                const T d = result->grad[0];
                for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += d;
            });
        }
        return result;
    }

    /// Mean over the batch of -log softmax(logits)[target], with log-sum-exp
    /// stabilization. logits are [B, C]; targets hold B class indices.
    NodePtr<T> softmax_cross_entropy(const NodePtr<T>& logits, const std::vector<int>& targets) {
        const Tensor<T>& lv = logits->value;
        if (lv.rank() != 2) {
            throw DimensionError("softmax_cross_entropy: logits must be [B, C], got " + lv.shape_str());
        }
        const std::size_t batch = lv.extent(0);
        const std::size_t classes = lv.extent(1);
        if (targets.size() != batch) {
            throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                                 " targets for batch of " + std::to_string(batch));
        }
        for (int t : targets) {
            if (t < 0 || static_cast<std::size_t>(t) >= classes) {
                throw IndexError("softmax_cross_entropy: target " + std::to_string(t) +
                                 " out of range [0, " + std::to_string(classes) + ")");
            }
        }
        auto probs = std::make_shared<Tensor<T>>(softmax(lv));
        T loss = T(0);
        for (std::size_t r = 0; r < batch; ++r) {
            const T* in = lv.data() + r * classes;
            T m = in[0];
            for (std::size_t c = 1; c < classes; ++c) m = std::max(m, in[c]);
            T denom = T(0);
            for (std::size_t c = 0; c < classes; ++c) denom += std::exp(in[c] - m);
            const T lse = m + std::log(denom);
            loss += lse - in[static_cast<std::size_t>(targets[r])];
        }
        loss /= static_cast<T>(batch);

        auto result = wrap(Tensor<T>::scalar(loss), "softmax_cross_entropy", {logits});
        if (should_record({logits})) {
            auto tgt = std::make_shared<std::vector<int>>(targets);
            record({logits}, result, [=]() {
                const T d = result->grad[0] / static_cast<T>(batch);
                for (std::size_t r = 0; r < batch; ++r) {
                    for (std::size_t c = 0; c < classes; ++c) {
                        const T onehot = (static_cast<std::size_t>((*tgt)[r]) == c) ? T(1) : T(0);
                        logits->grad[r * classes + c] += d * ((*probs)[r * classes + c] - onehot);
                    }
                }
            });
        }
        return result;
    }

    /// Replays adjoints of every recorded op exactly once, in reverse order.
    /// Gradients accumulate into every requires_grad node reachable from loss;
    /// unreached nodes keep zero gradients.
    void backward(const NodePtr<T>& loss) {
        if (loss->value.size() != 1 || loss->value.rank() != 0) {
            throw ValueError("backward: loss must be a scalar, got shape " + loss->value.shape_str());
        }
        if (!loss->requires_grad) return;
        loss->ensure_grad();
        loss->grad[0] += T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
            it->backward();
        }
    }

private:
    struct Step {
        std::vector<NodePtr<T>> inputs;
        NodePtr<T> output;
        std::function<void()> backward;
    };

    bool should_record(std::initializer_list<NodePtr<T>> inputs) const {
        if (!recording_) return false;
        for (const auto& n : inputs) {
            if (n && n->requires_grad) return true;
        }
        return false;
    }
    bool should_record(const std::vector<NodePtr<T>>& inputs) const {
        if (!recording_) return false;
        for (const auto& n : inputs) {
            if (n && n->requires_grad) return true;
        }
        return false;
    }

    NodePtr<T> wrap(Tensor<T> value, const char* op, const std::vector<NodePtr<T>>& inputs) {
#ifdef RAMANGEO_CHECK_FINITE
        if (!value.all_finite()) {
            throw NumericError(std::string(op) + ": non-finite value in output");
        }
#else
        (void)op;
#endif
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = false;
        if (recording_) {
            for (const auto& in : inputs) {
                if (in && in->requires_grad) {
                    n->requires_grad = true;
                    break;
                }
            }
        }
        if (n->requires_grad) n->zero_grad();
        return n;
    }

    void record(std::vector<NodePtr<T>> inputs, NodePtr<T> output, std::function<void()> backward) {
        for (auto& n : inputs) {
            if (n) n->ensure_grad();
        }
        steps_.push_back(Step{std::move(inputs), std::move(output), std::move(backward)});
    }

    static void check_rate(T rate, const char* op) {
        if (!(rate >= T(0) && rate < T(1))) {
            throw ValueError(std::string(op) + ": rate must be in [0, 1)");
        }
    }

    bool recording_;
    std::vector<Step> steps_;
};

} // namespace ramangeo
