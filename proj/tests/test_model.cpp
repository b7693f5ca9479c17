#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ramangeo/checkpoint.hpp"
#include "ramangeo/model.hpp"
#include "support/gradcheck.hpp"

using namespace ramangeo;

namespace {

ModelConfig tiny_config(int num_classes = 3, int input_length = 64) {
    ModelConfig c;
    c.depths = {1, 1, 1, 1};
    c.dims = {4, 8, 16, 32};
    c.num_classes = num_classes;
    c.input_length = input_length;
    c.drop_path_max = 0.0;
    return c;
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("init_model samples weights inside the truncation bound") {
    ModelConfig cfg = tiny_config();
    auto m = init_model<double>(cfg, 1234);
    for (const auto& [name, node] : m.named_parameters()) {
        if (name.ends_with(".weight")) {
            for (std::size_t i = 0; i < node->value.size(); ++i) {
                CHECK(std::fabs(node->value[i]) <= 0.04);
            }
        } else if (name.ends_with(".bias") || name.ends_with("norm.beta")) {
            for (std::size_t i = 0; i < node->value.size(); ++i) CHECK(node->value[i] == 0.0);
        } else if (name.ends_with("layer_scale")) {
            for (std::size_t i = 0; i < node->value.size(); ++i) CHECK(node->value[i] == 1e-6);
        } else if (name.ends_with("norm.gamma")) {
            for (std::size_t i = 0; i < node->value.size(); ++i) CHECK(node->value[i] == 1.0);
        }
    }
}

TEST_CASE("init_model is bit-deterministic in the seed") {
    ModelConfig cfg = tiny_config();
    auto a = init_model<float>(cfg, 99);
    auto b = init_model<float>(cfg, 99);
    auto pa = a.parameters();
    auto pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->value.size() == pb[i]->value.size());
        for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
            CHECK(pa[i]->value[j] == pb[i]->value[j]);
        }
    }

    auto c = init_model<float>(cfg, 100);
    bool any_diff = false;
    auto pc = c.parameters();
    for (std::size_t j = 0; j < pa[0]->value.size(); ++j) {
        if (pa[0]->value[j] != pc[0]->value[j]) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("config validation rejects bad input lengths") {
    ModelConfig cfg = tiny_config();
    cfg.input_length = 100; // not divisible by 32
    CHECK_THROWS_AS(init_model<float>(cfg, 0), ConfigError);
    cfg.input_length = 0;
    CHECK_THROWS_AS(init_model<float>(cfg, 0), ConfigError);
    cfg = tiny_config();
    cfg.num_classes = 1;
    CHECK_THROWS_AS(init_model<float>(cfg, 0), ConfigError);
}

TEST_CASE("freshly initialized block is near-identity in eval mode") {
    ModelConfig cfg = tiny_config();
    auto m = init_model<double>(cfg, 7);
    Rng rng = seeded_rng(8);
    Tensor<double> x({4, 16});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = uniform_real(rng) * 2.0 - 1.0;

    Graph<double> g(false);
    Rng unused = seeded_rng(0);
    auto y = forward_block(g, m.stages[0][0], make_leaf(x), Mode::eval, unused);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (y->value[i] - x[i]) * (y->value[i] - x[i]);
        den += x[i] * x[i];
    }
    CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("block with zero layer scale is the exact identity") {
    ModelConfig cfg = tiny_config();
    auto m = init_model<double>(cfg, 7);
    m.stages[0][0].layer_scale->value.fill(0.0);
    Rng rng = seeded_rng(9);
    Tensor<double> x({4, 16});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = uniform_real(rng);

    Graph<double> g(false);
    Rng unused = seeded_rng(0);
    auto y = forward_block(g, m.stages[0][0], make_leaf(x), Mode::eval, unused);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y->value[i] == x[i]);
}

TEST_CASE("block matches a straight-line composition of the five primitives") {
    ModelConfig cfg = tiny_config();
    auto m = init_model<double>(cfg, 13);
    auto& blk = m.stages[0][0];
    // trained-like parameter magnitudes
    Rng rng = seeded_rng(14);
    for (auto node : {blk.dw_weight, blk.pw1_weight, blk.pw2_weight, blk.layer_scale,
                      blk.norm_gamma, blk.norm_beta, blk.dw_bias, blk.pw1_bias, blk.pw2_bias}) {
        for (std::size_t i = 0; i < node->value.size(); ++i) {
            node->value[i] = uniform_real(rng) * 0.6 - 0.3;
        }
    }
    Tensor<double> x({4, 16});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = uniform_real(rng) * 2.0 - 1.0;

    Graph<double> g(false);
    Rng unused = seeded_rng(0);
    auto got = forward_block(g, blk, make_leaf(x), Mode::eval, unused);

    auto xin = make_leaf(x);
    auto h = g.conv1d(xin, blk.dw_weight, blk.dw_bias, {.stride = 1, .padding = 3, .groups = 4});
    h = g.layer_norm(h, blk.norm_gamma, blk.norm_beta, 1e-6);
    h = g.conv1d(h, blk.pw1_weight, blk.pw1_bias);
    h = g.gelu(h);
    h = g.conv1d(h, blk.pw2_weight, blk.pw2_bias);
    h = g.channel_scale(h, blk.layer_scale);
    auto expect = g.add(xin, h);

    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(got->value[i] == doctest::Approx(expect->value[i]).epsilon(1e-10));
    }
}

TEST_CASE("forward produces the documented stage geometry") {
    ModelConfig cfg; // paper defaults
    cfg.num_classes = 5;
    cfg.input_length = 4096;
    auto m = init_model<float>(cfg, 3);
    Rng rng = seeded_rng(4);
    Tensor<float> x({1, 4096});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(uniform_real(rng));

    Graph<float> g(false);
    Rng unused = seeded_rng(0);
    ForwardTrace<float> trace;
    auto logits = forward_sample(g, m, make_leaf(x), Mode::eval, unused, 1e-6, &trace);
    REQUIRE(trace.stage_shapes.size() == 4);
    CHECK(trace.stage_shapes[0] == std::pair<std::size_t, std::size_t>{32, 1024});
    CHECK(trace.stage_shapes[1] == std::pair<std::size_t, std::size_t>{64, 512});
    CHECK(trace.stage_shapes[2] == std::pair<std::size_t, std::size_t>{128, 256});
    CHECK(trace.stage_shapes[3] == std::pair<std::size_t, std::size_t>{256, 128});
    CHECK(logits->value.shape() == std::vector<std::size_t>{5});
}

TEST_CASE("identical samples in a batch give identical logit rows") {
    ModelConfig cfg = tiny_config(4, 64);
    auto m = init_model<float>(cfg, 21);
    Rng rng = seeded_rng(22);
    Tensor<float> batch({2, 1, 64});
    for (std::size_t i = 0; i < 64; ++i) {
        const auto v = static_cast<float>(uniform_real(rng));
        batch[i] = v;
        batch[64 + i] = v;
    }
    Graph<float> g(false);
    Rng unused = seeded_rng(0);
    auto logits = forward(g, m, batch, Mode::eval, unused);
    REQUIRE(logits->value.shape() == std::vector<std::size_t>({2, 4}));
    for (std::size_t c = 0; c < 4; ++c) CHECK(logits->value.at(0, c) == logits->value.at(1, c));
}

TEST_CASE("eval logits are independent of batch composition") {
    ModelConfig cfg = tiny_config(3, 64);
    auto m = init_model<float>(cfg, 31);
    Rng rng = seeded_rng(32);
    Tensor<float> batch({3, 1, 64});
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = static_cast<float>(uniform_real(rng));

    Graph<float> g(false);
    Rng unused = seeded_rng(0);
    auto batched = forward(g, m, batch, Mode::eval, unused);
    for (std::size_t s = 0; s < 3; ++s) {
        Tensor<float> single({1, 1, 64});
        std::copy_n(batch.data() + s * 64, 64, single.data());
        auto row = forward(g, m, single, Mode::eval, unused);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(std::fabs(batched->value.at(s, c) - row->value.at(0, c)) < 1e-6f);
        }
    }
}

TEST_CASE("tiny config logits are finite and softmax rows normalize") {
    ModelConfig cfg = tiny_config(3, 64);
    auto m = init_model<double>(cfg, 41);
    Rng rng = seeded_rng(42);
    Tensor<double> batch({2, 1, 64});
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = uniform_real(rng);

    Graph<double> g(false);
    Rng unused = seeded_rng(0);
    auto logits = forward(g, m, batch, Mode::eval, unused);
    CHECK(logits->value.all_finite());
    auto probs = softmax(logits->value);
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) s += probs.at(r, c);
        CHECK(std::fabs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("near-identity at initialization for the whole network") {
    ModelConfig cfg = tiny_config(3, 64);
    auto m = init_model<double>(cfg, 51);
    Rng rng = seeded_rng(52);
    Tensor<double> x({1, 64});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = uniform_real(rng);

    Graph<double> g(false);
    Rng unused = seeded_rng(0);
    ForwardTrace<double> with_branches;
    forward_sample(g, m, make_leaf(x), Mode::eval, unused, 1e-6, &with_branches);

    auto frozen = init_model<double>(cfg, 51);
    for (auto& stage : frozen.stages) {
        for (auto& blk : stage) blk.layer_scale->value.fill(0.0);
    }
    ForwardTrace<double> without_branches;
    forward_sample(g, frozen, make_leaf(x), Mode::eval, unused, 1e-6, &without_branches);

    double num = 0.0, den = 0.0;
    REQUIRE(with_branches.pooled.size() == without_branches.pooled.size());
    for (std::size_t i = 0; i < with_branches.pooled.size(); ++i) {
        const double d = with_branches.pooled[i] - without_branches.pooled[i];
        num += d * d;
        den += with_branches.pooled[i] * with_branches.pooled[i];
    }
    CHECK(std::sqrt(num) / std::sqrt(den) < 1e-2);
}

TEST_CASE("count_params closed form") {
    SUBCASE("linear head arithmetic") {
        ModelConfig a;
        a.num_classes = 101;
        ModelConfig b = a;
        b.num_classes = 202;
        CHECK(count_params(b) - count_params(a) == (256 + 1) * 101);
    }
    SUBCASE("default config frozen value") {
        ModelConfig cfg;
        cfg.num_classes = 101;
        CHECK(count_params(cfg) == 1654725);
    }
    SUBCASE("matches enumeration of instantiated tensors") {
        ModelConfig cfg;
        cfg.num_classes = 11;
        auto m = build_model<float>(cfg);
        CHECK(m.parameter_count() == count_params(cfg));

        ModelConfig tiny = tiny_config(3, 64);
        auto t = build_model<float>(tiny);
        CHECK(t.parameter_count() == count_params(tiny));
        CHECK(count_params(tiny) == 13487);
    }
}

TEST_CASE("end-to-end gradient check on the tiny config") {
    ModelConfig cfg = tiny_config(3, 64);
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
        auto m = init_model<double>(cfg, seed);
        Rng rng = seeded_rng(seed, 77);
        Tensor<double> batch({2, 1, 64});
        for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = uniform_real(rng);
        const std::vector<int> targets = {0, 2};

        auto params = m.parameters();
        auto loss_fn = [&]() {
            Graph<double> g;
            Rng r = seeded_rng(seed, 78);
            auto logits = forward(g, m, batch, Mode::train, r);
            return g.softmax_cross_entropy(logits, targets)->value[0];
        };
        for (auto& p : params) p->zero_grad();
        {
            Graph<double> g;
            Rng r = seeded_rng(seed, 78);
            auto logits = forward(g, m, batch, Mode::train, r);
            auto loss = g.softmax_cross_entropy(logits, targets);
            g.backward(loss);
        }
        Rng pick = seeded_rng(seed, 79);
        CHECK(testsupport::max_fd_rel_error_sampled(params, loss_fn, 4, pick) < 1e-3);
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ModelConfig cfg = tiny_config(5, 64);
    auto m = init_model<float>(cfg, 61);
    m.class_labels = {"Austria", "Bolivia", "Canada", "Denmark", "Estonia"};
    const auto path = temp_path("ramangeo_ckpt_roundtrip.cnx1");
    save_checkpoint(m, path.string(), {.window = {{120.5, 1830.0}}});

    auto loaded = load_checkpoint<float>(path.string());
    CHECK(loaded.model.class_labels == m.class_labels);
    REQUIRE(loaded.extras.window.has_value());
    CHECK(loaded.extras.window->first == 120.5);
    CHECK(loaded.extras.window->second == 1830.0);

    auto pa = m.parameters();
    auto pb = loaded.model.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
            CHECK(pa[i]->value[j] == pb[i]->value[j]);
        }
    }

    Rng rng = seeded_rng(62);
    Tensor<float> x({1, 1, 64});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(uniform_real(rng));
    Graph<float> g(false);
    Rng unused = seeded_rng(0);
    auto la = forward(g, m, x, Mode::eval, unused);
    auto lb = forward(g, loaded.model, x, Mode::eval, unused);
    for (std::size_t c = 0; c < 5; ++c) CHECK(la->value.at(0, c) == lb->value.at(0, c));

    std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption and format errors are distinct") {
    ModelConfig cfg = tiny_config(3, 64);
    auto m = init_model<float>(cfg, 71);
    m.class_labels = {"A", "B", "C"};
    const auto path = temp_path("ramangeo_ckpt_corrupt.cnx1");
    save_checkpoint(m, path.string());

    auto bytes = read_binary_file(path.string());

    SUBCASE("flipped payload byte fails the checksum") {
        auto corrupted = bytes;
        corrupted[corrupted.size() - 100] ^= 0x01; // inside the payload region
        write_binary_file(path.string(), corrupted.data(), corrupted.size());
        CHECK_THROWS_AS(load_checkpoint<float>(path.string()), ChecksumError);
    }
    SUBCASE("bad magic") {
        auto corrupted = bytes;
        corrupted[0] = 'X';
        write_binary_file(path.string(), corrupted.data(), corrupted.size());
        CHECK_THROWS_AS(load_checkpoint<float>(path.string()), FormatError);
    }
    SUBCASE("unsupported version") {
        auto corrupted = bytes;
        corrupted[4] = 0x7F;
        write_binary_file(path.string(), corrupted.data(), corrupted.size());
        CHECK_THROWS_AS(load_checkpoint<float>(path.string()), FormatError);
    }
    SUBCASE("truncated file") {
        write_binary_file(path.string(), bytes.data(), bytes.size() / 2);
        CHECK_THROWS_AS(load_checkpoint<float>(path.string()), IoError);
    }
    std::filesystem::remove(path);
}

TEST_CASE("loading a five-class checkpoint yields five-way logits with labels") {
    ModelConfig cfg = tiny_config(5, 64);
    auto m = init_model<float>(cfg, 81);
    m.class_labels = {"Angola", "Brazil", "Chile", "Peru", "Zambia"};
    const auto path = temp_path("ramangeo_ckpt_labels.cnx1");
    save_checkpoint(m, path.string());
    auto loaded = load_checkpoint<float>(path.string());

    Rng rng = seeded_rng(82);
    Tensor<float> x({1, 1, 64});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(uniform_real(rng));
    Graph<float> g(false);
    Rng unused = seeded_rng(0);
    auto logits = forward(g, loaded.model, x, Mode::eval, unused);
    CHECK(logits->value.shape() == std::vector<std::size_t>({1, 5}));
    CHECK(loaded.model.class_labels.size() == 5);
    CHECK(loaded.model.class_labels[3] == "Peru");
    std::filesystem::remove(path);
}
