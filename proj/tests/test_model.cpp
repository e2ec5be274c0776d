#include <doctest.h>

#include <random>

#include "rtsf/model/network.hpp"
#include "rtsf/nn/gradcheck.hpp"

using namespace rtsf;
using model::ModelConfig;
using nn::Array;
using nn::Var;

namespace {

// The published configuration used for the six-channel waist-mounted setup.
ModelConfig reference_config() {
    ModelConfig cfg;
    cfg.class_count = 6;
    cfg.heads = 4;
    cfg.meta_tying = true;
    cfg.segment_length = 128;
    const size_t bk[14] = {128, 128, 128, 128, 128, 64, 16, 128, 128, 128, 16, 128, 64, 32};
    const size_t d[14] = {2, 3, 2, 4, 2, 1, 3, 2, 3, 2, 4, 2, 1, 1};
    for (size_t i = 0; i < 14; ++i) {
        cfg.base_kernels[i] = bk[i];
        cfg.depths[i] = d[i];
    }
    for (size_t len : {size_t{32}, size_t{128}}) {
        tsf::BlockSpec spec;
        spec.block_length = len;
        spec.features = model::default_feature_selection();
        cfg.block_sets.push_back(spec);
    }
    const char* names[6] = {"body_acc_x", "body_acc_y", "body_acc_z",
                            "body_gyro_x", "body_gyro_y", "body_gyro_z"};
    for (int i = 0; i < 6; ++i) {
        rot::ChannelInfo ch;
        ch.name = names[i];
        ch.location = 1;
        ch.sensor = i < 3 ? rot::SensorType::Acc : rot::SensorType::Gyro;
        ch.axis = static_cast<rot::AxisType>(i % 3 + 1);
        cfg.channels.push_back(ch);
    }
    return cfg;
}

Array<double> random_batch(const ModelConfig& cfg, size_t batch, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    Array<double> x({batch, cfg.channels.size(), cfg.segment_length});
    for (auto& v : x.v) v = dist(rng);
    return x;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config validation") {
    SUBCASE("the reference configuration satisfies the tying rules") {
        auto cfg = reference_config();
        CHECK_NOTHROW(model::validate_config(cfg));
    }
    SUBCASE("zero heads are rejected") {
        auto cfg = reference_config();
        cfg.heads = 0;
        CHECK_THROWS_AS(model::validate_config(cfg), ConfigError);
    }
    SUBCASE("tying violations are rejected with the constraint named") {
        auto cfg = reference_config();
        cfg.base_kernels[1] = 32;  // slot 2 != slot 9
        try {
            model::validate_config(cfg);
            FAIL("expected a config error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("base_kernels[2]") != std::string::npos);
        }
    }
    SUBCASE("six-way tie across slots 1,3,5,8,10,12") {
        auto cfg = reference_config();
        cfg.base_kernels[9] = 64;  // slot 10
        CHECK_THROWS_AS(model::validate_config(cfg), ConfigError);
    }
    SUBCASE("tying is not enforced when meta mode is off") {
        auto cfg = reference_config();
        cfg.meta_tying = false;
        cfg.base_kernels[1] = 32;
        CHECK_NOTHROW(model::validate_config(cfg));
    }
    SUBCASE("block sets must fit the segment") {
        auto cfg = reference_config();
        cfg.block_sets[1].block_length = 256;
        CHECK_THROWS_AS(model::validate_config(cfg), ConfigError);
    }
    SUBCASE("exactly 29 numeric hyperparameters") {
        CHECK(1 + reference_config().base_kernels.size() + reference_config().depths.size() ==
              29);
    }
}

TEST_CASE("config json round trip") {
    auto cfg = model::tiny_test_config();
    const std::string text = model::canonical_config_json(cfg);
    auto back = model::parse_model_config(text);
    CHECK(model::canonical_config_json(back) == text);
    CHECK(back.heads == cfg.heads);
    CHECK(back.block_sets.size() == cfg.block_sets.size());
    CHECK(back.channels.size() == cfg.channels.size());
    CHECK_THROWS_AS(model::parse_model_config("{not json"), ConfigError);
}

TEST_CASE("mlp stage widths double with distance from the last stage") {
    model::ParamRegistry<double> reg(1);
    model::MlpBlock<double> deep(reg, "deep", 40, 128, 3);
    REQUIRE(deep.stages.size() == 3);
    CHECK(deep.stages[0].fc.w.value().shape == std::vector<size_t>{40, 512});
    CHECK(deep.stages[1].fc.w.value().shape == std::vector<size_t>{512, 256});
    CHECK(deep.stages[2].fc.w.value().shape == std::vector<size_t>{256, 128});
    CHECK(deep.out_width == 128);
    model::MlpBlock<double> shallow(reg, "shallow", 999, 16, 1);
    CHECK(shallow.stages[0].fc.w.value().shape == std::vector<size_t>{999, 16});
    CHECK(shallow.out_width == 16);
}

TEST_CASE("mixer sub-block serialises axis features") {
    model::ParamRegistry<double> reg(2);
    model::TsfMixerSub<double> sub(reg, "sub", 26, 17, 128, 1, 64, 1);
    model::RunCtx<double> ctx;
    ctx.dropout = 0.0;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist;
    Array<double> x({2, 26, 17});
    for (auto& v : x.v) v = dist(rng);
    auto out = sub.apply(Var<double>::constant(x), ctx);
    CHECK(out.value().shape == std::vector<size_t>{2, 64});
    CHECK(sub.axis_mlp.out_width == 128);
}

TEST_CASE("axis-shared weights map identical axes identically") {
    model::ParamRegistry<double> reg(4);
    model::TsfMixerSub<double> sub(reg, "sub", 4, 6, 8, 1, 8, 1);
    model::RunCtx<double> ctx;
    ctx.dropout = 0.0;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist;
    Array<double> x({1, 4, 6});
    for (auto& v : x.v) v = dist(rng);
    for (size_t f = 0; f < 6; ++f) x.v[2 * 6 + f] = x.v[1 * 6 + f];  // axis 2 == axis 1
    auto h = sub.axis_mlp.apply(
        nn::reshape(Var<double>::constant(x), {4, 6}), ctx);
    for (size_t k = 0; k < 8; ++k)
        CHECK(h.value().v[1 * 8 + k] == h.value().v[2 * 8 + k]);
}

TEST_CASE("mixer gating") {
    model::ParamRegistry<double> reg(6);
    model::TsfMixer<double> mixer(reg, "mix", 5, 7, {8, 8, 8, 8, 8, 8},
                                  {1, 1, 1, 1, 1, 1});
    model::RunCtx<double> ctx;
    ctx.dropout = 0.0;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist;
    Array<double> x({3, 5, 7});
    for (auto& v : x.v) v = dist(rng);
    auto xv = Var<double>::constant(x);

    SUBCASE("gates forced to one reduce the mixer to its ungated path") {
        model::GateHooks hooks;
        hooks.force_gates_one = true;
        auto gated = mixer.apply(xv, ctx, &hooks);
        auto h = mixer.main_axis.apply(nn::reshape(xv, {15, 7}), ctx);
        auto plain = mixer.final_mlp.apply(nn::reshape(h, {3, 40}), ctx);
        REQUIRE(gated.value().size() == plain.value().size());
        for (size_t i = 0; i < plain.value().size(); ++i)
            CHECK(gated.value().v[i] == doctest::Approx(plain.value().v[i]).epsilon(1e-12));
    }
    SUBCASE("a zero axis gate equals zeroing that axis's mixed features") {
        model::GateHooks gate_zero;
        gate_zero.zero_axis_gate = 2;
        model::GateHooks feat_zero;
        feat_zero.zero_axis_features = 2;
        auto a = mixer.apply(xv, ctx, &gate_zero);
        auto b = mixer.apply(xv, ctx, &feat_zero);
        CHECK(a.value().v == b.value().v);  // exact
    }
    SUBCASE("soft gates scale entries proportionally") {
        auto out = mixer.apply(xv, ctx, nullptr);
        CHECK(out.value().shape == std::vector<size_t>{3, 8});
        for (double v : out.value().v) CHECK(std::isfinite(v));
    }
}

TEST_CASE("hard gate mode binarises at inference with straight-through gradient") {
    auto g = Var<double>::parameter(Array<double>({4}, {0.2, 0.6, 0.5, 0.9}));
    auto h = model::hard_threshold_st(g);
    CHECK(h.value().v == std::vector<double>{0, 1, 0, 1});
    auto loss = nn::reduce_sum(h);
    nn::backward(loss);
    for (double gv : g.grad().v) CHECK(gv == 1.0);
}

TEST_CASE("network shapes on the six-channel reference layout") {
    auto cfg = reference_config();
    // shrink widths for test speed; structure is what matters here
    cfg.base_kernels.fill(8);
    cfg.depths.fill(1);
    cfg.meta_tying = false;
    cfg.heads = 4;
    cfg.dropout = 0.0;
    model::RtsfNet<double> net(cfg);
    CHECK(net.triad_map().triads.size() == 2);
    CHECK(net.rotation_axis_count() == 8);  // 6 channels + 2 norms
    CHECK(net.main_axis_count() == 26);     // 2 norms + 4 heads x 6 + 0 pass-through

    auto batch = random_batch(cfg, 3, 11);
    auto out = net.forward(batch, false);
    CHECK(out.logits.value().shape == std::vector<size_t>{3, 6});
    CHECK(out.probs.value().shape == std::vector<size_t>{3, 6});
    for (size_t r = 0; r < 3; ++r) {
        double s = 0;
        for (size_t c = 0; c < 6; ++c) s += out.probs.value().v[r * 6 + c];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(out.rotation_params.value().shape == std::vector<size_t>{3, 16});
}

TEST_CASE("batch shape errors are configuration errors") {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<double> net(cfg);
    CHECK_THROWS_AS(net.forward(Array<double>({2, 5, 16}), false), ConfigError);
    CHECK_THROWS_AS(net.forward(Array<double>({2, 6, 20}), false), ConfigError);
    CHECK_THROWS_AS(net.forward(Array<double>({12, 16}), false), ConfigError);
}

TEST_CASE("same config and seed build identical parameters") {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<double> a(cfg), b(cfg);
    REQUIRE(a.parameters().size() == b.parameters().size());
    for (size_t i = 0; i < a.parameters().size(); ++i) {
        CHECK(a.parameters()[i].first == b.parameters()[i].first);
        CHECK(a.parameters()[i].second.value().v == b.parameters()[i].second.value().v);
    }
    cfg.seed = 1234;
    model::RtsfNet<double> c(cfg);
    bool any_diff = false;
    for (size_t i = 0; i < a.parameters().size() && !any_diff; ++i)
        any_diff = a.parameters()[i].second.value().v != c.parameters()[i].second.value().v;
    CHECK(any_diff);
}

TEST_CASE("zeroed rotation outputs reproduce identity rotations") {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<double> net(cfg);
    for (auto& [name, p] : net.parameters())
        if (name == "rot.out.w" || name == "rot.out.b")
            std::fill(p.value().v.begin(), p.value().v.end(), 0.0);
    auto batch = random_batch(cfg, 2, 21);
    auto zeroed = net.forward(batch, false);
    model::ForwardHooks<double> hooks;
    hooks.force_identity_rotation = true;
    auto identity = net.forward(batch, false, &hooks);
    REQUIRE(zeroed.probs.value().size() == identity.probs.value().size());
    for (size_t i = 0; i < zeroed.probs.value().size(); ++i)
        CHECK(zeroed.probs.value().v[i] ==
              doctest::Approx(identity.probs.value().v[i]).epsilon(1e-6));
    // with zeroed parameters the rotation parameters are exactly zero
    for (double v : zeroed.rotation_params.value().v) CHECK(v == 0.0);
}

TEST_CASE("rotation-disabled config drops the rotation head parameters") {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<double> full(cfg);
    cfg.disable_rotation = true;
    model::RtsfNet<double> ablated(cfg);
    CHECK(ablated.parameter_count() < full.parameter_count());
    for (const auto& [name, p] : ablated.parameters())
        CHECK(name.rfind("rot.", 0) != 0);
    auto batch = random_batch(cfg, 2, 31);
    auto out = ablated.forward(batch, false);
    CHECK(out.probs.value().shape == std::vector<size_t>{2, 3});
    CHECK_FALSE(out.rotation_params.valid());
}

TEST_CASE("classification loss sends gradient into the rotation path") {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<double> net(cfg);
    auto batch = random_batch(cfg, 4, 41);
    auto loss = net.training_loss(batch, {0, 1, 2, 0}, false);
    nn::backward(loss);
    double rot_grad_norm = 0;
    for (const auto& [name, p] : net.parameters())
        if (name.rfind("rot.", 0) == 0 && !p.grad().v.empty())
            for (double g : p.grad().v) rot_grad_norm += g * g;
    CHECK(rot_grad_norm > 0.0);
}

TEST_CASE("full-forward gate annihilation matches feature zeroing") {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<double> net(cfg);
    auto batch = random_batch(cfg, 2, 51);
    model::GateHooks gate_zero;
    gate_zero.zero_axis_gate = 3;
    model::GateHooks feat_zero;
    feat_zero.zero_axis_features = 3;
    model::ForwardHooks<double> h1, h2;
    h1.main_gates = &gate_zero;
    h2.main_gates = &feat_zero;
    auto a = net.forward(batch, false, &h1);
    auto b = net.forward(batch, false, &h2);
    CHECK(a.logits.value().v == b.logits.value().v);  // exact
}

TEST_CASE("shipped dataset configurations parse and validate") {
    for (const char* name : {"ucihar", "ucihar_no_rotation", "pamap2", "daphnet",
                             "opportunity", "tiny"}) {
        CAPTURE(name);
        auto cfg = model::load_model_config(std::string(CONFIG_DIR) + "/" + name + ".json");
        if (cfg.segment_length == 0)
            cfg.segment_length = cfg.block_sets.back().block_length;
        if (cfg.class_count == 0) cfg.class_count = 2;
        CHECK_NOTHROW(model::validate_config(cfg));
        CHECK(cfg.base_kernels.size() + cfg.depths.size() + 1 == 29);
    }
}

TEST_CASE("checkpoint save and load restore the exact parameters") {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<float> net(cfg);
    auto ckpt = net.to_checkpoint();
    CHECK(ckpt.config_hash == nn::fnv1a_hash(model::canonical_config_json(cfg)));
    model::RtsfNet<float> other(cfg);
    for (auto& [name, p] : other.parameters())
        for (auto& v : p.value().v) v += 1.0f;
    other.load_checkpoint_blocks(ckpt);
    for (size_t i = 0; i < net.parameters().size(); ++i)
        CHECK(net.parameters()[i].second.value().v ==
              other.parameters()[i].second.value().v);
    nn::Checkpoint bad = ckpt;
    bad.blocks.pop_back();
    CHECK_THROWS_AS(other.load_checkpoint_blocks(bad), UsageError);
}

}  // TEST_SUITE
