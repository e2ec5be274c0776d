#pragma once

// Network assembly: multi-head 3D rotation over sensor triads, block-set
// feature extraction, gated feature mixing, and the classification head.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rtsf/model/config.hpp"
#include "rtsf/nn/checkpoint.hpp"
#include "rtsf/nn/graph.hpp"

namespace rtsf::model {

template <typename T>
using Var = nn::Var<T>;

// Per-forward evaluation context threaded through the blocks.
template <typename T>
struct RunCtx {
    bool training = false;
    std::mt19937_64* dropout_rng = nullptr;
    T slope = T(0.3);
    double dropout = 0.5;
    bool hard_gates = false;
};

// Test instrumentation for the gated mixer.
struct GateHooks {
    int zero_axis_gate = -1;      // force the gate of this axis to 0
    int zero_axis_features = -1;  // zero the post-MLP features of this axis instead
    bool force_gates_one = false;
};

template <typename T>
struct ForwardHooks {
    bool force_identity_rotation = false;
    const GateHooks* main_gates = nullptr;
};

// Binarisation with a straight-through gradient.
template <typename T>
Var<T> hard_threshold_st(const Var<T>& g) {
    nn::Array<T> out(g.value().shape);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = g.value().v[i] > T(0.5) ? T(1) : T(0);
    auto gp = g.node();
    return nn::detail::make_op<T>(std::move(out), {g}, [gp](nn::Node<T>& n) {
        nn::detail::ensure_grad(*gp);
        for (size_t i = 0; i < n.grad.v.size(); ++i) gp->grad.v[i] += n.grad.v[i];
    });
}

template <typename T>
class ParamRegistry {
public:
    explicit ParamRegistry(uint64_t seed) : rng_(seed) {}

    Var<T> affine_weight(const std::string& name, size_t in, size_t out) {
        return add(name, nn::glorot_uniform<T>({in, out}, in, out, rng_));
    }
    Var<T> zeros(const std::string& name, std::vector<size_t> shape) {
        return add(name, nn::Array<T>::zeros(std::move(shape)));
    }
    Var<T> ones(const std::string& name, std::vector<size_t> shape) {
        return add(name, nn::Array<T>::full(std::move(shape), T(1)));
    }
    Var<T> add(const std::string& name, nn::Array<T> init) {
        for (const auto& [n, v] : params)
            if (n == name) throw ConfigError("duplicate parameter name: " + name);
        Var<T> v = Var<T>::parameter(std::move(init));
        params.emplace_back(name, v);
        return v;
    }

    std::vector<std::pair<std::string, Var<T>>> params;

private:
    std::mt19937_64 rng_;
};

template <typename T>
struct FcLayer {
    Var<T> w, b;
    FcLayer() = default;
    FcLayer(ParamRegistry<T>& reg, const std::string& prefix, size_t in, size_t out)
        : w(reg.affine_weight(prefix + ".w", in, out)), b(reg.zeros(prefix + ".b", {out})) {}
    Var<T> apply(const Var<T>& x) const { return nn::affine(x, w, b); }
};

// Stack of fully connected stages; widths double with distance from the last
// stage, each followed by layer norm, leaky ReLU, and dropout.
template <typename T>
struct MlpBlock {
    struct Stage {
        FcLayer<T> fc;
        Var<T> gamma, beta;
    };
    std::vector<Stage> stages;
    size_t out_width = 0;

    MlpBlock() = default;
    MlpBlock(ParamRegistry<T>& reg, const std::string& prefix, size_t in, size_t base_kernels,
             size_t depth) {
        size_t width_in = in;
        for (size_t s = 0; s < depth; ++s) {
            const size_t dist = depth - 1 - s;
            const size_t width = base_kernels << dist;
            Stage st;
            const std::string sp = prefix + ".fc" + std::to_string(s);
            st.fc = FcLayer<T>(reg, sp, width_in, width);
            st.gamma = reg.ones(sp + ".ln.g", {width});
            st.beta = reg.zeros(sp + ".ln.b", {width});
            stages.push_back(std::move(st));
            width_in = width;
        }
        out_width = width_in;
    }

    Var<T> apply(Var<T> x, const RunCtx<T>& ctx) const {
        for (const auto& st : stages) {
            x = st.fc.apply(x);
            x = nn::layer_norm(x, st.gamma, st.beta);
            x = nn::leaky_relu(x, ctx.slope);
            if (ctx.training && ctx.dropout > 0.0)
                x = nn::dropout(x, ctx.dropout, *ctx.dropout_rng, true);
        }
        return x;
    }
};

// Axis-wise MLP with weights shared across axes, serialisation, final MLP.
template <typename T>
struct TsfMixerSub {
    MlpBlock<T> axis_mlp, final_mlp;
    size_t axes = 0, in_width = 0;

    TsfMixerSub() = default;
    TsfMixerSub(ParamRegistry<T>& reg, const std::string& prefix, size_t axes_, size_t in,
                size_t bk_axis, size_t d_axis, size_t bk_final, size_t d_final)
        : axes(axes_), in_width(in) {
        axis_mlp = MlpBlock<T>(reg, prefix + ".axis", in, bk_axis, d_axis);
        final_mlp =
            MlpBlock<T>(reg, prefix + ".final", axes_ * bk_axis, bk_final, d_final);
    }

    Var<T> apply(const Var<T>& x, const RunCtx<T>& ctx) const {
        const size_t batch = x.value().dim(0);
        Var<T> h = axis_mlp.apply(nn::reshape(x, {batch * axes, in_width}), ctx);
        h = nn::reshape(h, {batch, axes * axis_mlp.out_width});
        return final_mlp.apply(h, ctx);
    }
};

// The gated mixer: axis-wise features, axis- and channel-selection gates
// computed by sub-blocks from the same input, serialisation, final MLP.
template <typename T>
struct TsfMixer {
    MlpBlock<T> main_axis;
    TsfMixerSub<T> axis_gate_sub, chan_gate_sub;
    FcLayer<T> axis_gate_fc, chan_gate_fc;
    MlpBlock<T> final_mlp;
    size_t axes = 0, in_width = 0;

    TsfMixer() = default;
    // Slot order: {main axis, final, agate axis, agate final, cgate axis, cgate final}.
    TsfMixer(ParamRegistry<T>& reg, const std::string& prefix, size_t axes_, size_t in,
             const std::array<size_t, 6>& bk, const std::array<size_t, 6>& d)
        : axes(axes_), in_width(in) {
        main_axis = MlpBlock<T>(reg, prefix + ".main", in, bk[0], d[0]);
        axis_gate_sub =
            TsfMixerSub<T>(reg, prefix + ".agate", axes_, in, bk[2], d[2], bk[3], d[3]);
        axis_gate_fc = FcLayer<T>(reg, prefix + ".agate.fc", bk[3], axes_);
        chan_gate_sub =
            TsfMixerSub<T>(reg, prefix + ".cgate", axes_, in, bk[4], d[4], bk[5], d[5]);
        chan_gate_fc = FcLayer<T>(reg, prefix + ".cgate.fc", bk[5], bk[0]);
        final_mlp = MlpBlock<T>(reg, prefix + ".final", axes_ * bk[0], bk[1], d[1]);
    }

    Var<T> apply(const Var<T>& x, const RunCtx<T>& ctx, const GateHooks* hooks = nullptr) const {
        const size_t batch = x.value().dim(0);
        const size_t kmain = main_axis.out_width;
        Var<T> h = main_axis.apply(nn::reshape(x, {batch * axes, in_width}), ctx);
        h = nn::reshape(h, {batch, axes, kmain});
        if (hooks && hooks->zero_axis_features >= 0) {
            nn::Array<T> mask = nn::Array<T>::full({1, axes, 1}, T(1));
            mask.v[static_cast<size_t>(hooks->zero_axis_features)] = T(0);
            h = nn::mul(h, Var<T>::constant(std::move(mask)));
        }
        Var<T> ag = nn::sigmoid(axis_gate_fc.apply(axis_gate_sub.apply(x, ctx)));
        Var<T> cg = nn::sigmoid(chan_gate_fc.apply(chan_gate_sub.apply(x, ctx)));
        if (ctx.hard_gates && !ctx.training) {
            ag = hard_threshold_st(ag);
            cg = hard_threshold_st(cg);
        }
        if (hooks && hooks->force_gates_one) {
            ag = Var<T>::constant(nn::Array<T>::full({batch, axes}, T(1)));
            cg = Var<T>::constant(nn::Array<T>::full({batch, kmain}, T(1)));
        }
        if (hooks && hooks->zero_axis_gate >= 0) {
            nn::Array<T> mask = nn::Array<T>::full({1, axes}, T(1));
            mask.v[static_cast<size_t>(hooks->zero_axis_gate)] = T(0);
            ag = nn::mul(ag, Var<T>::constant(std::move(mask)));
        }
        Var<T> gated = nn::mul(h, nn::reshape(ag, {batch, axes, size_t{1}}));
        gated = nn::mul(gated, nn::reshape(cg, {batch, size_t{1}, kmain}));
        return final_mlp.apply(nn::reshape(gated, {batch, axes * kmain}), ctx);
    }
};

// One processing path: per-block-set mixers (weights shared across the blocks
// of a set), serialisation of all mixed block features, an MLP, and an output
// FC layer.
template <typename T>
struct PathHead {
    std::vector<TsfMixer<T>> mixers;
    MlpBlock<T> mlp;
    FcLayer<T> fc;

    PathHead() = default;
    PathHead(ParamRegistry<T>& reg, const std::string& prefix, const ModelConfig& cfg,
             size_t axes, size_t first_slot, size_t out_dim) {
        const size_t s1 = first_slot;  // 1 for the rotation path, 8 for the main path
        size_t serial_width = 0;
        for (size_t si = 0; si < cfg.block_sets.size(); ++si) {
            const auto& set = cfg.block_sets[si];
            const size_t fwidth =
                tsf::selection_width(std::span<const tsf::FeatureDef>(set.features),
                                     set.block_length) + 3;
            mixers.emplace_back(
                reg, prefix + ".set" + std::to_string(si), axes, fwidth,
                std::array<size_t, 6>{cfg.bk(s1), cfg.bk(s1 + 1), cfg.bk(s1 + 2),
                                      cfg.bk(s1 + 3), cfg.bk(s1 + 4), cfg.bk(s1 + 5)},
                std::array<size_t, 6>{cfg.d(s1), cfg.d(s1 + 1), cfg.d(s1 + 2), cfg.d(s1 + 3),
                                      cfg.d(s1 + 4), cfg.d(s1 + 5)});
            serial_width += set.block_count(cfg.segment_length) * cfg.bk(s1 + 1);
        }
        mlp = MlpBlock<T>(reg, prefix + ".mlp", serial_width, cfg.bk(s1 + 6), cfg.d(s1 + 6));
        fc = FcLayer<T>(reg, prefix + ".out", cfg.bk(s1 + 6), out_dim);
    }

    Var<T> apply(const Var<T>& base, const std::vector<std::array<int, 3>>& tags,
                 const ModelConfig& cfg, const RunCtx<T>& ctx,
                 const GateHooks* hooks = nullptr) const {
        std::vector<Var<T>> mixed;
        for (size_t si = 0; si < cfg.block_sets.size(); ++si) {
            const auto& set = cfg.block_sets[si];
            const size_t nblocks = set.block_count(cfg.segment_length);
            for (size_t b = 0; b < nblocks; ++b) {
                Var<T> feats = nn::block_features(base, b * set.stride(), set.block_length,
                                                  set.features, tags);
                mixed.push_back(mixers[si].apply(feats, ctx, hooks));
            }
        }
        Var<T> serial = mixed.size() == 1 ? mixed[0] : nn::concat(mixed, 1);
        return fc.apply(mlp.apply(serial, ctx));
    }
};

template <typename T>
class RtsfNet {
public:
    explicit RtsfNet(ModelConfig cfg)
        : cfg_(std::move(cfg)), reg_(seed_stream(cfg_.seed, 1)),
          dropout_rng_(seed_stream(cfg_.seed, 2)) {
        validate_config(cfg_);
        if (cfg_.channels.empty())
            throw ConfigError("model construction needs a channel layout");
        triads_ = rot::derive_triads(cfg_.channels);
        if (triads_.triads.empty()) throw ConfigError("channel layout yields no triad");

        const size_t ntr = triads_.triads.size();
        const size_t rot_channels = 3 * ntr;
        const size_t nonrot = triads_.non_rotatable.size();

        // Rotation path sees the rotatable channels plus one norm per triad.
        for (const auto& tri : triads_.triads)
            for (size_t idx : tri) rot_tags_.push_back(tag_of(idx));
        for (const auto& tri : triads_.triads) {
            const auto& ch = cfg_.channels[tri[0]];
            rot_tags_.push_back({ch.location, static_cast<int>(ch.sensor),
                                 static_cast<int>(rot::AxisType::Norm)});
        }
        // Main path: norms, head-major rotated copies, pass-through channels.
        for (const auto& tri : triads_.triads) {
            const auto& ch = cfg_.channels[tri[0]];
            main_tags_.push_back({ch.location, static_cast<int>(ch.sensor),
                                  static_cast<int>(rot::AxisType::Norm)});
        }
        for (size_t h = 0; h < cfg_.heads; ++h)
            for (const auto& tri : triads_.triads)
                for (size_t idx : tri) main_tags_.push_back(tag_of(idx));
        for (size_t idx : triads_.non_rotatable) main_tags_.push_back(tag_of(idx));

        if (!cfg_.disable_rotation)
            rot_head_ = PathHead<T>(reg_, "rot", cfg_, rot_channels + ntr, 1,
                                    4 * cfg_.heads);
        const size_t main_axes = ntr + cfg_.heads * rot_channels + nonrot;
        main_head_ = PathHead<T>(reg_, "main", cfg_, main_axes, 8, cfg_.class_count);
    }

    struct Output {
        Var<T> logits;
        Var<T> probs;
        Var<T> rotation_params;  // accumulated, [batch, 4*heads]; invalid when identity
    };

    Output forward(const nn::Array<T>& batch, bool training,
                   const ForwardHooks<T>* hooks = nullptr) {
        check_batch(batch);
        RunCtx<T> ctx;
        ctx.training = training;
        ctx.dropout_rng = &dropout_rng_;
        ctx.slope = static_cast<T>(cfg_.leaky_slope);
        ctx.dropout = cfg_.dropout;
        ctx.hard_gates = cfg_.hard_gates;

        Var<T> x = Var<T>::constant(batch);
        std::vector<Var<T>> triad_slices;
        std::vector<Var<T>> norm_slices;
        for (const auto& tri : triads_.triads) {
            Var<T> s = nn::slice_axis(x, 1, tri[0], 3);
            triad_slices.push_back(s);
            norm_slices.push_back(nn::l2_norm(s));
        }
        Var<T> norms = norm_slices.size() == 1 ? norm_slices[0] : nn::concat(norm_slices, 1);

        Output out;
        std::vector<Var<T>> rotated;
        const bool identity = cfg_.disable_rotation ||
                              (hooks && hooks->force_identity_rotation);
        if (identity) {
            for (size_t h = 0; h < cfg_.heads; ++h)
                for (const auto& s : triad_slices) rotated.push_back(s);
        } else {
            std::vector<Var<T>> rot_parts = triad_slices;
            rot_parts.push_back(norms);
            Var<T> rot_base = nn::concat(rot_parts, 1);
            Var<T> raw = nn::tanh_op(
                rot_head_.apply(rot_base, rot_tags_, cfg_, ctx, nullptr));
            std::vector<Var<T>> acc(cfg_.heads);
            for (size_t h = 0; h < cfg_.heads; ++h) {
                Var<T> head = nn::slice_axis(raw, 1, 4 * h, 4);
                acc[h] = h == 0 ? head : nn::add(acc[h - 1], head);
            }
            out.rotation_params = acc.size() == 1 ? acc[0] : nn::concat(acc, 1);
            for (size_t h = 0; h < cfg_.heads; ++h)
                for (const auto& s : triad_slices)
                    rotated.push_back(nn::rodrigues_rotate(acc[h], s));
        }

        std::vector<Var<T>> main_parts;
        main_parts.push_back(norms);
        for (auto& r : rotated) main_parts.push_back(r);
        for (size_t idx : triads_.non_rotatable)
            main_parts.push_back(nn::slice_axis(x, 1, idx, 1));
        Var<T> main_base = nn::concat(main_parts, 1);

        out.logits = main_head_.apply(main_base, main_tags_, cfg_, ctx,
                                      hooks ? hooks->main_gates : nullptr);
        out.probs = nn::softmax(out.logits);
        return out;
    }

    Var<T> training_loss(const nn::Array<T>& batch, const std::vector<int>& labels,
                         bool training) {
        Output out = forward(batch, training);
        return nn::softmax_cross_entropy(out.logits, labels);
    }

    std::vector<std::pair<std::string, Var<T>>>& parameters() { return reg_.params; }
    const std::vector<std::pair<std::string, Var<T>>>& parameters() const {
        return reg_.params;
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& [name, v] : reg_.params) n += v.value().size();
        return n;
    }

    const ModelConfig& config() const { return cfg_; }
    const rot::TriadMap& triad_map() const { return triads_; }
    size_t rotation_axis_count() const { return rot_tags_.size(); }
    size_t main_axis_count() const { return main_tags_.size(); }
    void reseed_dropout(uint64_t seed) { dropout_rng_.seed(seed); }

    nn::Checkpoint to_checkpoint() const {
        nn::Checkpoint ckpt;
        ckpt.config_text = canonical_config_json(cfg_);
        ckpt.config_hash = nn::fnv1a_hash(ckpt.config_text);
        for (const auto& [name, v] : reg_.params) {
            nn::NamedBlock blk;
            blk.name = name;
            blk.shape = v.value().shape;
            blk.data.reserve(v.value().size());
            for (T x : v.value().v) blk.data.push_back(static_cast<float>(x));
            ckpt.blocks.push_back(std::move(blk));
        }
        return ckpt;
    }

    void load_checkpoint_blocks(const nn::Checkpoint& ckpt) {
        if (ckpt.blocks.size() != reg_.params.size())
            throw UsageError("checkpoint has " + std::to_string(ckpt.blocks.size()) +
                             " blocks, model expects " + std::to_string(reg_.params.size()));
        for (size_t i = 0; i < ckpt.blocks.size(); ++i) {
            const auto& blk = ckpt.blocks[i];
            auto& [name, v] = reg_.params[i];
            if (blk.name != name)
                throw UsageError("checkpoint block '" + blk.name + "' does not match '" +
                                 name + "'");
            if (blk.shape != v.value().shape)
                throw UsageError("checkpoint block '" + blk.name + "' shape mismatch");
            for (size_t k = 0; k < blk.data.size(); ++k)
                v.value().v[k] = static_cast<T>(blk.data[k]);
        }
    }

private:
    std::array<int, 3> tag_of(size_t channel) const {
        const auto& ch = cfg_.channels[channel];
        return {ch.location, static_cast<int>(ch.sensor), static_cast<int>(ch.axis)};
    }

    void check_batch(const nn::Array<T>& batch) const {
        if (batch.rank() != 3)
            throw ConfigError("batch must be [segments, channels, samples], got " +
                              batch.shape_str());
        if (batch.dim(1) != cfg_.channels.size())
            throw ConfigError("batch has " + std::to_string(batch.dim(1)) +
                              " channels, layout declares " +
                              std::to_string(cfg_.channels.size()));
        if (batch.dim(2) != cfg_.segment_length)
            throw ConfigError("batch segment length " + std::to_string(batch.dim(2)) +
                              " does not match configured " +
                              std::to_string(cfg_.segment_length));
    }

    ModelConfig cfg_;
    ParamRegistry<T> reg_;
    rot::TriadMap triads_;
    std::vector<std::array<int, 3>> rot_tags_, main_tags_;
    PathHead<T> rot_head_, main_head_;
    std::mt19937_64 dropout_rng_;
};

}  // namespace rtsf::model
