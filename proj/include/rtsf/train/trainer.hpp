#pragma once

// Mini-batch training loop with adaptive-moment updates, lr-on-plateau
// reduction, bootstrap-protected early stopping, and final-model selection
// between the best-validation and last-epoch checkpoints.

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <vector>

#include "rtsf/data/metrics.hpp"
#include "rtsf/data/stream.hpp"
#include "rtsf/model/network.hpp"
#include "rtsf/nn/checkpoint.hpp"
#include "rtsf/train/schedule.hpp"

namespace rtsf::train {

template <typename T>
struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<std::vector<double>> m, v;
    long long t = 0;

    void init(const std::vector<std::pair<std::string, nn::Var<T>>>& params) {
        m.clear();
        v.clear();
        for (const auto& [name, p] : params) {
            m.emplace_back(p.value().size(), 0.0);
            v.emplace_back(p.value().size(), 0.0);
        }
        t = 0;
    }

    void step(std::vector<std::pair<std::string, nn::Var<T>>>& params, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = params[pi].second;
            if (p.grad().v.empty()) continue;  // parameter untouched by this graph
            auto& vals = p.value().v;
            const auto& g = p.grad().v;
            for (size_t i = 0; i < vals.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m[pi][i] = beta1 * m[pi][i] + (1.0 - beta1) * gi;
                v[pi][i] = beta2 * v[pi][i] + (1.0 - beta2) * gi * gi;
                const double mhat = m[pi][i] / bc1;
                const double vhat = v[pi][i] / bc2;
                vals[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
            }
            p.clear_grad();  // a later graph may not touch this parameter
        }
    }
};

template <typename T>
struct Batch {
    nn::Array<T> x;
    std::vector<int> labels;
};

template <typename T>
Batch<T> make_batch(const std::vector<data::Segment>& segs, const std::vector<size_t>& idx,
                    size_t first, size_t count, size_t channels, size_t window) {
    Batch<T> b;
    b.x = nn::Array<T>({count, channels, window});
    b.labels.resize(count);
    for (size_t i = 0; i < count; ++i) {
        const auto& seg = segs[idx[first + i]];
        b.labels[i] = seg.label;
        for (size_t k = 0; k < channels * window; ++k)
            b.x.v[i * channels * window + k] = static_cast<T>(seg.data[k]);
    }
    return b;
}

// Mean cross-entropy over a split, dropout off.
template <typename T>
double dataset_loss(model::RtsfNet<T>& net, const std::vector<data::Segment>& segs,
                    size_t batch_size) {
    if (segs.empty()) throw UsageError("loss over an empty split");
    const size_t channels = net.config().channels.size();
    const size_t window = net.config().segment_length;
    std::vector<size_t> idx(segs.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    double total = 0.0;
    for (size_t start = 0; start < segs.size(); start += batch_size) {
        const size_t count = std::min(batch_size, segs.size() - start);
        auto batch = make_batch<T>(segs, idx, start, count, channels, window);
        auto loss = net.training_loss(batch.x, batch.labels, /*training=*/false);
        total += static_cast<double>(loss.value().v[0]) * static_cast<double>(count);
    }
    return total / static_cast<double>(segs.size());
}

template <typename T>
data::EvalReport evaluate(model::RtsfNet<T>& net, const std::vector<data::Segment>& segs,
                          size_t batch_size = 64) {
    const size_t channels = net.config().channels.size();
    const size_t window = net.config().segment_length;
    const size_t classes = net.config().class_count;
    data::ConfusionMatrix confusion(classes, std::vector<long long>(classes, 0));
    std::vector<size_t> idx(segs.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (size_t start = 0; start < segs.size(); start += batch_size) {
        const size_t count = std::min(batch_size, segs.size() - start);
        auto batch = make_batch<T>(segs, idx, start, count, channels, window);
        auto out = net.forward(batch.x, /*training=*/false);
        for (size_t i = 0; i < count; ++i) {
            const T* row = out.probs.value().v.data() + i * classes;
            size_t arg = 0;
            for (size_t c = 1; c < classes; ++c)
                if (row[c] > row[arg]) arg = c;
            confusion[static_cast<size_t>(batch.labels[i])][arg] += 1;
        }
    }
    return data::compute_metrics(confusion);
}

struct TrainResult {
    TrainHistory history;
    nn::Checkpoint best;   // lowest validation loss
    nn::Checkpoint final;  // last epoch
    int best_epoch = 0;
    int last_epoch = 0;
};

template <typename T>
TrainResult train(model::RtsfNet<T>& net, const std::vector<data::Segment>& train_set,
                  const std::vector<data::Segment>& val_set, const TrainSchedule& sched,
                  std::ostream* log = nullptr) {
    sched.validate();
    if (train_set.empty() || val_set.empty())
        throw UsageError("training needs non-empty train and validation splits");
    const size_t channels = net.config().channels.size();
    const size_t window = net.config().segment_length;

    Adam<T> opt;
    opt.init(net.parameters());
    ScheduleTracker tracker(sched);
    std::mt19937_64 shuffle_rng(seed_stream(sched.seed, 11));
    net.reseed_dropout(seed_stream(sched.seed, 12));

    TrainResult result;
    std::vector<size_t> idx(train_set.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    double lr = sched.initial_lr;
    for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < idx.size(); start += sched.batch_size) {
            const size_t count = std::min(sched.batch_size, idx.size() - start);
            auto batch = make_batch<T>(train_set, idx, start, count, channels, window);
            auto loss = net.training_loss(batch.x, batch.labels, /*training=*/true);
            const double lv = static_cast<double>(loss.value().v[0]);
            if (!std::isfinite(lv)) {
                result.history.rows.push_back({epoch, lv, 0.0, lr});
                throw DomainError("training loss became non-finite at epoch " +
                                  std::to_string(epoch) + ", batch offset " +
                                  std::to_string(start));
            }
            epoch_loss += lv * static_cast<double>(count);
            nn::backward(loss);
            opt.step(net.parameters(), lr);
        }
        epoch_loss /= static_cast<double>(idx.size());
        const double val_loss = dataset_loss(net, val_set, sched.batch_size);
        const auto decision = tracker.observe(epoch_loss, val_loss);
        lr = decision.lr;
        result.history.rows.push_back({epoch, epoch_loss, val_loss, lr});
        if (decision.new_best_val) {
            result.best = net.to_checkpoint();
            result.best_epoch = epoch;
        }
        result.last_epoch = epoch;
        if (log)
            (*log) << "epoch " << epoch << " train_loss " << epoch_loss << " val_loss "
                   << val_loss << " lr " << lr << "\n";
        if (decision.stop) break;
    }
    result.final = net.to_checkpoint();
    if (result.best.blocks.empty()) {
        result.best = result.final;
        result.best_epoch = result.last_epoch;
    }
    return result;
}

// Compares the best-validation-loss and last-epoch candidates on the
// validation split: higher macro F1 wins, ties break to lower loss.
template <typename T>
nn::Checkpoint select_final_model(model::RtsfNet<T>& net, const nn::Checkpoint& best,
                                  const nn::Checkpoint& last,
                                  const std::vector<data::Segment>& val_set,
                                  size_t batch_size = 64) {
    if (best.blocks.empty() || last.blocks.empty())
        throw UsageError("final-model selection needs both candidate checkpoints");
    net.load_checkpoint_blocks(best);
    const auto rep_best = evaluate(net, val_set, batch_size);
    const double loss_best = dataset_loss(net, val_set, batch_size);
    net.load_checkpoint_blocks(last);
    const auto rep_last = evaluate(net, val_set, batch_size);
    const double loss_last = dataset_loss(net, val_set, batch_size);
    const bool keep_last = rep_last.macro_f1 > rep_best.macro_f1 ||
                           (rep_last.macro_f1 == rep_best.macro_f1 &&
                            loss_last <= loss_best);
    if (keep_last) return last;
    net.load_checkpoint_blocks(best);
    return best;
}

}  // namespace rtsf::train
