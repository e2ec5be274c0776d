#include "rtsf/train/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace rtsf::train {

void TrainSchedule::validate() const {
    if (initial_lr <= 0.0) throw ConfigError("initial learning rate must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
        throw ConfigError("plateau_factor must lie in (0,1)");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (bootstrap_epochs < 0) throw ConfigError("bootstrap_epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

ScheduleTracker::ScheduleTracker(const TrainSchedule& schedule) : sched_(schedule) {
    sched_.validate();
    lr_ = sched_.initial_lr;
}

bool ScheduleTracker::improved(double best, double loss) const {
    return (best - loss) > sched_.improvement_tol * std::max(std::abs(best), 1e-12);
}

ScheduleTracker::Decision ScheduleTracker::observe(double train_loss, double val_loss) {
    ++epoch_;
    Decision d;

    if (!have_best_train_ || improved(best_train_loss_, train_loss)) {
        best_train_loss_ = train_loss;
        have_best_train_ = true;
        plateau_count_ = 0;
    } else {
        ++plateau_count_;
        if (plateau_count_ >= sched_.plateau_patience) {
            lr_ *= sched_.plateau_factor;
            plateau_count_ = 0;
        }
    }

    if (!have_best_val_ || improved(best_val_loss_, val_loss)) {
        best_val_loss_ = val_loss;
        best_val_epoch_ = epoch_;
        have_best_val_ = true;
        d.new_best_val = true;
    }

    if (epoch_ > sched_.bootstrap_epochs) {
        const int since = epoch_ - std::max(best_val_epoch_, sched_.bootstrap_epochs);
        if (since >= sched_.early_stop_patience) d.stop = true;
    }
    if (epoch_ >= sched_.max_epochs) d.stop = true;

    d.lr = lr_;
    return d;
}

void TrainHistory::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot open history csv for writing: " + path);
    out << "epoch,train_loss,val_loss,lr\n";
    out.precision(10);
    for (const auto& row : rows)
        out << row.epoch << "," << row.train_loss << "," << row.val_loss << "," << row.lr
            << "\n";
}

}  // namespace rtsf::train
