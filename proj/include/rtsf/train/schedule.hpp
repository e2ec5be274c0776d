#pragma once

// Training schedule state machine, separated from the optimisation loop so
// scripted loss traces can drive it directly in tests.

#include <cstdint>
#include <string>
#include <vector>

#include "rtsf/common.hpp"

namespace rtsf::train {

struct TrainSchedule {
    double initial_lr = 0.001;
    int max_epochs = 350;
    int plateau_patience = 10;     // epochs of flat training loss before an lr cut
    double plateau_factor = 0.8;   // lr multiplier on plateau
    int early_stop_patience = 50;  // epochs of flat validation loss
    int bootstrap_epochs = 150;    // early stopping may not fire at or before this epoch
    size_t batch_size = 64;
    uint64_t seed = 42;
    double improvement_tol = 1e-4;  // relative improvement below this is a plateau

    void validate() const;
};

// Feed one epoch at a time; epochs are 1-based. The learning-rate plateau
// watches the training loss and resets its counter after each cut. Early
// stopping watches the validation loss; its patience window only starts
// counting once the bootstrap protection has passed.
class ScheduleTracker {
public:
    explicit ScheduleTracker(const TrainSchedule& schedule);

    struct Decision {
        double lr = 0.0;
        bool stop = false;
        bool new_best_val = false;
    };

    Decision observe(double train_loss, double val_loss);

    int epoch() const { return epoch_; }
    double lr() const { return lr_; }
    int best_val_epoch() const { return best_val_epoch_; }
    double best_val_loss() const { return best_val_loss_; }

private:
    bool improved(double best, double loss) const;

    TrainSchedule sched_;
    int epoch_ = 0;
    double lr_;
    double best_train_loss_ = 0.0;
    int plateau_count_ = 0;
    bool have_best_train_ = false;
    double best_val_loss_ = 0.0;
    int best_val_epoch_ = 0;
    bool have_best_val_ = false;
};

struct TrainHistory {
    struct Row {
        int epoch = 0;
        double train_loss = 0.0;
        double val_loss = 0.0;
        double lr = 0.0;
    };
    std::vector<Row> rows;

    void write_csv(const std::string& path) const;
};

}  // namespace rtsf::train
