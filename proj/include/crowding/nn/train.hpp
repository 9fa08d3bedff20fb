#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "crowding/image.hpp"
#include "crowding/nn/adam.hpp"
#include "crowding/nn/network.hpp"

namespace crowding::nn {

struct Dataset {
    std::vector<ImageBuffer> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
    void add(ImageBuffer image, int label) {
        images.push_back(std::move(image));
        labels.push_back(label);
    }
};

/// Class-stratified seeded split; returns {train, validation}. Each class with
/// at least two samples contributes max(1, round(fraction * count)) samples
/// to validation when fraction > 0.
std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction, std::uint64_t seed);

enum class ScheduleMode : std::uint8_t { Plain, StagedUnfreeze };

std::string_view schedule_name(ScheduleMode m);
std::optional<ScheduleMode> schedule_from_name(std::string_view s);

struct TrainConfig {
    int epochs = 60;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
    double learning_rate = 0.01;
    int patience = 2;
    double decay = 1e-2;
    ScheduleMode schedule = ScheduleMode::Plain;
    double validation_fraction = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Throws ConfigError on out-of-domain values.
    void validate() const;
};

/// Three-stage fine-tuning schedule driven by the monitored loss: stage 1
/// trains only the output layer; each time the loss fails to improve for
/// `patience` consecutive epochs, the next stage opens (stage 2: the last two
/// parameterized layers, stage 3: everything) and the learning rate is
/// multiplied by `decay`.
class UnfreezeSchedule {
public:
    UnfreezeSchedule(int patience, double decay);

    int stage() const { return stage_; }
    int epochs_without_improvement() const { return bad_epochs_; }

    /// Records one epoch's monitored loss. Returns true when a stage
    /// transition fires at the end of this epoch.
    bool observe(double loss);

    /// Applies the current stage's trainable mask to `net`.
    void apply(Network& net) const;

private:
    int patience_;
    double decay_;
    int stage_ = 1;
    int bad_epochs_ = 0;
    std::optional<double> best_;
};

struct EpochLog {
    int epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
    double learning_rate = 0.0;
    int stage = 1;
    bool transition = false;  ///< a schedule stage opened after this epoch
};

struct TrainResult {
    Network network;  ///< parameters of the best monitored epoch
    OptimizerState optimizer;
    std::vector<EpochLog> log;
    int best_epoch = 0;
};

/// Called after every epoch with the log entry and the live (not best) network.
using EpochCallback = std::function<void(const EpochLog&, const Network&)>;

/// Mini-batch ADAM training with seeded shuffling. The monitored loss is the
/// validation loss, or the training loss when `validation` is empty.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(Network network, const Dataset& train_set, const Dataset& validation, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// train() with the schedule forced to StagedUnfreeze.
TrainResult staged_unfreeze_schedule(Network network, const Dataset& train_set, const Dataset& validation,
                                     TrainConfig config, const EpochCallback& on_epoch = {});

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const Network& net, const Dataset& data, std::size_t batch_size = 32);

}  // namespace crowding::nn
