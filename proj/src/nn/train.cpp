#include "crowding/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "crowding/error.hpp"
#include "crowding/rng.hpp"

namespace crowding::nn {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

Tensor make_batch(const Dataset& data, std::span<const std::size_t> idx, std::vector<int>& labels) {
    const ImageBuffer& first = data.images[idx[0]];
    Tensor batch({idx.size(), 3, static_cast<std::size_t>(first.height()), static_cast<std::size_t>(first.width())});
    labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        write_sample(batch, i, data.images[idx[i]]);
        labels[i] = data.labels[idx[i]];
    }
    return batch;
}

}  // namespace

std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("validation fraction must lie in [0, 1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

    std::vector<bool> is_val(data.size(), false);
    if (fraction > 0.0) {
        Rng rng(mix_seed(seed, 0x5a11d));
        for (auto& [label, idx] : by_class) {
            if (idx.size() < 2) continue;
            shuffle(idx, rng);
            const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * idx.size())));
            for (std::size_t k = 0; k < take && k + 1 < idx.size(); ++k) is_val[idx[k]] = true;
        }
    }
    Dataset train_set, val_set;
    for (std::size_t i = 0; i < data.size(); ++i) (is_val[i] ? val_set : train_set).add(data.images[i], data.labels[i]);
    return {std::move(train_set), std::move(val_set)};
}

std::string_view schedule_name(ScheduleMode m) { return m == ScheduleMode::Plain ? "plain" : "staged-unfreeze"; }

std::optional<ScheduleMode> schedule_from_name(std::string_view s) {
    if (s == "plain") return ScheduleMode::Plain;
    if (s == "staged-unfreeze") return ScheduleMode::StagedUnfreeze;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epoch budget must be non-negative");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("learning-rate decay must lie in (0, 1)");
    if (learning_rate < 0.0) throw ConfigError("learning rate must be non-negative");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0) throw ConfigError("validation fraction must lie in [0, 1)");
}

UnfreezeSchedule::UnfreezeSchedule(int patience, double decay) : patience_(patience), decay_(decay) {
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("learning-rate decay must lie in (0, 1)");
}

bool UnfreezeSchedule::observe(double loss) {
    if (!best_ || loss < *best_) {
        best_ = loss;
        bad_epochs_ = 0;
        return false;
    }
    if (++bad_epochs_ < patience_ || stage_ >= 3) return false;
    ++stage_;
    bad_epochs_ = 0;
    return true;
}

void UnfreezeSchedule::apply(Network& net) const {
    const auto layers = net.parameterized_layers();
    if (layers.size() < 3) throw ConfigError("staged unfreezing needs at least 3 parameterized layers");
    net.set_all_trainable(stage_ >= 3);
    if (stage_ < 3) {
        const std::size_t open = static_cast<std::size_t>(stage_);
        for (std::size_t k = 0; k < open; ++k) net.set_trainable(layers[layers.size() - 1 - k], true);
    }
}

Evaluation evaluate(const Network& net, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) return {};
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> labels;
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, data.size() - start);
        const std::span<const std::size_t> idx(order.data() + start, n);
        const Tensor batch = make_batch(data, idx, labels);
        const LossResult r = softmax_cross_entropy(net.forward(batch), labels);
        loss += r.loss * static_cast<double>(n);
        correct += r.correct;
    }
    return {loss / static_cast<double>(data.size()), static_cast<double>(correct) / static_cast<double>(data.size())};
}

TrainResult train(Network network, const Dataset& train_set, const Dataset& validation, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.size() == 0) throw DataError("training set is empty");
    for (int label : train_set.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= network.output_size())
            throw DataError("training label " + std::to_string(label) + " out of range");

    TrainResult result;
    result.optimizer = OptimizerState::for_parameters(network.parameters(), config.learning_rate);
    result.optimizer.beta1 = config.beta1;
    result.optimizer.beta2 = config.beta2;
    result.optimizer.epsilon = config.epsilon;

    std::optional<UnfreezeSchedule> schedule;
    if (config.schedule == ScheduleMode::StagedUnfreeze) {
        schedule.emplace(config.patience, config.decay);
        schedule->apply(network);
    }

    Rng rng(mix_seed(config.seed, 0x7a1));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> labels;

    std::optional<double> best_loss;
    std::vector<Parameter> best_params = network.parameters();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(order, rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - start);
            const std::span<const std::size_t> idx(order.data() + start, n);
            const Tensor batch = make_batch(train_set, idx, labels);
            ForwardCache cache;
            const Tensor logits = network.forward(batch, &cache);
            LossResult r;
            try {
                r = softmax_cross_entropy(logits, labels);
            } catch (const DivergenceError&) {
                throw DivergenceError("non-finite logits at epoch " + std::to_string(epoch) + ", batch starting at " +
                                      std::to_string(start));
            }
            if (!std::isfinite(r.loss))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                      std::to_string(start));
            loss_sum += r.loss * static_cast<double>(n);
            correct += r.correct;
            const auto grads = network.backward(cache, r.grad);
            adam_step(network, grads, result.optimizer);
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(train_set.size());
        entry.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        entry.learning_rate = result.optimizer.learning_rate;
        entry.stage = schedule ? schedule->stage() : 1;
        if (validation.size() > 0) {
            const Evaluation e = evaluate(network, validation, config.batch_size);
            entry.val_loss = e.loss;
            entry.val_accuracy = e.accuracy;
        }
        const double monitored = entry.val_loss.value_or(entry.train_loss);
        if (!std::isfinite(monitored)) throw DivergenceError("non-finite monitored loss at epoch " + std::to_string(epoch));
        if (!best_loss || monitored < *best_loss) {
            best_loss = monitored;
            best_params = network.parameters();
            result.best_epoch = epoch;
        }
        if (schedule && schedule->observe(monitored)) {
            entry.transition = true;
            result.optimizer.learning_rate *= config.decay;
            schedule->apply(network);
        }
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry, network);
    }

    if (result.best_epoch > 0) network.parameters() = std::move(best_params);
    result.network = std::move(network);
    return result;
}

TrainResult staged_unfreeze_schedule(Network network, const Dataset& train_set, const Dataset& validation,
                                     TrainConfig config, const EpochCallback& on_epoch) {
    config.schedule = ScheduleMode::StagedUnfreeze;
    return train(std::move(network), train_set, validation, config, on_epoch);
}

}  // namespace crowding::nn
