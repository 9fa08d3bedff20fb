#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "crowding/sweep.hpp"

namespace crowding {

TrialRecord make_record(const StimulusSpec& spec, std::span<const float> probabilities, const std::string& run_id,
                        const std::string& model_id) {
    if (probabilities.size() != kNumClasses)
        throw ShapeError("classifier returned " + std::to_string(probabilities.size()) + " probabilities, expected " +
                         std::to_string(kNumClasses));
    TrialRecord r;
    r.run_id = run_id;
    r.model_id = model_id;
    r.spec = spec;
    std::copy(probabilities.begin(), probabilities.end(), r.probabilities.begin());
    r.predicted = nn::argmax(probabilities);
    r.correct = r.predicted == static_cast<int>(spec.target);
    return r;
}

std::vector<TrialRecord> run_sweep(const nn::Network& network, const std::vector<StimulusSpec>& grid,
                                   const SweepSettings& settings, unsigned workers, const SweepProgress& progress) {
    if (network.input_shape() != nn::Shape{3, static_cast<std::size_t>(settings.scene.canvas.height),
                                           static_cast<std::size_t>(settings.scene.canvas.width)})
        throw ConfigError("checkpoint input " + nn::shape_string(network.input_shape()) + " does not match the " +
                          std::to_string(settings.scene.canvas.width) + "x" +
                          std::to_string(settings.scene.canvas.height) + " canvas");
    if (network.output_size() != kNumClasses) throw ConfigError("classifier must have 10 outputs");
    workers = std::max(1u, workers);

    // Workers claim fixed-size chunks in order and write into their own slots,
    // so the result never depends on scheduling.
    constexpr std::size_t kChunk = 32;
    std::vector<TrialRecord> records(grid.size());
    std::vector<char> done(grid.size(), 0);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> finished{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error_message;

    auto work = [&] {
        try {
            for (;;) {
                const std::size_t start = next.fetch_add(kChunk);
                if (start >= grid.size() || failed.load()) return;
                const std::size_t end = std::min(grid.size(), start + kChunk);
                for (std::size_t i = start; i < end; ++i) {
                    const StimulusSpec& spec = grid[i];
                    ImageBuffer image = compose_scene(spec, settings.scene);
                    if (spec.acuity) image = apply_acuity(image, settings.profile);
                    records[i] = make_record(spec, nn::predict(network, image), settings.run_id, settings.model_id);
                    done[i] = 1;
                }
                const std::size_t total_done = finished.fetch_add(end - start) + (end - start);
                if (progress) progress(total_done, grid.size());
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!failed.exchange(true)) error_message = e.what();
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    if (failed) {
        const std::size_t completed =
            static_cast<std::size_t>(std::find(done.begin(), done.end(), 0) - done.begin());
        records.resize(completed);
        throw SweepError("sweep aborted after " + std::to_string(completed) + " of " + std::to_string(grid.size()) +
                             " specs: " + error_message,
                         completed, std::move(records));
    }
    return records;
}

}  // namespace crowding
