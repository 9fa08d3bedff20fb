#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

#include "crowding/cli.hpp"
#include "crowding/image_io.hpp"
#include "crowding/nn/checkpoint.hpp"
#include "crowding/rng.hpp"

namespace crowding::cli {

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void say(Logger log, const std::string& line) {
    if (log) *log << line << std::endl;
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Creates out/<run id>. Runs are append-only, so an existing directory is an
// error rather than something to overwrite.
CommandResult open_run(const ExperimentConfig& config, const std::string& command,
                       const std::vector<std::string>& digests) {
    CommandResult r;
    r.run_id = make_run_id(config, command, digests);
    r.run_dir = std::filesystem::path(config.out) / r.run_id;
    if (std::filesystem::exists(r.run_dir))
        throw DataError("run directory " + r.run_dir.string() + " already exists; runs are never overwritten");
    std::error_code ec;
    std::filesystem::create_directories(r.run_dir, ec);
    if (ec) throw DataError("cannot create " + r.run_dir.string() + ": " + ec.message());
    r.manifest.run_id = r.run_id;
    r.manifest.command = command;
    r.manifest.seed = config.seed;
    r.manifest.config = dump_config(config);
    r.manifest.started = utc_now();
    return r;
}

void close_run(CommandResult& r) {
    r.manifest.finished = utc_now();
    write_manifest(r.manifest, r.run_dir / "manifest.json");
}

std::string artifact(const CommandResult& r, const std::filesystem::path& p) {
    return std::filesystem::relative(p, r.run_dir).generic_string();
}

GridConfig test_grid(const ExperimentConfig& config) {
    GridConfig g = config.grid;
    g.acuity = config.acuity_test;
    g.flip_background = config.background_flip;
    return g;
}

std::string spec_row(const StimulusSpec& s) {
    std::ostringstream o;
    o << mode_name(s.mode) << ',' << side_name(s.side) << ',' << (s.acuity ? 1 : 0) << ',' << symbol(s.target) << ','
      << polarity_name(s.target_polarity) << ',' << (s.flanker ? std::string(1, symbol(*s.flanker)) : "none") << ','
      << (s.flanker ? std::string(polarity_name(s.flanker_polarity)) : "none") << ',' << s.size_pt << ','
      << s.spacing_px << ',' << s.angle_deg;
    return o.str();
}

double flanked_accuracy(const std::vector<TrialRecord>& records, bool flanked) {
    std::size_t ok = 0, n = 0;
    for (const auto& r : records)
        if ((r.spec.mode != FlankMode::Unflanked) == flanked) {
            ok += r.correct ? 1 : 0;
            ++n;
        }
    return n ? static_cast<double>(ok) / static_cast<double>(n) : std::nan("");
}

void put_metric(RunManifest& m, const std::string& key, double v) {
    if (std::isfinite(v)) m.metrics[key] = v;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DivergenceError*>(&e)) return 4;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    return 1;
}

CommandResult cmd_stimuli(const ExperimentConfig& config, int sample_count, Logger log) {
    config.validate();
    if (sample_count < 0) throw ConfigError("sample count must be non-negative");
    const GridConfig grid_config = test_grid(config);
    const auto grid = build_grid(grid_config);
    CommandResult r = open_run(config, "stimuli samples=" + std::to_string(sample_count), {});

    const auto listing = r.run_dir / "grid.csv";
    {
        std::ofstream out(listing);
        if (!out) throw DataError("cannot write " + listing.string());
        out << "# flanked specs: " << grid_config.flanked_count() << "\n";
        out << "# unflanked specs: " << grid.size() - grid_config.flanked_count() << "\n";
        out << "# total specs: " << grid.size() << "\n";
        out << "index,mode,side,acuity,target,target_polarity,flanker,flanker_polarity,size_pt,spacing_px,angle_deg\n";
        for (std::size_t i = 0; i < grid.size(); ++i) out << i << ',' << spec_row(grid[i]) << '\n';
    }
    r.manifest.artifacts["grid"] = artifact(r, listing);
    r.manifest.metrics["flanked_specs"] = static_cast<double>(grid_config.flanked_count());
    r.manifest.metrics["total_specs"] = static_cast<double>(grid.size());
    say(log, "grid: " + std::to_string(grid_config.flanked_count()) + " flanked + " +
                 std::to_string(grid.size() - grid_config.flanked_count()) + " unflanked specs");

    if (sample_count > 0) {
        const SceneSettings scene = config.scene();
        const AcuityProfile profile = config.acuity_profile();
        const auto dir = r.run_dir / "samples";
        std::filesystem::create_directories(dir);
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(sample_count), grid.size());
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = k * grid.size() / n;
            ImageBuffer img = compose_scene(grid[i], scene);
            if (grid[i].acuity) img = apply_acuity(img, profile);
            char name[32];
            std::snprintf(name, sizeof name, "spec_%07zu.png", i);
            write_png(img, dir / name);
        }
        r.manifest.artifacts["samples"] = artifact(r, dir);
        say(log, "wrote " + std::to_string(n) + " sample stimuli to " + dir.string());
    }
    r.manifest.stages["stimuli"] = true;
    close_run(r);
    return r;
}

CommandResult cmd_train(const ExperimentConfig& config, Logger log) {
    config.validate();
    std::vector<std::string> notes;
    const nn::Dataset data = build_training_set(config, &notes);  // config errors surface before any output
    CommandResult r = open_run(config, "train", {});
    r.manifest.notes = notes;
    for (const auto& n : notes) say(log, "note: " + n);

    nn::TrainConfig tc = config.train;
    tc.seed = mix_seed(config.seed, 0x7ea1);
    const auto [train_set, val_set] = nn::split_validation(data, tc.validation_fraction, config.seed);
    say(log, "training on " + std::to_string(train_set.size()) + " images, validating on " +
                 std::to_string(val_set.size()));

    const auto log_path = r.run_dir / "train_log.csv";
    std::ofstream csv(log_path);
    if (!csv) throw DataError("cannot write " + log_path.string());
    csv << "epoch,stage,learning_rate,train_loss,train_accuracy,val_loss,val_accuracy,transition\n";
    auto on_epoch = [&](const nn::EpochLog& e, const nn::Network&) {
        csv << e.epoch << ',' << e.stage << ',' << e.learning_rate << ',' << fixed(e.train_loss, 6) << ','
            << fixed(e.train_accuracy) << ',' << (e.val_loss ? fixed(*e.val_loss, 6) : "") << ','
            << (e.val_accuracy ? fixed(*e.val_accuracy) : "") << ',' << (e.transition ? 1 : 0) << '\n';
        say(log, "epoch " + std::to_string(e.epoch) + " loss " + fixed(e.train_loss) + " acc " +
                     fixed(e.train_accuracy) +
                     (e.val_loss ? " val_loss " + fixed(*e.val_loss) + " val_acc " + fixed(*e.val_accuracy) : ""));
    };

    nn::Network net = nn::build_simplenet(config.canvas, kNumClasses, config.negative_slope, config.net,
                                          mix_seed(config.seed, 0x1417));
    nn::TrainResult result;
    try {
        result = nn::train(std::move(net), train_set, val_set, tc, on_epoch);
    } catch (const DivergenceError& e) {
        csv.flush();
        r.manifest.artifacts["train_log"] = artifact(r, log_path);
        r.manifest.stages["train"] = false;
        r.manifest.notes.push_back(std::string("diverged: ") + e.what());
        close_run(r);
        throw;
    }
    csv.close();

    const auto ckpt = r.run_dir / "checkpoint.crwd";
    nn::save_checkpoint(result.network, &result.optimizer, ckpt);

    // Accuracy of the retained network on the clean unflanked letters.
    nn::Dataset letters;
    const SceneSettings scene = config.scene();
    const AcuityProfile profile = config.acuity_profile();
    for (Letter l : kTargetLetters)
        for (Polarity p : {Polarity::White, Polarity::Black})
            for (int size : config.grid.sizes) {
                StimulusSpec s;
                s.target = l;
                s.target_polarity = p;
                s.size_pt = size;
                s.side = config.grid.side;
                s.eccentricity_px = config.grid.eccentricity_px;
                ImageBuffer img = compose_scene(s, scene);
                if (config.acuity_train) img = apply_acuity(img, profile);
                letters.add(std::move(img), static_cast<int>(l));
            }
    const auto train_eval = nn::evaluate(result.network, data, tc.batch_size);
    const auto letter_eval = nn::evaluate(result.network, letters, tc.batch_size);
    put_metric(r.manifest, "best_epoch", result.best_epoch);
    put_metric(r.manifest, "dataset_accuracy", train_eval.accuracy);
    put_metric(r.manifest, "unflanked_letter_accuracy", letter_eval.accuracy);
    if (!val_set.images.empty()) {
        const auto val_eval = nn::evaluate(result.network, val_set, tc.batch_size);
        put_metric(r.manifest, "validation_accuracy", val_eval.accuracy);
        put_metric(r.manifest, "validation_loss", val_eval.loss);
        say(log, "validation accuracy " + fixed(val_eval.accuracy));
    }
    say(log, "unflanked letter accuracy " + fixed(letter_eval.accuracy) + " (best epoch " +
                 std::to_string(result.best_epoch) + ")");

    r.manifest.artifacts["checkpoint"] = artifact(r, ckpt);
    r.manifest.artifacts["train_log"] = artifact(r, log_path);
    r.manifest.stages["train"] = true;
    close_run(r);
    say(log, "checkpoint: " + ckpt.string());
    return r;
}

CommandResult cmd_sweep(const ExperimentConfig& config, const std::filesystem::path& checkpoint, Logger log) {
    config.validate();
    const std::string digest = file_digest(checkpoint);
    const nn::Checkpoint ck = nn::load_checkpoint(checkpoint);
    const nn::Shape expected{3, static_cast<std::size_t>(config.canvas.height), static_cast<std::size_t>(config.canvas.width)};
    if (ck.network.input_shape() != expected)
        throw ConfigError("checkpoint expects input " + nn::shape_string(ck.network.input_shape()) + " but the canvas is " +
                          std::to_string(config.canvas.width) + "x" + std::to_string(config.canvas.height));
    const GridConfig grid_config = test_grid(config);
    const auto grid = build_grid(grid_config);

    CommandResult r = open_run(config, "sweep", {digest});
    r.manifest.inputs["checkpoint"] = std::filesystem::absolute(checkpoint).lexically_normal().string();
    r.manifest.inputs["checkpoint_crc32"] = digest;

    SweepSettings settings;
    settings.scene = config.scene();
    settings.profile = config.acuity_profile();
    settings.run_id = r.run_id;
    settings.model_id = "simplenet-" + digest;

    say(log, "sweeping " + std::to_string(grid.size()) + " specs with " + std::to_string(config.workers) + " worker(s)");
    std::size_t next_report = 0;
    std::mutex progress_mutex;
    const auto t0 = std::chrono::steady_clock::now();
    auto progress = [&](std::size_t done, std::size_t total) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        if (done < next_report && done != total) return;
        next_report = done + std::max<std::size_t>(1, total / 20);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        say(log, "  " + std::to_string(done) + "/" + std::to_string(total) + " (" + fixed(secs, 1) + " s)");
    };

    std::vector<TrialRecord> records;
    try {
        records = run_sweep(ck.network, grid, settings, config.workers, progress);
    } catch (const SweepError& e) {
        const auto partial = r.run_dir / "records.partial.csv";
        write_records(e.partial, partial);
        r.manifest.artifacts["partial_records"] = artifact(r, partial);
        r.manifest.metrics["completed_specs"] = static_cast<double>(e.completed);
        r.manifest.stages["sweep"] = false;
        r.manifest.notes.push_back(e.what());
        close_run(r);
        throw;
    }
    const auto path = r.run_dir / "records.csv";
    write_records(records, path);
    put_metric(r.manifest, "flanked_accuracy", flanked_accuracy(records, true));
    put_metric(r.manifest, "unflanked_accuracy", flanked_accuracy(records, false));
    r.manifest.metrics["records"] = static_cast<double>(records.size());
    r.manifest.artifacts["records"] = artifact(r, path);
    r.manifest.stages["sweep"] = true;
    close_run(r);
    say(log, "records: " + path.string());
    return r;
}

CommandResult cmd_analyze(const ExperimentConfig& config, const std::vector<std::filesystem::path>& records,
                          Logger log) {
    config.validate();
    if (records.empty()) throw ConfigError("analyze needs at least one record file");
    std::vector<std::string> digests;
    std::vector<TrialRecord> all;
    for (const auto& p : records) {
        digests.push_back(file_digest(p));
        auto part = read_records(p);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    ReportOptions opt;
    opt.eccentricity_px = config.grid.eccentricity_px;
    if (config.radial_distance > 0) opt.radial_distance = config.radial_distance;
    opt.fits = config.analysis_fits;
    const CrowdingReport report = build_report(all, opt);

    CommandResult r = open_run(config, "analyze", digests);
    for (std::size_t i = 0; i < records.size(); ++i) {
        r.manifest.inputs["records_" + std::to_string(i)] = std::filesystem::absolute(records[i]).lexically_normal().string();
        r.manifest.inputs["records_" + std::to_string(i) + "_crc32"] = digests[i];
    }
    const auto dir = r.run_dir / "report";
    for (const auto& f : render_report(report, dir)) r.manifest.artifacts[f.stem().string()] = artifact(r, f);
    r.manifest.notes = report.notes;

    put_metric(r.manifest, "unflanked_accuracy", report.curve.unflanked_accuracy());
    double flanked_ok = 0, flanked_n = 0;
    for (const auto& p : report.curve.points) {
        flanked_ok += static_cast<double>(p.tally.correct);
        flanked_n += static_cast<double>(p.tally.total);
    }
    put_metric(r.manifest, "flanked_accuracy", flanked_ok / flanked_n);
    put_metric(r.manifest, "bouma_extrapolated_px", report.bouma.spacing_px);
    put_metric(r.manifest, "bouma_theoretical_px", report.bouma_theoretical_px);
    if (report.curve_exclude_sh && report.curve_exclude_sh->points.size() >= 2) {
        std::vector<double> d, a;
        for (const auto& p : report.curve_exclude_sh->points) {
            d.push_back(p.distance);
            a.push_back(p.accuracy());
        }
        put_metric(r.manifest, "spearman_exclude_sh", spearman_correlation(d, a));
    }
    if (report.confusion) put_metric(r.manifest, "confusion_excess_pp", report.confusion->excess_pp);
    r.manifest.stages["analyze"] = true;
    close_run(r);
    say(log, "report: " + dir.string());
    return r;
}

}  // namespace crowding::cli
