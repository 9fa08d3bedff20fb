#include <CLI11.hpp>

#include <iostream>

#include "crowding/cli.hpp"

using namespace crowding;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Configuration file (key = value lines)");
        cmd->add_option("--set", sets, "Override a configuration key, e.g. --set grid.mode=pair")->allow_extra_args(false);
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--workers", workers, "Sweep worker threads");
        cmd->add_option("--out", out, "Output directory for run folders");
    }

    cli::ExperimentConfig resolve() const {
        cli::ExperimentConfig c = config_path.empty() ? cli::ExperimentConfig{} : cli::load_config(config_path);
        for (const auto& s : sets) cli::apply_override(c, s);
        if (seed) c.seed = *seed;
        if (workers) c.workers = *workers;
        if (out) c.out = *out;
        c.validate();
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Visual crowding experiments for convolutional classifiers"};
    app.require_subcommand(1);

    Common common;
    int samples = 16;
    std::string checkpoint;
    std::vector<std::string> records;
    std::string profile;
    bool no_fits = false;
    bool dump = false;

    auto* stimuli = app.add_subcommand("stimuli", "Write sample stimuli and the condition grid listing");
    common.attach(stimuli);
    stimuli->add_option("--samples", samples, "Number of sample PNGs (0 for the listing only)")->check(CLI::NonNegativeNumber);

    auto* train = app.add_subcommand("train", "Train the reference network and write a checkpoint");
    common.attach(train);

    auto* sweep = app.add_subcommand("sweep", "Classify every condition of the grid");
    common.attach(sweep);
    sweep->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();

    auto* analyze = app.add_subcommand("analyze", "Compute crowding metrics and render the report");
    common.attach(analyze);
    analyze->add_option("--records", records, "Record file; repeat to pool several runs")->required();
    analyze->add_flag("--no-fits", no_fits, "Skip psychometric fits");

    auto* reproduce = app.add_subcommand("reproduce", "Run train, sweep and analyze for a named experiment");
    common.attach(reproduce);
    std::string profile_help = "One of:";
    for (const auto& p : cli::reproduce_profiles()) profile_help += " " + p;
    reproduce->add_option("profile", profile, profile_help)->required();

    auto* config = app.add_subcommand("config", "Print the resolved configuration");
    common.attach(config);
    config->add_flag("--dump", dump, "Print every key (default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        cli::ExperimentConfig cfg = common.resolve();
        std::ostream* log = &std::cerr;
        if (stimuli->parsed()) {
            const auto r = cli::cmd_stimuli(cfg, samples, log);
            std::cout << r.run_dir.string() << "\n";
        } else if (train->parsed()) {
            const auto r = cli::cmd_train(cfg, log);
            std::cout << r.run_dir.string() << "\n";
        } else if (sweep->parsed()) {
            const auto r = cli::cmd_sweep(cfg, checkpoint, log);
            std::cout << r.run_dir.string() << "\n";
        } else if (analyze->parsed()) {
            if (no_fits) cfg.analysis_fits = false;
            std::vector<std::filesystem::path> paths(records.begin(), records.end());
            const auto r = cli::cmd_analyze(cfg, paths, log);
            std::cout << r.run_dir.string() << "\n";
        } else if (reproduce->parsed()) {
            const auto r = cli::cmd_reproduce(cfg, profile, log);
            std::cout << r.run_dir.string() << "\n";
        } else if (config->parsed()) {
            std::cout << cli::dump_config(cfg);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_code_for(e);
    }
}
