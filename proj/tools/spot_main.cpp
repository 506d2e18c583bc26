#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spot/errors.hpp"
#include "spot/orchestrator.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string format;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t runs = 0;
    bool runs_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "configuration file (key = value lines)");
    cmd->add_option("--out", flags.out, "output directory (or file for gen-data)");
    cmd->add_option("--format", flags.format, "report format: table or records");
    cmd->add_option("--seed", flags.seed, "override run.seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--runs", flags.runs, "override run.n_runs")->each([&](const std::string&) {
        flags.runs_set = true;
    });
}

spot::ExperimentConfig load_config(const CommonFlags& flags) {
    spot::ExperimentConfig cfg;
    if (!flags.config_path.empty()) cfg = spot::parse_config_file(flags.config_path);
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.runs_set) cfg.n_runs = flags.runs;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    if (!flags.format.empty()) {
        spot::report_format_from_string(flags.format);
        cfg.format = flags.format;
    }
    spot::validate(cfg);
    return cfg;
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw spot::IoError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

int cmd_gen_data(const CommonFlags& flags) {
    const spot::ExperimentConfig cfg = load_config(flags);
    std::string path = flags.out;
    if (path.empty()) path = cfg.dataset_path;
    if (path.empty()) path = "dataset.tsv";
    const spot::GzslDataset dataset = spot::make_benchmark(cfg.benchmark);
    spot::save_dataset(dataset, path);
    std::cout << "wrote " << dataset.size() << " samples over " << cfg.benchmark.n_classes
              << " classes to " << path << "\n";
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    const spot::ExperimentConfig cfg = load_config(flags);
    ensure_dir(cfg.out_dir);
    const spot::GzslDataset dataset = spot::resolve_dataset(cfg);

    std::vector<spot::RunResult> runs;
    for (std::size_t r = 0; r < cfg.n_runs; ++r) {
        const std::uint64_t run_seed = cfg.seed + r;
        spot::TrainState state = spot::make_state(cfg, dataset, run_seed);
        spot::CheckpointHook hook;
        if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0) {
            const std::string ckpt_path =
                join_path(cfg.out_dir, "checkpoint_seed" + std::to_string(run_seed) + ".ckpt");
            hook = [ckpt_path](const spot::TrainState& s) {
                spot::save_checkpoint(spot::to_checkpoint(s), ckpt_path);
            };
        }
        spot::run_training(state, hook);
        if (!cfg.out_dir.empty())
            spot::save_checkpoint(spot::to_checkpoint(state),
                                  join_path(cfg.out_dir,
                                            "final_seed" + std::to_string(run_seed) + ".ckpt"));
        spot::RunResult result;
        result.seed = run_seed;
        result.metrics = spot::final_evaluation(state);
        result.logs = state.logs;
        for (const std::string& warning : result.metrics.warnings)
            std::cerr << "warning (seed " << run_seed << "): " << warning << "\n";
        if (!cfg.out_dir.empty())
            spot::write_report(spot::episode_report_rows(cfg, result),
                               join_path(cfg.out_dir,
                                         "episodes_seed" + std::to_string(run_seed) + ".jsonl"),
                               spot::ReportFormat::records);
        runs.push_back(std::move(result));
    }

    const spot::SuiteSummary suite = spot::summarize_runs(std::move(runs));
    const auto rows = spot::suite_report_rows(cfg, suite, "SPOT");
    std::cout << spot::format_table(rows);
    if (!cfg.out_dir.empty()) {
        spot::write_report(rows, join_path(cfg.out_dir, "metrics.txt"),
                           spot::ReportFormat::table);
        spot::write_report(rows, join_path(cfg.out_dir, "metrics.jsonl"),
                           spot::ReportFormat::records);
    }
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path,
             const std::string& data_path) {
    spot::Checkpoint ckpt = spot::load_checkpoint(checkpoint_path);
    spot::ExperimentConfig cfg =
        spot::parse_config_text(ckpt.config_snapshot, "checkpoint config");
    if (!data_path.empty()) cfg.dataset_path = data_path;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    ckpt.config_snapshot = spot::canonical_text(cfg);

    spot::TrainState state = spot::from_checkpoint(ckpt, spot::resolve_dataset(cfg));
    spot::RunResult result;
    result.seed = cfg.seed;
    result.metrics = spot::final_evaluation(state);
    for (const std::string& warning : result.metrics.warnings)
        std::cerr << "warning: " << warning << "\n";

    spot::SuiteSummary suite = spot::summarize_runs({result});
    const auto rows = spot::suite_report_rows(cfg, suite, "SPOT (checkpoint)");
    std::cout << spot::format_table(rows);
    if (!cfg.out_dir.empty()) {
        ensure_dir(cfg.out_dir);
        spot::write_report(rows, join_path(cfg.out_dir, "eval_metrics.txt"),
                           spot::ReportFormat::table);
        spot::write_report(rows, join_path(cfg.out_dir, "eval_metrics.jsonl"),
                           spot::ReportFormat::records);
    }
    return 0;
}

int cmd_ablate(const CommonFlags& flags) {
    const spot::ExperimentConfig base = load_config(flags);
    ensure_dir(base.out_dir);
    const std::string base_hash = spot::config_hash(base);

    const auto run_arm = [&](spot::SelectionMode selection, spot::RlAlgorithm algorithm,
                             double keep_rate) {
        spot::ExperimentConfig cfg = base;
        cfg.selection = selection;
        cfg.algorithm = algorithm;
        cfg.random_keep_rate = keep_rate;
        return spot::run_experiment_suite(cfg, cfg.n_runs);
    };

    std::vector<spot::MetricRow> rows;
    const auto add_row = [&](const std::string& arm, const spot::SuiteSummary& suite) {
        spot::MetricRow row;
        row.model = arm;
        row.seed = base.seed;
        row.config_hash = base_hash;
        row.values = {{"S", suite.seen.mean * 100.0},
                      {"U", suite.unseen.mean * 100.0},
                      {"H", suite.harmonic.mean * 100.0},
                      {"ZSL", suite.zsl.mean * 100.0},
                      {"Qhat", suite.final_q.mean}};
        rows.push_back(std::move(row));
    };

    const spot::SuiteSummary ppo =
        run_arm(spot::SelectionMode::policy, spot::RlAlgorithm::ppo, base.random_keep_rate);
    double keep_rate = 0.0;
    for (const auto& run : ppo.runs) keep_rate += run.metrics.keep_rate;
    keep_rate /= static_cast<double>(ppo.runs.size());

    add_row("PPO", ppo);
    add_row("REINFORCE", run_arm(spot::SelectionMode::policy, spot::RlAlgorithm::reinforce,
                                 base.random_keep_rate));
    add_row("random-selection",
            run_arm(spot::SelectionMode::random_rate, spot::RlAlgorithm::none, keep_rate));
    add_row("no-selection",
            run_arm(spot::SelectionMode::all_keep, spot::RlAlgorithm::none, base.random_keep_rate));
    add_row("oracle-selection",
            run_arm(spot::SelectionMode::oracle, spot::RlAlgorithm::none, base.random_keep_rate));

    std::cout << spot::format_table(rows);
    if (!base.out_dir.empty()) {
        spot::write_report(rows, join_path(base.out_dir, "ablation.txt"),
                           spot::ReportFormat::table);
        spot::write_report(rows, join_path(base.out_dir, "ablation.jsonl"),
                           spot::ReportFormat::records);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic feature selection pipeline"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags, ablate_flags;
    std::string checkpoint_path, data_path;

    CLI::App* gen = app.add_subcommand("gen-data", "generate a benchmark dataset");
    add_common(gen, gen_flags);
    CLI::App* train = app.add_subcommand("train", "run selector training and final evaluation");
    add_common(train, train_flags);
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved checkpoint");
    add_common(eval_cmd, eval_flags);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "dataset path override");
    CLI::App* ablate = app.add_subcommand("ablate", "compare selection strategies");
    add_common(ablate, ablate_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_flags);
        if (train->parsed()) return cmd_train(train_flags);
        if (eval_cmd->parsed()) return cmd_eval(eval_flags, checkpoint_path, data_path);
        if (ablate->parsed()) return cmd_ablate(ablate_flags);
    } catch (const spot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
