#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "camscope/cli/commands.hpp"
#include "camscope/core/log.hpp"

int main(int argc, char** argv) {
    using namespace camscope;

    CLI::App app{"camscope: train, evaluate, and explain CNN image classifiers"};
    app.require_subcommand(1);

    std::string log_level = "info";
    app.add_option("--log-level", log_level, "debug, info, warn, or error")
        ->capture_default_str();

    cli::TrainOptions topt;
    std::uint64_t seed_value = 0;
    CLI::App* train = app.add_subcommand("train", "train a model from a run config");
    train->fallthrough();
    train->add_option("--config", topt.config_path, "run config json")->required();
    train->add_option("--out", topt.out_dir, "run directory (default <report.out_dir>/<id>)");
    CLI::Option* seed_opt =
        train->add_option("--seed", seed_value, "override the train and split seeds");

    cli::EvaluateOptions eopt;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a run's checkpoint on its test split");
    evaluate->fallthrough();
    evaluate->add_option("--run", eopt.run_dir, "run directory")->required();
    evaluate->add_option("--checkpoint", eopt.checkpoint, "checkpoint override");
    evaluate->add_option("--config", eopt.config_path, "config override");

    cli::ExplainOptions xopt;
    CLI::App* explain = app.add_subcommand("explain", "write heatmaps, overlays, and panels");
    explain->fallthrough();
    explain->add_option("--run", xopt.run_dir, "run directory")->required();
    explain->add_option("--image", xopt.image, "explain a single image file");
    explain->add_option("--methods", xopt.methods,
                        "subset of gradcam, gradcampp, layercam, scorecam")
        ->delimiter(',');

    cli::CompareOptions copt;
    CLI::App* compare = app.add_subcommand("compare", "tabulate and chart several runs");
    compare->fallthrough();
    compare->add_option("runs", copt.run_dirs, "run directories");
    compare->add_option("--out", copt.out_dir, "output directory (default .)");

    cli::SynthOptions sopt;
    CLI::App* synth = app.add_subcommand("synth", "emit a synthetic dataset to disk");
    synth->fallthrough();
    synth->add_option("--config", sopt.config_path, "run config json with dataset.synthetic")
        ->required();
    synth->add_option("--out", sopt.out_dir, "dataset output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    LogLevel level = LogLevel::info;
    if (!parse_log_level(log_level, level)) {
        log_error("unknown log level '" + log_level + "'");
        return 2;
    }
    set_log_level(level);

    if (seed_opt->count() > 0) topt.seed = seed_value;

    if (train->parsed()) return cli::cmd_train(topt);
    if (evaluate->parsed()) return cli::cmd_evaluate(eopt);
    if (explain->parsed()) return cli::cmd_explain(xopt);
    if (compare->parsed()) return cli::cmd_compare(copt);
    if (synth->parsed()) return cli::cmd_synth(sopt);
    return 2;
}
