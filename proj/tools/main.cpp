#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "riskrank/pipeline.hpp"

namespace {

using riskrank::pipeline::RunConfig;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string families;
    std::string synth_spec;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key = value config file");
    cmd->add_option("--seed", flags.seed, "random seed (required here or in the config)");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--families", flags.families, "feature families, e.g. P,E,A");
}

RunConfig make_config(const CommonFlags& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) config = RunConfig::from_file(flags.config_path);
    if (flags.seed) config.seed = flags.seed;
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (!flags.synth_spec.empty()) config.synth_spec = flags.synth_spec;
    if (!flags.families.empty()) {
        config.families.clear();
        for (const auto& token : riskrank::split(flags.families, ',')) {
            const std::string t = riskrank::to_lower(riskrank::trim(token));
            if (t == "p") {
                config.families.insert(riskrank::features::Family::P);
            } else if (t == "e") {
                config.families.insert(riskrank::features::Family::E);
            } else if (t == "a") {
                config.families.insert(riskrank::features::Family::A);
            } else {
                throw riskrank::ConfigError("--families must be drawn from P,E,A");
            }
        }
        if (config.families.empty()) throw riskrank::ConfigError("--families selects nothing");
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asthma risk-factor ranking pipeline"};
    app.require_subcommand(1);

    std::string synth_spec_path, synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic input data set");
    synth->add_option("--spec", synth_spec_path, "synth spec file (defaults when omitted)");
    synth->add_option("--out", synth_out, "output directory")->required();

    CommonFlags featurize_flags, rank_flags, evaluate_flags, run_all_flags;
    auto* featurize = app.add_subcommand("featurize", "ingest inputs and write features.csv");
    add_common(featurize, featurize_flags);
    auto* rank = app.add_subcommand("rank", "train the boosted ensemble and rank risk factors");
    add_common(rank, rank_flags);
    auto* evaluate = app.add_subcommand("evaluate", "feature-subset ablation with KNN + metrics");
    add_common(evaluate, evaluate_flags);
    auto* run_all = app.add_subcommand("run-all", "featurize, rank and evaluate in sequence");
    add_common(run_all, run_all_flags);
    run_all->add_option("--synth-spec", run_all_flags.synth_spec,
                        "generate inputs from this synth spec first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) {
            riskrank::pipeline::cmd_synth(synth_spec_path, synth_out);
        } else if (featurize->parsed()) {
            riskrank::pipeline::cmd_featurize(make_config(featurize_flags));
        } else if (rank->parsed()) {
            riskrank::pipeline::cmd_rank(make_config(rank_flags));
        } else if (evaluate->parsed()) {
            riskrank::pipeline::cmd_evaluate(make_config(evaluate_flags));
        } else if (run_all->parsed()) {
            riskrank::pipeline::cmd_run_all(make_config(run_all_flags));
        }
    } catch (const riskrank::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const riskrank::ValidationError& e) {
        std::cerr << "data validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
