#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "medsynth/cli.hpp"

using medsynth::cli::PipelineConfig;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string mode;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "pipeline config file (JSON)")
        ->required();
    cmd->add_option("--out", flags.out, "output directory (overrides config)");
    cmd->add_option("--seed", flags.seed, "global seed (overrides config)");
    cmd->add_option("--mode", flags.mode, "force client mode: mock|live")
        ->check(CLI::IsMember({"mock", "live"}));
}

int load_config(const CommonFlags& flags, PipelineConfig& config) {
    try {
        config = PipelineConfig::load_file(flags.config_path);
        if (!flags.out.empty()) {
            config.paths.output = flags.out;
        }
        if (flags.seed >= 0) {
            config.global_seed = static_cast<std::uint64_t>(flags.seed);
        }
        if (flags.mode == "mock") {
            config.set_mode_everywhere(medsynth::clients::ClientMode::MOCK);
        } else if (flags.mode == "live") {
            config.set_mode_everywhere(medsynth::clients::ClientMode::LIVE);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return medsynth::cli::kExitConfigError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph QA synthesis and agent episode toolkit"};
    app.require_subcommand(1);

    CommonFlags synth_flags;
    std::string stage;
    CLI::App* synth = app.add_subcommand(
        "synthesize", "mine rare entities, expand graphs, emit the QA dataset");
    add_common(synth, synth_flags);
    synth->add_option("--stage", stage,
                      "stop after this stage: mine|expand|qa|dataset");

    CommonFlags episode_flags;
    std::string questions;
    CLI::App* episodes = app.add_subcommand(
        "episodes", "run agent episodes over a questions file and score them");
    add_common(episodes, episode_flags);
    episodes->add_option("--questions", questions,
                         "questions file (overrides config paths.questions)");

    std::string trajectory_path;
    std::string analyze_out;
    CLI::App* analyze =
        app.add_subcommand("analyze", "behavior report for a trajectory file");
    analyze->add_option("--input", trajectory_path, "trajectory JSONL file")
        ->required();
    analyze->add_option("--out", analyze_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        PipelineConfig config;
        if (int rc = load_config(synth_flags, config)) {
            return rc;
        }
        return medsynth::cli::cmd_synthesize(config, stage);
    }
    if (episodes->parsed()) {
        PipelineConfig config;
        if (int rc = load_config(episode_flags, config)) {
            return rc;
        }
        const std::string path =
            questions.empty() ? config.paths.questions : questions;
        return medsynth::cli::cmd_episodes(config, path);
    }
    if (analyze->parsed()) {
        return medsynth::cli::cmd_analyze(trajectory_path, analyze_out);
    }
    return medsynth::cli::kExitConfigError;
}
