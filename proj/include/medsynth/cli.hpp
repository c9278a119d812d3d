#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "medsynth/agent.hpp"
#include "medsynth/clients.hpp"
#include "medsynth/medtools.hpp"
#include "medsynth/mining.hpp"
#include "medsynth/reward.hpp"
#include "medsynth/synthesis.hpp"

namespace medsynth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitStageFailure = 1;
inline constexpr int kExitConfigError = 2;

struct Budgets {
    std::size_t max_steps = 8;        // episode step budget
    int max_rounds = 4;               // calibration rounds
    std::size_t node_cap = 14;        // longest-path exhaustive-search cap
    std::size_t walk_steps = 2;       // expansion steps per rare seed
    std::size_t subgraph_radius = 6;  // hops around each seed
    std::size_t dataset_size = 0;     // 0: one mixed record per QA item
    std::size_t group_size = 4;       // episodes per advantage group
    int leakage_retries = 2;
    std::size_t max_seeds = 0;        // 0: no cap
    std::size_t retrieval_k = 3;      // documents returned by med_retrieve
};

struct PipelinePaths {
    std::string corpus;
    std::string lexicon;
    std::string graph;
    std::string output;
    std::string questions;
    std::string documents;
    std::string evidence;
    std::string rarity_stats;  // optional: frequencies for feature extraction
};

struct PipelineConfig {
    PipelinePaths paths;
    mining::RarityConfig rarity;
    synthesis::MixConfig mix;
    medtools::RankerConfig ranker;
    reward::RewardWeights reward_weights;
    Budgets budgets;
    double corruption_rate = 0.05;
    std::uint64_t global_seed = 42;
    agent::ToolPolicy policy{{0.8, 0.3, 1.2, 0.0, 0.2}, {0.2, 0.1, -0.5, 0.0, 0.3}};
    agent::SelectionMode selection = agent::SelectionMode::SAMPLE;
    std::set<std::string> irrelevant_tools;
    std::map<std::string, clients::ClientConfig> client_sections;

    static PipelineConfig defaults();
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load_file(const std::filesystem::path& path);

    // Snapshot of the pinned default constants, for tests.
    nlohmann::ordered_json snapshot() const;

    const clients::ClientConfig& client(const std::string& name) const;
    void set_mode_everywhere(clients::ClientMode mode);
};

// Mines rare entities, expands the graph around them, extracts longest
// reasoning chains, generates and calibrates questions, masks scaffolds, and
// mixes the dataset. `stage` limits the run: mine | expand | qa | dataset
// (empty means the full pipeline). Returns a process exit code.
int cmd_synthesize(const PipelineConfig& config, const std::string& stage = "");

// One episode per question from the questions file, rewards and group
// advantages written alongside the trajectories.
int cmd_episodes(const PipelineConfig& config, const std::string& questions_path);

// Behavior report for a trajectory file: pattern histogram plus behavior
// rates; malformed lines counted and skipped.
int cmd_analyze(const std::string& trajectory_path, const std::string& out_dir);

}  // namespace medsynth::cli
