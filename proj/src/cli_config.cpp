#include <fstream>

#include "medsynth/cli.hpp"

namespace medsynth::cli {

using nlohmann::json;
using nlohmann::ordered_json;

PipelineConfig PipelineConfig::defaults() { return PipelineConfig{}; }

namespace {

void read_paths(const json& j, PipelinePaths& paths) {
    if (j.contains("corpus")) paths.corpus = j.at("corpus").get<std::string>();
    if (j.contains("lexicon")) paths.lexicon = j.at("lexicon").get<std::string>();
    if (j.contains("graph")) paths.graph = j.at("graph").get<std::string>();
    if (j.contains("output")) paths.output = j.at("output").get<std::string>();
    if (j.contains("questions")) paths.questions = j.at("questions").get<std::string>();
    if (j.contains("documents")) paths.documents = j.at("documents").get<std::string>();
    if (j.contains("evidence")) paths.evidence = j.at("evidence").get<std::string>();
    if (j.contains("rarity_stats")) {
        paths.rarity_stats = j.at("rarity_stats").get<std::string>();
    }
}

void read_budgets(const json& j, Budgets& b) {
    if (j.contains("max_steps")) b.max_steps = j.at("max_steps").get<std::size_t>();
    if (j.contains("max_rounds")) b.max_rounds = j.at("max_rounds").get<int>();
    if (j.contains("node_cap")) b.node_cap = j.at("node_cap").get<std::size_t>();
    if (j.contains("walk_steps")) b.walk_steps = j.at("walk_steps").get<std::size_t>();
    if (j.contains("subgraph_radius")) {
        b.subgraph_radius = j.at("subgraph_radius").get<std::size_t>();
    }
    if (j.contains("dataset_size")) {
        b.dataset_size = j.at("dataset_size").get<std::size_t>();
    }
    if (j.contains("group_size")) b.group_size = j.at("group_size").get<std::size_t>();
    if (j.contains("leakage_retries")) {
        b.leakage_retries = j.at("leakage_retries").get<int>();
    }
    if (j.contains("max_seeds")) b.max_seeds = j.at("max_seeds").get<std::size_t>();
    if (j.contains("retrieval_k")) {
        b.retrieval_k = j.at("retrieval_k").get<std::size_t>();
    }
}

std::vector<double> read_weights(const json& j) {
    auto w = j.get<std::vector<double>>();
    if (w.size() != agent::FeatureVector::arity) {
        throw ConfigError("policy weight vectors must have arity " +
                          std::to_string(agent::FeatureVector::arity));
    }
    return w;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig cfg = defaults();
    if (!j.is_object()) {
        throw ConfigError("pipeline config must be a JSON object");
    }
    if (j.contains("paths")) read_paths(j.at("paths"), cfg.paths);
    if (j.contains("rarity") && j.at("rarity").contains("tau_rare")) {
        cfg.rarity.tau_rare = j.at("rarity").at("tau_rare").get<double>();
    }
    if (j.contains("mix") && j.at("mix").contains("alpha")) {
        cfg.mix.alpha = j.at("mix").at("alpha").get<double>();
    }
    if (j.contains("ranker")) {
        const json& r = j.at("ranker");
        if (r.contains("lambda")) cfg.ranker.lambda = r.at("lambda").get<double>();
        if (r.contains("impact_cap")) {
            cfg.ranker.impact_cap = r.at("impact_cap").get<double>();
        }
        if (r.contains("impact_weight")) {
            cfg.ranker.impact_weight = r.at("impact_weight").get<double>();
        }
        if (r.contains("guideline_weight")) {
            cfg.ranker.guideline_weight = r.at("guideline_weight").get<double>();
        }
    }
    if (j.contains("reward")) {
        const json& r = j.at("reward");
        if (r.contains("alpha")) cfg.reward_weights.alpha = r.at("alpha").get<double>();
        if (r.contains("beta")) cfg.reward_weights.beta = r.at("beta").get<double>();
        if (r.contains("gamma")) cfg.reward_weights.gamma = r.at("gamma").get<double>();
    }
    if (j.contains("budgets")) read_budgets(j.at("budgets"), cfg.budgets);
    if (j.contains("corruption_rate")) {
        cfg.corruption_rate = j.at("corruption_rate").get<double>();
    }
    if (j.contains("global_seed")) {
        cfg.global_seed = j.at("global_seed").get<std::uint64_t>();
    }
    if (j.contains("policy")) {
        const json& p = j.at("policy");
        if (p.contains("w_medical")) cfg.policy.w_medical = read_weights(p.at("w_medical"));
        if (p.contains("w_general")) cfg.policy.w_general = read_weights(p.at("w_general"));
        if (p.contains("selection")) {
            const std::string s = p.at("selection").get<std::string>();
            if (s == "sample") cfg.selection = agent::SelectionMode::SAMPLE;
            else if (s == "greedy") cfg.selection = agent::SelectionMode::GREEDY;
            else throw ConfigError("policy selection must be sample|greedy");
        }
    }
    if (j.contains("irrelevant_tools")) {
        for (const auto& t : j.at("irrelevant_tools")) {
            cfg.irrelevant_tools.insert(t.get<std::string>());
        }
    }
    if (j.contains("clients")) {
        for (const auto& [name, section] : j.at("clients").items()) {
            cfg.client_sections[name] = clients::ClientConfig::from_json(section);
        }
    }

    cfg.rarity.validate();
    cfg.mix.validate();
    cfg.ranker.validate();
    if (cfg.corruption_rate < 0.0 || cfg.corruption_rate > 1.0) {
        throw ConfigError("corruption_rate must be in [0,1]");
    }
    return cfg;
}

namespace {

void resolve_against(const std::filesystem::path& base, std::string& path) {
    if (path.empty()) {
        return;
    }
    std::filesystem::path p(path);
    if (p.is_relative()) {
        path = (base / p).string();
    }
}

}  // namespace

PipelineConfig PipelineConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw ConfigError("config file is not valid JSON: " + path.string());
    }
    PipelineConfig cfg = from_json(j);
    // Relative input paths are resolved against the config file's directory.
    const std::filesystem::path base = path.parent_path();
    resolve_against(base, cfg.paths.corpus);
    resolve_against(base, cfg.paths.lexicon);
    resolve_against(base, cfg.paths.graph);
    resolve_against(base, cfg.paths.questions);
    resolve_against(base, cfg.paths.documents);
    resolve_against(base, cfg.paths.evidence);
    resolve_against(base, cfg.paths.rarity_stats);
    return cfg;
}

ordered_json PipelineConfig::snapshot() const {
    ordered_json j;
    j["rarity"]["tau_rare"] = rarity.tau_rare;
    j["mix"]["alpha"] = mix.alpha;
    j["ranker"]["lambda"] = ranker.lambda;
    j["ranker"]["impact_cap"] = ranker.impact_cap;
    j["reward"]["alpha"] = reward_weights.alpha;
    j["reward"]["beta"] = reward_weights.beta;
    j["reward"]["gamma"] = reward_weights.gamma;
    j["corruption_rate"] = corruption_rate;
    j["budgets"]["max_steps"] = budgets.max_steps;
    j["budgets"]["max_rounds"] = budgets.max_rounds;
    j["budgets"]["node_cap"] = budgets.node_cap;
    j["global_seed"] = global_seed;
    return j;
}

const clients::ClientConfig& PipelineConfig::client(const std::string& name) const {
    auto it = client_sections.find(name);
    if (it == client_sections.end()) {
        throw ConfigError("missing client config section: " + name);
    }
    return it->second;
}

void PipelineConfig::set_mode_everywhere(clients::ClientMode mode) {
    for (auto& [_, section] : client_sections) {
        section.mode = mode;
    }
}

}  // namespace medsynth::cli
