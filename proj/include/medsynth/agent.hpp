#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "medsynth/clients.hpp"
#include "medsynth/errors.hpp"
#include "medsynth/kg.hpp"
#include "medsynth/rng.hpp"

namespace medsynth::agent {

enum class ToolCategory { GENERAL, MEDICAL };

using ToolParams = std::map<std::string, std::string>;

struct ToolResult {
    std::string payload;
    bool corrupted = false;
};

struct ToolSpec {
    std::string name;
    ToolCategory category = ToolCategory::GENERAL;
    std::function<ToolResult(const ToolParams&)> invoke;
};

class ToolRegistry {
public:
    void add(ToolSpec spec);  // ContractError on duplicate name
    const ToolSpec* find(const std::string& name) const;
    std::vector<const ToolSpec*> by_category(ToolCategory category) const;
    bool empty() const { return tools_.empty(); }
    std::size_t size() const { return tools_.size(); }

private:
    std::vector<ToolSpec> tools_;  // registration order
};

// Evolving per-episode state: dialogue context, accumulated knowledge graph,
// explored-hypothesis history. Knowledge only grows within an episode.
struct AgentState {
    std::vector<std::string> context;
    kg::KnowledgeGraph knowledge;
    std::vector<std::string> history;
    std::size_t step_index = 0;
    std::size_t prior_failures = 0;  // error/corrupted observations so far
};

struct FeatureVector {
    double entity_rarity = 0.0;      // max over question entities of -log10(freq)
    double estimated_hops = 0.0;     // relational-cue count, capped
    double medical_term_flag = 0.0;  // 1 when a lexicon entity appears
    double step_index = 0.0;
    double prior_failures = 0.0;

    static constexpr std::size_t arity = 5;
    std::array<double, arity> as_array() const {
        return {entity_rarity, estimated_hops, medical_term_flag, step_index,
                prior_failures};
    }
};

// Entity name (lowercased) -> corpus frequency. Names absent from the map
// contribute rarity 0.
struct RarityLexicon {
    std::map<std::string, double> frequency_by_name;
};

FeatureVector extract_features(const AgentState& state, const std::string& question,
                               const RarityLexicon& rarity);

struct ToolPolicy {
    std::vector<double> w_medical;  // arity must equal FeatureVector::arity
    std::vector<double> w_general;
};

enum class SelectionMode { SAMPLE, GREEDY };

double sigmoid(double x);

// sigma(w . phi) for the category's weight vector. ContractError on arity
// mismatch.
double tool_probability(const ToolPolicy& policy, const FeatureVector& features,
                        ToolCategory category);

struct ToolChoice {
    const ToolSpec* tool = nullptr;
    ToolCategory sampled_category = ToolCategory::GENERAL;
    bool fallback = false;  // sampled category was empty in the registry
};

// Samples the category from the two sigmoid scores normalized to a two-point
// distribution (GREEDY takes the larger score, ties favoring MEDICAL), then
// draws uniformly within the category. Falls back to the other category when
// the sampled one has no registered tools.
ToolChoice select_tool(const ToolPolicy& policy, const FeatureVector& features,
                       const ToolRegistry& registry, Rng& rng,
                       SelectionMode mode = SelectionMode::SAMPLE);

struct TrajectoryStep {
    std::string thought;
    std::string tool;  // empty for answer and parse-error steps
    std::optional<ToolCategory> category;
    ToolParams params;
    std::string observation;
    bool corrupted = false;
};

enum class Termination { ANSWERED, STEP_BUDGET, ERROR };

struct Trajectory {
    std::string question;
    std::vector<TrajectoryStep> steps;
    std::optional<std::string> final_answer;
    Termination termination = Termination::ERROR;
};

inline constexpr const char* kCorruptionMarker = "__CORRUPTED__";

// With probability `rate` replaces the payload with the corruption marker
// plus the first 16 characters of the original, and sets the corrupted flag.
ToolResult corrupt_tool_output(ToolResult result, double rate, Rng& rng);

struct EpisodeConfig {
    std::size_t max_steps = 8;  // budget, >= 1
    double corruption_rate = 0.05;
    SelectionMode selection = SelectionMode::SAMPLE;
    RarityLexicon rarity;
};

// Merges graph records found in an observation payload (one JSON object per
// line, same schema as graph serialization) into the knowledge graph. Lines
// that are not graph records are ignored. Merging only ever adds, so
// knowledge grows monotonically across an episode.
void merge_observation_facts(kg::KnowledgeGraph& knowledge,
                             const std::string& payload);

// Reason-act-observe loop. Each reasoner completion is either
//   THOUGHT: ...            THOUGHT: ...
//   ACTION: tool {json}     ANSWER: final text
// Unparseable completions are recorded as ERROR observations and the episode
// continues; tool names of "auto" (or none) are resolved via select_tool;
// exceptions from tool invocations become ERROR observations. Terminates on
// ANSWER or when the budget runs out.
Trajectory run_episode(const std::string& question, const ToolRegistry& registry,
                       const ToolPolicy& policy, clients::TextGenerator& reasoner,
                       const EpisodeConfig& config, Rng& rng);

// search -> verify^n -> synthesize decomposition of a trajectory. A step is a
// retrieval step when its parameters carry a "query"; it is VERIFY when the
// query shares at least one token with an earlier observation, SEARCH
// otherwise. The final answer step is SYNTHESIZE; anything else is OTHER.
// The record reports the maximal n such that the whole step sequence matches
// search+ verify^n synthesize (n = 0 and search_steps = leading-search count
// when it does not).
struct PatternRecord {
    std::size_t search_steps = 0;
    std::size_t verify_count = 0;
    bool synthesized = false;
};

PatternRecord classify_pattern(const Trajectory& trajectory);

enum class StepLabel { SEARCH, VERIFY, SYNTHESIZE, OTHER };
std::vector<StepLabel> label_steps(const Trajectory& trajectory);
PatternRecord classify_labels(const std::vector<StepLabel>& labels);

struct BehaviorStats {
    double first_medical_rate = 0.0;   // first tool is MEDICAL
    double tool_switch_rate = 0.0;     // contains a GENERAL<->MEDICAL change
    double error_recovery_rate = 0.0;  // error/corrupted step then a different tool
};

BehaviorStats trajectory_stats(const std::vector<Trajectory>& trajectories);

// Line-delimited JSON, one trajectory per line, schema version "v":1.
nlohmann::ordered_json trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const nlohmann::json& j);  // FormatError
void save_trajectories_jsonl(const std::vector<Trajectory>& trajectories,
                             std::ostream& out);
std::vector<Trajectory> load_trajectories_jsonl(std::istream& in,
                                                std::size_t* malformed = nullptr);

const char* to_string(ToolCategory category);
const char* to_string(Termination termination);

}  // namespace medsynth::agent
