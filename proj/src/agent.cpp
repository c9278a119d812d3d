#include "medsynth/agent.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "medsynth/text.hpp"

namespace medsynth::agent {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Registry

void ToolRegistry::add(ToolSpec spec) {
    if (spec.name.empty()) {
        throw ContractError("tool name must be nonempty");
    }
    if (find(spec.name) != nullptr) {
        throw ContractError("duplicate tool name: " + spec.name);
    }
    tools_.push_back(std::move(spec));
}

const ToolSpec* ToolRegistry::find(const std::string& name) const {
    for (const ToolSpec& t : tools_) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

std::vector<const ToolSpec*> ToolRegistry::by_category(ToolCategory category) const {
    std::vector<const ToolSpec*> out;
    for (const ToolSpec& t : tools_) {
        if (t.category == category) {
            out.push_back(&t);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Features

namespace {

// Relational connective cues that signal chained hops in a question.
const std::vector<std::vector<std::string>>& hop_cues() {
    static const std::vector<std::vector<std::string>> cues = {
        {"of", "the"}, {"that", "was"}, {"that", "were"}, {"which"}, {"whose"}};
    return cues;
}

constexpr double kHopCueCap = 8.0;
constexpr double kFrequencyFloor = 1e-12;  // keeps -log10 finite for zero counts

std::size_t count_possessives(const std::string& question) {
    // Raw scan for apostrophe-s endings; the tokenizer strips punctuation.
    std::size_t count = 0;
    const std::string lower = text::lowercase(question);
    for (std::size_t pos = 0; (pos = lower.find("'s", pos)) != std::string::npos;
         pos += 2) {
        const bool boundary = pos + 2 == lower.size() ||
                              !std::isalnum(static_cast<unsigned char>(lower[pos + 2]));
        if (boundary) {
            ++count;
        }
    }
    return count;
}

}  // namespace

FeatureVector extract_features(const AgentState& state, const std::string& question,
                               const RarityLexicon& rarity) {
    FeatureVector f;
    const std::vector<std::string> tokens = text::tokenize(question);

    double max_rarity = 0.0;
    bool any_hit = false;
    for (const auto& [name, freq] : rarity.frequency_by_name) {
        const std::vector<std::string> phrase = text::tokenize(name);
        if (phrase.empty() || !text::contains_phrase(tokens, phrase)) {
            continue;
        }
        any_hit = true;
        max_rarity = std::max(max_rarity, -std::log10(std::max(freq, kFrequencyFloor)));
    }
    f.entity_rarity = any_hit ? max_rarity : 0.0;
    f.medical_term_flag = any_hit ? 1.0 : 0.0;

    double cue_count = static_cast<double>(count_possessives(question));
    for (const auto& cue : hop_cues()) {
        cue_count += static_cast<double>(text::count_phrase(tokens, cue));
    }
    f.estimated_hops = std::min(cue_count, kHopCueCap);

    f.step_index = static_cast<double>(state.step_index);
    f.prior_failures = static_cast<double>(state.prior_failures);
    return f;
}

// ---------------------------------------------------------------------------
// Policy

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double tool_probability(const ToolPolicy& policy, const FeatureVector& features,
                        ToolCategory category) {
    const std::vector<double>& w =
        category == ToolCategory::MEDICAL ? policy.w_medical : policy.w_general;
    if (w.size() != FeatureVector::arity) {
        throw ContractError("policy weight arity " + std::to_string(w.size()) +
                            " does not match feature arity " +
                            std::to_string(FeatureVector::arity));
    }
    const auto phi = features.as_array();
    double dot = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        dot += w[i] * phi[i];
    }
    return sigmoid(dot);
}

ToolChoice select_tool(const ToolPolicy& policy, const FeatureVector& features,
                       const ToolRegistry& registry, Rng& rng, SelectionMode mode) {
    if (registry.empty()) {
        throw ArgumentError("select_tool: registry is empty");
    }
    const double p_medical = tool_probability(policy, features, ToolCategory::MEDICAL);
    const double p_general = tool_probability(policy, features, ToolCategory::GENERAL);

    ToolChoice choice;
    if (mode == SelectionMode::GREEDY) {
        choice.sampled_category = p_medical >= p_general ? ToolCategory::MEDICAL
                                                         : ToolCategory::GENERAL;
    } else {
        const double medical_share = p_medical / (p_medical + p_general);
        choice.sampled_category = rng.next_double() < medical_share
                                      ? ToolCategory::MEDICAL
                                      : ToolCategory::GENERAL;
    }

    std::vector<const ToolSpec*> pool = registry.by_category(choice.sampled_category);
    if (pool.empty()) {
        choice.fallback = true;
        pool = registry.by_category(choice.sampled_category == ToolCategory::MEDICAL
                                        ? ToolCategory::GENERAL
                                        : ToolCategory::MEDICAL);
    }
    choice.tool = pool[rng.next_index(pool.size())];
    return choice;
}

// ---------------------------------------------------------------------------
// Corruption

ToolResult corrupt_tool_output(ToolResult result, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) {
        throw ArgumentError("corruption rate must be in [0,1]");
    }
    if (rng.next_double() < rate) {
        result.payload = std::string(kCorruptionMarker) + result.payload.substr(0, 16);
        result.corrupted = true;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Episode loop

namespace {

struct ParsedCompletion {
    enum Kind { ACTION, ANSWER, PARSE_ERROR } kind = PARSE_ERROR;
    std::string thought;
    std::string tool;
    ToolParams params;
    std::string answer;
};

ParsedCompletion parse_completion(const std::string& completion) {
    ParsedCompletion parsed;
    std::istringstream in(completion);
    std::string line;
    std::vector<std::string> thought_lines;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.rfind("THOUGHT:", 0) == 0) {
            std::string t = line.substr(8);
            if (!t.empty() && t.front() == ' ') t.erase(0, 1);
            thought_lines.push_back(t);
        } else if (line.rfind("ANSWER:", 0) == 0) {
            parsed.kind = ParsedCompletion::ANSWER;
            parsed.answer = line.substr(7);
            if (!parsed.answer.empty() && parsed.answer.front() == ' ') {
                parsed.answer.erase(0, 1);
            }
            break;
        } else if (line.rfind("ACTION:", 0) == 0) {
            std::string body = line.substr(7);
            if (!body.empty() && body.front() == ' ') body.erase(0, 1);
            const auto brace = body.find('{');
            std::string name = brace == std::string::npos ? body : body.substr(0, brace);
            while (!name.empty() && name.back() == ' ') name.pop_back();
            parsed.tool = name;
            if (brace != std::string::npos) {
                json j = json::parse(body.substr(brace), nullptr, false);
                if (j.is_discarded() || !j.is_object()) {
                    return parsed;  // PARSE_ERROR
                }
                for (const auto& [key, value] : j.items()) {
                    parsed.params[key] =
                        value.is_string() ? value.get<std::string>() : value.dump();
                }
            }
            parsed.kind = ParsedCompletion::ACTION;
            break;
        }
    }
    std::string thought;
    for (std::size_t i = 0; i < thought_lines.size(); ++i) {
        if (i > 0) thought += "\n";
        thought += thought_lines[i];
    }
    parsed.thought = std::move(thought);
    return parsed;
}

std::string render_episode_prompt(const std::string& question,
                                  const Trajectory& trajectory) {
    std::string prompt = "QUESTION: " + question + "\n";
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
        const TrajectoryStep& s = trajectory.steps[i];
        const std::string n = std::to_string(i + 1);
        prompt += "STEP " + n + " THOUGHT: " + s.thought + "\n";
        if (!s.tool.empty()) {
            prompt += "STEP " + n + " ACTION: " + s.tool + "\n";
        }
        prompt += "STEP " + n + " OBSERVATION: " + s.observation + "\n";
    }
    prompt += "Respond with THOUGHT and either ACTION: tool {params} or ANSWER: text.\n";
    return prompt;
}

}  // namespace

void merge_observation_facts(kg::KnowledgeGraph& knowledge, const std::string& payload) {
    std::istringstream in(payload);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() != '{') {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("kind")) {
            continue;
        }
        try {
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "entity") {
                const std::string id = j.at("id").get<std::string>();
                if (!knowledge.has_entity(id)) {
                    kg::Entity e;
                    e.id = id;
                    e.name = j.value("name", id);
                    knowledge.add_entity(std::move(e));
                }
            } else if (kind == "relation") {
                const std::string subject = j.at("subject").get<std::string>();
                const std::string object = j.at("object").get<std::string>();
                for (const std::string& id : {subject, object}) {
                    if (!knowledge.has_entity(id)) {
                        knowledge.add_entity(kg::Entity{id, id, 0.0, false, {}});
                    }
                }
                kg::Relation r;
                r.subject = subject;
                r.predicate = j.at("predicate").get<std::string>();
                r.object = object;
                knowledge.add_relation(std::move(r));
            }
        } catch (const std::exception&) {
            // observation lines that fail to merge are ignored
        }
    }
}

Trajectory run_episode(const std::string& question, const ToolRegistry& registry,
                       const ToolPolicy& policy, clients::TextGenerator& reasoner,
                       const EpisodeConfig& config, Rng& rng) {
    if (config.max_steps < 1) {
        throw ArgumentError("run_episode: max_steps must be >= 1");
    }
    Trajectory trajectory;
    trajectory.question = question;
    trajectory.termination = Termination::STEP_BUDGET;
    AgentState state;
    state.context.push_back(question);

    for (std::size_t step = 0; step < config.max_steps; ++step) {
        std::string completion;
        try {
            completion = reasoner.generate(render_episode_prompt(question, trajectory));
        } catch (const std::exception& e) {
            TrajectoryStep s;
            s.observation = std::string("ERROR: reasoner failed: ") + e.what();
            trajectory.steps.push_back(std::move(s));
            trajectory.termination = Termination::ERROR;
            return trajectory;
        }

        ParsedCompletion parsed = parse_completion(completion);
        if (parsed.kind == ParsedCompletion::ANSWER) {
            TrajectoryStep s;
            s.thought = parsed.thought;
            trajectory.steps.push_back(std::move(s));
            trajectory.final_answer = parsed.answer;
            trajectory.termination = Termination::ANSWERED;
            state.step_index += 1;
            return trajectory;
        }

        TrajectoryStep s;
        s.thought = parsed.thought;
        if (parsed.kind == ParsedCompletion::PARSE_ERROR) {
            s.observation = "ERROR: unparseable reasoner output";
            state.prior_failures += 1;
        } else {
            const ToolSpec* tool = nullptr;
            if (parsed.tool.empty() || parsed.tool == "auto") {
                const FeatureVector features =
                    extract_features(state, question, config.rarity);
                tool = select_tool(policy, features, registry, rng, config.selection)
                           .tool;
            } else {
                tool = registry.find(parsed.tool);
            }
            if (tool == nullptr) {
                s.tool = parsed.tool;
                s.params = parsed.params;
                s.observation = "ERROR: unknown tool: " + parsed.tool;
                state.prior_failures += 1;
            } else {
                s.tool = tool->name;
                s.category = tool->category;
                s.params = parsed.params;
                ToolResult result;
                bool errored = false;
                try {
                    result = tool->invoke(parsed.params);
                } catch (const std::exception& e) {
                    result.payload = std::string("ERROR: ") + e.what();
                    errored = true;
                }
                if (!errored) {
                    result = corrupt_tool_output(std::move(result),
                                                 config.corruption_rate, rng);
                }
                if (errored || result.corrupted) {
                    state.prior_failures += 1;
                }
                s.observation = result.payload;
                s.corrupted = result.corrupted;
                if (!errored && !result.corrupted) {
                    merge_observation_facts(state.knowledge, result.payload);
                }
                state.history.push_back(s.tool + ": " +
                                        (parsed.params.count("query")
                                             ? parsed.params.at("query")
                                             : std::string()));
            }
        }
        state.context.push_back(s.observation);
        state.step_index += 1;
        trajectory.steps.push_back(std::move(s));
    }
    return trajectory;
}

// ---------------------------------------------------------------------------
// Pattern analytics

std::vector<StepLabel> label_steps(const Trajectory& trajectory) {
    std::vector<StepLabel> labels;
    labels.reserve(trajectory.steps.size());
    std::vector<std::string> observed_tokens;
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
        const TrajectoryStep& s = trajectory.steps[i];
        const bool is_answer_step = trajectory.final_answer.has_value() &&
                                    i + 1 == trajectory.steps.size() && s.tool.empty();
        if (is_answer_step) {
            labels.push_back(StepLabel::SYNTHESIZE);
            continue;
        }
        auto query_it = s.params.find("query");
        if (!s.tool.empty() && query_it != s.params.end()) {
            const std::vector<std::string> query_tokens =
                text::tokenize(query_it->second);
            bool overlap = false;
            for (const std::string& token : query_tokens) {
                if (std::find(observed_tokens.begin(), observed_tokens.end(), token) !=
                    observed_tokens.end()) {
                    overlap = true;
                    break;
                }
            }
            labels.push_back(overlap ? StepLabel::VERIFY : StepLabel::SEARCH);
        } else {
            labels.push_back(StepLabel::OTHER);
        }
        for (std::string& token : text::tokenize(s.observation)) {
            observed_tokens.push_back(std::move(token));
        }
    }
    return labels;
}

PatternRecord classify_labels(const std::vector<StepLabel>& labels) {
    PatternRecord record;
    record.synthesized = !labels.empty() && labels.back() == StepLabel::SYNTHESIZE;

    std::size_t i = 0;
    while (i < labels.size() && labels[i] == StepLabel::SEARCH) {
        ++i;
    }
    record.search_steps = i;
    if (i == 0) {
        return record;  // no leading search: pattern cannot match
    }
    std::size_t verifies = 0;
    while (i < labels.size() && labels[i] == StepLabel::VERIFY) {
        ++verifies;
        ++i;
    }
    const bool matches =
        i + 1 == labels.size() && labels[i] == StepLabel::SYNTHESIZE;
    if (matches) {
        record.verify_count = verifies;
    }
    return record;
}

PatternRecord classify_pattern(const Trajectory& trajectory) {
    if (trajectory.steps.empty()) {
        throw ArgumentError("classify_pattern: trajectory has no steps");
    }
    return classify_labels(label_steps(trajectory));
}

BehaviorStats trajectory_stats(const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) {
        throw ArgumentError("trajectory_stats: list is nonempty by contract");
    }
    std::size_t first_medical = 0;
    std::size_t switched = 0;
    std::size_t recovered = 0;
    for (const Trajectory& t : trajectories) {
        std::optional<ToolCategory> previous;
        bool saw_switch = false;
        bool counted_first = false;
        bool saw_recovery = false;
        const TrajectoryStep* failed_step = nullptr;
        for (const TrajectoryStep& s : t.steps) {
            if (s.tool.empty() || !s.category.has_value()) {
                continue;
            }
            if (!counted_first) {
                counted_first = true;
                if (*s.category == ToolCategory::MEDICAL) {
                    ++first_medical;
                }
            }
            if (previous && *previous != *s.category) {
                saw_switch = true;
            }
            previous = *s.category;
            if (failed_step != nullptr && s.tool != failed_step->tool) {
                saw_recovery = true;
            }
            const bool is_failure =
                s.corrupted || s.observation.rfind("ERROR", 0) == 0;
            if (is_failure) {
                failed_step = &s;
            } else {
                failed_step = nullptr;  // recovery must follow the failure directly
            }
        }
        if (saw_switch) ++switched;
        if (saw_recovery) ++recovered;
    }
    const double n = static_cast<double>(trajectories.size());
    BehaviorStats stats;
    stats.first_medical_rate = static_cast<double>(first_medical) / n;
    stats.tool_switch_rate = static_cast<double>(switched) / n;
    stats.error_recovery_rate = static_cast<double>(recovered) / n;
    return stats;
}

// ---------------------------------------------------------------------------
// Serialization (schema v1)

ordered_json trajectory_to_json(const Trajectory& trajectory) {
    ordered_json j;
    j["v"] = 1;
    j["question"] = trajectory.question;
    ordered_json steps = ordered_json::array();
    for (const TrajectoryStep& s : trajectory.steps) {
        ordered_json step;
        step["thought"] = s.thought;
        step["tool"] = s.tool;
        step["category"] = s.category ? to_string(*s.category) : "";
        ordered_json params = ordered_json::object();
        for (const auto& [k, v] : s.params) {
            params[k] = v;
        }
        step["params"] = std::move(params);
        step["observation"] = s.observation;
        step["corrupted"] = s.corrupted;
        steps.push_back(std::move(step));
    }
    j["steps"] = std::move(steps);
    if (trajectory.final_answer) {
        j["final_answer"] = *trajectory.final_answer;
    }
    j["termination"] = to_string(trajectory.termination);
    return j;
}

Trajectory trajectory_from_json(const json& j) {
    try {
        if (j.at("v").get<int>() != 1) {
            throw FormatError("unsupported trajectory schema version");
        }
        Trajectory t;
        t.question = j.at("question").get<std::string>();
        for (const auto& step : j.at("steps")) {
            TrajectoryStep s;
            s.thought = step.at("thought").get<std::string>();
            s.tool = step.at("tool").get<std::string>();
            const std::string category = step.at("category").get<std::string>();
            if (category == "GENERAL") s.category = ToolCategory::GENERAL;
            else if (category == "MEDICAL") s.category = ToolCategory::MEDICAL;
            for (const auto& [k, v] : step.at("params").items()) {
                s.params[k] = v.get<std::string>();
            }
            s.observation = step.at("observation").get<std::string>();
            s.corrupted = step.at("corrupted").get<bool>();
            t.steps.push_back(std::move(s));
        }
        if (j.contains("final_answer")) {
            t.final_answer = j.at("final_answer").get<std::string>();
        }
        const std::string termination = j.at("termination").get<std::string>();
        if (termination == "ANSWERED") t.termination = Termination::ANSWERED;
        else if (termination == "STEP_BUDGET") t.termination = Termination::STEP_BUDGET;
        else if (termination == "ERROR") t.termination = Termination::ERROR;
        else throw FormatError("unknown termination: " + termination);
        return t;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed trajectory: ") + e.what());
    }
}

void save_trajectories_jsonl(const std::vector<Trajectory>& trajectories,
                             std::ostream& out) {
    for (const Trajectory& t : trajectories) {
        out << trajectory_to_json(t).dump() << '\n';
    }
}

std::vector<Trajectory> load_trajectories_jsonl(std::istream& in,
                                                std::size_t* malformed) {
    std::vector<Trajectory> out;
    std::size_t bad = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++bad;
            continue;
        }
        try {
            out.push_back(trajectory_from_json(j));
        } catch (const FormatError&) {
            ++bad;
        }
    }
    if (malformed != nullptr) {
        *malformed = bad;
    }
    return out;
}

const char* to_string(ToolCategory category) {
    return category == ToolCategory::MEDICAL ? "MEDICAL" : "GENERAL";
}

const char* to_string(Termination termination) {
    switch (termination) {
        case Termination::ANSWERED: return "ANSWERED";
        case Termination::STEP_BUDGET: return "STEP_BUDGET";
        case Termination::ERROR: return "ERROR";
    }
    return "ERROR";
}

}  // namespace medsynth::agent
