#include "medsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "medsynth/text.hpp"

namespace medsynth::synthesis {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// ReasoningPath

std::vector<std::string> ReasoningPath::entity_sequence() const {
    std::vector<std::string> seq;
    if (relations.empty()) {
        return seq;
    }
    seq.reserve(relations.size() + 1);
    seq.push_back(relations.front().subject);
    for (const kg::Relation& r : relations) {
        seq.push_back(r.object);
    }
    return seq;
}

const std::string& ReasoningPath::terminal_entity() const {
    if (relations.empty()) {
        throw ArgumentError("empty reasoning path has no terminal entity");
    }
    return relations.back().object;
}

void ReasoningPath::validate() const {
    if (relations.empty()) {
        throw ArgumentError("reasoning path must have at least one hop");
    }
    std::set<std::string> seen{relations.front().subject};
    for (std::size_t i = 0; i < relations.size(); ++i) {
        if (i > 0 && relations[i].subject != relations[i - 1].object) {
            throw ArgumentError("reasoning path breaks at hop " + std::to_string(i) +
                                ": " + relations[i - 1].object + " != " +
                                relations[i].subject);
        }
        if (!seen.insert(relations[i].object).second) {
            throw ArgumentError("reasoning path revisits entity: " + relations[i].object);
        }
    }
}

// ---------------------------------------------------------------------------
// Validity predicates

PathPredicate accept_all() {
    return [](const ReasoningPath&) { return true; };
}

PathPredicate default_validity() {
    return [](const ReasoningPath& path) {
        std::set<std::string> predicates;
        for (const kg::Relation& r : path.relations) {
            if (!predicates.insert(r.predicate).second) {
                return false;
            }
            if (r.clinical_context && *r.clinical_context == "refuted") {
                return false;
            }
        }
        return true;
    };
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

// Shared DFS state over an id-indexed view of the graph. Adjacency is sorted
// by (object id, predicate, temporal, spatial, clinical_context) so traversal
// order is deterministic and aligned with the tie-break order.
struct IndexedGraph {
    std::vector<std::string> ids;  // ascending
    std::vector<std::vector<const kg::Relation*>> out;  // by entity index

    explicit IndexedGraph(const kg::KnowledgeGraph& g) {
        ids = g.entity_ids();
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            pos[ids[i]] = i;
        }
        out.resize(ids.size());
        for (const kg::Relation& r : g.relations()) {
            out[pos.at(r.subject)].push_back(&r);
        }
        for (auto& edges : out) {
            std::sort(edges.begin(), edges.end(),
                      [](const kg::Relation* a, const kg::Relation* b) {
                          if (a->object != b->object) return a->object < b->object;
                          if (a->predicate != b->predicate) return a->predicate < b->predicate;
                          if (a->temporal != b->temporal) return a->temporal < b->temporal;
                          if (a->spatial != b->spatial) return a->spatial < b->spatial;
                          return a->clinical_context < b->clinical_context;
                      });
        }
        index_of.swap(pos);
    }

    std::map<std::string, std::size_t> index_of;
};

void dfs_paths(const IndexedGraph& ix, std::size_t node, std::size_t max_depth,
               std::vector<bool>& on_path, ReasoningPath& current,
               const std::function<void(const ReasoningPath&)>& visit) {
    if (current.relations.size() == max_depth) {
        return;
    }
    for (const kg::Relation* r : ix.out[node]) {
        const std::size_t next = ix.index_of.at(r->object);
        if (on_path[next]) {
            continue;  // simple paths only
        }
        current.relations.push_back(*r);
        visit(current);
        on_path[next] = true;
        dfs_paths(ix, next, max_depth, on_path, current, visit);
        on_path[next] = false;
        current.relations.pop_back();
    }
}

}  // namespace

void for_each_path(const kg::KnowledgeGraph& g, std::size_t max_depth,
                   const std::function<void(const ReasoningPath&)>& visit) {
    if (max_depth == 0) {
        throw ArgumentError("for_each_path: max_depth must be >= 1");
    }
    IndexedGraph ix(g);
    std::vector<bool> on_path(ix.ids.size(), false);
    ReasoningPath current;
    for (std::size_t start = 0; start < ix.ids.size(); ++start) {
        on_path[start] = true;
        dfs_paths(ix, start, max_depth, on_path, current, visit);
        on_path[start] = false;
    }
}

std::vector<ReasoningPath> enumerate_paths(const kg::KnowledgeGraph& g,
                                           std::size_t max_depth) {
    std::vector<ReasoningPath> paths;
    for_each_path(g, max_depth,
                  [&](const ReasoningPath& p) { paths.push_back(p); });
    return paths;
}

// ---------------------------------------------------------------------------
// Longest valid path

bool better_path(const ReasoningPath& a, const ReasoningPath& b) {
    if (a.hop_count() != b.hop_count()) {
        return a.hop_count() > b.hop_count();
    }
    const auto ea = a.entity_sequence();
    const auto eb = b.entity_sequence();
    if (ea != eb) {
        return ea < eb;
    }
    for (std::size_t i = 0; i < a.relations.size(); ++i) {
        const kg::Relation& ra = a.relations[i];
        const kg::Relation& rb = b.relations[i];
        if (ra.predicate != rb.predicate) return ra.predicate < rb.predicate;
        if (ra.temporal != rb.temporal) return ra.temporal < rb.temporal;
        if (ra.spatial != rb.spatial) return ra.spatial < rb.spatial;
        if (ra.clinical_context != rb.clinical_context) {
            return ra.clinical_context < rb.clinical_context;
        }
    }
    return false;
}

ReasoningPath longest_valid_path(const kg::KnowledgeGraph& g,
                                 const PathPredicate& validity,
                                 const ExtractionConfig& config) {
    if (g.entity_count() > config.node_cap) {
        throw ArgumentError("longest_valid_path: graph has " +
                            std::to_string(g.entity_count()) +
                            " entities, above the node cap of " +
                            std::to_string(config.node_cap));
    }
    if (g.relation_count() == 0) {
        throw NoValidPathError("graph has no relations");
    }
    bool found = false;
    ReasoningPath best;
    const std::size_t max_depth = g.entity_count() > 0 ? g.entity_count() - 1 : 0;
    for_each_path(g, std::max<std::size_t>(max_depth, 1),
                  [&](const ReasoningPath& p) {
                      if (!validity(p)) {
                          return;
                      }
                      if (!found || better_path(p, best)) {
                          best = p;
                          found = true;
                      }
                  });
    if (!found) {
        throw NoValidPathError("no path satisfies the validity predicate");
    }
    return best;
}

// ---------------------------------------------------------------------------
// Question generation

std::string render_question_prompt(const kg::KnowledgeGraph& g,
                                   const ReasoningPath& path, int attempt,
                                   int complexity) {
    std::string prompt =
        "Compose one question answerable only by following the fact chain in order.\n";
    for (std::size_t i = 0; i < path.relations.size(); ++i) {
        const kg::Relation& r = path.relations[i];
        prompt += "FACT " + std::to_string(i + 1) + ": " + g.entity(r.subject).name +
                  " | " + r.predicate + " | " + g.entity(r.object).name;
        if (r.temporal) prompt += " | temporal=" + *r.temporal;
        if (r.spatial) prompt += " | spatial=" + *r.spatial;
        if (r.clinical_context) prompt += " | clinical=" + *r.clinical_context;
        prompt += "\n";
    }
    prompt += "ANSWER ENTITY: " + g.entity(path.terminal_entity()).name + "\n";
    prompt +=
        "RULES: Ask for the entity reached at the end of the chain. The question "
        "text must not contain the answer entity's name.\n";
    prompt += "COMPLEXITY: " + std::to_string(complexity) + "\n";
    prompt += "ATTEMPT: " + std::to_string(attempt) + "\n";
    return prompt;
}

namespace {

bool contains_case_insensitive(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) {
        return false;
    }
    const std::string h = text::lowercase(haystack);
    const std::string n = text::lowercase(needle);
    return h.find(n) != std::string::npos;
}

QAItem generate_question(const kg::KnowledgeGraph& g, const ReasoningPath& path,
                         clients::TextGenerator& generator,
                         const QuestionConfig& config, int complexity) {
    path.validate();
    const std::string answer = g.entity(path.terminal_entity()).name;
    std::string question;
    for (int attempt = 0; attempt <= config.leakage_retries; ++attempt) {
        std::string draft;
        try {
            draft = generator.generate(render_question_prompt(g, path, attempt, complexity));
        } catch (const std::exception& e) {
            throw GenerationError(std::string("question generation failed: ") + e.what());
        }
        if (!contains_case_insensitive(draft, answer)) {
            question = std::move(draft);
            break;
        }
        if (attempt == config.leakage_retries) {
            throw LeakageError("answer entity leaked into the question after " +
                               std::to_string(attempt + 1) + " attempts");
        }
    }
    QAItem item;
    item.question = std::move(question);
    item.answer = answer;
    item.source_path = path;
    item.complexity = complexity;
    item.status = QAStatus::DRAFT;
    return item;
}

}  // namespace

QAItem path_to_question(const kg::KnowledgeGraph& g, const ReasoningPath& path,
                        clients::TextGenerator& generator,
                        const QuestionConfig& config) {
    return generate_question(g, path, generator, config, 0);
}

Regenerator make_hop_extending_regenerator(const kg::KnowledgeGraph& subgraph,
                                           clients::TextGenerator& generator,
                                           const QuestionConfig& config) {
    return [&subgraph, &generator, config](const QAItem& item,
                                           int new_complexity) -> QAItem {
        const ReasoningPath& old_path = item.source_path;
        const auto entities = old_path.entity_sequence();
        const std::set<std::string> visited(entities.begin(), entities.end());

        // Extend by one hop when an unvisited successor exists (smallest
        // object id first, matching the extraction tie-break).
        const kg::Relation* extension = nullptr;
        for (std::size_t idx :
             subgraph.out_relation_indices(old_path.terminal_entity())) {
            const kg::Relation& r = subgraph.relations()[idx];
            if (visited.count(r.object)) {
                continue;
            }
            if (extension == nullptr || r.object < extension->object ||
                (r.object == extension->object && r.predicate < extension->predicate)) {
                extension = &r;
            }
        }
        if (extension != nullptr) {
            ReasoningPath extended = old_path;
            extended.relations.push_back(*extension);
            return generate_question(subgraph, extended, generator, config,
                                     new_complexity);
        }
        // No room to grow: rephrase the same path with more indirection.
        return generate_question(subgraph, old_path, generator, config, new_complexity);
    };
}

QAItem calibrate_difficulty(QAItem item,
                            const std::vector<clients::AccuracyEvaluator*>& evaluators,
                            int max_rounds, const Regenerator& regenerate) {
    if (evaluators.empty()) {
        throw ArgumentError("calibrate_difficulty: need at least one evaluator");
    }
    if (max_rounds < 1) {
        throw ArgumentError("calibrate_difficulty: max_rounds must be >= 1");
    }
    int rounds_used = 0;
    for (;;) {
        double max_accuracy = -1.0;
        for (clients::AccuracyEvaluator* evaluator : evaluators) {
            try {
                max_accuracy = std::max(
                    max_accuracy,
                    evaluator->evaluate(item.question, item.answer, item.complexity));
            } catch (const UnknownAccuracyError&) {
                // accuracy unknown for this evaluator; skip it
            } catch (const TransportError&) {
            }
        }
        if (max_accuracy < 0.0) {
            throw CalibrationError("every evaluator failed to score the question");
        }
        if (max_accuracy < 0.5) {
            item.status = QAStatus::CALIBRATED;
            return item;
        }
        if (rounds_used == max_rounds) {
            item.status = QAStatus::EXHAUSTED;
            return item;
        }
        const int target = item.complexity + 1;
        item = regenerate(item, target);
        if (item.complexity != target) {
            throw ContractError("regenerator returned complexity " +
                                std::to_string(item.complexity) + ", expected " +
                                std::to_string(target));
        }
        item.status = QAStatus::DRAFT;
        ++rounds_used;
    }
}

// ---------------------------------------------------------------------------
// Masking

MaskedScaffold mask_path(const ReasoningPath& path) {
    path.validate();
    MaskedScaffold scaffold;
    scaffold.steps.reserve(path.relations.size());
    for (const kg::Relation& r : path.relations) {
        MaskedStep step;
        step.predicate = r.predicate;
        step.temporal = r.temporal;
        step.spatial = r.spatial;
        step.clinical_context = r.clinical_context;
        scaffold.steps.push_back(std::move(step));
    }
    return scaffold;
}

// ---------------------------------------------------------------------------
// Mixing

void MixConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) {
        throw ConfigError("mix alpha must be in [0,1]");
    }
}

std::size_t guided_share(double alpha, std::size_t n) {
    return static_cast<std::size_t>(
        std::floor(alpha * static_cast<double>(n) + 0.5));
}

namespace detail {

std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t k,
                                                    Rng& rng) {
    if (k > pool) {
        throw ArgumentError("sample_without_replacement: k exceeds pool size");
    }
    std::vector<std::size_t> indices(pool);
    for (std::size_t i = 0; i < pool; ++i) {
        indices[i] = i;
    }
    // Partial Fisher-Yates: the first k slots become the sample.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.next_index(pool - i);
        std::swap(indices[i], indices[j]);
    }
    indices.resize(k);
    return indices;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Records

ordered_json relation_to_json(const kg::Relation& r) {
    ordered_json j;
    j["subject"] = r.subject;
    j["predicate"] = r.predicate;
    j["object"] = r.object;
    if (r.temporal) j["temporal"] = *r.temporal;
    if (r.spatial) j["spatial"] = *r.spatial;
    if (r.clinical_context) j["clinical_context"] = *r.clinical_context;
    return j;
}

ordered_json scaffold_to_json(const MaskedScaffold& scaffold) {
    ordered_json steps = ordered_json::array();
    for (const MaskedStep& s : scaffold.steps) {
        ordered_json j;
        j["subject"] = kMaskToken;
        j["predicate"] = s.predicate;
        j["object"] = kMaskToken;
        if (s.temporal) j["temporal"] = *s.temporal;
        if (s.spatial) j["spatial"] = *s.spatial;
        if (s.clinical_context) j["clinical_context"] = *s.clinical_context;
        steps.push_back(std::move(j));
    }
    return steps;
}

ordered_json qa_record(const QAItem& item, const MaskedScaffold* scaffold) {
    ordered_json j;
    j["question"] = item.question;
    j["answer"] = item.answer;
    j["hops"] = item.source_path.hop_count();
    j["complexity"] = item.complexity;
    j["status"] = to_string(item.status);
    ordered_json path = ordered_json::array();
    for (const kg::Relation& r : item.source_path.relations) {
        path.push_back(relation_to_json(r));
    }
    j["path"] = std::move(path);
    j["masked_scaffold"] =
        scaffold != nullptr ? scaffold_to_json(*scaffold) : ordered_json::array();
    return j;
}

const char* to_string(QAStatus status) {
    switch (status) {
        case QAStatus::DRAFT: return "DRAFT";
        case QAStatus::CALIBRATED: return "CALIBRATED";
        case QAStatus::EXHAUSTED: return "EXHAUSTED";
    }
    return "DRAFT";
}

}  // namespace medsynth::synthesis
