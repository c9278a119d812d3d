#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "medsynth/clients.hpp"
#include "medsynth/errors.hpp"
#include "medsynth/kg.hpp"
#include "medsynth/rng.hpp"

namespace medsynth::synthesis {

// Ordered chain of relations: the object of each relation is the subject of
// the next, no entity repeats, at least one hop.
struct ReasoningPath {
    std::vector<kg::Relation> relations;

    std::size_t hop_count() const { return relations.size(); }
    std::vector<std::string> entity_sequence() const;  // e0 .. en
    const std::string& terminal_entity() const;
    void validate() const;  // ArgumentError on broken chain / repeats / empty
};

using PathPredicate = std::function<bool(const ReasoningPath&)>;

PathPredicate accept_all();

// Default validity: rejects paths with repeated predicates and paths that
// traverse a relation whose clinical_context is "refuted". Pluggable; callers
// may swap in their own rule.
PathPredicate default_validity();

// Visits every simple directed path with 1..max_depth hops exactly once, in
// deterministic order (start entities ascending, adjacency sorted). The path
// reference is only valid for the duration of the call.
void for_each_path(const kg::KnowledgeGraph& g, std::size_t max_depth,
                   const std::function<void(const ReasoningPath&)>& visit);

std::vector<ReasoningPath> enumerate_paths(const kg::KnowledgeGraph& g,
                                           std::size_t max_depth);

// Preference order for path extraction: longer wins; among equal lengths the
// lexicographically smallest entity-id sequence wins, then the smallest
// predicate sequence, then context fields (a total order so parallel edges
// break ties deterministically too).
bool better_path(const ReasoningPath& a, const ReasoningPath& b);

struct ExtractionConfig {
    // Exhaustive search is exponential; radius-bounded subgraphs stay small.
    std::size_t node_cap = 14;
};

// Maximum-length simple directed path satisfying `validity`, deterministic
// tie-break per better_path. NoValidPathError when nothing qualifies;
// ArgumentError when the graph exceeds the node cap.
ReasoningPath longest_valid_path(const kg::KnowledgeGraph& g,
                                 const PathPredicate& validity,
                                 const ExtractionConfig& config = {});

enum class QAStatus { DRAFT, CALIBRATED, EXHAUSTED };

struct QAItem {
    std::string question;
    std::string answer;  // name of the terminal entity of source_path
    ReasoningPath source_path;
    int complexity = 0;
    QAStatus status = QAStatus::DRAFT;
};

struct QuestionConfig {
    int leakage_retries = 2;  // extra generation attempts after a leaked draft
};

// The structured prompt handed to the generator: one FACT line per relation
// (entity names, predicate, context annotations), the answer entity, and the
// no-leak rule. TemplateQuestionGenerator consumes this same format.
std::string render_question_prompt(const kg::KnowledgeGraph& g,
                                   const ReasoningPath& path, int attempt,
                                   int complexity);

// Question for a path: answer is the terminal entity's name, status DRAFT,
// complexity 0. Drafts that contain the answer string are rejected and
// retried; LeakageError after the configured retries.
QAItem path_to_question(const kg::KnowledgeGraph& g, const ReasoningPath& path,
                        clients::TextGenerator& generator,
                        const QuestionConfig& config = {});

// Produces a replacement item at the requested complexity.
using Regenerator = std::function<QAItem(const QAItem&, int new_complexity)>;

// Default regenerator: extends the source path by one hop when the subgraph
// allows, otherwise rephrases the same path with more indirection.
Regenerator make_hop_extending_regenerator(const kg::KnowledgeGraph& subgraph,
                                           clients::TextGenerator& generator,
                                           const QuestionConfig& config = {});

// Difficulty loop: while any evaluator scores >= 0.5, regenerate at
// complexity+1; CALIBRATED once max accuracy < 0.5, EXHAUSTED after
// max_rounds regenerations. Evaluator failures are skipped; if every
// evaluator fails in a round, CalibrationError.
QAItem calibrate_difficulty(QAItem item,
                            const std::vector<clients::AccuracyEvaluator*>& evaluators,
                            int max_rounds, const Regenerator& regenerate);

inline constexpr const char* kMaskToken = "[MASK]";

// One masked triple: both entity slots replaced by the mask token, predicate
// and context annotations preserved verbatim.
struct MaskedStep {
    std::string predicate;
    std::optional<std::string> temporal;
    std::optional<std::string> spatial;
    std::optional<std::string> clinical_context;
};

struct MaskedScaffold {
    std::vector<MaskedStep> steps;  // same length as the source path
};

MaskedScaffold mask_path(const ReasoningPath& path);

struct MixConfig {
    double alpha = 0.7;  // guided share of the mixed dataset
    void validate() const;
};

// round(alpha * n), half-up.
std::size_t guided_share(double alpha, std::size_t n);

namespace detail {
std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t k,
                                                    Rng& rng);
}

// Exactly round(alpha*n) records sampled without replacement from `guided`
// and the remainder from `exploration`, then shuffled; SupplyError names the
// pool that ran short.
template <typename T>
std::vector<T> mix_dataset(const std::vector<T>& guided,
                           const std::vector<T>& exploration,
                           const MixConfig& config, std::size_t n, Rng& rng) {
    config.validate();
    const std::size_t g = guided_share(config.alpha, n);
    const std::size_t e = n - g;
    if (g > guided.size()) {
        throw SupplyError("mix_dataset: need " + std::to_string(g) +
                              " guided records, have " + std::to_string(guided.size()),
                          "guided");
    }
    if (e > exploration.size()) {
        throw SupplyError("mix_dataset: need " + std::to_string(e) +
                              " exploration records, have " +
                              std::to_string(exploration.size()),
                          "exploration");
    }
    std::vector<T> mixed;
    mixed.reserve(n);
    for (std::size_t idx : detail::sample_without_replacement(guided.size(), g, rng)) {
        mixed.push_back(guided[idx]);
    }
    for (std::size_t idx :
         detail::sample_without_replacement(exploration.size(), e, rng)) {
        mixed.push_back(exploration[idx]);
    }
    rng.shuffle(mixed);
    return mixed;
}

// Dataset record: {"question","answer","hops","complexity","status","path",
// "masked_scaffold"}; field order is fixed for byte-stable snapshots. Records
// without a scaffold (exploration variants) carry an empty array.
nlohmann::ordered_json qa_record(const QAItem& item, const MaskedScaffold* scaffold);
nlohmann::ordered_json scaffold_to_json(const MaskedScaffold& scaffold);
nlohmann::ordered_json relation_to_json(const kg::Relation& r);

const char* to_string(QAStatus status);

}  // namespace medsynth::synthesis
