#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "medsynth/clients.hpp"
#include "medsynth/errors.hpp"
#include "medsynth/rng.hpp"

namespace medsynth::kg {

struct Entity {
    std::string id;
    std::string name;
    double corpus_frequency = 0.0;  // in [0,1]
    bool is_rare = false;
    std::optional<std::string> specialty;
};

// Enriched relation: a labelled edge plus optional temporal, spatial and
// clinical context annotations.
struct Relation {
    std::string subject;
    std::string predicate;
    std::string object;
    std::optional<std::string> temporal;
    std::optional<std::string> spatial;
    std::optional<std::string> clinical_context;

    friend bool operator==(const Relation&, const Relation&) = default;
};

// Directed multigraph over entities. Mutable by a single writer during
// construction/expansion; freeze() makes it immutable and safely shareable
// across parallel readers. Duplicate (subject, predicate, object) triples
// are silently deduplicated; every relation endpoint must already exist.
class KnowledgeGraph {
public:
    static constexpr bool directed = true;

    void add_entity(Entity e);
    void add_relation(Relation r);
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    bool has_entity(const std::string& id) const;
    const Entity& entity(const std::string& id) const;  // LookupError
    const Entity* find_by_name(const std::string& name) const;

    std::size_t entity_count() const { return entities_.size(); }
    std::size_t relation_count() const { return relations_.size(); }
    std::vector<std::string> entity_ids() const;  // ascending
    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::vector<Relation>& relations() const { return relations_; }

    // Positions into relations() for edges out of / into an entity.
    const std::vector<std::size_t>& out_relation_indices(const std::string& id) const;
    const std::vector<std::size_t>& in_relation_indices(const std::string& id) const;

private:
    void require_unfrozen() const;

    std::map<std::string, Entity> entities_;
    std::vector<Relation> relations_;
    std::map<std::string, std::vector<std::size_t>> out_index_;
    std::map<std::string, std::vector<std::size_t>> in_index_;
    std::set<std::tuple<std::string, std::string, std::string>> triples_;
    std::map<std::string, std::string> name_to_id_;  // first registration wins
    bool frozen_ = false;
};

// Undirected one-hop neighborhood: ids reachable by one outgoing or incoming
// relation. Expansion and radius queries are undirected; path extraction
// (synthesis module) follows relation direction.
std::set<std::string> neighbors(const KnowledgeGraph& g, const std::string& entity_id);

// Induced subgraph of all entities within `radius` undirected hops of seed,
// including every relation among them. The result is frozen.
KnowledgeGraph subgraph_around(const KnowledgeGraph& g, const std::string& seed,
                               std::size_t radius);

struct ExpandOptions {
    std::string default_predicate = "discovered_link";
};

// One expansion move from `current`: with probability 0.5 a uniform draw from
// the undirected neighborhood, otherwise an entity from the discoverer (added
// to the graph, linked to `current`). An empty neighborhood falls through to
// the discover branch; an empty discovery result falls back to the
// neighborhood when one exists and is an ExpansionError otherwise.
std::string expand_step(KnowledgeGraph& g, const std::string& current, Rng& rng,
                        clients::EntityDiscoverer& discoverer,
                        const ExpandOptions& opts = {});

// Iterates expand_step `steps` times, threading the current entity. Expansion
// failures are rethrown with the step index at which they occurred.
void expand_walk(KnowledgeGraph& g, const std::string& seed, std::size_t steps,
                 Rng& rng, clients::EntityDiscoverer& discoverer,
                 const ExpandOptions& opts = {});

// Line-delimited JSON serialization: one {"kind":"entity",...} record per
// entity (ascending id), then one {"kind":"relation",...} record per relation
// in insertion order. Optional fields are omitted when absent; round-trips
// are lossless.
void save_jsonl(const KnowledgeGraph& g, std::ostream& out);
KnowledgeGraph load_jsonl(std::istream& in);  // FormatError; result unfrozen
void save_jsonl_file(const KnowledgeGraph& g, const std::filesystem::path& path);
KnowledgeGraph load_jsonl_file(const std::filesystem::path& path);

}  // namespace medsynth::kg
