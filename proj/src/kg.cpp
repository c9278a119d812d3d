#include "medsynth/kg.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace medsynth::kg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {
const std::vector<std::size_t> kEmptyIndex;
}

void KnowledgeGraph::require_unfrozen() const {
    if (frozen_) {
        throw GraphError("graph is frozen; mutation is not allowed");
    }
}

void KnowledgeGraph::add_entity(Entity e) {
    require_unfrozen();
    if (e.id.empty()) {
        throw GraphError("entity id must be nonempty");
    }
    if (e.corpus_frequency < 0.0 || e.corpus_frequency > 1.0) {
        throw GraphError("corpus_frequency out of [0,1] for entity: " + e.id);
    }
    if (entities_.count(e.id)) {
        throw GraphError("duplicate entity id: " + e.id);
    }
    name_to_id_.try_emplace(e.name, e.id);
    entities_.emplace(e.id, std::move(e));
}

void KnowledgeGraph::add_relation(Relation r) {
    require_unfrozen();
    if (r.predicate.empty()) {
        throw GraphError("relation predicate must be nonempty");
    }
    if (r.subject == r.object) {
        throw GraphError("relation subject equals object: " + r.subject);
    }
    if (!entities_.count(r.subject)) {
        throw GraphError("relation subject not in graph: " + r.subject);
    }
    if (!entities_.count(r.object)) {
        throw GraphError("relation object not in graph: " + r.object);
    }
    auto key = std::make_tuple(r.subject, r.predicate, r.object);
    if (!triples_.insert(std::move(key)).second) {
        return;  // duplicate triple: idempotent
    }
    const std::size_t idx = relations_.size();
    out_index_[r.subject].push_back(idx);
    in_index_[r.object].push_back(idx);
    relations_.push_back(std::move(r));
}

bool KnowledgeGraph::has_entity(const std::string& id) const {
    return entities_.count(id) > 0;
}

const Entity& KnowledgeGraph::entity(const std::string& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) {
        throw LookupError("unknown entity id: " + id);
    }
    return it->second;
}

const Entity* KnowledgeGraph::find_by_name(const std::string& name) const {
    auto it = name_to_id_.find(name);
    if (it == name_to_id_.end()) {
        return nullptr;
    }
    return &entities_.at(it->second);
}

std::vector<std::string> KnowledgeGraph::entity_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entities_.size());
    for (const auto& [id, _] : entities_) {
        ids.push_back(id);
    }
    return ids;
}

const std::vector<std::size_t>& KnowledgeGraph::out_relation_indices(
    const std::string& id) const {
    auto it = out_index_.find(id);
    return it == out_index_.end() ? kEmptyIndex : it->second;
}

const std::vector<std::size_t>& KnowledgeGraph::in_relation_indices(
    const std::string& id) const {
    auto it = in_index_.find(id);
    return it == in_index_.end() ? kEmptyIndex : it->second;
}

std::set<std::string> neighbors(const KnowledgeGraph& g, const std::string& entity_id) {
    if (!g.has_entity(entity_id)) {
        throw LookupError("unknown entity id: " + entity_id);
    }
    std::set<std::string> out;
    for (std::size_t idx : g.out_relation_indices(entity_id)) {
        out.insert(g.relations()[idx].object);
    }
    for (std::size_t idx : g.in_relation_indices(entity_id)) {
        out.insert(g.relations()[idx].subject);
    }
    return out;
}

KnowledgeGraph subgraph_around(const KnowledgeGraph& g, const std::string& seed,
                               std::size_t radius) {
    if (!g.has_entity(seed)) {
        throw LookupError("unknown seed entity: " + seed);
    }
    std::set<std::string> included{seed};
    std::deque<std::pair<std::string, std::size_t>> frontier{{seed, 0}};
    while (!frontier.empty()) {
        auto [id, dist] = frontier.front();
        frontier.pop_front();
        if (dist == radius) {
            continue;
        }
        for (const std::string& next : neighbors(g, id)) {
            if (included.insert(next).second) {
                frontier.emplace_back(next, dist + 1);
            }
        }
    }
    KnowledgeGraph sub;
    for (const std::string& id : included) {
        sub.add_entity(g.entity(id));
    }
    for (const Relation& r : g.relations()) {
        if (included.count(r.subject) && included.count(r.object)) {
            sub.add_relation(r);
        }
    }
    sub.freeze();
    return sub;
}

std::string expand_step(KnowledgeGraph& g, const std::string& current, Rng& rng,
                        clients::EntityDiscoverer& discoverer,
                        const ExpandOptions& opts) {
    if (!g.has_entity(current)) {
        throw LookupError("unknown entity id: " + current);
    }
    const std::set<std::string> hood = neighbors(g, current);
    const double branch = rng.next_double();

    auto draw_neighbor = [&]() -> std::string {
        std::vector<std::string> ids(hood.begin(), hood.end());
        return ids[rng.next_index(ids.size())];
    };

    if (branch < 0.5 && !hood.empty()) {
        return draw_neighbor();
    }

    std::vector<clients::DiscoveredEntity> found;
    try {
        found = discoverer.discover(current);
    } catch (const std::exception& e) {
        throw ExpansionError(std::string("discovery failed at entity ") + current +
                             ": " + e.what());
    }
    for (const auto& cand : found) {
        if (cand.name.empty() || cand.name == current) {
            continue;  // cannot link an entity to itself
        }
        const std::string& id = cand.name;
        if (!g.has_entity(id)) {
            Entity e;
            e.id = id;
            e.name = cand.name;
            e.corpus_frequency = 0.0;
            e.is_rare = true;
            g.add_entity(std::move(e));
        }
        Relation r;
        r.subject = current;
        r.predicate = cand.predicate.value_or(opts.default_predicate);
        r.object = id;
        g.add_relation(std::move(r));
        return id;
    }
    if (!hood.empty()) {
        return draw_neighbor();
    }
    throw ExpansionError("discovery returned no usable entities and " + current +
                         " has no neighbors");
}

void expand_walk(KnowledgeGraph& g, const std::string& seed, std::size_t steps,
                 Rng& rng, clients::EntityDiscoverer& discoverer,
                 const ExpandOptions& opts) {
    if (steps == 0) {
        throw ArgumentError("expand_walk: steps must be >= 1");
    }
    if (!g.has_entity(seed)) {
        throw LookupError("unknown seed entity: " + seed);
    }
    std::string current = seed;
    for (std::size_t i = 0; i < steps; ++i) {
        try {
            current = expand_step(g, current, rng, discoverer, opts);
        } catch (const ExpansionError& e) {
            throw ExpansionError(e.what(), static_cast<int>(i));
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json entity_record(const Entity& e) {
    ordered_json j;
    j["kind"] = "entity";
    j["id"] = e.id;
    j["name"] = e.name;
    j["corpus_frequency"] = e.corpus_frequency;
    j["is_rare"] = e.is_rare;
    if (e.specialty) {
        j["specialty"] = *e.specialty;
    }
    return j;
}

ordered_json relation_record(const Relation& r) {
    ordered_json j;
    j["kind"] = "relation";
    j["subject"] = r.subject;
    j["predicate"] = r.predicate;
    j["object"] = r.object;
    if (r.temporal) j["temporal"] = *r.temporal;
    if (r.spatial) j["spatial"] = *r.spatial;
    if (r.clinical_context) j["clinical_context"] = *r.clinical_context;
    return j;
}

}  // namespace

void save_jsonl(const KnowledgeGraph& g, std::ostream& out) {
    for (const auto& [_, e] : g.entities()) {
        out << entity_record(e).dump() << '\n';
    }
    for (const Relation& r : g.relations()) {
        out << relation_record(r).dump() << '\n';
    }
}

KnowledgeGraph load_jsonl(std::istream& in) {
    KnowledgeGraph g;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw FormatError("graph line " + std::to_string(line_no) +
                              " is not a JSON object");
        }
        try {
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "entity") {
                Entity e;
                e.id = j.at("id").get<std::string>();
                e.name = j.at("name").get<std::string>();
                e.corpus_frequency = j.at("corpus_frequency").get<double>();
                e.is_rare = j.at("is_rare").get<bool>();
                if (j.contains("specialty")) {
                    e.specialty = j.at("specialty").get<std::string>();
                }
                g.add_entity(std::move(e));
            } else if (kind == "relation") {
                Relation r;
                r.subject = j.at("subject").get<std::string>();
                r.predicate = j.at("predicate").get<std::string>();
                r.object = j.at("object").get<std::string>();
                if (j.contains("temporal")) r.temporal = j.at("temporal").get<std::string>();
                if (j.contains("spatial")) r.spatial = j.at("spatial").get<std::string>();
                if (j.contains("clinical_context")) {
                    r.clinical_context = j.at("clinical_context").get<std::string>();
                }
                g.add_relation(std::move(r));
            } else {
                throw FormatError("unknown record kind: " + kind);
            }
        } catch (const json::exception& e) {
            throw FormatError("graph line " + std::to_string(line_no) + ": " + e.what());
        } catch (const GraphError& e) {
            throw FormatError("graph line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return g;
}

void save_jsonl_file(const KnowledgeGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot open for writing: " + path.string());
    }
    save_jsonl(g, out);
}

KnowledgeGraph load_jsonl_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open graph file: " + path.string());
    }
    return load_jsonl(in);
}

}  // namespace medsynth::kg
