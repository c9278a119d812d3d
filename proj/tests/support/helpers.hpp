#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "medsynth/clients.hpp"
#include "medsynth/kg.hpp"
#include "medsynth/rng.hpp"

namespace testsupport {

// Finds a small seed whose fresh Rng satisfies `predicate`; lets tests force
// a specific first draw (e.g. branch < 0.5) without faking the generator.
inline std::uint64_t find_seed(const std::function<bool(medsynth::Rng&)>& predicate,
                               std::uint64_t start = 0) {
    for (std::uint64_t seed = start; seed < start + 100000; ++seed) {
        medsynth::Rng rng(seed);
        if (predicate(rng)) {
            return seed;
        }
    }
    throw std::runtime_error("find_seed: no seed satisfies the predicate");
}

inline std::uint64_t seed_with_first_draw_below(double bound) {
    return find_seed([&](medsynth::Rng& r) { return r.next_double() < bound; });
}

inline std::uint64_t seed_with_first_draw_at_least(double bound) {
    return find_seed([&](medsynth::Rng& r) { return r.next_double() >= bound; });
}

inline std::string node_id(std::size_t i) {
    return "n" + std::string(i < 10 ? "0" : "") + std::to_string(i);
}

// Random directed graph: node count in [2, max_nodes], each ordered pair an
// edge with probability `density`. A slice of edges gets context annotations
// (including occasional "refuted") and predicates repeat across a small pool
// so validity predicates have something to reject.
inline medsynth::kg::KnowledgeGraph random_graph(medsynth::Rng& rng,
                                                 std::size_t max_nodes,
                                                 double density) {
    using medsynth::kg::Entity;
    using medsynth::kg::KnowledgeGraph;
    using medsynth::kg::Relation;
    static const std::array<const char*, 5> predicates = {
        "treats", "inhibits", "causes", "weak_link", "binds"};

    KnowledgeGraph g;
    const std::size_t nodes = 2 + rng.next_index(max_nodes - 1);
    for (std::size_t i = 0; i < nodes; ++i) {
        Entity e;
        e.id = node_id(i);
        e.name = "entity " + node_id(i);
        e.corpus_frequency = 0.5;
        g.add_entity(std::move(e));
    }
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j = 0; j < nodes; ++j) {
            if (i == j || rng.next_double() >= density) {
                continue;
            }
            Relation r;
            r.subject = node_id(i);
            r.object = node_id(j);
            r.predicate = predicates[rng.next_index(predicates.size())];
            if (rng.next_double() < 0.15) {
                r.clinical_context = rng.next_double() < 0.5 ? "refuted" : "confirmed";
            }
            g.add_relation(std::move(r));
        }
    }
    g.freeze();
    return g;
}

// Discoverer scripted at the C++ level (no JSON round-trip) for kg tests.
class LambdaDiscoverer : public medsynth::clients::EntityDiscoverer {
public:
    using Fn = std::function<std::vector<medsynth::clients::DiscoveredEntity>(
        const std::string&)>;
    explicit LambdaDiscoverer(Fn fn) : fn_(std::move(fn)) {}
    std::vector<medsynth::clients::DiscoveredEntity> discover(
        const std::string& context_entity) override {
        return fn_(context_entity);
    }

private:
    Fn fn_;
};

inline std::string graph_bytes(const medsynth::kg::KnowledgeGraph& g) {
    std::ostringstream out;
    medsynth::kg::save_jsonl(g, out);
    return out.str();
}

}  // namespace testsupport
