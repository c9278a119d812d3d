#include <doctest.h>

#include <set>
#include <sstream>

#include "medsynth/synthesis.hpp"
#include "support/helpers.hpp"

using namespace medsynth;
using namespace medsynth::synthesis;

namespace {

kg::KnowledgeGraph graph_from_edges(
    const std::vector<std::tuple<std::string, std::string, std::string>>& edges) {
    kg::KnowledgeGraph g;
    std::set<std::string> ids;
    for (const auto& [s, p, o] : edges) {
        ids.insert(s);
        ids.insert(o);
    }
    for (const auto& id : ids) {
        g.add_entity(kg::Entity{id, id, 0.0, false, {}});
    }
    for (const auto& [s, p, o] : edges) {
        g.add_relation(kg::Relation{s, p, o});
    }
    g.freeze();
    return g;
}

std::string path_signature(const ReasoningPath& p) {
    std::string sig;
    for (const auto& id : p.entity_sequence()) {
        sig += id + ">";
    }
    for (const auto& r : p.relations) {
        sig += r.predicate + ",";
    }
    return sig;
}

clients::ScriptedGenerator one_shot_generator(std::string response) {
    clients::MockScript script({{"*", std::move(response), false, true}}, true);
    return clients::ScriptedGenerator(std::move(script));
}

}  // namespace

TEST_CASE("reasoning path validation") {
    ReasoningPath empty;
    CHECK_THROWS_AS(empty.validate(), ArgumentError);

    ReasoningPath broken;
    broken.relations = {kg::Relation{"a", "p", "b"}, kg::Relation{"c", "p", "d"}};
    CHECK_THROWS_AS(broken.validate(), ArgumentError);

    ReasoningPath cyclic;
    cyclic.relations = {kg::Relation{"a", "p", "b"}, kg::Relation{"b", "q", "a"}};
    CHECK_THROWS_AS(cyclic.validate(), ArgumentError);

    ReasoningPath ok;
    ok.relations = {kg::Relation{"a", "p", "b"}, kg::Relation{"b", "q", "c"}};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.hop_count() == 2);
    CHECK(ok.terminal_entity() == "c");
    CHECK(ok.entity_sequence() == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("enumerate_paths lists every simple directed path once") {
    SUBCASE("single edge") {
        auto g = graph_from_edges({{"a", "p", "b"}});
        auto paths = enumerate_paths(g, 5);
        REQUIRE(paths.size() == 1);
        CHECK(paths[0].hop_count() == 1);
    }

    SUBCASE("chain a->b->c has exactly three paths") {
        auto g = graph_from_edges({{"a", "p", "b"}, {"b", "q", "c"}});
        auto paths = enumerate_paths(g, 5);
        std::set<std::string> signatures;
        for (const auto& p : paths) {
            signatures.insert(path_signature(p));
        }
        CHECK(paths.size() == 3);
        CHECK(signatures.size() == 3);  // each exactly once
    }

    SUBCASE("cycles terminate: only simple paths") {
        auto g = graph_from_edges({{"a", "p", "b"}, {"b", "q", "a"}});
        auto paths = enumerate_paths(g, 10);
        CHECK(paths.size() == 2);  // a->b and b->a
        for (const auto& p : paths) {
            CHECK_NOTHROW(p.validate());
        }
    }

    SUBCASE("parallel edges are distinct paths") {
        auto g = graph_from_edges({{"a", "p", "b"}, {"a", "q", "b"}});
        CHECK(enumerate_paths(g, 3).size() == 2);
    }

    SUBCASE("max_depth bounds the hop count") {
        auto g = graph_from_edges({{"a", "p", "b"}, {"b", "q", "c"}, {"c", "r", "d"}});
        auto paths = enumerate_paths(g, 2);
        for (const auto& p : paths) {
            CHECK(p.hop_count() <= 2);
        }
        CHECK(paths.size() == 5);  // ab, abc, bc, bcd, cd
    }

    SUBCASE("empty graph enumerates nothing") {
        kg::KnowledgeGraph g;
        g.freeze();
        CHECK(enumerate_paths(g, 3).empty());
    }
}

TEST_CASE("longest_valid_path with deterministic tie-break") {
    SUBCASE("full chain wins under accept-all") {
        auto g = graph_from_edges(
            {{"a", "p1", "b"}, {"b", "p2", "c"}, {"c", "p3", "d"}});
        auto best = longest_valid_path(g, accept_all());
        CHECK(best.hop_count() == 3);
        CHECK(best.entity_sequence() == std::vector<std::string>{"a", "b", "c", "d"});
    }

    SUBCASE("triangle: two-hop path beats the shortcut edge") {
        auto g = graph_from_edges({{"a", "p", "b"}, {"b", "q", "c"}, {"a", "r", "c"}});
        auto best = longest_valid_path(g, accept_all());
        CHECK(best.hop_count() == 2);
        CHECK(best.entity_sequence() == std::vector<std::string>{"a", "b", "c"});
    }

    SUBCASE("validity filter shortens the answer") {
        auto g = graph_from_edges({{"a", "p", "b"}, {"b", "weak_link", "c"}});
        auto no_weak = [](const ReasoningPath& path) {
            for (const auto& r : path.relations) {
                if (r.predicate == "weak_link") {
                    return false;
                }
            }
            return true;
        };
        auto best = longest_valid_path(g, no_weak);
        CHECK(best.hop_count() == 1);
        CHECK(best.relations[0].predicate == "p");
    }

    SUBCASE("equal-length candidates: smallest entity sequence wins") {
        auto g = graph_from_edges(
            {{"a", "p", "b"}, {"b", "p2", "d"}, {"a", "q", "c"}, {"c", "q2", "d"}});
        auto best = longest_valid_path(g, accept_all());
        CHECK(best.entity_sequence() == std::vector<std::string>{"a", "b", "d"});
    }

    SUBCASE("parallel edges: smallest predicate sequence wins") {
        auto g = graph_from_edges({{"a", "zz", "b"}, {"a", "aa", "b"}});
        auto best = longest_valid_path(g, accept_all());
        CHECK(best.relations[0].predicate == "aa");
    }

    SUBCASE("no valid path raises NoValidPathError") {
        auto g = graph_from_edges({{"a", "p", "b"}});
        CHECK_THROWS_AS(longest_valid_path(g, [](const ReasoningPath&) { return false; }),
                        NoValidPathError);
    }

    SUBCASE("node cap is a hard error") {
        kg::KnowledgeGraph g;
        for (int i = 0; i < 15; ++i) {
            g.add_entity(kg::Entity{testsupport::node_id(i), "e", 0.0, false, {}});
        }
        g.add_relation(kg::Relation{"n00", "p", "n01"});
        g.freeze();
        CHECK_THROWS_AS(longest_valid_path(g, accept_all()), ArgumentError);
    }
}

TEST_CASE("longest_valid_path agrees with the enumeration argmax") {
    // the acceptance suite runs the full 500-graph sweep; this is a quick
    // regression at unit scale
    Rng rng(55);
    const auto predicate_dedup = default_validity();
    for (int trial = 0; trial < 60; ++trial) {
        auto g = testsupport::random_graph(rng, 10, 0.1 + 0.4 * rng.next_double());
        bool found = false;
        ReasoningPath oracle_best;
        for_each_path(g, g.entity_count(), [&](const ReasoningPath& p) {
            if (!predicate_dedup(p)) {
                return;
            }
            if (!found || better_path(p, oracle_best)) {
                oracle_best = p;
                found = true;
            }
        });
        if (!found) {
            CHECK_THROWS_AS(longest_valid_path(g, predicate_dedup), NoValidPathError);
            continue;
        }
        auto best = longest_valid_path(g, predicate_dedup);
        CHECK(path_signature(best) == path_signature(oracle_best));
    }
}

TEST_CASE("default validity rejects repeated predicates and refuted context") {
    ReasoningPath repeated;
    repeated.relations = {kg::Relation{"a", "p", "b"}, kg::Relation{"b", "p", "c"}};
    CHECK_FALSE(default_validity()(repeated));

    ReasoningPath refuted;
    kg::Relation r{"a", "p", "b"};
    r.clinical_context = "refuted";
    refuted.relations = {r};
    CHECK_FALSE(default_validity()(refuted));

    ReasoningPath fine;
    fine.relations = {kg::Relation{"a", "p", "b"}, kg::Relation{"b", "q", "c"}};
    CHECK(default_validity()(fine));
}

TEST_CASE("path_to_question builds the prompt and guards leakage") {
    auto g = graph_from_edges({{"start", "treats", "middle"}, {"middle", "binds", "goal"}});
    ReasoningPath path;
    path.relations = {g.relations()[0].subject == "start" ? g.relations()[0]
                                                          : g.relations()[1],
                      g.relations()[0].subject == "start" ? g.relations()[1]
                                                          : g.relations()[0]};

    SUBCASE("answer is the terminal entity, status DRAFT, complexity 0") {
        auto generator = one_shot_generator("Which entity does the chain reach?");
        auto item = path_to_question(g, path, generator);
        CHECK(item.answer == "goal");
        CHECK(item.status == QAStatus::DRAFT);
        CHECK(item.complexity == 0);
        CHECK(item.question == "Which entity does the chain reach?");
    }

    SUBCASE("prompt contains one FACT clause per relation") {
        auto g4 = graph_from_edges({{"a", "p1", "b"},
                                    {"b", "p2", "c"},
                                    {"c", "p3", "d"},
                                    {"d", "p4", "e"}});
        auto four = longest_valid_path(g4, accept_all());
        REQUIRE(four.hop_count() == 4);
        const std::string prompt = render_question_prompt(g4, four, 0, 0);
        std::size_t clauses = 0;
        for (std::size_t pos = 0; (pos = prompt.find("FACT ", pos)) != std::string::npos;
             pos += 5) {
            ++clauses;
        }
        CHECK(clauses == 4);
        CHECK(prompt.find("ANSWER ENTITY: e") != std::string::npos);
    }

    SUBCASE("leaked drafts are retried per config") {
        clients::MockScript script({{"*", "The answer is goal.", false, false},
                                    {"*", "Clean question?", false, false}},
                                   true);
        clients::ScriptedGenerator generator(std::move(script));
        auto item = path_to_question(g, path, generator, {2});
        CHECK(item.question == "Clean question?");
    }

    SUBCASE("persistent leakage is a LeakageError") {
        auto generator = one_shot_generator("goal goal goal");
        CHECK_THROWS_AS(path_to_question(g, path, generator, {1}), LeakageError);
    }

    SUBCASE("template generator mentions the start and predicates, never the answer") {
        clients::TemplateQuestionGenerator generator;
        auto item = path_to_question(g, path, generator);
        CHECK(item.question.find("start") != std::string::npos);
        CHECK(item.question.find("treats") != std::string::npos);
        CHECK(item.question.find("goal") == std::string::npos);
    }
}

TEST_CASE("calibrate_difficulty traces the regeneration loop") {
    auto g = graph_from_edges({{"alpha", "p1", "beta"},
                               {"beta", "p2", "gamma"},
                               {"gamma", "p3", "delta"},
                               {"delta", "p4", "epsilon"},
                               {"epsilon", "p5", "zeta"}});
    clients::TemplateQuestionGenerator generator;
    ReasoningPath one_hop;
    one_hop.relations = {kg::Relation{"alpha", "p1", "beta"}};
    const auto regenerator = make_hop_extending_regenerator(g, generator);

    SUBCASE("immediately hard question calibrates in one round") {
        clients::MockScript s1({{"*", "0.4", false, true}}, true);
        clients::MockScript s2({{"*", "0.3", false, true}}, true);
        clients::ScriptedEvaluator e1(std::move(s1));
        clients::ScriptedEvaluator e2(std::move(s2));
        auto item = path_to_question(g, one_hop, generator);
        auto out = calibrate_difficulty(item, {&e1, &e2}, 4, regenerator);
        CHECK(out.status == QAStatus::CALIBRATED);
        CHECK(out.complexity == 0);
        CHECK(e1.calls() == 1);
        CHECK(e2.calls() == 1);
    }

    SUBCASE("0.8 below complexity 3 calibrates at complexity 3 after 2 regenerations") {
        clients::MockScript script({{"complexity=3", "0.3", false, true},
                                    {"*", "0.8", false, true}},
                                   true);
        clients::ScriptedEvaluator evaluator(std::move(script));
        auto item = path_to_question(g, one_hop, generator);
        item.complexity = 1;  // trace starts at complexity 1
        auto out = calibrate_difficulty(item, {&evaluator}, 4, regenerator);
        CHECK(out.status == QAStatus::CALIBRATED);
        CHECK(out.complexity == 3);
        CHECK(evaluator.calls() == 3);  // c1, c2 fail; c3 passes
    }

    SUBCASE("an always-confident evaluator exhausts after max_rounds") {
        clients::MockScript script({{"*", "0.9", false, true}}, true);
        clients::ScriptedEvaluator evaluator(std::move(script));
        auto item = path_to_question(g, one_hop, generator);
        auto out = calibrate_difficulty(item, {&evaluator}, 4, regenerator);
        CHECK(out.status == QAStatus::EXHAUSTED);
        CHECK(out.complexity == 4);  // raised four times
    }

    SUBCASE("hop extension grows the path; rephrasing takes over at the boundary") {
        clients::MockScript script({{"*", "0.9", false, true}}, true);
        clients::ScriptedEvaluator evaluator(std::move(script));
        auto item = path_to_question(g, one_hop, generator);
        auto out = calibrate_difficulty(item, {&evaluator}, 6, regenerator);
        // chain has 5 edges: 4 extensions then rephrase-only rounds
        CHECK(out.source_path.hop_count() == 5);
        CHECK(out.complexity == 6);
    }

    SUBCASE("failing evaluators are skipped; all failing is a calibration error") {
        clients::MockScript ok({{"*", "0.3", false, true}}, true);
        clients::MockScript broken({{"*", "", true, true}}, true);
        clients::ScriptedEvaluator good(std::move(ok));
        clients::ScriptedEvaluator bad(std::move(broken));
        auto item = path_to_question(g, one_hop, generator);
        auto out = calibrate_difficulty(item, {&bad, &good}, 4, regenerator);
        CHECK(out.status == QAStatus::CALIBRATED);

        clients::MockScript broken2({{"*", "", true, true}}, true);
        clients::ScriptedEvaluator bad2(std::move(broken2));
        auto item2 = path_to_question(g, one_hop, generator);
        CHECK_THROWS_AS(calibrate_difficulty(item2, {&bad2}, 4, regenerator),
                        CalibrationError);
    }

    SUBCASE("complexity never decreases across random calibrations") {
        Rng rng(2024);
        for (int trial = 0; trial < 20; ++trial) {
            const double accuracy = rng.next_double();
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%.2f", accuracy);
            clients::MockScript script({{"*", buf, false, true}}, true);
            clients::ScriptedEvaluator evaluator(std::move(script));
            auto item = path_to_question(g, one_hop, generator);
            const int before = item.complexity;
            auto out = calibrate_difficulty(item, {&evaluator}, 3, regenerator);
            CHECK(out.complexity >= before);
            CHECK((out.status == QAStatus::CALIBRATED ||
                   out.status == QAStatus::EXHAUSTED));
        }
    }
}

TEST_CASE("mask_path replaces entities and preserves structure") {
    SUBCASE("single hop gives one masked triple") {
        ReasoningPath path;
        path.relations = {kg::Relation{"a", "treats", "b"}};
        auto scaffold = mask_path(path);
        REQUIRE(scaffold.steps.size() == 1);
        CHECK(scaffold.steps[0].predicate == "treats");
        auto j = scaffold_to_json(scaffold);
        CHECK(j[0]["subject"] == "[MASK]");
        CHECK(j[0]["object"] == "[MASK]");
    }

    SUBCASE("three hops keep the predicate order and contexts verbatim") {
        ReasoningPath path;
        kg::Relation r1{"a", "p1", "b"};
        r1.temporal = "2019";
        kg::Relation r2{"b", "p2", "c"};
        r2.spatial = "serum";
        kg::Relation r3{"c", "p3", "d"};
        r3.clinical_context = "stage ii";
        path.relations = {r1, r2, r3};
        auto scaffold = mask_path(path);
        REQUIRE(scaffold.steps.size() == 3);
        CHECK(scaffold.steps[0].predicate == "p1");
        CHECK(scaffold.steps[0].temporal == "2019");
        CHECK(scaffold.steps[1].spatial == "serum");
        CHECK(scaffold.steps[2].clinical_context == "stage ii");
    }

    SUBCASE("an entity literally named [MASK] still yields one mask per slot") {
        kg::KnowledgeGraph g;
        g.add_entity(kg::Entity{"[MASK]", "[MASK]", 0.0, false, {}});
        g.add_entity(kg::Entity{"b", "b", 0.0, false, {}});
        g.add_relation(kg::Relation{"[MASK]", "p", "b"});
        ReasoningPath path;
        path.relations = {g.relations()[0]};
        auto j = scaffold_to_json(mask_path(path));
        CHECK(j.size() == 1);
        CHECK(j[0]["subject"] == "[MASK]");
        CHECK(j[0]["object"] == "[MASK]");
    }

    SUBCASE("no entity surface string survives masking") {
        Rng rng(8);
        for (int trial = 0; trial < 100; ++trial) {
            ReasoningPath path;
            const std::size_t hops = 1 + rng.next_index(5);
            for (std::size_t i = 0; i < hops; ++i) {
                kg::Relation r;
                r.subject = "ent" + std::to_string(trial) + "x" + std::to_string(i);
                r.object = "ent" + std::to_string(trial) + "x" + std::to_string(i + 1);
                r.predicate = "rel" + std::to_string(rng.next_index(7));
                path.relations.push_back(std::move(r));
            }
            const std::string dumped = scaffold_to_json(mask_path(path)).dump();
            for (const auto& id : path.entity_sequence()) {
                CHECK(dumped.find(id) == std::string::npos);
            }
        }
    }
}

TEST_CASE("mix_dataset samples the exact guided share") {
    struct Tagged {
        bool guided;
        int index;
    };
    auto make_pool = [](bool guided, int n) {
        std::vector<Tagged> pool;
        for (int i = 0; i < n; ++i) {
            pool.push_back({guided, i});
        }
        return pool;
    };

    SUBCASE("alpha=0.7, n=10 gives 7 guided and 3 exploration") {
        Rng rng(1);
        auto mixed = mix_dataset(make_pool(true, 20), make_pool(false, 20),
                                 MixConfig{0.7}, 10, rng);
        const auto guided =
            std::count_if(mixed.begin(), mixed.end(), [](const Tagged& t) {
                return t.guided;
            });
        CHECK(mixed.size() == 10);
        CHECK(guided == 7);
    }

    SUBCASE("n=0 is empty; alpha=1 is all guided") {
        Rng rng(2);
        CHECK(mix_dataset(make_pool(true, 5), make_pool(false, 5), MixConfig{0.7}, 0,
                          rng)
                  .empty());
        auto all_guided = mix_dataset(make_pool(true, 5), make_pool(false, 5),
                                      MixConfig{1.0}, 5, rng);
        CHECK(std::all_of(all_guided.begin(), all_guided.end(),
                          [](const Tagged& t) { return t.guided; }));
    }

    SUBCASE("supply errors name the pool that ran short") {
        Rng rng(3);
        try {
            mix_dataset(make_pool(true, 2), make_pool(false, 20), MixConfig{0.7}, 10,
                        rng);
            FAIL("expected SupplyError");
        } catch (const SupplyError& e) {
            CHECK(e.pool == "guided");
        }
        try {
            mix_dataset(make_pool(true, 20), make_pool(false, 1), MixConfig{0.7}, 10,
                        rng);
            FAIL("expected SupplyError");
        } catch (const SupplyError& e) {
            CHECK(e.pool == "exploration");
        }
    }

    SUBCASE("guided fraction equals round(alpha*n)/n for every call") {
        Rng rng(4);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + rng.next_index(40);
            auto mixed = mix_dataset(make_pool(true, 40), make_pool(false, 40),
                                     MixConfig{0.7}, n, rng);
            const auto guided = static_cast<std::size_t>(
                std::count_if(mixed.begin(), mixed.end(),
                              [](const Tagged& t) { return t.guided; }));
            CHECK(guided == guided_share(0.7, n));
        }
    }

    SUBCASE("sampling is without replacement and seed-deterministic") {
        auto run = [&] {
            Rng rng(77);
            auto mixed = mix_dataset(make_pool(true, 30), make_pool(false, 30),
                                     MixConfig{0.7}, 20, rng);
            std::vector<int> order;
            std::set<std::pair<bool, int>> unique;
            for (const Tagged& t : mixed) {
                order.push_back(t.index + (t.guided ? 1000 : 0));
                unique.insert({t.guided, t.index});
            }
            CHECK(unique.size() == mixed.size());
            return order;
        };
        CHECK(run() == run());
    }
}

TEST_CASE("guided_share rounds half up") {
    CHECK(guided_share(0.7, 10) == 7);
    CHECK(guided_share(0.7, 5) == 4);   // 3.5 rounds up
    CHECK(guided_share(0.5, 3) == 2);   // 1.5 rounds up
    CHECK(guided_share(0.0, 9) == 0);
    CHECK(guided_share(1.0, 9) == 9);
}

TEST_CASE("qa records have a fixed field order") {
    ReasoningPath path;
    path.relations = {kg::Relation{"a", "treats", "b"}};
    QAItem item;
    item.question = "Q?";
    item.answer = "b";
    item.source_path = path;
    item.status = QAStatus::CALIBRATED;
    auto scaffold = mask_path(path);
    const std::string line = qa_record(item, &scaffold).dump();
    CHECK(line.rfind("{\"question\":\"Q?\",\"answer\":\"b\",\"hops\":1,\"complexity\":0,"
                     "\"status\":\"CALIBRATED\",\"path\":[",
                     0) == 0);
    // exploration variant carries an empty scaffold array
    const std::string bare = qa_record(item, nullptr).dump();
    CHECK(bare.find("\"masked_scaffold\":[]") != std::string::npos);
}
