#include <doctest.h>

#include <cmath>
#include <sstream>

#include "medsynth/medtools.hpp"
#include "medsynth/rng.hpp"

using namespace medsynth;
using namespace medsynth::medtools;

namespace {

Document make_doc(std::string id, double impact, GuidelineStatus status,
                  std::vector<double> embedding) {
    Document d;
    d.id = std::move(id);
    d.impact_factor = impact;
    d.guideline_status = status;
    d.embedding = std::move(embedding);
    return d;
}

// Brute-force posterior: direct products in extended precision, no log-space.
std::map<std::string, double> posterior_oracle(
    const std::vector<std::string>& symptoms, const EvidenceTable& table) {
    std::map<std::string, double> out;
    long double total = 0.0L;
    for (const auto& [diagnosis, prior] : table.priors) {
        long double mass = prior;
        for (const auto& symptom : symptoms) {
            mass *= table.likelihood(symptom, diagnosis);
        }
        out[diagnosis] = static_cast<double>(mass);
        total += mass;
    }
    for (auto& [_, p] : out) {
        p = static_cast<double>(p / static_cast<double>(total));
    }
    return out;
}

EvidenceTable random_table(Rng& rng, std::size_t diagnoses, std::size_t symptoms) {
    EvidenceTable table;
    table.context = "test";
    double remaining = 1.0;
    for (std::size_t d = 0; d < diagnoses; ++d) {
        const std::string name = "d" + std::to_string(d);
        double p = d + 1 == diagnoses ? remaining : remaining * rng.next_double();
        table.priors[name] = p;
        remaining -= p;
    }
    for (std::size_t s = 0; s < symptoms; ++s) {
        for (std::size_t d = 0; d < diagnoses; ++d) {
            table.likelihoods[{"s" + std::to_string(s), "d" + std::to_string(d)}] =
                0.05 + 0.9 * rng.next_double();
        }
    }
    return table;
}

}  // namespace

TEST_CASE("authority_score blends capped impact and guideline grade") {
    RankerConfig config;  // cap 50, weights 0.5/0.5

    CHECK(authority_score(make_doc("a", 0.0, GuidelineStatus::NONE, {}), config) == 0.0);
    CHECK(authority_score(make_doc("b", 80.0, GuidelineStatus::GUIDELINE, {}), config) ==
          1.0);
    // impact 25 with cap 50, CITED: 0.5*0.5 + 0.5*0.5 = 0.5
    CHECK(authority_score(make_doc("c", 25.0, GuidelineStatus::CITED, {}), config) ==
          doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("score_document is the lambda blend of relevance and authority") {
    RankerConfig config;  // lambda 0.4
    const std::vector<double> query{1.0, 0.0};

    // Rel=1 (cosine 1), Auth=0
    auto rel_only = make_doc("r", 0.0, GuidelineStatus::NONE, {1.0, 0.0});
    CHECK(score_document(rel_only, query, config) == doctest::Approx(0.4).epsilon(1e-12));

    // Rel=0 (cosine -1), Auth=1
    auto auth_only = make_doc("a", 100.0, GuidelineStatus::GUIDELINE, {-1.0, 0.0});
    CHECK(score_document(auth_only, query, config) == doctest::Approx(0.6).epsilon(1e-12));

    // Rel=0.5 (cosine 0), Auth=0.8: 0.4*0.5 + 0.6*0.8 = 0.68
    auto mixed = make_doc("m", 30.0, GuidelineStatus::GUIDELINE, {0.0, 1.0});
    CHECK(score_document(mixed, query, config) == doctest::Approx(0.68).epsilon(1e-12));

    SUBCASE("missing embedding is a scoring error") {
        Document bare;
        bare.id = "bare";
        CHECK_THROWS_AS(score_document(bare, query, config), ScoringError);
    }

    SUBCASE("arity mismatch is a scoring error") {
        auto bad = make_doc("bad", 0.0, GuidelineStatus::NONE, {1.0, 0.0, 0.0});
        CHECK_THROWS_AS(score_document(bad, query, config), ScoringError);
    }

    SUBCASE("lambda endpoints reduce to pure relevance / pure authority") {
        RankerConfig pure_rel{1.0, 50.0, 0.5, 0.5};
        RankerConfig pure_auth{0.0, 50.0, 0.5, 0.5};
        CHECK(score_document(mixed, query, pure_rel) ==
              doctest::Approx(relevance_score(mixed, query)));
        CHECK(score_document(mixed, query, pure_auth) ==
              doctest::Approx(authority_score(mixed, pure_auth)));
    }
}

TEST_CASE("score is monotone in relevance and authority") {
    RankerConfig config;
    Rng rng(31);
    const std::vector<double> query{1.0, 0.0};
    for (int i = 0; i < 100; ++i) {
        const double angle = rng.next_double() * 3.14159;
        auto doc = make_doc("d", rng.next_double() * 60.0,
                            GuidelineStatus::CITED,
                            {std::cos(angle), std::sin(angle)});
        const double base = score_document(doc, query, config);
        auto better_auth = doc;
        better_auth.guideline_status = GuidelineStatus::GUIDELINE;
        CHECK(score_document(better_auth, query, config) >= base);
        auto better_rel = doc;
        better_rel.embedding = std::vector<double>{1.0, 0.0};
        CHECK(score_document(better_rel, query, config) >= base);
    }
}

TEST_CASE("rank_documents orders by score then id") {
    RankerConfig config;
    const std::vector<double> query{1.0, 0.0};

    SUBCASE("guideline doc wins an authority tie-break on equal relevance") {
        std::vector<Document> docs{
            make_doc("plain", 0.0, GuidelineStatus::NONE, {0.0, 1.0}),
            make_doc("guide", 0.0, GuidelineStatus::GUIDELINE, {0.0, 1.0}),
        };
        auto ranked = rank_documents(docs, query, config, 2);
        CHECK(ranked[0].first == "guide");
    }

    SUBCASE("k larger than the corpus returns the full ranking") {
        std::vector<Document> docs{
            make_doc("a", 0.0, GuidelineStatus::NONE, {1.0, 0.0}),
            make_doc("b", 0.0, GuidelineStatus::NONE, {0.0, 1.0}),
        };
        CHECK(rank_documents(docs, query, config, 10).size() == 2);
        CHECK(rank_documents({}, query, config, 3).empty());
    }

    SUBCASE("hand-computed three-document fixture: 0.68 > 0.60 > 0.40") {
        std::vector<Document> docs{
            make_doc("doc-rel", 0.0, GuidelineStatus::NONE, {1.0, 0.0}),
            make_doc("doc-mid", 30.0, GuidelineStatus::GUIDELINE, {0.0, 1.0}),
            make_doc("doc-auth", 60.0, GuidelineStatus::GUIDELINE, {-1.0, 0.0}),
        };
        auto ranked = rank_documents(docs, query, config, 3);
        REQUIRE(ranked.size() == 3);
        CHECK(ranked[0].first == "doc-mid");
        CHECK(ranked[0].second == doctest::Approx(0.68).epsilon(1e-12));
        CHECK(ranked[1].first == "doc-auth");
        CHECK(ranked[1].second == doctest::Approx(0.60).epsilon(1e-12));
        CHECK(ranked[2].first == "doc-rel");
        CHECK(ranked[2].second == doctest::Approx(0.40).epsilon(1e-12));
    }

    SUBCASE("equal scores break ties by id ascending") {
        std::vector<Document> docs{
            make_doc("zz", 0.0, GuidelineStatus::NONE, {1.0, 0.0}),
            make_doc("aa", 0.0, GuidelineStatus::NONE, {1.0, 0.0}),
        };
        auto ranked = rank_documents(docs, query, config, 2);
        CHECK(ranked[0].first == "aa");
    }

    SUBCASE("strictly increasing transforms preserve the order") {
        Rng rng(17);
        std::vector<Document> docs;
        for (int i = 0; i < 8; ++i) {
            const double angle = rng.next_double() * 3.14159;
            docs.push_back(make_doc("d" + std::to_string(i),
                                    rng.next_double() * 60.0,
                                    i % 2 ? GuidelineStatus::CITED : GuidelineStatus::NONE,
                                    {std::cos(angle), std::sin(angle)}));
        }
        auto ranked = rank_documents(docs, query, config, docs.size());
        std::vector<std::pair<std::string, double>> transformed;
        for (auto [id, score] : ranked) {
            transformed.emplace_back(id, 3.0 * score + 1.0);
        }
        for (std::size_t i = 0; i + 1 < transformed.size(); ++i) {
            CHECK(transformed[i].second >= transformed[i + 1].second);
        }
    }
}

TEST_CASE("diagnosis_posterior implements the product rule") {
    EvidenceTable table;
    table.priors = {{"d1", 0.5}, {"d2", 0.5}};

    SUBCASE("symmetry: identical likelihoods give a uniform posterior") {
        table.likelihoods = {{{"s1", "d1"}, 0.6}, {{"s1", "d2"}, 0.6}};
        auto posterior = diagnosis_posterior({"s1"}, table);
        CHECK(posterior.at("d1") == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(posterior.at("d2") == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("zero likelihood annihilates a diagnosis exactly") {
        table.likelihoods = {{{"s1", "d1"}, 0.0}, {{"s1", "d2"}, 0.4}};
        auto posterior = diagnosis_posterior({"s1"}, table);
        CHECK(posterior.at("d1") == 0.0);
        CHECK(posterior.at("d2") == 1.0);
    }

    SUBCASE("hand evaluation: likelihoods 0.8/0.2 with equal priors") {
        table.likelihoods = {{{"s1", "d1"}, 0.8}, {{"s1", "d2"}, 0.2}};
        auto posterior = diagnosis_posterior({"s1"}, table);
        CHECK(posterior.at("d1") == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(posterior.at("d2") == doctest::Approx(0.2).epsilon(1e-12));
    }

    SUBCASE("missing pair is an error, not a silent default") {
        table.likelihoods = {{{"s1", "d1"}, 0.8}};
        CHECK_THROWS_AS(diagnosis_posterior({"s1"}, table), EvidenceError);
    }

    SUBCASE("all-zero joint mass is a degenerate-evidence error") {
        table.likelihoods = {{{"s1", "d1"}, 0.0}, {{"s1", "d2"}, 0.0}};
        CHECK_THROWS_AS(diagnosis_posterior({"s1"}, table), EvidenceError);
    }

    SUBCASE("opt-in likelihood floor rescues zero-heavy tables") {
        table.likelihoods = {{{"s1", "d1"}, 0.0}, {{"s1", "d2"}, 0.0}};
        InferenceOptions options;
        options.floor_enabled = true;
        auto posterior = diagnosis_posterior({"s1"}, table, options);
        CHECK(posterior.at("d1") == doctest::Approx(0.5));
    }
}

TEST_CASE("posterior matches the joint-enumeration oracle") {
    Rng rng(424242);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t diagnoses = 2 + rng.next_index(3);  // up to 4
        const std::size_t symptom_count = 1 + rng.next_index(5);
        EvidenceTable table = random_table(rng, diagnoses, symptom_count);
        std::vector<std::string> observed;
        for (std::size_t s = 0; s < symptom_count; ++s) {
            if (rng.next_double() < 0.7) {
                observed.push_back("s" + std::to_string(s));
            }
        }
        const auto fast = diagnosis_posterior(observed, table);
        const auto oracle = posterior_oracle(observed, table);
        double sum = 0.0;
        for (const auto& [diagnosis, p] : fast) {
            CHECK(p == doctest::Approx(oracle.at(diagnosis)).epsilon(1e-12));
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("update_posterior chains to the batch posterior") {
    Rng rng(99);
    EvidenceTable table = random_table(rng, 3, 4);

    SUBCASE("empty update is the identity") {
        auto p0 = diagnosis_posterior({"s0"}, table);
        CHECK(update_posterior(p0, {}, table) == p0);
    }

    SUBCASE("sequential equals batch to 1e-12") {
        for (int trial = 0; trial < 30; ++trial) {
            EvidenceTable t = random_table(rng, 3, 4);
            auto p1 = diagnosis_posterior({"s0"}, t);
            auto p2 = update_posterior(p1, {"s1", "s2"}, t);
            auto batch = diagnosis_posterior({"s0", "s1", "s2"}, t);
            for (const auto& [diagnosis, p] : p2) {
                CHECK(p == doctest::Approx(batch.at(diagnosis)).epsilon(1e-12));
            }
        }
    }

    SUBCASE("a zeroed diagnosis stays zero") {
        EvidenceTable t;
        t.priors = {{"d1", 0.5}, {"d2", 0.5}};
        t.likelihoods = {{{"s1", "d1"}, 0.0}, {{"s1", "d2"}, 0.5},
                         {{"s2", "d1"}, 0.9}, {{"s2", "d2"}, 0.5}};
        auto p1 = diagnosis_posterior({"s1"}, t);
        CHECK(p1.at("d1") == 0.0);
        auto p2 = update_posterior(p1, {"s2"}, t);
        CHECK(p2.at("d1") == 0.0);
    }

    SUBCASE("unnormalized current is rejected") {
        std::map<std::string, double> bogus{{"d1", 0.7}, {"d2", 0.7}};
        CHECK_THROWS_AS(update_posterior(bogus, {"s1"}, table), ArgumentError);
    }
}

TEST_CASE("evidence table json round-trip and validation") {
    const std::string payload = R"({
        "context": "adult renal",
        "priors": {"d1": 0.6, "d2": 0.4},
        "likelihoods": {"s1|d1": 0.7, "s1|d2": 0.2}
    })";
    std::istringstream in(payload);
    auto table = load_evidence_json(in);
    CHECK(table.context == "adult renal");
    CHECK(table.likelihood("s1", "d2") == doctest::Approx(0.2));

    std::ostringstream out;
    save_evidence_json(table, out);
    std::istringstream in2(out.str());
    auto reloaded = load_evidence_json(in2);
    CHECK(reloaded.priors == table.priors);
    CHECK(reloaded.likelihoods == table.likelihoods);

    SUBCASE("priors must sum to one") {
        std::istringstream bad(R"({"context":"","priors":{"d1":0.6,"d2":0.6},
                                   "likelihoods":{}})");
        CHECK_THROWS_AS(load_evidence_json(bad), EvidenceError);
    }
}
