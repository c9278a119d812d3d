#include <doctest.h>

#include <cmath>

#include "medsynth/dyadic.hpp"
#include "medsynth/reward.hpp"
#include "medsynth/rng.hpp"

using namespace medsynth;
using namespace medsynth::reward;

namespace {

agent::TrajectoryStep tool_step(std::string tool, std::string query,
                                std::string observation) {
    agent::TrajectoryStep s;
    s.tool = std::move(tool);
    s.category = agent::ToolCategory::GENERAL;
    s.params["query"] = std::move(query);
    s.observation = std::move(observation);
    return s;
}

}  // namespace

TEST_CASE("dyadic arithmetic is exact over the full double range") {
    CHECK(Dyadic::from_double(0.5).to_double() == 0.5);
    CHECK(Dyadic::from_double(-0.75).to_double() == -0.75);
    CHECK(Dyadic::from_double(0.1).to_double() == 0.1);

    // alignment across a huge exponent gap
    const Dyadic big = Dyadic::from_double(1e300);
    const Dyadic tiny = Dyadic::from_double(1e-300);
    const Dyadic sum = Dyadic::add(big, tiny);
    CHECK(Dyadic::sub(Dyadic::sub(sum, big), tiny).is_zero());

    CHECK(Dyadic::mul_u64(Dyadic::from_double(0.25), 8).to_double() == 2.0);
    CHECK(Dyadic::sub(Dyadic::from_double(1.5), Dyadic::from_double(1.5)).is_zero());
    CHECK_THROWS_AS(Dyadic::from_double(std::nan("")), ArgumentError);
}

TEST_CASE("efficiency_penalty sums rule hits") {
    agent::Trajectory t;
    t.question = "q";
    t.termination = agent::Termination::ANSWERED;
    t.final_answer = "valsartan";

    SUBCASE("clean trajectory costs nothing") {
        t.steps = {tool_step("a", "x", "nothing relevant"),
                   tool_step("b", "y", "niente")};
        agent::TrajectoryStep synth;
        t.steps.push_back(synth);
        CHECK(efficiency_penalty(t) == 0.0);
    }

    SUBCASE("an exact duplicate (tool, params) call costs one") {
        t.steps = {tool_step("a", "x", "o1"), tool_step("a", "x", "o2")};
        CHECK(efficiency_penalty(t) == 1.0);
        // different params are not duplicates
        t.steps = {tool_step("a", "x", "o1"), tool_step("a", "x2", "o2")};
        CHECK(efficiency_penalty(t) == 0.0);
    }

    SUBCASE("duplicate plus one post-answer call costs two") {
        t.steps = {tool_step("a", "x", "found valsartan here"),
                   tool_step("a", "x", "redundant")};
        // steps: the first observation already contains the answer, so the
        // second call is both a duplicate and post-answer
        CHECK(efficiency_penalty(t) == 2.0);
    }

    SUBCASE("configured-irrelevant tools cost one per use") {
        t.steps = {tool_step("calculator", "2+2", "4")};
        EfficiencyRules rules;
        rules.irrelevant_tools = {"calculator"};
        CHECK(efficiency_penalty(t, rules) == 1.0);
    }

    SUBCASE("a judge can add flagged items") {
        t.steps = {tool_step("a", "x", "o")};
        EfficiencyRules rules;
        rules.judge = [](const agent::Trajectory&) { return 3; };
        CHECK(efficiency_penalty(t, rules) == 3.0);
    }
}

TEST_CASE("composite_reward applies the weights exactly") {
    RewardWeights weights;  // 1.0 / 0.2 / 0.1

    CHECK(composite_reward(0.0, 0.0, 0.0, weights) == 0.0);
    CHECK(composite_reward(1.0, 1.0, 1.0, weights) ==
          doctest::Approx(1.1).epsilon(1e-12));
    CHECK(composite_reward(1.0, 0.0, 3.0, weights) ==
          doctest::Approx(0.7).epsilon(1e-12));

    SUBCASE("out-of-range components are contract errors") {
        CHECK_THROWS_AS(composite_reward(1.5, 0.0, 0.0, weights), ContractError);
        CHECK_THROWS_AS(composite_reward(0.0, -0.1, 0.0, weights), ContractError);
        CHECK_THROWS_AS(composite_reward(0.0, 0.0, -1.0, weights), ContractError);
    }

    SUBCASE("linear in each component; scaling all weights scales the output") {
        RewardWeights doubled{2.0, 0.4, 0.2};
        Rng rng(6);
        for (int i = 0; i < 50; ++i) {
            const double task = rng.next_double();
            const double expert = rng.next_double();
            const double eff = rng.next_double() * 3.0;
            CHECK(composite_reward(task, expert, eff, doubled) ==
                  doctest::Approx(2.0 * composite_reward(task, expert, eff, weights))
                      .epsilon(1e-12));
        }
    }

    SUBCASE("make_breakdown records the components") {
        auto b = make_breakdown(1.0, 0.5, 2.0, weights);
        CHECK(b.task == 1.0);
        CHECK(b.expert == 0.5);
        CHECK(b.efficiency == 2.0);
        CHECK(b.composite == doctest::Approx(1.0 + 0.1 - 0.2).epsilon(1e-12));
    }
}

TEST_CASE("group_advantages subtracts the group mean") {
    SUBCASE("simple mean subtraction") {
        auto a = group_advantages(std::vector<double>{1.0, 2.0, 3.0});
        CHECK(a == std::vector<double>{-1.0, 0.0, 1.0});
    }

    SUBCASE("all-equal groups give exact zeros") {
        auto a = group_advantages(std::vector<double>{0.1, 0.1, 0.1});
        for (double v : a) {
            CHECK(v == 0.0);
        }
    }

    SUBCASE("singleton groups are zero") {
        CHECK(group_advantages(std::vector<double>{5.0}) == std::vector<double>{0.0});
    }

    SUBCASE("empty groups are rejected") {
        CHECK_THROWS_AS(group_advantages(std::vector<double>{}), ArgumentError);
    }
}

TEST_CASE("exact advantages sum to exactly zero") {
    Rng rng(123);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.next_index(16);
        std::vector<double> rewards;
        for (std::size_t i = 0; i < n; ++i) {
            // adversarial span of magnitudes, including exact zeros
            double r = (rng.next_double() - 0.5) * 20.0;
            const auto kind = rng.next_index(4);
            if (kind == 1) r *= 1e12;
            if (kind == 2) r *= 1e-13;
            if (kind == 3 && rng.next_double() < 0.3) r = 0.0;
            rewards.push_back(r);
        }
        const auto exact = group_advantages_exact(rewards);
        Dyadic total;
        for (const auto& numerator : exact.numerators) {
            total = Dyadic::add(total, numerator);
        }
        CHECK(total.is_zero());

        // the rounded values agree with the plain double route
        const auto plain = group_advantages(rewards);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(exact.values[i] ==
                  doctest::Approx(plain[i]).epsilon(1e-12).scale(std::abs(plain[i]) + 1.0));
        }
    }
}

TEST_CASE("grpo_loss matches the hand evaluations") {
    SUBCASE("equal rewards: zero advantages, zero loss") {
        CHECK(grpo_loss(std::vector<double>{-3.0, -0.5},
                        std::vector<double>{0.7, 0.7}) == 0.0);
    }

    SUBCASE("logprobs [-1,-1], rewards [1,0]: loss 0") {
        CHECK(grpo_loss(std::vector<double>{-1.0, -1.0},
                        std::vector<double>{1.0, 0.0}) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("logprobs [-1,-2], rewards [1,0]: loss -0.25") {
        CHECK(grpo_loss(std::vector<double>{-1.0, -2.0},
                        std::vector<double>{1.0, 0.0}) ==
              doctest::Approx(-0.25).epsilon(1e-12));
    }

    SUBCASE("length mismatch and positive logprobs are contract errors") {
        CHECK_THROWS_AS(grpo_loss(std::vector<double>{-1.0},
                                  std::vector<double>{1.0, 0.0}),
                        ContractError);
        CHECK_THROWS_AS(grpo_loss(std::vector<double>{0.5},
                                  std::vector<double>{1.0}),
                        ContractError);
    }

    SUBCASE("shifting every reward by a constant leaves the loss unchanged") {
        Rng rng(9);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 2 + rng.next_index(8);
            std::vector<double> logprobs, rewards, shifted;
            const double shift = (rng.next_double() - 0.5) * 10.0;
            for (std::size_t i = 0; i < n; ++i) {
                logprobs.push_back(-rng.next_double() * 5.0);
                rewards.push_back(rng.next_double());
                shifted.push_back(rewards.back() + shift);
            }
            const double base = grpo_loss(logprobs, rewards);
            const double moved = grpo_loss(logprobs, shifted);
            CHECK(std::abs(base - moved) < 1e-12);
        }
    }
}

TEST_CASE("curriculum level is monotone and promotion clears the window") {
    CurriculumState state;
    state.window_size = 3;

    SUBCASE("a full window above the promote threshold raises the level") {
        state = curriculum_update(state, 0.8);
        state = curriculum_update(state, 0.8);
        CHECK(state.level == 0);  // window not full yet
        state = curriculum_update(state, 0.8);
        CHECK(state.level == 1);
        CHECK(state.window.empty());
    }

    SUBCASE("a middling window changes nothing") {
        for (int i = 0; i < 6; ++i) {
            state = curriculum_update(state, 0.5);
        }
        CHECK(state.level == 0);
        CHECK(state.demote_warnings == 0);
    }

    SUBCASE("two high windows promote twice") {
        for (int i = 0; i < 6; ++i) {
            state = curriculum_update(state, 0.9);
        }
        CHECK(state.level == 2);
    }

    SUBCASE("low windows warn but never demote") {
        state.level = 3;
        for (int i = 0; i < 6; ++i) {
            state = curriculum_update(state, 0.1);
        }
        CHECK(state.level == 3);
        CHECK(state.demote_warnings > 0);
    }

    SUBCASE("level never decreases over random rate streams") {
        Rng rng(10);
        std::size_t previous = 0;
        for (int i = 0; i < 200; ++i) {
            state = curriculum_update(state, rng.next_double());
            CHECK(state.level >= previous);
            previous = state.level;
        }
    }

    SUBCASE("out-of-range rates are rejected") {
        CHECK_THROWS_AS(curriculum_update(state, 1.5), ArgumentError);
    }
}
