#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "medsynth/agent.hpp"
#include "medsynth/dyadic.hpp"
#include "medsynth/errors.hpp"

namespace medsynth::reward {

struct RewardWeights {
    double alpha = 1.0;  // task
    double beta = 0.2;   // expert
    double gamma = 0.1;  // efficiency
};

struct RewardBreakdown {
    double task = 0.0;        // in [0,1]
    double expert = 0.0;      // in [0,1]
    double efficiency = 0.0;  // penalty, >= 0
    double composite = 0.0;   // alpha*task + beta*expert - gamma*efficiency
};

// alpha*task + beta*expert - gamma*efficiency. ContractError on out-of-range
// components.
double composite_reward(double task, double expert, double efficiency,
                        const RewardWeights& weights);

RewardBreakdown make_breakdown(double task, double expert, double efficiency,
                               const RewardWeights& weights);

struct EfficiencyRules {
    // Tools considered irrelevant for the task; each use costs one unit.
    std::set<std::string> irrelevant_tools;
    // Optional judge: number of additionally flagged usages, one unit each.
    std::function<int(const agent::Trajectory&)> judge;
};

// Unit penalties: +1 per exact duplicate (tool, params) call, +1 per tool
// call after the step whose observation already contains the final answer,
// +1 per use of a configured-irrelevant tool, plus judge-flagged items.
// Integer rule hits, unclipped.
double efficiency_penalty(const agent::Trajectory& trajectory,
                          const EfficiencyRules& rules = {});

// r_i - mean(r). All-equal groups short-circuit to exact zeros. ArgumentError
// on an empty group.
std::vector<double> group_advantages(std::span<const double> rewards);

// Advantages as exact dyadic fractions: numerators[i] / denominator with
// numerators[i] = n*r_i - sum(r). Their sum is exactly zero in this
// representation, with no floating-point rounding anywhere.
struct ExactAdvantages {
    std::vector<Dyadic> numerators;
    std::uint64_t denominator = 1;  // the group size
    std::vector<double> values;     // numerators[i]/denominator, rounded once
};

ExactAdvantages group_advantages_exact(std::span<const double> rewards);

// -mean(logprob_i * advantage_i): the negation turns the optimized
// expectation into a minimization loss for an external trainer. There is no
// KL term anywhere in this path.
double grpo_loss(std::span<const double> logprobs, std::span<const double> rewards);

struct CurriculumState {
    std::size_t level = 0;
    std::vector<double> window;  // bounded pass-rate history
    std::size_t window_size = 5;
    double promote_threshold = 0.7;
    double demote_threshold = 0.3;
    std::size_t demote_warnings = 0;  // level never decreases; low windows warn
};

// Appends the batch pass rate. Once the window is full: mean above the
// promote threshold raises the level and clears the window; mean below the
// demote threshold only logs a warning (complexity increases progressively,
// never decreases); otherwise the window slides by one.
CurriculumState curriculum_update(CurriculumState state, double batch_pass_rate);

}  // namespace medsynth::reward
