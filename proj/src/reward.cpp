#include "medsynth/reward.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace medsynth::reward {

double composite_reward(double task, double expert, double efficiency,
                        const RewardWeights& weights) {
    if (task < 0.0 || task > 1.0 || !std::isfinite(task)) {
        throw ContractError("task reward must be in [0,1]");
    }
    if (expert < 0.0 || expert > 1.0 || !std::isfinite(expert)) {
        throw ContractError("expert reward must be in [0,1]");
    }
    if (efficiency < 0.0 || !std::isfinite(efficiency)) {
        throw ContractError("efficiency penalty must be >= 0");
    }
    return weights.alpha * task + weights.beta * expert - weights.gamma * efficiency;
}

RewardBreakdown make_breakdown(double task, double expert, double efficiency,
                               const RewardWeights& weights) {
    RewardBreakdown b;
    b.task = task;
    b.expert = expert;
    b.efficiency = efficiency;
    b.composite = composite_reward(task, expert, efficiency, weights);
    return b;
}

double efficiency_penalty(const agent::Trajectory& trajectory,
                          const EfficiencyRules& rules) {
    long hits = 0;

    // Exact duplicate (tool, parameters) invocations.
    std::map<std::pair<std::string, agent::ToolParams>, int> seen;
    for (const agent::TrajectoryStep& s : trajectory.steps) {
        if (s.tool.empty()) {
            continue;
        }
        if (++seen[{s.tool, s.params}] > 1) {
            ++hits;
        }
    }

    // Tool calls after the step whose observation already carried the answer.
    if (trajectory.final_answer && !trajectory.final_answer->empty()) {
        std::size_t answer_step = trajectory.steps.size();
        for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
            if (trajectory.steps[i].observation.find(*trajectory.final_answer) !=
                std::string::npos) {
                answer_step = i;
                break;
            }
        }
        for (std::size_t i = answer_step + 1; i < trajectory.steps.size(); ++i) {
            if (!trajectory.steps[i].tool.empty()) {
                ++hits;
            }
        }
    }

    for (const agent::TrajectoryStep& s : trajectory.steps) {
        if (!s.tool.empty() && rules.irrelevant_tools.count(s.tool)) {
            ++hits;
        }
    }

    if (rules.judge) {
        hits += rules.judge(trajectory);
    }
    return static_cast<double>(hits);
}

std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.empty()) {
        throw ArgumentError("group_advantages: group must be nonempty");
    }
    const bool all_equal =
        std::all_of(rewards.begin(), rewards.end(),
                    [&](double r) { return r == rewards.front(); });
    if (all_equal) {
        return std::vector<double>(rewards.size(), 0.0);
    }
    double sum = 0.0;
    for (double r : rewards) {
        sum += r;
    }
    const double mean = sum / static_cast<double>(rewards.size());
    std::vector<double> advantages;
    advantages.reserve(rewards.size());
    for (double r : rewards) {
        advantages.push_back(r - mean);
    }
    return advantages;
}

ExactAdvantages group_advantages_exact(std::span<const double> rewards) {
    if (rewards.empty()) {
        throw ArgumentError("group_advantages_exact: group must be nonempty");
    }
    const std::uint64_t n = rewards.size();
    Dyadic sum;
    std::vector<Dyadic> exact;
    exact.reserve(rewards.size());
    for (double r : rewards) {
        exact.push_back(Dyadic::from_double(r));
        sum = Dyadic::add(sum, exact.back());
    }
    ExactAdvantages out;
    out.denominator = n;
    out.numerators.reserve(rewards.size());
    out.values.reserve(rewards.size());
    for (const Dyadic& r : exact) {
        Dyadic numerator = Dyadic::sub(Dyadic::mul_u64(r, n), sum);
        out.values.push_back(numerator.to_double() / static_cast<double>(n));
        out.numerators.push_back(std::move(numerator));
    }
    return out;
}

double grpo_loss(std::span<const double> logprobs, std::span<const double> rewards) {
    if (logprobs.size() != rewards.size()) {
        throw ContractError("grpo_loss: logprobs and rewards must have equal length");
    }
    if (logprobs.empty()) {
        throw ArgumentError("grpo_loss: group must be nonempty");
    }
    for (double lp : logprobs) {
        if (lp > 0.0 || !std::isfinite(lp)) {
            throw ContractError("log-probabilities must be finite and <= 0");
        }
    }
    const std::vector<double> advantages = group_advantages(rewards);
    double total = 0.0;
    for (std::size_t i = 0; i < logprobs.size(); ++i) {
        total += logprobs[i] * advantages[i];
    }
    return -total / static_cast<double>(logprobs.size());
}

CurriculumState curriculum_update(CurriculumState state, double batch_pass_rate) {
    if (batch_pass_rate < 0.0 || batch_pass_rate > 1.0) {
        throw ArgumentError("pass rate must be in [0,1]");
    }
    if (state.window_size < 1) {
        throw ArgumentError("curriculum window_size must be >= 1");
    }
    state.window.push_back(batch_pass_rate);
    if (state.window.size() < state.window_size) {
        return state;
    }
    const double mean =
        std::accumulate(state.window.begin(), state.window.end(), 0.0) /
        static_cast<double>(state.window.size());
    if (mean > state.promote_threshold) {
        state.level += 1;
        state.window.clear();
    } else {
        if (mean < state.demote_threshold) {
            state.demote_warnings += 1;
        }
        state.window.erase(state.window.begin());  // slide
    }
    return state;
}

}  // namespace medsynth::reward
