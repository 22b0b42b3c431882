#pragma once

#include <functional>
#include <string>
#include <vector>

#include "guibee/environment.hpp"
#include "guibee/graph.hpp"
#include "guibee/oracle.hpp"
#include "guibee/q_store.hpp"
#include "guibee/rng.hpp"

namespace guibee {

enum class PolicyKind { QICRL, ICRL, Random };

std::string to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);

struct PolicyConfig {
    PolicyKind kind = PolicyKind::QICRL;
    std::size_t candidates_per_step = 3;  // H
    int max_steps = 400;                  // T
    double score_min = 0.0;
    double score_max = 100.0;
    int oracle_retries = 2;
    int signature_depth = 3;

    void validate() const;
};

// Up to two previously executed candidates from the same screen whose elements
// look most like the subject's, with their Q-values; the subject itself is
// excluded. An empty result means the prompt omits example content.
std::vector<std::pair<Action, double>> identify_examples(const Action& candidate,
                                                         const std::vector<Action>& all_candidates,
                                                         const QTable& table,
                                                         const MatchConfig& matcher);

// One Q-ICRL selection step: weighted-sample H candidates, score each with the
// oracle (examples and Q values in context), return the top score. Oracle
// failures fall back to the stored Q value; ties keep sampled order.
Action select_action_qicrl(const Screen& screen, const std::vector<Action>& candidates,
                           const QTable& table, Oracle& oracle, const ExplorationGraph& graph,
                           const PolicyConfig& cfg, const MatchConfig& matcher, Rng& rng);

// Ablation: uniform H-sample, one random executed action from the trace as a
// text example, no Q values anywhere.
Action select_action_icrl(const Screen& screen, const std::vector<Action>& candidates,
                          Oracle& oracle, const ExplorationGraph& graph, const PolicyConfig& cfg,
                          Rng& rng);

Action select_action_random(const std::vector<Action>& candidates, Rng& rng);

// Per-step instrumentation record; the observer sees exactly one record per
// executed step, pairing the transition outcome with its Q update.
struct StepRecord {
    int step = 0;
    std::string action_key;
    Outcome outcome = Outcome::SameScreen;
    double q_next = 0.0;
    double q_before = 0.0;
    double q_after = 0.0;
};
using StepObserver = std::function<void(const StepRecord&)>;

// Runs up to cfg.max_steps exploration steps against the environment and
// returns the finished graph (trace, descriptions, Q snapshot included).
// Screens with no candidates reset the environment and consume the step. A
// fatal environment error stops the run and flags the graph as aborted.
ExplorationGraph run_exploration(Environment& env, const PolicyConfig& cfg, Oracle& oracle,
                                 const MatchConfig& matcher, QTable& table, std::uint64_t seed,
                                 const StepObserver& observer = nullptr);

}  // namespace guibee
