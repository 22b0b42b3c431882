#include "guibee/policy.hpp"

#include <algorithm>
#include <map>

#include "guibee/errors.hpp"

namespace guibee {

std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::QICRL: return "qicrl";
        case PolicyKind::ICRL: return "icrl";
        case PolicyKind::Random: return "random";
    }
    return "?";
}

PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "qicrl") return PolicyKind::QICRL;
    if (s == "icrl") return PolicyKind::ICRL;
    if (s == "random") return PolicyKind::Random;
    throw Error("unknown policy: " + s);
}

void PolicyConfig::validate() const {
    if (candidates_per_step < 1) throw Error("policy: H must be >= 1");
    if (max_steps < 0) throw Error("policy: T must be >= 0");
    if (score_min >= score_max) throw Error("policy: bad score clamp");
}

std::vector<std::pair<Action, double>> identify_examples(const Action& candidate,
                                                         const std::vector<Action>& all_candidates,
                                                         const QTable& table,
                                                         const MatchConfig& matcher) {
    std::vector<std::pair<std::string, Raster>> pool;
    std::map<std::string, const Action*> by_key;
    for (const Action& a : all_candidates) {
        if (a.key == candidate.key) continue;
        if (!table.contains(a.key)) continue;  // Q == default means never executed
        pool.emplace_back(a.key, a.target.patch);
        by_key[a.key] = &a;
    }
    std::vector<std::pair<Action, double>> out;
    for (const RankedElement& r : most_similar_elements(candidate.target.patch, pool, matcher)) {
        out.emplace_back(*by_key.at(r.key), table.get_q(r.key));
        if (out.size() == 2) break;
    }
    return out;
}

namespace {

Rect candidate_box(const Action& a, const Screen& screen) {
    return a.target.full_page ? screen.screenshot.bounds() : a.target.box;
}

std::vector<std::size_t> uniform_sample_indices(std::size_t n, std::size_t take, Rng& rng) {
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    if (n <= take) return indices;
    std::vector<std::size_t> out;
    out.reserve(take);
    while (out.size() < take) {
        const std::size_t pick = rng.uniform_index(indices.size());
        out.push_back(indices[pick]);
        indices.erase(indices.begin() + static_cast<long>(pick));
    }
    return out;
}

}  // namespace

Action select_action_qicrl(const Screen& screen, const std::vector<Action>& candidates,
                           const QTable& table, Oracle& oracle, const ExplorationGraph& graph,
                           const PolicyConfig& cfg, const MatchConfig& matcher, Rng& rng) {
    if (candidates.empty()) throw Error("select_action_qicrl: no candidates");

    std::map<std::string, const Action*> by_key;
    std::vector<std::string> keys;
    keys.reserve(candidates.size());
    for (const Action& a : candidates) {
        keys.push_back(a.key);
        by_key[a.key] = &a;
    }
    const std::vector<std::string> sampled =
        weighted_sample(keys, table, cfg.candidates_per_step, rng);

    const std::vector<std::string> state_lines = graph.described_lines();
    const GraphMetadata meta = graph.metadata_copy();

    const Action* best = nullptr;
    double best_score = -1.0;
    for (const std::string& key : sampled) {
        const Action& a = *by_key.at(key);
        QhatQuery q;
        q.environment = meta.environment;
        q.screenshot = &screen.screenshot;
        q.candidate_box = candidate_box(a, screen);
        for (const auto& [eg, eg_q] : identify_examples(a, candidates, table, matcher))
            q.examples.push_back(QhatExample{candidate_box(eg, screen), eg_q});
        q.state_lines = state_lines;
        q.subject_key = a.key;
        q.subject_executed = table.contains(a.key);

        double score;
        try {
            score = oracle.predict_qhat(q);
        } catch (const CassetteMissError&) {
            throw;
        } catch (const OracleError&) {
            score = table.get_q(a.key);  // degrade to the memory-based estimate
        }
        score = std::clamp(score, cfg.score_min, cfg.score_max);
        if (score > best_score) {  // strict: ties keep sampled order
            best_score = score;
            best = &a;
        }
    }
    return *best;
}

Action select_action_icrl(const Screen& screen, const std::vector<Action>& candidates,
                          Oracle& oracle, const ExplorationGraph& graph, const PolicyConfig& cfg,
                          Rng& rng) {
    if (candidates.empty()) throw Error("select_action_icrl: no candidates");

    const std::vector<std::size_t> sampled =
        uniform_sample_indices(candidates.size(), cfg.candidates_per_step, rng);

    // one random executed action from the trace, rendered as text
    const std::vector<TraceEntry> trace = graph.trace_copy();
    std::optional<std::string> example;
    if (!trace.empty()) {
        const TraceEntry& pick = trace[rng.uniform_index(trace.size())];
        std::string text = "action " + pick.action_key + " led to " +
                           (pick.outcome == Outcome::SameScreen ? "the same screen"
                                                                : "screen " + pick.to_id);
        for (const Edge& e : graph.edges_copy())
            if (e.action.key == pick.action_key) {
                text = "clicked " + e.action.target.label() + ", arrived at screen " + e.to_id;
                break;
            }
        example = text;
    }

    const std::vector<std::string> state_lines = graph.described_lines();
    const GraphMetadata meta = graph.metadata_copy();

    const Action* best = nullptr;
    double best_score = -1.0;
    for (const std::size_t idx : sampled) {
        const Action& a = candidates[idx];
        QhatQuery q;
        q.environment = meta.environment;
        q.screenshot = &screen.screenshot;
        q.candidate_box = candidate_box(a, screen);
        q.plain_example = example;
        q.state_lines = state_lines;
        q.subject_key = a.key;

        double score;
        try {
            score = oracle.predict_qhat(q);
        } catch (const CassetteMissError&) {
            throw;
        } catch (const OracleError&) {
            score = 50.0;  // neutral: this policy has no Q memory to fall back on
        }
        score = std::clamp(score, cfg.score_min, cfg.score_max);
        if (score > best_score) {
            best_score = score;
            best = &a;
        }
    }
    return *best;
}

Action select_action_random(const std::vector<Action>& candidates, Rng& rng) {
    if (candidates.empty()) throw Error("select_action_random: no candidates");
    return candidates[rng.uniform_index(candidates.size())];
}

ExplorationGraph run_exploration(Environment& env, const PolicyConfig& cfg, Oracle& oracle,
                                 const MatchConfig& matcher, QTable& table, std::uint64_t seed,
                                 const StepObserver& observer) {
    cfg.validate();
    matcher.validate();

    GraphMetadata meta;
    meta.environment = env.name();
    meta.seed = seed;
    nlohmann::json jcfg;
    jcfg["policy"] = to_string(cfg.kind);
    jcfg["candidates_per_step"] = cfg.candidates_per_step;
    jcfg["max_steps"] = cfg.max_steps;
    jcfg["oracle_retries"] = cfg.oracle_retries;
    jcfg["oracle_backend"] = oracle.backend().name();
    jcfg["signature_depth"] = cfg.signature_depth;
    nlohmann::json jmatch;
    to_json(jmatch, matcher);
    jcfg["matcher"] = jmatch;
    meta.config = jcfg;

    ExplorationGraph graph(std::move(meta), cfg.signature_depth);
    Rng rng(seed);

    FrameProvider frames = [&env, &matcher]() {
        std::vector<Raster> extra;
        for (int i = 1; i < matcher.dynamic_frames; ++i) extra.push_back(env.observe().screenshot);
        return extra;
    };

    try {
        Screen current = env.reset();
        std::string current_id = graph.insert_initial(std::move(current), frames, matcher);
        Screen current_screen = graph.node_copy(current_id);
        std::optional<std::vector<Action>> pending_candidates;

        for (int t = 1; t <= cfg.max_steps; ++t) {
            std::vector<Action> env_candidates =
                pending_candidates ? std::move(*pending_candidates)
                                   : env.get_candidate_actions(current_screen);
            pending_candidates.reset();

            if (env_candidates.empty()) {
                // dead-end screen: back to the initial state, step consumed
                Screen back = env.reset();
                current_id = graph.find_matching_node(back, matcher).value_or(graph.node_ids().front());
                current_screen = std::move(back);
                continue;
            }

            std::vector<Action> candidates;
            candidates.reserve(env_candidates.size());
            for (const Action& a : env_candidates) candidates.push_back(a.rebound(current_id));

            Action chosen;
            switch (cfg.kind) {
                case PolicyKind::QICRL:
                    chosen = select_action_qicrl(current_screen, candidates, table, oracle, graph,
                                                 cfg, matcher, rng);
                    break;
                case PolicyKind::ICRL:
                    chosen = select_action_icrl(current_screen, candidates, oracle, graph, cfg, rng);
                    break;
                case PolicyKind::Random:
                    chosen = select_action_random(candidates, rng);
                    break;
            }

            Screen observed = env.execute(chosen);
            const TransitionResult result =
                graph.add_transition(current_id, chosen, observed, matcher, frames);

            std::vector<Action> next_env_candidates = env.get_candidate_actions(observed);
            std::vector<std::string> next_keys;
            next_keys.reserve(next_env_candidates.size());
            for (const Action& a : next_env_candidates)
                next_keys.push_back(a.rebound(result.to_id).key);

            const double q_next = table.q_next_mean(next_keys);
            const double q_before = table.get_q(chosen.key);
            const double q_after = table.update_q(chosen.key, result.outcome, q_next);
            if (observer)
                observer(StepRecord{t, chosen.key, result.outcome, q_next, q_before, q_after});

            if (result.edge_added) graph.to_state_descriptions(oracle);  // describe the new edge

            current_id = result.to_id;
            current_screen = std::move(observed);
            pending_candidates = std::move(next_env_candidates);
        }
    } catch (const EnvironmentError& e) {
        graph.set_aborted(e.what());
    }

    graph.set_q_snapshot(table);
    return graph;
}

}  // namespace guibee
