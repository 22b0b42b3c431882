#include "guibee/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "guibee/errors.hpp"

namespace guibee {

namespace {

void signature_into(const DomElement& e, int depth, int remaining, std::string& out) {
    out.push_back('{');
    std::vector<std::string> classes = e.classes;
    std::sort(classes.begin(), classes.end());
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (i) out.push_back(',');
        out += classes[i];
    }
    out.push_back('}');
    if (remaining > 1 && !e.children.empty()) {
        out.push_back('(');
        for (const auto& c : e.children) signature_into(c, depth, remaining - 1, out);
        out.push_back(')');
    }
}

}  // namespace

std::string dom_signature(const DomElement& root, int depth) {
    if (depth < 1) throw Error("dom_signature: depth must be >= 1");
    std::string out;
    signature_into(root, depth, depth, out);
    return out;
}

std::size_t d3c(const ExplorationGraph& graph, const D3CConfig& cfg) {
    std::set<std::string> sigs;
    for (const auto& id : graph.node_ids())
        sigs.insert(dom_signature(graph.node_copy(id).dom, cfg.depth));
    return sigs.size();
}

std::vector<std::pair<int, std::size_t>> d3c_curve(const ExplorationGraph& graph,
                                                   const D3CConfig& cfg) {
    const std::vector<std::string> ids = graph.node_ids();
    if (ids.empty()) return {};
    std::map<std::string, std::string> sig_by_node;
    for (const auto& id : ids) sig_by_node[id] = dom_signature(graph.node_copy(id).dom, cfg.depth);

    std::vector<std::pair<int, std::size_t>> curve;
    std::set<std::string> sigs{sig_by_node.at(ids.front())};
    curve.emplace_back(0, sigs.size());
    for (const TraceEntry& t : graph.trace_copy()) {
        if (t.outcome == Outcome::NewScreen) sigs.insert(sig_by_node.at(t.to_id));
        curve.emplace_back(t.step, sigs.size());
    }
    return curve;
}

double coverage_ratio(const ExplorationGraph& graph, const EnvironmentManifest& manifest) {
    const GraphMetadata meta = graph.metadata_copy();
    if (meta.environment != manifest.name)
        throw Error("coverage_ratio: graph explored '" + meta.environment +
                    "', manifest is '" + manifest.name + "'");
    const std::size_t truth = manifest.bfs_reachable_count();
    if (truth == 0) throw Error("coverage_ratio: manifest has no reachable screens");
    return static_cast<double>(graph.node_count()) / static_cast<double>(truth);
}

double grounding_accuracy(const std::vector<Point>& predictions,
                          const std::vector<GroundingRecord>& gold) {
    if (predictions.size() != gold.size())
        throw Error("grounding_accuracy: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(gold.size()) + " gold records");
    if (gold.empty()) throw Error("grounding_accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i)
        hits += gold[i].target_box.contains(predictions[i]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

// --- policy comparison ----------------------------------------------------------

namespace {

std::pair<double, double> mean_stddev(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return {mean, std::sqrt(var)};
}

std::size_t curve_value_at(const std::vector<std::pair<int, std::size_t>>& curve, int t) {
    std::size_t value = curve.empty() ? 0 : curve.front().second;
    for (const auto& [step, count] : curve) {
        if (step > t) break;
        value = count;
    }
    return value;
}

}  // namespace

CompareReport compare_policies(const EnvironmentManifest& manifest,
                               const std::vector<PolicyKind>& policies,
                               const std::vector<std::uint64_t>& seeds, int max_steps,
                               const CompareOptions& opt) {
    CompareReport report;
    report.environment = manifest.name;
    report.max_steps = max_steps;
    report.seeds = seeds;

    std::vector<int> checkpoints;
    for (int c : opt.checkpoints)
        if (c <= max_steps) checkpoints.push_back(c);
    if (checkpoints.empty() || checkpoints.back() != max_steps) checkpoints.push_back(max_steps);

    // final description list per policy (first completed seed) for the ranking
    std::vector<std::vector<TransitionDescription>> final_descs(policies.size());

    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
        PolicyStats stats;
        stats.policy = policies[pi];
        std::map<int, std::vector<double>> per_checkpoint;

        for (const std::uint64_t seed : seeds) {
            SimulatorEnvironment env(manifest);
            QTable table;
            auto mock = std::make_shared<MockBackend>(&table);
            Oracle oracle(mock, OracleConfig{opt.policy.oracle_retries});

            PolicyConfig cfg = opt.policy;
            cfg.kind = policies[pi];
            cfg.max_steps = max_steps;

            ExplorationGraph graph =
                run_exploration(env, cfg, oracle, opt.matcher, table, seed);
            if (graph.metadata_copy().aborted) {
                ++stats.aborted_runs;
                report.notices.push_back("aborted: " + to_string(policies[pi]) + " seed " +
                                         std::to_string(seed) + " on " + manifest.name +
                                         " (excluded from aggregation)");
                continue;
            }
            const auto curve = d3c_curve(graph, opt.d3c);
            for (int c : checkpoints)
                per_checkpoint[c].push_back(static_cast<double>(curve_value_at(curve, c)));
            stats.final_d3c.push_back(static_cast<double>(curve_value_at(curve, max_steps)));
            stats.final_coverage.push_back(coverage_ratio(graph, manifest));
            if (final_descs[pi].empty()) final_descs[pi] = graph.to_state_descriptions(oracle);
        }

        for (const auto& [t, values] : per_checkpoint) stats.d3c_at[t] = mean_stddev(values);
        report.policies.push_back(std::move(stats));
    }

    // pairwise relative coverage ranking on the final description lists
    auto rank_oracle_backend = std::make_shared<MockBackend>();
    Oracle rank_oracle(rank_oracle_backend);
    for (std::size_t i = 0; i < policies.size(); ++i)
        for (std::size_t j = i + 1; j < policies.size(); ++j) {
            if (final_descs[i].empty() && final_descs[j].empty()) continue;
            const CoverageVerdict v = rank_oracle.rank_coverage(final_descs[i], final_descs[j]);
            std::string line = to_string(policies[i]) + " vs " + to_string(policies[j]) +
                               ": broader coverage = " +
                               to_string(v.choice == CoverageChoice::A ? policies[i] : policies[j]);
            if (v.tie_warning) line += " (tie, defaulted)";
            report.ranking.push_back(std::move(line));
        }
    return report;
}

MultiCompareReport compare_policies_multi(const std::vector<EnvironmentManifest>& manifests,
                                          const std::vector<PolicyKind>& policies,
                                          const std::vector<std::uint64_t>& seeds, int max_steps,
                                          const CompareOptions& opt) {
    MultiCompareReport out;
    for (const auto& manifest : manifests)
        out.per_environment.push_back(compare_policies(manifest, policies, seeds, max_steps, opt));

    for (const PolicyKind policy : policies) {
        std::map<int, std::vector<double>> by_checkpoint;
        for (const auto& report : out.per_environment)
            for (const auto& stats : report.policies)
                if (stats.policy == policy)
                    for (const auto& [t, ms] : stats.d3c_at) by_checkpoint[t].push_back(ms.first);
        for (const auto& [t, means] : by_checkpoint) {
            double sum = 0;
            for (double m : means) sum += m;
            out.averaged_d3c[policy][t] = sum / static_cast<double>(means.size());
        }
    }
    return out;
}

std::string report_to_text(const MultiCompareReport& report) {
    std::string out;
    for (const auto& r : report.per_environment) {
        out += report_to_text(r);
        out += "\n";
    }
    if (report.per_environment.size() > 1) {
        out += "D3C means averaged across " + std::to_string(report.per_environment.size()) +
               " environments\n";
        char buf[64];
        for (const auto& [policy, by_t] : report.averaged_d3c) {
            std::snprintf(buf, sizeof buf, "%-10s", to_string(policy).c_str());
            out += buf;
            for (const auto& [t, mean] : by_t) {
                std::snprintf(buf, sizeof buf, "  t=%d: %.2f", t, mean);
                out += buf;
            }
            out += "\n";
        }
    }
    return out;
}

std::string report_to_text(const CompareReport& report) {
    std::string out;
    out += "environment: " + report.environment + "\n";
    out += "max steps:   " + std::to_string(report.max_steps) + "\n";
    out += "seeds:       ";
    for (std::size_t i = 0; i < report.seeds.size(); ++i)
        out += (i ? ", " : "") + std::to_string(report.seeds[i]);
    out += "\n\n";

    std::set<int> all_checkpoints;
    for (const auto& p : report.policies)
        for (const auto& [t, _] : p.d3c_at) all_checkpoints.insert(t);

    char buf[128];
    out += "D3C (mean +/- stddev across seeds)\n";
    std::snprintf(buf, sizeof buf, "%-10s", "policy");
    out += buf;
    for (int t : all_checkpoints) {
        std::snprintf(buf, sizeof buf, "  t=%-16d", t);
        out += buf;
    }
    out += "\n";
    for (const auto& p : report.policies) {
        std::snprintf(buf, sizeof buf, "%-10s", to_string(p.policy).c_str());
        out += buf;
        for (int t : all_checkpoints) {
            auto it = p.d3c_at.find(t);
            if (it == p.d3c_at.end()) {
                std::snprintf(buf, sizeof buf, "  %-18s", "-");
            } else {
                std::snprintf(buf, sizeof buf, "  %7.2f +/- %-6.2f", it->second.first,
                              it->second.second);
            }
            out += buf;
        }
        if (p.aborted_runs > 0)
            out += "  [" + std::to_string(p.aborted_runs) + " aborted run(s) excluded]";
        out += "\n";
    }

    out += "\ncoverage ratio at final step (mean across seeds)\n";
    for (const auto& p : report.policies) {
        const auto [mean, sd] = mean_stddev(p.final_coverage);
        std::snprintf(buf, sizeof buf, "%-10s  %.4f +/- %.4f\n", to_string(p.policy).c_str(), mean,
                      sd);
        out += buf;
    }

    if (!report.ranking.empty()) {
        out += "\nrelative exploration coverage ranking\n";
        for (const auto& line : report.ranking) out += "  " + line + "\n";
    }
    for (const auto& n : report.notices) out += "note: " + n + "\n";
    return out;
}

std::string report_to_plot_data(const CompareReport& report) {
    std::string out = "t\tpolicy\tmean\tstddev\n";
    char buf[128];
    for (const auto& p : report.policies)
        for (const auto& [t, ms] : p.d3c_at) {
            std::snprintf(buf, sizeof buf, "%d\t%s\t%.6f\t%.6f\n", t,
                          to_string(p.policy).c_str(), ms.first, ms.second);
            out += buf;
        }
    return out;
}

}  // namespace guibee
