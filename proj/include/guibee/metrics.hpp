#pragma once

#include <map>
#include <string>
#include <vector>

#include "guibee/annotate.hpp"
#include "guibee/environment.hpp"
#include "guibee/graph.hpp"
#include "guibee/policy.hpp"

namespace guibee {

struct D3CConfig {
    int depth = 3;  // tree levels retained, root = level 1
};

// Canonical text of the DOM truncated to `depth` levels, keeping only sorted
// class lists. Equal trees always produce equal signatures.
std::string dom_signature(const DomElement& root, int depth);

// Number of distinct page structures among the graph's nodes.
std::size_t d3c(const ExplorationGraph& graph, const D3CConfig& cfg = {});

// Distinct-structure count after each trace step; point (0, 1) is the initial
// screen. Non-decreasing by construction.
std::vector<std::pair<int, std::size_t>> d3c_curve(const ExplorationGraph& graph,
                                                   const D3CConfig& cfg = {});

// Graph nodes over the manifest's BFS-reachable screen count.
double coverage_ratio(const ExplorationGraph& graph, const EnvironmentManifest& manifest);

// Fraction of predicted points inside their paired half-open target boxes.
double grounding_accuracy(const std::vector<Point>& predictions,
                          const std::vector<GroundingRecord>& gold);

// --- policy comparison --------------------------------------------------------

struct CompareOptions {
    std::vector<int> checkpoints = {50, 100, 200, 400};
    PolicyConfig policy;    // kind overridden per cell
    MatchConfig matcher;
    D3CConfig d3c;
};

struct PolicyStats {
    PolicyKind policy = PolicyKind::Random;
    // checkpoint t -> (mean, stddev) of D3C across seeds
    std::map<int, std::pair<double, double>> d3c_at;
    std::vector<double> final_d3c;          // per completed seed
    std::vector<double> final_coverage;     // per completed seed
    int aborted_runs = 0;
};

struct CompareReport {
    std::string environment;
    int max_steps = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<PolicyStats> policies;
    std::vector<std::string> ranking;  // pairwise coverage verdict lines
    std::vector<std::string> notices;  // aborted cells etc.
};

// Runs every (policy, seed) cell on a fresh simulator with a mock oracle bound
// to the cell's Q table, aggregates the D3C curves at the checkpoints, and
// ranks final description lists pairwise.
CompareReport compare_policies(const EnvironmentManifest& manifest,
                               const std::vector<PolicyKind>& policies,
                               const std::vector<std::uint64_t>& seeds, int max_steps,
                               const CompareOptions& opt = {});

// Per-environment reports plus per-policy D3C means averaged across the
// environments (curves are aggregated per environment first).
struct MultiCompareReport {
    std::vector<CompareReport> per_environment;
    // policy -> checkpoint -> mean of per-environment means
    std::map<PolicyKind, std::map<int, double>> averaged_d3c;
};

MultiCompareReport compare_policies_multi(const std::vector<EnvironmentManifest>& manifests,
                                          const std::vector<PolicyKind>& policies,
                                          const std::vector<std::uint64_t>& seeds, int max_steps,
                                          const CompareOptions& opt = {});

std::string report_to_text(const CompareReport& report);
std::string report_to_text(const MultiCompareReport& report);
// Tab-separated plot data: t, policy, mean, stddev.
std::string report_to_plot_data(const CompareReport& report);

}  // namespace guibee
