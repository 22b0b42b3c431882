#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "guibee/fuzzy_match.hpp"
#include "guibee/oracle.hpp"
#include "guibee/q_store.hpp"
#include "guibee/screen.hpp"

namespace guibee {

struct Edge {
    std::string from_id;
    Action action;
    std::string to_id;
};

struct TraceEntry {
    int step = 0;  // 1-based exploration step
    std::string action_key;
    Outcome outcome = Outcome::SameScreen;
    std::string from_id;
    std::string to_id;
};

struct GraphMetadata {
    std::string environment;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();  // resolved run config snapshot
    bool aborted = false;
    std::string abort_reason;
};

struct TransitionResult {
    std::string to_id;
    Outcome outcome = Outcome::SameScreen;
    bool edge_added = false;
};

// Supplies extra renders of the screen just observed, used to detect animated
// regions when a new node is created. May return an empty vector.
using FrameProvider = std::function<std::vector<Raster>()>;

// The exploration graph G: unique screens as nodes, actions as edges, plus the
// step trace, the cached transition descriptions D^t and a Q-table snapshot.
//
// Mutation is single-writer (the exploration loop); reads lock shared.
class ExplorationGraph {
public:
    explicit ExplorationGraph(GraphMetadata meta = {}, int signature_depth = 3);

    ExplorationGraph(ExplorationGraph&& other) noexcept;
    ExplorationGraph& operator=(ExplorationGraph&& other) noexcept;
    ExplorationGraph(const ExplorationGraph&) = delete;
    ExplorationGraph& operator=(const ExplorationGraph&) = delete;

    // --- reads ---
    std::size_t node_count() const;
    std::size_t edge_count() const;
    bool has_node(const std::string& id) const;
    Screen node_copy(const std::string& id) const;
    std::vector<std::string> node_ids() const;  // insertion order
    std::vector<Edge> edges_copy() const;
    std::vector<TraceEntry> trace_copy() const;
    GraphMetadata metadata_copy() const;
    std::map<std::string, double> q_snapshot_copy() const;
    int signature_depth() const { return signature_depth_; }

    // First node the probe fuzzy-matches, or nullopt. Nodes whose
    // depth-truncated DOM signature differs from the probe's are filtered out
    // before any pixel work; resolution mismatches never match.
    std::optional<std::string> find_matching_node(const Screen& screen,
                                                  const MatchConfig& cfg) const;

    // --- mutation (exploration loop only) ---
    std::string insert_initial(Screen screen, const FrameProvider& frames = nullptr,
                               const MatchConfig& cfg = {});

    // Classifies the observed screen against the graph and records the step:
    //   SameScreen  observed matches the source node; nothing added
    //   SeenScreen  observed matches another node; edge added if absent
    //   NewScreen   no match; node and edge added
    // The action must already be keyed to from_id.
    TransitionResult add_transition(const std::string& from_id, const Action& action,
                                    Screen observed, const MatchConfig& cfg,
                                    const FrameProvider& frames = nullptr);

    void set_q_snapshot(const QTable& table);
    void set_aborted(const std::string& reason);

    // One description per edge in insertion order. Described edges are served
    // from the cache and never re-sent; oracle failures fall back to a
    // deterministic template flagged as such.
    std::vector<TransitionDescription> to_state_descriptions(Oracle& oracle) const;
    // Rendered lines for prompt state sections (cached entries only).
    std::vector<std::string> described_lines() const;

private:
    std::string next_node_id() const;
    void insert_node(Screen&& screen, const FrameProvider& frames, const MatchConfig& cfg);
    std::optional<std::string> find_matching_locked(const Screen& screen, const MatchConfig& cfg,
                                                    const std::string& skip_id) const;

    struct State {
        GraphMetadata meta;
        std::vector<Screen> nodes;
        std::vector<std::string> node_sigs;
        std::map<std::string, std::size_t> node_index;
        std::vector<Edge> edges;
        std::set<std::string> edge_keys;
        std::vector<TraceEntry> trace;
        // lazily filled by to_state_descriptions; guarded by desc_mu_
        mutable std::map<std::string, TransitionDescription> descriptions;
        std::map<std::string, double> q_snapshot;
    };

    friend void save(const ExplorationGraph& graph, const std::string& path);
    friend ExplorationGraph load(const std::string& path);
    friend bool graphs_equal(const ExplorationGraph& a, const ExplorationGraph& b);

    State s_;
    int signature_depth_ = 3;
    mutable std::shared_mutex mu_;
    mutable std::mutex desc_mu_;  // guards the description cache during reads
};

inline constexpr int kArchiveFormatVersion = 1;

// Directory archive: manifest.json + one lossless image per node (plus mask
// when present) + line-delimited records for edges, trace, descriptions and
// Q values. load(save(g)) reproduces g structurally, bit-exact on disk.
void save(const ExplorationGraph& graph, const std::string& path);
ExplorationGraph load(const std::string& path);

bool graphs_equal(const ExplorationGraph& a, const ExplorationGraph& b);

// Fallback description used when the oracle gives up on an edge.
TransitionDescription fallback_description(const Edge& edge);

Raster scroll_placeholder_patch();

void to_json(nlohmann::json& j, const MatchConfig& cfg);
MatchConfig match_config_from_json(const nlohmann::json& j);

}  // namespace guibee
