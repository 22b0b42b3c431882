#pragma once

#include <string>
#include <vector>

#include "guibee/graph.hpp"
#include "guibee/oracle.hpp"

namespace guibee {

enum class QueryKind { System1, System2 };

std::string to_string(QueryKind k);
QueryKind query_kind_from_string(const std::string& s);

// One grounding-training triplet: a query against a screen resolving to a
// target point inside the target element's box.
struct GroundingRecord {
    std::string query;
    QueryKind kind = QueryKind::System1;
    std::string screenshot_ref;  // node id within the source graph
    std::string a11y;
    Point target_point;
    Rect target_box;
    std::string edge_ref;  // provenance: edge index + action key

    bool operator==(const GroundingRecord&) const = default;
};

struct AnnotateOptions {
    // Default is the exact box center; jitter samples uniformly from the
    // central half of the box instead.
    bool jitter_points = false;
    std::uint64_t jitter_seed = 0;
};

struct AnnotateResult {
    std::vector<GroundingRecord> records;
    std::size_t annotated_edges = 0;
    std::size_t skipped_edges = 0;  // oracle gave up
    std::size_t scroll_edges = 0;   // no element target, never annotated
    std::vector<std::string> warnings;
};

// Generates grounding queries for every click edge via the oracle's
// multi-lens prompt. Scroll edges are skipped; per-edge oracle failures skip
// the edge with a warning. Raises EmptyDatasetError when nothing came out.
AnnotateResult annotate_graph(const ExplorationGraph& graph, Oracle& oracle,
                              const AnnotateOptions& opt = {});

enum class DatasetVariant { VisionOnly, VisionA11y };

std::string to_string(DatasetVariant v);

// Writes records.jsonl, the referenced node images and a manifest with counts
// and content digests. Re-exporting the same inputs is byte-identical.
void export_dataset(const std::vector<GroundingRecord>& records, DatasetVariant variant,
                    const std::string& path, const ExplorationGraph& graph);

struct LoadedDataset {
    DatasetVariant variant = DatasetVariant::VisionOnly;
    std::vector<GroundingRecord> records;
};

LoadedDataset load_dataset(const std::string& path);

// System2 share of the record set, reported with every dataset.
double system2_ratio(const std::vector<GroundingRecord>& records);

}  // namespace guibee
