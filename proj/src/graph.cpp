#include "guibee/graph.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "guibee/errors.hpp"
#include "guibee/metrics.hpp"

namespace fs = std::filesystem;

namespace guibee {

using nlohmann::json;

ExplorationGraph::ExplorationGraph(GraphMetadata meta, int signature_depth)
    : signature_depth_(signature_depth) {
    s_.meta = std::move(meta);
}

ExplorationGraph::ExplorationGraph(ExplorationGraph&& other) noexcept
    : s_(std::move(other.s_)), signature_depth_(other.signature_depth_) {}

ExplorationGraph& ExplorationGraph::operator=(ExplorationGraph&& other) noexcept {
    if (this != &other) {
        std::unique_lock lock(mu_);
        s_ = std::move(other.s_);
        signature_depth_ = other.signature_depth_;
    }
    return *this;
}

std::size_t ExplorationGraph::node_count() const {
    std::shared_lock lock(mu_);
    return s_.nodes.size();
}

std::size_t ExplorationGraph::edge_count() const {
    std::shared_lock lock(mu_);
    return s_.edges.size();
}

bool ExplorationGraph::has_node(const std::string& id) const {
    std::shared_lock lock(mu_);
    return s_.node_index.count(id) > 0;
}

Screen ExplorationGraph::node_copy(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = s_.node_index.find(id);
    if (it == s_.node_index.end()) throw GraphError("unknown node id: " + id);
    return s_.nodes[it->second];
}

std::vector<std::string> ExplorationGraph::node_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    out.reserve(s_.nodes.size());
    for (const auto& n : s_.nodes) out.push_back(n.id);
    return out;
}

std::vector<Edge> ExplorationGraph::edges_copy() const {
    std::shared_lock lock(mu_);
    return s_.edges;
}

std::vector<TraceEntry> ExplorationGraph::trace_copy() const {
    std::shared_lock lock(mu_);
    return s_.trace;
}

GraphMetadata ExplorationGraph::metadata_copy() const {
    std::shared_lock lock(mu_);
    return s_.meta;
}

std::map<std::string, double> ExplorationGraph::q_snapshot_copy() const {
    std::shared_lock lock(mu_);
    return s_.q_snapshot;
}

std::string ExplorationGraph::next_node_id() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04zu", s_.nodes.size());
    return buf;
}

std::optional<std::string> ExplorationGraph::find_matching_locked(const Screen& screen,
                                                                  const MatchConfig& cfg,
                                                                  const std::string& skip_id) const {
    const std::string probe_sig = dom_signature(screen.dom, signature_depth_);
    for (std::size_t i = 0; i < s_.nodes.size(); ++i) {
        const Screen& node = s_.nodes[i];
        if (node.id == skip_id) continue;
        if (node.width() != screen.width() || node.height() != screen.height())
            continue;  // different resolutions are distinct screens
        if (s_.node_sigs[i] != probe_sig) continue;
        if (screens_equal(node, screen, cfg).equal) return node.id;
    }
    return std::nullopt;
}

std::optional<std::string> ExplorationGraph::find_matching_node(const Screen& screen,
                                                                const MatchConfig& cfg) const {
    std::shared_lock lock(mu_);
    return find_matching_locked(screen, cfg, "");
}

void ExplorationGraph::insert_node(Screen&& screen, const FrameProvider& frames,
                                   const MatchConfig& cfg) {
    screen.id = next_node_id();
    if (frames) {
        std::vector<Raster> all = {screen.screenshot};
        for (auto& extra : frames()) all.push_back(std::move(extra));
        if (all.size() >= 2) {
            Mask mask = dynamic_region_mask(all, cfg);
            if (mask.any()) screen.dynamic_mask = std::move(mask);
        }
    }
    s_.node_sigs.push_back(dom_signature(screen.dom, signature_depth_));
    s_.node_index[screen.id] = s_.nodes.size();
    s_.nodes.push_back(std::move(screen));
}

std::string ExplorationGraph::insert_initial(Screen screen, const FrameProvider& frames,
                                             const MatchConfig& cfg) {
    std::unique_lock lock(mu_);
    if (!s_.nodes.empty()) throw GraphError("insert_initial: graph is not empty");
    insert_node(std::move(screen), frames, cfg);
    return s_.nodes.back().id;
}

TransitionResult ExplorationGraph::add_transition(const std::string& from_id, const Action& action,
                                                  Screen observed, const MatchConfig& cfg,
                                                  const FrameProvider& frames) {
    std::unique_lock lock(mu_);
    auto from_it = s_.node_index.find(from_id);
    if (from_it == s_.node_index.end())
        throw GraphError("add_transition: unknown from node " + from_id);
    if (action.source_screen_id != from_id)
        throw GraphError("add_transition: action is keyed to " + action.source_screen_id +
                         ", not " + from_id);

    TransitionResult result;
    const Screen& from_node = s_.nodes[from_it->second];

    if (screens_equal(from_node, observed, cfg).equal) {
        result.to_id = from_id;
        result.outcome = Outcome::SameScreen;
    } else if (auto hit = find_matching_locked(observed, cfg, from_id)) {
        result.to_id = *hit;
        result.outcome = Outcome::SeenScreen;
    } else {
        insert_node(std::move(observed), frames, cfg);
        result.to_id = s_.nodes.back().id;
        result.outcome = Outcome::NewScreen;
    }

    if (result.outcome != Outcome::SameScreen && !s_.edge_keys.count(action.key)) {
        s_.edges.push_back(Edge{from_id, action, result.to_id});
        s_.edge_keys.insert(action.key);
        result.edge_added = true;
    }

    s_.trace.push_back(TraceEntry{static_cast<int>(s_.trace.size()) + 1, action.key,
                                  result.outcome, from_id, result.to_id});
    return result;
}

void ExplorationGraph::set_q_snapshot(const QTable& table) {
    std::unique_lock lock(mu_);
    s_.q_snapshot = table.values();
}

void ExplorationGraph::set_aborted(const std::string& reason) {
    std::unique_lock lock(mu_);
    s_.meta.aborted = true;
    s_.meta.abort_reason = reason;
}

TransitionDescription fallback_description(const Edge& edge) {
    TransitionDescription d;
    d.action_key = edge.action.key;
    d.clicked_element = "element " + edge.action.target.label() + " at " +
                        edge.action.target.box.to_string();
    d.consequence = "arrived at screen " + edge.to_id;
    d.fallback = true;
    return d;
}

std::vector<TransitionDescription> ExplorationGraph::to_state_descriptions(Oracle& oracle) const {
    std::shared_lock lock(mu_);
    std::lock_guard cache_lock(desc_mu_);
    std::vector<TransitionDescription> out;
    out.reserve(s_.edges.size());
    auto& cache = s_.descriptions;
    for (const Edge& edge : s_.edges) {
        if (auto it = cache.find(edge.action.key); it != cache.end()) {
            out.push_back(it->second);
            continue;
        }
        const Screen& from = s_.nodes[s_.node_index.at(edge.from_id)];
        const Screen& to = s_.nodes[s_.node_index.at(edge.to_id)];
        Rect box = edge.action.target.full_page ? from.screenshot.bounds()
                                                : edge.action.target.box;
        DescribeQuery q;
        q.from_screenshot = &from.screenshot;
        q.box = box;
        q.to_screenshot = &to.screenshot;
        q.subject_label = edge.action.target.label();
        q.to_label = "screen " + edge.to_id;
        TransitionDescription d;
        try {
            d = oracle.describe_transition(q, edge.action.key);
        } catch (const CassetteMissError&) {
            throw;
        } catch (const OracleError&) {
            d = fallback_description(edge);
        }
        cache.emplace(edge.action.key, d);
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<std::string> ExplorationGraph::described_lines() const {
    std::shared_lock lock(mu_);
    std::lock_guard cache_lock(desc_mu_);
    std::vector<std::string> out;
    for (const Edge& edge : s_.edges) {
        auto it = s_.descriptions.find(edge.action.key);
        if (it != s_.descriptions.end()) out.push_back(render_description_line(it->second));
    }
    return out;
}

// --- serialization ------------------------------------------------------------

void to_json(json& j, const MatchConfig& cfg) {
    j = json{{"identity_threshold", cfg.identity_threshold},
             {"min_overlap", cfg.min_overlap},
             {"gaussian_sigma", cfg.gaussian_sigma},
             {"gaussian_kernel", cfg.gaussian_kernel},
             {"shift_step", cfg.shift_step},
             {"dynamic_frames", cfg.dynamic_frames},
             {"max_shift_frac", cfg.max_shift_frac},
             {"max_shift_px", cfg.max_shift_px},
             {"aggregate", cfg.aggregate == ShiftAggregate::MeanAbs ? "mean" : "max_pixel"}};
}

MatchConfig match_config_from_json(const json& j) {
    MatchConfig cfg;
    cfg.identity_threshold = j.value("identity_threshold", cfg.identity_threshold);
    cfg.min_overlap = j.value("min_overlap", cfg.min_overlap);
    cfg.gaussian_sigma = j.value("gaussian_sigma", cfg.gaussian_sigma);
    cfg.gaussian_kernel = j.value("gaussian_kernel", cfg.gaussian_kernel);
    cfg.shift_step = j.value("shift_step", cfg.shift_step);
    cfg.dynamic_frames = j.value("dynamic_frames", cfg.dynamic_frames);
    cfg.max_shift_frac = j.value("max_shift_frac", cfg.max_shift_frac);
    cfg.max_shift_px = j.value("max_shift_px", cfg.max_shift_px);
    cfg.aggregate = j.value("aggregate", "mean") == std::string("max_pixel")
                        ? ShiftAggregate::MaxPixel
                        : ShiftAggregate::MeanAbs;
    cfg.validate();
    return cfg;
}

Raster scroll_placeholder_patch() { return Raster(16, 16, Rgb{128, 128, 128}); }

namespace {

json action_to_json(const Action& a) {
    json t;
    t["full_page"] = a.target.full_page;
    t["element_id"] = a.target.element_id;
    t["dom_path"] = a.target.dom_path;
    t["tag"] = a.target.tag;
    t["classes"] = a.target.classes;
    t["box"] = {a.target.box.x0, a.target.box.y0, a.target.box.x1, a.target.box.y1};
    json j;
    j["type"] = to_string(a.type);
    j["source"] = a.source_screen_id;
    j["key"] = a.key;
    j["env_key"] = a.env_key;
    j["target"] = t;
    return j;
}

Action action_from_json(const json& j, const std::string& what) {
    try {
        Action a;
        a.type = action_type_from_string(j.at("type").get<std::string>());
        a.source_screen_id = j.at("source").get<std::string>();
        a.key = j.at("key").get<std::string>();
        a.env_key = j.value("env_key", "");
        const json& t = j.at("target");
        a.target.full_page = t.at("full_page").get<bool>();
        a.target.element_id = t.at("element_id").get<std::string>();
        a.target.dom_path = t.at("dom_path").get<std::string>();
        a.target.tag = t.at("tag").get<std::string>();
        a.target.classes = t.at("classes").get<std::vector<std::string>>();
        const auto& b = t.at("box");
        a.target.box =
            Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        return a;
    } catch (const json::exception& e) {
        throw ArchiveError(what + ": bad action record (" + e.what() + ")");
    }
}

}  // namespace

void save(const ExplorationGraph& graph, const std::string& path) {
    std::shared_lock lock(graph.mu_);
    const auto& s = graph.s_;

    fs::create_directories(fs::path(path) / "images");
    bool any_mask = false;
    for (const auto& n : s.nodes) any_mask = any_mask || n.dynamic_mask.has_value();
    if (any_mask) fs::create_directories(fs::path(path) / "masks");

    json manifest;
    manifest["format_version"] = kArchiveFormatVersion;
    manifest["metadata"] = {{"environment", s.meta.environment},
                            {"seed", s.meta.seed},
                            {"aborted", s.meta.aborted},
                            {"abort_reason", s.meta.abort_reason},
                            {"config", s.meta.config}};
    manifest["signature_depth"] = graph.signature_depth_;
    json nodes = json::array();
    for (const auto& n : s.nodes) {
        const std::string image_rel = "images/" + n.id + ".ppm";
        write_file((fs::path(path) / image_rel).string(), encode_ppm(n.screenshot));
        json jn;
        jn["id"] = n.id;
        jn["source_label"] = n.source_label;
        jn["width"] = n.width();
        jn["height"] = n.height();
        jn["a11y"] = n.a11y;
        jn["image"] = image_rel;
        if (n.dynamic_mask) {
            const std::string mask_rel = "masks/" + n.id + ".pbm";
            write_file((fs::path(path) / mask_rel).string(), encode_pbm(*n.dynamic_mask));
            jn["mask"] = mask_rel;
        } else {
            jn["mask"] = nullptr;
        }
        jn["dom"] = dom_to_json(n.dom);
        nodes.push_back(std::move(jn));
    }
    manifest["nodes"] = nodes;

    std::ofstream mf(fs::path(path) / "manifest.json", std::ios::trunc);
    if (!mf) throw ArchiveError("cannot write manifest.json under " + path);
    mf << manifest.dump(2) << "\n";

    std::ofstream rf(fs::path(path) / "records.jsonl", std::ios::trunc);
    if (!rf) throw ArchiveError("cannot write records.jsonl under " + path);
    for (const auto& e : s.edges) {
        json j;
        j["kind"] = "edge";
        j["from"] = e.from_id;
        j["to"] = e.to_id;
        j["key"] = e.action.key;
        j["action"] = action_to_json(e.action);
        rf << j.dump() << "\n";
    }
    for (const auto& t : s.trace) {
        json j;
        j["kind"] = "trace";
        j["step"] = t.step;
        j["key"] = t.action_key;
        j["outcome"] = to_string(t.outcome);
        j["from"] = t.from_id;
        j["to"] = t.to_id;
        rf << j.dump() << "\n";
    }
    for (const auto& e : s.edges) {  // stable order: by edge insertion
        auto it = s.descriptions.find(e.action.key);
        if (it == s.descriptions.end()) continue;
        json j;
        j["kind"] = "description";
        j["key"] = it->second.action_key;
        j["consequence"] = it->second.consequence;
        j["clicked_element"] = it->second.clicked_element;
        j["fallback"] = it->second.fallback;
        rf << j.dump() << "\n";
    }
    for (const auto& [key, value] : s.q_snapshot) {
        json j;
        j["kind"] = "qvalue";
        j["key"] = key;
        j["value"] = value;
        rf << j.dump() << "\n";
    }
}

ExplorationGraph load(const std::string& path) {
    const fs::path root(path);
    std::ifstream mf(root / "manifest.json");
    if (!mf) throw ArchiveError("missing manifest.json under " + path);
    json manifest = json::parse(mf, nullptr, false);
    if (manifest.is_discarded()) throw ArchiveError(path + "/manifest.json: parse error");

    const int version = manifest.value("format_version", -1);
    if (version != kArchiveFormatVersion)
        throw UnsupportedVersionError(version, kArchiveFormatVersion);

    GraphMetadata meta;
    const json& jm = manifest.at("metadata");
    meta.environment = jm.value("environment", "");
    meta.seed = jm.value("seed", std::uint64_t{0});
    meta.aborted = jm.value("aborted", false);
    meta.abort_reason = jm.value("abort_reason", "");
    meta.config = jm.value("config", json::object());

    ExplorationGraph graph(std::move(meta), manifest.value("signature_depth", 3));
    auto& s = graph.s_;

    for (const auto& jn : manifest.at("nodes")) {
        Screen n;
        n.id = jn.at("id").get<std::string>();
        n.source_label = jn.value("source_label", "");
        n.a11y = jn.value("a11y", "");
        const std::string image_rel = jn.at("image").get<std::string>();
        n.screenshot = decode_ppm(read_file((root / image_rel).string()), image_rel);
        if (jn.contains("mask") && !jn["mask"].is_null()) {
            const std::string mask_rel = jn["mask"].get<std::string>();
            n.dynamic_mask = decode_pbm(read_file((root / mask_rel).string()), mask_rel);
        }
        n.dom = dom_from_json(jn.at("dom"), path + "/manifest.json node " + n.id);
        if (n.width() != jn.value("width", -1) || n.height() != jn.value("height", -1))
            throw ArchiveError(path + ": node " + n.id + " image does not match recorded size");
        s.node_sigs.push_back(dom_signature(n.dom, graph.signature_depth_));
        s.node_index[n.id] = s.nodes.size();
        s.nodes.push_back(std::move(n));
    }

    std::ifstream rf(root / "records.jsonl");
    if (!rf) throw ArchiveError("missing records.jsonl under " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(rf, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + "/records.jsonl line " + std::to_string(lineno);
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ArchiveError(where + ": parse error");
        const std::string kind = j.value("kind", "");
        if (kind == "edge") {
            Edge e;
            e.from_id = j.value("from", "");
            e.to_id = j.value("to", "");
            e.action = action_from_json(j.at("action"), where);
            if (!s.node_index.count(e.from_id) || !s.node_index.count(e.to_id))
                throw ArchiveError(where + ": edge references unknown node");
            // patches are not stored; recrop from the source node
            if (e.action.target.full_page) {
                e.action.target.patch = scroll_placeholder_patch();
            } else {
                e.action.target.patch =
                    s.nodes[s.node_index[e.from_id]].screenshot.crop(e.action.target.box);
            }
            s.edge_keys.insert(e.action.key);
            s.edges.push_back(std::move(e));
        } else if (kind == "trace") {
            TraceEntry t;
            t.step = j.value("step", 0);
            t.action_key = j.value("key", "");
            t.outcome = outcome_from_string(j.value("outcome", ""));
            t.from_id = j.value("from", "");
            t.to_id = j.value("to", "");
            s.trace.push_back(std::move(t));
        } else if (kind == "description") {
            TransitionDescription d;
            d.action_key = j.value("key", "");
            d.consequence = j.value("consequence", "");
            d.clicked_element = j.value("clicked_element", "");
            d.fallback = j.value("fallback", false);
            s.descriptions[d.action_key] = std::move(d);
        } else if (kind == "qvalue") {
            s.q_snapshot[j.value("key", "")] = j.value("value", 0.0);
        } else {
            throw ArchiveError(where + ": unknown record kind '" + kind + "'");
        }
    }
    return graph;
}

bool graphs_equal(const ExplorationGraph& a, const ExplorationGraph& b) {
    std::shared_lock la(a.mu_);
    std::shared_lock lb(b.mu_);
    const auto& x = a.s_;
    const auto& y = b.s_;
    if (a.signature_depth_ != b.signature_depth_) return false;
    if (x.meta.environment != y.meta.environment || x.meta.seed != y.meta.seed ||
        x.meta.aborted != y.meta.aborted || x.meta.abort_reason != y.meta.abort_reason ||
        x.meta.config != y.meta.config)
        return false;
    if (x.nodes.size() != y.nodes.size() || x.edges.size() != y.edges.size() ||
        x.trace.size() != y.trace.size() || x.descriptions.size() != y.descriptions.size() ||
        x.q_snapshot != y.q_snapshot)
        return false;
    for (std::size_t i = 0; i < x.nodes.size(); ++i) {
        const Screen& n = x.nodes[i];
        const Screen& m = y.nodes[i];
        if (n.id != m.id || n.source_label != m.source_label || n.a11y != m.a11y ||
            !(n.screenshot == m.screenshot) || n.dynamic_mask != m.dynamic_mask ||
            !(n.dom == m.dom))
            return false;
    }
    for (std::size_t i = 0; i < x.edges.size(); ++i) {
        const Edge& e = x.edges[i];
        const Edge& f = y.edges[i];
        if (e.from_id != f.from_id || e.to_id != f.to_id || e.action.key != f.action.key ||
            e.action.env_key != f.action.env_key || e.action.type != f.action.type ||
            e.action.target.full_page != f.action.target.full_page ||
            e.action.target.element_id != f.action.target.element_id ||
            e.action.target.dom_path != f.action.target.dom_path ||
            e.action.target.tag != f.action.target.tag ||
            e.action.target.classes != f.action.target.classes ||
            e.action.target.box != f.action.target.box ||
            !(e.action.target.patch == f.action.target.patch))
            return false;
    }
    for (std::size_t i = 0; i < x.trace.size(); ++i) {
        const TraceEntry& t = x.trace[i];
        const TraceEntry& u = y.trace[i];
        if (t.step != u.step || t.action_key != u.action_key || t.outcome != u.outcome ||
            t.from_id != u.from_id || t.to_id != u.to_id)
            return false;
    }
    return x.descriptions == y.descriptions;
}

}  // namespace guibee
