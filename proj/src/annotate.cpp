#include "guibee/annotate.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "guibee/errors.hpp"
#include "guibee/hash.hpp"
#include "guibee/rng.hpp"

namespace fs = std::filesystem;

namespace guibee {

using nlohmann::json;

std::string to_string(QueryKind k) { return k == QueryKind::System1 ? "system1" : "system2"; }

QueryKind query_kind_from_string(const std::string& s) {
    if (s == "system1") return QueryKind::System1;
    if (s == "system2") return QueryKind::System2;
    throw Error("unknown query kind: " + s);
}

std::string to_string(DatasetVariant v) {
    return v == DatasetVariant::VisionOnly ? "vision_only" : "vision_a11y";
}

double system2_ratio(const std::vector<GroundingRecord>& records) {
    if (records.empty()) return 0.0;
    std::size_t s2 = 0;
    for (const auto& r : records) s2 += r.kind == QueryKind::System2 ? 1 : 0;
    return static_cast<double>(s2) / static_cast<double>(records.size());
}

namespace {

Point pick_target_point(const Rect& box, const AnnotateOptions& opt, Rng& jitter_rng) {
    if (!opt.jitter_points) return box.center();
    // uniform over the central half of the box, so points stay well inside
    const int w = box.width();
    const int h = box.height();
    const int x0 = box.x0 + w / 4;
    const int y0 = box.y0 + h / 4;
    const int xs = std::max(1, w / 2);
    const int ys = std::max(1, h / 2);
    return Point{x0 + static_cast<int>(jitter_rng.uniform_index(static_cast<std::size_t>(xs))),
                 y0 + static_cast<int>(jitter_rng.uniform_index(static_cast<std::size_t>(ys)))};
}

}  // namespace

AnnotateResult annotate_graph(const ExplorationGraph& graph, Oracle& oracle,
                              const AnnotateOptions& opt) {
    if (graph.edge_count() == 0)
        throw EmptyDatasetError("annotate_graph: graph has no edges to annotate");

    AnnotateResult result;
    Rng jitter_rng(opt.jitter_seed);
    const std::size_t warnings_before = oracle.warnings().size();
    const std::vector<Edge> edges = graph.edges_copy();

    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& edge = edges[i];
        if (edge.action.type == ActionType::Scroll) {
            ++result.scroll_edges;  // no single target element
            continue;
        }
        const Screen from = graph.node_copy(edge.from_id);
        const Screen to = graph.node_copy(edge.to_id);
        const Rect box = edge.action.target.box.intersect(from.screenshot.bounds());
        const std::string edge_ref = "edge:" + std::to_string(i) + ":" + edge.action.key;

        GenerateQueriesQuery q;
        q.from_screenshot = &from.screenshot;
        q.box = box;
        q.to_screenshot = &to.screenshot;
        q.element_crop = from.screenshot.crop(box);
        q.subject_label = edge.action.target.label();
        q.to_label = "screen " + edge.to_id;

        QueryBundle bundle;
        try {
            bundle = oracle.generate_queries(q);
        } catch (const CassetteMissError&) {
            throw;
        } catch (const OracleError& e) {
            ++result.skipped_edges;
            result.warnings.push_back("edge " + edge_ref + " skipped: " + e.what());
            continue;
        }
        ++result.annotated_edges;

        auto emit = [&](const std::string& query, QueryKind kind) {
            GroundingRecord r;
            r.query = query;
            r.kind = kind;
            r.screenshot_ref = edge.from_id;
            r.a11y = from.a11y;
            r.target_box = box;
            r.target_point = pick_target_point(box, opt, jitter_rng);
            r.edge_ref = edge_ref;
            if (!r.target_box.contains(r.target_point))
                throw Error("annotate_graph: target point escaped its box on " + edge_ref);
            if (!from.screenshot.bounds().contains(r.target_point))
                throw Error("annotate_graph: target point outside screenshot on " + edge_ref);
            result.records.push_back(std::move(r));
        };
        for (const auto& text : bundle.system1) emit(text, QueryKind::System1);
        for (const auto& text : bundle.system2) emit(text, QueryKind::System2);
    }

    for (std::size_t i = warnings_before; i < oracle.warnings().size(); ++i)
        result.warnings.push_back(oracle.warnings()[i]);
    if (result.records.empty())
        throw EmptyDatasetError("annotate_graph: no grounding records were produced");
    return result;
}

inline constexpr int kDatasetFormatVersion = 1;

void export_dataset(const std::vector<GroundingRecord>& records, DatasetVariant variant,
                    const std::string& path, const ExplorationGraph& graph) {
    if (records.empty()) throw EmptyDatasetError("export_dataset: no records");

    // integrity before any write
    std::set<std::string> referenced;
    for (const auto& r : records) {
        if (!graph.has_node(r.screenshot_ref))
            throw ArchiveError("export_dataset: dangling image reference " + r.screenshot_ref);
        referenced.insert(r.screenshot_ref);
    }

    fs::create_directories(fs::path(path) / "images");

    json manifest;
    manifest["format_version"] = kDatasetFormatVersion;
    manifest["variant"] = to_string(variant);

    json image_digests = json::object();
    for (const auto& id : referenced) {
        const std::string rel = "images/" + id + ".ppm";
        const auto bytes = encode_ppm(graph.node_copy(id).screenshot);
        write_file((fs::path(path) / rel).string(), bytes);
        image_digests[rel] = to_hex64(Fnv64().update(bytes.data(), bytes.size()).value());
    }

    std::string records_text;
    std::size_t s1 = 0;
    std::size_t s2 = 0;
    for (const auto& r : records) {
        json j;
        j["query"] = r.query;
        j["kind"] = to_string(r.kind);
        j["image"] = "images/" + r.screenshot_ref + ".ppm";
        if (variant == DatasetVariant::VisionA11y) j["a11y"] = r.a11y;
        j["point"] = {r.target_point.x, r.target_point.y};
        j["box"] = {r.target_box.x0, r.target_box.y0, r.target_box.x1, r.target_box.y1};
        j["edge_ref"] = r.edge_ref;
        records_text += j.dump() + "\n";
        (r.kind == QueryKind::System1 ? s1 : s2) += 1;
    }
    std::ofstream rf(fs::path(path) / "records.jsonl", std::ios::trunc);
    if (!rf) throw ArchiveError("export_dataset: cannot write records under " + path);
    rf << records_text;
    rf.close();

    manifest["counts"] = {{"total", records.size()}, {"system1", s1}, {"system2", s2}};
    manifest["system2_ratio"] = system2_ratio(records);
    manifest["digests"] = {
        {"records", to_hex64(fnv64(records_text))},
        {"images", image_digests},
    };
    std::ofstream mf(fs::path(path) / "manifest.json", std::ios::trunc);
    if (!mf) throw ArchiveError("export_dataset: cannot write manifest under " + path);
    mf << manifest.dump(2) << "\n";
}

LoadedDataset load_dataset(const std::string& path) {
    std::ifstream mf(fs::path(path) / "manifest.json");
    if (!mf) throw ArchiveError("missing dataset manifest under " + path);
    json manifest = json::parse(mf, nullptr, false);
    if (manifest.is_discarded()) throw ArchiveError(path + "/manifest.json: parse error");
    const int version = manifest.value("format_version", -1);
    if (version != kDatasetFormatVersion)
        throw UnsupportedVersionError(version, kDatasetFormatVersion);

    LoadedDataset out;
    out.variant = manifest.value("variant", "vision_only") == std::string("vision_a11y")
                      ? DatasetVariant::VisionA11y
                      : DatasetVariant::VisionOnly;

    std::ifstream rf(fs::path(path) / "records.jsonl");
    if (!rf) throw ArchiveError("missing records.jsonl under " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(rf, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ArchiveError(path + "/records.jsonl line " + std::to_string(lineno) +
                               ": parse error");
        GroundingRecord r;
        r.query = j.value("query", "");
        r.kind = query_kind_from_string(j.value("kind", "system1"));
        std::string image = j.value("image", "");
        // strip the images/ prefix and extension back to the node id
        if (image.rfind("images/", 0) == 0) image = image.substr(7);
        if (image.size() > 4 && image.substr(image.size() - 4) == ".ppm")
            image = image.substr(0, image.size() - 4);
        r.screenshot_ref = image;
        r.a11y = j.value("a11y", "");
        const auto& p = j.at("point");
        r.target_point = Point{p.at(0).get<int>(), p.at(1).get<int>()};
        const auto& b = j.at("box");
        r.target_box =
            Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        r.edge_ref = j.value("edge_ref", "");
        out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace guibee
