#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "guibee/adapter.hpp"
#include "guibee/annotate.hpp"
#include "guibee/environment.hpp"
#include "guibee/errors.hpp"
#include "guibee/graph.hpp"
#include "guibee/metrics.hpp"
#include "guibee/oracle.hpp"
#include "guibee/policy.hpp"

namespace py = pybind11;
using namespace guibee;

namespace {

Raster raster_from_bytes(int width, int height, const py::bytes& data) {
    const std::string s = data;
    if (s.size() != static_cast<std::size_t>(width) * height * 3)
        throw Error("raster_from_bytes: need width*height*3 bytes");
    Raster img(width, height);
    std::copy(s.begin(), s.end(), img.bytes().begin());
    return img;
}

// One-call exploration: manifest in, archive + summary out.
py::dict explore_to_dict(const std::string& manifest_path, const std::string& policy,
                         std::uint64_t seed, int steps, std::size_t candidates,
                         const std::string& out_dir) {
    SimulatorEnvironment env(EnvironmentManifest::load_file(manifest_path));
    QTable table;
    Oracle oracle(std::make_shared<MockBackend>(&table));
    PolicyConfig cfg;
    cfg.kind = policy_kind_from_string(policy);
    cfg.max_steps = steps;
    cfg.candidates_per_step = candidates;
    ExplorationGraph graph = run_exploration(env, cfg, oracle, MatchConfig{}, table, seed);
    if (!out_dir.empty()) save(graph, out_dir);

    py::dict out;
    out["nodes"] = graph.node_count();
    out["edges"] = graph.edge_count();
    out["steps_executed"] = graph.trace_copy().size();
    out["d3c"] = d3c(graph);
    out["coverage_ratio"] = coverage_ratio(graph, env.manifest());
    out["aborted"] = graph.metadata_copy().aborted;
    return out;
}

py::dict annotate_to_dict(const std::string& archive_dir, const std::string& out_dir,
                          const std::string& variant_name) {
    const ExplorationGraph graph = load(archive_dir);
    Oracle oracle(std::make_shared<MockBackend>());
    const AnnotateResult result = annotate_graph(graph, oracle);
    const DatasetVariant variant = variant_name == "vision_a11y" ? DatasetVariant::VisionA11y
                                                                 : DatasetVariant::VisionOnly;
    export_dataset(result.records, variant, out_dir, graph);
    py::dict out;
    out["records"] = result.records.size();
    out["system2_ratio"] = system2_ratio(result.records);
    out["annotated_edges"] = result.annotated_edges;
    out["skipped_edges"] = result.skipped_edges;
    out["scroll_edges"] = result.scroll_edges;
    return out;
}

py::dict archive_summary(const std::string& path) {
    const ExplorationGraph graph = load(path);
    const GraphMetadata meta = graph.metadata_copy();
    py::dict out;
    out["environment"] = meta.environment;
    out["seed"] = meta.seed;
    out["nodes"] = graph.node_count();
    out["edges"] = graph.edge_count();
    out["steps_executed"] = graph.trace_copy().size();
    out["d3c"] = d3c(graph);
    out["aborted"] = meta.aborted;
    return out;
}

}  // namespace

PYBIND11_MODULE(guibee, m) {
    m.doc() = "Autonomous GUI exploration agent: Q-value-guided exploration, fuzzy screen "
              "matching, grounding-data generation and coverage metrics";

    py::register_exception<Error>(m, "GuibeeError");

    py::class_<Rgb>(m, "Rgb")
        .def(py::init<std::uint8_t, std::uint8_t, std::uint8_t>())
        .def_readwrite("r", &Rgb::r)
        .def_readwrite("g", &Rgb::g)
        .def_readwrite("b", &Rgb::b);

    py::class_<Raster>(m, "Raster")
        .def(py::init<int, int, Rgb>(), py::arg("width"), py::arg("height"),
             py::arg("fill") = Rgb{255, 255, 255})
        .def_static("from_bytes", &raster_from_bytes, py::arg("width"), py::arg("height"),
                    py::arg("data"))
        .def_property_readonly("width", &Raster::width)
        .def_property_readonly("height", &Raster::height)
        .def("to_bytes",
             [](const Raster& r) {
                 return py::bytes(reinterpret_cast<const char*>(r.bytes().data()),
                                  r.bytes().size());
             })
        .def("set", [](Raster& r, int x, int y, std::uint8_t cr, std::uint8_t cg,
                       std::uint8_t cb) { r.set(x, y, Rgb{cr, cg, cb}); });

    py::class_<MatchConfig>(m, "MatchConfig")
        .def(py::init<>())
        .def_readwrite("identity_threshold", &MatchConfig::identity_threshold)
        .def_readwrite("min_overlap", &MatchConfig::min_overlap)
        .def_readwrite("gaussian_sigma", &MatchConfig::gaussian_sigma)
        .def_readwrite("gaussian_kernel", &MatchConfig::gaussian_kernel)
        .def_readwrite("shift_step", &MatchConfig::shift_step)
        .def_readwrite("dynamic_frames", &MatchConfig::dynamic_frames)
        .def_readwrite("max_shift_frac", &MatchConfig::max_shift_frac);

    m.def(
        "patch_difference",
        [](const Raster& a, const Raster& b, const MatchConfig& cfg) {
            return patch_difference(a, b, cfg);
        },
        py::arg("a"), py::arg("b"), py::arg("cfg") = MatchConfig{},
        "Shift-tolerant visual difference score in [0, 1]");

    py::enum_<Outcome>(m, "Outcome")
        .value("NewScreen", Outcome::NewScreen)
        .value("SeenScreen", Outcome::SeenScreen)
        .value("SameScreen", Outcome::SameScreen);

    py::class_<QTable>(m, "QTable")
        .def(py::init<>())
        .def("get_q", &QTable::get_q)
        .def("contains", &QTable::contains)
        .def("q_next_mean", &QTable::q_next_mean)
        .def("update_q", &QTable::update_q, py::arg("key"), py::arg("outcome"), py::arg("q_next"))
        .def("__len__", &QTable::size);

    m.def(
        "weighted_sample",
        [](const std::vector<std::string>& candidates, const QTable& table, std::size_t h,
           std::uint64_t seed) {
            Rng rng(seed);
            return weighted_sample(candidates, table, h, rng);
        },
        py::arg("candidates"), py::arg("table"), py::arg("h"), py::arg("seed") = 0,
        "Q-weighted sampling without replacement");

    m.def("explore", &explore_to_dict, py::arg("manifest"), py::arg("policy") = "qicrl",
          py::arg("seed") = 0, py::arg("steps") = 400, py::arg("candidates") = 3,
          py::arg("out_dir") = "",
          "Explore a manifest-driven simulator with the mock oracle; returns summary stats");

    m.def("archive_summary", &archive_summary, py::arg("path"),
          "Load a graph archive and summarize it");

    m.def("annotate", &annotate_to_dict, py::arg("archive_dir"), py::arg("out_dir"),
          py::arg("variant") = "vision_only",
          "Annotate a graph archive into a grounding dataset with the mock oracle");

    m.def(
        "grounding_accuracy",
        [](const std::vector<std::pair<int, int>>& predictions, const std::string& dataset_dir) {
            const LoadedDataset ds = load_dataset(dataset_dir);
            std::vector<Point> points;
            points.reserve(predictions.size());
            for (const auto& [x, y] : predictions) points.push_back(Point{x, y});
            return grounding_accuracy(points, ds.records);
        },
        py::arg("predictions"), py::arg("dataset_dir"),
        "Point-in-box accuracy of predictions against an exported dataset");

    m.def(
        "dataset_points",
        [](const std::string& dataset_dir) {
            std::vector<std::tuple<std::string, int, int, std::tuple<int, int, int, int>>> out;
            for (const auto& r : load_dataset(dataset_dir).records)
                out.emplace_back(r.query, r.target_point.x, r.target_point.y,
                                 std::make_tuple(r.target_box.x0, r.target_box.y0, r.target_box.x1,
                                                 r.target_box.y1));
            return out;
        },
        py::arg("dataset_dir"), "(query, x, y, box) rows of an exported dataset");

    m.def(
        "bfs_screen_count",
        [](const std::string& manifest_path) {
            return EnvironmentManifest::load_file(manifest_path).bfs_reachable_count();
        },
        py::arg("manifest"), "Ground-truth reachable screen count of a manifest");
}
