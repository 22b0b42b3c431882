#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "guibee/annotate.hpp"
#include "guibee/environment.hpp"
#include "guibee/errors.hpp"
#include "guibee/graph.hpp"
#include "guibee/hash.hpp"
#include "guibee/policy.hpp"
#include "testutil.hpp"

using namespace guibee;
namespace tu = guibee::testutil;
namespace fs = std::filesystem;

namespace {

Screen screen_x() {
    return tu::make_screen("X", {{Rect{10, 10, 40, 30}, Rgb{200, 40, 40}},
                                 {Rect{50, 10, 80, 30}, Rgb{40, 200, 40}}});
}
Screen screen_y() {
    return tu::make_screen("Y", {{Rect{10, 40, 60, 64}, Rgb{40, 40, 220}}});
}

ExplorationGraph one_edge_graph() {
    ExplorationGraph g;
    const std::string a = g.insert_initial(screen_x());
    g.add_transition(a, tu::make_click(screen_x(), 0, a), screen_y(), MatchConfig{});
    return g;
}

std::string file_digest(const fs::path& p) {
    const auto bytes = read_file(p.string());
    return to_hex64(Fnv64().update(bytes.data(), bytes.size()).value());
}

std::map<std::string, std::string> dir_digests(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = file_digest(e.path());
    return out;
}

ExplorationGraph simulator_graph(int steps, std::uint64_t seed) {
    SimulatorEnvironment env(tu::fixture_manifest());
    QTable table;
    Oracle oracle(std::make_shared<MockBackend>(&table));
    PolicyConfig cfg;
    cfg.kind = PolicyKind::QICRL;
    cfg.max_steps = steps;
    return run_exploration(env, cfg, oracle, MatchConfig{}, table, seed);
}

}  // namespace

TEST_SUITE("annotate_graph") {
    TEST_CASE("one edge with a scripted 2+1 bundle gives three records") {
        const ExplorationGraph g = one_edge_graph();
        auto mock = std::make_shared<MockBackend>();
        mock->script_task(OracleTask::GenerateQueries,
                          R"({"analysis":"a red block",
                              "system_1_queries":["click the red block","press the left button"],
                              "system_2_queries":["open the blue page"]})");
        Oracle oracle(mock);
        const AnnotateResult r = annotate_graph(g, oracle);
        REQUIRE(r.records.size() == 3);
        CHECK(r.records[0].kind == QueryKind::System1);
        CHECK(r.records[1].kind == QueryKind::System1);
        CHECK(r.records[2].kind == QueryKind::System2);
        CHECK(r.annotated_edges == 1);
        CHECK(r.skipped_edges == 0);

        // the target point is the exact box center and inside the box
        for (const auto& rec : r.records) {
            CHECK(rec.target_point == rec.target_box.center());
            CHECK(rec.target_box.contains(rec.target_point));
            CHECK(rec.screenshot_ref == g.node_ids().front());
            CHECK_FALSE(rec.a11y.empty());
        }
    }

    TEST_CASE("scroll-only graphs cannot be annotated") {
        ExplorationGraph g;
        const std::string a = g.insert_initial(screen_x());
        Action scroll;
        scroll.type = ActionType::Scroll;
        scroll.source_screen_id = a;
        scroll.target.full_page = true;
        scroll.target.box = Rect{0, 0, 96, 72};
        scroll.target.patch = scroll_placeholder_patch();
        scroll.key = make_action_key(a, ActionType::Scroll, scroll.target);
        scroll.env_key = scroll.key;
        g.add_transition(a, scroll, screen_y(), MatchConfig{});

        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        CHECK_THROWS_AS(annotate_graph(g, oracle), EmptyDatasetError);
    }

    TEST_CASE("a graph with no edges cannot be annotated") {
        ExplorationGraph g;
        g.insert_initial(screen_x());
        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        CHECK_THROWS_AS(annotate_graph(g, oracle), EmptyDatasetError);
    }

    TEST_CASE("per-edge oracle failures skip the edge with a warning") {
        ExplorationGraph g;
        const std::string a = g.insert_initial(screen_x());
        const std::string b =
            g.add_transition(a, tu::make_click(screen_x(), 0, a), screen_y(), MatchConfig{}).to_id;
        Screen bs = g.node_copy(b);
        g.add_transition(b, tu::make_click(bs, 0, b), tu::make_screen("Z", {{Rect{4, 4, 20, 16},
                                                                             Rgb{9, 9, 9}}}),
                         MatchConfig{});

        auto mock = std::make_shared<MockBackend>();
        // first edge: three malformed attempts; second edge: heuristic default succeeds
        for (int i = 0; i < 3; ++i) mock->script_task(OracleTask::GenerateQueries, "not json");
        Oracle oracle(mock, OracleConfig{2});
        const AnnotateResult r = annotate_graph(g, oracle);
        CHECK(r.annotated_edges == 1);
        CHECK(r.skipped_edges == 1);
        REQUIRE(!r.warnings.empty());
        CHECK(r.warnings[0].find("skipped") != std::string::npos);
        CHECK_FALSE(r.records.empty());
    }

    TEST_CASE("jittered points stay strictly inside their boxes") {
        const ExplorationGraph g = simulator_graph(40, 6);
        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        AnnotateOptions opt;
        opt.jitter_points = true;
        opt.jitter_seed = 9;
        const AnnotateResult r = annotate_graph(g, oracle, opt);
        REQUIRE(!r.records.empty());
        for (const auto& rec : r.records) CHECK(rec.target_box.contains(rec.target_point));
    }

    TEST_CASE("record count equals the sum of parsed queries across edges") {
        const ExplorationGraph g = simulator_graph(40, 7);
        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        const AnnotateResult r = annotate_graph(g, oracle);
        std::size_t click_edges = 0;
        for (const Edge& e : g.edges_copy())
            click_edges += e.action.type == ActionType::Click ? 1 : 0;
        CHECK(r.annotated_edges + r.skipped_edges == click_edges);
        CHECK(r.scroll_edges == g.edge_count() - click_edges);
        // the default mock yields 3 + 2 queries per annotated edge
        CHECK(r.records.size() == r.annotated_edges * 5);
        const double ratio = system2_ratio(r.records);
        CHECK(ratio == doctest::Approx(2.0 / 5.0));
    }
}

TEST_SUITE("export_dataset") {
    TEST_CASE("vision variants differ exactly in the a11y field") {
        const ExplorationGraph g = one_edge_graph();
        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        const AnnotateResult r = annotate_graph(g, oracle);

        tu::TempDir dir("ds");
        export_dataset(r.records, DatasetVariant::VisionOnly, dir.sub("plain"), g);
        export_dataset(r.records, DatasetVariant::VisionA11y, dir.sub("a11y"), g);

        const LoadedDataset plain = load_dataset(dir.sub("plain"));
        const LoadedDataset rich = load_dataset(dir.sub("a11y"));
        REQUIRE(plain.records.size() == r.records.size());
        REQUIRE(rich.records.size() == r.records.size());
        CHECK(plain.variant == DatasetVariant::VisionOnly);
        CHECK(rich.variant == DatasetVariant::VisionA11y);
        for (std::size_t i = 0; i < r.records.size(); ++i) {
            CHECK(plain.records[i].a11y.empty());
            CHECK(rich.records[i].a11y == r.records[i].a11y);
            CHECK(plain.records[i].query == r.records[i].query);
            CHECK(plain.records[i].target_point == r.records[i].target_point);
            CHECK(plain.records[i].target_box == r.records[i].target_box);
            CHECK(plain.records[i].kind == r.records[i].kind);
        }
    }

    TEST_CASE("re-export is byte-identical") {
        const ExplorationGraph g = simulator_graph(30, 8);
        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        const AnnotateResult r = annotate_graph(g, oracle);

        tu::TempDir dir("ds");
        export_dataset(r.records, DatasetVariant::VisionA11y, dir.sub("one"), g);
        export_dataset(r.records, DatasetVariant::VisionA11y, dir.sub("two"), g);
        CHECK(dir_digests(dir.sub("one")) == dir_digests(dir.sub("two")));
    }

    TEST_CASE("dangling image references fail before any write") {
        const ExplorationGraph g = one_edge_graph();
        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        AnnotateResult r = annotate_graph(g, oracle);
        r.records[0].screenshot_ref = "s9999";

        tu::TempDir dir("ds");
        CHECK_THROWS_AS(export_dataset(r.records, DatasetVariant::VisionOnly, dir.sub("bad"), g),
                        ArchiveError);
        CHECK_FALSE(fs::exists(dir.sub("bad")));
    }

    TEST_CASE("empty record sets are rejected") {
        const ExplorationGraph g = one_edge_graph();
        tu::TempDir dir("ds");
        CHECK_THROWS_AS(export_dataset({}, DatasetVariant::VisionOnly, dir.sub("none"), g),
                        EmptyDatasetError);
    }

    TEST_CASE("manifest counts and ratio match the records") {
        const ExplorationGraph g = one_edge_graph();
        auto mock = std::make_shared<MockBackend>();
        Oracle oracle(mock);
        const AnnotateResult r = annotate_graph(g, oracle);
        tu::TempDir dir("ds");
        export_dataset(r.records, DatasetVariant::VisionOnly, dir.sub("d"), g);

        std::ifstream f(fs::path(dir.sub("d")) / "manifest.json");
        nlohmann::json manifest;
        f >> manifest;
        CHECK(manifest["counts"]["total"] == r.records.size());
        std::size_t s2 = 0;
        for (const auto& rec : r.records) s2 += rec.kind == QueryKind::System2 ? 1 : 0;
        CHECK(manifest["counts"]["system2"] == s2);
        CHECK(manifest["system2_ratio"].get<double>() ==
              doctest::Approx(system2_ratio(r.records)));
        CHECK(manifest["digests"].contains("records"));
    }
}
