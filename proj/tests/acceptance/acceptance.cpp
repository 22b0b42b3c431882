// Acceptance suite: one named criterion per contract bullet, each printing a
// single [PASS]/[FAIL] line. Run everything, `--only <name>` for one
// criterion, `--list` to enumerate.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "guibee/annotate.hpp"
#include "guibee/environment.hpp"
#include "guibee/errors.hpp"
#include "guibee/fuzzy_match.hpp"
#include "guibee/graph.hpp"
#include "guibee/hash.hpp"
#include "guibee/metrics.hpp"
#include "guibee/oracle.hpp"
#include "guibee/policy.hpp"
#include "guibee/q_store.hpp"

using namespace guibee;
namespace fs = std::filesystem;

namespace {

struct CheckFailure {
    std::string what;
};

struct Checker {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void close(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol))
            failures.push_back(what + ": got " + std::to_string(got) + ", want " +
                               std::to_string(want) + " (tol " + std::to_string(tol) + ")");
    }
};

std::string manifests_dir() {
    const char* env = std::getenv("GUIBEE_MANIFESTS");
    return env ? env : "assets/manifests";
}

const std::vector<std::string> kManifestNames = {"atelier", "bazaar", "gazette"};

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("guibee-acc-" + tag + "-" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

ExplorationGraph explore_bundled(const std::string& manifest_name, PolicyKind kind, int steps,
                                 std::uint64_t seed, QTable& table,
                                 const StepObserver& observer = nullptr) {
    SimulatorEnvironment env(
        EnvironmentManifest::load_file(manifests_dir() + "/" + manifest_name + ".json"));
    Oracle oracle(std::make_shared<MockBackend>(&table));
    PolicyConfig cfg;
    cfg.kind = kind;
    cfg.max_steps = steps;
    return run_exploration(env, cfg, oracle, MatchConfig{}, table, seed, observer);
}

std::map<std::string, std::string> dir_digests(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) {
            const auto bytes = read_file(e.path().string());
            out[fs::relative(e.path(), root).string()] =
                to_hex64(Fnv64().update(bytes.data(), bytes.size()).value());
        }
    return out;
}

// --- criterion: Q-update closed form ------------------------------------------

void criterion_q_update_closed_form(Checker& c) {
    const double tol = 1e-9;
    {
        QTable t;
        c.close(t.update_q("k", Outcome::NewScreen, t.q_next_mean({"a", "b", "c"})), 85.0, tol,
                "fresh key + NewScreen with all-default next candidates");
    }
    {
        QTable t;
        double expected = 100.0;
        for (int n = 1; n <= 10; ++n) {
            expected *= 0.4;
            c.close(t.update_q("k", Outcome::SameScreen, 100.0), expected, tol,
                    "SameScreen chain step " + std::to_string(n));
        }
    }
    {
        // scripted mixed trace, every intermediate hand-computed
        QTable t;
        c.close(t.update_q("k1", Outcome::NewScreen, 100.0), 85.0, tol, "trace step 1");
        c.close(t.update_q("k1", Outcome::SameScreen, 0.0), 34.0, tol, "trace step 2");
        const double q_next_3 = t.q_next_mean({"k1", "k3"});  // (34 + 100) / 2 = 67
        c.close(q_next_3, 67.0, tol, "trace step 3 q_next");
        c.close(t.update_q("k2", Outcome::SeenScreen, q_next_3), 50.25, tol, "trace step 3");
        const double q_next_4 = t.q_next_mean({"k1", "k2"});  // (34 + 50.25) / 2
        c.close(t.update_q("k2", Outcome::NewScreen, q_next_4), 0.85 * 42.125, tol,
                "trace step 4");
        c.close(t.update_q("k1", Outcome::SameScreen, 100.0), 13.6, tol, "trace step 5");
    }
}

// --- criterion: matcher suite ---------------------------------------------------

void criterion_matcher_suite(Checker& c) {
    const MatchConfig cfg;

    // identity
    Raster base(64, 48, Rgb{235, 235, 235});
    base.fill_rect(Rect{8, 8, 30, 24}, Rgb{180, 60, 60});
    base.fill_rect(Rect{36, 8, 58, 24}, Rgb{60, 60, 180});
    base.fill_rect(Rect{8, 30, 58, 42}, Rgb{60, 180, 60});
    c.expect(patch_difference(base, base, cfg) == 0.0, "identity score must be exactly 0");

    // <= 2 px shift within 75% overlap classifies identical
    Raster shifted(64, 48, Rgb{235, 235, 235});
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x) {
            const int sx = x - 2;
            const int sy = y - 1;
            if (sx >= 0 && sx < 64 && sy >= 0 && sy < 48) shifted.set(x, y, base.at(sx, sy));
        }
    const double shift_score = patch_difference(base, shifted, cfg);
    c.expect(shift_score <= cfg.identity_threshold,
             "2px shift should classify identical, got score " + std::to_string(shift_score));

    // recolored element is not identical
    Screen sa;
    sa.source_label = "acc";
    sa.screenshot = base;
    sa.dom = DomElement{"root", "body", {"page"}, Rect{0, 0, 64, 48}, false, {}};
    sa.dom.children.push_back(
        DomElement{"b1", "button", {"red"}, Rect{8, 8, 30, 24}, true, {}});
    sa.dom.children.push_back(
        DomElement{"b2", "button", {"blue"}, Rect{36, 8, 58, 24}, true, {}});
    Screen sb = sa;
    sb.screenshot.fill_rect(Rect{36, 8, 58, 24}, Rgb{240, 240, 30});
    const ScreenMatch recolored = screens_equal(sa, sb, cfg);
    c.expect(!recolored.equal, "recolored element must not match");
    c.expect(recolored.score > cfg.identity_threshold,
             "recolored score must exceed the threshold");

    // masked dynamic region change still matches
    Screen sm = sa;
    Mask mask(64, 48);
    mask.set_rect(Rect{33, 5, 61, 27}, true);  // second button plus smoothing margin
    sm.dynamic_mask = mask;
    const ScreenMatch masked = screens_equal(sm, sb, cfg);
    c.expect(masked.equal, "masked dynamic region must match");
    c.expect(masked.score <= cfg.identity_threshold, "masked score must be under the threshold");
}

// --- criterion: graph invariants under randomized exploration -------------------

void criterion_graph_invariants(Checker& c) {
    QTable table;
    std::vector<StepRecord> log;
    const ExplorationGraph graph =
        explore_bundled("atelier", PolicyKind::Random, 1000, 97, table,
                        [&](const StepRecord& r) { log.push_back(r); });

    c.expect(!graph.metadata_copy().aborted, "run must not abort");

    // trace budget
    const auto trace = graph.trace_copy();
    c.expect(trace.size() <= 1000, "trace length must respect the step budget");

    // outcome / q-update coupling: exactly one update per executed step
    c.expect(log.size() == trace.size(), "one q update per executed step");
    const QTableConfig qc;
    for (std::size_t i = 0; i < std::min(log.size(), trace.size()); ++i) {
        if (log[i].action_key != trace[i].action_key || log[i].outcome != trace[i].outcome) {
            c.expect(false, "step " + std::to_string(i + 1) + " update does not pair its outcome");
            break;
        }
        double expect = 0;
        switch (log[i].outcome) {
            case Outcome::NewScreen: expect = qc.gamma_max * log[i].q_next; break;
            case Outcome::SeenScreen: expect = qc.gamma_med * log[i].q_next; break;
            case Outcome::SameScreen: expect = qc.gamma_low * log[i].q_before; break;
        }
        expect = std::clamp(expect, 1e-9, 100.0);
        if (std::abs(log[i].q_after - expect) > 1e-9) {
            c.expect(false, "step " + std::to_string(i + 1) + " q value off the update rule");
            break;
        }
    }

    // node uniqueness under the graph's matcher config
    const auto ids = graph.node_ids();
    const MatchConfig cfg;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Screen a = graph.node_copy(ids[i]);
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (i == j) continue;
            const Screen b = graph.node_copy(ids[j]);
            if (screens_equal(a, b, cfg).equal) {
                c.expect(false, "nodes " + ids[i] + " and " + ids[j] + " are fuzzy-equal");
                i = ids.size();
                break;
            }
        }
    }

    // serialization round trip, byte stable
    TempDir dir("inv");
    save(graph, dir.sub("one"));
    const ExplorationGraph reloaded = load(dir.sub("one"));
    c.expect(graphs_equal(graph, reloaded), "loaded graph must equal the saved one");
    save(reloaded, dir.sub("two"));
    c.expect(dir_digests(dir.sub("one")) == dir_digests(dir.sub("two")),
             "save(load(save(g))) must be byte-identical");
}

// --- criterion: policy ordering --------------------------------------------------

struct PolicyRuns {
    // [manifest][seed] -> curve
    std::map<std::string, std::vector<std::vector<std::pair<int, std::size_t>>>> curves;
    std::map<std::string, std::vector<double>> coverage;  // at final step
};

std::size_t curve_at(const std::vector<std::pair<int, std::size_t>>& curve, int t) {
    std::size_t v = curve.empty() ? 0 : curve.front().second;
    for (const auto& [step, count] : curve) {
        if (step > t) break;
        v = count;
    }
    return v;
}

PolicyRuns run_policy(PolicyKind kind, int steps, const std::vector<std::uint64_t>& seeds) {
    PolicyRuns out;
    for (const auto& name : kManifestNames) {
        const EnvironmentManifest manifest =
            EnvironmentManifest::load_file(manifests_dir() + "/" + name + ".json");
        for (const std::uint64_t seed : seeds) {
            QTable table;
            const ExplorationGraph g = explore_bundled(name, kind, steps, seed, table);
            out.curves[name].push_back(d3c_curve(g));
            out.coverage[name].push_back(coverage_ratio(g, manifest));
        }
    }
    return out;
}

double mean_at(const PolicyRuns& runs, const std::string& manifest, int t) {
    double sum = 0;
    for (const auto& curve : runs.curves.at(manifest)) sum += double(curve_at(curve, t));
    return sum / double(runs.curves.at(manifest).size());
}

// shared between the ordering and coverage criteria; computed once
const std::vector<std::uint64_t> kSeeds = {0, 1, 2};
PolicyRuns& qicrl_runs() {
    static PolicyRuns runs = run_policy(PolicyKind::QICRL, 400, kSeeds);
    return runs;
}
PolicyRuns& random_runs() {
    static PolicyRuns runs = run_policy(PolicyKind::Random, 400, kSeeds);
    return runs;
}

void criterion_policy_ordering(Checker& c) {
    PolicyRuns& qicrl = qicrl_runs();
    PolicyRuns& random = random_runs();
    const PolicyRuns icrl = run_policy(PolicyKind::ICRL, 200, kSeeds);

    double qicrl_avg_200 = 0;
    double icrl_avg_200 = 0;
    for (const auto& name : kManifestNames) {
        const double q100 = mean_at(qicrl, name, 100);
        const double q200 = mean_at(qicrl, name, 200);
        const double r100 = mean_at(random, name, 100);
        const double r200 = mean_at(random, name, 200);
        const double i200 = mean_at(icrl, name, 200);
        qicrl_avg_200 += q200;
        icrl_avg_200 += i200;
        std::ostringstream line;
        line << "    " << name << ": D3C@100 qicrl " << q100 << " vs random " << r100
             << "; D3C@200 qicrl " << q200 << " vs icrl " << i200 << " vs random " << r200;
        std::cout << line.str() << "\n";

        c.expect(q200 > r200, name + ": mean D3C(QICRL) must beat Random at t=200");
        c.expect(q200 >= 1.10 * r200,
                 name + ": QICRL must beat Random by >= 10% relative mean D3C at t=200 (got " +
                     std::to_string(q200 / r200) + "x)");
    }
    qicrl_avg_200 /= double(kManifestNames.size());
    icrl_avg_200 /= double(kManifestNames.size());
    std::cout << "    averaged D3C@200: qicrl " << qicrl_avg_200 << " vs icrl " << icrl_avg_200
              << "\n";
    c.expect(qicrl_avg_200 >= icrl_avg_200,
             "QICRL must be >= ICRL on mean D3C at t=200 averaged across manifests");
}

// --- criterion: coverage oracle ---------------------------------------------------

void criterion_coverage_oracle(Checker& c) {
    PolicyRuns& qicrl = qicrl_runs();
    PolicyRuns& random = random_runs();
    for (const auto& name : kManifestNames) {
        const EnvironmentManifest manifest =
            EnvironmentManifest::load_file(manifests_dir() + "/" + name + ".json");
        const std::size_t truth = manifest.bfs_reachable_count();
        c.expect(truth == manifest.screens.size(),
                 name + ": BFS ground truth should reach every declared screen");

        auto mean = [](const std::vector<double>& xs) {
            double s = 0;
            for (double x : xs) s += x;
            return s / double(xs.size());
        };
        const double q = mean(qicrl.coverage.at(name));
        const double r = mean(random.coverage.at(name));
        std::cout << "    " << name << ": coverage@400 qicrl " << q << " vs random " << r
                  << " (truth " << truth << " screens)\n";
        c.expect(q <= 1.0 + 1e-12 && r <= 1.0 + 1e-12,
                 name + ": coverage ratios must never exceed the BFS truth");
        c.expect(q >= r, name + ": QICRL coverage at T=400 must be >= Random's");
    }
}

// --- criterion: annotation contract ----------------------------------------------

void criterion_annotation_contract(Checker& c) {
    QTable table;
    const ExplorationGraph graph = explore_bundled("atelier", PolicyKind::QICRL, 60, 12, table);
    std::size_t click_edges = 0;
    for (const Edge& e : graph.edges_copy())
        click_edges += e.action.type == ActionType::Click ? 1 : 0;
    c.expect(click_edges >= 20, "run must produce at least 20 click edges, got " +
                                    std::to_string(click_edges));

    TempDir dir("ann");
    const std::string cassette = dir.sub("annotation.jsonl");

    // record: scripted over-cap responses for the first two edges, heuristic
    // defaults after; the cassette captures everything
    auto mock = std::make_shared<MockBackend>();
    mock->script_task(OracleTask::GenerateQueries,
                      R"({"analysis":"overfull",
                          "system_1_queries":["a","b","c","d","e","f","g","h"],
                          "system_2_queries":["1","2","3","4","5","6","7"]})");
    mock->script_task(OracleTask::GenerateQueries,
                      R"({"analysis":"also overfull",
                          "system_1_queries":["q1","q2","q3","q4","q5","q6","q7"],
                          "system_2_queries":["s1","s2","s3","s4","s5","s6"]})");
    AnnotateResult recorded;
    {
        Oracle oracle(CassetteBackend::record(cassette, mock));
        recorded = annotate_graph(graph, oracle);
    }

    // replay: identical records with zero live traffic
    const std::size_t live_calls = mock->calls();
    AnnotateResult replayed;
    {
        Oracle oracle(CassetteBackend::replay(cassette));
        replayed = annotate_graph(graph, oracle);
    }
    c.expect(mock->calls() == live_calls, "replay must not touch the live backend");
    c.expect(recorded.records == replayed.records, "replayed records must match recorded ones");

    // contract checks on every record
    std::map<std::string, std::pair<int, int>> per_edge;
    for (const GroundingRecord& r : recorded.records) {
        if (!r.target_box.contains(r.target_point)) {
            c.expect(false, "point-in-box violated on " + r.edge_ref);
            break;
        }
        auto& counts = per_edge[r.edge_ref];
        (r.kind == QueryKind::System1 ? counts.first : counts.second) += 1;
    }
    for (const auto& [edge, counts] : per_edge) {
        c.expect(counts.first <= 6, edge + ": System1 cap exceeded");
        c.expect(counts.second <= 5, edge + ": System2 cap exceeded");
    }
    c.expect(!per_edge.empty(), "annotation must produce records");

    // re-export is digest-identical
    export_dataset(recorded.records, DatasetVariant::VisionA11y, dir.sub("one"), graph);
    export_dataset(recorded.records, DatasetVariant::VisionA11y, dir.sub("two"), graph);
    c.expect(dir_digests(dir.sub("one")) == dir_digests(dir.sub("two")),
             "re-export must be digest-identical");
}

// --- criterion: grounding accuracy metric -----------------------------------------

void criterion_grounding_metric(Checker& c) {
    auto gold = [](int x0, int y0, int x1, int y1) {
        GroundingRecord r;
        r.query = "q";
        r.target_box = Rect{x0, y0, x1, y1};
        r.target_point = r.target_box.center();
        return r;
    };

    std::vector<GroundingRecord> golds;
    std::vector<Point> preds;
    const int n = 10;
    const int k = 4;
    for (int i = 0; i < n; ++i) {
        golds.push_back(gold(i * 15, 3, i * 15 + 12, 13));
        preds.push_back(i < k ? golds.back().target_box.center() : Point{-9, -9});
    }
    c.close(grounding_accuracy(preds, golds), double(k) / n, 1e-12, "k of n fixture");

    const std::vector<GroundingRecord> one = {gold(10, 10, 20, 20)};
    c.close(grounding_accuracy({Point{10, 10}}, one), 1.0, 0, "min corner is inside");
    c.close(grounding_accuracy({Point{19, 19}}, one), 1.0, 0, "last interior pixel is inside");
    c.close(grounding_accuracy({Point{20, 19}}, one), 0.0, 0, "x1 edge is outside");
    c.close(grounding_accuracy({Point{19, 20}}, one), 0.0, 0, "y1 edge is outside");
}

// --- criterion: determinism -------------------------------------------------------

void criterion_determinism(Checker& c) {
    TempDir dir("det");
    for (const char* tag : {"one", "two"}) {
        QTable table;
        const ExplorationGraph g = explore_bundled("gazette", PolicyKind::QICRL, 120, 5, table);
        save(g, dir.sub(tag));
    }
    c.expect(dir_digests(dir.sub("one")) == dir_digests(dir.sub("two")),
             "two identically seeded runs must produce byte-identical archives");
}

// --- harness ----------------------------------------------------------------------

struct Criterion {
    std::string name;
    std::function<void(Checker&)> fn;
};

const std::vector<Criterion> kCriteria = {
    {"q_update_closed_form", criterion_q_update_closed_form},
    {"matcher_suite", criterion_matcher_suite},
    {"graph_invariants", criterion_graph_invariants},
    {"policy_ordering", criterion_policy_ordering},
    {"coverage_oracle", criterion_coverage_oracle},
    {"annotation_contract", criterion_annotation_contract},
    {"grounding_metric", criterion_grounding_metric},
    {"determinism", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
    std::string only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--list") == 0) {
            for (const auto& c : kCriteria) std::cout << c.name << "\n";
            return 0;
        }
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
    }

    int failures = 0;
    for (const auto& criterion : kCriteria) {
        if (!only.empty() && criterion.name != only) continue;
        Checker checker;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.fn(checker);
        } catch (const std::exception& e) {
            checker.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.1fs", secs);
        if (checker.failures.empty()) {
            std::cout << "[PASS] " << criterion.name << " (" << timing << ")\n";
        } else {
            ++failures;
            std::cout << "[FAIL] " << criterion.name << " (" << timing << ")\n";
            for (const auto& f : checker.failures) std::cout << "       " << f << "\n";
        }
    }
    if (!only.empty() && failures == 0) {
        bool found = false;
        for (const auto& c : kCriteria) found = found || c.name == only;
        if (!found) {
            std::cerr << "unknown criterion: " << only << "\n";
            return 2;
        }
    }
    return failures == 0 ? 0 : 1;
}
