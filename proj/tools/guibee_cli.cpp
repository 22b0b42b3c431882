// guibee: autonomous GUI exploration, annotation and evaluation driver.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "guibee/adapter.hpp"
#include "guibee/annotate.hpp"
#include "guibee/environment.hpp"
#include "guibee/errors.hpp"
#include "guibee/graph.hpp"
#include "guibee/metrics.hpp"
#include "guibee/oracle.hpp"
#include "guibee/policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace guibee;

namespace {

struct OracleFlags {
    std::string backend = "mock";
    std::string cassette_path;
    bool record = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--oracle", backend, "Oracle backend: mock, cassette or remote")
            ->check(CLI::IsMember({"mock", "cassette", "remote"}))
            ->capture_default_str();
        cmd->add_option("--cassette", cassette_path, "Cassette file for record/replay");
        cmd->add_flag("--record", record, "Record through the cassette instead of replaying");
    }

    std::shared_ptr<OracleBackend> make(const QTable* table) const {
        if (backend == "remote") return std::make_shared<RemoteBackend>(RemoteConfig::from_env());
        if (backend == "cassette") {
            if (cassette_path.empty()) throw Error("--cassette is required with --oracle cassette");
            if (record) {
                std::shared_ptr<OracleBackend> inner;
                if (std::getenv("ORACLE_URL"))
                    inner = std::make_shared<RemoteBackend>(RemoteConfig::from_env());
                else
                    inner = std::make_shared<MockBackend>(table);
                return CassetteBackend::record(cassette_path, inner);
            }
            return CassetteBackend::replay(cassette_path);
        }
        return std::make_shared<MockBackend>(table);
    }
};

struct MatcherFlags {
    MatchConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--identity-threshold", cfg.identity_threshold,
                        "Fuzzy-match identity threshold")
            ->capture_default_str();
        cmd->add_option("--min-overlap", cfg.min_overlap, "Minimum shift overlap fraction")
            ->capture_default_str();
        cmd->add_option("--gaussian-sigma", cfg.gaussian_sigma, "Smoothing sigma (pixels)")
            ->capture_default_str();
        cmd->add_option("--gaussian-kernel", cfg.gaussian_kernel, "Smoothing kernel size")
            ->capture_default_str();
        cmd->add_option("--shift-step", cfg.shift_step, "Shift search step (pixels)")
            ->capture_default_str();
        cmd->add_option("--dynamic-frames", cfg.dynamic_frames,
                        "Frames sampled to detect animated regions")
            ->capture_default_str();
        cmd->add_option("--max-shift-frac", cfg.max_shift_frac,
                        "Shift bound as a fraction of patch size (0 disables shifts)")
            ->capture_default_str();
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write " + path);
    f << text;
}

json graph_summary(const ExplorationGraph& graph, int depth) {
    const GraphMetadata meta = graph.metadata_copy();
    json s;
    s["environment"] = meta.environment;
    s["seed"] = meta.seed;
    s["nodes"] = graph.node_count();
    s["edges"] = graph.edge_count();
    s["steps_executed"] = graph.trace_copy().size();
    s["d3c"] = d3c(graph, D3CConfig{depth});
    s["aborted"] = meta.aborted;
    if (meta.aborted) s["abort_reason"] = meta.abort_reason;
    s["config"] = meta.config;
    return s;
}

// --- explore ---------------------------------------------------------------------

int cmd_explore(const std::string& manifest_path, const std::string& adapter,
                const std::string& policy, std::uint64_t seed, int steps, std::size_t candidates,
                int signature_depth, int retries, const OracleFlags& oracle_flags,
                const MatcherFlags& matcher_flags, const std::string& out_dir) {
    std::unique_ptr<Environment> env;
    if (!manifest_path.empty())
        env = std::make_unique<SimulatorEnvironment>(EnvironmentManifest::load_file(manifest_path));
    else {
        const auto colon = adapter.rfind(':');
        if (colon == std::string::npos) throw Error("--adapter expects host:port");
        env = AdapterClient::connect_tcp(adapter.substr(0, colon),
                                         std::stoi(adapter.substr(colon + 1)));
    }

    PolicyConfig cfg;
    cfg.kind = policy_kind_from_string(policy);
    cfg.max_steps = steps;
    cfg.candidates_per_step = candidates;
    cfg.oracle_retries = retries;
    cfg.signature_depth = signature_depth;

    QTable table;
    Oracle oracle(oracle_flags.make(&table), OracleConfig{retries});

    ExplorationGraph graph =
        run_exploration(*env, cfg, oracle, matcher_flags.cfg, table, seed);
    save(graph, out_dir);

    const json summary = graph_summary(graph, signature_depth);
    write_text((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return graph.metadata_copy().aborted ? 1 : 0;
}

// --- annotate --------------------------------------------------------------------

int cmd_annotate(const std::string& archive, const std::string& out_dir,
                 const std::string& variant_name, bool jitter, std::uint64_t jitter_seed,
                 int retries, const OracleFlags& oracle_flags) {
    const ExplorationGraph graph = load(archive);
    Oracle oracle(oracle_flags.make(nullptr), OracleConfig{retries});

    AnnotateOptions opt;
    opt.jitter_points = jitter;
    opt.jitter_seed = jitter_seed;
    const AnnotateResult result = annotate_graph(graph, oracle, opt);

    const DatasetVariant variant = variant_name == "vision_a11y" ? DatasetVariant::VisionA11y
                                                                 : DatasetVariant::VisionOnly;
    export_dataset(result.records, variant, out_dir, graph);

    json summary;
    summary["records"] = result.records.size();
    summary["system2_ratio"] = system2_ratio(result.records);
    summary["annotated_edges"] = result.annotated_edges;
    summary["skipped_edges"] = result.skipped_edges;
    summary["scroll_edges"] = result.scroll_edges;
    summary["variant"] = to_string(variant);
    summary["config"] = {{"archive", archive},
                         {"jitter_points", jitter},
                         {"jitter_seed", jitter_seed},
                         {"oracle_backend", oracle.backend().name()},
                         {"oracle_retries", retries}};
    write_text((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

// --- eval -----------------------------------------------------------------------

int cmd_eval(const std::string& predictions_path, const std::string& dataset_path,
             const std::string& out_path) {
    const LoadedDataset dataset = load_dataset(dataset_path);

    std::ifstream pf(predictions_path);
    if (!pf) throw Error("cannot open predictions file: " + predictions_path);
    std::vector<Point> predictions;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(pf, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("x") || !j.contains("y"))
            throw Error(predictions_path + " line " + std::to_string(lineno) +
                        ": expected {\"x\":..,\"y\":..}");
        predictions.push_back(Point{j["x"].get<int>(), j["y"].get<int>()});
    }

    const double overall = grounding_accuracy(predictions, dataset.records);

    std::vector<Point> p1, p2;
    std::vector<GroundingRecord> g1, g2;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        if (dataset.records[i].kind == QueryKind::System1) {
            p1.push_back(predictions[i]);
            g1.push_back(dataset.records[i]);
        } else {
            p2.push_back(predictions[i]);
            g2.push_back(dataset.records[i]);
        }
    }

    json report;
    report["total"] = dataset.records.size();
    report["accuracy"] = overall;
    report["system1"] = {{"count", g1.size()},
                         {"accuracy", g1.empty() ? json() : json(grounding_accuracy(p1, g1))}};
    report["system2"] = {{"count", g2.size()},
                         {"accuracy", g2.empty() ? json() : json(grounding_accuracy(p2, g2))}};
    report["config"] = {{"predictions", predictions_path}, {"dataset", dataset_path}};
    std::cout << report.dump(2) << "\n";
    if (!out_path.empty()) write_text(out_path, report.dump(2) + "\n");
    return 0;
}

// --- compare ---------------------------------------------------------------------

int cmd_compare(const std::vector<std::string>& manifest_paths, const std::string& policies_csv,
                const std::string& seeds_csv, int steps, std::size_t candidates, int retries,
                const MatcherFlags& matcher_flags, int signature_depth,
                const std::string& out_dir) {
    std::vector<EnvironmentManifest> manifests;
    for (const auto& path : manifest_paths)
        manifests.push_back(EnvironmentManifest::load_file(path));

    std::vector<PolicyKind> policies;
    for (const auto& name : CLI::detail::split(policies_csv, ','))
        policies.push_back(policy_kind_from_string(name));
    std::vector<std::uint64_t> seeds;
    for (const auto& s : CLI::detail::split(seeds_csv, ',')) seeds.push_back(std::stoull(s));
    if (policies.empty() || seeds.empty()) throw Error("need at least one policy and one seed");

    CompareOptions opt;
    opt.policy.candidates_per_step = candidates;
    opt.policy.oracle_retries = retries;
    opt.policy.signature_depth = signature_depth;
    opt.matcher = matcher_flags.cfg;
    opt.d3c.depth = signature_depth;

    const MultiCompareReport multi =
        compare_policies_multi(manifests, policies, seeds, steps, opt);

    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "report.txt").string(), report_to_text(multi));

    json jreport;
    jreport["max_steps"] = steps;
    jreport["seeds"] = seeds;
    json jenvs = json::array();
    for (const auto& report : multi.per_environment) {
        const std::string suffix =
            multi.per_environment.size() > 1 ? "_" + report.environment : "";
        write_text((fs::path(out_dir) / ("plot_data" + suffix + ".tsv")).string(),
                   report_to_plot_data(report));

        json jenv;
        jenv["environment"] = report.environment;
        jenv["ranking"] = report.ranking;
        jenv["notices"] = report.notices;
        json jp = json::array();
        for (const auto& p : report.policies) {
            json e;
            e["policy"] = to_string(p.policy);
            e["aborted_runs"] = p.aborted_runs;
            json at = json::object();
            for (const auto& [t, ms] : p.d3c_at)
                at[std::to_string(t)] = {{"mean", ms.first}, {"stddev", ms.second}};
            e["d3c"] = at;
            e["final_coverage"] = p.final_coverage;
            jp.push_back(std::move(e));
        }
        jenv["policies"] = jp;
        jenvs.push_back(std::move(jenv));
    }
    jreport["environments"] = jenvs;
    if (multi.per_environment.size() > 1) {
        // the cross-environment average, the aggregation the headline plot uses
        json avg = json::object();
        for (const auto& [policy, by_t] : multi.averaged_d3c) {
            json at = json::object();
            for (const auto& [t, mean] : by_t) at[std::to_string(t)] = mean;
            avg[to_string(policy)] = at;
        }
        jreport["averaged_d3c"] = avg;

        std::string tsv = "t\tpolicy\tmean\tstddev\n";
        char buf[128];
        for (const auto& [policy, by_t] : multi.averaged_d3c)
            for (const auto& [t, mean] : by_t) {
                // stddev of the per-environment means
                std::vector<double> env_means;
                for (const auto& report : multi.per_environment)
                    for (const auto& p : report.policies)
                        if (p.policy == policy && p.d3c_at.count(t))
                            env_means.push_back(p.d3c_at.at(t).first);
                double var = 0;
                for (double m : env_means) var += (m - mean) * (m - mean);
                const double sd =
                    env_means.size() > 1 ? std::sqrt(var / double(env_means.size() - 1)) : 0.0;
                std::snprintf(buf, sizeof buf, "%d\t%s\t%.6f\t%.6f\n", t,
                              to_string(policy).c_str(), mean, sd);
                tsv += buf;
            }
        write_text((fs::path(out_dir) / "plot_data_averaged.tsv").string(), tsv);
    }
    jreport["config"] = {{"manifests", manifest_paths},
                         {"candidates_per_step", candidates},
                         {"oracle_retries", retries},
                         {"signature_depth", signature_depth}};
    write_text((fs::path(out_dir) / "report.json").string(), jreport.dump(2) + "\n");

    std::cout << report_to_text(multi);
    return 0;
}

// --- report ----------------------------------------------------------------------

int cmd_report(const std::string& archive, const std::string& curve_path, int depth) {
    const ExplorationGraph graph = load(archive);
    std::cout << graph_summary(graph, depth).dump(2) << "\n";
    if (!curve_path.empty()) {
        std::string out = "t\td3c\n";
        for (const auto& [t, count] : d3c_curve(graph, D3CConfig{depth}))
            out += std::to_string(t) + "\t" + std::to_string(count) + "\n";
        write_text(curve_path, out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GUI exploration agent: explore environments, annotate grounding data, "
                 "evaluate and compare policies"};
    app.require_subcommand(1);

    // explore
    auto* explore = app.add_subcommand("explore", "Run one exploration and write a graph archive");
    std::string manifest_path, adapter, policy = "qicrl", out_dir;
    std::uint64_t seed = 0;
    int steps = 400;
    std::size_t candidates = 3;
    int signature_depth = 3;
    int retries = 2;
    OracleFlags explore_oracle;
    MatcherFlags explore_matcher;
    auto* manifest_opt =
        explore->add_option("--manifest", manifest_path, "Simulator environment manifest");
    explore->add_option("--adapter", adapter, "Remote adapter address host:port")
        ->excludes(manifest_opt);
    explore->add_option("--policy", policy, "qicrl, icrl or random")
        ->check(CLI::IsMember({"qicrl", "icrl", "random"}))
        ->capture_default_str();
    explore->add_option("--seed", seed, "Run seed")->capture_default_str();
    explore->add_option("--steps", steps, "Maximum exploration steps T")->capture_default_str();
    explore->add_option("--candidates", candidates, "Candidates sampled per step H")
        ->capture_default_str();
    explore->add_option("--signature-depth", signature_depth, "DOM signature depth")
        ->capture_default_str();
    explore->add_option("--retries", retries, "Oracle retries")->capture_default_str();
    explore->add_option("--out", out_dir, "Archive output directory")->required();
    explore_oracle.attach(explore);
    explore_matcher.attach(explore);

    // annotate
    auto* annotate = app.add_subcommand("annotate", "Turn a graph archive into grounding data");
    std::string annotate_archive, annotate_out, variant = "vision_only";
    bool jitter = false;
    std::uint64_t jitter_seed = 0;
    int annotate_retries = 2;
    OracleFlags annotate_oracle;
    annotate->add_option("--archive", annotate_archive, "Graph archive directory")->required();
    annotate->add_option("--out", annotate_out, "Dataset output directory")->required();
    annotate->add_option("--variant", variant, "vision_only or vision_a11y")
        ->check(CLI::IsMember({"vision_only", "vision_a11y"}))
        ->capture_default_str();
    annotate->add_flag("--jitter", jitter, "Sample target points instead of exact centers");
    annotate->add_option("--jitter-seed", jitter_seed, "Seed for --jitter")->capture_default_str();
    annotate->add_option("--retries", annotate_retries, "Oracle retries")->capture_default_str();
    annotate_oracle.attach(annotate);

    // eval
    auto* eval = app.add_subcommand("eval", "Score predicted points against a gold dataset");
    std::string predictions_path, dataset_path, eval_out;
    eval->add_option("--predictions", predictions_path, "JSONL of {\"x\":..,\"y\":..} per record")
        ->required();
    eval->add_option("--dataset", dataset_path, "Gold dataset directory")->required();
    eval->add_option("--out", eval_out, "Optional JSON report path");

    // compare
    auto* compare = app.add_subcommand("compare", "Run the policy comparison experiment");
    std::vector<std::string> cmp_manifests;
    std::string cmp_policies = "qicrl,icrl,random", cmp_seeds = "0,1,2", cmp_out;
    int cmp_steps = 400;
    std::size_t cmp_candidates = 3;
    int cmp_retries = 2;
    int cmp_depth = 3;
    MatcherFlags cmp_matcher;
    compare->add_option("--manifest", cmp_manifests,
                        "Simulator environment manifest (repeat to average across environments)")
        ->required();
    compare->add_option("--policies", cmp_policies, "Comma-separated policy list")
        ->capture_default_str();
    compare->add_option("--seeds", cmp_seeds, "Comma-separated seed list")->capture_default_str();
    compare->add_option("--steps", cmp_steps, "Maximum exploration steps T")->capture_default_str();
    compare->add_option("--candidates", cmp_candidates, "Candidates per step H")
        ->capture_default_str();
    compare->add_option("--retries", cmp_retries, "Oracle retries")->capture_default_str();
    compare->add_option("--signature-depth", cmp_depth, "DOM signature depth")
        ->capture_default_str();
    compare->add_option("--out", cmp_out, "Report output directory")->required();
    cmp_matcher.attach(compare);

    // report
    auto* report = app.add_subcommand("report", "Summarize an existing graph archive");
    std::string report_archive, report_curve;
    int report_depth = 3;
    report->add_option("--archive", report_archive, "Graph archive directory")->required();
    report->add_option("--curve", report_curve, "Write the D3C curve as TSV");
    report->add_option("--depth", report_depth, "DOM signature depth")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (explore->parsed()) {
            if (manifest_path.empty() && adapter.empty())
                throw Error("explore needs --manifest or --adapter");
            return cmd_explore(manifest_path, adapter, policy, seed, steps, candidates,
                               signature_depth, retries, explore_oracle, explore_matcher, out_dir);
        }
        if (annotate->parsed())
            return cmd_annotate(annotate_archive, annotate_out, variant, jitter, jitter_seed,
                                annotate_retries, annotate_oracle);
        if (eval->parsed()) return cmd_eval(predictions_path, dataset_path, eval_out);
        if (compare->parsed())
            return cmd_compare(cmp_manifests, cmp_policies, cmp_seeds, cmp_steps, cmp_candidates,
                               cmp_retries, cmp_matcher, cmp_depth, cmp_out);
        if (report->parsed()) return cmd_report(report_archive, report_curve, report_depth);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
