#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "guibee/q_store.hpp"
#include "guibee/raster.hpp"
#include "guibee/screen.hpp"

namespace guibee {

enum class OracleTask { ScoreQhat, DescribeTransition, GenerateQueries, RankCoverage };

std::string to_string(OracleTask t);
OracleTask oracle_task_from_string(const std::string& s);

// One rendered model call: the prompt from a versioned template plus the
// images with set-of-mark boxes already burned in. `metadata` is visible only
// to test backends; it is excluded from the hash and never leaves the process.
struct OracleRequest {
    OracleTask task = OracleTask::ScoreQhat;
    std::string prompt;
    std::vector<Raster> images;
    std::map<std::string, std::string> metadata;

    std::string request_hash() const;  // digest of (task, prompt, image digests)
};

// Natural-language summary of one graph edge (d^k).
struct TransitionDescription {
    std::string action_key;
    std::string consequence;
    std::string clicked_element;
    bool fallback = false;  // oracle failed, template text used

    bool operator==(const TransitionDescription&) const = default;
};

std::string render_description_line(const TransitionDescription& d);

struct QueryBundle {
    std::string analysis;
    std::vector<std::string> system1;  // at most 6
    std::vector<std::string> system2;  // at most 5
};

// --- backends ----------------------------------------------------------------

class OracleBackend {
public:
    virtual ~OracleBackend() = default;

    std::string run(const OracleRequest& req) {
        ++calls_;
        return complete(req);
    }
    std::size_t calls() const { return calls_; }
    virtual std::string name() const = 0;

protected:
    virtual std::string complete(const OracleRequest& req) = 0;

private:
    std::size_t calls_ = 0;
};

// Deterministic test double. Resolution order: exact request_hash script,
// then a per-task FIFO script, then a heuristic default. When bound to a
// QTable the ScoreQhat default echoes get_q of the request's subject key,
// which makes in-context scoring collapse to a Q-table argmax.
class MockBackend : public OracleBackend {
public:
    MockBackend() = default;
    explicit MockBackend(const QTable* table) : table_(table) {}

    void script_hash(const std::string& request_hash, std::string response);
    void script_task(OracleTask task, std::string response);  // FIFO per task
    void bind_table(const QTable* table) { table_ = table; }

    std::string name() const override { return "mock"; }

protected:
    std::string complete(const OracleRequest& req) override;

private:
    std::string default_response(const OracleRequest& req) const;

    const QTable* table_ = nullptr;
    std::map<std::string, std::string> by_hash_;
    std::map<OracleTask, std::vector<std::string>> by_task_;
};

// Record/replay log. Replay answers from the file alone and treats a missing
// recording as a hard error; it never falls through to a live backend.
class CassetteBackend : public OracleBackend {
public:
    static std::unique_ptr<CassetteBackend> record(const std::string& path,
                                                   std::shared_ptr<OracleBackend> inner);
    static std::unique_ptr<CassetteBackend> replay(const std::string& path);

    std::string name() const override;

protected:
    std::string complete(const OracleRequest& req) override;

private:
    CassetteBackend() = default;

    bool recording_ = false;
    std::string path_;
    std::shared_ptr<OracleBackend> inner_;
    std::map<std::string, std::string> entries_;
};

// Chat-completions-style web API client. Configured entirely from the
// environment: ORACLE_URL, ORACLE_KEY, ORACLE_MODEL, ORACLE_RPS.
struct RemoteConfig {
    std::string url;
    std::string key;
    std::string model;
    double requests_per_second = 1.0;

    static RemoteConfig from_env();
};

class RemoteBackend : public OracleBackend {
public:
    explicit RemoteBackend(RemoteConfig cfg);
    std::string name() const override { return "remote"; }

    // Exposed for tests.
    static nlohmann::json build_payload(const RemoteConfig& cfg, const OracleRequest& req);

protected:
    std::string complete(const OracleRequest& req) override;

private:
    RemoteConfig cfg_;
    double min_interval_s_;
    std::int64_t last_request_us_ = 0;
};

// --- queries -----------------------------------------------------------------

struct QhatExample {
    Rect box;
    std::optional<double> q;  // absent in the Q-free variant
};

struct QhatQuery {
    std::string environment;
    const Raster* screenshot = nullptr;
    Rect candidate_box;
    std::vector<QhatExample> examples;        // up to two, marked as boxes 2 and 3
    std::optional<std::string> plain_example;  // text-only example, no Q value
    std::vector<std::string> state_lines;      // rendered transition descriptions
    std::string subject_key;
    bool subject_executed = false;
};

struct DescribeQuery {
    const Raster* from_screenshot = nullptr;
    Rect box;
    const Raster* to_screenshot = nullptr;
    std::string subject_label;  // e.g. "button.nav primary"
    std::string to_label;
};

struct GenerateQueriesQuery {
    const Raster* from_screenshot = nullptr;
    Rect box;
    const Raster* to_screenshot = nullptr;
    Raster element_crop;
    std::string subject_label;
    std::string to_label;
};

enum class CoverageChoice { A, B };

struct CoverageVerdict {
    CoverageChoice choice = CoverageChoice::A;
    bool tie_warning = false;
};

// --- facade ------------------------------------------------------------------

struct OracleConfig {
    int retries = 2;  // attempts = 1 + retries
};

class Oracle {
public:
    explicit Oracle(std::shared_ptr<OracleBackend> backend, OracleConfig cfg = {});

    // Numeric Q estimate clamped to [0, 100]. Throws OracleParseError once
    // retries are exhausted.
    double predict_qhat(const QhatQuery& q);

    // Two-key structured description; "box 1" mentions are stripped.
    TransitionDescription describe_transition(const DescribeQuery& q, const std::string& action_key);

    QueryBundle generate_queries(const GenerateQueriesQuery& q);

    CoverageVerdict rank_coverage(const std::vector<TransitionDescription>& a,
                                  const std::vector<TransitionDescription>& b);

    OracleBackend& backend() { return *backend_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    void clear_warnings() { warnings_.clear(); }

private:
    std::string call_with_retries(const OracleRequest& req,
                                  const std::function<bool(const std::string&)>& accept);
    void warn(std::string msg) { warnings_.push_back(std::move(msg)); }

    std::shared_ptr<OracleBackend> backend_;
    OracleConfig cfg_;
    std::vector<std::string> warnings_;
};

// --- parsing helpers (exposed for tests) --------------------------------------

// First balanced JSON object anywhere in the text, tolerating code fences and
// surrounding prose.
std::optional<nlohmann::json> extract_first_json(const std::string& text);
std::optional<double> extract_first_number(const std::string& text);
std::string strip_box_mentions(const std::string& text);

// Set-of-mark rendering: outlined boxes with small numeric labels.
Raster mark_boxes(const Raster& base, const std::vector<std::pair<Rect, int>>& boxes);

}  // namespace guibee
