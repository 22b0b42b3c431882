#include "guibee/oracle.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>

#include "guibee/errors.hpp"
#include "guibee/hash.hpp"
#include "prompts_data.hpp"

namespace guibee {

using nlohmann::json;

std::string to_string(OracleTask t) {
    switch (t) {
        case OracleTask::ScoreQhat: return "score_qhat";
        case OracleTask::DescribeTransition: return "describe_transition";
        case OracleTask::GenerateQueries: return "generate_queries";
        case OracleTask::RankCoverage: return "rank_coverage";
    }
    return "?";
}

OracleTask oracle_task_from_string(const std::string& s) {
    if (s == "score_qhat") return OracleTask::ScoreQhat;
    if (s == "describe_transition") return OracleTask::DescribeTransition;
    if (s == "generate_queries") return OracleTask::GenerateQueries;
    if (s == "rank_coverage") return OracleTask::RankCoverage;
    throw Error("unknown oracle task: " + s);
}

std::string OracleRequest::request_hash() const {
    Fnv64 h;
    h.field(to_string(task));
    h.field(prompt);
    for (const auto& img : images) h.field(to_hex64(img.digest()));
    return h.hex();
}

std::string render_description_line(const TransitionDescription& d) {
    return "clicked " + d.clicked_element + "; consequence: " + d.consequence;
}

// --- text utilities ------------------------------------------------------------

namespace {

std::string replace_all(std::string text, const std::string& slot, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(slot, pos)) != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos += value.size();
    }
    return text;
}

std::string format_number(double v) { return json(v).dump(); }

}  // namespace

std::optional<json> extract_first_json(const std::string& text) {
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"')
                in_string = true;
            else if (c == '{')
                ++depth;
            else if (c == '}') {
                --depth;
                if (depth == 0) {
                    json parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;  // malformed candidate; resume scanning after `start`
                }
            }
        }
    }
    return std::nullopt;
}

std::optional<double> extract_first_number(const std::string& text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool digit = std::isdigit(static_cast<unsigned char>(c));
        const bool signed_digit = (c == '-' || c == '.') && i + 1 < text.size() &&
                                  std::isdigit(static_cast<unsigned char>(text[i + 1]));
        if (!digit && !signed_digit) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(text.substr(i), &used);
            if (used > 0) return v;
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

std::string strip_box_mentions(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
    while (i < text.size()) {
        if (i + 4 < text.size() && lower(text[i]) == 'b' && lower(text[i + 1]) == 'o' &&
            lower(text[i + 2]) == 'x' && (text[i + 3] == ' ' || text[i + 3] == '_') &&
            text[i + 4] == '1' &&
            (i + 5 >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i + 5])))) {
            i += 5;
            // drop a space we just orphaned
            if (!out.empty() && out.back() == ' ' && i < text.size() && text[i] == ' ') ++i;
            continue;
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

Raster mark_boxes(const Raster& base, const std::vector<std::pair<Rect, int>>& boxes) {
    Raster out = base;
    for (const auto& [rect, label] : boxes) {
        Rgb color{128, 128, 128};
        if (label == 1) color = Rgb{220, 30, 30};
        if (label == 2) color = Rgb{30, 160, 30};
        if (label == 3) color = Rgb{40, 70, 220};
        out.draw_frame(rect, color, 3);
        out.draw_label(Point{rect.x0 + 4, rect.y0 + 4}, label, color);
    }
    return out;
}

// --- mock backend ----------------------------------------------------------------

namespace {
std::mutex g_mock_mu;
}

void MockBackend::script_hash(const std::string& request_hash, std::string response) {
    std::lock_guard lock(g_mock_mu);
    by_hash_[request_hash] = std::move(response);
}

void MockBackend::script_task(OracleTask task, std::string response) {
    std::lock_guard lock(g_mock_mu);
    by_task_[task].push_back(std::move(response));
}

std::string MockBackend::complete(const OracleRequest& req) {
    std::lock_guard lock(g_mock_mu);
    if (auto it = by_hash_.find(req.request_hash()); it != by_hash_.end()) return it->second;
    if (auto it = by_task_.find(req.task); it != by_task_.end() && !it->second.empty()) {
        std::string r = it->second.front();
        it->second.erase(it->second.begin());
        return r;
    }
    return default_response(req);
}

std::string MockBackend::default_response(const OracleRequest& req) const {
    auto meta = [&](const char* k) {
        auto it = req.metadata.find(k);
        return it == req.metadata.end() ? std::string() : it->second;
    };
    switch (req.task) {
        case OracleTask::ScoreQhat: {
            const std::string key = meta("subject_key");
            if (table_ && !key.empty()) return format_number(table_->get_q(key));
            return "50";
        }
        case OracleTask::DescribeTransition: {
            json j;
            const std::string to = meta("to_label");
            const std::string subject = meta("subject_label");
            j["consequence"] =
                "the view changes to " + (to.empty() ? std::string("another screen") : to);
            j["clicked_element"] = subject.empty() ? std::string("an element") : subject;
            return j.dump();
        }
        case OracleTask::GenerateQueries: {
            const std::string subject = meta("subject_label").empty() ? "the element"
                                                                      : meta("subject_label");
            const std::string to = meta("to_label").empty() ? "the next view" : meta("to_label");
            json j;
            j["analysis"] = "a rectangular control rendered as " + subject;
            j["system_1_queries"] = {"click " + subject, "activate " + subject,
                                     "press " + subject};
            j["system_2_queries"] = {"open " + to, "go to " + to};
            return j.dump();
        }
        case OracleTask::RankCoverage: {
            long a = std::atol(meta("keys_a").c_str());
            long b = std::atol(meta("keys_b").c_str());
            if (a > b) return "A";
            if (b > a) return "B";
            return "TIE";
        }
    }
    return "";
}

// --- cassette backend -------------------------------------------------------------

std::unique_ptr<CassetteBackend> CassetteBackend::record(const std::string& path,
                                                         std::shared_ptr<OracleBackend> inner) {
    auto c = std::unique_ptr<CassetteBackend>(new CassetteBackend());
    c->recording_ = true;
    c->path_ = path;
    c->inner_ = std::move(inner);
    std::ifstream f(path);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        c->entries_.emplace(j.value("hash", ""), j.value("response", ""));
    }
    return c;
}

std::unique_ptr<CassetteBackend> CassetteBackend::replay(const std::string& path) {
    auto c = std::unique_ptr<CassetteBackend>(new CassetteBackend());
    c->recording_ = false;
    c->path_ = path;
    std::ifstream f(path);
    if (!f) throw OracleError("cassette not found: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("hash") || !j.contains("response"))
            throw OracleError("cassette " + path + ": malformed record at line " +
                              std::to_string(lineno));
        c->entries_.emplace(j["hash"].get<std::string>(), j["response"].get<std::string>());
    }
    return c;
}

std::string CassetteBackend::name() const { return recording_ ? "cassette-record" : "cassette-replay"; }

std::string CassetteBackend::complete(const OracleRequest& req) {
    static std::mutex mu;
    std::lock_guard lock(mu);
    const std::string hash = req.request_hash();
    if (auto it = entries_.find(hash); it != entries_.end()) return it->second;
    if (!recording_)
        throw CassetteMissError("cassette " + path_ + ": no recording for request " + hash +
                                " (" + to_string(req.task) + ")");
    const std::string response = inner_->run(req);
    json j;
    j["hash"] = hash;
    j["task"] = to_string(req.task);
    j["response"] = response;
    std::ofstream f(path_, std::ios::app);
    if (!f) throw OracleError("cassette not writable: " + path_);
    f << j.dump() << "\n";
    entries_.emplace(hash, response);
    return response;
}

// --- remote backend ----------------------------------------------------------------

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig cfg;
    const char* url = std::getenv("ORACLE_URL");
    const char* key = std::getenv("ORACLE_KEY");
    const char* model = std::getenv("ORACLE_MODEL");
    const char* rps = std::getenv("ORACLE_RPS");
    if (!url || !*url) throw OracleError("ORACLE_URL is not set");
    cfg.url = url;
    cfg.key = key ? key : "";
    cfg.model = model ? model : "";
    if (cfg.model.empty()) throw OracleError("ORACLE_MODEL is not set");
    if (rps && *rps) cfg.requests_per_second = std::max(0.01, std::atof(rps));
    return cfg;
}

RemoteBackend::RemoteBackend(RemoteConfig cfg)
    : cfg_(std::move(cfg)), min_interval_s_(1.0 / cfg_.requests_per_second) {}

json RemoteBackend::build_payload(const RemoteConfig& cfg, const OracleRequest& req) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", req.prompt}});
    for (const auto& img : req.images) {
        const std::string b64 = base64_encode(encode_png(img));
        content.push_back(
            {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + b64}}}});
    }
    json payload;
    payload["model"] = cfg.model;
    payload["temperature"] = 0;
    payload["messages"] = json::array({{{"role", "user"}, {"content", content}}});
    return payload;
}

std::string RemoteBackend::complete(const OracleRequest& req) {
    static std::mutex mu;
    {
        // requests-per-second throttle
        std::lock_guard lock(mu);
        using clock = std::chrono::steady_clock;
        const auto now_us =
            std::chrono::duration_cast<std::chrono::microseconds>(clock::now().time_since_epoch())
                .count();
        const auto min_us = static_cast<std::int64_t>(min_interval_s_ * 1e6);
        if (last_request_us_ != 0 && now_us - last_request_us_ < min_us)
            std::this_thread::sleep_for(
                std::chrono::microseconds(min_us - (now_us - last_request_us_)));
        last_request_us_ =
            std::chrono::duration_cast<std::chrono::microseconds>(clock::now().time_since_epoch())
                .count();
    }

    std::string origin = cfg_.url;
    std::string path = "/";
    const auto scheme_end = origin.find("://");
    if (scheme_end != std::string::npos) {
        const auto slash = origin.find('/', scheme_end + 3);
        if (slash != std::string::npos) {
            path = origin.substr(slash);
            origin = origin.substr(0, slash);
        }
    }
    httplib::Client client(origin);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!cfg_.key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.key);
    const std::string body = build_payload(cfg_, req).dump();
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw OracleError("oracle request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw OracleError("oracle returned status " + std::to_string(res->status) + ": " +
                          res->body.substr(0, 200));
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw OracleError("oracle returned non-JSON body");
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw OracleError("oracle response missing choices[0].message.content");
    }
}

// --- facade ------------------------------------------------------------------------

Oracle::Oracle(std::shared_ptr<OracleBackend> backend, OracleConfig cfg)
    : backend_(std::move(backend)), cfg_(cfg) {}

std::string Oracle::call_with_retries(const OracleRequest& req,
                                      const std::function<bool(const std::string&)>& accept) {
    std::string last_problem = "no attempt made";
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
        std::string response;
        try {
            response = backend_->run(req);
        } catch (const CassetteMissError&) {
            throw;  // replay gaps are never retried or papered over
        } catch (const OracleError& e) {
            last_problem = e.what();
            continue;
        }
        if (accept(response)) return response;
        last_problem = "unparseable response: " + response.substr(0, 120);
    }
    throw OracleParseError("oracle task " + to_string(req.task) + " failed after " +
                           std::to_string(cfg_.retries + 1) + " attempts; last problem: " +
                           last_problem);
}

namespace {

std::string render_state_lines(const std::vector<std::string>& lines) {
    if (lines.empty()) return "(no actions executed yet)";
    std::string out;
    for (const auto& l : lines) out += "- " + l + "\n";
    out.pop_back();
    return out;
}

struct ParsedDescribe {
    std::string consequence;
    std::string clicked_element;
};

std::optional<ParsedDescribe> parse_describe(const std::string& response) {
    auto j = extract_first_json(response);
    if (!j) return std::nullopt;
    if (!j->contains("consequence") || !j->contains("clicked_element")) return std::nullopt;
    if (!(*j)["consequence"].is_string() || !(*j)["clicked_element"].is_string())
        return std::nullopt;
    ParsedDescribe out{(*j)["consequence"].get<std::string>(),
                       (*j)["clicked_element"].get<std::string>()};
    if (out.consequence.empty() || out.clicked_element.empty()) return std::nullopt;
    return out;
}

struct BundleEntry {
    std::string text;
    bool appearance = false;
};

std::optional<std::vector<BundleEntry>> parse_query_list(const json& j, const char* key,
                                                         const char* alt_key) {
    const json* list = nullptr;
    if (j.contains(key) && j[key].is_array())
        list = &j[key];
    else if (alt_key && j.contains(alt_key) && j[alt_key].is_array())
        list = &j[alt_key];
    if (!list) return std::nullopt;
    std::vector<BundleEntry> out;
    for (const auto& item : *list) {
        BundleEntry e;
        if (item.is_string()) {
            e.text = item.get<std::string>();
        } else if (item.is_object()) {
            if (item.contains("text") && item["text"].is_string())
                e.text = item["text"].get<std::string>();
            else if (item.contains("query") && item["query"].is_string())
                e.text = item["query"].get<std::string>();
            if (item.contains("appearance") && item["appearance"].is_boolean())
                e.appearance = item["appearance"].get<bool>();
        }
        if (!e.text.empty()) out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

double Oracle::predict_qhat(const QhatQuery& q) {
    std::vector<std::pair<Rect, int>> boxes = {{q.candidate_box, 1}};
    for (std::size_t i = 0; i < q.examples.size() && i < 2; ++i)
        boxes.emplace_back(q.examples[i].box, static_cast<int>(i) + 2);

    std::string example_section;
    if (!q.examples.empty() && q.examples[0].q.has_value()) {
        std::string tpl = prompts::kScoreQhatExamples;
        const auto nl = tpl.find('\n');
        std::string first = tpl.substr(0, nl + 1);
        std::string second = tpl.substr(nl + 1);
        example_section = replace_all(first, "{q_eg1}", format_number(*q.examples[0].q));
        if (q.examples.size() > 1 && q.examples[1].q.has_value())
            example_section += replace_all(second, "{q_eg2}", format_number(*q.examples[1].q));
    } else if (q.plain_example) {
        example_section = replace_all(prompts::kScoreIcrlExample, "{example}", *q.plain_example);
    }

    std::string prompt = prompts::kScoreQhat;
    prompt = replace_all(prompt, "{environment}", q.environment);
    prompt = replace_all(prompt, "{state}", render_state_lines(q.state_lines));
    // example_section carries its own trailing newline; empty drops the slot line
    prompt = replace_all(prompt, "{example_section}\n", example_section);

    OracleRequest req;
    req.task = OracleTask::ScoreQhat;
    req.prompt = prompt;
    req.images.push_back(mark_boxes(*q.screenshot, boxes));
    req.metadata["subject_key"] = q.subject_key;
    req.metadata["subject_executed"] = q.subject_executed ? "1" : "0";

    const std::string response =
        call_with_retries(req, [](const std::string& r) { return extract_first_number(r).has_value(); });
    const double raw = *extract_first_number(response);
    return std::clamp(raw, 0.0, 100.0);
}

TransitionDescription Oracle::describe_transition(const DescribeQuery& q,
                                                  const std::string& action_key) {
    OracleRequest req;
    req.task = OracleTask::DescribeTransition;
    req.prompt = prompts::kDescribeTransition;
    req.images.push_back(mark_boxes(*q.from_screenshot, {{q.box, 1}}));
    req.images.push_back(*q.to_screenshot);
    req.metadata["subject_label"] = q.subject_label;
    req.metadata["to_label"] = q.to_label;
    req.metadata["action_key"] = action_key;

    const std::string response = call_with_retries(
        req, [](const std::string& r) { return parse_describe(r).has_value(); });
    const ParsedDescribe parsed = *parse_describe(response);
    TransitionDescription d;
    d.action_key = action_key;
    d.consequence = strip_box_mentions(parsed.consequence);
    d.clicked_element = strip_box_mentions(parsed.clicked_element);
    return d;
}

QueryBundle Oracle::generate_queries(const GenerateQueriesQuery& q) {
    OracleRequest req;
    req.task = OracleTask::GenerateQueries;
    req.prompt = prompts::kGenerateQueries;
    req.images.push_back(mark_boxes(*q.from_screenshot, {{q.box, 1}}));
    req.images.push_back(*q.to_screenshot);
    req.images.push_back(q.element_crop);
    req.metadata["subject_label"] = q.subject_label;
    req.metadata["to_label"] = q.to_label;

    auto has_queries = [](const std::string& r) {
        auto j = extract_first_json(r);
        if (!j) return false;
        auto s1 = parse_query_list(*j, "system_1_queries", "system1");
        auto s2 = parse_query_list(*j, "system_2_queries", "system2");
        return (s1 && !s1->empty()) || (s2 && !s2->empty());
    };
    const std::string response = call_with_retries(req, has_queries);
    const json j = *extract_first_json(response);

    QueryBundle bundle;
    if (j.contains("analysis") && j["analysis"].is_string())
        bundle.analysis = j["analysis"].get<std::string>();

    auto s1 = parse_query_list(j, "system_1_queries", "system1").value_or(std::vector<BundleEntry>{});
    auto s2 = parse_query_list(j, "system_2_queries", "system2").value_or(std::vector<BundleEntry>{});

    // appearance-mention subcap (3) applies when the response labels entries
    std::size_t appearance_count = 0;
    for (const auto& e : s1) {
        if (e.appearance) {
            if (appearance_count == 3) {
                warn("generate_queries: appearance subcap exceeded, entry dropped: " + e.text);
                continue;
            }
            ++appearance_count;
        }
        bundle.system1.push_back(e.text);
    }
    if (bundle.system1.size() > 6) {
        warn("generate_queries: system1 cap exceeded (" + std::to_string(bundle.system1.size()) +
             "), truncated to 6");
        bundle.system1.resize(6);
    }
    for (const auto& e : s2) bundle.system2.push_back(e.text);
    if (bundle.system2.size() > 5) {
        warn("generate_queries: system2 cap exceeded (" + std::to_string(bundle.system2.size()) +
             "), truncated to 5");
        bundle.system2.resize(5);
    }
    return bundle;
}

CoverageVerdict Oracle::rank_coverage(const std::vector<TransitionDescription>& a,
                                      const std::vector<TransitionDescription>& b) {
    auto render_list = [](const std::vector<TransitionDescription>& descs) {
        if (descs.empty()) return std::string("(empty)");
        std::string out;
        for (const auto& d : descs) out += "- " + render_description_line(d) + "\n";
        out.pop_back();
        return out;
    };
    auto distinct_keys = [](const std::vector<TransitionDescription>& descs) {
        std::set<std::string> keys;
        for (const auto& d : descs) keys.insert(d.action_key);
        return keys.size();
    };

    std::string prompt = prompts::kRankCoverage;
    prompt = replace_all(prompt, "{list_a}", render_list(a));
    prompt = replace_all(prompt, "{list_b}", render_list(b));

    OracleRequest req;
    req.task = OracleTask::RankCoverage;
    req.prompt = prompt;
    req.metadata["keys_a"] = std::to_string(distinct_keys(a));
    req.metadata["keys_b"] = std::to_string(distinct_keys(b));

    const std::string response = call_with_retries(req, [](const std::string&) { return true; });

    // first standalone A or B token
    for (std::size_t i = 0; i < response.size(); ++i) {
        const char c = response[i];
        if (c != 'A' && c != 'B') continue;
        const bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(response[i - 1]));
        const bool right_ok =
            i + 1 >= response.size() || !std::isalnum(static_cast<unsigned char>(response[i + 1]));
        if (left_ok && right_ok)
            return CoverageVerdict{c == 'A' ? CoverageChoice::A : CoverageChoice::B, false};
    }
    warn("rank_coverage: verdict unparseable, tie broken toward A");
    return CoverageVerdict{CoverageChoice::A, true};
}

}  // namespace guibee
