#include "guibee/adapter.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "guibee/errors.hpp"
#include "guibee/graph.hpp"

namespace guibee {

using nlohmann::json;

namespace {

void write_all(int fd, const void* data, std::size_t len) {
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
        const ssize_t n = ::write(fd, p, len);
        if (n <= 0) throw ProtocolError("adapter: short write (peer gone?)");
        p += n;
        len -= static_cast<std::size_t>(n);
    }
}

bool read_all(int fd, void* data, std::size_t len) {
    char* p = static_cast<char*>(data);
    while (len > 0) {
        const ssize_t n = ::read(fd, p, len);
        if (n == 0) return false;  // clean EOF
        if (n < 0) throw ProtocolError("adapter: read error");
        p += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

std::string b64_decode(const std::string& in) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::string out;
    int buffer = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = val(c);
        if (v < 0) throw ProtocolError("adapter: bad base64 payload");
        buffer = (buffer << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((buffer >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace

void write_frame(int fd, const json& payload) {
    const std::string body = payload.dump();
    if (body.size() > kMaxFrameBytes) throw ProtocolError("adapter: frame too large");
    std::uint8_t header[4] = {static_cast<std::uint8_t>(body.size() >> 24),
                              static_cast<std::uint8_t>(body.size() >> 16),
                              static_cast<std::uint8_t>(body.size() >> 8),
                              static_cast<std::uint8_t>(body.size())};
    write_all(fd, header, 4);
    write_all(fd, body.data(), body.size());
}

json read_frame(int fd) {
    std::uint8_t header[4];
    if (!read_all(fd, header, 4)) throw ProtocolError("adapter: connection closed");
    const std::size_t len = (static_cast<std::size_t>(header[0]) << 24) |
                            (static_cast<std::size_t>(header[1]) << 16) |
                            (static_cast<std::size_t>(header[2]) << 8) | header[3];
    if (len > kMaxFrameBytes) throw ProtocolError("adapter: oversized frame announced");
    std::string body(len, '\0');
    if (!read_all(fd, body.data(), len)) throw ProtocolError("adapter: truncated frame");
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw ProtocolError("adapter: frame is not valid JSON");
    return j;
}

json screen_to_wire(const Screen& s) {
    json j;
    j["source_label"] = s.source_label;
    j["width"] = s.width();
    j["height"] = s.height();
    j["screenshot_ppm_b64"] = base64_encode(encode_ppm(s.screenshot));
    j["dom"] = dom_to_json(s.dom);
    j["a11y"] = s.a11y;
    return j;
}

Screen screen_from_wire(const json& j) {
    Screen s;
    try {
        s.source_label = j.at("source_label").get<std::string>();
        const std::string raw = b64_decode(j.at("screenshot_ppm_b64").get<std::string>());
        s.screenshot = decode_ppm(std::vector<std::uint8_t>(raw.begin(), raw.end()), "wire screen");
        s.dom = dom_from_json(j.at("dom"), "wire screen");
        s.a11y = j.at("a11y").get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("adapter: malformed screen payload (") + e.what() + ")");
    }
    if (s.width() != j.value("width", -1) || s.height() != j.value("height", -1))
        throw ProtocolError("adapter: screenshot size disagrees with declared size");
    return s;
}

json action_to_wire(const Action& a) {
    json j;
    j["type"] = to_string(a.type);
    j["action_key"] = a.env_key;
    j["full_page"] = a.target.full_page;
    j["element_id"] = a.target.element_id;
    j["dom_path"] = a.target.dom_path;
    j["tag"] = a.target.tag;
    j["classes"] = a.target.classes;
    j["box"] = {a.target.box.x0, a.target.box.y0, a.target.box.x1, a.target.box.y1};
    return j;
}

Action action_from_wire(const json& j, const Raster& screenshot) {
    Action a;
    try {
        a.type = action_type_from_string(j.at("type").get<std::string>());
        a.env_key = j.at("action_key").get<std::string>();
        a.key = a.env_key;
        a.target.full_page = j.at("full_page").get<bool>();
        a.target.element_id = j.value("element_id", "");
        a.target.dom_path = j.value("dom_path", "");
        a.target.tag = j.value("tag", "");
        a.target.classes = j.value("classes", std::vector<std::string>{});
        const auto& b = j.at("box");
        a.target.box =
            Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("adapter: malformed action payload (") + e.what() + ")");
    }
    a.target.patch =
        a.target.full_page ? scroll_placeholder_patch() : screenshot.crop(a.target.box);
    return a;
}

// --- client ------------------------------------------------------------------

AdapterClient::AdapterClient(int fd, std::string name) : fd_(fd), name_(std::move(name)) {}

std::unique_ptr<AdapterClient> AdapterClient::connect_tcp(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
        throw EnvironmentError("adapter: cannot resolve " + host);
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0) throw EnvironmentError("adapter: cannot connect to " + host + ":" +
                                       std::to_string(port));
    return std::make_unique<AdapterClient>(fd, host + ":" + std::to_string(port));
}

AdapterClient::~AdapterClient() {
    if (owns_fd_ && fd_ >= 0) ::close(fd_);
}

json AdapterClient::call(const json& request) {
    write_frame(fd_, request);
    json response = read_frame(fd_);
    if (!response.value("ok", false))
        throw ProtocolError("adapter: " + response.value("error", "unspecified failure"));
    return response;
}

Screen AdapterClient::reset() {
    return screen_from_wire(call({{"op", "RESET"}}).at("screen"));
}

std::vector<Action> AdapterClient::get_candidate_actions(const Screen& screen) {
    json response = call({{"op", "CANDIDATES"}});
    std::vector<Action> out;
    for (const auto& ja : response.at("candidates")) {
        Action a = action_from_wire(ja, screen.screenshot);
        a.source_screen_id = screen.source_label;
        out.push_back(std::move(a));
    }
    return out;
}

Screen AdapterClient::execute(const Action& action) {
    return screen_from_wire(
        call({{"op", "EXECUTE"}, {"action_key", action.env_key}}).at("screen"));
}

Screen AdapterClient::observe() {
    return screen_from_wire(call({{"op", "OBSERVE"}}).at("screen"));
}

// --- server ------------------------------------------------------------------

json AdapterServer::handle(const json& request) {
    const std::string op = request.value("op", "");
    json response;
    if (op == "RESET") {
        current_ = env_.reset();
        has_current_ = true;
        response["ok"] = true;
        response["screen"] = screen_to_wire(current_);
    } else if (op == "CANDIDATES") {
        if (!has_current_) throw ProtocolError("CANDIDATES before RESET");
        json arr = json::array();
        for (const Action& a : env_.get_candidate_actions(current_)) arr.push_back(action_to_wire(a));
        response["ok"] = true;
        response["candidates"] = arr;
    } else if (op == "EXECUTE") {
        if (!has_current_) throw ProtocolError("EXECUTE before RESET");
        const std::string key = request.value("action_key", "");
        for (const Action& a : env_.get_candidate_actions(current_)) {
            if (a.env_key != key) continue;
            current_ = env_.execute(a);
            response["ok"] = true;
            response["screen"] = screen_to_wire(current_);
            return response;
        }
        throw ProtocolError("EXECUTE names unknown action_key " + key);
    } else if (op == "OBSERVE") {
        if (!has_current_) throw ProtocolError("OBSERVE before RESET");
        current_ = env_.observe();
        response["ok"] = true;
        response["screen"] = screen_to_wire(current_);
    } else {
        throw ProtocolError("unknown op '" + op + "'");
    }
    return response;
}

void AdapterServer::serve() {
    while (true) {
        json request;
        try {
            request = read_frame(fd_);
        } catch (const ProtocolError&) {
            return;  // peer closed
        }
        json response;
        try {
            response = handle(request);
        } catch (const Error& e) {
            response = {{"ok", false}, {"error", e.what()}};
        }
        write_frame(fd_, response);
    }
}

}  // namespace guibee
