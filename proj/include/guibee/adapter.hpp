#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "guibee/environment.hpp"

namespace guibee {

// Wire protocol for driving a real GUI behind a local socket. Frames are a
// 4-byte big-endian length followed by a UTF-8 JSON payload. Four requests:
//   {"op":"RESET"}                -> {"ok":true,"screen":{...}}
//   {"op":"CANDIDATES"}          -> {"ok":true,"candidates":[{...}]}
//   {"op":"EXECUTE","action_key"} -> {"ok":true,"screen":{...}}
//   {"op":"OBSERVE"}             -> {"ok":true,"screen":{...}}
// Errors come back as {"ok":false,"error":"..."}. Screens carry the lossless
// screenshot bytes (base64 PPM), the DOM records and the a11y text.

inline constexpr std::size_t kMaxFrameBytes = 64ull * 1024 * 1024;

void write_frame(int fd, const nlohmann::json& payload);
nlohmann::json read_frame(int fd);  // throws ProtocolError on EOF/oversize/garbage

nlohmann::json screen_to_wire(const Screen& s);
Screen screen_from_wire(const nlohmann::json& j);
nlohmann::json action_to_wire(const Action& a);
Action action_from_wire(const nlohmann::json& j, const Raster& screenshot);

// Environment implementation that proxies every call across the socket.
class AdapterClient : public Environment {
public:
    explicit AdapterClient(int fd, std::string name = "remote");
    static std::unique_ptr<AdapterClient> connect_tcp(const std::string& host, int port);
    ~AdapterClient() override;

    std::string name() const override { return name_; }
    Screen reset() override;
    std::vector<Action> get_candidate_actions(const Screen& screen) override;
    Screen execute(const Action& action) override;
    Screen observe() override;

private:
    nlohmann::json call(const nlohmann::json& request);

    int fd_ = -1;
    bool owns_fd_ = true;
    std::string name_;
};

// Serves any Environment over one connection until EOF. This is the adapter
// side a browser driver would implement; here it lets the conformance tests
// (and tools) put the simulator behind the real wire.
class AdapterServer {
public:
    AdapterServer(Environment& env, int fd) : env_(env), fd_(fd) {}

    // Handles requests until the peer closes the connection.
    void serve();

private:
    nlohmann::json handle(const nlohmann::json& request);

    Environment& env_;
    int fd_;
    Screen current_;
    bool has_current_ = false;
};

}  // namespace guibee
