#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "guibee/screen.hpp"

namespace guibee {

// Declarative description of a synthetic GUI: screens with absolute-positioned
// DOM trees, a click-transition map, and explicit scroll links (scroll pages
// are ordinary screens). Clickable elements without a transition are the noisy
// part of the action space: the environment offers them but clicking goes
// nowhere, and the manifest must name each one in invalid_elements.
struct ManifestScreen {
    std::string id;
    DomElement root;
    std::optional<Rect> animated_box;          // pixel noise region, re-rendered per frame
    bool scrollable = false;                   // offers a scroll action
    std::optional<std::string> scroll_to;      // next page; absent means scroll is a no-op
};

struct EnvironmentManifest {
    std::string name;
    std::uint64_t render_seed = 0;
    int width = 0;
    int height = 0;
    std::string initial;
    std::vector<ManifestScreen> screens;
    // screen id -> element id -> destination screen id
    std::map<std::string, std::map<std::string, std::string>> transitions;
    std::vector<std::pair<std::string, std::string>> invalid_elements;  // (screen, element)

    static EnvironmentManifest from_json(const nlohmann::json& j, const std::string& what);
    static EnvironmentManifest load_file(const std::string& path);
    nlohmann::json to_json() const;

    void validate() const;
    const ManifestScreen& screen(const std::string& id) const;
    bool has_screen(const std::string& id) const;

    // Ground-truth screen count: BFS over click and scroll transitions.
    std::size_t bfs_reachable_count() const;
};

inline constexpr int kManifestFormatVersion = 1;

// The GUI-environment contract used by the exploration loop.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual Screen reset() = 0;

    // One click action per clickable DOM element (validity hidden), plus one
    // scroll action when the screen scrolls. Deterministic document order,
    // scroll last.
    virtual std::vector<Action> get_candidate_actions(const Screen& screen) = 0;

    // Executes an action minted for the current screen; stale actions raise
    // ProtocolError. Invalid elements re-render the same screen.
    virtual Screen execute(const Action& action) = 0;

    // Re-renders the current screen (advances animation only).
    virtual Screen observe() = 0;
};

// Deterministic in-process environment driven by a manifest. Rendering is
// procedural from (manifest, render_seed, frame counter) alone.
class SimulatorEnvironment : public Environment {
public:
    explicit SimulatorEnvironment(EnvironmentManifest manifest);

    std::string name() const override { return manifest_.name; }
    Screen reset() override;
    std::vector<Action> get_candidate_actions(const Screen& screen) override;
    Screen execute(const Action& action) override;
    Screen observe() override;

    const EnvironmentManifest& manifest() const { return manifest_; }

    // Render any manifest screen at a given animation frame; exposed for
    // tests and tooling.
    Raster render(const ManifestScreen& spec, std::uint64_t frame) const;

private:
    Screen make_screen(const ManifestScreen& spec);
    std::string a11y_text(const ManifestScreen& spec) const;

    EnvironmentManifest manifest_;
    std::string current_;
    std::uint64_t frame_ = 0;
};

}  // namespace guibee
