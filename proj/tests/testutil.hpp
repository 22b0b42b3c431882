#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "guibee/environment.hpp"
#include "guibee/raster.hpp"
#include "guibee/rng.hpp"
#include "guibee/screen.hpp"

namespace guibee::testutil {

namespace fs = std::filesystem;

// Self-cleaning temp directory.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "guibee") {
        path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(counter_++)
                                             + "-" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    fs::path path() const { return path_; }
    std::string sub(const std::string& name) const { return (path_ / name).string(); }

private:
    static inline int counter_ = 0;
    fs::path path_;
};

inline std::string manifests_dir() {
    const char* env = std::getenv("GUIBEE_MANIFESTS");
    return env ? env : "assets/manifests";
}

inline std::string bundled_manifest(const std::string& name) {
    return manifests_dir() + "/" + name + ".json";
}

inline Raster noise_patch(int w, int h, Rng& rng, int lo = 0, int hi = 255) {
    Raster img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto v = [&] { return static_cast<std::uint8_t>(lo + rng.uniform_index(hi - lo + 1)); };
            img.set(x, y, Rgb{v(), v(), v()});
        }
    return img;
}

// Structured patch with gradient plus a few rectangles; something a shift can
// visibly misalign.
inline Raster structured_patch(int w, int h) {
    Raster img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.set(x, y, Rgb{static_cast<std::uint8_t>((x * 255) / std::max(1, w - 1)),
                              static_cast<std::uint8_t>((y * 255) / std::max(1, h - 1)),
                              static_cast<std::uint8_t>(((x + y) * 127) / std::max(1, w + h - 2))});
    img.fill_rect(Rect{w / 4, h / 4, w / 2, h / 2}, Rgb{20, 180, 40});
    img.fill_rect(Rect{(3 * w) / 5, (3 * h) / 5, (4 * w) / 5, (4 * h) / 5}, Rgb{200, 30, 120});
    return img;
}

// The content of `src` translated by (dx, dy) on a fixed background; the
// canvas size stays the same.
inline Raster shifted_copy(const Raster& src, int dx, int dy, Rgb background = {255, 255, 255}) {
    Raster out(src.width(), src.height(), background);
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx >= 0 && nx < out.width() && ny >= 0 && ny < out.height())
                out.set(nx, ny, src.at(x, y));
        }
    return out;
}

// A constructed screen: solid background, one leaf element per (box, color),
// all clickable. Distinct leaf classes so signatures differ by content.
inline Screen make_screen(const std::string& label,
                          const std::vector<std::pair<Rect, Rgb>>& leaves, int w = 96, int h = 72,
                          Rgb background = {240, 240, 240}) {
    Screen s;
    s.source_label = label;
    s.screenshot = Raster(w, h, background);
    s.dom = DomElement{"root", "body", {"page", "p-" + label}, Rect{0, 0, w, h}, false, {}};
    int i = 0;
    for (const auto& [box, color] : leaves) {
        s.screenshot.fill_rect(box, color);
        DomElement e;
        e.id = "e" + std::to_string(i);
        e.tag = "button";
        e.classes = {"leaf", "c" + std::to_string(i)};
        e.box = box;
        e.clickable = true;
        s.dom.children.push_back(std::move(e));
        ++i;
    }
    s.a11y = "screen " + label;
    return s;
}

// Click action for the i-th leaf of a make_screen() screen, keyed to node_id.
inline Action make_click(const Screen& screen, std::size_t leaf_index,
                         const std::string& node_id) {
    const DomElement& e = screen.dom.children.at(leaf_index);
    Action a;
    a.type = ActionType::Click;
    a.source_screen_id = node_id;
    a.target.element_id = e.id;
    a.target.dom_path = "root/" + std::to_string(leaf_index) + ":" + e.tag;
    a.target.tag = e.tag;
    a.target.classes = e.classes;
    a.target.box = e.box;
    a.target.patch = screen.screenshot.crop(e.box);
    a.key = make_action_key(node_id, a.type, a.target);
    a.env_key = a.key;
    return a;
}

// Small fixture environment: hub with a scroll page, two detail screens, one
// invalid element, an animated screen and a dead end.
inline nlohmann::json fixture_manifest_json() {
    auto leaf = [](const std::string& id, const std::string& tag,
                   std::vector<std::string> classes, std::vector<int> box, bool clickable) {
        return nlohmann::json{{"id", id},           {"tag", tag},
                              {"classes", classes}, {"box", box},
                              {"clickable", clickable}, {"children", nlohmann::json::array()}};
    };
    auto screen = [&](const std::string& id, std::vector<nlohmann::json> kids,
                      nlohmann::json animated, nlohmann::json scroll_to, bool scrollable) {
        nlohmann::json root = {{"id", "root"},
                               {"tag", "body"},
                               {"classes", {"page", "scr-" + id}},
                               {"box", {0, 0, 160, 120}},
                               {"clickable", false},
                               {"children", kids}};
        return nlohmann::json{{"id", id},
                              {"dom", root},
                              {"animated_box", animated},
                              {"scroll_to", scroll_to},
                              {"scrollable", scrollable || !scroll_to.is_null()}};
    };

    nlohmann::json j;
    j["format_version"] = 1;
    j["name"] = "fixture";
    j["render_seed"] = 5;
    j["width"] = 160;
    j["height"] = 120;
    j["initial"] = "hub";
    j["screens"] = nlohmann::json::array({
        screen("hub",
               {leaf("to_a", "button", {"nav", "a"}, {8, 8, 48, 28}, true),
                leaf("to_b", "button", {"nav", "b"}, {56, 8, 96, 28}, true),
                leaf("badge", "button", {"badge"}, {104, 8, 150, 28}, true),
                leaf("blurb", "p", {"text"}, {8, 40, 150, 80}, false)},
               nullptr, "hub_p1", false),
        screen("hub_p1",
               {leaf("to_anim", "button", {"nav", "anim"}, {8, 8, 60, 28}, true),
                leaf("more", "p", {"text", "more"}, {8, 40, 150, 80}, false)},
               nullptr, nullptr, true),
        screen("a",
               {leaf("back", "button", {"nav", "back"}, {8, 8, 48, 28}, true),
                leaf("to_end", "button", {"go", "end"}, {56, 8, 112, 28}, true),
                leaf("body_a", "p", {"text", "deep"}, {8, 40, 150, 80}, false)},
               nullptr, nullptr, false),
        screen("b",
               {leaf("back", "button", {"nav", "back"}, {8, 8, 48, 28}, true),
                leaf("body_b", "p", {"text", "wide"}, {8, 40, 150, 110}, false)},
               nullptr, nullptr, false),
        screen("anim",
               {leaf("back", "button", {"nav", "back"}, {8, 8, 48, 28}, true),
                leaf("ticker", "div", {"banner"}, {100, 60, 150, 100}, false)},
               nlohmann::json::array({100, 60, 150, 100}), nullptr, false),
        screen("end", {leaf("fin", "p", {"text", "fin"}, {8, 8, 150, 110}, false)}, nullptr,
               nullptr, false),
    });
    j["transitions"] = nlohmann::json::array({
        {{"from", "hub"}, {"element", "to_a"}, {"to", "a"}},
        {{"from", "hub"}, {"element", "to_b"}, {"to", "b"}},
        {{"from", "hub_p1"}, {"element", "to_anim"}, {"to", "anim"}},
        {{"from", "a"}, {"element", "back"}, {"to", "hub"}},
        {{"from", "a"}, {"element", "to_end"}, {"to", "end"}},
        {{"from", "b"}, {"element", "back"}, {"to", "hub"}},
        {{"from", "anim"}, {"element", "back"}, {"to", "hub"}},
    });
    j["invalid_elements"] = nlohmann::json::array({{{"screen", "hub"}, {"element", "badge"}}});
    return j;
}

inline EnvironmentManifest fixture_manifest() {
    return EnvironmentManifest::from_json(fixture_manifest_json(), "fixture");
}

inline std::string write_fixture_manifest(const TempDir& dir) {
    const std::string path = dir.sub("fixture.json");
    std::ofstream f(path);
    f << fixture_manifest_json().dump(1) << "\n";
    return path;
}

}  // namespace guibee::testutil
