#include "guibee/environment.hpp"

#include <deque>
#include <fstream>
#include <set>

#include "guibee/errors.hpp"
#include "guibee/graph.hpp"
#include "guibee/hash.hpp"

namespace guibee {

using nlohmann::json;

// --- manifest ------------------------------------------------------------------

EnvironmentManifest EnvironmentManifest::from_json(const json& j, const std::string& what) {
    if (!j.is_object()) throw ManifestError(what + ": manifest is not an object");
    const int version = j.value("format_version", -1);
    if (version != kManifestFormatVersion)
        throw ManifestError(what + ": unsupported manifest format version " +
                            std::to_string(version));
    EnvironmentManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.render_seed = j.value("render_seed", std::uint64_t{0});
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.initial = j.at("initial").get<std::string>();
        for (const auto& js : j.at("screens")) {
            ManifestScreen s;
            s.id = js.at("id").get<std::string>();
            s.root = dom_from_json(js.at("dom"), what + " screen " + s.id);
            if (js.contains("animated_box") && !js["animated_box"].is_null()) {
                const auto& b = js["animated_box"];
                s.animated_box = Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                                      b.at(3).get<int>()};
            }
            if (js.contains("scroll_to") && !js["scroll_to"].is_null())
                s.scroll_to = js["scroll_to"].get<std::string>();
            s.scrollable = js.value("scrollable", s.scroll_to.has_value());
            m.screens.push_back(std::move(s));
        }
        for (const auto& jt : j.at("transitions"))
            m.transitions[jt.at("from").get<std::string>()][jt.at("element").get<std::string>()] =
                jt.at("to").get<std::string>();
        if (j.contains("invalid_elements"))
            for (const auto& ji : j["invalid_elements"])
                m.invalid_elements.emplace_back(ji.at("screen").get<std::string>(),
                                                ji.at("element").get<std::string>());
    } catch (const json::exception& e) {
        throw ManifestError(what + ": " + e.what());
    }
    m.validate();
    return m;
}

EnvironmentManifest EnvironmentManifest::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ManifestError("cannot open manifest: " + path);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw ManifestError(path + ": not valid JSON");
    return from_json(j, path);
}

json EnvironmentManifest::to_json() const {
    json j;
    j["format_version"] = kManifestFormatVersion;
    j["name"] = name;
    j["render_seed"] = render_seed;
    j["width"] = width;
    j["height"] = height;
    j["initial"] = initial;
    json screens_j = json::array();
    for (const auto& s : screens) {
        json js;
        js["id"] = s.id;
        js["dom"] = dom_to_json(s.root);
        js["animated_box"] = nullptr;
        if (s.animated_box)
            js["animated_box"] = {s.animated_box->x0, s.animated_box->y0, s.animated_box->x1,
                                  s.animated_box->y1};
        js["scrollable"] = s.scrollable;
        js["scroll_to"] = nullptr;
        if (s.scroll_to) js["scroll_to"] = *s.scroll_to;
        screens_j.push_back(std::move(js));
    }
    j["screens"] = screens_j;
    json trans = json::array();
    for (const auto& [from, by_elem] : transitions)
        for (const auto& [elem, to] : by_elem)
            trans.push_back({{"from", from}, {"element", elem}, {"to", to}});
    j["transitions"] = trans;
    json invalid = json::array();
    for (const auto& [screen, elem] : invalid_elements)
        invalid.push_back({{"screen", screen}, {"element", elem}});
    j["invalid_elements"] = invalid;
    return j;
}

bool EnvironmentManifest::has_screen(const std::string& id) const {
    for (const auto& s : screens)
        if (s.id == id) return true;
    return false;
}

const ManifestScreen& EnvironmentManifest::screen(const std::string& id) const {
    for (const auto& s : screens)
        if (s.id == id) return s;
    throw ManifestError("manifest " + name + ": unknown screen " + id);
}

namespace {

void validate_tree(const EnvironmentManifest& m, const ManifestScreen& s, const DomElement& e,
                   std::set<std::string>& seen_ids) {
    if (!seen_ids.insert(e.id).second)
        throw ManifestError("manifest " + m.name + " screen " + s.id + ": duplicate element id " +
                            e.id);
    const Rect bounds{0, 0, m.width, m.height};
    if (!bounds.contains(e.box))
        throw ManifestError("manifest " + m.name + " screen " + s.id + ": element " + e.id +
                            " box outside screen bounds");
    for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (!e.box.contains(e.children[i].box))
            throw ManifestError("manifest " + m.name + " screen " + s.id + ": element " +
                                e.children[i].id + " escapes its parent");
        for (std::size_t k = i + 1; k < e.children.size(); ++k)
            if (e.children[i].box.overlaps(e.children[k].box))
                throw ManifestError("manifest " + m.name + " screen " + s.id +
                                    ": sibling boxes overlap (" + e.children[i].id + ", " +
                                    e.children[k].id + ")");
        validate_tree(m, s, e.children[i], seen_ids);
    }
}

}  // namespace

void EnvironmentManifest::validate() const {
    if (width <= 0 || height <= 0) throw ManifestError("manifest " + name + ": bad dimensions");
    if (!has_screen(initial))
        throw ManifestError("manifest " + name + ": initial screen " + initial + " not defined");
    std::set<std::string> ids;
    for (const auto& s : screens) {
        if (!ids.insert(s.id).second)
            throw ManifestError("manifest " + name + ": duplicate screen id " + s.id);
        std::set<std::string> elem_ids;
        validate_tree(*this, s, s.root, elem_ids);
        if (s.scroll_to && !has_screen(*s.scroll_to))
            throw ManifestError("manifest " + name + ": screen " + s.id +
                                " scrolls to unknown screen " + *s.scroll_to);
        if (s.animated_box && !Rect{0, 0, width, height}.contains(*s.animated_box))
            throw ManifestError("manifest " + name + ": screen " + s.id +
                                " animated_box outside bounds");
    }
    std::set<std::pair<std::string, std::string>> declared_invalid(invalid_elements.begin(),
                                                                   invalid_elements.end());
    for (const auto& [from, by_elem] : transitions) {
        const ManifestScreen& s = screen(from);  // throws for unknown screen
        for (const auto& [elem, to] : by_elem) {
            const DomElement* e = find_element(s.root, elem);
            if (!e)
                throw ManifestError("manifest " + name + ": transition from unknown element " +
                                    from + "/" + elem);
            if (!e->clickable)
                throw ManifestError("manifest " + name + ": transition element " + from + "/" +
                                    elem + " is not clickable");
            if (!has_screen(to))
                throw ManifestError("manifest " + name + ": transition to unknown screen " + to);
        }
    }
    // every clickable element either transitions somewhere or is declared invalid
    for (const auto& s : screens) {
        for (const FlatElement& fe : flatten_dom(s.root)) {
            if (!fe.element->clickable) continue;
            const auto by_elem = transitions.find(s.id);
            const bool has_transition =
                by_elem != transitions.end() && by_elem->second.count(fe.element->id) > 0;
            const bool declared =
                declared_invalid.count({s.id, fe.element->id}) > 0;
            if (!has_transition && !declared)
                throw ManifestError("manifest " + name + ": clickable element " + s.id + "/" +
                                    fe.element->id +
                                    " has no transition and is not listed in invalid_elements");
            if (has_transition && declared)
                throw ManifestError("manifest " + name + ": element " + s.id + "/" +
                                    fe.element->id + " is both valid and declared invalid");
        }
    }
}

std::size_t EnvironmentManifest::bfs_reachable_count() const {
    std::set<std::string> visited{initial};
    std::deque<std::string> frontier{initial};
    while (!frontier.empty()) {
        const std::string cur = frontier.front();
        frontier.pop_front();
        std::vector<std::string> next;
        if (auto it = transitions.find(cur); it != transitions.end())
            for (const auto& [elem, to] : it->second) next.push_back(to);
        const ManifestScreen& s = screen(cur);
        if (s.scroll_to) next.push_back(*s.scroll_to);
        for (const auto& n : next)
            if (visited.insert(n).second) frontier.push_back(n);
    }
    return visited.size();
}

// --- rendering -------------------------------------------------------------------

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    a ^= b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2);
    a *= 0xff51afd7ed558ccdull;
    a ^= a >> 33;
    return a;
}

Rgb class_color(const DomElement& e) {
    Fnv64 h;
    h.field(e.tag);
    for (const auto& c : e.classes) h.field(c);
    const std::uint64_t v = h.value();
    return Rgb{static_cast<std::uint8_t>(60 + (v & 0x7f)),
               static_cast<std::uint8_t>(60 + ((v >> 8) & 0x7f)),
               static_cast<std::uint8_t>(60 + ((v >> 16) & 0x7f))};
}

Rgb darken(Rgb c) {
    return Rgb{static_cast<std::uint8_t>(c.r / 2), static_cast<std::uint8_t>(c.g / 2),
               static_cast<std::uint8_t>(c.b / 2)};
}

Rgb lighten(Rgb c) {
    return Rgb{static_cast<std::uint8_t>(128 + c.r / 2), static_cast<std::uint8_t>(128 + c.g / 2),
               static_cast<std::uint8_t>(128 + c.b / 2)};
}

void render_element(Raster& img, const DomElement& e, const std::string& screen_id,
                    std::uint64_t seed) {
    const Rgb base = class_color(e);
    if (e.children.empty()) {
        img.fill_rect(e.box, lighten(base));
        img.draw_frame(e.box, darken(base), 1);
        // pseudo-text blocks, stable across frames and keyed to the screen so
        // structurally identical elements on different screens render apart
        const std::uint64_t elem_seed =
            mix(mix(fnv64(screen_id), fnv64(e.id)), seed);
        const Rgb ink{18, 18, 18};
        int row_idx = 0;
        for (int y = e.box.y0 + 3; y + 3 <= e.box.y1 - 2; y += 4, ++row_idx) {
            int col_idx = 0;
            for (int x = e.box.x0 + 3; x + 3 <= e.box.x1 - 2; x += 4, ++col_idx) {
                if (mix(elem_seed, (static_cast<std::uint64_t>(row_idx) << 32) | col_idx) & 1)
                    img.fill_rect(Rect{x, y, x + 3, y + 3}, ink);
            }
        }
    } else {
        img.fill_rect(e.box, lighten(base));
        img.draw_frame(e.box, darken(base), 1);
        for (const auto& c : e.children) render_element(img, c, screen_id, seed);
    }
}

}  // namespace

Raster SimulatorEnvironment::render(const ManifestScreen& spec, std::uint64_t frame) const {
    const std::uint64_t bg = mix(fnv64(spec.id), manifest_.render_seed);
    const Rgb background{static_cast<std::uint8_t>(205 + (bg & 0x1f)),
                         static_cast<std::uint8_t>(205 + ((bg >> 5) & 0x1f)),
                         static_cast<std::uint8_t>(205 + ((bg >> 10) & 0x1f))};
    Raster img(manifest_.width, manifest_.height, background);
    render_element(img, spec.root, spec.id, manifest_.render_seed);
    if (spec.animated_box) {
        // base color cycles per frame so every pixel of the region moves well
        // past the identity threshold between consecutive renders; the static
        // per-pixel jitter just adds texture
        const Rect& b = *spec.animated_box;
        static constexpr Rgb palette[3] = {{28, 30, 44}, {140, 150, 160}, {238, 232, 220}};
        const Rgb base = palette[frame % 3];
        const std::uint64_t tex_seed = mix(fnv64(spec.id), manifest_.render_seed);
        for (int y = b.y0; y < b.y1; ++y)
            for (int x = b.x0; x < b.x1; ++x) {
                const std::uint64_t h =
                    mix(tex_seed, (static_cast<std::uint64_t>(y) << 32) | static_cast<std::uint32_t>(x));
                const int jitter = static_cast<int>(h & 0x1f) - 16;
                auto channel = [&](int v) {
                    return static_cast<std::uint8_t>(std::clamp(v + jitter, 0, 255));
                };
                img.set(x, y, Rgb{channel(base.r), channel(base.g), channel(base.b)});
            }
    }
    return img;
}

std::string SimulatorEnvironment::a11y_text(const ManifestScreen& spec) const {
    std::string out;
    for (const FlatElement& fe : flatten_dom(spec.root)) {
        const DomElement& e = *fe.element;
        std::string classes;
        for (const auto& c : e.classes) classes += (classes.empty() ? "" : " ") + c;
        out += e.tag + " [" + classes + "] name-" + to_hex64(fnv64(e.id)).substr(12) +
               (e.clickable ? " actionable" : "") + "\n";
    }
    return out;
}

Screen SimulatorEnvironment::make_screen(const ManifestScreen& spec) {
    Screen s;
    s.source_label = spec.id;
    s.screenshot = render(spec, frame_);
    s.dom = spec.root;
    s.a11y = a11y_text(spec);
    return s;
}

SimulatorEnvironment::SimulatorEnvironment(EnvironmentManifest manifest)
    : manifest_(std::move(manifest)), current_(manifest_.initial) {
    manifest_.validate();
}

Screen SimulatorEnvironment::reset() {
    current_ = manifest_.initial;
    ++frame_;
    return make_screen(manifest_.screen(current_));
}

std::vector<Action> SimulatorEnvironment::get_candidate_actions(const Screen& screen) {
    if (!manifest_.has_screen(screen.source_label))
        throw EnvironmentError("candidate request for a screen this environment never produced");
    const ManifestScreen& spec = manifest_.screen(screen.source_label);
    std::vector<Action> out;
    for (const FlatElement& fe : flatten_dom(spec.root)) {
        const DomElement& e = *fe.element;
        if (!e.clickable) continue;
        Action a;
        a.type = ActionType::Click;
        a.source_screen_id = spec.id;
        a.target.full_page = false;
        a.target.element_id = e.id;
        a.target.dom_path = fe.path;
        a.target.tag = e.tag;
        a.target.classes = e.classes;
        a.target.box = e.box;
        a.target.patch = screen.screenshot.crop(e.box);
        a.key = make_action_key(spec.id, a.type, a.target);
        a.env_key = a.key;
        out.push_back(std::move(a));
    }
    if (spec.scrollable) {
        Action a;
        a.type = ActionType::Scroll;
        a.source_screen_id = spec.id;
        a.target.full_page = true;
        a.target.box = Rect{0, 0, manifest_.width, manifest_.height};
        a.target.patch = scroll_placeholder_patch();
        a.key = make_action_key(spec.id, a.type, a.target);
        a.env_key = a.key;
        out.push_back(std::move(a));
    }
    return out;
}

Screen SimulatorEnvironment::execute(const Action& action) {
    const ManifestScreen& spec = manifest_.screen(current_);
    ++frame_;
    if (action.type == ActionType::Scroll) {
        if (!spec.scrollable)
            throw ProtocolError("scroll executed on non-scrollable screen " + current_);
        if (spec.scroll_to) current_ = *spec.scroll_to;  // no scroll_to: stay (last page)
        return make_screen(manifest_.screen(current_));
    }
    const DomElement* e = find_element(spec.root, action.target.element_id);
    if (!e || !e->clickable)
        throw ProtocolError("stale action: element " + action.target.element_id +
                            " not on current screen " + current_);
    if (auto by_elem = manifest_.transitions.find(current_);
        by_elem != manifest_.transitions.end()) {
        if (auto it = by_elem->second.find(e->id); it != by_elem->second.end()) {
            current_ = it->second;
            return make_screen(manifest_.screen(current_));
        }
    }
    // invalid element: same screen, re-rendered
    return make_screen(spec);
}

Screen SimulatorEnvironment::observe() {
    ++frame_;
    return make_screen(manifest_.screen(current_));
}

}  // namespace guibee
