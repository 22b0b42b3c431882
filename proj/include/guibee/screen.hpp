#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guibee/dom.hpp"
#include "guibee/raster.hpp"

namespace guibee {

// One GUI state: what the agent saw on screen at a point in time.
struct Screen {
    std::string id;            // unique within a graph; assigned at insertion
    std::string source_label;  // environment-side identity, provenance only
    Raster screenshot;
    DomElement dom;
    std::string a11y;
    std::optional<Mask> dynamic_mask;  // regions excluded from matching

    int width() const { return screenshot.width(); }
    int height() const { return screenshot.height(); }
};

enum class ActionType { Click, Scroll };

std::string to_string(ActionType t);
ActionType action_type_from_string(const std::string& s);

// What an action points at: a concrete element, or the full page for scroll.
struct ActionTarget {
    bool full_page = false;
    std::string element_id;  // empty for full page
    std::string dom_path;
    std::string tag;
    std::vector<std::string> classes;
    Rect box;
    Raster patch;  // cropped element pixels; fixed placeholder for full page

    std::string label() const {
        if (full_page) return "full page";
        std::string cls;
        for (const auto& c : classes) cls += (cls.empty() ? "" : " ") + c;
        return tag + (cls.empty() ? "" : "." + cls);
    }
};

// An executable step. The key ties Q-values to "the same control on the same
// screen": identical (source node, element identity, type) always produces
// the same key, so revisits share state.
struct Action {
    ActionType type = ActionType::Click;
    std::string source_screen_id;
    ActionTarget target;
    std::string key;
    std::string env_key;  // key as minted by the environment; adapter wire id

    // Recomputes the key against a graph node id. Candidates come off the
    // environment keyed to its own screen identity; the exploration loop
    // rebinds them to the matched node before any Q-table access. env_key is
    // preserved so the action can still be named on the environment's wire.
    Action rebound(const std::string& node_id) const;
};

std::string make_action_key(const std::string& source_id, ActionType type,
                            const ActionTarget& target);

}  // namespace guibee
