#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "guibee/geometry.hpp"

namespace guibee {

// One element of a screen's DOM-like tree. `clickable` is the executability
// flag exposed by the environment: the element is advertised as actionable,
// which says nothing about whether clicking it actually does anything.
struct DomElement {
    std::string id;
    std::string tag;
    std::vector<std::string> classes;
    Rect box;
    bool clickable = false;
    std::vector<DomElement> children;

    bool operator==(const DomElement&) const = default;
};

// Flattened view of an element plus its position in the tree.
struct FlatElement {
    const DomElement* element = nullptr;
    std::string path;  // e.g. "root/1:div/0:button"
    int depth = 1;     // root = 1
};

// Depth-first pre-order flattening (document order).
std::vector<FlatElement> flatten_dom(const DomElement& root);

// Finds an element by id anywhere in the tree; nullptr when absent.
const DomElement* find_element(const DomElement& root, const std::string& id);

nlohmann::json dom_to_json(const DomElement& e);
DomElement dom_from_json(const nlohmann::json& j, const std::string& what);

}  // namespace guibee
