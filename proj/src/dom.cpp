#include "guibee/dom.hpp"

#include "guibee/errors.hpp"

namespace guibee {

namespace {

void flatten_into(const DomElement& e, const std::string& path, int depth,
                  std::vector<FlatElement>& out) {
    out.push_back(FlatElement{&e, path, depth});
    for (std::size_t i = 0; i < e.children.size(); ++i)
        flatten_into(e.children[i], path + "/" + std::to_string(i) + ":" + e.children[i].tag,
                     depth + 1, out);
}

}  // namespace

std::vector<FlatElement> flatten_dom(const DomElement& root) {
    std::vector<FlatElement> out;
    flatten_into(root, "root", 1, out);
    return out;
}

const DomElement* find_element(const DomElement& root, const std::string& id) {
    if (root.id == id) return &root;
    for (const auto& c : root.children)
        if (const DomElement* hit = find_element(c, id)) return hit;
    return nullptr;
}

nlohmann::json dom_to_json(const DomElement& e) {
    nlohmann::json j;
    j["id"] = e.id;
    j["tag"] = e.tag;
    j["classes"] = e.classes;
    j["box"] = {e.box.x0, e.box.y0, e.box.x1, e.box.y1};
    j["clickable"] = e.clickable;
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : e.children) kids.push_back(dom_to_json(c));
    j["children"] = kids;
    return j;
}

DomElement dom_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_object()) throw ArchiveError(what + ": DOM element is not an object");
    DomElement e;
    try {
        e.id = j.at("id").get<std::string>();
        e.tag = j.at("tag").get<std::string>();
        e.classes = j.at("classes").get<std::vector<std::string>>();
        const auto& b = j.at("box");
        e.box = Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        e.clickable = j.at("clickable").get<bool>();
        for (const auto& c : j.at("children")) e.children.push_back(dom_from_json(c, what));
    } catch (const nlohmann::json::exception& ex) {
        throw ArchiveError(what + ": bad DOM element (" + ex.what() + ")");
    }
    return e;
}

}  // namespace guibee
