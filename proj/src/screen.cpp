#include "guibee/screen.hpp"

#include "guibee/errors.hpp"
#include "guibee/hash.hpp"

namespace guibee {

std::string to_string(ActionType t) { return t == ActionType::Click ? "click" : "scroll"; }

ActionType action_type_from_string(const std::string& s) {
    if (s == "click") return ActionType::Click;
    if (s == "scroll") return ActionType::Scroll;
    throw Error("unknown action type: " + s);
}

std::string make_action_key(const std::string& source_id, ActionType type,
                            const ActionTarget& target) {
    Fnv64 h;
    h.field(source_id);
    h.field(to_string(type));
    if (target.full_page) {
        h.field("full_page");
    } else {
        h.field(target.dom_path);
        for (const auto& c : target.classes) h.field(c);
    }
    return h.hex();
}

Action Action::rebound(const std::string& node_id) const {
    Action out = *this;
    out.source_screen_id = node_id;
    out.key = make_action_key(node_id, type, target);
    return out;
}

}  // namespace guibee
