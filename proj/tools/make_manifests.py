#!/usr/bin/env python3
"""Regenerates the bundled environment manifests under assets/manifests/.

Deterministic by construction: rerunning produces byte-identical files. Each
environment keeps every screen's depth-3 class structure distinct (a unique
screen class sits at depth 2), so DOM signatures are collision-free.
"""

import json
import os

W, H = 512, 384
OUT = os.path.join(os.path.dirname(__file__), "..", "assets", "manifests")


def elem(eid, tag, classes, box, clickable=False, children=None):
    return {
        "id": eid,
        "tag": tag,
        "classes": classes,
        "box": list(box),
        "clickable": clickable,
        "children": children or [],
    }


class Builder:
    def __init__(self, name, style, render_seed):
        self.name = name
        self.style = style
        self.render_seed = render_seed
        self.screens = []
        self.transitions = []
        self.invalid = []
        self.initial = None

    def screen(self, sid, children, animated_box=None, scrollable=False, scroll_to=None):
        root = elem("root", "body", ["page", self.style], (0, 0, W, H), children=children)
        self.screens.append(
            {
                "id": sid,
                "dom": root,
                "animated_box": list(animated_box) if animated_box else None,
                "scrollable": bool(scrollable or scroll_to),
                "scroll_to": scroll_to,
            }
        )

    def link(self, frm, element, to):
        self.transitions.append({"from": frm, "element": element, "to": to})

    def dead(self, screen, element):
        self.invalid.append({"screen": screen, "element": element})

    def dump(self):
        payload = {
            "format_version": 1,
            "name": self.name,
            "render_seed": self.render_seed,
            "width": W,
            "height": H,
            "initial": self.initial,
            "screens": self.screens,
            "transitions": self.transitions,
            "invalid_elements": self.invalid,
        }
        path = os.path.join(OUT, self.name + ".json")
        with open(path, "w") as f:
            json.dump(payload, f, indent=1, sort_keys=True)
            f.write("\n")
        print(f"{self.name}: {len(self.screens)} screens -> {path}")


def title(sid, text_width=300):
    # unique screen class at depth 2 keeps signatures collision-free
    return elem("title", "h1", ["title", "t-" + sid], (8, 4, 8 + text_width, 30))


def navbar(sid, entries, b):
    """Horizontal nav with one button per (label, destination). Shared layout."""
    buttons = []
    x = 14
    for label, dest in entries:
        eid = "nav_" + label
        buttons.append(elem(eid, "button", ["nav", "nav-" + label], (x, 40, x + 86, 64), True))
        if dest is None:
            b.dead(sid, eid)
        else:
            b.link(sid, eid, dest)
        x += 94
    return elem("nav", "div", ["navbar"], (8, 36, x, 68), children=buttons)


def footer(sid, b, extra=None):
    kids = [elem("foot_note", "span", ["fineprint"], (16, 358, 216, 376))]
    if extra:
        label, dest = extra
        kids.append(elem("foot_" + label, "a", ["footlink", label], (236, 358, 336, 376), True))
        if dest is None:
            b.dead(sid, "foot_" + label)
        else:
            b.link(sid, "foot_" + label, dest)
    return elem("footer", "div", ["footer"], (8, 352, 380, 380), children=kids)


def badge(sid, b, eid="promo", x=400, y=40, w=96):
    """Clickable-looking element that goes nowhere: the noisy action space."""
    e = elem(eid, "button", ["badge", "shiny"], (x, y, x + w, y + 24), True)
    b.dead(sid, eid)
    return e


# --- atelier: icon-dense tool studio ---------------------------------------------


def make_atelier():
    b = Builder("atelier", "icons", 11)
    hubs = ["draw", "color", "lens", "paper"]
    nav = [(h, h + "_p0") for h in hubs]

    b.initial = "home"
    b.screen(
        "home",
        [
            title("home"),
            navbar("home", nav, b),
            elem(
                "hero",
                "div",
                ["panel", "hero"],
                (14, 80, 340, 200),
                children=[
                    elem("hero_text", "p", ["blurb"], (22, 90, 330, 150)),
                    elem("hero_go", "button", ["cta", "big"], (22, 160, 122, 190), True),
                ],
            ),
            badge("home", b),
            elem("tip", "aside", ["tipbox"], (360, 90, 500, 200)),
            footer("home", b, ("about", "about")),
        ],
    )
    b.link("home", "hero_go", "draw_p0")

    tools_per_hub = 12
    icons_per_page = 4
    pages = 3
    for hi, hub in enumerate(hubs):
        # icon grid spread over three scroll pages
        for page in range(pages):
            sid = f"{hub}_p{page}"
            icons = []
            start = page * icons_per_page
            stop = min(start + icons_per_page, tools_per_hub)
            for i in range(start, stop):
                col = (i - start) % icons_per_page
                x = 20 + col * 64
                y = 128
                eid = f"icon_{i}"
                icons.append(
                    elem(eid, "button", ["icon", f"tool-{hub}-{i}"], (x, y, x + 44, y + 44), True)
                )
                b.link(sid, eid, f"{hub}_t{i}")
            grid = elem("grid", "div", ["icon-grid"], (14, 116, 350, 190), children=icons)
            children = [title(sid), navbar(sid, nav, b), grid]
            if page == 0:
                children.append(badge(sid, b, eid="spark", x=380, y=120))
                # animated preview strip on the first hub page
                children.append(elem("banner", "div", ["banner", "anim"], (380, 170, 496, 220)))
                b.screen(
                    sid,
                    children + [footer(sid, b)],
                    animated_box=(380, 170, 496, 220),
                    scroll_to=f"{hub}_p1",
                )
            elif page < pages - 1:
                children.append(elem("hint", "aside", ["tipbox"], (380, 120, 496, 220)))
                b.screen(sid, children + [footer(sid, b)], scroll_to=f"{hub}_p{page + 1}")
            else:
                children.append(elem("hint", "aside", ["tipbox"], (380, 120, 496, 220)))
                b.screen(sid, children + [footer(sid, b)], scrollable=True, scroll_to=None)

        for i in range(tools_per_hub):
            sid = f"{hub}_t{i}"
            nxt = f"{hub}_t{(i + 1) % tools_per_hub}"
            b.screen(
                sid,
                [
                    title(sid),
                    navbar(sid, nav, b),
                    elem("preview", "div", ["canvas", f"tone-{i % 4}"], (14, 84, 300, 300)),
                    elem("apply", "button", ["cta", "apply"], (320, 100, 430, 132), True),
                    elem("next_tool", "button", ["ghost", "next"], (320, 144, 430, 176), True),
                    badge(sid, b, eid="fav", x=320, y=190, w=50),
                    badge(sid, b, eid="pin", x=380, y=190, w=50),
                    elem("spec", "aside", ["specs"], (320, 224, 496, 300)),
                    footer(sid, b),
                ],
            )
            b.link(sid, "apply", f"{hub}_p0")
            b.link(sid, "next_tool", nxt)

    b.screen(
        "about",
        [
            title("about"),
            elem("text1", "p", ["prose"], (20, 60, 480, 180)),
            elem("text2", "p", ["prose", "fine"], (20, 200, 480, 330)),
        ],
    )  # dead end: nothing clickable, no scroll
    b.dump()


# --- bazaar: image-dense marketplace ----------------------------------------------


def make_bazaar():
    b = Builder("bazaar", "images", 23)
    cats = ["gems", "maps", "relics"]
    nav = [(c, c + "_p0") for c in cats] + [("cart", "cart")]

    b.initial = "home"
    b.screen(
        "home",
        [
            title("home"),
            navbar("home", nav, b),
            elem(
                "feature",
                "div",
                ["panel", "feature"],
                (14, 84, 330, 260),
                children=[
                    elem("feat_img", "img", ["photo", "wide"], (22, 92, 322, 200)),
                    elem("feat_buy", "button", ["cta", "buy"], (22, 210, 122, 244), True),
                ],
            ),
            badge("home", b, eid="deal", x=360, y=84),
            elem("teaser", "aside", ["tipbox"], (360, 130, 500, 260)),
            footer("home", b, ("terms", "terms")),
        ],
    )
    b.link("home", "feat_buy", "gems_i0")

    pages = 4
    per_page = 4
    for cat in cats:
        for page in range(pages):
            sid = f"{cat}_p{page}"
            cards = []
            for k in range(per_page):
                idx = page * per_page + k
                col = k % 2
                row = k // 2
                x = 16 + col * 180
                y = 86 + row * 124
                cards.append(
                    elem(
                        f"card_{idx}",
                        "div",
                        ["card"],
                        (x, y, x + 168, y + 112),
                        children=[
                            elem(f"thumb_{idx}", "img", ["photo", f"sku-{cat}-{idx}"],
                                 (x + 6, y + 6, x + 86, y + 86)),
                            elem(f"open_{idx}", "button", ["open"],
                                 (x + 94, y + 10, x + 160, y + 38), True),
                            elem(f"price_{idx}", "span", ["price"],
                                 (x + 94, y + 48, x + 160, y + 70)),
                        ],
                    )
                )
                b.link(sid, f"open_{idx}", f"{cat}_i{idx}")
            children = [title(sid), navbar(sid, nav, b),
                        elem("list", "div", ["cardlist"], (10, 80, 384, 340), children=cards)]
            if page == 0:
                children.append(badge(sid, b, eid="sale", x=400, y=86))
                children.append(elem("live", "div", ["banner", "anim"], (400, 130, 500, 180)))
                b.screen(sid, children + [footer(sid, b)],
                         animated_box=(400, 130, 500, 180), scroll_to=f"{cat}_p1")
            elif page < pages - 1:
                children.append(elem("filler", "aside", ["tipbox"], (400, 86, 500, 180)))
                b.screen(sid, children + [footer(sid, b)], scroll_to=f"{cat}_p{page + 1}")
            else:
                children.append(elem("filler", "aside", ["tipbox"], (400, 86, 500, 180)))
                b.screen(sid, children + [footer(sid, b)], scrollable=True, scroll_to=None)

        for idx in range(pages * per_page):
            sid = f"{cat}_i{idx}"
            b.screen(
                sid,
                [
                    title(sid),
                    navbar(sid, nav, b),
                    elem("gallery", "img", ["photo", "large", f"sku-{cat}-{idx}"],
                         (14, 84, 280, 300)),
                    elem("add", "button", ["cta", "add"], (300, 100, 420, 134), True),
                    elem("related", "button", ["ghost", "rel"], (300, 146, 420, 178), True),
                    badge(sid, b, eid="wish", x=430, y=100, w=60),
                    badge(sid, b, eid="share", x=430, y=146, w=60),
                    elem("blurb", "p", ["prose"], (300, 192, 500, 300)),
                    footer(sid, b),
                ],
            )
            b.link(sid, "add", "cart")
            b.link(sid, "related", f"{cat}_i{(idx + 5) % (pages * per_page)}")

    b.screen(
        "cart",
        [
            title("cart"),
            navbar("cart", nav, b),
            elem("lines", "div", ["cartlines"], (14, 84, 380, 260)),
            elem("checkout", "button", ["cta", "pay"], (396, 100, 500, 140), True),
            footer("cart", b),
        ],
    )
    b.link("cart", "checkout", "paid")
    b.screen(
        "paid",
        [
            title("paid"),
            elem("receipt", "div", ["receipt"], (40, 60, 460, 220)),
            elem("back_home", "button", ["cta"], (40, 240, 180, 276), True),
        ],
    )
    b.link("paid", "back_home", "home")
    b.screen(
        "terms",
        [
            title("terms"),
            elem("legal1", "p", ["prose", "fine"], (20, 60, 480, 200)),
            elem("legal2", "p", ["prose", "fine"], (20, 214, 480, 340)),
        ],
    )  # dead end
    b.dump()


# --- gazette: text-dense forum -----------------------------------------------------


def make_gazette():
    b = Builder("gazette", "text", 37)
    sections = ["wire", "ideas", "field", "letters"]
    nav = [(s, s + "_p0") for s in sections]
    threads_per_section = 6

    b.initial = "home"
    b.screen(
        "home",
        [
            title("home"),
            navbar("home", nav, b),
            elem(
                "headlines",
                "div",
                ["panel", "headlines"],
                (14, 80, 500, 230),
                children=[
                    elem("head_0", "a", ["headline"], (22, 88, 492, 112), True),
                    elem("head_1", "a", ["headline"], (22, 120, 492, 144), True),
                    elem("head_2", "a", ["headline"], (22, 152, 492, 176), True),
                    elem("motto", "span", ["fineprint"], (22, 186, 300, 206)),
                ],
            ),
            badge("home", b, eid="subscribe", x=14, y=246),
            footer("home", b, ("archive", "archive")),
        ],
    )
    b.link("home", "head_0", "wire_t0_p0")
    b.link("home", "head_1", "ideas_t1_p0")
    b.link("home", "head_2", "field_t2_p0")

    for sec in sections:
        for page in (0, 1):
            sid = f"{sec}_p{page}"
            rows = []
            start = 0 if page == 0 else 3
            stop = 3 if page == 0 else threads_per_section
            for i in range(start, stop):
                y = 88 + (i - start) * 56
                rows.append(
                    elem(
                        f"row_{i}",
                        "div",
                        ["threadrow"],
                        (14, y, 430, y + 48),
                        children=[
                            elem(f"thread_{i}", "a", ["threadlink"],
                                 (20, y + 6, 330, y + 30), True),
                            elem(f"meta_{i}", "span", ["meta"], (340, y + 8, 424, y + 28)),
                        ],
                    )
                )
                b.link(sid, f"thread_{i}", f"{sec}_t{i}_p0")
            children = [title(sid), navbar(sid, nav, b)] + rows
            if page == 0:
                children.append(badge(sid, b, eid="pinned", x=436, y=88, w=64))
                b.screen(sid, children + [footer(sid, b)], scroll_to=f"{sec}_p1")
            else:
                children.append(elem("ticker", "div", ["banner", "anim"], (440, 88, 500, 250)))
                b.screen(sid, children + [footer(sid, b)],
                         animated_box=(440, 88, 500, 250), scrollable=True, scroll_to=None)

        for i in range(threads_per_section):
            for page in (0, 1):
                sid = f"{sec}_t{i}_p{page}"
                posts = []
                for k in range(3):
                    y = 88 + k * 74
                    posts.append(
                        elem(
                            f"post_{page}_{k}",
                            "div",
                            ["post"],
                            (14, y, 460, y + 64),
                            children=[
                                elem(f"body_{page}_{k}", "p", ["postbody"],
                                     (20, y + 6, 380, y + 58)),
                                elem(f"vote_{page}_{k}", "button", ["vote"],
                                     (390, y + 10, 452, y + 34), True),
                            ],
                        )
                    )
                    # votes re-render the same screen: realistic invalid actions
                    b.dead(sid, f"vote_{page}_{k}")
                children = [title(sid), navbar(sid, nav, b)] + posts
                if page == 0:
                    b.screen(sid, children + [footer(sid, b)], scroll_to=f"{sec}_t{i}_p1")
                else:
                    children.append(
                        elem("reply", "button", ["cta", "reply"], (14, 318, 120, 344), True))
                    b.link(sid, "reply", f"{sec}_p0")
                    b.screen(sid, children + [footer(sid, b)], scrollable=True, scroll_to=None)

    b.screen(
        "archive",
        [
            title("archive"),
            elem("stacks1", "p", ["prose", "fine"], (20, 60, 480, 190)),
            elem("stacks2", "p", ["prose", "fine"], (20, 204, 480, 340)),
        ],
    )  # dead end
    b.dump()


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    make_atelier()
    make_bazaar()
    make_gazette()
