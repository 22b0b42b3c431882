#include "guibee/fuzzy_match.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "guibee/errors.hpp"

namespace guibee {

void MatchConfig::validate() const {
    if (!(identity_threshold > 0.0 && identity_threshold < 1.0))
        throw Error("identity_threshold must be in (0,1)");
    if (!(min_overlap >= 0.5 && min_overlap <= 1.0))
        throw Error("min_overlap must be in [0.5,1]");
    if (gaussian_sigma <= 0.0 || gaussian_kernel <= 0 || shift_step <= 0 || dynamic_frames <= 0)
        throw Error("pixel parameters must be positive");
    if (max_shift_frac < 0.0 || max_shift_frac > 1.0)
        throw Error("max_shift_frac must be in [0,1]");
    if (max_shift_px < 0) throw Error("max_shift_px must be >= 0");
}

FloatImage gaussian_smooth(const Raster& img, double sigma, int kernel) {
    const int k = kernel | 1;  // force odd
    const int r = k / 2;
    std::vector<float> w(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        const double d = i - r;
        w[static_cast<std::size_t>(i)] =
            static_cast<float>(std::exp(-(d * d) / (2.0 * sigma * sigma)));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& x : w) x = static_cast<float>(x / sum);

    const int width = img.width();
    const int height = img.height();
    const std::size_t plane = static_cast<std::size_t>(width) * height * 3;
    FloatImage tmp{width, height, std::vector<float>(plane)};
    FloatImage out{width, height, std::vector<float>(plane)};
    const std::uint8_t* src = img.bytes().data();

    // horizontal pass, edge clamp
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = src + static_cast<std::size_t>(y) * width * 3;
        float* trow = tmp.px.data() + static_cast<std::size_t>(y) * width * 3;
        for (int x = 0; x < width; ++x) {
            float acc0 = 0.f, acc1 = 0.f, acc2 = 0.f;
            if (x >= r && x + r < width) {
                const std::uint8_t* p = row + static_cast<std::size_t>(x - r) * 3;
                for (int i = 0; i < k; ++i, p += 3) {
                    acc0 += w[static_cast<std::size_t>(i)] * p[0];
                    acc1 += w[static_cast<std::size_t>(i)] * p[1];
                    acc2 += w[static_cast<std::size_t>(i)] * p[2];
                }
            } else {
                for (int i = -r; i <= r; ++i) {
                    const int xi = std::clamp(x + i, 0, width - 1);
                    const std::uint8_t* p = row + static_cast<std::size_t>(xi) * 3;
                    acc0 += w[static_cast<std::size_t>(i + r)] * p[0];
                    acc1 += w[static_cast<std::size_t>(i + r)] * p[1];
                    acc2 += w[static_cast<std::size_t>(i + r)] * p[2];
                }
            }
            trow[x * 3] = acc0;
            trow[x * 3 + 1] = acc1;
            trow[x * 3 + 2] = acc2;
        }
    }
    // vertical pass
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    for (int y = 0; y < height; ++y) {
        float* orow = out.px.data() + static_cast<std::size_t>(y) * stride;
        if (y >= r && y + r < height) {
            const float* base = tmp.px.data() + static_cast<std::size_t>(y - r) * stride;
            for (std::size_t x = 0; x < stride; ++x) {
                float acc = 0.f;
                const float* p = base + x;
                for (int i = 0; i < k; ++i, p += stride) acc += w[static_cast<std::size_t>(i)] * *p;
                orow[x] = acc;
            }
        } else {
            for (std::size_t x = 0; x < stride; ++x) {
                float acc = 0.f;
                for (int i = -r; i <= r; ++i) {
                    const int yi = std::clamp(y + i, 0, height - 1);
                    acc += w[static_cast<std::size_t>(i + r)] *
                           tmp.px[static_cast<std::size_t>(yi) * stride + x];
                }
                orow[x] = acc;
            }
        }
    }
    return out;
}

namespace {

// Per-shift aggregate with two running-sum cutoffs. `best_cut` prunes shifts
// that provably cannot beat the current minimum; `classify_cut` prunes shifts
// whose partial sum already proves a score above the identity threshold (the
// partial sum lower-bounds the final sum, so both cutoffs are sound for
// classification). Returns +inf for a pruned shift.
double score_at_shift(const FloatImage& a, const FloatImage& b, int dx, int dy, const Mask* mask,
                      ShiftAggregate aggregate, double best, double classify_bound) {
    const int x_lo = std::max(0, dx);
    const int y_lo = std::max(0, dy);
    const int x_hi = std::min(a.width, b.width + dx);
    const int y_hi = std::min(a.height, b.height + dy);
    if (x_lo >= x_hi || y_lo >= y_hi) return std::numeric_limits<double>::infinity();

    if (aggregate == ShiftAggregate::MaxPixel) {
        const double cut = std::min(best, classify_bound);
        double worst = 0.0;
        for (int y = y_lo; y < y_hi; ++y)
            for (int x = x_lo; x < x_hi; ++x) {
                if (mask && mask->at(x, y)) continue;
                double d = 0.0;
                for (int c = 0; c < 3; ++c)
                    d += std::abs(a.at(x, y, c) - b.at(x - dx, y - dy, c));
                worst = std::max(worst, d / (3.0 * 255.0));
                if (worst >= cut) return std::numeric_limits<double>::infinity();
            }
        return worst;
    }

    const long long total = static_cast<long long>(x_hi - x_lo) * (y_hi - y_lo);
    const double scale = static_cast<double>(total) * 3.0 * 255.0;
    const double cutoff = std::min(best, classify_bound) * scale;
    double sum = 0.0;
    long long counted = 0;
    const std::size_t stride_a = static_cast<std::size_t>(a.width) * 3;
    const std::size_t stride_b = static_cast<std::size_t>(b.width) * 3;
    for (int y = y_lo; y < y_hi; ++y) {
        const float* pa = a.px.data() + y * stride_a + static_cast<std::size_t>(x_lo) * 3;
        const float* pb =
            b.px.data() + (y - dy) * stride_b + static_cast<std::size_t>(x_lo - dx) * 3;
        if (!mask) {
            for (int x = x_lo; x < x_hi; ++x, pa += 3, pb += 3)
                sum += std::abs(pa[0] - pb[0]) + std::abs(pa[1] - pb[1]) + std::abs(pa[2] - pb[2]);
            counted += x_hi - x_lo;
        } else {
            for (int x = x_lo; x < x_hi; ++x, pa += 3, pb += 3) {
                if (mask->at(x, y)) continue;
                sum += std::abs(pa[0] - pb[0]) + std::abs(pa[1] - pb[1]) + std::abs(pa[2] - pb[2]);
                ++counted;
            }
        }
        if (sum >= cutoff && counted > 0) return std::numeric_limits<double>::infinity();
    }
    if (counted == 0) return 0.0;  // fully masked overlap: nothing differs
    return sum / (static_cast<double>(counted) * 3.0 * 255.0);
}

bool bytes_identical(const Raster& a, const Raster& b) {
    return a.width() == b.width() && a.height() == b.height() &&
           std::memcmp(a.bytes().data(), b.bytes().data(), a.bytes().size()) == 0;
}

}  // namespace

double patch_difference(const Raster& a, const Raster& b, const MatchConfig& cfg,
                        const Mask* mask) {
    if (a.empty() || b.empty()) throw Error("patch_difference: empty patch");
    if (mask && (mask->width() != a.width() || mask->height() != a.height()))
        throw Error("patch_difference: mask dimensions must match first patch");

    // identical bytes smooth to identical planes
    if (bytes_identical(a, b)) return 0.0;

    const FloatImage sa = gaussian_smooth(a, cfg.gaussian_sigma, cfg.gaussian_kernel);
    const FloatImage sb = gaussian_smooth(b, cfg.gaussian_sigma, cfg.gaussian_kernel);

    const long long min_area = static_cast<long long>(
        std::ceil(cfg.min_overlap *
                  static_cast<double>(std::max(a.bounds().area(), b.bounds().area()))));
    int bound_x = static_cast<int>(cfg.max_shift_frac * std::min(a.width(), b.width()));
    int bound_y = static_cast<int>(cfg.max_shift_frac * std::min(a.height(), b.height()));
    bound_x = std::min(bound_x, cfg.max_shift_px);
    bound_y = std::min(bound_y, cfg.max_shift_px);

    std::vector<std::pair<int, int>> shifts;
    for (int dy = -bound_y; dy <= bound_y; dy += cfg.shift_step)
        for (int dx = -bound_x; dx <= bound_x; dx += cfg.shift_step) {
            if (dx == 0 && dy == 0) continue;
            const long long ow = std::min(a.width(), b.width() + dx) - std::max(0, dx);
            const long long oh = std::min(a.height(), b.height() + dy) - std::max(0, dy);
            if (ow <= 0 || oh <= 0) continue;
            if (ow * oh < min_area) continue;
            shifts.emplace_back(dx, dy);
        }
    // zero shift first, then outward; deterministic order
    std::stable_sort(shifts.begin(), shifts.end(), [](auto l, auto r) {
        const int ml = std::abs(l.first) + std::abs(l.second);
        const int mr = std::abs(r.first) + std::abs(r.second);
        if (ml != mr) return ml < mr;
        if (l.second != r.second) return l.second < r.second;
        return l.first < r.first;
    });

    // The zero-shift score is always computed exactly; shifted alignments are
    // pruned once they provably classify above the threshold, so the returned
    // value is the exact minimum whenever it is at or below the threshold.
    const double inf = std::numeric_limits<double>::infinity();
    double best = score_at_shift(sa, sb, 0, 0, mask, cfg.aggregate, inf, inf);
    if (best <= cfg.identity_threshold) return std::clamp(best, 0.0, 1.0);
    for (const auto& [dx, dy] : shifts) {
        const double s =
            score_at_shift(sa, sb, dx, dy, mask, cfg.aggregate, best, cfg.identity_threshold);
        if (s < best) best = s;
        if (best <= cfg.identity_threshold) break;
    }
    return std::clamp(best, 0.0, 1.0);
}

ScreenMatch screens_equal(const Screen& a, const Screen& b, const MatchConfig& cfg) {
    if (b.width() < a.width() || b.height() < a.height()) return ScreenMatch{false, 1.0};

    const Mask* mask = a.dynamic_mask ? &*a.dynamic_mask : nullptr;
    double p = 0.0;
    for (const FlatElement& fe : flatten_dom(a.dom)) {
        if (!fe.element->children.empty()) continue;  // leaves carry the pixels
        const Rect box = fe.element->box.intersect(a.screenshot.bounds());
        if (box.empty()) continue;
        if (mask && mask->covers(box)) continue;  // fully dynamic, excluded

        const Raster pa = a.screenshot.crop(box);
        const Raster pb = b.screenshot.crop(box);
        std::optional<Mask> sub;
        if (mask) {
            Mask m(box.width(), box.height());
            for (int y = 0; y < box.height(); ++y)
                for (int x = 0; x < box.width(); ++x) m.set(x, y, mask->at(box.x0 + x, box.y0 + y));
            sub = std::move(m);
        }
        p = std::max(p, patch_difference(pa, pb, cfg, sub ? &*sub : nullptr));
    }
    return ScreenMatch{p <= cfg.identity_threshold, p};
}

Mask dynamic_region_mask(const std::vector<Raster>& frames, const MatchConfig& cfg) {
    if (frames.empty()) return Mask();
    const int w = frames[0].width();
    const int h = frames[0].height();
    if (frames.size() < 2) return Mask(w, h);
    for (const auto& f : frames)
        if (f.width() != w || f.height() != h)
            throw Error("dynamic_region_mask: frames must share dimensions");

    // all frames identical is the common case for static screens
    bool identical = true;
    for (std::size_t i = 1; identical && i < frames.size(); ++i)
        identical = bytes_identical(frames[i], frames[0]);
    if (identical) return Mask(w, h);

    Mask mask(w, h);
    std::vector<FloatImage> smoothed;
    smoothed.reserve(frames.size());
    for (const auto& f : frames)
        smoothed.push_back(gaussian_smooth(f, cfg.gaussian_sigma, cfg.gaussian_kernel));

    const float limit = static_cast<float>(cfg.identity_threshold * 255.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool dynamic = false;
            for (int c = 0; c < 3 && !dynamic; ++c) {
                float lo = smoothed[0].at(x, y, c);
                float hi = lo;
                for (std::size_t i = 1; i < smoothed.size(); ++i) {
                    const float v = smoothed[i].at(x, y, c);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                dynamic = (hi - lo) > limit;
            }
            if (dynamic) mask.set(x, y, true);
        }
    return mask;
}

std::vector<RankedElement> most_similar_elements(
    const Raster& target, const std::vector<std::pair<std::string, Raster>>& pool,
    const MatchConfig& cfg) {
    std::vector<RankedElement> out;
    out.reserve(pool.size());
    for (const auto& [key, patch] : pool)
        out.push_back(RankedElement{key, patch_difference(target, patch, cfg)});
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedElement& l, const RankedElement& r) { return l.score < r.score; });
    return out;
}

}  // namespace guibee
