#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guibee/raster.hpp"
#include "guibee/screen.hpp"

namespace guibee {

enum class ShiftAggregate { MeanAbs, MaxPixel };

struct MatchConfig {
    double identity_threshold = 0.05;  // scores at or below mean "same"
    double min_overlap = 0.75;         // fraction of patch area that must align
    double gaussian_sigma = 1.0;
    int gaussian_kernel = 5;
    int shift_step = 1;
    int dynamic_frames = 3;     // frames sampled when probing for animation
    double max_shift_frac = 0.25;  // shift bound per axis; 0 disables shifts
    int max_shift_px = 16;         // absolute cap so full-page patches stay tractable
    ShiftAggregate aggregate = ShiftAggregate::MeanAbs;

    void validate() const;
};

// Smoothed pixels in [0, 255], channel-interleaved floats.
struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> px;

    float at(int x, int y, int c) const {
        return px[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

FloatImage gaussian_smooth(const Raster& img, double sigma, int kernel);

// Shift-tolerant difference score in [0, 1] between two patches. Both are
// smoothed, then b is slid over a through every integer shift that keeps the
// overlap above cfg.min_overlap; the result is the best (lowest) per-shift
// aggregate of normalized per-pixel differences. A shift at or below
// cfg.identity_threshold short-circuits the search. If no shift satisfies the
// overlap bound the patches are compared at zero shift only.
//
// `mask`, when given, must match a's dimensions; masked pixels are excluded.
double patch_difference(const Raster& a, const Raster& b, const MatchConfig& cfg,
                        const Mask* mask = nullptr);

struct ScreenMatch {
    bool equal = false;
    double score = 0.0;  // max over elements of patch_difference
};

// Compares every leaf DOM element of `a` against the same-coordinates crop of
// `b` (containers contribute through their descendants). Elements fully inside
// a's dynamic mask are skipped; partially masked ones carry the mask into the
// patch comparison. `b` smaller than `a` in either dimension is never equal
// (score 1).
ScreenMatch screens_equal(const Screen& a, const Screen& b, const MatchConfig& cfg);

// Marks pixels whose smoothed value varies beyond the identity threshold
// across any pair of frames. Fewer than two frames give an empty mask.
Mask dynamic_region_mask(const std::vector<Raster>& frames, const MatchConfig& cfg);

struct RankedElement {
    std::string key;
    double score = 0.0;
};

// Pool entries sorted by ascending visual difference to `target`; stable, so
// ties keep pool order.
std::vector<RankedElement> most_similar_elements(
    const Raster& target, const std::vector<std::pair<std::string, Raster>>& pool,
    const MatchConfig& cfg);

}  // namespace guibee
