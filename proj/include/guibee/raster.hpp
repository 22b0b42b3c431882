#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "guibee/geometry.hpp"

namespace guibee {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    bool operator==(const Rgb&) const = default;
};

// Dense 8-bit RGB image. Archives store these as binary PPM (P6), which is
// lossless and byte-stable across runs.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, Rgb fill = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ <= 0 || height_ <= 0; }
    Rect bounds() const { return Rect{0, 0, width_, height_}; }

    Rgb at(int x, int y) const {
        const std::size_t i = idx(x, y);
        return Rgb{data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        const std::size_t i = idx(x, y);
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }

    const std::vector<std::uint8_t>& bytes() const { return data_; }
    std::vector<std::uint8_t>& bytes() { return data_; }

    Raster crop(const Rect& r) const;  // r is clipped to bounds
    void fill_rect(const Rect& r, Rgb c);
    // Rectangle outline of the given thickness, drawn inward from r's border.
    void draw_frame(const Rect& r, Rgb c, int thickness);
    // Small block digit(s), used for set-of-mark labels.
    void draw_label(Point top_left, int number, Rgb c);

    std::uint64_t digest() const;

    bool operator==(const Raster&) const = default;

private:
    std::size_t idx(int x, int y) const {
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

// 1-bit mask with the same geometry conventions as Raster. Serialized as
// binary PBM (P4). A set bit marks a pixel excluded from matching.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool fill = false);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ <= 0 || height_ <= 0; }

    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
    void set_rect(const Rect& r, bool v);

    std::size_t count_set() const;
    bool any() const { return count_set() > 0; }
    // True when every pixel of r is set.
    bool covers(const Rect& r) const;

    bool operator==(const Mask&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

// --- lossless encodings -----------------------------------------------------

std::vector<std::uint8_t> encode_ppm(const Raster& img);
Raster decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& what);

std::vector<std::uint8_t> encode_pbm(const Mask& mask);
Mask decode_pbm(const std::vector<std::uint8_t>& bytes, const std::string& what);

// PNG with stored (uncompressed) deflate blocks; no external codec. Used for
// oracle payloads, which expect a mainstream image format.
std::vector<std::uint8_t> encode_png(const Raster& img);

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

std::string base64_encode(const std::vector<std::uint8_t>& data);

}  // namespace guibee
