#include "guibee/raster.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "guibee/errors.hpp"
#include "guibee/hash.hpp"

namespace guibee {

Raster::Raster(int width, int height, Rgb fill) : width_(width), height_(height) {
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

Raster Raster::crop(const Rect& r) const {
    Rect c = r.intersect(bounds());
    Raster out(std::max(c.width(), 0), std::max(c.height(), 0));
    const std::size_t row_bytes = static_cast<std::size_t>(out.width()) * 3;
    for (int y = 0; y < out.height(); ++y)
        std::memcpy(out.data_.data() + static_cast<std::size_t>(y) * row_bytes,
                    data_.data() + idx(c.x0, c.y0 + y), row_bytes);
    return out;
}

void Raster::fill_rect(const Rect& r, Rgb c) {
    Rect cl = r.intersect(bounds());
    for (int y = cl.y0; y < cl.y1; ++y)
        for (int x = cl.x0; x < cl.x1; ++x) set(x, y, c);
}

void Raster::draw_frame(const Rect& r, Rgb c, int thickness) {
    Rect cl = r.intersect(bounds());
    if (cl.empty()) return;
    const int t = std::max(1, thickness);
    fill_rect(Rect{cl.x0, cl.y0, cl.x1, std::min(cl.y0 + t, cl.y1)}, c);
    fill_rect(Rect{cl.x0, std::max(cl.y1 - t, cl.y0), cl.x1, cl.y1}, c);
    fill_rect(Rect{cl.x0, cl.y0, std::min(cl.x0 + t, cl.x1), cl.y1}, c);
    fill_rect(Rect{std::max(cl.x1 - t, cl.x0), cl.y0, cl.x1, cl.y1}, c);
}

namespace {

// 3x5 digit glyphs, one bit per cell, row-major top to bottom.
constexpr std::array<std::uint16_t, 10> kDigits = {
    0b111101101101111,  // 0
    0b010110010010111,  // 1
    0b111001111100111,  // 2
    0b111001111001111,  // 3
    0b101101111001001,  // 4
    0b111100111001111,  // 5
    0b111100111101111,  // 6
    0b111001001001001,  // 7
    0b111101111101111,  // 8
    0b111101111001111,  // 9
};

}  // namespace

void Raster::draw_label(Point top_left, int number, Rgb c) {
    const std::string digits = std::to_string(number);
    const int scale = 2;
    int cx = top_left.x;
    for (char ch : digits) {
        if (ch < '0' || ch > '9') continue;
        const std::uint16_t glyph = kDigits[static_cast<std::size_t>(ch - '0')];
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 3; ++col)
                if (glyph >> (14 - (row * 3 + col)) & 1)
                    fill_rect(Rect{cx + col * scale, top_left.y + row * scale,
                                   cx + (col + 1) * scale, top_left.y + (row + 1) * scale},
                              c);
        cx += 4 * scale;
    }
}

std::uint64_t Raster::digest() const {
    Fnv64 h;
    h.field(std::to_string(width_));
    h.field(std::to_string(height_));
    h.update(data_.data(), data_.size());
    return h.value();
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

void Mask::set_rect(const Rect& r, bool v) {
    Rect cl = r.intersect(Rect{0, 0, width_, height_});
    for (int y = cl.y0; y < cl.y1; ++y)
        for (int x = cl.x0; x < cl.x1; ++x) set(x, y, v);
}

std::size_t Mask::count_set() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
}

bool Mask::covers(const Rect& r) const {
    if (r.empty()) return true;
    if (r.x0 < 0 || r.y0 < 0 || r.x1 > width_ || r.y1 > height_) return false;
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x)
            if (!at(x, y)) return false;
    return true;
}

// --- PPM / PBM ---------------------------------------------------------------

std::vector<std::uint8_t> encode_ppm(const Raster& img) {
    std::string header = "P6\n" + std::to_string(img.width()) + " " +
                         std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.bytes().begin(), img.bytes().end());
    return out;
}

namespace {

struct ByteReader {
    const std::vector<std::uint8_t>& data;
    const std::string& what;
    std::size_t pos = 0;

    int next_token_int() {
        // skip whitespace and '#' comments
        while (pos < data.size()) {
            char c = static_cast<char>(data[pos]);
            if (c == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
        long v = 0;
        bool got = false;
        while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
            v = v * 10 + (data[pos] - '0');
            got = true;
            ++pos;
        }
        if (!got) throw ArchiveError(what + ": malformed netpbm header");
        return static_cast<int>(v);
    }
    void expect_magic(const char* magic) {
        if (data.size() < 2 || data[0] != static_cast<std::uint8_t>(magic[0]) ||
            data[1] != static_cast<std::uint8_t>(magic[1]))
            throw ArchiveError(what + ": not a " + std::string(magic) + " file");
        pos = 2;
    }
};

}  // namespace

Raster decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& what) {
    ByteReader r{bytes, what};
    r.expect_magic("P6");
    const int w = r.next_token_int();
    const int h = r.next_token_int();
    const int maxval = r.next_token_int();
    if (maxval != 255) throw ArchiveError(what + ": unsupported maxval " + std::to_string(maxval));
    ++r.pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() - r.pos < need) throw ArchiveError(what + ": truncated pixel data");
    Raster img(w, h);
    std::copy(bytes.begin() + static_cast<long>(r.pos),
              bytes.begin() + static_cast<long>(r.pos + need), img.bytes().begin());
    return img;
}

std::vector<std::uint8_t> encode_pbm(const Mask& mask) {
    std::string header = "P4\n" + std::to_string(mask.width()) + " " +
                         std::to_string(mask.height()) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const int row_bytes = (mask.width() + 7) / 8;
    for (int y = 0; y < mask.height(); ++y) {
        for (int bx = 0; bx < row_bytes; ++bx) {
            std::uint8_t b = 0;
            for (int bit = 0; bit < 8; ++bit) {
                const int x = bx * 8 + bit;
                if (x < mask.width() && mask.at(x, y)) b |= static_cast<std::uint8_t>(0x80 >> bit);
            }
            out.push_back(b);
        }
    }
    return out;
}

Mask decode_pbm(const std::vector<std::uint8_t>& bytes, const std::string& what) {
    ByteReader r{bytes, what};
    r.expect_magic("P4");
    const int w = r.next_token_int();
    const int h = r.next_token_int();
    ++r.pos;
    const int row_bytes = (w + 7) / 8;
    const std::size_t need = static_cast<std::size_t>(row_bytes) * h;
    if (bytes.size() - r.pos < need) throw ArchiveError(what + ": truncated mask data");
    Mask mask(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t b = bytes[r.pos + static_cast<std::size_t>(y) * row_bytes + x / 8];
            mask.set(x, y, (b >> (7 - x % 8)) & 1);
        }
    return mask;
}

// --- PNG (stored deflate) ----------------------------------------------------

namespace {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    crc ^= 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

void push_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                const std::vector<std::uint8_t>& payload) {
    push_u32be(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    push_u32be(out, crc32_of(out.data() + start, out.size() - start));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Raster& img) {
    // scanlines with filter byte 0
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(img.height()) * (1 + img.width() * 3));
    for (int y = 0; y < img.height(); ++y) {
        raw.push_back(0);
        const auto* row = img.bytes().data() + static_cast<std::size_t>(y) * img.width() * 3;
        raw.insert(raw.end(), row, row + static_cast<std::size_t>(img.width()) * 3);
    }

    // zlib stream, stored-deflate blocks of at most 65535 bytes
    std::vector<std::uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t off = 0;
    do {
        const std::size_t n = std::min<std::size_t>(raw.size() - off, 65535);
        const bool final = off + n == raw.size();
        z.push_back(final ? 1 : 0);
        z.push_back(static_cast<std::uint8_t>(n & 0xff));
        z.push_back(static_cast<std::uint8_t>(n >> 8));
        z.push_back(static_cast<std::uint8_t>(~n & 0xff));
        z.push_back(static_cast<std::uint8_t>((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + static_cast<long>(off),
                 raw.begin() + static_cast<long>(off + n));
        off += n;
    } while (off < raw.size());
    std::uint32_t a = 1, b = 0;
    for (auto byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    push_u32be(z, (b << 16) | a);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    push_u32be(ihdr, static_cast<std::uint32_t>(img.width()));
    push_u32be(ihdr, static_cast<std::uint32_t>(img.height()));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", z);
    push_chunk(out, "IEND", {});
    return out;
}

// --- files -------------------------------------------------------------------

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ArchiveError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
    if (!f) throw ArchiveError("short write: " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArchiveError("cannot open for reading: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < data.size(); i += 3) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
    }
    if (i + 1 == data.size()) {
        const std::uint32_t v = data[i] << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == data.size()) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::string to_hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace guibee
