#include "mipose/io/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <png.h>

namespace mipose {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void check_image(const ImageU8& img, const char* what) {
    if (img.height < 1 || img.width < 1 || (img.channels != 1 && img.channels != 3))
        throw std::invalid_argument(std::string(what) + ": image must be HxWx{1,3}");
    if (img.data.size() !=
        static_cast<std::size_t>(img.height) * img.width * img.channels)
        throw std::invalid_argument(std::string(what) + ": data size mismatch");
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
    check_image(img, "write_png");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("write_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("write_png: png_create_info_struct failed");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng failure writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
            img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageU8 read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_png: png_create_info_struct failed");
    }
    ImageU8 img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng failure reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit gray or RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: unsupported channel count in " + path);
    }
    img.data.resize(static_cast<std::size_t>(img.height) * img.width * img.channels);
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] =
            img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& gray) {
    if (width < 1 || height < 1 ||
        gray.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("write_pgm: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(gray.data()),
              static_cast<std::streamsize>(gray.size()));
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

ImageU8 read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w < 1 || h < 1 || maxval != 255)
        throw std::runtime_error("read_pgm: " + path + " is not an 8-bit P5 PGM");
    in.get();  // single whitespace after maxval
    ImageU8 img(h, w, 1);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (!in) throw std::runtime_error("read_pgm: truncated file " + path);
    return img;
}

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (static_cast<std::uint32_t>(bytes[i]) << 16) |
                                (static_cast<std::uint32_t>(bytes[i + 1]) << 8) |
                                bytes[i + 2];
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        out += kB64Alphabet[v & 63];
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const std::uint32_t v = static_cast<std::uint32_t>(bytes[i]) << 16;
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        const std::uint32_t v = (static_cast<std::uint32_t>(bytes[i]) << 16) |
                                (static_cast<std::uint32_t>(bytes[i + 1]) << 8);
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0)
        throw std::invalid_argument("base64_decode: length must be a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2)
                    throw std::invalid_argument("base64_decode: misplaced padding");
                vals[j] = 0;
                ++pad;
            } else {
                if (pad > 0)
                    throw std::invalid_argument("base64_decode: data after padding");
                vals[j] = b64_value(c);
                if (vals[j] < 0)
                    throw std::invalid_argument("base64_decode: invalid character");
            }
        }
        const std::uint32_t v = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                (static_cast<std::uint32_t>(vals[1]) << 12) |
                                (static_cast<std::uint32_t>(vals[2]) << 6) |
                                static_cast<std::uint32_t>(vals[3]);
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

double bilinear_sample(const ImageU8& img, double x, double y, int channel) {
    const double u = x - 0.5;
    const double v = y - 0.5;
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const double fx = u - x0;
    const double fy = v - y0;
    auto px = [&](int yy, int xx) -> double {
        yy = std::clamp(yy, 0, img.height - 1);
        xx = std::clamp(xx, 0, img.width - 1);
        return img.at(yy, xx, channel);
    };
    const double top = (1.0 - fx) * px(y0, x0) + fx * px(y0, x0 + 1);
    const double bot = (1.0 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1);
    return (1.0 - fy) * top + fy * bot;
}

std::vector<float> render_crop(const ImageU8& img, const CropTransform& t) {
    check_image(img, "render_crop");
    if (t.target_h < 1 || t.target_w < 1)
        throw std::invalid_argument("render_crop: crop transform has no target size");
    std::vector<float> out(static_cast<std::size_t>(t.target_h) * t.target_w * 3);
    for (int r = 0; r < t.target_h; ++r) {
        for (int c = 0; c < t.target_w; ++c) {
            Keypoint probe;
            probe.x = c + 0.5;
            probe.y = r + 0.5;
            const Keypoint src = t.invert(probe);
            float* px = out.data() + (static_cast<std::size_t>(r) * t.target_w + c) * 3;
            if (img.channels == 1) {
                const float g =
                    static_cast<float>(bilinear_sample(img, src.x, src.y, 0) / 255.0);
                px[0] = px[1] = px[2] = g;
            } else {
                for (int ch = 0; ch < 3; ++ch)
                    px[ch] = static_cast<float>(
                        bilinear_sample(img, src.x, src.y, ch) / 255.0);
            }
        }
    }
    return out;
}

}  // namespace mipose
