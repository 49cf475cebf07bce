#pragma once

// 8-bit image container and file IO: PNG (via libpng) for dataset images,
// PGM (P5) for heatmap dumps, base64 for inline manifest payloads, and the
// bilinear crop renderer that turns a scene + crop transform into network
// input.

#include <cstdint>
#include <string>
#include <vector>

#include "mipose/geometry.hpp"

namespace mipose {

/// Row-major HWC, channels 1 (gray) or 3 (RGB).
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    ImageU8() = default;
    ImageU8(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0) {}

    std::uint8_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

/// P5 binary PGM, maxval 255. Used for per-channel heatmap dumps.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& gray);
ImageU8 read_pgm(const std::string& path);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Clamp-to-edge bilinear sample at continuous (x, y); pixel (r, c) is
/// centered at (c + 0.5, r + 0.5).
double bilinear_sample(const ImageU8& img, double x, double y, int channel);

/// Resample the crop rectangle of `t` into a target_h x target_w x 3 float
/// image in [0,1] (grayscale scenes are replicated across channels).
std::vector<float> render_crop(const ImageU8& img, const CropTransform& t);

}  // namespace mipose
