#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgegan/tensor.hpp"

namespace bridgegan {

// Interleaved 8-bit raster image, 1 (gray) or 3 (RGB) channels.
struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * h * c, 0) {}

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool empty() const { return pixels.empty(); }
};

// Single-channel float image, used by the feature pipeline.
struct GrayImage {
    int width = 0, height = 0;
    std::vector<float> values;  // row-major, [0, 1]

    GrayImage() = default;
    GrayImage(int w, int h)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
};

// PPM (P6) for RGB, PGM (P5) for gray. Byte-deterministic output.
Image load_ppm(const std::string& path);
void save_ppm(const Image& img, const std::string& path);

GrayImage to_gray(const Image& img);
Image gray_to_image(const GrayImage& g);

// Downscale by an arbitrary factor with bilinear sampling.
GrayImage resize(const GrayImage& src, int out_w, int out_h);

// RGB image -> 1xCxHxW tensor normalized to [-1, 1].
Tensor image_to_tensor(const Image& img);
// Inverse of image_to_tensor for a single sample (values clamped).
Image tensor_to_image(const Tensor& t, int sample_index = 0);
// As above but mapping [0,1] floats, used by the metric code.
std::vector<float> image_to_unit_floats(const Image& img);

}  // namespace bridgegan
