#include "bridgegan/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bridgegan/errors.hpp"

namespace bridgegan {

namespace {

int read_pnm_int(std::istream& is) {
    // Skips whitespace and '#' comments per the PNM grammar.
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = is.get();
    }
    if (c == EOF) throw io_error("unexpected end of PNM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = is.get();
    }
    return value;
}

}  // namespace

Image load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open image file: " + path);
    char magic[2];
    f.read(magic, 2);
    int channels;
    if (magic[0] == 'P' && magic[1] == '6') {
        channels = 3;
    } else if (magic[0] == 'P' && magic[1] == '5') {
        channels = 1;
    } else {
        throw io_error("unsupported image format (want P5/P6 PNM): " + path);
    }
    const int w = read_pnm_int(f);
    const int h = read_pnm_int(f);
    const int maxval = read_pnm_int(f);
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw io_error("unsupported PNM geometry in " + path);
    }
    Image img(w, h, channels);
    f.read(reinterpret_cast<char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
    if (!f) throw io_error("truncated image file: " + path);
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3) {
        throw contract_error("save_ppm: image must have 1 or 3 channels");
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot write image file: " + path);
    f << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!f) throw io_error("failed writing image file: " + path);
}

GrayImage to_gray(const Image& img) {
    GrayImage g(img.width, img.height);
    if (img.channels == 1) {
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            g.values[i] = img.pixels[i] / 255.0f;
        }
        return g;
    }
    // ITU-R 601 luma.
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            g.at(x, y) = (0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) +
                          0.114f * img.at(x, y, 2)) /
                         255.0f;
        }
    }
    return g;
}

Image gray_to_image(const GrayImage& g) {
    Image img(g.width, g.height, 1);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        const float v = std::clamp(g.values[i], 0.0f, 1.0f);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return img;
}

GrayImage resize(const GrayImage& src, int out_w, int out_h) {
    GrayImage dst(out_w, out_h);
    const float sx = static_cast<float>(src.width) / out_w;
    const float sy = static_cast<float>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const float fy = std::min((y + 0.5f) * sy - 0.5f,
                                  static_cast<float>(src.height - 1));
        const int y0 = std::max(0, static_cast<int>(std::floor(fy)));
        const int y1 = std::min(src.height - 1, y0 + 1);
        const float wy = std::clamp(fy - y0, 0.0f, 1.0f);
        for (int x = 0; x < out_w; ++x) {
            const float fx = std::min((x + 0.5f) * sx - 0.5f,
                                      static_cast<float>(src.width - 1));
            const int x0 = std::max(0, static_cast<int>(std::floor(fx)));
            const int x1 = std::min(src.width - 1, x0 + 1);
            const float wx = std::clamp(fx - x0, 0.0f, 1.0f);
            const float top = src.at(x0, y0) * (1 - wx) + src.at(x1, y0) * wx;
            const float bot = src.at(x0, y1) * (1 - wx) + src.at(x1, y1) * wx;
            dst.at(x, y) = top * (1 - wy) + bot * wy;
        }
    }
    return dst;
}

Tensor image_to_tensor(const Image& img) {
    const int c = img.channels;
    std::vector<float> data(static_cast<std::size_t>(c) * img.height * img.width);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                data[(static_cast<std::size_t>(ch) * img.height + y) * img.width + x] =
                    img.at(x, y, ch) / 127.5f - 1.0f;
            }
        }
    }
    return Tensor::from_data({1, c, img.height, img.width}, std::move(data));
}

Image tensor_to_image(const Tensor& t, int sample_index) {
    const Shape4 s = t.shape();
    if (sample_index < 0 || sample_index >= s.n) {
        throw contract_error("tensor_to_image: sample index out of range");
    }
    Image img(s.w, s.h, s.c);
    const auto data = t.data();
    const std::size_t base =
        static_cast<std::size_t>(sample_index) * s.c * s.h * s.w;
    for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                const float v =
                    data[base + (static_cast<std::size_t>(c) * s.h + y) * s.w + x];
                const float u = std::clamp((v + 1.0f) * 127.5f, 0.0f, 255.0f);
                img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(u));
            }
        }
    }
    return img;
}

std::vector<float> image_to_unit_floats(const Image& img) {
    std::vector<float> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[i] / 255.0f;
    return out;
}

}  // namespace bridgegan
