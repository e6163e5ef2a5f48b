#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include "bridgegan/errors.hpp"
#include "bridgegan/geometry.hpp"
#include "bridgegan/rng.hpp"

namespace bridgegan {

namespace {

// Bresenham circle of radius 3, the 16 FAST test offsets in ring order.
constexpr int kCircleX[16] = {0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1};
constexpr int kCircleY[16] = {-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3};

struct BriefPair {
    int x1, y1, x2, y2;
};

// Fixed 256-pair sampling pattern, generated once from a pinned seed so
// descriptors are stable across runs and platforms.
const std::vector<BriefPair>& brief_pattern() {
    static const std::vector<BriefPair> pattern = [] {
        Rng rng(0x5f3759df);
        std::vector<BriefPair> p;
        p.reserve(256);
        while (p.size() < 256) {
            const int x1 = static_cast<int>(std::lround(rng.normal(0.0, 6.0)));
            const int y1 = static_cast<int>(std::lround(rng.normal(0.0, 6.0)));
            const int x2 = static_cast<int>(std::lround(rng.normal(0.0, 6.0)));
            const int y2 = static_cast<int>(std::lround(rng.normal(0.0, 6.0)));
            if (std::abs(x1) > 13 || std::abs(y1) > 13 || std::abs(x2) > 13 ||
                std::abs(y2) > 13) {
                continue;
            }
            if (x1 == x2 && y1 == y2) continue;
            p.push_back({x1, y1, x2, y2});
        }
        return p;
    }();
    return pattern;
}

float clamped_at(const GrayImage& img, int x, int y) {
    x = std::clamp(x, 0, img.width - 1);
    y = std::clamp(y, 0, img.height - 1);
    return img.at(x, y);
}

// 5x5 box smoothing with clamped borders, used for BRIEF intensity tests.
GrayImage box_smooth5(const GrayImage& src) {
    GrayImage tmp(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            float s = 0;
            for (int d = -2; d <= 2; ++d) s += clamped_at(src, x + d, y);
            tmp.at(x, y) = s / 5.0f;
        }
    }
    GrayImage out(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            float s = 0;
            for (int d = -2; d <= 2; ++d) s += clamped_at(tmp, x, y + d);
            out.at(x, y) = s / 5.0f;
        }
    }
    return out;
}

struct Candidate {
    int x, y;
    float fast_score;
    float harris = 0;
};

// Segment test: at least 9 contiguous ring pixels all brighter than p + t or
// all darker than p - t.
bool fast9(const GrayImage& img, int x, int y, float t, float* score) {
    const float p = img.at(x, y);
    float ring[16];
    for (int i = 0; i < 16; ++i) ring[i] = img.at(x + kCircleX[i], y + kCircleY[i]);

    for (int sign = 0; sign < 2; ++sign) {
        int run = 0, best_run = 0;
        float run_sum = 0, best_sum = 0;
        for (int i = 0; i < 32; ++i) {
            const float d = sign == 0 ? ring[i & 15] - (p + t) : (p - t) - ring[i & 15];
            if (d > 0) {
                ++run;
                run_sum += d;
                if (run > best_run || (run == best_run && run_sum > best_sum)) {
                    best_run = run;
                    best_sum = run_sum;
                }
                if (run >= 16) break;
            } else {
                run = 0;
                run_sum = 0;
            }
        }
        if (best_run >= 9) {
            *score = best_sum;
            return true;
        }
    }
    return false;
}

// Ring-based saddle test for X-junctions (chessboard corners), which the
// segment test cannot see: opposite ring pixels agree, quarter-rotated ones
// differ. Response is positive only at such junctions.
bool saddle_test(const GrayImage& img, int x, int y, float t, float* score) {
    float ring[16];
    for (int i = 0; i < 16; ++i) ring[i] = img.at(x + kCircleX[i], y + kCircleY[i]);
    float quarter = 0, opposite = 0;
    for (int i = 0; i < 16; ++i) {
        quarter += std::fabs(ring[i] - ring[(i + 4) & 15]);
    }
    for (int i = 0; i < 8; ++i) {
        opposite += std::fabs(ring[i] - ring[i + 8]);
    }
    const float response = quarter - 2.0f * opposite;
    if (response > 16.0f * t) {
        *score = response;
        return true;
    }
    return false;
}

float harris_response(const GrayImage& img, int x, int y) {
    double sxx = 0, syy = 0, sxy = 0;
    for (int dy = -3; dy <= 3; ++dy) {
        for (int dx = -3; dx <= 3; ++dx) {
            const int px = x + dx, py = y + dy;
            const double gx = (clamped_at(img, px + 1, py) - clamped_at(img, px - 1, py)) * 0.5;
            const double gy = (clamped_at(img, px, py + 1) - clamped_at(img, px, py - 1)) * 0.5;
            sxx += gx * gx;
            syy += gy * gy;
            sxy += gx * gy;
        }
    }
    const double det = sxx * syy - sxy * sxy;
    const double tr = sxx + syy;
    return static_cast<float>(det - 0.04 * tr * tr);
}

float orientation(const GrayImage& img, int x, int y) {
    double m10 = 0, m01 = 0;
    constexpr int r = 7;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy > r * r) continue;
            const double v = clamped_at(img, x + dx, y + dy);
            m10 += dx * v;
            m01 += dy * v;
        }
    }
    return static_cast<float>(std::atan2(m01, m10));
}

Descriptor describe(const GrayImage& smooth, int x, int y, float angle) {
    Descriptor d;
    const float ca = std::cos(angle);
    const float sa = std::sin(angle);
    const auto& pattern = brief_pattern();
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        const auto& p = pattern[i];
        const int ax = x + static_cast<int>(std::lround(ca * p.x1 - sa * p.y1));
        const int ay = y + static_cast<int>(std::lround(sa * p.x1 + ca * p.y1));
        const int bx = x + static_cast<int>(std::lround(ca * p.x2 - sa * p.y2));
        const int by = y + static_cast<int>(std::lround(sa * p.x2 + ca * p.y2));
        if (clamped_at(smooth, ax, ay) < clamped_at(smooth, bx, by)) {
            d.bits[i >> 6] |= std::uint64_t{1} << (i & 63);
        }
    }
    return d;
}

}  // namespace

int hamming_distance(const Descriptor& a, const Descriptor& b) {
    int d = 0;
    for (int i = 0; i < 4; ++i) d += std::popcount(a.bits[i] ^ b.bits[i]);
    return d;
}

std::vector<Feature> detect_and_describe(const GrayImage& image, int levels,
                                         int max_keypoints, float fast_threshold,
                                         float scale_factor) {
    if (image.width < 32 || image.height < 32) {
        throw input_error("detect_and_describe: image smaller than 32x32");
    }
    if (levels < 1 || max_keypoints < 1 || fast_threshold <= 0 ||
        scale_factor <= 1.0f) {
        throw contract_error("detect_and_describe: invalid parameters");
    }

    std::vector<Feature> features;
    GrayImage level_img = image;
    float scale = 1.0f;
    constexpr int kMargin = 20;  // BRIEF pattern reach (13 * sqrt(2)) plus smoothing

    for (int level = 0; level < levels; ++level) {
        if (level > 0) {
            const int w = static_cast<int>(std::lround(image.width / std::pow(scale_factor, level)));
            const int h = static_cast<int>(std::lround(image.height / std::pow(scale_factor, level)));
            if (w < 2 * kMargin + 8 || h < 2 * kMargin + 8) break;
            level_img = resize(image, w, h);
            scale = static_cast<float>(image.width) / w;
        }

        std::vector<Candidate> candidates;
        std::vector<float> score_map(static_cast<std::size_t>(level_img.width) *
                                         level_img.height,
                                     -1.0f);
        for (int y = kMargin; y < level_img.height - kMargin; ++y) {
            for (int x = kMargin; x < level_img.width - kMargin; ++x) {
                float s = 0, s2 = 0;
                const bool hit_fast = fast9(level_img, x, y, fast_threshold, &s);
                const bool hit_saddle =
                    saddle_test(level_img, x, y, fast_threshold, &s2);
                if (hit_fast || hit_saddle) {
                    const float best = std::max(s, s2);
                    candidates.push_back({x, y, best});
                    score_map[static_cast<std::size_t>(y) * level_img.width + x] =
                        best;
                }
            }
        }

        GrayImage smooth;
        bool have_smooth = false;
        for (auto& c : candidates) {
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const float s = score_map[static_cast<std::size_t>(c.y + dy) *
                                                  level_img.width +
                                              (c.x + dx)];
                    if (s > c.fast_score ||
                        (s == c.fast_score && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (!is_max) continue;

            if (!have_smooth) {
                smooth = box_smooth5(level_img);
                have_smooth = true;
            }
            Feature f;
            f.keypoint.x = c.x * scale;
            f.keypoint.y = c.y * scale;
            f.keypoint.level = level;
            f.keypoint.scale = scale;
            f.keypoint.score = harris_response(level_img, c.x, c.y);
            f.keypoint.angle = orientation(level_img, c.x, c.y);
            f.descriptor = describe(smooth, c.x, c.y, f.keypoint.angle);
            features.push_back(f);
        }
    }

    std::stable_sort(features.begin(), features.end(),
                     [](const Feature& a, const Feature& b) {
                         return a.keypoint.score > b.keypoint.score;
                     });
    if (static_cast<int>(features.size()) > max_keypoints) {
        features.resize(max_keypoints);
    }
    return features;
}

std::vector<Correspondence> match(const std::vector<Feature>& a,
                                  const std::vector<Feature>& b, int top_k) {
    if (top_k < 4) throw contract_error("match: top_k must be >= 4");

    std::vector<Correspondence> out;
    if (a.empty() || b.empty()) return out;

    std::vector<int> best_for_b(b.size(), -1);
    std::vector<int> best_dist_b(b.size(), 257);
    for (std::size_t j = 0; j < b.size(); ++j) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const int d = hamming_distance(a[i].descriptor, b[j].descriptor);
            if (d < best_dist_b[j]) {
                best_dist_b[j] = d;
                best_for_b[j] = static_cast<int>(i);
            }
        }
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        int best_j = -1, best_d = 257;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const int d = hamming_distance(a[i].descriptor, b[j].descriptor);
            if (d < best_d) {
                best_d = d;
                best_j = static_cast<int>(j);
            }
        }
        if (best_j >= 0 && best_for_b[best_j] == static_cast<int>(i)) {
            out.push_back({a[i].keypoint, b[best_j].keypoint, best_d});
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Correspondence& x, const Correspondence& y) {
                         return x.distance < y.distance;
                     });
    if (static_cast<int>(out.size()) > top_k) out.resize(top_k);
    return out;
}

}  // namespace bridgegan
