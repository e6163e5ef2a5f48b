#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "bridgegan/image.hpp"
#include "bridgegan/rng.hpp"

namespace bridgegan {

// 3x3 projective transform, row-major. Normalized so m[8] == 1 when that
// entry is well away from zero, otherwise to unit Frobenius norm.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    static Homography from_array(const std::array<double, 9>& a);

    double at(int r, int c) const { return m[r * 3 + c]; }
    double& at(int r, int c) { return m[r * 3 + c]; }

    Homography normalized() const;
    Homography inverse() const;  // throws degeneracy_error when singular
    // this ∘ other: applies other first.
    Homography compose(const Homography& other) const;

    // Projects (x, y); returns the homogeneous w alongside the point.
    struct Projected {
        double x, y, w;
    };
    Projected apply_homogeneous(double x, double y) const;
    std::pair<double, double> apply(double x, double y) const;
};

struct Keypoint {
    float x = 0, y = 0;     // level-0 (full resolution) coordinates
    int level = 0;          // pyramid level index
    float scale = 1.0f;     // level-0 pixels per level pixel
    float score = 0;        // Harris corner response
    float angle = 0;        // orientation, radians
};

// 256-bit binary descriptor compared by Hamming distance.
struct Descriptor {
    std::array<std::uint64_t, 4> bits{};
};

int hamming_distance(const Descriptor& a, const Descriptor& b);

struct Correspondence {
    Keypoint src, dst;
    int distance = 0;  // descriptor Hamming distance, [0, 256]
};

struct Feature {
    Keypoint keypoint;
    Descriptor descriptor;
};

struct OrbParams {
    int levels = 3;
    float scale_factor = 1.5f;
    int max_keypoints = 500;
    float fast_threshold = 0.06f;  // on [0,1] intensities
};

// Multi-scale FAST corners re-ranked by Harris response, orientation by
// intensity centroid, steered BRIEF bits. Constant images yield no corners.
std::vector<Feature> detect_and_describe(const GrayImage& image,
                                         int levels = 3,
                                         int max_keypoints = 500,
                                         float fast_threshold = 0.06f,
                                         float scale_factor = 1.5f);

// Mutual nearest-neighbor matches, ascending by Hamming distance, truncated
// to top_k. top_k must be at least 4 (the DLT minimum downstream).
std::vector<Correspondence> match(const std::vector<Feature>& a,
                                  const std::vector<Feature>& b, int top_k = 30);

struct PointPair {
    double x1, y1;  // source
    double x2, y2;  // destination
};

// Hartley-normalized direct linear transform. Needs >= 4 pairs with no 3
// collinear source points; exact on consistent noise-free input.
Homography dlt(const std::vector<PointPair>& pairs);
Homography dlt(const std::vector<Correspondence>& correspondences);

struct RansacResult {
    Homography h;
    std::vector<char> inlier_mask;
    int inlier_count = 0;
    double mean_reproj_error = 0.0;
};

RansacResult ransac(const std::vector<Correspondence>& correspondences,
                    int iterations, double inlier_threshold_px, Rng& rng);

// Inverse-mapping perspective warp with bilinear sampling; out-of-source
// pixels are black.
Image warp(const Image& image, const Homography& h, int out_width,
           int out_height);

struct EstimationResult {
    Homography h;
    int matches = 0;
    int inliers = 0;
    double mean_reproj_error = 0.0;
};

// Full pipeline: features on both images, mutual matching, RANSAC + DLT.
EstimationResult estimate_homography(const Image& src, const Image& dst,
                                     Rng& rng, const OrbParams& params = {},
                                     int ransac_iterations = 1000,
                                     double inlier_threshold_px = 2.0,
                                     int top_k = 30);

}  // namespace bridgegan
