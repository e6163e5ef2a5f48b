#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgegan/geometry.hpp"
#include "bridgegan/image.hpp"
#include "bridgegan/rng.hpp"

namespace bridgegan {

// World frame: x lateral (right positive), y forward distance from the
// camera, z up. The camera sits at (0, 0, height) pitched down toward the
// road. Intrinsics are in pixels of the target resolution, with pixel (i, j)
// centered at image coordinate (i, j).
struct CameraModel {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    double height = 14.0;
    double pitch = 1.2566370614359172;  // 72 degrees

    static CameraModel standard(int width, int height_px);

    // Image row of the horizon; ground is visible strictly below it.
    double horizon_row() const;
};

// Ground rectangle covered by the orthographic bird view, in meters.
// x spans the full image width, y_near is the bottom row, y_far the top.
struct BirdExtent {
    double x_min = -7.0, x_max = 7.0;
    double y_near = 4.0, y_far = 12.4;

    static BirdExtent standard() { return {}; }
};

struct CarPose {
    double x = 0, y = 0;      // footprint center, ground frame
    double heading = 0;       // radians from +y toward +x
    double length = 3.5, width = 1.7, height = 1.4;
    std::uint8_t color[3] = {180, 40, 40};
};

struct SceneSpec {
    std::uint64_t seed = 0;
    std::uint64_t ground_texture_id = 0;
    double road_curvature = 0;   // lateral meters per (meter ahead)^2
    double road_offset = 0;      // road center at y_near
    int lane_count = 2;
    double lane_width = 2.8;
    std::vector<CarPose> cars;

    static SceneSpec random(std::uint64_t seed);

    double road_center(double y) const;
    double road_half_width() const { return lane_count * lane_width * 0.5; }
};

struct ViewTriplet {
    Image frontal, homog, bird;
    Homography gt_h;  // frontal pixel -> bird pixel, ground plane
};

Image render_bird(const SceneSpec& scene, const BirdExtent& extent, int width,
                  int height, bool include_cars = true);
Image render_frontal(const SceneSpec& scene, const CameraModel& cam, int width,
                     int height, bool include_cars = true);

// Ground plane (x, y, 1) -> frontal pixel; throws degeneracy_error when the
// camera cannot see the ground (pitch 0 with the plane edge-on).
Homography ground_to_frontal(const CameraModel& cam);
Homography ground_to_bird(const BirdExtent& extent, int width, int height);
Homography ground_truth_homography(const CameraModel& cam,
                                   const BirdExtent& extent, int width,
                                   int height);

enum class HomogSource { estimated, oracle };

struct DatagenConfig {
    int n = 576;  // 512 train / 64 test at the default split
    std::uint64_t seed = 1;
    int width = 80, height = 48;
    double train_fraction = 8.0 / 9.0;
    HomogSource homog_source = HomogSource::estimated;
    // Feature matching runs on renders this many times larger than the
    // output; the result is conjugated back to output pixel coordinates.
    int estimation_scale = 4;
};

struct EstimatedH {
    Homography h;          // at output resolution
    bool fallback = false; // estimator failed; gt_h substituted
    int matches = 0;
    int inliers = 0;
    double mean_reproj_error = 0;  // at estimation scale, pixels
};

// Runs the classical pipeline for one scene: renders the frontal view and
// its oracle-warped counterpart at estimation scale, matches features,
// RANSAC + DLT, then rescales the homography to output coordinates.
EstimatedH estimate_scene_homography(const SceneSpec& scene,
                                     const DatagenConfig& config);

// Renders one triplet; H source per config, with gt_h fallback on
// estimation failure. h_source_out (optional) receives "estimated" or
// "oracle" for what was actually used.
ViewTriplet make_triplet(const SceneSpec& scene, const DatagenConfig& config,
                         std::string* h_source_out = nullptr);

struct ManifestEntry {
    int id = 0;
    std::string split;  // "train" or "test"
    std::uint64_t seed = 0;
    std::string h_source;  // "estimated" or "oracle"
    std::string frontal_path, homog_path, bird_path;  // relative to manifest
    Homography gt_h;
};

struct Manifest {
    int width = 0, height = 0;
    std::string dir;  // directory holding the manifest, for path resolution
    std::vector<ManifestEntry> entries;

    std::vector<const ManifestEntry*> split_entries(const std::string& split) const;
    std::string resolve(const std::string& rel_path) const;
};

// Writes n triplets plus manifest.txt under out_dir; returns the manifest.
Manifest generate_dataset(const DatagenConfig& config, const std::string& out_dir);
Manifest load_manifest(const std::string& manifest_path);

// Mean pixel disagreement between two homographies over the frontal pixels
// that a maps into [0,w)x[0,h).
double homography_disagreement(const Homography& a, const Homography& b,
                               int width, int height);

}  // namespace bridgegan
