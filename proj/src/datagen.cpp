#include "bridgegan/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bridgegan/errors.hpp"

namespace bridgegan {

namespace {

constexpr double kCurvatureOriginY = 4.0;  // BirdExtent::standard().y_near

std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double hash01(std::int64_t ix, std::int64_t iy, std::uint64_t id,
              std::uint64_t salt) {
    std::uint64_t h = splitmix(id ^ splitmix(salt));
    h = splitmix(h ^ static_cast<std::uint64_t>(ix) * 0xC2B2AE3D27D4EB4Full);
    h = splitmix(h ^ static_cast<std::uint64_t>(iy) * 0x165667B19E3779F9ull);
    return (h >> 11) * 0x1.0p-53;
}

// Value noise on a square lattice, bilinear between lattice hashes.
double vnoise(double x, double y, double cell, std::uint64_t id,
              std::uint64_t salt) {
    const double gx = x / cell;
    const double gy = y / cell;
    const auto ix = static_cast<std::int64_t>(std::floor(gx));
    const auto iy = static_cast<std::int64_t>(std::floor(gy));
    const double fx = gx - ix;
    const double fy = gy - iy;
    const double v00 = hash01(ix, iy, id, salt);
    const double v10 = hash01(ix + 1, iy, id, salt);
    const double v01 = hash01(ix, iy + 1, id, salt);
    const double v11 = hash01(ix + 1, iy + 1, id, salt);
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) +
           (v01 * (1 - fx) + v11 * fx) * fy;
}

struct Rgb {
    double r, g, b;
};

struct GroundPatch {
    double x0, y0, x1, y1;
    Rgb color;
};

// High-contrast off-road rectangles; they give the feature matcher corners
// away from the lane markings.
std::vector<GroundPatch> make_patches(std::uint64_t id) {
    std::vector<GroundPatch> out;
    for (int p = 0; p < 10; ++p) {
        const double cx = -9.0 + 18.0 * hash01(p, 1, id, 90);
        const double cy = 2.0 + 14.0 * hash01(p, 2, id, 91);
        const double w = 1.0 + 1.7 * hash01(p, 3, id, 92);
        const double h = 1.0 + 1.7 * hash01(p, 4, id, 93);
        const Rgb col = {60.0 + 150.0 * hash01(p, 5, id, 94),
                         55.0 + 140.0 * hash01(p, 6, id, 95),
                         50.0 + 120.0 * hash01(p, 7, id, 96)};
        out.push_back({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, col});
    }
    return out;
}

struct GroundShader {
    const SceneSpec& scene;
    std::vector<GroundPatch> patches;

    explicit GroundShader(const SceneSpec& s)
        : scene(s), patches(make_patches(s.ground_texture_id)) {}

    Rgb shade(double x, double y) const {
        const std::uint64_t id = scene.ground_texture_id;
        const double n1 = vnoise(x, y, 3.1, id, 1) - 0.5;
        const double n2 = vnoise(x, y, 1.2, id, 2) - 0.5;

        Rgb col = {78 + 34 * n1 + 6 * n2, 104 + 30 * n1 + 5 * n2,
                   60 + 24 * n1 + 4 * n2};
        for (const auto& p : patches) {
            if (x >= p.x0 && x <= p.x1 && y >= p.y0 && y <= p.y1) {
                col = p.color;
            }
        }

        const double dx = x - scene.road_center(y);
        const double hw = scene.road_half_width();
        if (std::fabs(dx) < hw) {
            const double n3 = vnoise(x, y, 1.6, id, 3) - 0.5;
            col = {52 + 12 * n3, 52 + 12 * n3, 57 + 12 * n3};
            const double edge = hw - std::fabs(dx);
            if (edge > 0.08 && edge < 0.30) {
                col = {204, 202, 194};
            }
            for (int k = 1; k < scene.lane_count; ++k) {
                const double boundary = -hw + k * scene.lane_width;
                if (std::fabs(dx - boundary) < 0.14 &&
                    std::fmod(std::fabs(y), 3.0) < 1.2) {
                    col = {208, 206, 198};
                }
            }
        }
        return col;
    }
};

constexpr Rgb kSky = {150, 170, 198};

struct Vec2 {
    double x, y;
};

bool inside_convex_quad(const Vec2 q[4], double px, double py) {
    double ref = 0;
    for (int i = 0; i < 4; ++i) {
        const Vec2& a = q[i];
        const Vec2& b = q[(i + 1) & 3];
        const double cr = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
        if (cr != 0) {
            if (ref == 0) {
                ref = cr;
            } else if ((cr > 0) != (ref > 0)) {
                return false;
            }
        }
    }
    return true;
}

struct SampleBuffer {
    int w, h;  // in samples, 2x the pixel grid
    std::vector<Rgb> data;

    SampleBuffer(int pw, int ph) : w(2 * pw), h(2 * ph), data(static_cast<std::size_t>(w) * h) {}

    // Image coordinate of sample (si, sj); pixel i holds samples i +- 0.25.
    static double coord(int s) { return s * 0.5 - 0.25; }

    Rgb& at(int si, int sj) { return data[static_cast<std::size_t>(sj) * w + si]; }

    Image resolve() const {
        Image img(w / 2, h / 2, 3);
        for (int j = 0; j < h / 2; ++j) {
            for (int i = 0; i < w / 2; ++i) {
                Rgb acc = {0, 0, 0};
                for (int dj = 0; dj < 2; ++dj) {
                    for (int di = 0; di < 2; ++di) {
                        const Rgb& s = data[static_cast<std::size_t>(2 * j + dj) * w +
                                            (2 * i + di)];
                        acc.r += s.r;
                        acc.g += s.g;
                        acc.b += s.b;
                    }
                }
                img.at(i, j, 0) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(acc.r / 4, 0.0, 255.0)));
                img.at(i, j, 1) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(acc.g / 4, 0.0, 255.0)));
                img.at(i, j, 2) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(acc.b / 4, 0.0, 255.0)));
            }
        }
        return img;
    }
};

void footprint_corners(const CarPose& car, Vec2 out[4]) {
    const double fx = std::sin(car.heading), fy = std::cos(car.heading);
    const double rx = fy, ry = -fx;  // right-hand perpendicular
    const double hl = car.length / 2, hw = car.width / 2;
    out[0] = {car.x + fx * hl + rx * hw, car.y + fy * hl + ry * hw};
    out[1] = {car.x + fx * hl - rx * hw, car.y + fy * hl - ry * hw};
    out[2] = {car.x - fx * hl - rx * hw, car.y - fy * hl - ry * hw};
    out[3] = {car.x - fx * hl + rx * hw, car.y - fy * hl + ry * hw};
}

struct Vec3 {
    double x, y, z;
};

// Pinhole projection of a 3-D point; z up, camera at (0, 0, height).
Vec2 project(const CameraModel& cam, const Vec3& p, double* depth) {
    const double st = std::sin(cam.pitch), ct = std::cos(cam.pitch);
    const double xc = p.x;
    const double yc = -p.y * st + (cam.height - p.z) * ct;
    const double zc = p.y * ct + (cam.height - p.z) * st;
    *depth = zc;
    return {cam.fx * xc / zc + cam.cx, cam.fy * yc / zc + cam.cy};
}

void raster_face(SampleBuffer& buf, const CameraModel& cam, const Vec3 v[4],
                 const Rgb& color) {
    Vec2 q[4];
    double depth;
    double umin = 1e18, umax = -1e18, vmin = 1e18, vmax = -1e18;
    for (int i = 0; i < 4; ++i) {
        q[i] = project(cam, v[i], &depth);
        if (depth <= 0.05) return;  // clip whole face, cars sit well ahead
        umin = std::min(umin, q[i].x);
        umax = std::max(umax, q[i].x);
        vmin = std::min(vmin, q[i].y);
        vmax = std::max(vmax, q[i].y);
    }
    const int si0 = std::max(0, static_cast<int>(std::floor((umin + 0.25) * 2)));
    const int si1 = std::min(buf.w - 1, static_cast<int>(std::ceil((umax + 0.25) * 2)));
    const int sj0 = std::max(0, static_cast<int>(std::floor((vmin + 0.25) * 2)));
    const int sj1 = std::min(buf.h - 1, static_cast<int>(std::ceil((vmax + 0.25) * 2)));
    for (int sj = sj0; sj <= sj1; ++sj) {
        for (int si = si0; si <= si1; ++si) {
            if (inside_convex_quad(q, SampleBuffer::coord(si),
                                   SampleBuffer::coord(sj))) {
                buf.at(si, sj) = color;
            }
        }
    }
}

void draw_car_frontal(SampleBuffer& buf, const CameraModel& cam,
                      const CarPose& car) {
    Vec2 fp[4];
    footprint_corners(car, fp);
    Vec3 bottom[4], top[4];
    for (int i = 0; i < 4; ++i) {
        bottom[i] = {fp[i].x, fp[i].y, 0};
        top[i] = {fp[i].x, fp[i].y, car.height};
    }
    const Rgb col = {static_cast<double>(car.color[0]),
                     static_cast<double>(car.color[1]),
                     static_cast<double>(car.color[2])};

    struct Face {
        Vec3 v[4];
        double mean_y;
    };
    Face faces[5];
    for (int i = 0; i < 4; ++i) {
        const int j = (i + 1) & 3;
        faces[i] = {{bottom[i], bottom[j], top[j], top[i]},
                    (fp[i].y + fp[j].y) / 2};
    }
    faces[4] = {{top[0], top[1], top[2], top[3]}, car.y};
    // Painter within the cuboid: far faces first; roof last (camera is above).
    std::sort(faces, faces + 4,
              [](const Face& a, const Face& b) { return a.mean_y > b.mean_y; });
    for (const auto& f : faces) raster_face(buf, cam, f.v, col);
}

}  // namespace

CameraModel CameraModel::standard(int width, int height_px) {
    CameraModel cam;
    cam.fx = 1.0 * width;
    cam.fy = 1.0 * width;
    cam.cx = (width - 1) / 2.0;
    cam.cy = 0.8 * height_px - 0.5;
    return cam;
}

double CameraModel::horizon_row() const {
    return cy - fy * std::tan(pitch);
}

double SceneSpec::road_center(double y) const {
    const double t = std::clamp(y - kCurvatureOriginY, 0.0, 30.0);
    return road_offset + road_curvature * t * t;
}

SceneSpec SceneSpec::random(std::uint64_t seed) {
    Rng rng(seed);
    SceneSpec s;
    s.seed = seed;
    s.ground_texture_id = rng.next_u64();
    s.road_curvature = rng.uniform(-0.035, 0.035);
    s.road_offset = rng.uniform(-1.5, 1.5);
    s.lane_count = rng.uniform_int(2, 3);

    const int car_count = rng.uniform_int(1, 3);
    for (int c = 0; c < car_count; ++c) {
        CarPose car;
        for (int attempt = 0; attempt < 20; ++attempt) {
            const int lane = rng.uniform_int(0, s.lane_count - 1);
            car.y = rng.uniform(5.0, 11.4);
            const double lane_off =
                -s.road_half_width() + (lane + 0.5) * s.lane_width;
            car.x = std::clamp(
                s.road_center(car.y) + lane_off + rng.uniform(-0.3, 0.3), -6.0,
                6.0);
            bool clear = true;
            for (const auto& other : s.cars) {
                if (std::fabs(other.x - car.x) < 2.2 &&
                    std::fabs(other.y - car.y) < 5.0) {
                    clear = false;
                    break;
                }
            }
            if (clear) break;
        }
        const double tangent =
            2.0 * s.road_curvature * std::clamp(car.y - kCurvatureOriginY, 0.0, 30.0);
        car.heading = std::atan(tangent) + rng.uniform(-0.06, 0.06);
        car.length = rng.uniform(3.5, 5.0);
        car.width = rng.uniform(1.7, 2.2);
        car.height = rng.uniform(2.0, 3.0);
        for (int ch = 0; ch < 3; ++ch) {
            car.color[ch] = static_cast<std::uint8_t>(rng.uniform_int(40, 230));
        }
        s.cars.push_back(car);
    }
    return s;
}

Homography ground_to_frontal(const CameraModel& cam) {
    if (cam.height <= 0) throw contract_error("camera height must be positive");
    if (cam.pitch <= 0 || cam.pitch >= 1.5707963267948966) {
        throw degeneracy_error("camera pitch does not face the ground");
    }
    const double st = std::sin(cam.pitch), ct = std::cos(cam.pitch);
    Homography h;
    h.m = {cam.fx, cam.cx * ct, cam.cx * cam.height * st,
           0.0, -cam.fy * st + cam.cy * ct,
           cam.fy * cam.height * ct + cam.cy * cam.height * st,
           0.0, ct, cam.height * st};
    return h.normalized();
}

Homography ground_to_bird(const BirdExtent& extent, int width, int height) {
    if (extent.x_max <= extent.x_min || extent.y_far <= extent.y_near) {
        throw contract_error("bird extent must be nonempty");
    }
    const double sx = width / (extent.x_max - extent.x_min);
    const double sy = height / (extent.y_far - extent.y_near);
    Homography h;
    h.m = {sx, 0.0, -sx * extent.x_min - 0.5,
           0.0, -sy, sy * extent.y_far - 0.5,
           0.0, 0.0, 1.0};
    return h;
}

Homography ground_truth_homography(const CameraModel& cam,
                                   const BirdExtent& extent, int width,
                                   int height) {
    Homography h = ground_to_bird(extent, width, height)
                       .compose(ground_to_frontal(cam).inverse());
    // Canonical sign: positive homogeneous w for visible ground, negative
    // above the horizon (the plane at infinity crosses at the horizon row).
    const double mid_y = (extent.y_near + extent.y_far) / 2;
    const auto [u, v] = ground_to_frontal(cam).apply(0.0, mid_y);
    if (h.apply_homogeneous(u, v).w < 0) {
        for (double& m : h.m) m = -m;
    }
    return h;
}

Image render_bird(const SceneSpec& scene, const BirdExtent& extent, int width,
                  int height, bool include_cars) {
    const GroundShader shader(scene);
    const double mx = (extent.x_max - extent.x_min) / width;
    const double my = (extent.y_far - extent.y_near) / height;

    SampleBuffer buf(width, height);
    for (int sj = 0; sj < buf.h; ++sj) {
        const double j = SampleBuffer::coord(sj);
        const double y = extent.y_far - (j + 0.5) * my;
        for (int si = 0; si < buf.w; ++si) {
            const double i = SampleBuffer::coord(si);
            const double x = extent.x_min + (i + 0.5) * mx;
            buf.at(si, sj) = shader.shade(x, y);
        }
    }

    if (include_cars) {
        for (const auto& car : scene.cars) {
            Vec2 fp[4];
            footprint_corners(car, fp);
            const Rgb col = {static_cast<double>(car.color[0]),
                             static_cast<double>(car.color[1]),
                             static_cast<double>(car.color[2])};
            for (int sj = 0; sj < buf.h; ++sj) {
                const double y = extent.y_far - (SampleBuffer::coord(sj) + 0.5) * my;
                for (int si = 0; si < buf.w; ++si) {
                    const double x =
                        extent.x_min + (SampleBuffer::coord(si) + 0.5) * mx;
                    if (inside_convex_quad(fp, x, y)) buf.at(si, sj) = col;
                }
            }
        }
    }
    return buf.resolve();
}

Image render_frontal(const SceneSpec& scene, const CameraModel& cam, int width,
                     int height, bool include_cars) {
    const GroundShader shader(scene);
    const Homography frontal_to_ground = ground_to_frontal(cam).inverse();
    const double horizon = cam.horizon_row();

    SampleBuffer buf(width, height);
    for (int sj = 0; sj < buf.h; ++sj) {
        const double v = SampleBuffer::coord(sj);
        for (int si = 0; si < buf.w; ++si) {
            const double u = SampleBuffer::coord(si);
            if (v <= horizon + 0.25) {
                buf.at(si, sj) = kSky;
                continue;
            }
            const auto p = frontal_to_ground.apply_homogeneous(u, v);
            if (std::fabs(p.w) < 1e-12) {
                buf.at(si, sj) = kSky;
                continue;
            }
            const double y = p.y / p.w;
            if (y <= 0) {
                buf.at(si, sj) = kSky;
                continue;
            }
            buf.at(si, sj) = shader.shade(p.x / p.w, y);
        }
    }

    if (include_cars) {
        std::vector<CarPose> ordered(scene.cars);
        std::sort(ordered.begin(), ordered.end(),
                  [](const CarPose& a, const CarPose& b) { return a.y > b.y; });
        for (const auto& car : ordered) {
            if (car.y <= 1.0) continue;  // behind or at the camera plane
            draw_car_frontal(buf, cam, car);
        }
    }
    return buf.resolve();
}

EstimatedH estimate_scene_homography(const SceneSpec& scene,
                                     const DatagenConfig& config) {
    const int s = config.estimation_scale;
    const int wh = config.width * s, hh = config.height * s;
    const CameraModel cam_hi = CameraModel::standard(wh, hh);
    const BirdExtent extent = BirdExtent::standard();

    const Image frontal_hi = render_frontal(scene, cam_hi, wh, hh);
    const Homography gt_hi = ground_truth_homography(cam_hi, extent, wh, hh);
    const Image warped_hi = warp(frontal_hi, gt_hi, wh, hh);

    EstimatedH out;
    try {
        Rng rng(mix_seed(scene.seed, 0xE57));
        // Coarse pass. A deeper match list than the matcher's default 30
        // keeps RANSAC fed on scenes where the perspective stretch thins out
        // the good correspondences.
        constexpr int kTopK = 100;
        EstimationResult r =
            estimate_homography(frontal_hi, warped_hi, rng, {}, 1000, 2.0, kTopK);
        // Refinement: rectify by the coarse model and re-match. Both images
        // now share the warp's geometry and blur, so matches spread over the
        // whole field and the fit stops extrapolating.
        for (int pass = 0; pass < 2; ++pass) {
            try {
                const Image rectified = warp(frontal_hi, r.h, wh, hh);
                const EstimationResult r2 =
                    estimate_homography(rectified, warped_hi, rng, {}, 1000, 2.0,
                                        kTopK);
                if (r2.inliers < std::max(20, r.inliers)) break;
                r2.h.inverse();  // degeneracy check before accepting
                EstimationResult refined = r2;
                refined.h = r2.h.compose(r.h);
                r = refined;
            } catch (const std::runtime_error&) {
                break;  // keep the last good estimate
            }
        }
        out.matches = r.matches;
        out.inliers = r.inliers;
        out.mean_reproj_error = r.mean_reproj_error;

        Homography up;  // output pixel -> estimation-scale pixel
        up.m = {static_cast<double>(s), 0.0, (s - 1) / 2.0,
                0.0, static_cast<double>(s), (s - 1) / 2.0,
                0.0, 0.0, 1.0};
        out.h = up.inverse().compose(r.h).compose(up);
    } catch (const estimation_error&) {
        out.fallback = true;
        out.h = ground_truth_homography(
            CameraModel::standard(config.width, config.height), extent,
            config.width, config.height);
    }
    return out;
}

ViewTriplet make_triplet(const SceneSpec& scene, const DatagenConfig& config,
                         std::string* h_source_out) {
    const CameraModel cam = CameraModel::standard(config.width, config.height);
    const BirdExtent extent = BirdExtent::standard();

    ViewTriplet t;
    t.frontal = render_frontal(scene, cam, config.width, config.height);
    t.bird = render_bird(scene, extent, config.width, config.height);
    t.gt_h = ground_truth_homography(cam, extent, config.width, config.height);

    Homography h = t.gt_h;
    std::string source = "oracle";
    if (config.homog_source == HomogSource::estimated) {
        const EstimatedH est = estimate_scene_homography(scene, config);
        if (!est.fallback) {
            h = est.h;
            source = "estimated";
        }
    }
    if (h_source_out) *h_source_out = source;
    t.homog = warp(t.frontal, h, config.width, config.height);
    return t;
}

std::vector<const ManifestEntry*> Manifest::split_entries(
    const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries) {
        if (e.split == split) out.push_back(&e);
    }
    return out;
}

std::string Manifest::resolve(const std::string& rel_path) const {
    return (std::filesystem::path(dir) / rel_path).string();
}

Manifest generate_dataset(const DatagenConfig& config,
                          const std::string& out_dir) {
    if (config.n < 1) throw contract_error("generate_dataset: n must be >= 1");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create output directory: " + out_dir);

    const auto n_train = static_cast<int>(
        std::llround(config.n * config.train_fraction));

    Manifest manifest;
    manifest.width = config.width;
    manifest.height = config.height;
    manifest.dir = out_dir;

    for (int i = 0; i < config.n; ++i) {
        const std::uint64_t seed = mix_seed(config.seed, i);
        const SceneSpec scene = SceneSpec::random(seed);

        std::string h_source;
        const ViewTriplet t = make_triplet(scene, config, &h_source);

        char name[64];
        ManifestEntry e;
        e.id = i;
        e.split = i < n_train ? "train" : "test";
        e.seed = seed;
        e.h_source = h_source;
        std::snprintf(name, sizeof(name), "frontal_%05d.ppm", i);
        e.frontal_path = name;
        std::snprintf(name, sizeof(name), "homog_%05d.ppm", i);
        e.homog_path = name;
        std::snprintf(name, sizeof(name), "bird_%05d.ppm", i);
        e.bird_path = name;
        e.gt_h = t.gt_h;

        save_ppm(t.frontal, manifest.resolve(e.frontal_path));
        save_ppm(t.homog, manifest.resolve(e.homog_path));
        save_ppm(t.bird, manifest.resolve(e.bird_path));
        manifest.entries.push_back(std::move(e));
    }

    const std::string manifest_path =
        (std::filesystem::path(out_dir) / "manifest.txt").string();
    std::ofstream f(manifest_path);
    if (!f) throw io_error("cannot write manifest: " + manifest_path);
    f << "bridgegan-manifest 1\n";
    f << "resolution " << config.width << " " << config.height << "\n";
    f << "count " << config.n << "\n";
    f << "# id split seed h_source frontal homog bird h00 h01 h02 h10 h11 h12 "
         "h20 h21 h22\n";
    f.precision(17);
    for (const auto& e : manifest.entries) {
        f << e.id << " " << e.split << " " << e.seed << " " << e.h_source << " "
          << e.frontal_path << " " << e.homog_path << " " << e.bird_path;
        for (double v : e.gt_h.m) f << " " << v;
        f << "\n";
    }
    if (!f.good()) throw io_error("manifest write failed: " + manifest_path);
    return manifest;
}

Manifest load_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw io_error("cannot open manifest: " + manifest_path);

    Manifest manifest;
    manifest.dir = std::filesystem::path(manifest_path).parent_path().string();

    std::string line;
    if (!std::getline(f, line) || line.rfind("bridgegan-manifest 1", 0) != 0) {
        throw io_error("not a recognized manifest: " + manifest_path);
    }
    int count = -1;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "resolution") {
            ss >> manifest.width >> manifest.height;
            continue;
        }
        if (key == "count") {
            ss >> count;
            continue;
        }
        ManifestEntry e;
        e.id = std::stoi(key);
        ss >> e.split >> e.seed >> e.h_source >> e.frontal_path >> e.homog_path >>
            e.bird_path;
        for (double& v : e.gt_h.m) ss >> v;
        if (!ss) throw io_error("malformed manifest entry: " + line);
        manifest.entries.push_back(std::move(e));
    }
    if (manifest.width <= 0 || manifest.height <= 0) {
        throw io_error("manifest missing resolution header");
    }
    if (count >= 0 && count != static_cast<int>(manifest.entries.size())) {
        throw io_error("manifest count mismatch");
    }
    return manifest;
}

double homography_disagreement(const Homography& a, const Homography& b,
                               int width, int height) {
    double sum = 0;
    std::int64_t count = 0;
    for (int j = 0; j < height; ++j) {
        for (int i = 0; i < width; ++i) {
            const auto pa = a.apply_homogeneous(i, j);
            if (pa.w < 1e-9) continue;
            const double ax = pa.x / pa.w, ay = pa.y / pa.w;
            if (ax < -0.5 || ax > width - 0.5 || ay < -0.5 || ay > height - 0.5) {
                continue;
            }
            const auto pb = b.apply_homogeneous(i, j);
            if (std::fabs(pb.w) < 1e-9) continue;
            sum += std::hypot(ax - pb.x / pb.w, ay - pb.y / pb.w);
            ++count;
        }
    }
    if (count == 0) throw contract_error("homographies share no valid region");
    return sum / count;
}

}  // namespace bridgegan
