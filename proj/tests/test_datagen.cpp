#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "bridgegan/datagen.hpp"
#include "bridgegan/errors.hpp"
#include "bridgegan/geometry.hpp"

using namespace bridgegan;

namespace {

SceneSpec straight_road_scene() {
    SceneSpec s;
    s.seed = 99;
    s.ground_texture_id = 1234;
    s.road_curvature = 0;
    s.road_offset = 0;
    s.lane_count = 2;
    return s;
}

double channel_mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0 : s / v.size();
}

// Pixels whose color sits near the car's flat paint, one list per channel.
void collect_car_pixels(const Image& img, const CarPose& car,
                        std::vector<double> means[3]) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double d = 0;
            for (int c = 0; c < 3; ++c) {
                d += std::fabs(img.at(x, y, c) - static_cast<double>(car.color[c]));
            }
            if (d < 45) {
                for (int c = 0; c < 3; ++c) means[c].push_back(img.at(x, y, c));
            }
        }
    }
}

}  // namespace

TEST_CASE("bird render: determinism and car-free content") {
    const SceneSpec scene = SceneSpec::random(42);
    const BirdExtent ext = BirdExtent::standard();

    const Image a = render_bird(scene, ext, 80, 48);
    const Image b = render_bird(scene, ext, 80, 48);
    CHECK(a.pixels == b.pixels);

    SceneSpec no_cars = scene;
    no_cars.cars.clear();
    const Image c = render_bird(no_cars, ext, 80, 48);
    const Image d = render_bird(scene, ext, 80, 48, false);
    CHECK(c.pixels == d.pixels);
}

TEST_CASE("bird render: car bounding box matches the orthographic projection") {
    SceneSpec scene = straight_road_scene();
    CarPose car;
    car.x = 1.3;
    car.y = 8.7;
    car.heading = 0;
    car.length = 4.1;
    car.width = 1.9;
    car.color[0] = 20;
    car.color[1] = 200;
    car.color[2] = 230;
    scene.cars.push_back(car);

    const BirdExtent ext = BirdExtent::standard();
    const int W = 80, H = 48;
    const Image with = render_bird(scene, ext, W, H);
    const Image without = render_bird(scene, ext, W, H, false);

    int px0 = W, px1 = -1, py0 = H, py1 = -1;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                if (with.at(x, y, c) != without.at(x, y, c)) {
                    px0 = std::min(px0, x);
                    px1 = std::max(px1, x);
                    py0 = std::min(py0, y);
                    py1 = std::max(py1, y);
                    break;
                }
            }
        }
    }

    // A pixel is touched iff one of its two sample columns/rows falls inside
    // the footprint interval; samples sit at pixel index +-0.25.
    const double mx = (ext.x_max - ext.x_min) / W;
    const double my = (ext.y_far - ext.y_near) / H;
    auto col_touched = [&](int i) {
        for (double s : {-0.25, 0.25}) {
            const double x = ext.x_min + (i + s + 0.5) * mx;
            if (x >= car.x - car.width / 2 && x <= car.x + car.width / 2) return true;
        }
        return false;
    };
    auto row_touched = [&](int j) {
        for (double s : {-0.25, 0.25}) {
            const double y = ext.y_far - (j + s + 0.5) * my;
            if (y >= car.y - car.length / 2 && y <= car.y + car.length / 2) return true;
        }
        return false;
    };
    int ex0 = W, ex1 = -1, ey0 = H, ey1 = -1;
    for (int i = 0; i < W; ++i) {
        if (col_touched(i)) {
            ex0 = std::min(ex0, i);
            ex1 = std::max(ex1, i);
        }
    }
    for (int j = 0; j < H; ++j) {
        if (row_touched(j)) {
            ey0 = std::min(ey0, j);
            ey1 = std::max(ey1, j);
        }
    }
    CHECK(px0 == ex0);
    CHECK(px1 == ex1);
    CHECK(py0 == ey0);
    CHECK(py1 == ey1);
}

TEST_CASE("frontal render: lane dash transitions at analytic pinhole rows") {
    const SceneSpec scene = straight_road_scene();
    const int W = 320, H = 192;
    const CameraModel cam = CameraModel::standard(W, H);
    const Image img = render_frontal(scene, cam, W, H);
    const Homography gf = ground_to_frontal(cam);

    // Center lane divider lies along ground x = 0; dashes start at
    // y = 3k and end at y = 3k + 1.2.
    const int u = static_cast<int>(std::lround(cam.cx));
    auto is_white = [&](int v) {
        return img.at(u, v, 0) > 150 && img.at(u, v, 1) > 150;
    };
    for (double d : {6.0, 9.0}) {
        auto [gu, gv] = gf.apply(0.0, d);
        CHECK(gu == doctest::Approx(cam.cx).epsilon(0.01));
        // A dash begins at depth d: white just above this row (farther is
        // up), asphalt just below.
        const int row = static_cast<int>(std::lround(gv));
        bool found = false;
        for (int v = row - 2; v <= row + 2 && !found; ++v) {
            if (is_white(v) && !is_white(v + 1)) found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("frontal render: cars behind the camera are absent, far cars smaller") {
    SceneSpec scene = straight_road_scene();
    CarPose behind;
    behind.x = 0;
    behind.y = -5;
    scene.cars.push_back(behind);
    const CameraModel cam = CameraModel::standard(80, 48);
    const Image with = render_frontal(scene, cam, 80, 48);
    scene.cars.clear();
    const Image without = render_frontal(scene, cam, 80, 48);
    CHECK(with.pixels == without.pixels);

    auto pixel_height = [&](double y_pos) {
        SceneSpec s = straight_road_scene();
        CarPose car;
        car.x = -1.4;
        car.y = y_pos;
        car.length = 4.0;
        car.width = 1.8;
        car.height = 2.4;
        car.color[0] = 250;
        car.color[1] = 10;
        car.color[2] = 240;
        s.cars.push_back(car);
        const Image img = render_frontal(s, cam, 80, 48);
        int rows = 0;
        for (int v = 0; v < img.height; ++v) {
            for (int x = 0; x < img.width; ++x) {
                if (img.at(x, v, 0) == 250 && img.at(x, v, 1) == 10 &&
                    img.at(x, v, 2) == 240) {
                    ++rows;
                    break;
                }
            }
        }
        return rows;
    };
    const int near_h = pixel_height(5.5);
    const int mid_h = pixel_height(8.0);
    const int far_h = pixel_height(10.5);
    CHECK(near_h > mid_h);
    CHECK(mid_h > far_h);
    CHECK(far_h > 0);
}

TEST_CASE("car color consistent between views") {
    SceneSpec scene = straight_road_scene();
    CarPose car;
    car.x = 0.9;
    car.y = 8.0;
    car.color[0] = 190;
    car.color[1] = 60;
    car.color[2] = 25;
    scene.cars.push_back(car);

    const Image bird = render_bird(scene, BirdExtent::standard(), 160, 96);
    const Image frontal =
        render_frontal(scene, CameraModel::standard(160, 96), 160, 96);

    std::vector<double> bm[3], fm[3];
    collect_car_pixels(bird, car, bm);
    collect_car_pixels(frontal, car, fm);
    REQUIRE(bm[0].size() > 20);
    REQUIRE(fm[0].size() > 20);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::fabs(channel_mean(bm[c]) - channel_mean(fm[c])) < 10.0);
    }
}

TEST_CASE("ground-truth homography: analytic round trip and warp agreement") {
    const int W = 80, H = 48;
    const CameraModel cam = CameraModel::standard(W, H);
    const BirdExtent ext = BirdExtent::standard();
    const Homography gt = ground_truth_homography(cam, ext, W, H);
    const Homography gf = ground_to_frontal(cam);
    const Homography gb = ground_to_bird(ext, W, H);

    for (double y = ext.y_near; y <= ext.y_far; y += 1.3) {
        for (double x = ext.x_min; x <= ext.x_max; x += 1.7) {
            auto [fu, fv] = gf.apply(x, y);
            auto [hu, hv] = gt.apply(fu, fv);
            auto [bu, bv] = gb.apply(x, y);
            CHECK(std::hypot(hu - bu, hv - bv) < 0.5);
        }
    }

    for (std::uint64_t seed : {7ull, 8ull, 9ull}) {
        const SceneSpec scene = SceneSpec::random(seed);
        const Image frontal = render_frontal(scene, cam, W, H, false);
        const Image bird = render_bird(scene, ext, W, H, false);
        const Image warped = warp(frontal, gt, W, H);
        double sum = 0;
        for (std::size_t i = 0; i < bird.pixels.size(); ++i) {
            sum += std::fabs(static_cast<double>(warped.pixels[i]) -
                             bird.pixels[i]);
        }
        CHECK(sum / bird.pixels.size() / 255.0 < 5.0 / 255.0);
    }
}

TEST_CASE("homography maps above-horizon points to negative w") {
    const int W = 80, H = 48;
    const CameraModel cam = CameraModel::standard(W, H);
    const Homography gt =
        ground_truth_homography(cam, BirdExtent::standard(), W, H);
    const double horizon = cam.horizon_row();
    CHECK(gt.apply_homogeneous(cam.cx, horizon - 5.0).w < 0);
    CHECK(gt.apply_homogeneous(cam.cx, horizon + 5.0).w > 0);
}

TEST_CASE("degenerate camera is rejected") {
    CameraModel cam = CameraModel::standard(80, 48);
    cam.pitch = 0;
    CHECK_THROWS_AS(ground_to_frontal(cam), degeneracy_error);
    cam.pitch = 0.5;
    cam.height = 0;
    CHECK_THROWS_AS(ground_to_frontal(cam), contract_error);
}

TEST_CASE("scene estimation recovers the planted homography") {
    DatagenConfig cfg;
    const Homography gt = ground_truth_homography(
        CameraModel::standard(cfg.width, cfg.height), BirdExtent::standard(),
        cfg.width, cfg.height);
    int good = 0;
    const int trials = 20;
    for (int i = 0; i < trials; ++i) {
        const SceneSpec scene = SceneSpec::random(mix_seed(555, i));
        const EstimatedH est = estimate_scene_homography(scene, cfg);
        REQUIRE(!est.fallback);
        CHECK(est.matches >= 30);
        if (homography_disagreement(gt, est.h, cfg.width, cfg.height) < 1.0) {
            ++good;
        }
    }
    CHECK(good >= trials - 1);
}

TEST_CASE("dataset generation: split, reload, determinism") {
    const auto dir = std::filesystem::temp_directory_path() / "bg_datagen_test";
    std::filesystem::remove_all(dir);

    DatagenConfig cfg;
    cfg.n = 10;
    cfg.seed = 77;
    cfg.train_fraction = 0.8;
    cfg.homog_source = HomogSource::oracle;
    const Manifest m = generate_dataset(cfg, dir.string());

    CHECK(m.entries.size() == 10);
    CHECK(m.split_entries("train").size() == 8);
    CHECK(m.split_entries("test").size() == 2);

    const Manifest loaded = load_manifest((dir / "manifest.txt").string());
    CHECK(loaded.width == cfg.width);
    CHECK(loaded.height == cfg.height);
    REQUIRE(loaded.entries.size() == 10);
    for (const auto& e : loaded.entries) {
        const Image img = load_ppm(loaded.resolve(e.frontal_path));
        CHECK(img.width == cfg.width);
        CHECK(img.height == cfg.height);
        for (int i = 0; i < 9; ++i) {
            CHECK(e.gt_h.m[i] == m.entries[e.id].gt_h.m[i]);
        }
    }

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    const std::string manifest_once = slurp(dir / "manifest.txt");
    const std::string bird_once = slurp(dir / loaded.entries[3].bird_path);
    generate_dataset(cfg, dir.string());
    CHECK(slurp(dir / "manifest.txt") == manifest_once);
    CHECK(slurp(dir / loaded.entries[3].bird_path) == bird_once);

    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset generation error paths") {
    DatagenConfig cfg;
    cfg.n = 0;
    CHECK_THROWS_AS(generate_dataset(cfg, "/tmp/bg_unused"), contract_error);
    cfg.n = 1;
    CHECK_THROWS_AS(generate_dataset(cfg, "/proc/no_such/dir"), io_error);
    CHECK_THROWS_AS(load_manifest("/tmp/bg_definitely_missing_manifest.txt"),
                    io_error);
    CHECK(std::llround(DatagenConfig{}.n * DatagenConfig{}.train_fraction) == 512);
}
