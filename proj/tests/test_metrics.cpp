#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "bridgegan/datagen.hpp"
#include "bridgegan/errors.hpp"
#include "bridgegan/metrics.hpp"
#include "bridgegan/rng.hpp"
#include "bridgegan/trainer.hpp"

using namespace bridgegan;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    Image img(w, h, 3);
    for (auto& p : img.pixels) {
        p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    return img;
}

Image add_noise(const Image& img, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    Image out = img;
    for (auto& p : out.pixels) {
        const double v = p + 255.0 * rng.normal(0.0f, static_cast<float>(sigma));
        p = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return (sub.empty() ? path : path / sub).string();
    }
};

}  // namespace

TEST_CASE("psnr closed forms") {
    SUBCASE("identical images hit the cap sentinel") {
        const Image a = noise_image(24, 16, 5);
        CHECK(psnr(a, a) == kPsnrCapDb);
    }
    SUBCASE("MSE 0.01 at peak 1 gives 20 dB") {
        // 101 pixels at 26/255 and 103 at 25/255:
        // (101*676 + 103*625) / 204 = 650.25 = 0.01 * 255^2.
        Image a(204, 1, 1), b(204, 1, 1);
        for (int x = 0; x < 204; ++x) b.at(x, 0, 0) = x < 101 ? 26 : 25;
        CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-5));
    }
    SUBCASE("unit error gives 0 dB") {
        Image a(8, 8, 3), b(8, 8, 3);
        for (auto& p : b.pixels) p = 255;
        CHECK(psnr(a, b, 1.0) == doctest::Approx(0.0));
    }
    SUBCASE("strictly decreasing in MSE, symmetric") {
        const Image a = noise_image(24, 16, 7);
        const Image n1 = add_noise(a, 0.05, 11);
        const Image n2 = add_noise(a, 0.2, 11);
        CHECK(psnr(a, n1) > psnr(a, n2));
        CHECK(psnr(a, n1) == doctest::Approx(psnr(n1, a)));
    }
    SUBCASE("shape mismatch and bad peak rejected") {
        CHECK_THROWS_AS(psnr(Image(8, 8, 3), Image(8, 9, 3)), dimension_error);
        CHECK_THROWS_AS(psnr(Image(8, 8, 3), Image(8, 8, 3), 0.0),
                        contract_error);
    }
}

TEST_CASE("ssim oracles") {
    const Image a = noise_image(32, 24, 13);
    SUBCASE("identity is exactly 1") {
        CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("anticorrelated structure scores negative") {
        Image inv = a;
        for (auto& p : inv.pixels) p = static_cast<std::uint8_t>(255 - p);
        CHECK(ssim(a, inv) < 0.0);
    }
    SUBCASE("bounded and symmetric") {
        const Image b = noise_image(32, 24, 17);
        const double v = ssim(a, b);
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
        CHECK(v == doctest::Approx(ssim(b, a)));
        CHECK(v < 1.0);
    }
    SUBCASE("degrades with noise") {
        CHECK(ssim(a, add_noise(a, 0.05, 19)) > ssim(a, add_noise(a, 0.2, 19)));
    }
    SUBCASE("images below the window size rejected") {
        CHECK_THROWS_AS(ssim(Image(10, 24, 3), Image(10, 24, 3)), input_error);
        CHECK_THROWS_AS(ssim(Image(24, 10, 3), Image(24, 10, 3)), input_error);
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(ssim(a, Image(24, 32, 3)), dimension_error);
    }
}

TEST_CASE("perceptual distance oracles") {
    const FeatureNet phi(23);
    const Image a = noise_image(48, 32, 29);
    SUBCASE("identity is exactly zero") {
        CHECK(perceptual_distance(a, a, phi) == 0.0);
    }
    SUBCASE("symmetric and nonnegative") {
        const Image b = noise_image(48, 32, 31);
        const double d = perceptual_distance(a, b, phi);
        CHECK(d > 0.0);
        CHECK(d == doctest::Approx(perceptual_distance(b, a, phi)));
    }
    SUBCASE("monotone in injected noise level") {
        const double d1 = perceptual_distance(a, add_noise(a, 0.05, 37), phi);
        const double d2 = perceptual_distance(a, add_noise(a, 0.1, 37), phi);
        const double d3 = perceptual_distance(a, add_noise(a, 0.2, 37), phi);
        CHECK(d1 < d2);
        CHECK(d2 < d3);
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(perceptual_distance(a, Image(32, 48, 3), phi),
                        dimension_error);
    }
}

TEST_CASE("evaluate scores a split against the bird renders") {
    TempDir dir("bg_metrics_eval");
    DatagenConfig dg;
    dg.n = 6;
    dg.seed = 41;
    dg.width = 32;
    dg.height = 16;
    dg.train_fraction = 2.0 / 3.0;
    dg.homog_source = HomogSource::oracle;
    const Manifest manifest = generate_dataset(dg, dir.str("data"));

    SUBCASE("homo baseline needs no checkpoint") {
        EvalOptions opts;
        opts.label = "homo";
        opts.homog_source = HomogSource::oracle;
        const EvalReport r = evaluate(manifest, opts);
        CHECK(r.label == "homo");
        CHECK(r.ids.size() == 2);
        CHECK(r.psnr.size() == 2);
        CHECK(r.mean_psnr == doctest::Approx((r.psnr[0] + r.psnr[1]) / 2));
        CHECK(r.mean_ssim == doctest::Approx((r.ssim[0] + r.ssim[1]) / 2));
        CHECK(r.mean_perceptual ==
              doctest::Approx((r.perceptual[0] + r.perceptual[1]) / 2));
        CHECK(r.mean_ssim < 1.0);
        CHECK(std::isfinite(r.mean_psnr));
    }

    SUBCASE("checkpointed model evaluates end to end") {
        TrainConfig cfg;
        cfg.width = 32;
        cfg.height = 16;
        cfg.batch_per_domain = 2;
        cfg.iterations = 2;
        cfg.checkpoint_every = 100;
        cfg.seed = 43;
        cfg.homog_source = HomogSource::oracle;
        const TrainResult tr = train(cfg, manifest, dir.str("run"));

        EvalOptions opts;
        opts.label = "ours";
        opts.checkpoint_path = tr.final_checkpoint;
        opts.homog_source = HomogSource::oracle;
        const EvalReport r = evaluate(manifest, opts);
        CHECK(r.ids.size() == 2);
        CHECK(std::isfinite(r.mean_psnr));
        CHECK(r.mean_ssim > -1.0);
        CHECK(r.mean_ssim < 1.0);
        CHECK(r.mean_perceptual > 0.0);

        // Same checkpoint, same scores.
        const EvalReport r2 = evaluate(manifest, opts);
        CHECK(r2.mean_ssim == r.mean_ssim);
        CHECK(r2.mean_psnr == r.mean_psnr);
    }

    SUBCASE("empty split rejected") {
        EvalOptions opts;
        opts.split = "validation";
        CHECK_THROWS_AS(evaluate(manifest, opts), input_error);
    }
}

TEST_CASE("report formatting keeps caller row order") {
    EvalReport homo, ours;
    homo.label = "homo";
    homo.ids = {0};
    homo.psnr = {12.5};
    homo.ssim = {0.5715};
    homo.perceptual = {0.9};
    homo.mean_psnr = 12.5;
    homo.mean_ssim = 0.5715;
    homo.mean_perceptual = 0.9;
    ours.label = "ours";
    ours.ids = {0};
    ours.psnr = {14.5};
    ours.ssim = {0.5961};
    ours.perceptual = {0.7};
    ours.mean_psnr = 14.5;
    ours.mean_ssim = 0.5961;
    ours.mean_perceptual = 0.7;

    const std::string table = format_eval_table({homo, ours});
    const auto homo_pos = table.find("homo");
    const auto ours_pos = table.find("ours");
    CHECK(homo_pos != std::string::npos);
    CHECK(ours_pos != std::string::npos);
    CHECK(homo_pos < ours_pos);
    CHECK(table.find("0.5715") != std::string::npos);

    const std::string records = format_eval_records({homo, ours});
    CHECK(records.find("label=homo") != std::string::npos);
    CHECK(records.find("ssim=0.5961") != std::string::npos);
    CHECK(records.find("n=1") != std::string::npos);
}
