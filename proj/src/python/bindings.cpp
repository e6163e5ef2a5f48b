#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include "bridgegan/checkpoint.hpp"
#include "bridgegan/datagen.hpp"
#include "bridgegan/errors.hpp"
#include "bridgegan/geometry.hpp"
#include "bridgegan/gradcheck.hpp"
#include "bridgegan/metrics.hpp"
#include "bridgegan/trainer.hpp"

namespace py = pybind11;
using namespace bridgegan;

namespace {

Image image_from_array(const py::array_t<std::uint8_t>& arr) {
    auto contiguous =
        py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>(
            arr);
    const py::buffer_info info = contiguous.request();
    int channels = 1;
    if (info.ndim == 3) {
        channels = static_cast<int>(info.shape[2]);
    } else if (info.ndim != 2) {
        throw input_error("expected an HxW or HxWxC uint8 array");
    }
    if (channels != 1 && channels != 3) {
        throw input_error("expected 1 or 3 channels");
    }
    Image img(static_cast<int>(info.shape[1]), static_cast<int>(info.shape[0]),
              channels);
    std::memcpy(img.pixels.data(), info.ptr, img.pixels.size());
    return img;
}

py::array_t<std::uint8_t> image_to_array(const Image& img) {
    py::array_t<std::uint8_t> out(
        {img.height, img.width, img.channels});
    std::memcpy(out.request().ptr, img.pixels.data(), img.pixels.size());
    return out;
}

Homography homography_from_array(const py::array_t<double>& arr) {
    auto flat = py::array_t<double, py::array::c_style | py::array::forcecast>(arr);
    if (flat.size() != 9) throw input_error("homography needs 9 entries");
    std::array<double, 9> m;
    std::memcpy(m.data(), flat.request().ptr, sizeof(m));
    return Homography::from_array(m);
}

py::array_t<double> homography_to_array(const Homography& h) {
    py::array_t<double> out({3, 3});
    std::memcpy(out.request().ptr, h.m.data(), sizeof(h.m));
    return out;
}

TrainConfig config_from_kwargs(const py::dict& kwargs) {
    std::string text;
    for (const auto& item : kwargs) {
        std::string value;
        if (py::isinstance<py::bool_>(item.second)) {
            value = item.second.cast<bool>() ? "true" : "false";
        } else {
            value = py::str(item.second).cast<std::string>();
        }
        text += py::str(item.first).cast<std::string>() + "=" + value + "\n";
    }
    // from_string rejects unknown keys but leaves omitted ones at defaults.
    return TrainConfig::from_string(text);
}

}  // namespace

PYBIND11_MODULE(_bridgegan, m) {
    m.doc() = "Bird view synthesis core: geometry, data generation, training "
              "and metrics";
    m.attr("__version__") = "0.1.0";
    m.attr("checkpoint_version") = kCheckpointVersion;

    py::register_exception<dimension_error>(m, "DimensionError");
    py::register_exception<numeric_error>(m, "NumericError");
    py::register_exception<degeneracy_error>(m, "DegeneracyError");
    py::register_exception<estimation_error>(m, "EstimationError");
    py::register_exception<input_error>(m, "InputError");
    py::register_exception<io_error>(m, "IoError");

    // ---- geometry ----
    m.def(
        "warp",
        [](const py::array_t<std::uint8_t>& image, const py::array_t<double>& h,
           int out_width, int out_height) {
            return image_to_array(warp(image_from_array(image),
                                       homography_from_array(h), out_width,
                                       out_height));
        },
        py::arg("image"), py::arg("h"), py::arg("out_width"),
        py::arg("out_height"),
        "Inverse-mapping perspective warp with bilinear sampling.");

    m.def(
        "apply_homography",
        [](const py::array_t<double>& h, double x, double y) {
            const auto p = homography_from_array(h).apply(x, y);
            return py::make_tuple(p.first, p.second);
        },
        py::arg("h"), py::arg("x"), py::arg("y"));

    m.def(
        "invert_homography",
        [](const py::array_t<double>& h) {
            return homography_to_array(homography_from_array(h).inverse());
        },
        py::arg("h"));

    m.def(
        "dlt",
        [](const py::array_t<double>& pairs) {
            auto flat = py::array_t<double, py::array::c_style |
                                                py::array::forcecast>(pairs);
            const py::buffer_info info = flat.request();
            if (info.ndim != 2 || info.shape[1] != 4) {
                throw input_error("dlt expects an Nx4 array of "
                                  "(x1, y1, x2, y2) rows");
            }
            const double* d = static_cast<const double*>(info.ptr);
            std::vector<PointPair> pp(static_cast<std::size_t>(info.shape[0]));
            for (std::size_t i = 0; i < pp.size(); ++i) {
                pp[i] = {d[i * 4], d[i * 4 + 1], d[i * 4 + 2], d[i * 4 + 3]};
            }
            return homography_to_array(dlt(pp));
        },
        py::arg("pairs"),
        "Hartley-normalized direct linear transform from >= 4 point pairs.");

    m.def(
        "estimate_homography",
        [](const py::array_t<std::uint8_t>& src,
           const py::array_t<std::uint8_t>& dst, std::uint64_t seed,
           int iterations, double threshold, int top_k) {
            Rng rng(seed);
            const EstimationResult r = estimate_homography(
                image_from_array(src), image_from_array(dst), rng, OrbParams{},
                iterations, threshold, top_k);
            py::dict out;
            out["h"] = homography_to_array(r.h);
            out["matches"] = r.matches;
            out["inliers"] = r.inliers;
            out["mean_reproj_error"] = r.mean_reproj_error;
            return out;
        },
        py::arg("src"), py::arg("dst"), py::arg("seed") = 1,
        py::arg("iterations") = 1000, py::arg("threshold") = 2.0,
        py::arg("top_k") = 30,
        "Feature matching + RANSAC + DLT between two images of a plane.");

    // ---- images ----
    m.def(
        "load_ppm",
        [](const std::string& path) { return image_to_array(load_ppm(path)); },
        py::arg("path"));
    m.def(
        "save_ppm",
        [](const py::array_t<std::uint8_t>& image, const std::string& path) {
            save_ppm(image_from_array(image), path);
        },
        py::arg("image"), py::arg("path"));

    // ---- datagen ----
    m.def(
        "generate_dataset",
        [](const std::string& out_dir, int n, std::uint64_t seed, int width,
           int height, double train_fraction, const std::string& homog_source,
           int estimation_scale) {
            DatagenConfig cfg;
            cfg.n = n;
            cfg.seed = seed;
            cfg.width = width;
            cfg.height = height;
            cfg.train_fraction = train_fraction;
            cfg.homog_source = homog_source == "oracle" ? HomogSource::oracle
                                                        : HomogSource::estimated;
            if (homog_source != "oracle" && homog_source != "estimated") {
                throw input_error("homog_source must be estimated or oracle");
            }
            cfg.estimation_scale = estimation_scale;
            const Manifest manifest = generate_dataset(cfg, out_dir);
            py::dict out;
            out["manifest"] = (std::filesystem::path(manifest.dir) /
                               "manifest.txt")
                                  .string();
            out["entries"] = manifest.entries.size();
            out["width"] = manifest.width;
            out["height"] = manifest.height;
            return out;
        },
        py::arg("out_dir"), py::arg("n") = 576, py::arg("seed") = 1,
        py::arg("width") = 80, py::arg("height") = 48,
        py::arg("train_fraction") = 8.0 / 9.0,
        py::arg("homog_source") = "estimated", py::arg("estimation_scale") = 4,
        "Render n synthetic frontal/homography/bird triplets plus a manifest.");

    // ---- training / inference ----
    m.def(
        "train",
        [](const std::string& data, const std::string& out_dir,
           const std::string& resume_from, const py::kwargs& kwargs) {
            const TrainConfig cfg = config_from_kwargs(kwargs);
            const std::filesystem::path p(data);
            const Manifest manifest =
                std::filesystem::is_directory(p)
                    ? load_manifest((p / "manifest.txt").string())
                    : load_manifest(data);
            const TrainResult r = train(cfg, manifest, out_dir, resume_from);
            py::dict out;
            out["iterations_run"] = r.iterations_run;
            out["final_checkpoint"] = r.final_checkpoint;
            out["loss_log"] = r.loss_log;
            return out;
        },
        py::arg("data"), py::arg("out_dir"), py::arg("resume_from") = "",
        "Train on a dataset directory; config fields as keyword arguments "
        "(lr, iterations, batch_per_domain, seed, no_X, ...).");

    m.def(
        "infer",
        [](const std::string& checkpoint,
           const py::array_t<std::uint8_t>& frontal,
           const py::array_t<double>& h) {
            const CheckpointInfo info = peek_checkpoint(checkpoint);
            BridgeGAN net(info.arch, 1);
            load_checkpoint(checkpoint, net);
            return image_to_array(
                infer(net, image_from_array(frontal), homography_from_array(h)));
        },
        py::arg("checkpoint"), py::arg("frontal"), py::arg("h"),
        "Warp the frontal image with h, then map it to the bird view.");

    m.def(
        "canonical_homography",
        [](int width, int height) {
            return homography_to_array(ground_truth_homography(
                CameraModel::standard(width, height), BirdExtent::standard(),
                width, height));
        },
        py::arg("width"), py::arg("height"),
        "Ground-truth frontal-to-bird homography of the fixed dataset camera.");

    // ---- metrics ----
    m.def(
        "psnr",
        [](const py::array_t<std::uint8_t>& a, const py::array_t<std::uint8_t>& b,
           double peak) {
            return psnr(image_from_array(a), image_from_array(b), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def(
        "ssim",
        [](const py::array_t<std::uint8_t>& a, const py::array_t<std::uint8_t>& b,
           double peak) {
            return ssim(image_from_array(a), image_from_array(b), peak);
        },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def(
        "perceptual_distance",
        [](const py::array_t<std::uint8_t>& a, const py::array_t<std::uint8_t>& b,
           std::uint64_t phi_seed) {
            const FeatureNet phi(phi_seed);
            return perceptual_distance(image_from_array(a), image_from_array(b),
                                       phi);
        },
        py::arg("a"), py::arg("b"), py::arg("phi_seed") = 1);

    m.def(
        "evaluate",
        [](const std::string& data, const std::string& checkpoint,
           const std::string& split, const std::string& homog_source,
           const std::string& label) {
            const std::filesystem::path p(data);
            const Manifest manifest =
                std::filesystem::is_directory(p)
                    ? load_manifest((p / "manifest.txt").string())
                    : load_manifest(data);
            EvalOptions opts;
            opts.checkpoint_path = checkpoint;
            opts.split = split;
            opts.label = label;
            if (homog_source != "oracle" && homog_source != "estimated") {
                throw input_error("homog_source must be estimated or oracle");
            }
            opts.homog_source = homog_source == "oracle"
                                    ? HomogSource::oracle
                                    : HomogSource::estimated;
            const EvalReport r = evaluate(manifest, opts);
            py::dict out;
            out["label"] = r.label;
            out["ids"] = r.ids;
            out["psnr"] = r.psnr;
            out["ssim"] = r.ssim;
            out["perceptual"] = r.perceptual;
            out["mean_psnr"] = r.mean_psnr;
            out["mean_ssim"] = r.mean_ssim;
            out["mean_perceptual"] = r.mean_perceptual;
            return out;
        },
        py::arg("data"), py::arg("checkpoint") = "", py::arg("split") = "test",
        py::arg("homog_source") = "estimated", py::arg("label") = "ours",
        "Score a checkpoint (or, with no checkpoint, the raw warp baseline) "
        "against the ground-truth bird renders of a split.");

    // ---- gradient audit ----
    m.def(
        "run_gradcheck",
        [](const std::string& filter) {
            py::list out;
            for (const GradCheckResult& r : run_gradcheck(filter)) {
                py::dict row;
                row["name"] = r.name;
                row["max_rel_err"] = r.max_rel_err;
                row["threshold"] = r.threshold;
                row["passed"] = r.passed();
                out.append(row);
            }
            return out;
        },
        py::arg("filter") = "",
        "Finite-difference audit of every op and loss term.");
}
