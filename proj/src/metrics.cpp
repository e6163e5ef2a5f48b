#include "bridgegan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

#include "bridgegan/checkpoint.hpp"
#include "bridgegan/errors.hpp"
#include "bridgegan/trainer.hpp"

namespace bridgegan {

namespace {

void check_same_shape(const Image& a, const Image& b, const char* who) {
    if (a.width != b.width || a.height != b.height ||
        a.channels != b.channels) {
        throw dimension_error(std::string(who) + ": image shapes differ");
    }
    if (a.empty()) throw dimension_error(std::string(who) + ": empty image");
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> ssim_kernel() {
    std::vector<double> k(kSsimWindow);
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Valid-mode separable Gaussian filtering of a width x height raster.
std::vector<double> filter_valid(const std::vector<double>& src, int width,
                                 int height, const std::vector<double>& k) {
    const int kw = static_cast<int>(k.size());
    const int ow = width - kw + 1;
    const int oh = height - kw + 1;
    std::vector<double> horiz(static_cast<std::size_t>(ow) * height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kw; ++i) {
                acc += k[i] * src[static_cast<std::size_t>(y) * width + x + i];
            }
            horiz[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kw; ++i) {
                acc += k[i] * horiz[static_cast<std::size_t>(y + i) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

// Sum over channels of the squared per-position unit-normalized feature
// difference, averaged over batch and spatial positions.
double tap_distance(const Tensor& fa, const Tensor& fb) {
    const Shape4 s = fa.shape();
    const float* a = fa.data().data();
    const float* b = fb.data().data();
    const std::int64_t sp = static_cast<std::int64_t>(s.h) * s.w;
    constexpr double eps = 1e-10;
    double total = 0.0;
    for (int n = 0; n < s.n; ++n) {
        for (std::int64_t i = 0; i < sp; ++i) {
            double na = 0.0, nb = 0.0;
            for (int c = 0; c < s.c; ++c) {
                const std::int64_t idx =
                    (static_cast<std::int64_t>(n) * s.c + c) * sp + i;
                na += static_cast<double>(a[idx]) * a[idx];
                nb += static_cast<double>(b[idx]) * b[idx];
            }
            na = std::sqrt(na) + eps;
            nb = std::sqrt(nb) + eps;
            for (int c = 0; c < s.c; ++c) {
                const std::int64_t idx =
                    (static_cast<std::int64_t>(n) * s.c + c) * sp + i;
                const double d = a[idx] / na - b[idx] / nb;
                total += d * d;
            }
        }
    }
    return total / (static_cast<double>(s.n) * sp);
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
    check_same_shape(a, b, "psnr");
    if (peak <= 0.0) throw contract_error("psnr: peak must be > 0");
    const std::vector<float> fa = image_to_unit_floats(a);
    const std::vector<float> fb = image_to_unit_floats(b);
    double mse = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        const double d = static_cast<double>(fa[i]) - fb[i];
        mse += d * d;
    }
    mse /= static_cast<double>(fa.size());
    if (mse <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b, double peak) {
    check_same_shape(a, b, "ssim");
    if (peak <= 0.0) throw contract_error("ssim: peak must be > 0");
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        throw input_error("ssim: image smaller than the " +
                          std::to_string(kSsimWindow) + "px window");
    }
    const GrayImage ga = to_gray(a);
    const GrayImage gb = to_gray(b);
    const int w = a.width, h = a.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> xa(n), xb(n), xaa(n), xbb(n), xab(n);
    for (std::size_t i = 0; i < n; ++i) {
        xa[i] = ga.values[i];
        xb[i] = gb.values[i];
        xaa[i] = xa[i] * xa[i];
        xbb[i] = xb[i] * xb[i];
        xab[i] = xa[i] * xb[i];
    }
    const std::vector<double> k = ssim_kernel();
    const std::vector<double> mu1 = filter_valid(xa, w, h, k);
    const std::vector<double> mu2 = filter_valid(xb, w, h, k);
    const std::vector<double> s11 = filter_valid(xaa, w, h, k);
    const std::vector<double> s22 = filter_valid(xbb, w, h, k);
    const std::vector<double> s12 = filter_valid(xab, w, h, k);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double var1 = s11[i] - m1 * m1;
        const double var2 = s22[i] - m2 * m2;
        const double cov = s12[i] - m1 * m2;
        acc += ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2)) /
               ((m1 * m1 + m2 * m2 + c1) * (var1 + var2 + c2));
    }
    return acc / static_cast<double>(mu1.size());
}

double perceptual_distance(const Image& a, const Image& b,
                           const FeatureNet& phi) {
    check_same_shape(a, b, "perceptual_distance");
    NoGradGuard no_grad;
    const FeatureNet::Taps ta = phi.forward(image_to_tensor(a));
    const FeatureNet::Taps tb = phi.forward(image_to_tensor(b));
    return tap_distance(ta.shallow, tb.shallow) +
           tap_distance(ta.deep, tb.deep);
}

EvalReport evaluate(const Manifest& manifest, const EvalOptions& options) {
    const auto entries = manifest.split_entries(options.split);
    if (entries.empty()) {
        throw input_error("evaluate: split \"" + options.split +
                          "\" has no entries");
    }

    std::unique_ptr<BridgeGAN> net;
    if (!options.checkpoint_path.empty()) {
        const CheckpointInfo info = peek_checkpoint(options.checkpoint_path);
        net = std::make_unique<BridgeGAN>(info.arch, options.model_seed);
        load_checkpoint(options.checkpoint_path, *net);
        net->set_training(false);
    }
    const FeatureNet phi(options.phi_seed);

    EvalReport report;
    report.label = options.label;
    for (const ManifestEntry* entry : entries) {
        const Image frontal = load_ppm(manifest.resolve(entry->frontal_path));
        const Image bird = load_ppm(manifest.resolve(entry->bird_path));
        const Homography h = resolve_homography(
            *entry, options.homog_source, manifest.width, manifest.height);
        const Image pred =
            net ? infer(*net, frontal, h)
                : warp(frontal, h, manifest.width, manifest.height);
        report.ids.push_back(entry->id);
        report.psnr.push_back(psnr(pred, bird));
        report.ssim.push_back(ssim(pred, bird));
        report.perceptual.push_back(perceptual_distance(pred, bird, phi));
    }
    report.mean_psnr = mean_of(report.psnr);
    report.mean_ssim = mean_of(report.ssim);
    report.mean_perceptual = mean_of(report.perceptual);
    return report;
}

std::string format_eval_table(const std::vector<EvalReport>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "model" << std::right << std::setw(10)
       << "PSNR" << std::setw(10) << "SSIM" << std::setw(12) << "perceptual"
       << "\n";
    os << std::fixed << std::setprecision(4);
    for (const EvalReport& r : rows) {
        os << std::left << std::setw(16) << r.label << std::right
           << std::setw(10) << r.mean_psnr << std::setw(10) << r.mean_ssim
           << std::setw(12) << r.mean_perceptual << "\n";
    }
    return os.str();
}

std::string format_eval_records(const std::vector<EvalReport>& rows) {
    std::ostringstream os;
    os << std::setprecision(9);
    for (const EvalReport& r : rows) {
        os << "label=" << r.label << " n=" << r.ids.size()
           << " psnr=" << r.mean_psnr << " ssim=" << r.mean_ssim
           << " perceptual=" << r.mean_perceptual << "\n";
    }
    return os.str();
}

}  // namespace bridgegan
