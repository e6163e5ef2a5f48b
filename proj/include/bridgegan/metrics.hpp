#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgegan/datagen.hpp"
#include "bridgegan/image.hpp"
#include "bridgegan/losses.hpp"

namespace bridgegan {

// Zero-MSE sentinel; computed values are capped here as well.
constexpr double kPsnrCapDb = 99.0;

// 10*log10(peak^2 / MSE) over all channels in [0, 1]. Throws dimension_error
// on shape mismatch.
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Mean local SSIM on luma, Gaussian window 11 / sigma 1.5,
// C1 = (0.01*peak)^2, C2 = (0.03*peak)^2. Images smaller than the window are
// rejected with input_error.
double ssim(const Image& a, const Image& b, double peak = 1.0);

// LPIPS-style distance: per-position channel unit normalization at both
// feature taps, squared difference summed over channels, averaged spatially,
// summed across taps.
double perceptual_distance(const Image& a, const Image& b,
                           const FeatureNet& phi);

// One table row: per-image metrics over a split plus their corpus means.
struct EvalReport {
    std::string label;
    std::vector<int> ids;
    std::vector<double> psnr, ssim, perceptual;
    double mean_psnr = 0.0, mean_ssim = 0.0, mean_perceptual = 0.0;
};

struct EvalOptions {
    std::string label = "ours";
    // Empty path selects the Homo baseline: the raw warp onto the bird frame,
    // no model involved.
    std::string checkpoint_path;
    std::string split = "test";
    HomogSource homog_source = HomogSource::estimated;
    std::uint64_t phi_seed = 1;
    std::uint64_t model_seed = 1;
};

// Runs inference over every entry of the split and scores it against the
// ground-truth bird renders.
EvalReport evaluate(const Manifest& manifest, const EvalOptions& options);

// Human-readable aligned table, one row per report, caller-ordered.
std::string format_eval_table(const std::vector<EvalReport>& rows);
// Machine-readable key=value line per row.
std::string format_eval_records(const std::vector<EvalReport>& rows);

}  // namespace bridgegan
