#pragma once

#include <array>
#include <functional>
#include <vector>

#include "bridgegan/model.hpp"
#include "bridgegan/nn.hpp"
#include "bridgegan/tensor.hpp"

namespace bridgegan {

struct LossWeights {
    float lambda1 = 10.0f;    // dual cycle consistency
    float lambda_pix = 10.0f; // supervised pixel L1 on the bird outputs
    float lambda_idt = 1.0f;  // identity self-reconstruction
    float lambda_cfc = 1.0f;  // cross-view feature consistency
};

struct LossOptions {
    bool no_cyc = false;
    bool no_cfc = false;
};

// One domain's slice of a mini-batch. ids are triplet ids; the feature
// consistency loss requires the X and Z slices to carry the same ids in the
// same order.
struct DomainBatch {
    std::vector<int> ids;
    Tensor images;  // (B, 3, H, W) in [-1, 1]
};

struct TripletBatch {
    DomainBatch x, y, z;  // x may be empty under the no_X ablation
};

// Frozen 6-layer convnet used for feature-space distances. Two taps: shallow
// (after layer 2, stride 4) and deep (after layer 6, stride 16). Weights are
// seeded and never receive gradients.
class FeatureNet {
  public:
    struct Taps {
        Tensor shallow, deep;
    };
    using TapHook = std::function<Taps(const Tensor&)>;

    explicit FeatureNet(std::uint64_t seed, int base_channels = 16);

    Taps forward(const Tensor& img) const;

    // Substitutes externally supplied tap features for the built-in convnet.
    void set_tap_hook(TapHook hook) { hook_ = std::move(hook); }

    nn::ParamRegistry& registry() { return registry_; }

  private:
    std::array<nn::Conv2dLayer, 6> convs_;
    float slope_ = 0.2f;
    TapHook hook_;
    nn::ParamRegistry registry_;
};

// All scalars are exact doubles of the corresponding graph nodes. The
// weighting convention: cyc_total already includes lambda1; pix_l1, cfc_total
// and idt_total are raw and weighted only inside grand_total.
struct LossReport {
    double gan_total = 0;
    std::array<double, 4> gan_per_mapping{};  // G, F, Ghat, Fhat
    double pix_l1 = 0;
    double cyc_total = 0;
    double cfc_total = 0;
    double idt_total = 0;
    double grand_total = 0;

    // grand_total as a graph scalar, for the encoder/generator update.
    Tensor objective;
};

// -(mean log real + mean log(1 - fake)); scores are clamped to
// [eps, 1 - eps] before the log. Callers must pass fake scores computed from
// detached generator outputs when updating the discriminator.
Tensor adversarial_d_loss(const Tensor& score_real, const Tensor& score_fake);
// Non-saturating generator target, -mean log fake.
Tensor adversarial_g_loss(const Tensor& score_fake);

// Mean absolute difference; throws dimension_error on shape mismatch.
Tensor pixel_l1(const Tensor& fake, const Tensor& target);

// L1 of both cycle residuals, bwd(fwd(a)) vs a and fwd(bwd(b)) vs b, summed.
using MapFn = std::function<Tensor(const Tensor&)>;
Tensor cycle_loss(const MapFn& fwd, const MapFn& bwd, const Tensor& a_batch,
                  const Tensor& b_batch);

// lambda1 * (pair_gx + pair_fz).
Tensor dual_cycle_loss(const Tensor& pair_gx, const Tensor& pair_fz,
                       float lambda1);
// Both cycle pairs through the network; under no_X only the frontal pair
// contributes.
Tensor dual_cycle_loss(BridgeGAN& net, const TripletBatch& batch,
                       float lambda1);

// Sum over both taps of squared L2 distance divided by the tap's element
// count, so a constant per-element difference of 1 at one tap scores exactly 1.
Tensor feature_distance(const Tensor& a_img, const Tensor& b_img,
                        const FeatureNet& phi);

// Batch-mean feature distance between each generated bird image and the
// aligned real frontal image, over both generation paths. Throws
// contract_error if the x and z slices carry different triplet ids.
Tensor cfc_loss(BridgeGAN& net, const DomainBatch& x_batch,
                const DomainBatch& z_batch, const FeatureNet& phi);

// Full encoder/generator objective: four adversarial mapping terms, the
// supervised pixel terms G(x)->y and F(z)->y, dual cycle consistency,
// cross-view feature consistency, and identity self-reconstruction.
LossReport total_loss(BridgeGAN& net, const TripletBatch& batch,
                      const LossWeights& weights, const FeatureNet& phi,
                      const LossOptions& options = {});

}  // namespace bridgegan
