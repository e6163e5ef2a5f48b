#include "bridgegan/losses.hpp"

#include <string>

#include "bridgegan/errors.hpp"

namespace bridgegan {

namespace {

constexpr float kLogEps = 1e-7f;

Tensor mean_log(const Tensor& scores) {
    return mean_all(log(clamp(scores, kLogEps, 1.0f - kLogEps)));
}

Tensor one_minus(const Tensor& t) { return add_scalar(scale(t, -1.0f), 1.0f); }

void check_scores(const Tensor& s, const char* who) {
    if (!s.defined()) throw contract_error(std::string(who) + ": undefined scores");
    for (float v : s.data()) {
        if (v < 0.0f || v > 1.0f) {
            throw contract_error(std::string(who) + ": score outside [0, 1]");
        }
    }
}

}  // namespace

FeatureNet::FeatureNet(std::uint64_t seed, int base_channels) {
    if (base_channels < 1) throw contract_error("FeatureNet: bad base_channels");
    Rng rng(mix_seed(seed, 0xFEA7));
    const int b = base_channels;
    convs_[0] = nn::Conv2dLayer(3, b, 3, 1, 1, rng);
    convs_[1] = nn::Conv2dLayer(b, 2 * b, 4, 2, 1, rng);
    convs_[2] = nn::Conv2dLayer(2 * b, 2 * b, 3, 1, 1, rng);
    convs_[3] = nn::Conv2dLayer(2 * b, 4 * b, 4, 2, 1, rng);
    convs_[4] = nn::Conv2dLayer(4 * b, 4 * b, 3, 1, 1, rng);
    convs_[5] = nn::Conv2dLayer(4 * b, 4 * b, 4, 2, 1, rng);
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].register_params(registry_, "phi.c" + std::to_string(i + 1));
    }
    // Frozen: backward never reaches these, by construction.
    for (Param* p : registry_.params()) p->set_requires_grad(false);
}

FeatureNet::Taps FeatureNet::forward(const Tensor& img) const {
    if (hook_) return hook_(img);
    if (!img.defined() || img.shape().c != 3) {
        throw contract_error("FeatureNet: expected a (N, 3, H, W) input");
    }
    Tensor t = img;
    Taps taps;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        t = leaky_relu(convs_[i].forward(t), slope_);
        if (i == 1) taps.shallow = t;
    }
    taps.deep = t;
    return taps;
}

Tensor adversarial_d_loss(const Tensor& score_real, const Tensor& score_fake) {
    check_scores(score_real, "adversarial_d_loss");
    check_scores(score_fake, "adversarial_d_loss");
    return scale(mean_log(score_real) + mean_log(one_minus(score_fake)), -1.0f);
}

Tensor adversarial_g_loss(const Tensor& score_fake) {
    check_scores(score_fake, "adversarial_g_loss");
    return scale(mean_log(score_fake), -1.0f);
}

Tensor pixel_l1(const Tensor& fake, const Tensor& target) {
    return l1_distance(fake, target);
}

Tensor cycle_loss(const MapFn& fwd, const MapFn& bwd, const Tensor& a_batch,
                  const Tensor& b_batch) {
    return pixel_l1(bwd(fwd(a_batch)), a_batch) +
           pixel_l1(fwd(bwd(b_batch)), b_batch);
}

Tensor dual_cycle_loss(const Tensor& pair_gx, const Tensor& pair_fz,
                       float lambda1) {
    return scale(pair_gx + pair_fz, lambda1);
}

Tensor dual_cycle_loss(BridgeGAN& net, const TripletBatch& batch,
                       float lambda1) {
    auto map_fn = [&net](Mapping m) {
        return [&net, m](const Tensor& t) { return net.map(m, t); };
    };
    Tensor total;
    if (net.has_domain(Domain::X)) {
        total = cycle_loss(map_fn(Mapping::G), map_fn(Mapping::Ghat),
                           batch.x.images, batch.y.images);
    }
    if (net.has_domain(Domain::Z)) {
        const Tensor fz = cycle_loss(map_fn(Mapping::F), map_fn(Mapping::Fhat),
                                     batch.z.images, batch.y.images);
        total = total.defined() ? total + fz : fz;
    }
    return scale(total, lambda1);
}

Tensor feature_distance(const Tensor& a_img, const Tensor& b_img,
                        const FeatureNet& phi) {
    if (a_img.shape() != b_img.shape()) {
        throw dimension_error("feature_distance: shape mismatch " +
                              a_img.shape().str() + " vs " + b_img.shape().str());
    }
    const FeatureNet::Taps ta = phi.forward(a_img);
    const FeatureNet::Taps tb = phi.forward(b_img);
    // Dividing by the full element count (batch included) makes the batched
    // call the batch mean of per-sample normalized distances.
    const Tensor shallow = sum_all(square(ta.shallow - tb.shallow));
    const Tensor deep = sum_all(square(ta.deep - tb.deep));
    return scale(shallow, 1.0f / ta.shallow.numel()) +
           scale(deep, 1.0f / ta.deep.numel());
}

// The real frontal images are the feature reference for both paths, so
// z_batch carries the reference even when the Z subnetworks are ablated.
Tensor cfc_loss(BridgeGAN& net, const DomainBatch& x_batch,
                const DomainBatch& z_batch, const FeatureNet& phi) {
    Tensor total;
    if (net.has_domain(Domain::Z)) {
        total = feature_distance(net.map(Mapping::F, z_batch.images),
                                 z_batch.images, phi);
    }
    if (net.has_domain(Domain::X)) {
        if (x_batch.ids != z_batch.ids) {
            throw contract_error("cfc_loss: x and z batches are not "
                                 "view-aligned (triplet ids differ)");
        }
        const Tensor g_path = feature_distance(
            net.map(Mapping::G, x_batch.images), z_batch.images, phi);
        total = total.defined() ? g_path + total : g_path;
    }
    return total;
}

LossReport total_loss(BridgeGAN& net, const TripletBatch& batch,
                      const LossWeights& weights, const FeatureNet& phi,
                      const LossOptions& options) {
    const bool with_x = net.has_domain(Domain::X);
    const bool with_z = net.has_domain(Domain::Z);
    const bool need_z_ref = with_z || (!options.no_cfc && weights.lambda_cfc != 0.0f);
    if (!batch.y.images.defined() || (need_z_ref && !batch.z.images.defined()) ||
        (with_x && !batch.x.images.defined())) {
        throw contract_error("total_loss: incomplete triplet batch");
    }

    LossReport report;

    // Each first-hop fake is generated once and its subgraph is shared by the
    // adversarial, pixel, cycle and consistency terms below; the gradients of
    // the terms sum on the common tape nodes.
    const Tensor fake_y_g =
        with_x ? net.map(Mapping::G, batch.x.images) : Tensor();
    const Tensor fake_y_f =
        with_z ? net.map(Mapping::F, batch.z.images) : Tensor();
    const Tensor fake_x =
        with_x ? net.map(Mapping::Ghat, batch.y.images) : Tensor();
    const Tensor fake_z =
        with_z ? net.map(Mapping::Fhat, batch.y.images) : Tensor();

    // Adversarial terms, one per cross-domain mapping, judged by the target
    // domain's discriminator.
    Tensor gan;
    if (with_x) {
        const Tensor g_term = adversarial_g_loss(net.discriminate(Domain::Y, fake_y_g));
        const Tensor ghat_term =
            adversarial_g_loss(net.discriminate(Domain::X, fake_x));
        report.gan_per_mapping[0] = g_term.item_double();
        report.gan_per_mapping[2] = ghat_term.item_double();
        gan = g_term + ghat_term;
    }
    if (with_z) {
        const Tensor f_term = adversarial_g_loss(net.discriminate(Domain::Y, fake_y_f));
        const Tensor fhat_term =
            adversarial_g_loss(net.discriminate(Domain::Z, fake_z));
        report.gan_per_mapping[1] = f_term.item_double();
        report.gan_per_mapping[3] = fhat_term.item_double();
        gan = gan.defined() ? gan + f_term + fhat_term : f_term + fhat_term;
    }
    report.gan_total = gan.item_double();

    // Supervised pixel terms on the bird outputs.
    Tensor pix;
    if (with_z) pix = pixel_l1(fake_y_f, batch.y.images);
    if (with_x) {
        const Tensor g_pix = pixel_l1(fake_y_g, batch.y.images);
        pix = pix.defined() ? pix + g_pix : g_pix;
    }
    report.pix_l1 = pix.item_double();

    Tensor objective = gan + scale(pix, weights.lambda_pix);

    if (!options.no_cyc && weights.lambda1 != 0.0f) {
        Tensor cyc;
        if (with_x) {
            cyc = pixel_l1(net.map(Mapping::Ghat, fake_y_g), batch.x.images) +
                  pixel_l1(net.map(Mapping::G, fake_x), batch.y.images);
        }
        if (with_z) {
            const Tensor fz =
                pixel_l1(net.map(Mapping::Fhat, fake_y_f), batch.z.images) +
                pixel_l1(net.map(Mapping::F, fake_z), batch.y.images);
            cyc = cyc.defined() ? cyc + fz : fz;
        }
        cyc = scale(cyc, weights.lambda1);
        report.cyc_total = cyc.item_double();
        objective = objective + cyc;
    }
    if (!options.no_cfc && weights.lambda_cfc != 0.0f) {
        Tensor cfc;
        if (with_z) cfc = feature_distance(fake_y_f, batch.z.images, phi);
        if (with_x) {
            if (batch.x.ids != batch.z.ids) {
                throw contract_error("total_loss: x and z batches are not "
                                     "view-aligned (triplet ids differ)");
            }
            const Tensor g_path = feature_distance(fake_y_g, batch.z.images, phi);
            cfc = cfc.defined() ? g_path + cfc : g_path;
        }
        report.cfc_total = cfc.item_double();
        objective = objective + scale(cfc, weights.lambda_cfc);
    }
    if (weights.lambda_idt != 0.0f) {
        Tensor idt = pixel_l1(net.map(Mapping::Iy, batch.y.images), batch.y.images);
        if (with_z) {
            idt = idt + pixel_l1(net.map(Mapping::Iz, batch.z.images), batch.z.images);
        }
        if (with_x) {
            idt = idt + pixel_l1(net.map(Mapping::Ix, batch.x.images), batch.x.images);
        }
        report.idt_total = idt.item_double();
        objective = objective + scale(idt, weights.lambda_idt);
    }

    report.objective = objective;
    report.grand_total = objective.item_double();
    return report;
}

}  // namespace bridgegan
