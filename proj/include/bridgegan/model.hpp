#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bridgegan/nn.hpp"
#include "bridgegan/rng.hpp"
#include "bridgegan/tensor.hpp"

namespace bridgegan {

enum class Domain { X, Y, Z };  // homography, bird, frontal

// The seven admissible mappings. There is deliberately no Z<->X pair.
enum class Mapping { G, F, Ghat, Fhat, Ix, Iy, Iz };

const char* domain_name(Domain d);
const char* mapping_name(Mapping m);

struct MappingSpec {
    Domain source, target;  // encoder domain, generator domain
};
MappingSpec mapping_spec(Mapping m);

// Throws contract_error for Z<->X or identity requests outside the table.
Mapping mapping_between(Domain source, Domain target);

struct ModelConfig {
    int width = 80, height = 48;
    int base_channels = 32;     // encoder plan 3 -> 32 -> 64 -> 128 -> 256
    int latent_channels = 256;  // shared residual width
    float noise_sigma = 0.1f;
    float leaky_slope = 0.2f;
    bool no_X = false, no_Z = false;

    int latent_width() const { return width / 8; }
    int latent_height() const { return height / 8; }

    std::string arch_string() const;  // embedded in checkpoints
    static ModelConfig from_arch_string(const std::string& s);
};

namespace detail {

// Six blocks: three stride-2 convs, one stride-1 conv, two residual blocks.
struct Encoder {
    nn::Conv2dLayer c1, c2, c3, c4;
    nn::InstanceNorm2d n1, n2, n3, n4;
    nn::ResidualBlock r1, r2;
    float slope;

    Encoder(const ModelConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void register_params(nn::ParamRegistry& reg, const std::string& prefix);
};

// Six blocks mirroring the encoder: two residual blocks, one stride-1
// deconv, three stride-2 deconvs, tanh output.
struct Decoder {
    nn::ResidualBlock r1, r2;
    nn::Deconv2dLayer d1, d2, d3, d4;
    nn::InstanceNorm2d n1, n2, n3;
    float slope;

    Decoder(const ModelConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& latent, float noise_sigma, Rng& noise_rng,
                   bool training) const;
    void register_params(nn::ParamRegistry& reg, const std::string& prefix);
};

// PatchGAN: four stride-2 convs (no norm on the first), 1-channel conv,
// sigmoid. 80x48 input -> 5x3 patch score grid.
struct Discriminator {
    nn::Conv2dLayer c1, c2, c3, c4, head;
    nn::InstanceNorm2d n2, n3, n4;
    float slope;

    Discriminator(const ModelConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void register_params(nn::ParamRegistry& reg, const std::string& prefix);
};

struct SharedBlocks {
    nn::ResidualBlock r1, r2, r3;

    SharedBlocks(const ModelConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& x, float noise_sigma, Rng& noise_rng,
                   bool training) const;
    void register_params(nn::ParamRegistry& reg, const std::string& prefix);
};

}  // namespace detail

class BridgeGAN {
  public:
    BridgeGAN(const ModelConfig& config, std::uint64_t init_seed);

    const ModelConfig& config() const { return config_; }

    void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }
    Rng& noise_rng() { return noise_rng_; }

    bool has_domain(Domain d) const;

    // latent = shared(E_d(img)); img (N, 3, H, W) in [-1, 1].
    Tensor encode(Domain d, const Tensor& img);
    // image = G_d(latent); latent (N, C, H/8, W/8).
    Tensor generate(Domain d, const Tensor& latent);
    // generate(target, encode(source, img)) per the mapping table.
    Tensor map(Mapping m, const Tensor& img);
    // Patch score map in (0, 1).
    Tensor discriminate(Domain d, const Tensor& img);

    // All parameters, deterministic registration order.
    nn::ParamRegistry& registry() { return registry_; }
    // Encoder + shared + generator parameters (phase-2 set).
    std::vector<Param*> generator_params();
    // All discriminator parameters (phase-1 set).
    std::vector<Param*> discriminator_params();
    // Parameters whose registered name starts with prefix ("e_x.", ...).
    std::vector<Param*> params_with_prefix(const std::string& prefix);

  private:
    void check_image(const Tensor& img) const;

    ModelConfig config_;
    bool training_ = false;
    Rng noise_rng_;
    std::unique_ptr<detail::Encoder> e_x_, e_y_, e_z_;
    std::unique_ptr<detail::SharedBlocks> shared_;
    std::unique_ptr<detail::Decoder> g_x_, g_y_, g_z_;
    std::unique_ptr<detail::Discriminator> d_x_, d_y_, d_z_;
    nn::ParamRegistry registry_;
};

}  // namespace bridgegan
