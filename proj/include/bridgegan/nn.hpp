#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bridgegan/tensor.hpp"

namespace bridgegan::nn {

// Flat name -> Param* view over a network, used by the optimizer and the
// checkpoint writer. Registration order is deterministic.
class ParamRegistry {
  public:
    void add(std::string name, Param* p) { items_.emplace_back(std::move(name), p); }

    const std::vector<std::pair<std::string, Param*>>& items() const {
        return items_;
    }
    std::vector<Param*> params() const {
        std::vector<Param*> out;
        out.reserve(items_.size());
        for (const auto& [name, p] : items_) out.push_back(p);
        return out;
    }

  private:
    std::vector<std::pair<std::string, Param*>> items_;
};

// Seeded Gaussian init, std 0.02, biases zero.
void init_conv_weight(Param& w, Rng& rng);

struct Conv2dLayer {
    Param weight, bias;
    int stride = 1, padding = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int in_ch, int out_ch, int kernel, int stride, int padding,
                Rng& rng);
    Tensor forward(const Tensor& x) const {
        return conv2d(x, weight.value, bias.value, stride, padding);
    }
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

struct Deconv2dLayer {
    Param weight, bias;
    int stride = 1, padding = 0;

    Deconv2dLayer() = default;
    Deconv2dLayer(int in_ch, int out_ch, int kernel, int stride, int padding,
                  Rng& rng);
    Tensor forward(const Tensor& x) const {
        return deconv2d(x, weight.value, bias.value, stride, padding);
    }
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

struct InstanceNorm2d {
    Param gamma, beta;
    float eps = 1e-5f;

    InstanceNorm2d() = default;
    explicit InstanceNorm2d(int channels, float eps = 1e-5f);
    Tensor forward(const Tensor& x) const {
        return instance_norm(x, gamma.value, beta.value, eps);
    }
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

// x + F(x) with F = conv3x3 -> norm -> leaky_relu -> conv3x3 -> norm.
// Input and output channel counts are equal by construction.
struct ResidualBlock {
    Conv2dLayer conv1, conv2;
    InstanceNorm2d norm1, norm2;
    float slope = 0.2f;

    ResidualBlock() = default;
    ResidualBlock(int channels, float slope, float norm_eps, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

}  // namespace bridgegan::nn
