#include "bridgegan/nn.hpp"

namespace bridgegan::nn {

void init_conv_weight(Param& w, Rng& rng) {
    auto data = w.value.mutable_data();
    for (auto& v : data) v = rng.normal(0.0f, 0.02f);
}

Conv2dLayer::Conv2dLayer(int in_ch, int out_ch, int kernel, int stride,
                         int padding, Rng& rng)
    : weight(Tensor::zeros({out_ch, in_ch, kernel, kernel})),
      bias(Tensor::zeros({1, out_ch, 1, 1})),
      stride(stride),
      padding(padding) {
    init_conv_weight(weight, rng);
}

void Conv2dLayer::register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".weight", &weight);
    reg.add(prefix + ".bias", &bias);
}

Deconv2dLayer::Deconv2dLayer(int in_ch, int out_ch, int kernel, int stride,
                             int padding, Rng& rng)
    : weight(Tensor::zeros({in_ch, out_ch, kernel, kernel})),
      bias(Tensor::zeros({1, out_ch, 1, 1})),
      stride(stride),
      padding(padding) {
    init_conv_weight(weight, rng);
}

void Deconv2dLayer::register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".weight", &weight);
    reg.add(prefix + ".bias", &bias);
}

InstanceNorm2d::InstanceNorm2d(int channels, float eps)
    : gamma(Tensor::full({1, channels, 1, 1}, 1.0f)),
      beta(Tensor::zeros({1, channels, 1, 1})),
      eps(eps) {}

void InstanceNorm2d::register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".gamma", &gamma);
    reg.add(prefix + ".beta", &beta);
}

ResidualBlock::ResidualBlock(int channels, float slope, float norm_eps, Rng& rng)
    : conv1(channels, channels, 3, 1, 1, rng),
      conv2(channels, channels, 3, 1, 1, rng),
      norm1(channels, norm_eps),
      norm2(channels, norm_eps),
      slope(slope) {}

Tensor ResidualBlock::forward(const Tensor& x) const {
    if (x.shape().c != conv1.weight.value.shape().c) {
        throw dimension_error("residual_block: channel mismatch");
    }
    Tensor f = norm1.forward(conv1.forward(x));
    f = leaky_relu(f, slope);
    f = norm2.forward(conv2.forward(f));
    return add(x, f);
}

void ResidualBlock::register_params(ParamRegistry& reg, const std::string& prefix) {
    conv1.register_params(reg, prefix + ".conv1");
    norm1.register_params(reg, prefix + ".norm1");
    conv2.register_params(reg, prefix + ".conv2");
    norm2.register_params(reg, prefix + ".norm2");
}

}  // namespace bridgegan::nn
