#include "bridgegan/model.hpp"

#include <sstream>

#include "bridgegan/errors.hpp"

namespace bridgegan {

const char* domain_name(Domain d) {
    switch (d) {
        case Domain::X: return "X";
        case Domain::Y: return "Y";
        case Domain::Z: return "Z";
    }
    throw contract_error("domain_name: bad domain");
}

const char* mapping_name(Mapping m) {
    switch (m) {
        case Mapping::G: return "G";
        case Mapping::F: return "F";
        case Mapping::Ghat: return "Ghat";
        case Mapping::Fhat: return "Fhat";
        case Mapping::Ix: return "Ix";
        case Mapping::Iy: return "Iy";
        case Mapping::Iz: return "Iz";
    }
    throw contract_error("mapping_name: bad mapping");
}

MappingSpec mapping_spec(Mapping m) {
    switch (m) {
        case Mapping::G: return {Domain::X, Domain::Y};
        case Mapping::F: return {Domain::Z, Domain::Y};
        case Mapping::Ghat: return {Domain::Y, Domain::X};
        case Mapping::Fhat: return {Domain::Y, Domain::Z};
        case Mapping::Ix: return {Domain::X, Domain::X};
        case Mapping::Iy: return {Domain::Y, Domain::Y};
        case Mapping::Iz: return {Domain::Z, Domain::Z};
    }
    throw contract_error("mapping_spec: bad mapping");
}

Mapping mapping_between(Domain source, Domain target) {
    for (Mapping m : {Mapping::G, Mapping::F, Mapping::Ghat, Mapping::Fhat,
                      Mapping::Ix, Mapping::Iy, Mapping::Iz}) {
        const MappingSpec s = mapping_spec(m);
        if (s.source == source && s.target == target) return m;
    }
    throw contract_error(std::string("mapping_between: no ") +
                         domain_name(source) + " -> " + domain_name(target) +
                         " mapping; the frontal and homography domains only "
                         "connect through the bird view");
}

std::string ModelConfig::arch_string() const {
    std::ostringstream os;
    os << "bridgegan-arch 1 w " << width << " h " << height << " base "
       << base_channels << " latent " << latent_channels << " sigma "
       << noise_sigma << " slope " << leaky_slope << " no_X " << (no_X ? 1 : 0)
       << " no_Z " << (no_Z ? 1 : 0);
    return os.str();
}

ModelConfig ModelConfig::from_arch_string(const std::string& s) {
    std::istringstream is(s);
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != "bridgegan-arch" || version != 1) {
        throw input_error("unrecognized architecture string: " + s);
    }
    ModelConfig cfg;
    std::string key;
    int no_x = 0, no_z = 0;
    while (is >> key) {
        if (key == "w") is >> cfg.width;
        else if (key == "h") is >> cfg.height;
        else if (key == "base") is >> cfg.base_channels;
        else if (key == "latent") is >> cfg.latent_channels;
        else if (key == "sigma") is >> cfg.noise_sigma;
        else if (key == "slope") is >> cfg.leaky_slope;
        else if (key == "no_X") is >> no_x;
        else if (key == "no_Z") is >> no_z;
        else throw input_error("unrecognized architecture key: " + key);
        if (!is) throw input_error("malformed architecture string: " + s);
    }
    cfg.no_X = no_x != 0;
    cfg.no_Z = no_z != 0;
    return cfg;
}

namespace detail {

Encoder::Encoder(const ModelConfig& cfg, Rng& rng)
    : c1(3, cfg.base_channels, 4, 2, 1, rng),
      c2(cfg.base_channels, cfg.base_channels * 2, 4, 2, 1, rng),
      c3(cfg.base_channels * 2, cfg.base_channels * 4, 4, 2, 1, rng),
      c4(cfg.base_channels * 4, cfg.latent_channels, 3, 1, 1, rng),
      n1(cfg.base_channels),
      n2(cfg.base_channels * 2),
      n3(cfg.base_channels * 4),
      n4(cfg.latent_channels),
      r1(cfg.latent_channels, cfg.leaky_slope, 1e-5f, rng),
      r2(cfg.latent_channels, cfg.leaky_slope, 1e-5f, rng),
      slope(cfg.leaky_slope) {}

Tensor Encoder::forward(const Tensor& x) const {
    Tensor t = leaky_relu(n1.forward(c1.forward(x)), slope);
    t = leaky_relu(n2.forward(c2.forward(t)), slope);
    t = leaky_relu(n3.forward(c3.forward(t)), slope);
    t = leaky_relu(n4.forward(c4.forward(t)), slope);
    t = r1.forward(t);
    return r2.forward(t);
}

void Encoder::register_params(nn::ParamRegistry& reg, const std::string& prefix) {
    c1.register_params(reg, prefix + "c1");
    n1.register_params(reg, prefix + "n1");
    c2.register_params(reg, prefix + "c2");
    n2.register_params(reg, prefix + "n2");
    c3.register_params(reg, prefix + "c3");
    n3.register_params(reg, prefix + "n3");
    c4.register_params(reg, prefix + "c4");
    n4.register_params(reg, prefix + "n4");
    r1.register_params(reg, prefix + "r1");
    r2.register_params(reg, prefix + "r2");
}

Decoder::Decoder(const ModelConfig& cfg, Rng& rng)
    : r1(cfg.latent_channels, cfg.leaky_slope, 1e-5f, rng),
      r2(cfg.latent_channels, cfg.leaky_slope, 1e-5f, rng),
      d1(cfg.latent_channels, cfg.base_channels * 4, 3, 1, 1, rng),
      d2(cfg.base_channels * 4, cfg.base_channels * 2, 4, 2, 1, rng),
      d3(cfg.base_channels * 2, cfg.base_channels, 4, 2, 1, rng),
      d4(cfg.base_channels, 3, 4, 2, 1, rng),
      n1(cfg.base_channels * 4),
      n2(cfg.base_channels * 2),
      n3(cfg.base_channels),
      slope(cfg.leaky_slope) {}

Tensor Decoder::forward(const Tensor& latent, float noise_sigma, Rng& noise_rng,
                        bool training) const {
    Tensor t = gaussian_noise(latent, noise_sigma, noise_rng, training);
    t = r1.forward(t);
    t = r2.forward(t);
    t = leaky_relu(n1.forward(d1.forward(t)), slope);
    t = leaky_relu(n2.forward(d2.forward(t)), slope);
    t = leaky_relu(n3.forward(d3.forward(t)), slope);
    return tanh(d4.forward(t));
}

void Decoder::register_params(nn::ParamRegistry& reg, const std::string& prefix) {
    r1.register_params(reg, prefix + "r1");
    r2.register_params(reg, prefix + "r2");
    d1.register_params(reg, prefix + "d1");
    n1.register_params(reg, prefix + "n1");
    d2.register_params(reg, prefix + "d2");
    n2.register_params(reg, prefix + "n2");
    d3.register_params(reg, prefix + "d3");
    n3.register_params(reg, prefix + "n3");
    d4.register_params(reg, prefix + "d4");
}

Discriminator::Discriminator(const ModelConfig& cfg, Rng& rng)
    : c1(3, cfg.base_channels, 4, 2, 1, rng),
      c2(cfg.base_channels, cfg.base_channels * 2, 4, 2, 1, rng),
      c3(cfg.base_channels * 2, cfg.base_channels * 4, 4, 2, 1, rng),
      c4(cfg.base_channels * 4, cfg.latent_channels, 4, 2, 1, rng),
      head(cfg.latent_channels, 1, 3, 1, 1, rng),
      n2(cfg.base_channels * 2),
      n3(cfg.base_channels * 4),
      n4(cfg.latent_channels),
      slope(cfg.leaky_slope) {}

Tensor Discriminator::forward(const Tensor& x) const {
    Tensor t = leaky_relu(c1.forward(x), slope);
    t = leaky_relu(n2.forward(c2.forward(t)), slope);
    t = leaky_relu(n3.forward(c3.forward(t)), slope);
    t = leaky_relu(n4.forward(c4.forward(t)), slope);
    return sigmoid(head.forward(t));
}

void Discriminator::register_params(nn::ParamRegistry& reg,
                                    const std::string& prefix) {
    c1.register_params(reg, prefix + "c1");
    c2.register_params(reg, prefix + "c2");
    n2.register_params(reg, prefix + "n2");
    c3.register_params(reg, prefix + "c3");
    n3.register_params(reg, prefix + "n3");
    c4.register_params(reg, prefix + "c4");
    n4.register_params(reg, prefix + "n4");
    head.register_params(reg, prefix + "head");
}

SharedBlocks::SharedBlocks(const ModelConfig& cfg, Rng& rng)
    : r1(cfg.latent_channels, cfg.leaky_slope, 1e-5f, rng),
      r2(cfg.latent_channels, cfg.leaky_slope, 1e-5f, rng),
      r3(cfg.latent_channels, cfg.leaky_slope, 1e-5f, rng) {}

Tensor SharedBlocks::forward(const Tensor& x, float noise_sigma, Rng& noise_rng,
                             bool training) const {
    Tensor t = r1.forward(gaussian_noise(x, noise_sigma, noise_rng, training));
    t = r2.forward(gaussian_noise(t, noise_sigma, noise_rng, training));
    return r3.forward(gaussian_noise(t, noise_sigma, noise_rng, training));
}

void SharedBlocks::register_params(nn::ParamRegistry& reg,
                                   const std::string& prefix) {
    r1.register_params(reg, prefix + "r1");
    r2.register_params(reg, prefix + "r2");
    r3.register_params(reg, prefix + "r3");
}

}  // namespace detail

BridgeGAN::BridgeGAN(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config), noise_rng_(mix_seed(init_seed, 0x4e015e)) {
    if (config_.width % 8 != 0 || config_.height % 8 != 0 ||
        config_.width < 8 || config_.height < 8) {
        throw contract_error("BridgeGAN: width and height must be positive "
                             "multiples of 8, got " +
                             std::to_string(config_.width) + "x" +
                             std::to_string(config_.height));
    }
    if (config_.no_X && config_.no_Z) {
        throw contract_error("BridgeGAN: cannot drop both the homography and "
                             "frontal domains");
    }

    Rng init(mix_seed(init_seed, 0x1417));
    // Construction order is fixed so a seed fully determines every weight.
    if (!config_.no_X) e_x_ = std::make_unique<detail::Encoder>(config_, init);
    e_y_ = std::make_unique<detail::Encoder>(config_, init);
    if (!config_.no_Z) e_z_ = std::make_unique<detail::Encoder>(config_, init);
    shared_ = std::make_unique<detail::SharedBlocks>(config_, init);
    if (!config_.no_X) g_x_ = std::make_unique<detail::Decoder>(config_, init);
    g_y_ = std::make_unique<detail::Decoder>(config_, init);
    if (!config_.no_Z) g_z_ = std::make_unique<detail::Decoder>(config_, init);
    if (!config_.no_X) d_x_ = std::make_unique<detail::Discriminator>(config_, init);
    d_y_ = std::make_unique<detail::Discriminator>(config_, init);
    if (!config_.no_Z) d_z_ = std::make_unique<detail::Discriminator>(config_, init);

    if (e_x_) e_x_->register_params(registry_, "e_x.");
    e_y_->register_params(registry_, "e_y.");
    if (e_z_) e_z_->register_params(registry_, "e_z.");
    shared_->register_params(registry_, "shared.");
    if (g_x_) g_x_->register_params(registry_, "g_x.");
    g_y_->register_params(registry_, "g_y.");
    if (g_z_) g_z_->register_params(registry_, "g_z.");
    if (d_x_) d_x_->register_params(registry_, "d_x.");
    d_y_->register_params(registry_, "d_y.");
    if (d_z_) d_z_->register_params(registry_, "d_z.");
}

bool BridgeGAN::has_domain(Domain d) const {
    switch (d) {
        case Domain::X: return !config_.no_X;
        case Domain::Y: return true;
        case Domain::Z: return !config_.no_Z;
    }
    return false;
}

void BridgeGAN::check_image(const Tensor& img) const {
    if (!img.defined()) throw contract_error("model: undefined input tensor");
    const Shape4 s = img.shape();
    if (s.c != 3 || s.h != config_.height || s.w != config_.width) {
        throw dimension_error("model: expected (N, 3, " +
                              std::to_string(config_.height) + ", " +
                              std::to_string(config_.width) + "), got " +
                              s.str());
    }
}

Tensor BridgeGAN::encode(Domain d, const Tensor& img) {
    check_image(img);
    if (!has_domain(d)) {
        throw contract_error(std::string("model: domain ") + domain_name(d) +
                             " is disabled in this configuration");
    }
    const detail::Encoder* enc =
        d == Domain::X ? e_x_.get() : d == Domain::Y ? e_y_.get() : e_z_.get();
    return shared_->forward(enc->forward(img), config_.noise_sigma, noise_rng_,
                            training_);
}

Tensor BridgeGAN::generate(Domain d, const Tensor& latent) {
    if (!latent.defined()) throw contract_error("model: undefined latent");
    if (!has_domain(d)) {
        throw contract_error(std::string("model: domain ") + domain_name(d) +
                             " is disabled in this configuration");
    }
    const Shape4 s = latent.shape();
    if (s.c != config_.latent_channels || s.h != config_.latent_height() ||
        s.w != config_.latent_width()) {
        throw dimension_error("model: expected latent (N, " +
                              std::to_string(config_.latent_channels) + ", " +
                              std::to_string(config_.latent_height()) + ", " +
                              std::to_string(config_.latent_width()) +
                              "), got " + s.str());
    }
    const detail::Decoder* dec =
        d == Domain::X ? g_x_.get() : d == Domain::Y ? g_y_.get() : g_z_.get();
    return dec->forward(latent, config_.noise_sigma, noise_rng_, training_);
}

Tensor BridgeGAN::map(Mapping m, const Tensor& img) {
    const MappingSpec spec = mapping_spec(m);
    return generate(spec.target, encode(spec.source, img));
}

Tensor BridgeGAN::discriminate(Domain d, const Tensor& img) {
    check_image(img);
    if (!has_domain(d)) {
        throw contract_error(std::string("model: domain ") + domain_name(d) +
                             " is disabled in this configuration");
    }
    const detail::Discriminator* disc =
        d == Domain::X ? d_x_.get() : d == Domain::Y ? d_y_.get() : d_z_.get();
    return disc->forward(img);
}

std::vector<Param*> BridgeGAN::generator_params() {
    std::vector<Param*> out;
    for (const auto& [name, p] : registry_.items()) {
        if (name.compare(0, 2, "d_") != 0) out.push_back(p);
    }
    return out;
}

std::vector<Param*> BridgeGAN::discriminator_params() {
    std::vector<Param*> out;
    for (const auto& [name, p] : registry_.items()) {
        if (name.compare(0, 2, "d_") == 0) out.push_back(p);
    }
    return out;
}

std::vector<Param*> BridgeGAN::params_with_prefix(const std::string& prefix) {
    std::vector<Param*> out;
    for (const auto& [name, p] : registry_.items()) {
        if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(p);
    }
    return out;
}

}  // namespace bridgegan
