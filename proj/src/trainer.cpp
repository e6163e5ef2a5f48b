#include "bridgegan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bridgegan/checkpoint.hpp"
#include "bridgegan/errors.hpp"

namespace bridgegan {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw input_error("config: bad boolean for " + key + ": " + v);
}

void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) {
        throw numeric_error(std::string("train_step: non-finite value in ") +
                            term);
    }
}

std::string format_report(std::uint64_t iter, const LossReport& r) {
    std::ostringstream os;
    os << std::setprecision(9);
    os << "iter=" << iter << " gan_total=" << r.gan_total
       << " gan_G=" << r.gan_per_mapping[0] << " gan_F=" << r.gan_per_mapping[1]
       << " gan_Ghat=" << r.gan_per_mapping[2]
       << " gan_Fhat=" << r.gan_per_mapping[3] << " pix_l1=" << r.pix_l1
       << " cyc_total=" << r.cyc_total << " cfc_total=" << r.cfc_total
       << " idt_total=" << r.idt_total << " grand_total=" << r.grand_total;
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_per_domain < 1) {
        throw contract_error("config: batch_per_domain must be >= 1");
    }
    if (no_Z && no_X) {
        throw contract_error("config: at most one of no_Z, no_X may be set");
    }
    if (lr < 0 || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw contract_error("config: bad optimizer constants");
    }
    if (iterations < 0) throw contract_error("config: iterations must be >= 0");
    if (checkpoint_every < 1) {
        throw contract_error("config: checkpoint_every must be >= 1");
    }
    if (weights.lambda1 < 0 || weights.lambda_pix < 0 ||
        weights.lambda_idt < 0 || weights.lambda_cfc < 0) {
        throw contract_error("config: loss weights must be >= 0");
    }
    if (noise_sigma < 0) throw contract_error("config: noise_sigma must be >= 0");
    if (width < 8 || height < 8 || width % 8 != 0 || height % 8 != 0) {
        throw contract_error("config: width/height must be positive multiples of 8");
    }
}

ModelConfig TrainConfig::model_config() const {
    ModelConfig m;
    m.width = width;
    m.height = height;
    m.noise_sigma = noise_sigma;
    m.no_X = no_X;
    m.no_Z = no_Z;
    return m;
}

LossOptions TrainConfig::loss_options() const {
    LossOptions o;
    o.no_cyc = no_cyc;
    o.no_cfc = no_cfc;
    return o;
}

std::string TrainConfig::to_string() const {
    std::ostringstream os;
    os << std::setprecision(9);
    os << "lr=" << lr << "\n"
       << "beta1=" << beta1 << "\n"
       << "beta2=" << beta2 << "\n"
       << "iterations=" << iterations << "\n"
       << "batch_per_domain=" << batch_per_domain << "\n"
       << "lambda1=" << weights.lambda1 << "\n"
       << "lambda_pix=" << weights.lambda_pix << "\n"
       << "lambda_idt=" << weights.lambda_idt << "\n"
       << "lambda_cfc=" << weights.lambda_cfc << "\n"
       << "noise_sigma=" << noise_sigma << "\n"
       << "seed=" << seed << "\n"
       << "no_Z=" << (no_Z ? "true" : "false") << "\n"
       << "no_X=" << (no_X ? "true" : "false") << "\n"
       << "no_cyc=" << (no_cyc ? "true" : "false") << "\n"
       << "no_cfc=" << (no_cfc ? "true" : "false") << "\n"
       << "homog_source="
       << (homog_source == HomogSource::estimated ? "estimated" : "oracle")
       << "\n"
       << "checkpoint_every=" << checkpoint_every << "\n"
       << "width=" << width << "\n"
       << "height=" << height << "\n";
    return os.str();
}

TrainConfig TrainConfig::from_string(const std::string& text) {
    TrainConfig c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw input_error("config line " + std::to_string(lineno) +
                              ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "lr") c.lr = std::stof(value);
            else if (key == "beta1") c.beta1 = std::stof(value);
            else if (key == "beta2") c.beta2 = std::stof(value);
            else if (key == "iterations") c.iterations = std::stoi(value);
            else if (key == "batch_per_domain") c.batch_per_domain = std::stoi(value);
            else if (key == "lambda1") c.weights.lambda1 = std::stof(value);
            else if (key == "lambda_pix") c.weights.lambda_pix = std::stof(value);
            else if (key == "lambda_idt") c.weights.lambda_idt = std::stof(value);
            else if (key == "lambda_cfc") c.weights.lambda_cfc = std::stof(value);
            else if (key == "noise_sigma") c.noise_sigma = std::stof(value);
            else if (key == "seed") c.seed = std::stoull(value);
            else if (key == "no_Z") c.no_Z = parse_bool(value, key);
            else if (key == "no_X") c.no_X = parse_bool(value, key);
            else if (key == "no_cyc") c.no_cyc = parse_bool(value, key);
            else if (key == "no_cfc") c.no_cfc = parse_bool(value, key);
            else if (key == "homog_source") {
                if (value == "estimated") c.homog_source = HomogSource::estimated;
                else if (value == "oracle") c.homog_source = HomogSource::oracle;
                else throw input_error("config: bad homog_source: " + value);
            }
            else if (key == "checkpoint_every") c.checkpoint_every = std::stoi(value);
            else if (key == "width") c.width = std::stoi(value);
            else if (key == "height") c.height = std::stoi(value);
            else throw input_error("config: unknown key: " + key);
        } catch (const std::invalid_argument&) {
            throw input_error("config: bad value for " + key + ": " + value);
        } catch (const std::out_of_range&) {
            throw input_error("config: value out of range for " + key);
        }
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_string(buf.str());
}

std::uint64_t TrainConfig::hash() const {
    // FNV-1a over the canonical echo.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : to_string()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

DatasetTensors load_split_tensors(const Manifest& manifest,
                                  const std::string& split) {
    DatasetTensors out;
    for (const ManifestEntry* e : manifest.split_entries(split)) {
        const Image frontal = load_ppm(manifest.resolve(e->frontal_path));
        const Image homog = load_ppm(manifest.resolve(e->homog_path));
        const Image bird = load_ppm(manifest.resolve(e->bird_path));
        for (const Image* img : {&frontal, &homog, &bird}) {
            if (img->width != manifest.width || img->height != manifest.height) {
                throw input_error("dataset: image resolution disagrees with "
                                  "manifest header for triplet " +
                                  std::to_string(e->id));
            }
        }
        out.ids.push_back(e->id);
        out.x.push_back(image_to_tensor(homog));
        out.y.push_back(image_to_tensor(bird));
        out.z.push_back(image_to_tensor(frontal));
    }
    return out;
}

TripletBatch assemble_batch(const DatasetTensors& data,
                            const std::vector<int>& indices) {
    if (indices.empty()) throw contract_error("assemble_batch: empty batch");
    const Shape4 one = data.x.at(indices[0]).shape();
    const Shape4 shape{static_cast<int>(indices.size()), one.c, one.h, one.w};
    const std::size_t stride = static_cast<std::size_t>(one.numel());

    auto stack = [&](const std::vector<Tensor>& pool) {
        std::vector<float> data_out(shape.numel());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = pool.at(indices[i]).data();
            std::copy(src.begin(), src.end(), data_out.begin() + i * stride);
        }
        return Tensor::from_data(shape, std::move(data_out));
    };

    TripletBatch batch;
    for (int idx : indices) {
        batch.x.ids.push_back(data.ids.at(idx));
        batch.y.ids.push_back(data.ids.at(idx));
        batch.z.ids.push_back(data.ids.at(idx));
    }
    batch.x.images = stack(data.x);
    batch.y.images = stack(data.y);
    batch.z.images = stack(data.z);
    return batch;
}

std::vector<int> sample_batch_indices(int dataset_size, int batch_per_domain,
                                      Rng& rng) {
    if (batch_per_domain < 1 || dataset_size < batch_per_domain) {
        throw contract_error("sample_batch_indices: need at least "
                             "batch_per_domain triplets");
    }
    std::vector<int> out;
    out.reserve(batch_per_domain);
    while (static_cast<int>(out.size()) < batch_per_domain) {
        const int idx = rng.uniform_int(0, dataset_size - 1);
        bool fresh = true;
        for (int prev : out) fresh &= (prev != idx);
        if (fresh) out.push_back(idx);
    }
    return out;
}

LossReport train_step(BridgeGAN& net, const FeatureNet& phi,
                      const TripletBatch& batch, const TrainConfig& config) {
    net.set_training(true);
    const bool with_x = net.has_domain(Domain::X);
    const bool with_z = net.has_domain(Domain::Z);

    // Phase 1: discriminators against recomputed, detached fakes.
    Tensor fake_x, fake_z, fake_y_g, fake_y_f;
    {
        NoGradGuard ng;
        if (with_x) {
            fake_y_g = net.map(Mapping::G, batch.x.images);
            fake_x = net.map(Mapping::Ghat, batch.y.images);
        }
        if (with_z) {
            fake_y_f = net.map(Mapping::F, batch.z.images);
            fake_z = net.map(Mapping::Fhat, batch.y.images);
        }
    }
    for (Param* p : net.discriminator_params()) p->value.zero_grad();
    const Tensor real_y = net.discriminate(Domain::Y, batch.y.images);
    Tensor d_loss;
    if (with_x) {
        d_loss = adversarial_d_loss(real_y, net.discriminate(Domain::Y, fake_y_g)) +
                 adversarial_d_loss(net.discriminate(Domain::X, batch.x.images),
                                    net.discriminate(Domain::X, fake_x));
    }
    if (with_z) {
        const Tensor dz =
            adversarial_d_loss(real_y, net.discriminate(Domain::Y, fake_y_f)) +
            adversarial_d_loss(net.discriminate(Domain::Z, batch.z.images),
                               net.discriminate(Domain::Z, fake_z));
        d_loss = d_loss.defined() ? d_loss + dz : dz;
    }
    check_finite(d_loss.item_double(), "discriminator adversarial loss");
    backward(d_loss);
    adam_step(net.discriminator_params(), config.lr, config.beta1, config.beta2);

    // Phase 2: encoders and generators, discriminators frozen.
    for (Param* p : net.discriminator_params()) p->set_requires_grad(false);
    for (Param* p : net.generator_params()) p->value.zero_grad();
    LossReport report;
    try {
        report = total_loss(net, batch, config.weights, phi,
                            config.loss_options());
        check_finite(report.gan_total, "adversarial generator loss");
        check_finite(report.pix_l1, "pixel L1 loss");
        check_finite(report.cyc_total, "dual cycle consistency loss");
        check_finite(report.cfc_total, "cross-view feature consistency loss");
        check_finite(report.idt_total, "identity reconstruction loss");
        check_finite(report.grand_total, "total objective");
        backward(report.objective);
        adam_step(net.generator_params(), config.lr, config.beta1, config.beta2);
    } catch (...) {
        for (Param* p : net.discriminator_params()) p->set_requires_grad(true);
        throw;
    }
    for (Param* p : net.discriminator_params()) p->set_requires_grad(true);
    return report;
}

TrainResult train(const TrainConfig& config, const Manifest& manifest,
                  const std::string& out_dir, const std::string& resume_from) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io_error("train: cannot create output directory " + out_dir);
    const auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(out_dir) / name).string();
    };

    {
        std::ofstream cfg(out_path("config.txt"));
        if (!cfg) throw io_error("train: cannot write config echo");
        cfg << config.to_string();
    }

    BridgeGAN net(config.model_config(), config.seed);
    const FeatureNet phi(mix_seed(config.seed, 0x9B1));
    const DatasetTensors data = load_split_tensors(manifest, "train");
    if (data.ids.empty()) throw input_error("train: train split is empty");

    Rng data_rng(mix_seed(config.seed, 0xDA7A));
    std::uint64_t start_iter = 0;
    if (!resume_from.empty()) {
        const CheckpointInfo info = load_checkpoint(resume_from, net);
        start_iter = info.iteration;
        data_rng.deserialize(info.data_rng_state);
    }

    TrainResult result;
    result.loss_log = out_path("loss_log.txt");
    std::ofstream log(result.loss_log,
                      start_iter > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw io_error("train: cannot write loss log");

    const auto checkpoint_name = [&](std::uint64_t iter) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "checkpoint_%06llu.bgck",
                      static_cast<unsigned long long>(iter));
        return out_path(buf);
    };
    if (start_iter == 0) {
        save_checkpoint(checkpoint_name(0), net, 0, config.hash(),
                        data_rng.serialize());
    }

    net.set_training(true);
    for (std::uint64_t it = start_iter;
         it < static_cast<std::uint64_t>(config.iterations); ++it) {
        const auto indices = sample_batch_indices(
            static_cast<int>(data.ids.size()), config.batch_per_domain, data_rng);
        const TripletBatch batch = assemble_batch(data, indices);
        const LossReport report = train_step(net, phi, batch, config);
        log << format_report(it, report) << "\n";
        if ((it + 1) % static_cast<std::uint64_t>(config.checkpoint_every) == 0) {
            save_checkpoint(checkpoint_name(it + 1), net, it + 1, config.hash(),
                            data_rng.serialize());
        }
        result.iterations_run++;
    }
    log.flush();

    result.final_checkpoint = out_path("checkpoint_final.bgck");
    save_checkpoint(result.final_checkpoint, net,
                    static_cast<std::uint64_t>(config.iterations), config.hash(),
                    data_rng.serialize());
    return result;
}

Image infer(BridgeGAN& net, const Image& frontal, const Homography& h) {
    const ModelConfig& cfg = net.config();
    if (frontal.channels != 3) {
        throw input_error("infer: expected an RGB frontal image");
    }
    if (frontal.width != cfg.width || frontal.height != cfg.height) {
        throw input_error("infer: expected a " + std::to_string(cfg.width) +
                          "x" + std::to_string(cfg.height) + " image, got " +
                          std::to_string(frontal.width) + "x" +
                          std::to_string(frontal.height));
    }
    const bool prev = net.training();
    net.set_training(false);
    Tensor out;
    {
        NoGradGuard ng;
        if (net.has_domain(Domain::X)) {
            const Image x = warp(frontal, h, cfg.width, cfg.height);
            out = net.map(Mapping::G, image_to_tensor(x));
        } else {
            out = net.map(Mapping::F, image_to_tensor(frontal));
        }
    }
    net.set_training(prev);
    return tensor_to_image(out);
}

Homography resolve_homography(const ManifestEntry& entry, HomogSource source,
                              int width, int height) {
    if (source == HomogSource::oracle) return entry.gt_h;
    SceneSpec scene = SceneSpec::random(entry.seed);
    DatagenConfig config;
    config.width = width;
    config.height = height;
    const EstimatedH est = estimate_scene_homography(scene, config);
    return est.fallback ? entry.gt_h : est.h;
}

}  // namespace bridgegan
