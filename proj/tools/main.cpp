// bridgegan: command-line front end for dataset generation, training,
// evaluation, inference, homography estimation and the gradient audit.
// Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bridgegan/checkpoint.hpp"
#include "bridgegan/datagen.hpp"
#include "bridgegan/errors.hpp"
#include "bridgegan/geometry.hpp"
#include "bridgegan/gradcheck.hpp"
#include "bridgegan/metrics.hpp"
#include "bridgegan/trainer.hpp"

namespace fs = std::filesystem;
using namespace bridgegan;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string version_string() {
    std::ostringstream os;
    os << "bridgegan " << kVersion << "\n"
       << "checkpoint format v" << kCheckpointVersion << "\n"
       << "compiler " <<
#if defined(__clang__)
        "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
        "gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#else
        "unknown";
#endif
    return os.str();
}

HomogSource parse_homog_source(const std::string& s) {
    if (s == "estimated") return HomogSource::estimated;
    if (s == "oracle") return HomogSource::oracle;
    throw input_error("unknown homography source: " + s +
                      " (expected estimated or oracle)");
}

const char* homog_source_name(HomogSource s) {
    return s == HomogSource::oracle ? "oracle" : "estimated";
}

void parse_resolution(const std::string& s, int& w, int& h) {
    const auto x = s.find('x');
    if (x == std::string::npos) {
        throw input_error("bad resolution (expected WxH): " + s);
    }
    try {
        w = std::stoi(s.substr(0, x));
        h = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        throw input_error("bad resolution (expected WxH): " + s);
    }
    if (w <= 0 || h <= 0) throw input_error("resolution must be positive: " + s);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << text;
    if (!out) throw io_error("write failed: " + path);
}

Manifest load_data_arg(const std::string& data) {
    const fs::path p(data);
    if (fs::is_directory(p)) return load_manifest((p / "manifest.txt").string());
    return load_manifest(data);
}

std::string homography_json(const Homography& h, int matches, int inliers,
                            double mean_reproj_error) {
    std::ostringstream os;
    os.precision(17);
    os << "{\n  \"h\": [";
    for (int i = 0; i < 9; ++i) os << (i ? ", " : "") << h.m[i];
    os << "],\n  \"matches\": " << matches << ",\n  \"inliers\": " << inliers
       << ",\n  \"mean_reproj_error\": " << mean_reproj_error << "\n}\n";
    return os.str();
}

// Reads the 9-element "h" array back out of a file written by
// homography_json (or any file whose first bracketed list is the matrix).
Homography load_homography_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto open = text.find('[');
    const auto close = text.find(']', open);
    if (open == std::string::npos || close == std::string::npos) {
        throw input_error("no matrix array found in " + path);
    }
    std::string body = text.substr(open + 1, close - open - 1);
    for (char& c : body) {
        if (c == ',') c = ' ';
    }
    std::istringstream nums(body);
    std::array<double, 9> m{};
    for (double& v : m) {
        if (!(nums >> v)) {
            throw input_error("expected 9 matrix entries in " + path);
        }
    }
    return Homography::from_array(m);
}

// ---- gen-data ------------------------------------------------------------

struct GenDataArgs {
    DatagenConfig cfg;
    std::string resolution = "80x48";
    std::string homog = "estimated";
    std::string out;
};

int cmd_gen_data(GenDataArgs& a) {
    parse_resolution(a.resolution, a.cfg.width, a.cfg.height);
    a.cfg.homog_source = parse_homog_source(a.homog);

    fs::create_directories(a.out);
    std::ostringstream echo;
    echo << "n=" << a.cfg.n << "\n"
         << "seed=" << a.cfg.seed << "\n"
         << "width=" << a.cfg.width << "\n"
         << "height=" << a.cfg.height << "\n"
         << "train_fraction=" << a.cfg.train_fraction << "\n"
         << "homog_source=" << homog_source_name(a.cfg.homog_source) << "\n"
         << "estimation_scale=" << a.cfg.estimation_scale << "\n";
    write_text((fs::path(a.out) / "datagen_config.txt").string(), echo.str());

    const Manifest manifest = generate_dataset(a.cfg, a.out);
    std::cout << "wrote " << manifest.entries.size() << " triplets under "
              << a.out << "\n";
    return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::string config_file, data, out, resume;
};

int cmd_train(TrainArgs& a, const CLI::App* sub, TrainConfig& cfg,
              std::string& homog) {
    // The config file forms the base; any flag given on the command line
    // wins. Flags were parsed into cfg directly, so re-apply them on top of
    // the file values.
    if (!a.config_file.empty()) {
        TrainConfig file_cfg = TrainConfig::from_file(a.config_file);
        const TrainConfig flag_cfg = cfg;
        cfg = file_cfg;
        const auto take = [&](const char* name, auto member) {
            if (sub->count(name) > 0) cfg.*member = flag_cfg.*member;
        };
        take("--lr", &TrainConfig::lr);
        take("--beta1", &TrainConfig::beta1);
        take("--beta2", &TrainConfig::beta2);
        take("--iterations", &TrainConfig::iterations);
        take("--batch-per-domain", &TrainConfig::batch_per_domain);
        take("--noise-sigma", &TrainConfig::noise_sigma);
        take("--seed", &TrainConfig::seed);
        take("--no-Z", &TrainConfig::no_Z);
        take("--no-X", &TrainConfig::no_X);
        take("--no-cyc", &TrainConfig::no_cyc);
        take("--no-cfc", &TrainConfig::no_cfc);
        take("--checkpoint-every", &TrainConfig::checkpoint_every);
        take("--width", &TrainConfig::width);
        take("--height", &TrainConfig::height);
        if (sub->count("--lambda1")) cfg.weights.lambda1 = flag_cfg.weights.lambda1;
        if (sub->count("--lambda-pix")) cfg.weights.lambda_pix = flag_cfg.weights.lambda_pix;
        if (sub->count("--lambda-idt")) cfg.weights.lambda_idt = flag_cfg.weights.lambda_idt;
        if (sub->count("--lambda-cfc")) cfg.weights.lambda_cfc = flag_cfg.weights.lambda_cfc;
        if (sub->count("--homog-source")) cfg.homog_source = flag_cfg.homog_source;
    }
    if (sub->count("--homog-source")) cfg.homog_source = parse_homog_source(homog);
    cfg.validate();

    const Manifest manifest = load_data_arg(a.data);
    const TrainResult result = train(cfg, manifest, a.out, a.resume);
    std::cout << "trained " << result.iterations_run << " iterations\n"
              << "checkpoint: " << result.final_checkpoint << "\n"
              << "loss log:   " << result.loss_log << "\n";
    return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint, data, out;
    std::string split = "test";
    std::string homog = "estimated";
    std::string baseline;
    std::string label = "ours";
    std::uint64_t phi_seed = 1;
};

int cmd_eval(EvalArgs& a) {
    if (!a.baseline.empty() && a.baseline != "homo") {
        throw input_error("unknown baseline: " + a.baseline);
    }
    if (a.checkpoint.empty() && a.baseline.empty()) a.baseline = "homo";

    const Manifest manifest = load_data_arg(a.data);
    std::vector<EvalReport> rows;
    EvalOptions opts;
    opts.split = a.split;
    opts.homog_source = parse_homog_source(a.homog);
    opts.phi_seed = a.phi_seed;
    if (a.baseline == "homo") {
        EvalOptions homo = opts;
        homo.label = "homo";
        homo.checkpoint_path.clear();
        rows.push_back(evaluate(manifest, homo));
    }
    if (!a.checkpoint.empty()) {
        opts.label = a.label;
        opts.checkpoint_path = a.checkpoint;
        rows.push_back(evaluate(manifest, opts));
    }

    const std::string table = format_eval_table(rows);
    const std::string records = format_eval_records(rows);
    fs::create_directories(a.out);
    write_text((fs::path(a.out) / "report.txt").string(), table);
    write_text((fs::path(a.out) / "report_records.txt").string(), records);
    std::ostringstream echo;
    echo << "checkpoint=" << a.checkpoint << "\n"
         << "split=" << a.split << "\n"
         << "homog_source=" << homog_source_name(opts.homog_source) << "\n"
         << "baseline=" << a.baseline << "\n"
         << "label=" << a.label << "\n"
         << "phi_seed=" << a.phi_seed << "\n";
    write_text((fs::path(a.out) / "eval_config.txt").string(), echo.str());
    std::cout << table;
    return 0;
}

// ---- infer ---------------------------------------------------------------

struct InferArgs {
    std::string checkpoint, image, out;
    std::string homog = "estimated";
    std::string homog_file;
    std::string data;
    int id = -1;
    std::uint64_t seed = 1;
};

int cmd_infer(InferArgs& a, const CLI::App* sub) {
    const CheckpointInfo info = peek_checkpoint(a.checkpoint);
    BridgeGAN net(info.arch, 1);
    load_checkpoint(a.checkpoint, net);

    const Image frontal = load_ppm(a.image);
    const HomogSource source = parse_homog_source(a.homog);
    const int w = info.arch.width, h = info.arch.height;

    Homography hom;
    if (!a.homog_file.empty()) {
        hom = load_homography_file(a.homog_file);
    } else if (!a.data.empty()) {
        if (a.id < 0) throw input_error("--data requires --id");
        const Manifest manifest = load_data_arg(a.data);
        const ManifestEntry* entry = nullptr;
        for (const ManifestEntry& e : manifest.entries) {
            if (e.id == a.id) entry = &e;
        }
        if (!entry) {
            throw input_error("id " + std::to_string(a.id) +
                              " not in the manifest");
        }
        hom = resolve_homography(*entry, source, w, h);
    } else {
        // No scene provenance: the dataset camera is fixed, so its ground
        // truth homography applies to any frontal image at this resolution.
        const Homography canonical = ground_truth_homography(
            CameraModel::standard(w, h), BirdExtent::standard(), w, h);
        hom = canonical;
        if (source == HomogSource::estimated) {
            try {
                Rng rng(a.seed);
                const Image dst = warp(frontal, canonical, w, h);
                hom = estimate_homography(frontal, dst, rng).h;
            } catch (const std::runtime_error&) {
                hom = canonical;  // estimator found too little structure
            }
        }
    }
    (void)sub;

    const Image bird = infer(net, frontal, hom);
    save_ppm(bird, a.out);
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---- estimate-homography ---------------------------------------------------

struct EstimateArgs {
    std::string src, dst, out;
    std::uint64_t seed = 1;
    int iterations = 1000;
    double threshold = 2.0;
    int top_k = 30;
};

int cmd_estimate_homography(EstimateArgs& a) {
    const Image src = load_ppm(a.src);
    const Image dst = load_ppm(a.dst);
    Rng rng(a.seed);
    const EstimationResult r = estimate_homography(
        src, dst, rng, OrbParams{}, a.iterations, a.threshold, a.top_k);
    write_text(a.out, homography_json(r.h, r.matches, r.inliers,
                                      r.mean_reproj_error));
    std::cout << "matches=" << r.matches << " inliers=" << r.inliers
              << " mean_reproj_error=" << r.mean_reproj_error << "\n"
              << "wrote " << a.out << "\n";
    return 0;
}

// ---- grad-check ------------------------------------------------------------

struct GradCheckArgs {
    std::string op;
    std::string corrupt;
};

int cmd_grad_check(GradCheckArgs& a) {
    if (!a.corrupt.empty()) set_gradcheck_corruption(a.corrupt);
    const auto results = run_gradcheck(a.op);
    if (results.empty()) throw input_error("no check named " + a.op);
    std::cout << format_gradcheck(results);
    return gradcheck_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bird view synthesis: data generation, training, "
                 "evaluation, homography tools"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    GenDataArgs gen;
    CLI::App* gen_cmd =
        app.add_subcommand("gen-data", "Render a synthetic paired-view dataset");
    gen_cmd->add_option("--n", gen.cfg.n, "Number of triplets");
    gen_cmd->add_option("--seed", gen.cfg.seed, "Master seed");
    gen_cmd->add_option("--resolution", gen.resolution, "Output WxH");
    gen_cmd->add_option("--train-fraction", gen.cfg.train_fraction,
                        "Train split fraction");
    gen_cmd->add_option("--homog-source", gen.homog, "estimated | oracle");
    gen_cmd->add_option("--estimation-scale", gen.cfg.estimation_scale,
                        "Feature matching supersampling factor");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();

    TrainArgs tr;
    TrainConfig tr_cfg;
    std::string tr_homog = "estimated";
    CLI::App* train_cmd = app.add_subcommand("train", "Train the model");
    train_cmd->add_option("--config", tr.config_file, "key=value config file");
    train_cmd->add_option("--data", tr.data, "Dataset directory or manifest")
        ->required();
    train_cmd->add_option("--out", tr.out, "Run output directory")->required();
    train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from");
    train_cmd->add_option("--lr", tr_cfg.lr, "Adam learning rate");
    train_cmd->add_option("--beta1", tr_cfg.beta1, "Adam beta1");
    train_cmd->add_option("--beta2", tr_cfg.beta2, "Adam beta2");
    train_cmd->add_option("--iterations", tr_cfg.iterations, "Iterations");
    train_cmd->add_option("--batch-per-domain", tr_cfg.batch_per_domain,
                          "Images per domain per step");
    train_cmd->add_option("--lambda1", tr_cfg.weights.lambda1,
                          "Dual cycle weight");
    train_cmd->add_option("--lambda-pix", tr_cfg.weights.lambda_pix,
                          "Pixel L1 weight");
    train_cmd->add_option("--lambda-idt", tr_cfg.weights.lambda_idt,
                          "Identity weight");
    train_cmd->add_option("--lambda-cfc", tr_cfg.weights.lambda_cfc,
                          "Feature consistency weight");
    train_cmd->add_option("--noise-sigma", tr_cfg.noise_sigma,
                          "Decoder noise sigma");
    train_cmd->add_option("--seed", tr_cfg.seed, "Training seed");
    train_cmd->add_flag("--no-Z", tr_cfg.no_Z, "Ablation: drop domain Z");
    train_cmd->add_flag("--no-X", tr_cfg.no_X, "Ablation: drop domain X");
    train_cmd->add_flag("--no-cyc", tr_cfg.no_cyc, "Ablation: drop cycle loss");
    train_cmd->add_flag("--no-cfc", tr_cfg.no_cfc,
                        "Ablation: drop feature consistency");
    train_cmd->add_option("--homog-source", tr_homog, "estimated | oracle");
    train_cmd->add_option("--checkpoint-every", tr_cfg.checkpoint_every,
                          "Checkpoint period");
    train_cmd->add_option("--width", tr_cfg.width, "Image width");
    train_cmd->add_option("--height", tr_cfg.height, "Image height");

    EvalArgs ev;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Score a checkpoint or baseline on a split");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint path");
    eval_cmd->add_option("--data", ev.data, "Dataset directory or manifest")
        ->required();
    eval_cmd->add_option("--out", ev.out, "Report output directory")->required();
    eval_cmd->add_option("--split", ev.split, "Manifest split");
    eval_cmd->add_option("--homog-source", ev.homog, "estimated | oracle");
    eval_cmd->add_option("--baseline", ev.baseline,
                         "Also score a baseline row (homo)");
    eval_cmd->add_option("--label", ev.label, "Row label for the checkpoint");
    eval_cmd->add_option("--phi-seed", ev.phi_seed, "Perceptual net seed");

    InferArgs in;
    CLI::App* infer_cmd =
        app.add_subcommand("infer", "Map one frontal image to the bird view");
    infer_cmd->add_option("--checkpoint", in.checkpoint, "Checkpoint path")
        ->required();
    infer_cmd->add_option("--image", in.image, "Frontal PPM image")->required();
    infer_cmd->add_option("--out", in.out, "Output PPM path")->required();
    infer_cmd->add_option("--homog-source", in.homog, "estimated | oracle");
    infer_cmd->add_option("--homog-file", in.homog_file,
                          "Matrix file from estimate-homography");
    infer_cmd->add_option("--data", in.data,
                          "Dataset whose manifest holds the scene");
    infer_cmd->add_option("--id", in.id, "Manifest entry id");
    infer_cmd->add_option("--seed", in.seed, "Estimation seed");

    EstimateArgs es;
    CLI::App* est_cmd = app.add_subcommand(
        "estimate-homography", "Estimate the projective map between two images");
    est_cmd->add_option("--src", es.src, "Source PPM image")->required();
    est_cmd->add_option("--dst", es.dst, "Destination PPM image")->required();
    est_cmd->add_option("--out", es.out, "Output matrix file")->required();
    est_cmd->add_option("--seed", es.seed, "RANSAC seed");
    est_cmd->add_option("--iterations", es.iterations, "RANSAC iterations");
    est_cmd->add_option("--threshold", es.threshold, "Inlier threshold, px");
    est_cmd->add_option("--top-k", es.top_k, "Matches kept for RANSAC");

    GradCheckArgs gc;
    CLI::App* gc_cmd = app.add_subcommand(
        "grad-check", "Finite-difference audit of ops and losses");
    gc_cmd->add_option("--op", gc.op, "Run only the named check");
    gc_cmd->add_option("--corrupt", gc.corrupt,
                       "Test fixture: corrupt the named check's gradient");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) return cmd_gen_data(gen);
        if (*train_cmd) return cmd_train(tr, train_cmd, tr_cfg, tr_homog);
        if (*eval_cmd) return cmd_eval(ev);
        if (*infer_cmd) return cmd_infer(in, infer_cmd);
        if (*est_cmd) return cmd_estimate_homography(es);
        if (*gc_cmd) return cmd_grad_check(gc);
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const contract_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
