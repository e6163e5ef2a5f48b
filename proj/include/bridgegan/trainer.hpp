#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgegan/datagen.hpp"
#include "bridgegan/image.hpp"
#include "bridgegan/losses.hpp"
#include "bridgegan/model.hpp"

namespace bridgegan {

struct TrainConfig {
    float lr = 1e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    int iterations = 2000;
    int batch_per_domain = 3;
    LossWeights weights;
    float noise_sigma = 0.1f;
    std::uint64_t seed = 1;
    bool no_Z = false, no_X = false, no_cyc = false, no_cfc = false;
    HomogSource homog_source = HomogSource::estimated;
    int checkpoint_every = 500;
    int width = 80, height = 48;

    void validate() const;  // contract_error on violated invariants
    ModelConfig model_config() const;
    LossOptions loss_options() const;

    // Flat key=value text, one pair per line, '#' comments. Unknown keys are
    // rejected. The echo round-trips through parse.
    static TrainConfig from_file(const std::string& path);
    static TrainConfig from_string(const std::string& text);
    std::string to_string() const;
    std::uint64_t hash() const;
};

// In-memory training corpus; one entry per triplet, aligned across domains.
struct DatasetTensors {
    std::vector<int> ids;
    std::vector<Tensor> x, y, z;  // each (1, 3, H, W)
};

// Loads and converts every triplet of one split. Throws io_error on missing
// files, input_error on resolution mismatch with the manifest header.
DatasetTensors load_split_tensors(const Manifest& manifest,
                                  const std::string& split);

// Stacks the chosen triplets into one aligned batch.
TripletBatch assemble_batch(const DatasetTensors& data,
                            const std::vector<int>& indices);
// batch_per_domain distinct triplet indices drawn from the rng.
std::vector<int> sample_batch_indices(int dataset_size, int batch_per_domain,
                                      Rng& rng);

// One alternating iteration: phase 1 updates the discriminators against
// recomputed detached fakes, phase 2 updates encoders and generators against
// the full objective with the discriminators frozen. Throws numeric_error
// naming the first non-finite loss term.
LossReport train_step(BridgeGAN& net, const FeatureNet& phi,
                      const TripletBatch& batch, const TrainConfig& config);

struct TrainResult {
    std::uint64_t iterations_run = 0;
    std::string final_checkpoint;  // path
    std::string loss_log;          // path
};

// Full training loop over the manifest's train split. Writes loss_log.txt,
// config.txt (verbatim echo), periodic checkpoints and checkpoint_final.bgck
// under out_dir. resume_from, when nonempty, restores a checkpoint and
// continues to config.iterations.
TrainResult train(const TrainConfig& config, const Manifest& manifest,
                  const std::string& out_dir,
                  const std::string& resume_from = "");

// Two-step inference: X = warp(frontal, h), then the X -> Y mapping. Under
// the no_X ablation the warp is skipped and the frontal image is translated
// directly. Runs in eval mode and restores the previous mode.
Image infer(BridgeGAN& net, const Image& frontal, const Homography& h);

// H for an entry per source flag: oracle takes the manifest's gt_h;
// estimated reruns the deterministic estimation pipeline from the entry's
// scene seed, falling back to gt_h when estimation fails.
Homography resolve_homography(const ManifestEntry& entry, HomogSource source,
                              int width, int height);

}  // namespace bridgegan
