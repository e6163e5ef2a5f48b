#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace bridgegan {

// Deterministic random source. All stochastic code takes an Rng& explicitly;
// same seed on one thread gives a bit-identical run. Normal deviates are
// produced by Box-Muller instead of std::normal_distribution so the byte
// stream does not depend on the standard library implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive on both ends.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    double normal();
    float normal(float mean, float stddev) {
        return mean + stddev * static_cast<float>(normal());
    }

    std::string serialize() const;
    void deserialize(const std::string& s);

  private:
    std::mt19937_64 gen_;
};

// Splitmix-style mixer for deriving independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace bridgegan
