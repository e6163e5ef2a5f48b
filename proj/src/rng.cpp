#include "bridgegan/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace bridgegan {

double Rng::normal() {
    // Box-Muller, one deviate per call. u1 pushed away from 0 so log is finite.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
}

void Rng::deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace bridgegan
