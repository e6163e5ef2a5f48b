#include "bridgegan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "bridgegan/errors.hpp"

namespace bridgegan {

namespace {

constexpr char kMagic[4] = {'B', 'G', 'C', 'K'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw io_error("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const auto len = read_pod<std::uint32_t>(is);
    if (len > (1u << 24)) throw io_error("checkpoint: implausible string length");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw io_error("checkpoint: truncated file");
    return s;
}

void write_floats(std::ostream& os, std::span<const float> v) {
    write_pod<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::istream& is) {
    const auto len = read_pod<std::uint64_t>(is);
    if (len > (1ull << 32)) throw io_error("checkpoint: implausible array length");
    std::vector<float> v(len);
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(len * sizeof(float)));
    if (!is) throw io_error("checkpoint: truncated file");
    return v;
}

CheckpointInfo read_header(std::istream& is, std::string* noise_state) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw input_error("checkpoint: bad magic, not a checkpoint file");
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw input_error("checkpoint: format version " + std::to_string(version) +
                          " not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    CheckpointInfo info;
    info.arch = ModelConfig::from_arch_string(read_string(is));
    info.iteration = read_pod<std::uint64_t>(is);
    info.config_hash = read_pod<std::uint64_t>(is);
    info.data_rng_state = read_string(is);
    const std::string noise = read_string(is);
    if (noise_state) *noise_state = noise;
    return info;
}

}  // namespace

void save_checkpoint(const std::string& path, BridgeGAN& net,
                     std::uint64_t iteration, std::uint64_t config_hash,
                     const std::string& data_rng_state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_pod<std::uint32_t>(os, kCheckpointVersion);
    write_string(os, net.config().arch_string());
    write_pod<std::uint64_t>(os, iteration);
    write_pod<std::uint64_t>(os, config_hash);
    write_string(os, data_rng_state);
    write_string(os, net.noise_rng().serialize());

    const auto& items = net.registry().items();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(items.size()));
    for (const auto& [name, p] : items) {
        write_string(os, name);
        const Shape4 s = p->value.shape();
        write_pod<std::int32_t>(os, s.n);
        write_pod<std::int32_t>(os, s.c);
        write_pod<std::int32_t>(os, s.h);
        write_pod<std::int32_t>(os, s.w);
        write_pod<std::int64_t>(os, p->step_count);
        write_floats(os, p->value.data());
        write_floats(os, p->adam_m);
        write_floats(os, p->adam_v);
    }
    if (!os) throw io_error("checkpoint: write failed: " + path);
}

CheckpointInfo load_checkpoint(const std::string& path, BridgeGAN& net) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("checkpoint: cannot open: " + path);
    std::string noise_state;
    const CheckpointInfo info = read_header(is, &noise_state);
    if (info.arch.arch_string() != net.config().arch_string()) {
        throw input_error("checkpoint: architecture mismatch: file has \"" +
                          info.arch.arch_string() + "\", model is \"" +
                          net.config().arch_string() + "\"");
    }

    const auto& items = net.registry().items();
    const auto count = read_pod<std::uint32_t>(is);
    if (count != items.size()) {
        throw input_error("checkpoint: parameter count mismatch");
    }
    for (const auto& [name, p] : items) {
        const std::string file_name = read_string(is);
        if (file_name != name) {
            throw input_error("checkpoint: parameter order mismatch at " + name);
        }
        Shape4 s;
        s.n = read_pod<std::int32_t>(is);
        s.c = read_pod<std::int32_t>(is);
        s.h = read_pod<std::int32_t>(is);
        s.w = read_pod<std::int32_t>(is);
        if (s != p->value.shape()) {
            throw input_error("checkpoint: shape mismatch for " + name);
        }
        p->step_count = read_pod<std::int64_t>(is);
        const std::vector<float> values = read_floats(is);
        if (static_cast<std::int64_t>(values.size()) != p->value.numel()) {
            throw io_error("checkpoint: value length mismatch for " + name);
        }
        auto dst = p->value.mutable_data();
        std::copy(values.begin(), values.end(), dst.begin());
        p->adam_m = read_floats(is);
        p->adam_v = read_floats(is);
    }
    net.noise_rng().deserialize(noise_state);
    return info;
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("checkpoint: cannot open: " + path);
    return read_header(is, nullptr);
}

}  // namespace bridgegan
