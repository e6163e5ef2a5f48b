#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bridgegan/errors.hpp"
#include "bridgegan/rng.hpp"

namespace bridgegan {

struct Shape4 {
    int n = 1, c = 1, h = 1, w = 1;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

struct TensorNode;

// Dense (batch, channel, height, width) float tensor. A Tensor is a cheap
// handle onto a node in the dynamically recorded computation graph; the graph
// itself is the tape that backward() replays in reverse topological order.
// Node payloads are immutable after the forward op that created them, except
// for leaf parameters which the optimizer updates between graph builds.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape4 shape, bool requires_grad = false);
    static Tensor full(Shape4 shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape4 shape, std::vector<float> data,
                            bool requires_grad = false);
    static Tensor scalar(float value);

    bool defined() const { return node_ != nullptr; }
    Shape4 shape() const;
    std::int64_t numel() const { return shape().numel(); }

    std::span<const float> data() const;
    // Leaf tensors only; mutating a non-leaf would invalidate the tape.
    std::span<float> mutable_data();

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const float> grad() const;
    // Allocates (or re-zeroes) this leaf's gradient buffer.
    void zero_grad();

    // Scalar tensors only.
    float item() const;
    // Scalar value at full reduction precision when available (reductions
    // accumulate in double; the float payload is the rounded view).
    double item_double() const;

    Tensor detach() const;
    Tensor clone() const;

    std::shared_ptr<TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
    Shape4 shape;
    std::vector<float> data;
    std::vector<float> grad;  // allocated lazily during backward / zero_grad
    bool requires_grad = false;
    bool has_precise = false;  // double-precision shadow for scalar reductions
    double precise = 0.0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;
    const char* op_name = "leaf";

    void ensure_grad();
    void accumulate_grad_into(std::size_t parent_index,
                              const std::vector<float>& contribution);
};

// While a guard is alive, ops record no graph edges; outputs are plain leaves.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

bool grad_enabled();

// --- forward ops ------------------------------------------------------------

// weight (out_ch, in_ch, k, k); bias one value per output channel (or empty).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// Transposed convolution; weight (in_ch, out_ch, k, k).
Tensor deconv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                int stride, int padding);

// Per-(sample, channel) spatial normalization with population variance,
// followed by a per-channel affine.
Tensor instance_norm(const Tensor& input, const Tensor& gamma,
                     const Tensor& beta, float eps = 1e-5f);

Tensor leaky_relu(const Tensor& input, float slope = 0.2f);
Tensor tanh(const Tensor& input);
Tensor sigmoid(const Tensor& input);

// Adds N(0, sigma^2) noise in training mode; identity otherwise.
Tensor gaussian_noise(const Tensor& input, float sigma, Rng& rng,
                      bool training);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);
Tensor clamp(const Tensor& a, float lo, float hi);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(float s, const Tensor& a) { return scale(a, s); }

// Mean absolute difference.
Tensor l1_distance(const Tensor& a, const Tensor& b);

// Reverse-mode sweep from a scalar loss. Every node on the tape is visited
// exactly once in reverse topological order; leaf gradients accumulate.
void backward(const Tensor& loss);

// --- optimizer --------------------------------------------------------------

struct Param {
    Tensor value;  // leaf, requires_grad = true
    std::vector<float> adam_m, adam_v;
    std::int64_t step_count = 0;

    Param() = default;
    explicit Param(Tensor v);
    void set_requires_grad(bool rg);
};

// Standard Adam with bias correction; clears gradients afterwards.
// Throws contract_error if any param has no populated gradient buffer.
void adam_step(const std::vector<Param*>& params, float lr, float beta1 = 0.5f,
               float beta2 = 0.999f, float eps = 1e-8f);

// GEMM thread count for the conv backends (1 = fully deterministic mode).
void set_compute_threads(int threads);

}  // namespace bridgegan
