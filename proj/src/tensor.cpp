#include "bridgegan/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

extern "C" void openblas_set_num_threads(int);

namespace bridgegan {

namespace {

thread_local bool g_grad_enabled = true;

void check_finite(std::span<const float> v, const char* op) {
    // Exponent-bits test, branch-free so the scan vectorizes.
    std::uint32_t bad = 0;
    const float* x = v.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t b;
        std::memcpy(&b, &x[i], sizeof(b));
        bad |= static_cast<std::uint32_t>((b & 0x7f800000u) == 0x7f800000u);
    }
    if (bad) {
        throw numeric_error(std::string("non-finite value produced by ") + op);
    }
}

float* col_scratch(std::int64_t n) {
    thread_local std::vector<float> buf;
    if (static_cast<std::int64_t>(buf.size()) < n) {
        buf.resize(static_cast<std::size_t>(n));
    }
    return buf.data();
}

std::shared_ptr<TensorNode> make_leaf(Shape4 shape, std::vector<float> data,
                                      bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return node;
}

// Creates the output node of an op and wires the tape edges. When gradients
// are globally disabled or no input needs them, the result is a plain leaf.
Tensor make_op_node(const char* op_name, Shape4 shape, std::vector<float> data,
                    std::vector<std::shared_ptr<TensorNode>> parents,
                    std::function<void(TensorNode&)> backward_fn) {
    check_finite(data, op_name);
    bool track = g_grad_enabled &&
                 std::any_of(parents.begin(), parents.end(),
                             [](const auto& p) { return p->requires_grad; });
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->data = std::move(data);
    node->op_name = op_name;
    if (track) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
           const float* a, int lda, const float* b, int ldb, float beta,
           float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

// Horizontal range of output columns whose source pixel x*stride - pad + kj
// lands inside [0, width).
void valid_x_range(int width, int stride, int pad, int kj, int ow, int* x0,
                   int* x1) {
    int lo = 0;
    while (lo < ow && lo * stride - pad + kj < 0) ++lo;
    int hi = ow;
    while (hi > lo && (hi - 1) * stride - pad + kj >= width) --hi;
    *x0 = lo;
    *x1 = hi;
}

// col has (channels*k*k) rows and (oh*ow) columns, row-major.
void im2col(const float* im, int channels, int height, int width, int k,
            int stride, int pad, int oh, int ow, float* col) {
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                float* row = col + ((static_cast<std::int64_t>(c) * k + ki) * k + kj) * oh * ow;
                int x0, x1;
                valid_x_range(width, stride, pad, kj, ow, &x0, &x1);
                for (int y = 0; y < oh; ++y) {
                    const int sy = y * stride - pad + ki;
                    float* dst = row + static_cast<std::int64_t>(y) * ow;
                    if (sy < 0 || sy >= height) {
                        std::memset(dst, 0, sizeof(float) * ow);
                        continue;
                    }
                    const float* src =
                        im + (static_cast<std::int64_t>(c) * height + sy) * width +
                        kj - pad;
                    if (x0 > 0) std::memset(dst, 0, sizeof(float) * x0);
                    if (x1 < ow) {
                        std::memset(dst + x1, 0, sizeof(float) * (ow - x1));
                    }
                    if (stride == 1) {
                        std::memcpy(dst + x0, src + x0,
                                    sizeof(float) * (x1 - x0));
                    } else {
                        for (int x = x0; x < x1; ++x) dst[x] = src[x * stride];
                    }
                }
            }
        }
    }
}

// Adjoint scatter-add of im2col.
void col2im_add(const float* col, int channels, int height, int width, int k,
                int stride, int pad, int oh, int ow, float* im) {
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const float* row =
                    col + ((static_cast<std::int64_t>(c) * k + ki) * k + kj) * oh * ow;
                int x0, x1;
                valid_x_range(width, stride, pad, kj, ow, &x0, &x1);
                for (int y = 0; y < oh; ++y) {
                    const int sy = y * stride - pad + ki;
                    if (sy < 0 || sy >= height) continue;
                    float* dst = im + (static_cast<std::int64_t>(c) * height + sy) * width +
                                 kj - pad;
                    const float* src = row + static_cast<std::int64_t>(y) * ow;
                    if (stride == 1) {
                        for (int x = x0; x < x1; ++x) dst[x] += src[x];
                    } else {
                        for (int x = x0; x < x1; ++x) dst[x * stride] += src[x];
                    }
                }
            }
        }
    }
}

void require(bool cond, const char* msg) {
    if (!cond) throw dimension_error(msg);
}

double node_precise(const std::shared_ptr<TensorNode>& n) {
    return n->has_precise ? n->precise : static_cast<double>(n->data[0]);
}

Tensor with_precise(Tensor t, double value) {
    t.node()->has_precise = true;
    t.node()->precise = value;
    return t;
}

}  // namespace

std::string Shape4::str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
}

void TensorNode::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

void TensorNode::accumulate_grad_into(std::size_t parent_index,
                                      const std::vector<float>& contribution) {
    TensorNode& p = *parents[parent_index];
    p.ensure_grad();
    for (std::size_t i = 0; i < contribution.size(); ++i) {
        p.grad[i] += contribution[i];
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// --- Tensor handle ----------------------------------------------------------

Tensor Tensor::zeros(Shape4 shape, bool requires_grad) {
    return Tensor(make_leaf(shape, std::vector<float>(shape.numel(), 0.0f),
                            requires_grad));
}

Tensor Tensor::full(Shape4 shape, float value, bool requires_grad) {
    return Tensor(make_leaf(shape, std::vector<float>(shape.numel(), value),
                            requires_grad));
}

Tensor Tensor::from_data(Shape4 shape, std::vector<float> data,
                         bool requires_grad) {
    if (static_cast<std::int64_t>(data.size()) != shape.numel()) {
        throw dimension_error("from_data: data length does not match shape " +
                              shape.str());
    }
    return Tensor(make_leaf(shape, std::move(data), requires_grad));
}

Tensor Tensor::scalar(float value) {
    return from_data({1, 1, 1, 1}, {value});
}

Shape4 Tensor::shape() const {
    if (!node_) throw contract_error("shape() on undefined tensor");
    return node_->shape;
}

std::span<const float> Tensor::data() const {
    if (!node_) throw contract_error("data() on undefined tensor");
    return node_->data;
}

std::span<float> Tensor::mutable_data() {
    if (!node_) throw contract_error("mutable_data() on undefined tensor");
    if (node_->backward_fn) {
        throw contract_error("mutable_data() on a non-leaf tensor");
    }
    return node_->data;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const {
    return node_ && node_->grad.size() == node_->data.size();
}

std::span<const float> Tensor::grad() const {
    if (!has_grad()) throw contract_error("grad() on tensor without gradient");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_) throw contract_error("zero_grad() on undefined tensor");
    node_->grad.assign(node_->data.size(), 0.0f);
}

float Tensor::item() const {
    if (!node_ || node_->shape.numel() != 1) {
        throw contract_error("item() requires a scalar tensor");
    }
    return node_->data[0];
}

double Tensor::item_double() const {
    if (!node_ || node_->shape.numel() != 1) {
        throw contract_error("item_double() requires a scalar tensor");
    }
    return node_->has_precise ? node_->precise
                              : static_cast<double>(node_->data[0]);
}

Tensor Tensor::detach() const {
    if (!node_) return Tensor();
    return Tensor(make_leaf(node_->shape, node_->data, false));
}

Tensor Tensor::clone() const { return detach(); }

// --- ops --------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    const Shape4 xs = input.shape();
    const Shape4 ws = weight.shape();
    if (stride < 1) throw contract_error("conv2d: stride must be >= 1");
    if (padding < 0) throw contract_error("conv2d: padding must be >= 0");
    require(ws.h == ws.w, "conv2d: kernel must be square");
    require(xs.c == ws.c, "conv2d: input channels do not match weight");
    const int k = ws.h, oc = ws.n, ic = ws.c;
    if (bias.defined()) {
        require(bias.numel() == oc, "conv2d: bias size does not match out channels");
    }
    check_finite(input.data(), "conv2d input");
    const int oh = (xs.h + 2 * padding - k) / stride + 1;
    const int ow = (xs.w + 2 * padding - k) / stride + 1;
    require(xs.h + 2 * padding >= k && xs.w + 2 * padding >= k && oh > 0 && ow > 0,
            "conv2d: kernel larger than padded input");

    const Shape4 os{xs.n, oc, oh, ow};
    const std::int64_t kk = static_cast<std::int64_t>(ic) * k * k;
    const std::int64_t p = static_cast<std::int64_t>(oh) * ow;
    std::vector<float> out(os.numel());
    float* col = col_scratch(kk * p);
    const float* x = input.data().data();
    const float* w = weight.data().data();
    for (int n = 0; n < xs.n; ++n) {
        im2col(x + n * xs.c * xs.h * static_cast<std::int64_t>(xs.w), ic, xs.h,
               xs.w, k, stride, padding, oh, ow, col);
        float* o = out.data() + n * static_cast<std::int64_t>(oc) * p;
        sgemm(false, false, oc, static_cast<int>(p), static_cast<int>(kk), 1.0f,
              w, static_cast<int>(kk), col, static_cast<int>(p), 0.0f, o,
              static_cast<int>(p));
        if (bias.defined()) {
            const float* b = bias.data().data();
            for (int c = 0; c < oc; ++c) {
                float* oc_ptr = o + c * p;
                for (std::int64_t i = 0; i < p; ++i) oc_ptr[i] += b[c];
            }
        }
    }

    std::vector<std::shared_ptr<TensorNode>> parents{input.node(), weight.node()};
    if (bias.defined()) parents.push_back(bias.node());
    const bool has_bias = bias.defined();
    auto backward_fn = [xs, os, k, stride, padding, kk, p, has_bias](TensorNode& self) {
        const float* g = self.grad.data();
        TensorNode& xn = *self.parents[0];
        TensorNode& wn = *self.parents[1];
        const int oc = os.c, ic = xs.c;
        float* col = col_scratch(kk * p);
        if (wn.requires_grad) wn.ensure_grad();
        if (xn.requires_grad) xn.ensure_grad();
        for (int n = 0; n < xs.n; ++n) {
            const float* gn = g + n * static_cast<std::int64_t>(oc) * p;
            if (wn.requires_grad || xn.requires_grad) {
                if (wn.requires_grad) {
                    im2col(xn.data.data() +
                               n * static_cast<std::int64_t>(ic) * xs.h * xs.w,
                           ic, xs.h, xs.w, k, stride, padding, os.h, os.w,
                           col);
                    sgemm(false, true, oc, static_cast<int>(kk),
                          static_cast<int>(p), 1.0f, gn, static_cast<int>(p),
                          col, static_cast<int>(p), 1.0f, wn.grad.data(),
                          static_cast<int>(kk));
                }
                if (xn.requires_grad) {
                    sgemm(true, false, static_cast<int>(kk),
                          static_cast<int>(p), oc, 1.0f, wn.data.data(),
                          static_cast<int>(kk), gn, static_cast<int>(p), 0.0f,
                          col, static_cast<int>(p));
                    col2im_add(col, ic, xs.h, xs.w, k, stride, padding,
                               os.h, os.w,
                               xn.grad.data() +
                                   n * static_cast<std::int64_t>(ic) * xs.h * xs.w);
                }
            }
        }
        if (has_bias && self.parents[2]->requires_grad) {
            TensorNode& bn = *self.parents[2];
            bn.ensure_grad();
            for (int n = 0; n < xs.n; ++n) {
                for (int c = 0; c < oc; ++c) {
                    const float* gc = g + (n * static_cast<std::int64_t>(oc) + c) * p;
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < p; ++i) acc += gc[i];
                    bn.grad[c] += static_cast<float>(acc);
                }
            }
        }
    };
    return make_op_node("conv2d", os, std::move(out), std::move(parents),
                        std::move(backward_fn));
}

Tensor deconv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                int stride, int padding) {
    const Shape4 xs = input.shape();
    const Shape4 ws = weight.shape();
    if (stride < 1) throw contract_error("deconv2d: stride must be >= 1");
    if (padding < 0) throw contract_error("deconv2d: padding must be >= 0");
    require(ws.h == ws.w, "deconv2d: kernel must be square");
    require(xs.c == ws.n, "deconv2d: input channels do not match weight");
    const int k = ws.h, ic = ws.n, oc = ws.c;
    if (bias.defined()) {
        require(bias.numel() == oc, "deconv2d: bias size does not match out channels");
    }
    check_finite(input.data(), "deconv2d input");
    const int oh = (xs.h - 1) * stride - 2 * padding + k;
    const int ow = (xs.w - 1) * stride - 2 * padding + k;
    require(oh > 0 && ow > 0, "deconv2d: empty output");

    const Shape4 os{xs.n, oc, oh, ow};
    const std::int64_t kk = static_cast<std::int64_t>(oc) * k * k;
    const std::int64_t p = static_cast<std::int64_t>(xs.h) * xs.w;
    std::vector<float> out(os.numel(), 0.0f);
    float* col = col_scratch(kk * p);
    const float* x = input.data().data();
    const float* w = weight.data().data();  // (ic) x (oc*k*k)
    for (int n = 0; n < xs.n; ++n) {
        const float* xn = x + n * static_cast<std::int64_t>(ic) * p;
        sgemm(true, false, static_cast<int>(kk), static_cast<int>(p), ic, 1.0f,
              w, static_cast<int>(kk), xn, static_cast<int>(p), 0.0f,
              col, static_cast<int>(p));
        float* on = out.data() + n * static_cast<std::int64_t>(oc) * oh * ow;
        col2im_add(col, oc, oh, ow, k, stride, padding, xs.h, xs.w, on);
        if (bias.defined()) {
            const float* b = bias.data().data();
            for (int c = 0; c < oc; ++c) {
                float* oc_ptr = on + static_cast<std::int64_t>(c) * oh * ow;
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) {
                    oc_ptr[i] += b[c];
                }
            }
        }
    }

    std::vector<std::shared_ptr<TensorNode>> parents{input.node(), weight.node()};
    if (bias.defined()) parents.push_back(bias.node());
    const bool has_bias = bias.defined();
    auto backward_fn = [xs, os, k, stride, padding, kk, p, has_bias](TensorNode& self) {
        const float* g = self.grad.data();
        TensorNode& xn = *self.parents[0];
        TensorNode& wn = *self.parents[1];
        const int ic = xs.c, oc = os.c;
        float* col = col_scratch(kk * p);
        if (wn.requires_grad) wn.ensure_grad();
        if (xn.requires_grad) xn.ensure_grad();
        for (int n = 0; n < xs.n; ++n) {
            const float* gn = g + n * static_cast<std::int64_t>(oc) * os.h * os.w;
            if (xn.requires_grad || wn.requires_grad) {
                im2col(gn, oc, os.h, os.w, k, stride, padding, xs.h, xs.w,
                       col);
                if (xn.requires_grad) {
                    sgemm(false, false, ic, static_cast<int>(p),
                          static_cast<int>(kk), 1.0f, wn.data.data(),
                          static_cast<int>(kk), col, static_cast<int>(p),
                          1.0f, xn.grad.data() + n * static_cast<std::int64_t>(ic) * p,
                          static_cast<int>(p));
                }
                if (wn.requires_grad) {
                    sgemm(false, true, ic, static_cast<int>(kk),
                          static_cast<int>(p), 1.0f,
                          xn.data.data() + n * static_cast<std::int64_t>(ic) * p,
                          static_cast<int>(p), col, static_cast<int>(p),
                          1.0f, wn.grad.data(), static_cast<int>(kk));
                }
            }
        }
        if (has_bias && self.parents[2]->requires_grad) {
            TensorNode& bn = *self.parents[2];
            bn.ensure_grad();
            const std::int64_t sp = static_cast<std::int64_t>(os.h) * os.w;
            for (int n = 0; n < xs.n; ++n) {
                for (int c = 0; c < oc; ++c) {
                    const float* gc = g + (n * static_cast<std::int64_t>(oc) + c) * sp;
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < sp; ++i) acc += gc[i];
                    bn.grad[c] += static_cast<float>(acc);
                }
            }
        }
    };
    return make_op_node("deconv2d", os, std::move(out), std::move(parents),
                        std::move(backward_fn));
}

Tensor instance_norm(const Tensor& input, const Tensor& gamma,
                     const Tensor& beta, float eps) {
    const Shape4 xs = input.shape();
    if (eps <= 0.0f) throw contract_error("instance_norm: eps must be > 0");
    require(xs.h > 0 && xs.w > 0, "instance_norm: zero spatial extent");
    require(gamma.numel() == xs.c && beta.numel() == xs.c,
            "instance_norm: affine params must have one value per channel");
    const std::int64_t sp = static_cast<std::int64_t>(xs.h) * xs.w;
    const float* x = input.data().data();
    const float* gm = gamma.data().data();
    const float* bt = beta.data().data();

    std::vector<float> out(xs.numel());
    std::vector<float> mean(static_cast<std::size_t>(xs.n) * xs.c);
    std::vector<float> inv_std(static_cast<std::size_t>(xs.n) * xs.c);
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const std::int64_t base = (n * static_cast<std::int64_t>(xs.c) + c) * sp;
            double acc = 0.0;
            for (std::int64_t i = 0; i < sp; ++i) acc += x[base + i];
            const double mu = acc / static_cast<double>(sp);
            double var = 0.0;
            for (std::int64_t i = 0; i < sp; ++i) {
                const double d = x[base + i] - mu;
                var += d * d;
            }
            var /= static_cast<double>(sp);
            const double is = 1.0 / std::sqrt(var + eps);
            mean[n * xs.c + c] = static_cast<float>(mu);
            inv_std[n * xs.c + c] = static_cast<float>(is);
            const float a = gm[c] * static_cast<float>(is);
            const float b = bt[c] - a * static_cast<float>(mu);
            for (std::int64_t i = 0; i < sp; ++i) {
                out[base + i] = a * x[base + i] + b;
            }
        }
    }

    auto backward_fn = [xs, sp, mean, inv_std](TensorNode& self) {
        const float* g = self.grad.data();
        TensorNode& xn = *self.parents[0];
        TensorNode& gn = *self.parents[1];
        TensorNode& bn = *self.parents[2];
        if (xn.requires_grad) xn.ensure_grad();
        if (gn.requires_grad) gn.ensure_grad();
        if (bn.requires_grad) bn.ensure_grad();
        const float* x = xn.data.data();
        const float* gm = gn.data.data();
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < xs.c; ++c) {
                const std::int64_t base = (n * static_cast<std::int64_t>(xs.c) + c) * sp;
                const float mu = mean[n * xs.c + c];
                const float is = inv_std[n * xs.c + c];
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::int64_t i = 0; i < sp; ++i) {
                    const float xhat = (x[base + i] - mu) * is;
                    sum_g += g[base + i];
                    sum_gx += static_cast<double>(g[base + i]) * xhat;
                }
                if (bn.requires_grad) bn.grad[c] += static_cast<float>(sum_g);
                if (gn.requires_grad) gn.grad[c] += static_cast<float>(sum_gx);
                if (xn.requires_grad) {
                    const float mg = static_cast<float>(sum_g / static_cast<double>(sp));
                    const float mgx = static_cast<float>(sum_gx / static_cast<double>(sp));
                    const float a = gm[c] * is;
                    for (std::int64_t i = 0; i < sp; ++i) {
                        const float xhat = (x[base + i] - mu) * is;
                        xn.grad[base + i] += a * (g[base + i] - mg - xhat * mgx);
                    }
                }
            }
        }
    };
    return make_op_node("instance_norm", xs, std::move(out),
                        {input.node(), gamma.node(), beta.node()},
                        std::move(backward_fn));
}

namespace {

// Elementwise op helper: out[i] = f(x[i]); backward uses df(x, y, g).
template <typename F, typename DF>
Tensor elementwise(const char* name, const Tensor& a, F f, DF df) {
    const Shape4 s = a.shape();
    const auto x = a.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    auto backward_fn = [df](TensorNode& self) {
        TensorNode& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            p.grad[i] += df(p.data[i], self.data[i]) * self.grad[i];
        }
    };
    return make_op_node(name, s, std::move(out), {a.node()},
                        std::move(backward_fn));
}

}  // namespace

Tensor leaky_relu(const Tensor& input, float slope) {
    if (slope < 0.0f || slope > 1.0f) {
        throw contract_error("leaky_relu: slope must be in [0, 1]");
    }
    return elementwise(
        "leaky_relu", input,
        [slope](float x) { return x > 0.0f ? x : slope * x; },
        [slope](float x, float) { return x > 0.0f ? 1.0f : slope; });
}

Tensor tanh(const Tensor& input) {
    return elementwise(
        "tanh", input, [](float x) { return std::tanh(x); },
        [](float, float y) { return 1.0f - y * y; });
}

Tensor sigmoid(const Tensor& input) {
    return elementwise(
        "sigmoid", input, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
        [](float, float y) { return y * (1.0f - y); });
}

Tensor clamp(const Tensor& input, float lo, float hi) {
    return elementwise(
        "clamp", input,
        [lo, hi](float x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](float x, float) { return (x > lo && x < hi) ? 1.0f : 0.0f; });
}

Tensor log(const Tensor& input) {
    return elementwise(
        "log", input, [](float x) { return std::log(x); },
        [](float x, float) { return 1.0f / x; });
}

Tensor abs(const Tensor& input) {
    return elementwise(
        "abs", input, [](float x) { return std::fabs(x); },
        [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Tensor square(const Tensor& input) {
    return elementwise(
        "square", input, [](float x) { return x * x; },
        [](float x, float) { return 2.0f * x; });
}

Tensor gaussian_noise(const Tensor& input, float sigma, Rng& rng,
                      bool training) {
    if (sigma < 0.0f) throw contract_error("gaussian_noise: sigma must be >= 0");
    const Shape4 s = input.shape();
    const auto x = input.data();
    std::vector<float> out(x.begin(), x.end());
    if (training && sigma > 0.0f) {
        for (auto& v : out) v += rng.normal(0.0f, sigma);
    }
    auto backward_fn = [](TensorNode& self) {
        TensorNode& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            p.grad[i] += self.grad[i];
        }
    };
    return make_op_node("gaussian_noise", s, std::move(out), {input.node()},
                        std::move(backward_fn));
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw dimension_error("add: shape mismatch " + a.shape().str() + " vs " +
                              b.shape().str());
    }
    const auto xa = a.data();
    const auto xb = b.data();
    std::vector<float> out(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] + xb[i];
    auto backward_fn = [](TensorNode& self) {
        for (int pi = 0; pi < 2; ++pi) {
            TensorNode& p = *self.parents[pi];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                p.grad[i] += self.grad[i];
            }
        }
    };
    Tensor t = make_op_node("add", a.shape(), std::move(out),
                            {a.node(), b.node()}, std::move(backward_fn));
    if (t.numel() == 1) {
        return with_precise(std::move(t),
                            node_precise(a.node()) + node_precise(b.node()));
    }
    return t;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw dimension_error("sub: shape mismatch " + a.shape().str() + " vs " +
                              b.shape().str());
    }
    const auto xa = a.data();
    const auto xb = b.data();
    std::vector<float> out(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] - xb[i];
    auto backward_fn = [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                pa.grad[i] += self.grad[i];
            }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                pb.grad[i] -= self.grad[i];
            }
        }
    };
    Tensor t = make_op_node("sub", a.shape(), std::move(out),
                            {a.node(), b.node()}, std::move(backward_fn));
    if (t.numel() == 1) {
        return with_precise(std::move(t),
                            node_precise(a.node()) - node_precise(b.node()));
    }
    return t;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw dimension_error("mul: shape mismatch " + a.shape().str() + " vs " +
                              b.shape().str());
    }
    const auto xa = a.data();
    const auto xb = b.data();
    std::vector<float> out(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] * xb[i];
    auto backward_fn = [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                pa.grad[i] += self.grad[i] * pb.data[i];
            }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                pb.grad[i] += self.grad[i] * pa.data[i];
            }
        }
    };
    return make_op_node("mul", a.shape(), std::move(out), {a.node(), b.node()},
                        std::move(backward_fn));
}

Tensor scale(const Tensor& a, float s) {
    const auto x = a.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
    auto backward_fn = [s](TensorNode& self) {
        TensorNode& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            p.grad[i] += s * self.grad[i];
        }
    };
    Tensor t = make_op_node("scale", a.shape(), std::move(out), {a.node()},
                            std::move(backward_fn));
    if (t.numel() == 1) {
        return with_precise(std::move(t), s * node_precise(a.node()));
    }
    return t;
}

Tensor add_scalar(const Tensor& a, float s) {
    const auto x = a.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + s;
    auto backward_fn = [](TensorNode& self) {
        TensorNode& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            p.grad[i] += self.grad[i];
        }
    };
    Tensor t = make_op_node("add_scalar", a.shape(), std::move(out), {a.node()},
                            std::move(backward_fn));
    if (t.numel() == 1) {
        return with_precise(std::move(t), node_precise(a.node()) + s);
    }
    return t;
}

Tensor mean_all(const Tensor& a) {
    const auto x = a.data();
    double acc = 0.0;
    for (float v : x) acc += v;
    const float m = static_cast<float>(acc / static_cast<double>(x.size()));
    const float inv_n = 1.0f / static_cast<float>(x.size());
    auto backward_fn = [inv_n](TensorNode& self) {
        TensorNode& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const float g = self.grad[0] * inv_n;
        for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
    };
    return with_precise(make_op_node("mean_all", {1, 1, 1, 1}, {m}, {a.node()},
                                     std::move(backward_fn)),
                        acc / static_cast<double>(x.size()));
}

Tensor sum_all(const Tensor& a) {
    const auto x = a.data();
    double acc = 0.0;
    for (float v : x) acc += v;
    auto backward_fn = [](TensorNode& self) {
        TensorNode& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const float g = self.grad[0];
        for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
    };
    return with_precise(
        make_op_node("sum_all", {1, 1, 1, 1}, {static_cast<float>(acc)},
                     {a.node()}, std::move(backward_fn)),
        acc);
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
    return mean_all(abs(sub(a, b)));
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw contract_error("backward: loss must be a defined scalar tensor");
    }
    auto root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order DFS; children end up after their parents, so the
    // reversed order visits each node before anything it feeds gradient to.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* parent = node->parents[idx].get();
            ++idx;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn && node->grad.size() == node->data.size()) {
            node->backward_fn(*node);
        }
    }
}

Param::Param(Tensor v) : value(std::move(v)) {
    if (!value.defined()) throw contract_error("Param from undefined tensor");
    if (value.node()->backward_fn) {
        throw contract_error("Param value must be a leaf tensor");
    }
    value.node()->requires_grad = true;
    adam_m.assign(value.numel(), 0.0f);
    adam_v.assign(value.numel(), 0.0f);
}

void Param::set_requires_grad(bool rg) { value.node()->requires_grad = rg; }

void adam_step(const std::vector<Param*>& params, float lr, float beta1,
               float beta2, float eps) {
    if (lr < 0.0f) throw contract_error("adam_step: lr must be >= 0");
    for (Param* p : params) {
        if (!p->value.has_grad()) {
            throw contract_error("adam_step: param has no populated gradient");
        }
    }
    for (Param* p : params) {
        p->step_count += 1;
        const float inv_bc1 = static_cast<float>(
            1.0 / (1.0 - std::pow(static_cast<double>(beta1),
                                  static_cast<double>(p->step_count))));
        const float inv_bc2 = static_cast<float>(
            1.0 / (1.0 - std::pow(static_cast<double>(beta2),
                                  static_cast<double>(p->step_count))));
        auto data = p->value.node()->data.data();
        const auto& grad = p->value.node()->grad;
        float* m = p->adam_m.data();
        float* v = p->adam_v.data();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const float g = grad[i];
            m[i] = beta1 * m[i] + (1.0f - beta1) * g;
            v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
            data[i] -= lr * (m[i] * inv_bc1) /
                       (std::sqrt(v[i] * inv_bc2) + eps);
        }
        p->value.node()->grad = {};
    }
}

void set_compute_threads(int threads) {
    openblas_set_num_threads(threads < 1 ? 1 : threads);
}

}  // namespace bridgegan
