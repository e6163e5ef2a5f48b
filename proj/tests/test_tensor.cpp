#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bridgegan/nn.hpp"
#include "bridgegan/tensor.hpp"
#include "test_helpers.hpp"

using namespace bridgegan;
using bgtest::fd_max_rel_err;
using bgtest::random_leaf;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("conv2d identity kernel") {
    Tensor x = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor w = Tensor::from_data({1, 1, 1, 1}, {1.0f});
    Tensor b = Tensor::zeros({1, 1, 1, 1});
    Tensor y = conv2d(x, w, b, 1, 0);
    REQUIRE(y.shape() == Shape4{1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d diagonal kernel sums corners") {
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor w = Tensor::from_data({1, 1, 2, 2}, {1, 0, 0, 1});
    Tensor y = conv2d(x, w, Tensor(), 1, 0);
    REQUIRE(y.shape() == Shape4{1, 1, 1, 1});
    CHECK(y.item() == doctest::Approx(5.0f));
}

TEST_CASE("conv2d shape arithmetic at 320x192") {
    Tensor x = Tensor::zeros({1, 3, 192, 320});
    Rng rng(3);
    Tensor w = random_leaf({64, 3, 4, 4}, rng, false);
    Tensor y = conv2d(x, w, Tensor(), 2, 1);
    CHECK(y.shape() == Shape4{1, 64, 96, 160});
}

TEST_CASE("conv2d errors") {
    Tensor x = Tensor::from_data({1, 2, 3, 3}, std::vector<float>(18, 0.0f));
    Tensor w = Tensor::zeros({1, 3, 3, 3});
    CHECK_THROWS_AS(conv2d(x, w, Tensor(), 1, 0), dimension_error);

    Tensor bad = Tensor::from_data({1, 1, 1, 1}, {std::nanf("")});
    Tensor w1 = Tensor::from_data({1, 1, 1, 1}, {1.0f});
    CHECK_THROWS_AS(conv2d(bad, w1, Tensor(), 1, 0), numeric_error);
}

TEST_CASE("deconv2d unit kernel identity") {
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor w = Tensor::from_data({1, 1, 1, 1}, {1.0f});
    Tensor y = deconv2d(x, w, Tensor(), 1, 0);
    REQUIRE(y.shape() == Shape4{1, 1, 2, 2});
    for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("deconv2d expands impulse") {
    Tensor x = Tensor::from_data({1, 1, 1, 1}, {2.0f});
    Tensor w = Tensor::from_data({1, 1, 2, 2}, {1, 1, 1, 1});
    Tensor y = deconv2d(x, w, Tensor(), 2, 0);
    REQUIRE(y.shape() == Shape4{1, 1, 2, 2});
    for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(2.0f));
}

TEST_CASE("deconv2d inverts conv2d shape at 320x192") {
    Tensor x = Tensor::zeros({1, 64, 96, 160});
    Rng rng(4);
    Tensor w = random_leaf({64, 3, 4, 4}, rng, false);
    Tensor y = deconv2d(x, w, Tensor(), 2, 1);
    CHECK(y.shape() == Shape4{1, 3, 192, 320});
}

TEST_CASE("instance_norm examples") {
    SUBCASE("constant channel maps to zeros") {
        Tensor x = Tensor::full({1, 1, 2, 2}, 3.7f);
        Tensor g = Tensor::full({1, 1, 1, 1}, 1.0f);
        Tensor b = Tensor::zeros({1, 1, 1, 1});
        Tensor y = instance_norm(x, g, b, 1e-5f);
        for (float v : y.data()) CHECK(v == doctest::Approx(0.0f).epsilon(1e-4));
    }
    SUBCASE("1..4 normalizes to known values") {
        Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
        Tensor g = Tensor::full({1, 1, 1, 1}, 1.0f);
        Tensor b = Tensor::zeros({1, 1, 1, 1});
        Tensor y = instance_norm(x, g, b, 1e-5f);
        CHECK(y.data()[0] == doctest::Approx(-1.3416f).epsilon(1e-3));
        CHECK(y.data()[1] == doctest::Approx(-0.4472f).epsilon(1e-3));
        CHECK(y.data()[2] == doctest::Approx(0.4472f).epsilon(1e-3));
        CHECK(y.data()[3] == doctest::Approx(1.3416f).epsilon(1e-3));
    }
    SUBCASE("beta shifts spatial mean") {
        Rng rng(7);
        Tensor x = random_leaf({2, 3, 4, 4}, rng, false);
        Tensor g = Tensor::full({1, 3, 1, 1}, 1.0f);
        Tensor b = Tensor::full({1, 3, 1, 1}, 5.0f);
        Tensor y = instance_norm(x, g, b, 1e-5f);
        for (int n = 0; n < 2; ++n) {
            for (int c = 0; c < 3; ++c) {
                double mean = 0;
                for (int i = 0; i < 16; ++i) mean += y.data()[(n * 3 + c) * 16 + i];
                CHECK(mean / 16 == doctest::Approx(5.0).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("leaky_relu examples") {
    Tensor x = Tensor::from_data({1, 1, 1, 3}, {-1, 0, 2});
    Tensor y = leaky_relu(x, 0.2f);
    CHECK(y.data()[0] == doctest::Approx(-0.2f));
    CHECK(y.data()[1] == doctest::Approx(0.0f));
    CHECK(y.data()[2] == doctest::Approx(2.0f));

    Tensor x2 = Tensor::from_data({1, 1, 1, 2}, {-3, 3});
    Tensor relu = leaky_relu(x2, 0.0f);
    CHECK(relu.data()[0] == doctest::Approx(0.0f));
    CHECK(relu.data()[1] == doctest::Approx(3.0f));
    Tensor ident = leaky_relu(x2, 1.0f);
    CHECK(ident.data()[0] == doctest::Approx(-3.0f));
    CHECK(ident.data()[1] == doctest::Approx(3.0f));
}

TEST_CASE("residual block") {
    Rng rng(11);
    nn::ResidualBlock block(3, 0.2f, 1e-5f, rng);
    Tensor x = random_leaf({1, 3, 4, 4}, rng, false);

    SUBCASE("zero residual branch is identity") {
        for (auto& v : block.conv1.weight.value.mutable_data()) v = 0.0f;
        for (auto& v : block.conv2.weight.value.mutable_data()) v = 0.0f;
        Tensor y = block.forward(x);
        for (std::size_t i = 0; i < y.data().size(); ++i) {
            CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-5));
        }
    }
    SUBCASE("output shape equals input shape") {
        CHECK(block.forward(x).shape() == x.shape());
    }
    SUBCASE("channel mismatch rejected") {
        Tensor bad = Tensor::zeros({1, 2, 4, 4});
        CHECK_THROWS_AS(block.forward(bad), dimension_error);
    }
    SUBCASE("identity gradient path for zero-weight branch") {
        for (auto& v : block.conv1.weight.value.mutable_data()) v = 0.0f;
        for (auto& v : block.conv2.weight.value.mutable_data()) v = 0.0f;
        Tensor leaf = random_leaf({1, 3, 4, 4}, rng, true);
        Rng readout_rng(5);
        Tensor r = random_leaf({1, 3, 4, 4}, readout_rng, false);
        auto loss_fn = [&] { return sum_all(mul(block.forward(leaf), r)); };
        CHECK(fd_max_rel_err(loss_fn, {leaf}) < 1e-3);
        // With a zero branch the analytic gradient is exactly the readout.
        leaf.zero_grad();
        backward(loss_fn());
        for (std::size_t i = 0; i < r.data().size(); ++i) {
            CHECK(leaf.grad()[i] == doctest::Approx(r.data()[i]).epsilon(1e-5));
        }
    }
}

TEST_CASE("gaussian_noise") {
    Rng rng(21);
    Tensor x = random_leaf({1, 1, 8, 8}, rng, false);
    SUBCASE("sigma zero is identity") {
        Tensor y = gaussian_noise(x, 0.0f, rng, true);
        for (std::size_t i = 0; i < x.data().size(); ++i) {
            CHECK(y.data()[i] == x.data()[i]);
        }
    }
    SUBCASE("eval mode is identity") {
        Tensor y = gaussian_noise(x, 0.5f, rng, false);
        for (std::size_t i = 0; i < x.data().size(); ++i) {
            CHECK(y.data()[i] == x.data()[i]);
        }
    }
    SUBCASE("noise statistics at one million elements") {
        Tensor big = Tensor::zeros({1, 1, 1000, 1000});
        Rng noise_rng(1234);
        Tensor y = gaussian_noise(big, 0.1f, noise_rng, true);
        double sum = 0, sq = 0;
        for (float v : y.data()) {
            sum += v;
            sq += static_cast<double>(v) * v;
        }
        const double n = 1e6;
        const double mean = sum / n;
        const double stddev = std::sqrt(sq / n - mean * mean);
        CHECK(std::fabs(mean) < 0.001);
        CHECK(stddev > 0.098);
        CHECK(stddev < 0.102);
    }
}

TEST_CASE("backward basics") {
    SUBCASE("sum of squares") {
        Tensor x = Tensor::from_data({1, 1, 1, 2}, {1, -2}, true);
        backward(sum_all(square(x)));
        CHECK(x.grad()[0] == doctest::Approx(2.0f));
        CHECK(x.grad()[1] == doctest::Approx(-4.0f));
    }
    SUBCASE("non-scalar loss rejected") {
        Tensor x = Tensor::from_data({1, 1, 1, 2}, {1, 2}, true);
        CHECK_THROWS_AS(backward(square(x)), contract_error);
    }
    SUBCASE("conv L1 loss matches finite differences") {
        Rng rng(31);
        Tensor x = random_leaf({1, 2, 4, 4}, rng);
        Tensor w = random_leaf({2, 2, 3, 3}, rng);
        Tensor t = random_leaf({1, 2, 4, 4}, rng, false, 2.0f, 3.0f);
        auto loss_fn = [&] { return l1_distance(conv2d(x, w, Tensor(), 1, 1), t); };
        CHECK(fd_max_rel_err(loss_fn, {x, w}) < 1e-3);
    }
    SUBCASE("disjoint subgraph gets zero grads") {
        Tensor a = Tensor::from_data({1, 1, 1, 2}, {1, 2}, true);
        Tensor b = Tensor::from_data({1, 1, 1, 2}, {3, 4}, true);
        b.zero_grad();
        backward(sum_all(square(a)));
        CHECK(a.grad()[0] == doctest::Approx(2.0f));
        for (float g : b.grad()) CHECK(g == 0.0f);
    }
}

TEST_CASE("adam") {
    SUBCASE("first step on unit gradient moves by about lr") {
        Param p(Tensor::from_data({1, 1, 1, 1}, {1.0f}));
        p.value.zero_grad();
        p.value.node()->grad[0] = 1.0f;
        adam_step({&p}, 0.1f, 0.5f, 0.999f, 1e-8f);
        CHECK(p.value.data()[0] == doctest::Approx(0.9f).epsilon(1e-5));
        CHECK(p.step_count == 1);
    }
    SUBCASE("zero gradient leaves param unchanged but counts the step") {
        Param p(Tensor::from_data({1, 1, 1, 1}, {2.5f}));
        p.value.zero_grad();
        adam_step({&p}, 0.1f);
        CHECK(p.value.data()[0] == doctest::Approx(2.5f));
        CHECK(p.step_count == 1);
    }
    SUBCASE("missing grads rejected") {
        Param p(Tensor::from_data({1, 1, 1, 1}, {1.0f}));
        CHECK_THROWS_AS(adam_step({&p}, 0.1f), contract_error);
    }
}

TEST_CASE("finite-difference oracle across all differentiable ops") {
    Rng rng(41);
    Rng readout(42);

    auto check_unary = [&](const char* name, auto op, float lo, float hi) {
        CAPTURE(name);
        Tensor x = random_leaf({1, 2, 3, 3}, rng, true, lo, hi);
        Tensor r = random_leaf({1, 2, 3, 3}, readout, false);
        auto loss_fn = [&] { return sum_all(mul(op(x), r)); };
        CHECK(fd_max_rel_err(loss_fn, {x}) < 1e-3);
    };

    check_unary("leaky_relu", [](const Tensor& t) { return leaky_relu(t, 0.2f); },
                0.1f, 1.0f);
    check_unary("tanh", [](const Tensor& t) { return tanh(t); }, -1.0f, 1.0f);
    check_unary("sigmoid", [](const Tensor& t) { return sigmoid(t); }, -2.0f, 2.0f);
    check_unary("log", [](const Tensor& t) { return log(t); }, 0.5f, 2.0f);
    check_unary("abs", [](const Tensor& t) { return abs(t); }, 0.2f, 1.0f);
    check_unary("square", [](const Tensor& t) { return square(t); }, -1.0f, 1.0f);
    check_unary("scale", [](const Tensor& t) { return scale(t, -1.7f); }, -1, 1);
    check_unary("add_scalar", [](const Tensor& t) { return add_scalar(t, 0.3f); },
                -1, 1);
    check_unary("clamp",
                [](const Tensor& t) { return clamp(t, -10.0f, 10.0f); }, -1, 1);
    check_unary("gaussian_noise", [](const Tensor& t) {
        Rng noise(99);
        return gaussian_noise(t, 0.05f, noise, true);
    }, -1, 1);

    SUBCASE("binary ops") {
        Tensor a = random_leaf({1, 2, 3, 3}, rng);
        Tensor b = random_leaf({1, 2, 3, 3}, rng);
        Tensor r = random_leaf({1, 2, 3, 3}, readout, false);
        CHECK(fd_max_rel_err([&] { return sum_all(mul(add(a, b), r)); }, {a, b}) < 1e-3);
        CHECK(fd_max_rel_err([&] { return sum_all(mul(sub(a, b), r)); }, {a, b}) < 1e-3);
        CHECK(fd_max_rel_err([&] { return sum_all(mul(mul(a, b), r)); }, {a, b}) < 1e-3);
        CHECK(fd_max_rel_err([&] { return mean_all(mul(a, b)); }, {a, b}) < 1e-3);
    }

    SUBCASE("conv2d strided") {
        Tensor x = random_leaf({2, 3, 4, 4}, rng);
        Tensor w = random_leaf({2, 3, 4, 4}, rng);
        Tensor b = random_leaf({1, 2, 1, 1}, rng);
        Tensor r = random_leaf({2, 2, 2, 2}, readout, false);
        auto loss_fn = [&] { return sum_all(mul(conv2d(x, w, b, 2, 1), r)); };
        CHECK(fd_max_rel_err(loss_fn, {x, w, b}) < 1e-3);
    }

    SUBCASE("deconv2d strided") {
        Tensor x = random_leaf({2, 3, 2, 2}, rng);
        Tensor w = random_leaf({3, 2, 4, 4}, rng);
        Tensor b = random_leaf({1, 2, 1, 1}, rng);
        Tensor r = random_leaf({2, 2, 4, 4}, readout, false);
        auto loss_fn = [&] { return sum_all(mul(deconv2d(x, w, b, 2, 1), r)); };
        CHECK(fd_max_rel_err(loss_fn, {x, w, b}) < 1e-3);
    }

    SUBCASE("instance_norm") {
        Tensor x = random_leaf({2, 3, 4, 4}, rng);
        Tensor g = random_leaf({1, 3, 1, 1}, rng, true, 0.5f, 1.5f);
        Tensor b = random_leaf({1, 3, 1, 1}, rng);
        Tensor r = random_leaf({2, 3, 4, 4}, readout, false);
        auto loss_fn = [&] { return sum_all(mul(instance_norm(x, g, b, 1e-5f), r)); };
        CHECK(fd_max_rel_err(loss_fn, {x, g, b}) < 2e-3);
    }
}

TEST_CASE("conv2d linearity") {
    Rng rng(51);
    Tensor x = random_leaf({1, 2, 4, 4}, rng, false);
    Tensor y = random_leaf({1, 2, 4, 4}, rng, false);
    Tensor w = random_leaf({3, 2, 3, 3}, rng, false);
    const float a = 1.3f, b = -0.7f;

    Tensor lhs = conv2d(add(scale(x, a), scale(y, b)), w, Tensor(), 1, 1);
    Tensor rhs = add(scale(conv2d(x, w, Tensor(), 1, 1), a),
                     scale(conv2d(y, w, Tensor(), 1, 1), b));
    for (std::size_t i = 0; i < lhs.data().size(); ++i) {
        CHECK(lhs.data()[i] == doctest::Approx(rhs.data()[i]).epsilon(1e-5));
    }
}

TEST_CASE("instance_norm statistics invariant") {
    Rng rng(61);
    Tensor x = random_leaf({2, 3, 8, 8}, rng, false, -3.0f, 3.0f);
    Tensor g = Tensor::full({1, 3, 1, 1}, 1.7f);
    Tensor b = Tensor::full({1, 3, 1, 1}, 0.4f);
    Tensor out = instance_norm(x, g, b, 1e-5f);
    const int sp = 64;
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 3; ++c) {
            double mean = 0, var = 0;
            const float* p = out.data().data() + (n * 3 + c) * sp;
            for (int i = 0; i < sp; ++i) mean += p[i];
            mean /= sp;
            for (int i = 0; i < sp; ++i) var += (p[i] - mean) * (p[i] - mean);
            var /= sp;
            CHECK(std::fabs(mean - 0.4) < 1e-4);
            CHECK(std::fabs(std::sqrt(var) - 1.7) < 1e-3);
        }
    }
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
    Rng rng(71);
    for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}}) {
        Tensor x = random_leaf({1, 3, 4, 4}, rng, false);
        Tensor w = random_leaf({2, 3, 4, 4}, rng, false);
        Tensor cx = conv2d(x, w, Tensor(), stride, pad);
        Tensor y = random_leaf(cx.shape(), rng, false);
        Tensor dy = deconv2d(y, w, Tensor(), stride, pad);
        REQUIRE(dy.shape() == x.shape());
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < cx.data().size(); ++i) {
            lhs += static_cast<double>(cx.data()[i]) * y.data()[i];
        }
        for (std::size_t i = 0; i < x.data().size(); ++i) {
            rhs += static_cast<double>(x.data()[i]) * dy.data()[i];
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
    }
}

TEST_SUITE_END();
