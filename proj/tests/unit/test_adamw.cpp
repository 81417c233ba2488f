#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "narsal/adamw.hpp"

using namespace narsal;

namespace {

std::map<std::string, Tensor> single_param(double w) {
    std::map<std::string, Tensor> p;
    p.emplace("w", Tensor::scalar(w));
    return p;
}

} // namespace

TEST_CASE("one step on f(w)=w^2 from w=1 strictly decreases w") {
    AdamW opt({.lr = 0.1, .weight_decay = 0.0});
    auto params = single_param(1.0);
    std::map<std::string, Tensor> grads;
    grads.emplace("w", Tensor::scalar(2.0)); // d/dw w^2 at 1
    opt.step(params, grads);
    CHECK(params.at("w").item() < 1.0);
    CHECK(opt.step_count() == 1);
}

TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
    AdamW opt({.lr = 0.1, .weight_decay = 0.0});
    auto params = single_param(0.7);
    std::map<std::string, Tensor> grads;
    grads.emplace("w", Tensor::scalar(0.0));
    opt.step(params, grads);
    CHECK(params.at("w").item() == 0.7);
}

TEST_CASE("weight decay is decoupled from the gradient path") {
    AdamW opt({.lr = 0.1, .weight_decay = 0.5});
    auto params = single_param(1.0);
    std::map<std::string, Tensor> grads;
    grads.emplace("w", Tensor::scalar(0.0));
    opt.step(params, grads);
    // With zero gradient the update is exactly -lr * wd * w.
    CHECK(params.at("w").item() == doctest::Approx(1.0 - 0.1 * 0.5 * 1.0).epsilon(1e-12));
}

TEST_CASE("200 steps on a 2-D quadratic reach the closed-form optimum") {
    // f(w) = 0.5*(w0 - 0.3)^2 + 5*(w1 + 0.2)^2, optimum (0.3, -0.2).
    const double target0 = 0.3, target1 = -0.2;
    AdamW opt({.lr = 0.05});
    std::map<std::string, Tensor> params;
    params.emplace("w", Tensor({2}, std::vector<double>{0.0, 0.0}));
    for (int t = 0; t < 200; ++t) {
        const double w0 = params.at("w").data[0];
        const double w1 = params.at("w").data[1];
        std::map<std::string, Tensor> grads;
        grads.emplace("w", Tensor({2}, std::vector<double>{w0 - target0, 10.0 * (w1 - target1)}));
        opt.step(params, grads);
    }
    const double d0 = params.at("w").data[0] - target0;
    const double d1 = params.at("w").data[1] - target1;
    CHECK(std::sqrt(d0 * d0 + d1 * d1) < 1e-3);
}

TEST_CASE("moment tensors shape-match parameters and step count increments") {
    AdamW opt({.lr = 0.01});
    std::map<std::string, Tensor> params;
    params.emplace("m", Tensor({2, 3}, 0.5));
    std::map<std::string, Tensor> grads;
    grads.emplace("m", Tensor({2, 3}, 0.1));
    opt.step(params, grads);
    opt.step(params, grads);
    CHECK(opt.step_count() == 2);
    CHECK(opt.first_moments().at("m").shape == params.at("m").shape);
    CHECK(opt.second_moments().at("m").shape == params.at("m").shape);
}

TEST_CASE("shape mismatch and missing gradients are rejected") {
    AdamW opt({.lr = 0.01});
    std::map<std::string, Tensor> params;
    params.emplace("m", Tensor({2, 3}, 0.5));
    std::map<std::string, Tensor> bad;
    bad.emplace("m", Tensor({3, 2}, 0.1));
    CHECK_THROWS_AS(opt.step(params, bad), std::invalid_argument);
    std::map<std::string, Tensor> empty;
    CHECK_THROWS_AS(opt.step(params, empty), std::invalid_argument);
}

TEST_CASE("invalid hyperparameters are rejected") {
    CHECK_THROWS_AS(AdamW({.lr = 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(AdamW({.lr = 0.1, .beta1 = 1.0}), std::invalid_argument);
}
