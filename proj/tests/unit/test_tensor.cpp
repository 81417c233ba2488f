#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "narsal/tensor.hpp"

using namespace narsal;

TEST_CASE("shape and data sizes must agree") {
    CHECK_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 0.0)));
    CHECK_THROWS_WITH_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)),
                         doctest::Contains("(2x3)"), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({0, 3}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({-1}, 0.0), std::invalid_argument);
}

TEST_CASE("matrix accessors address row-major storage") {
    Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(t.at(0, 0) == 1);
    CHECK(t.at(1, 2) == 6);
    t.at(1, 0) = 9;
    CHECK(t.data[3] == 9);
}

TEST_CASE("item applies to single-element tensors only") {
    CHECK(Tensor::scalar(2.5).item() == 2.5);
    CHECK_THROWS_AS(Tensor({2}, 0.0).item(), std::invalid_argument);
}

TEST_CASE("shape mismatch diagnostics name both shapes") {
    Tensor a({2, 3}, 0.0);
    Tensor b({3, 2}, 0.0);
    CHECK_THROWS_WITH_AS(require_same_shape(a, b, "add"),
                         doctest::Contains("(2x3)"), std::invalid_argument);
    try {
        require_same_shape(a, b, "add");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("(3x2)") != std::string::npos);
    }
}

TEST_CASE("all_finite flags NaN and infinities") {
    Tensor t({2}, std::vector<double>{1.0, 2.0});
    CHECK(t.all_finite());
    t.data[1] = std::nan("");
    CHECK_FALSE(t.all_finite());
}
