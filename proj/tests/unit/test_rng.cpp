#include <doctest.h>

#include <cmath>

#include "narsal/rng.hpp"

using namespace narsal;

TEST_CASE("identical seed and call sequence give bit-identical draws") {
    RngState a(42), b(42);
    RngStream s1 = a.stream("dropout");
    RngStream s2 = b.stream("dropout");
    for (int i = 0; i < 1000; ++i) {
        CHECK(s1.next_u64() == s2.next_u64());
    }
}

TEST_CASE("named streams from one seed are independent") {
    RngState state(7);
    RngStream s1 = state.stream("dropout-a");
    RngStream s2 = state.stream("dropout-b");
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        if (s1.next_u64() == s2.next_u64()) same += 1;
    }
    CHECK(same == 0);
}

TEST_CASE("stream position counts draws") {
    RngState state(1);
    RngStream s = state.stream("x");
    CHECK(s.position() == 0);
    s.next_unit();
    CHECK(s.position() == 1);
    s.next_gauss(); // two uniforms
    CHECK(s.position() == 3);
}

TEST_CASE("unit draws live in [0,1)") {
    RngStream s(3, 9);
    for (int i = 0; i < 10000; ++i) {
        const double u = s.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("next_below stays in range and rejects zero") {
    RngStream s(5, 5);
    for (int i = 0; i < 1000; ++i) {
        CHECK(s.next_below(7) < 7);
    }
    CHECK_THROWS(s.next_below(0));
}

TEST_CASE("gauss has roughly standard moments") {
    RngStream s(11, 0);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = s.next_gauss();
        sum += x;
        sum_sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.03);
}

TEST_CASE("composite stream ids are order-sensitive") {
    RngState state(1);
    RngStream a = state.stream("dropout", 1, 2, 3);
    RngStream b = state.stream("dropout", 3, 2, 1);
    CHECK(a.next_u64() != b.next_u64());
}
