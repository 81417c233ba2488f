#include "narsal/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace narsal {

namespace {

// Stafford mix13 finalizer.
std::uint64_t mix13(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

} // namespace

std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return mix13(h + kGolden + v);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix13(mix13(seed + kGolden) ^ stream_id)) {}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t v = mix13(key_ + pos_ * kGolden);
    pos_ += 1;
    return v;
}

double RngStream::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gauss() {
    // 1 - u keeps the log argument in (0,1].
    const double u1 = 1.0 - next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("RngStream::next_below: n must be positive");
    }
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) {
        v = next_u64();
    }
    return v % n;
}

RngStream RngState::stream(std::string_view name) const {
    return RngStream(seed_, hash_name(name));
}

RngStream RngState::stream(std::string_view name, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c) const {
    std::uint64_t id = hash_name(name);
    id = hash_combine(id, a);
    id = hash_combine(id, b);
    id = hash_combine(id, c);
    return RngStream(seed_, id);
}

} // namespace narsal
