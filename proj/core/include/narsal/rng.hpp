#pragma once

#include <cstdint>
#include <string_view>

namespace narsal {

/// Counter-based random stream: draw k is a pure function of (seed, stream id, k),
/// so identical seeds and call sequences give bit-identical values and independent
/// named streams can be split off one seed without coordination.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();
    /// Uniform in [0,1), 53-bit resolution.
    double next_unit();
    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double next_gauss();
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t next_below(std::uint64_t n);

    std::uint64_t position() const { return pos_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t pos_ = 0;
};

/// Root randomness source for a run: hands out named streams.
class RngState {
public:
    explicit RngState(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    RngStream stream(std::uint64_t id) const { return RngStream(seed_, id); }
    RngStream stream(std::string_view name) const;
    /// Stream for a named family indexed by up to three counters (epoch, step, slot).
    RngStream stream(std::string_view name, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) const;

private:
    std::uint64_t seed_;
};

/// FNV-1a; used for stable stream names.
std::uint64_t hash_name(std::string_view name);
/// Order-sensitive combiner for composite stream ids.
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v);

} // namespace narsal
