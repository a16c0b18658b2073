#pragma once

#include <cstdint>
#include <vector>

namespace sharplab {

/// Deterministic, platform-independent random stream (xoshiro256++ seeded
/// via splitmix64 from a (seed, stream_id) pair). Identical inputs yield
/// bitwise-identical sequences everywhere; no ambient RNG state is used.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed, std::uint64_t stream_id = 0);

    /// Independent stream derived from this rng's identity, e.g. per sample.
    SeededRng derive(std::uint64_t substream) const;

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);
    /// +1 or -1 with equal probability.
    double rademacher();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t s_[4];
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace sharplab
