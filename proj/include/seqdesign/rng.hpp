#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace seqdesign {

// Deterministic random stream. All experiment randomness flows from one root
// seed through named substreams, so every artifact is reproducible from
// (config, seed) alone. Uniform/normal transforms are implemented explicitly
// instead of via std distributions, which are not pinned by the standard.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; second value cached.
    double normal();

    // Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
    int uniform_int(int n);

    // Draw index from unnormalized non-negative weights.
    int categorical(const std::vector<double>& weights);

    // Child stream derived from this stream's seed and a label, independent
    // of draws made on the parent.
    Rng substream(std::string_view name, uint64_t index = 0) const;

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// splitmix64 finalizer; used to derive substream seeds.
uint64_t hash64(uint64_t x);
uint64_t hash_label(uint64_t seed, std::string_view name, uint64_t index);

} // namespace seqdesign
