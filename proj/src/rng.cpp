#include "seqdesign/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace seqdesign {

Rng::Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

int Rng::uniform_int(int n) {
    if (n < 1) throw std::invalid_argument("uniform_int: n must be >= 1");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x = 0;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % un);
}

int Rng::categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("categorical: negative weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("categorical: all weights zero");
    double r = uniform() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
        r -= weights[i];
        if (r < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

Rng Rng::substream(std::string_view name, uint64_t index) const {
    return Rng(hash_label(seed_, name, index));
}

uint64_t hash64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t hash_label(uint64_t seed, std::string_view name, uint64_t index) {
    uint64_t h = hash64(seed);
    for (char c : name) h = hash64(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
    return hash64(h ^ index);
}

} // namespace seqdesign
