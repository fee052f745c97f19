#ifndef DATAPROF_RNG_HPP
#define DATAPROF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dataprof {

// Deterministic random source. mt19937_64 is fully specified by the
// standard, but the std distributions are not, so uniforms, bounded
// integers, shuffles and normals are derived here by hand. Two runs with
// the same seed produce the same stream on any conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double next_in(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Uniform integer in [0, bound). Modulo bias is irrelevant here; the
    // contract is determinism, not statistical perfection.
    std::uint64_t next_below(std::uint64_t bound) {
        return bound == 0 ? 0 : gen_() % bound;
    }

    // Standard normal via Box-Muller; one spare cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (std::size_t i = items.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(items[i], items[j]);
        }
    }

    // First k entries of a seeded permutation of [0, n): a sample drawn
    // without replacement.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace dataprof

#endif
