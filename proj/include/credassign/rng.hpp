#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "credassign/tensor.hpp"

namespace credassign {

/// Deterministic random number source. The generator is std::mt19937_64,
/// whose output sequence is fully pinned by the C++ standard, so identical
/// seeds give identical draws on every platform. Gaussian values come from
/// the Box-Muller transform (pairs; the second value is cached), never from
/// std::normal_distribution, whose sequence is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    /// Uniform integer in [lo, hi], inclusive. Rejection sampling on the top
    /// of the 64-bit range; unbiased and sequence-stable.
    int uniform_int(int lo, int hi) {
        const std::uint64_t n = static_cast<std::uint64_t>(hi - lo + 1);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<int>(x % n);
    }

    bool coin_flip() { return (gen_() & 1u) != 0; }

    /// Standard normal via Box-Muller. Consumes two uniforms per pair.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::string state_string() const;
    void set_state_string(const std::string& s);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent per-component seed from the global seed and a
/// component tag: splitmix64(seed ^ fnv1a64(tag)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// i.i.d. N(0, sigma^2) entries, filled in row-major index order.
template <typename T>
TensorT<T> randn(Rng& rng, std::vector<int> shape, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("randn: sigma must be positive");
    TensorT<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(sigma * rng.gaussian());
    return t;
}

} // namespace credassign
