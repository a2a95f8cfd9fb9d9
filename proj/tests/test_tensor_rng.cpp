#include <array>
#include <cmath>
#include <set>

#include <doctest.h>

#include "credassign/rng.hpp"
#include "credassign/tensor.hpp"

using namespace credassign;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.ndim() == 3);
    CHECK(t.dim(1) == 3);
    CHECK(t.data.size() == 24);
    for (float v : t.data) CHECK(v == 0.0f);

    Tensor f({2, 2}, 1.5f);
    CHECK(f.data[3] == 1.5f);

    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({-1}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1.0f}), DimensionError);
}

TEST_CASE("tensor 4d accessor is row-major NCHW") {
    Tensor t({2, 3, 4, 5});
    t.at(1, 2, 3, 4) = 7.0f;
    // flat index n*(3*4*5) + c*(4*5) + h*5 + w
    CHECK(t.data[1 * 60 + 2 * 20 + 3 * 5 + 4] == 7.0f);
    t.at(0, 0, 0, 1) = 3.0f;
    CHECK(t.data[1] == 3.0f);
}

TEST_CASE("tensor 2d accessor") {
    Tensor t({3, 4});
    t.at(2, 1) = 9.0f;
    CHECK(t.data[2 * 4 + 1] == 9.0f);
}

TEST_CASE("finiteness checks") {
    Tensor t({2, 2}, 1.0f);
    CHECK(t.all_finite());
    t.data[2] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    CHECK_THROWS_AS(t.check_finite("t"), NumericError);
}

TEST_CASE("sign convention maps zero to zero") {
    CHECK(sign_of(3.5f) == 1.0f);
    CHECK(sign_of(-0.25f) == -1.0f);
    CHECK(sign_of(0.0f) == 0.0f);
    CHECK(sign_of(-0.0f) == 0.0f);
}

TEST_CASE("require_shape error message carries both shapes") {
    Tensor t({2, 3});
    CHECK_NOTHROW(require_shape(t, {2, 3}, "x"));
    CHECK_THROWS_AS(require_shape(t, {3, 2}, "x"), DimensionError);
}

TEST_CASE("norm helpers match manual sums") {
    TensorD t({2, 2}, std::vector<double>{1.0, -2.0, 3.0, -4.0});
    CHECK(dot_all(t, t) == doctest::Approx(30.0).epsilon(1e-15));
    CHECK(frobenius_norm(t) == doctest::Approx(std::sqrt(30.0)).epsilon(1e-15));
}

// fnv1a64 test vectors are published for the 64-bit offset basis / prime.
TEST_CASE("hash primitive matches published vectors") {
    CHECK(fnv1a64("") == 14695981039346656037ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

// splitmix64(0) et seq. appear in the reference implementation's test output.
TEST_CASE("seed mixer matches published vectors") {
    // the reference generator advances its state by the golden gamma before
    // each mix; emulate that around the pure mixing function
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xe220a8397b1dcdafull);
    s += 0x9e3779b97f4a7c15ull;
    CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ull);
    s += 0x9e3779b97f4a7c15ull;
    CHECK(splitmix64(s) == 0x06c45d188009454full);
}

TEST_CASE("derived seeds separate by tag and seed") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("rng determinism and stream independence") {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    bool differs = false;
    Rng a2(123);
    for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
    CHECK(differs);
}

TEST_CASE("uniform stays in [0,1)") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("uniform_int covers the inclusive range evenly") {
    Rng rng(11);
    std::array<int, 5> counts{};
    for (int i = 0; i < 50000; ++i) {
        const int v = rng.uniform_int(2, 6);
        REQUIRE(v >= 2);
        REQUIRE(v <= 6);
        counts[static_cast<std::size_t>(v - 2)]++;
    }
    // each bucket expects 10000; 5 sigma = 5*sqrt(10000*0.8) = 447
    for (int cnt : counts) CHECK(std::abs(cnt - 10000) < 450);
}

TEST_CASE("gaussian moments under a pinned seed") {
    Rng rng(2024);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);     // ~6 standard errors
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("rng state round-trips through its string form") {
    Rng rng(99);
    rng.gaussian(); // leave a cached spare in place: the awkward case
    const std::string state = rng.state_string();

    std::vector<double> expect;
    for (int i = 0; i < 17; ++i) expect.push_back(rng.gaussian());

    Rng restored(0);
    restored.set_state_string(state);
    for (int i = 0; i < 17; ++i) CHECK(restored.gaussian() == expect[static_cast<std::size_t>(i)]);

    Rng bad(0);
    CHECK_THROWS_AS(bad.set_state_string("not a state"), FormatError);
}

TEST_CASE("randn fills in row-major draw order with the requested scale") {
    Rng a(5);
    const Tensor t = randn<float>(a, {3, 4}, 0.5);
    Rng b(5);
    CHECK(t.data[0] == static_cast<float>(0.5 * b.gaussian()));
    CHECK(t.data[1] == static_cast<float>(0.5 * b.gaussian()));

    Rng c(6);
    CHECK_THROWS_AS(randn<float>(c, {2, 2}, 0.0), DomainError);
    CHECK_THROWS_AS(randn<float>(c, {2, 2}, -1.0), DomainError);

    Rng d(7);
    const TensorD big = randn<double>(d, {100, 100}, 2.0);
    double sq = 0.0;
    for (double v : big.data) sq += v * v;
    CHECK(sq / big.numel() == doctest::Approx(4.0).epsilon(0.05));
}
