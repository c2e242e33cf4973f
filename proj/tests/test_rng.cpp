#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ft/rng.hpp"

using namespace ft;

TEST_SUITE("rng") {

// Published test vectors for the splitmix64 reference implementation.
TEST_CASE("splitmix64 reference sequence") {
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xe220a8397b1dcdafULL);
    CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ULL);
    CHECK(splitmix64(s) == 0x06c45d188009454fULL);
    s = 42;
    CHECK(splitmix64(s) == 0xbdd732262feb6e95ULL);
    CHECK(splitmix64(s) == 0x28efe333b266f103ULL);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("height_field") == 0x4d5cf0d5413aadb9ULL);
}

TEST_CASE("derive_seed separates streams by tag and base") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("uniform01 range and mean") {
    Rng rng(123);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal moments") {
    Rng rng(7);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("normal(mean, sd) affine relation") {
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) {
        const double z = a.normal();
        CHECK(b.normal(5.0, 3.0) == doctest::Approx(5.0 + 3.0 * z).epsilon(1e-12));
    }
}

TEST_CASE("uniform_int bounds and rough uniformity") {
    Rng rng(5);
    CHECK(rng.uniform_int(0) == 0);
    CHECK(rng.uniform_int(1) == 0);
    const std::uint64_t bound = 8;
    std::vector<int> counts(bound, 0);
    const int n = 80000;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t v = rng.uniform_int(bound);
        REQUIRE(v < bound);
        ++counts[v];
    }
    for (const int c : counts) CHECK(std::abs(c - n / 8.0) < n / 8.0 * 0.05);
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v(52);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> a = v, b = v, c = v;
    Rng(11).shuffle(a);
    Rng(11).shuffle(b);
    Rng(12).shuffle(c);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != v);  // 52! makes identity astronomically unlikely
    std::sort(a.begin(), a.end());
    CHECK(a == v);
}

} // TEST_SUITE
