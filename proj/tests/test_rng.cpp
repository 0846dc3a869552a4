#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "lookahead/rng.hpp"

using namespace lookahead;

TEST_CASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 100; ++i) {
        same += a.next_u64() == b.next_u64();
    }
    CHECK(same < 5);
}

TEST_CASE("uniform_u64 bound") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        CHECK(rng.uniform_u64(13) < 13);
    }
}

TEST_CASE("uniform_int covers both endpoints") {
    Rng rng(9);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
        const int v = rng.uniform_int(3, 7);
        CHECK(v >= 3);
        CHECK(v <= 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("uniform_real in [0,1)") {
    Rng rng(11);
    double mn = 1.0, mx = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double v = rng.uniform_real();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    CHECK(mn < 0.01);
    CHECK(mx > 0.99);
}

TEST_CASE("bernoulli tracks its probability") {
    Rng rng(13);
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        hits += rng.bernoulli(0.3);
    }
    const double frac = static_cast<double>(hits) / n;
    CHECK(frac > 0.28);
    CHECK(frac < 0.32);
}

TEST_CASE("normal has roughly unit moments") {
    Rng rng(17);
    double sum = 0, sq = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.03);
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) {
        v[i] = i;
    }
    auto a = v, b = v;
    Rng r1(23), r2(23);
    r1.shuffle(a);
    r2.shuffle(b);
    CHECK(a == b);
    CHECK(a != v);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);
}

TEST_CASE("derive_seed separates named streams") {
    const auto a = derive_seed(5, "init");
    const auto b = derive_seed(5, "shuffle");
    const auto c = derive_seed(6, "init");
    CHECK(a != b);
    CHECK(a != c);
    CHECK(a == derive_seed(5, "init"));
}

TEST_CASE("derive_seed separates indexed streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        seen.insert(derive_seed(99, i));
    }
    CHECK(seen.size() == 1000);
}

TEST_CASE("fnv1a64 is stable and content-sensitive") {
    CHECK(fnv1a64("abc") == fnv1a64("abc"));
    CHECK(fnv1a64("abc") != fnv1a64("abd"));
    CHECK(fnv1a64("") != fnv1a64("a"));
}
