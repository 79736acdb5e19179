#include <doctest.h>

#include <cmath>

#include "roler/rng.hpp"

using namespace roler;

TEST_CASE("rng is deterministic per seed and split name") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.raw() == b.raw());

    Rng c(42);
    Rng child1 = c.split("alpha");
    c.uniform();  // consuming the parent must not change split derivation
    Rng child2 = c.split("alpha");
    CHECK(child1.raw() == child2.raw());

    CHECK(Rng(42).split("alpha").seed() != Rng(42).split("beta").seed());
    CHECK(Rng(42).split("x", 0).seed() != Rng(42).split("x", 1).seed());
}

TEST_CASE("uniform stays in [0,1) and has sane moments") {
    Rng rng(7);
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sumsq += u * u;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 0.01);
    CHECK(std::abs(var - 1.0 / 12.0) < 0.01);
}

TEST_CASE("normal moments") {
    Rng rng(11);
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("integer and shuffle cover their ranges") {
    Rng rng(3);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) counts[rng.integer(5)]++;
    for (int c : counts) CHECK(c > 800);

    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
    auto orig = v;
    rng.shuffle(v);
    std::sort(v.begin(), v.end());
    CHECK(v == orig);

    auto picks = rng.sample_without_replacement(10, 4);
    CHECK(picks.size() == 4);
    std::sort(picks.begin(), picks.end());
    CHECK(std::unique(picks.begin(), picks.end()) == picks.end());
}
