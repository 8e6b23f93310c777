#include <doctest.h>

#include <cstring>
#include <vector>

#include "bltqr/rng.hpp"
#include "bltqr/distributions.hpp"
#include "bltqr/tensor.hpp"
#include "oracles.hpp"

using namespace bltqr;

namespace {

ParafacCoef random_coef(std::size_t rank, std::vector<std::size_t> dims, RngStream& rng) {
    ParafacCoef c(rank, dims);
    for (std::size_t r = 0; r < rank; ++r)
        for (std::size_t j = 0; j < dims.size(); ++j)
            for (double& v : c.margin(r, j)) v = sample_normal(0.0, 1.0, rng);
    return c;
}

DenseTensor random_tensor(std::vector<std::size_t> dims, RngStream& rng) {
    DenseTensor t(dims);
    for (double& v : t.values()) v = sample_normal(0.0, 1.0, rng);
    return t;
}

} // namespace

TEST_CASE("materialize: rank-1 outer product by hand") {
    ParafacCoef c(1, {2, 2});
    c.margin(0, 0) = {1.0, 2.0};
    c.margin(0, 1) = {3.0, 4.0};
    const DenseTensor b = materialize(c);
    CHECK(b(0, 0) == 3.0);
    CHECK(b(0, 1) == 4.0);
    CHECK(b(1, 0) == 6.0);
    CHECK(b(1, 1) == 8.0);
}

TEST_CASE("materialize: zero margins give the zero tensor") {
    ParafacCoef c(3, {4, 5});
    const DenseTensor b = materialize(c);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == 0.0);
}

TEST_CASE("materialize matches the naive multi-index oracle") {
    RngStream rng(11);
    for (auto dims : {std::vector<std::size_t>{5, 5}, std::vector<std::size_t>{3, 4, 2}}) {
        const ParafacCoef c = random_coef(2, dims, rng);
        const DenseTensor fast = materialize(c);
        const DenseTensor slow = oracle::naive_materialize(c);
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
    }
}

TEST_CASE("materialize is bit-deterministic") {
    RngStream rng(5);
    const ParafacCoef c = random_coef(3, {6, 7}, rng);
    const DenseTensor a = materialize(c);
    const DenseTensor b = materialize(c);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("rank-2 materialization equals the sum of its rank-1 parts") {
    RngStream rng(17);
    const ParafacCoef c = random_coef(2, {5, 5}, rng);
    ParafacCoef c0(1, {5, 5}), c1(1, {5, 5});
    for (std::size_t j = 0; j < 2; ++j) {
        c0.margin(0, j) = c.margin(0, j);
        c1.margin(0, j) = c.margin(1, j);
    }
    const DenseTensor whole = materialize(c);
    const DenseTensor p0 = materialize(c0), p1 = materialize(c1);
    for (std::size_t i = 0; i < whole.size(); ++i)
        CHECK(whole[i] == doctest::Approx(p0[i] + p1[i]).epsilon(1e-12));
}

TEST_CASE("inner_product basics") {
    DenseTensor x({2, 2}, {1, 0, 0, 1});
    DenseTensor b({2, 2}, {5, 1, 1, 7});
    CHECK(inner_product(x, b) == 12.0);
    DenseTensor zero({2, 2});
    CHECK(inner_product(x, zero) == 0.0);

    RngStream rng(3);
    const DenseTensor a = random_tensor({4, 4}, rng);
    const DenseTensor c = random_tensor({4, 4}, rng);
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a.values()[i] * c.values()[i];
    CHECK(inner_product(a, c) == doctest::Approx(dot).epsilon(1e-12));
}

TEST_CASE("inner_product is symmetric and bilinear") {
    RngStream rng(23);
    const DenseTensor a = random_tensor({3, 5}, rng);
    const DenseTensor b = random_tensor({3, 5}, rng);
    const DenseTensor c = random_tensor({3, 5}, rng);
    CHECK(inner_product(a, b) == doctest::Approx(inner_product(b, a)));
    DenseTensor lin({3, 5});
    for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = 2.5 * b[i] - 0.75 * c[i];
    CHECK(inner_product(a, lin) ==
          doctest::Approx(2.5 * inner_product(a, b) - 0.75 * inner_product(a, c)).epsilon(1e-12));
}

TEST_CASE("shape and order validation") {
    CHECK_THROWS(DenseTensor({4}));
    CHECK_THROWS(DenseTensor({2, 2, 2, 2}));
    CHECK_THROWS(DenseTensor({2, 2}, {1.0, 2.0, 3.0}));
    DenseTensor a({2, 2}), b({2, 3});
    CHECK_THROWS(inner_product(a, b));
    ParafacCoef c(1, {2, 2});
    c.margin(0, 0) = {1.0};
    CHECK_THROWS(materialize(c));
}

TEST_CASE("margin_design_vector: row sums against a ones margin") {
    DenseTensor x({2, 2}, {1, 2, 3, 4});
    ParafacCoef c(1, {2, 2});
    c.margin(0, 0) = {9.0, 9.0}; // own margin, irrelevant for mode 0's design
    c.margin(0, 1) = {1.0, 1.0};
    const auto v = margin_design_vector(x, c, 0, 0);
    REQUIRE(v.size() == 2);
    CHECK(v[0] == 3.0);
    CHECK(v[1] == 7.0);
}

TEST_CASE("margin_design_vector: zero other margins give the zero vector") {
    RngStream rng(7);
    const DenseTensor x = random_tensor({4, 3}, rng);
    ParafacCoef c(2, {4, 3});
    c.margin(1, 0) = {1.0, 2.0, 3.0, 4.0}; // mode-0 margin does not enter j=0's design
    const auto v = margin_design_vector(x, c, 1, 0);
    for (double e : v) CHECK(e == 0.0);
}

TEST_CASE("margin_design_vector agrees with single-component materialization") {
    RngStream rng(41);
    const std::vector<std::size_t> dims{6, 6, 6};
    const DenseTensor x = random_tensor(dims, rng);
    const ParafacCoef c = random_coef(2, dims, rng);
    for (std::size_t r = 0; r < 2; ++r) {
        ParafacCoef single(1, dims);
        for (std::size_t j = 0; j < 3; ++j) single.margin(0, j) = c.margin(r, j);
        const double direct = inner_product(x, oracle::naive_materialize(single));
        for (std::size_t j = 0; j < 3; ++j) {
            const auto v = margin_design_vector(x, c, r, j);
            double dot = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) dot += v[k] * c.margin(r, j)[k];
            CHECK(dot == doctest::Approx(direct).epsilon(1e-10));
        }
    }
}

TEST_CASE("margin_design_vector index validation") {
    DenseTensor x({2, 2}, {1, 2, 3, 4});
    ParafacCoef c(1, {2, 2});
    CHECK_THROWS(margin_design_vector(x, c, 1, 0));
    CHECK_THROWS(margin_design_vector(x, c, 0, 2));
}

TEST_CASE("linearity: inner product decomposes over design vectors for every mode") {
    RngStream rng(59);
    for (auto dims : {std::vector<std::size_t>{4, 5}, std::vector<std::size_t>{3, 3, 4}}) {
        const DenseTensor x = random_tensor(dims, rng);
        const ParafacCoef c = random_coef(3, dims, rng);
        const double whole = inner_product(x, materialize(c));
        for (std::size_t j = 0; j < dims.size(); ++j) {
            double sum = 0.0;
            for (std::size_t r = 0; r < c.rank(); ++r) {
                const auto v = margin_design_vector(x, c, r, j);
                for (std::size_t k = 0; k < v.size(); ++k) sum += v[k] * c.margin(r, j)[k];
            }
            CHECK(sum == doctest::Approx(whole).epsilon(1e-10));
        }
    }
}
