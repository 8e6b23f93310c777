#include <doctest.h>

#include <cmath>
#include <vector>

#include "bltqr/metrics.hpp"
#include "bltqr/rng.hpp"
#include "bltqr/distributions.hpp"
#include "oracles.hpp"

using namespace bltqr;

TEST_CASE("relative error basics") {
    DenseTensor truth({2, 2}, {1, -2, 0, 3});
    CHECK(relative_error(truth, truth) == 0.0);
    DenseTensor zero({2, 2});
    CHECK(relative_error(zero, truth) == 1.0);
    DenseTensor twice({2, 2}, {2, -4, 0, 6});
    CHECK(relative_error(twice, truth) == doctest::Approx(1.0));
    CHECK_THROWS(relative_error(truth, zero));

    DenseTensor flipped_est({2, 2}, {-2, 4, 0, -6});
    DenseTensor flipped_truth({2, 2}, {-1, 2, 0, -3});
    CHECK(relative_error(twice, truth) == doctest::Approx(relative_error(flipped_est, flipped_truth)));
}

TEST_CASE("rmse basics and random oracle") {
    DenseTensor truth({2, 2}, {1, 2, 3, 4});
    CHECK(rmse(truth, truth) == 0.0);
    DenseTensor off({2, 2}, {1.5, 2.5, 3.5, 4.5});
    CHECK(rmse(off, truth) == doctest::Approx(0.5));

    RngStream rng(1);
    std::vector<double> a(24), b(24);
    for (std::size_t i = 0; i < 24; ++i) {
        a[i] = sample_normal(0, 1, rng);
        b[i] = sample_normal(0, 1, rng);
    }
    DenseTensor ta({4, 6}, a), tb({4, 6}, b);
    double ss = 0.0;
    for (std::size_t i = 0; i < 24; ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(rmse(ta, tb) == doctest::Approx(std::sqrt(ss / 24.0)));
}

TEST_CASE("correlation endpoints and textbook oracle") {
    DenseTensor t({2, 2}, {1, 2, 3, 4});
    CHECK(correlation(t, t) == doctest::Approx(1.0));
    DenseTensor neg({2, 2}, {-1, -2, -3, -4});
    CHECK(correlation(neg, t) == doctest::Approx(-1.0));

    RngStream rng(2);
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
        a[i] = sample_normal(0, 1, rng);
        b[i] = 0.5 * a[i] + sample_normal(0, 1, rng);
    }
    DenseTensor ta({5, 6}, a), tb({5, 6}, b);
    const double ma = oracle::mean(a), mb = oracle::mean(b);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < 30; ++i) {
        sxy += (a[i] - ma) * (b[i] - mb);
        sxx += (a[i] - ma) * (a[i] - ma);
        syy += (b[i] - mb) * (b[i] - mb);
    }
    CHECK(correlation(ta, tb) == doctest::Approx(sxy / std::sqrt(sxx * syy)));

    DenseTensor flat({2, 2}, {1, 1, 1, 1});
    CHECK(std::isnan(correlation(flat, t)));
}

TEST_CASE("selection metrics: perfect, inverted and tallied") {
    std::vector<std::uint8_t> truth{1, 1, 0, 0, 1, 0, 0, 0};
    auto perfect = selection_metrics(truth, truth);
    CHECK(perfect.sensitivity == 1.0);
    CHECK(perfect.specificity == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.mcc == 1.0);

    std::vector<std::uint8_t> complement(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) complement[i] = truth[i] ? 0 : 1;
    auto inverted = selection_metrics(complement, truth);
    CHECK(inverted.sensitivity == 0.0);
    CHECK(inverted.specificity == 0.0);

    RngStream rng(3);
    std::vector<std::uint8_t> sel(20), sup(20);
    for (std::size_t i = 0; i < 20; ++i) {
        sel[i] = sample_bernoulli(0.4, rng);
        sup[i] = sample_bernoulli(0.3, rng);
    }
    const auto got = selection_metrics(sel, sup);
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        tp += (sel[i] && sup[i]);
        fp += (sel[i] && !sup[i]);
        tn += (!sel[i] && !sup[i]);
        fn += (!sel[i] && sup[i]);
    }
    CHECK(got.tp == tp);
    CHECK(got.fp == fp);
    CHECK(got.tn == tn);
    CHECK(got.fn == fn);
    if (!std::isnan(got.mcc)) {
        CHECK(got.mcc >= -1.0);
        CHECK(got.mcc <= 1.0);
    }
    if (!std::isnan(got.f1)) {
        CHECK(got.f1 >= 0.0);
        CHECK(got.f1 <= 1.0);
    }

    // degenerate: nothing positive in truth, nothing selected
    std::vector<std::uint8_t> none(5, 0);
    const auto degen = selection_metrics(none, none);
    CHECK(std::isnan(degen.sensitivity));
    CHECK(degen.specificity == 1.0);
    CHECK(std::isnan(degen.f1));
    CHECK(std::isnan(degen.mcc));
}

TEST_CASE("check loss values and reflection symmetry") {
    CHECK(check_loss(1.0, 1.0, 0.37) == 0.0);
    CHECK(check_loss(2.0, 1.0, 0.5) == doctest::Approx(0.5));
    CHECK(check_loss(0.0, 1.0, 0.2) == doctest::Approx(0.8));
    RngStream rng(4);
    for (int i = 0; i < 50; ++i) {
        const double y = sample_normal(0, 2, rng);
        const double pred = sample_normal(0, 2, rng);
        const double q = 0.05 + 0.9 * rng.uniform01();
        CHECK(check_loss(y, pred, q) ==
              doctest::Approx(check_loss(-y, -pred, 1.0 - q)).epsilon(1e-12));
        CHECK(check_loss(y, pred, q) >= 0.0);
    }
    CHECK_THROWS(check_loss(1.0, 1.0, 0.0));
}

TEST_CASE("support mask marks nonzero cells") {
    DenseTensor t({2, 2}, {0.0, -1.0, 0.0, 2.5});
    const auto mask = support_mask(t);
    CHECK(mask == std::vector<std::uint8_t>{0, 1, 0, 1});
}
