#include <doctest.h>

#include <cmath>

#include "bltqr/model.hpp"
#include "oracles.hpp"

using namespace bltqr;

namespace {

Dataset tiny_dataset() {
    Dataset d;
    d.n_subjects = 2;
    d.n_visits = 2;
    d.image_dims = {2, 2};
    VisitRecord r0{0, 0, 1.0, 0.0, DenseTensor({2, 2}, {1, 2, 3, 4})};
    VisitRecord r1{0, 1, 2.0, 0.5, DenseTensor({2, 2}, {0, 1, 0, 1})};
    VisitRecord r2{1, 0, 3.0, 0.0, DenseTensor({2, 2}, {1, 1, 1, 1})};
    d.records = {r0, r1, r2}; // subject 1 misses visit 2
    return d;
}

} // namespace

TEST_CASE("theta_rho exact values and reflection") {
    const auto q5 = theta_rho(0.5);
    CHECK(std::fabs(q5.theta) <= 1e-12);
    CHECK(std::fabs(q5.rho - std::sqrt(8.0)) <= 1e-12);
    const auto q2 = theta_rho(0.2);
    CHECK(std::fabs(q2.theta - 3.75) <= 1e-12);
    CHECK(std::fabs(q2.rho * q2.rho - 12.5) <= 1e-12);
    const auto q8 = theta_rho(0.8);
    CHECK(std::fabs(q8.theta + 3.75) <= 1e-12);
    CHECK(std::fabs(q8.rho * q8.rho - 12.5) <= 1e-12);
    for (double q : {0.05, 0.31, 0.5, 0.77}) {
        const auto a = theta_rho(q), b = theta_rho(1.0 - q);
        CHECK(a.theta == doctest::Approx(-b.theta).epsilon(1e-12));
        CHECK(a.rho == doctest::Approx(b.rho).epsilon(1e-12));
    }
    CHECK_THROWS(theta_rho(0.0));
    CHECK_THROWS(theta_rho(1.0));
}

TEST_CASE("hyperparameter defaults") {
    const auto h = Hyperparams::defaults(0.5, 3, 2, 2);
    CHECK(h.a_lambda == 3.0);
    CHECK(h.b_lambda == doctest::Approx(std::pow(3.0, 0.25)));
    CHECK(h.a_tau == 1.0);
    CHECK(h.b_tau == doctest::Approx((1.0 / 3.0) * std::sqrt(3.0)));
    CHECK(h.b_tau_visit == doctest::Approx(0.5 * std::sqrt(2.0)));
    CHECK(h.a_zeta == 1.0);
    CHECK(h.b_zeta == 1.0);
    CHECK(h.spike == 1e-4);
    REQUIRE(h.dirichlet_weight.size() == 3);
    CHECK(h.dirichlet_weight[0] == doctest::Approx(1.0 / 3.0));
    CHECK_NOTHROW(h.validate());

    const auto h3 = Hyperparams::defaults(0.5, 2, 2, 3);
    CHECK(h3.b_lambda == doctest::Approx(std::pow(3.0, 1.0 / 6.0)));
    CHECK(h3.b_tau == doctest::Approx(0.5 * std::pow(2.0, 1.0 / 3.0)));

    Hyperparams bad = h;
    bad.quantile = 1.2;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("dataset validation and missing visits") {
    Dataset d = tiny_dataset();
    CHECK_NOTHROW(d.validate());
    CHECK(d.observed(0, 1));
    CHECK_FALSE(d.observed(1, 1));
    CHECK(d.record_index(1, 0) == 2);
    CHECK_THROWS(d.record_index(1, 1));

    Dataset bad = tiny_dataset();
    bad.records[1].image = DenseTensor({3, 2});
    CHECK_THROWS(bad.validate());

    Dataset dup = tiny_dataset();
    dup.records.push_back(dup.records[0]);
    CHECK_THROWS(dup.validate());

    Dataset range = tiny_dataset();
    range.records[0].visit = 7;
    CHECK_THROWS(range.validate());
}

TEST_CASE("linear predictor: zero state and simple scalars") {
    Dataset d = tiny_dataset();
    RngStream rng(1);
    Hyperparams h = Hyperparams::defaults(0.5, 2, 2, 2);
    McmcState st = init_state(d, h, ModelVariant::Full, rng);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t j = 0; j < 2; ++j) {
            std::fill(st.shared.coef.margin(r, j).begin(), st.shared.coef.margin(r, j).end(), 0.0);
            for (auto& blk : st.visit)
                std::fill(blk.coef.margin(r, j).begin(), blk.coef.margin(r, j).end(), 0.0);
        }
    CHECK(linear_predictor(st, d, 0, 0, false) == 0.0);

    st.intercept = 1.0;
    st.slope = 2.0;
    CHECK(linear_predictor(st, d, 0, 1, false) == doctest::Approx(2.0)); // 1 + 2*0.5
    st.mixing[d.record_index(0, 1)] = 3.0;
    const double with_nu = linear_predictor(st, d, 0, 1, true);
    CHECK(with_nu == doctest::Approx(2.0 + st.theta * 3.0));
    CHECK_THROWS(linear_predictor(st, d, 1, 1, false));
}

TEST_CASE("linear predictor matches a dense from-scratch oracle") {
    Dataset d = tiny_dataset();
    d.covariates = {{0.5, -1.0}, {2.0, 0.25}};
    RngStream rng(2);
    Hyperparams h = Hyperparams::defaults(0.3, 2, 2, 2);
    McmcState st = init_state(d, h, ModelVariant::Full, rng);
    st.intercept = 0.7;
    st.slope = -0.4;
    st.subject_intercept = {0.1, -0.2};
    st.covariate_coef = {1.5, 0.3};

    for (std::size_t i : {0u, 1u}) {
        for (std::size_t t : {0u, 1u}) {
            if (!d.observed(i, t)) continue;
            const VisitRecord& rec = *d.find(i, t);
            const DenseTensor shared = oracle::naive_materialize(st.shared.coef);
            const DenseTensor vis = oracle::naive_materialize(st.visit[t].coef);
            double expect = st.intercept + st.subject_intercept[i] + st.slope * rec.time +
                            d.covariates[i][0] * st.covariate_coef[0] +
                            d.covariates[i][1] * st.covariate_coef[1];
            for (std::size_t c = 0; c < shared.size(); ++c)
                expect += rec.image[c] * (shared[c] + vis[c]);
            CHECK(linear_predictor(st, d, i, t, false) == doctest::Approx(expect).epsilon(1e-10));
        }
    }
}

TEST_CASE("linear predictor is linear in every coefficient block") {
    Dataset d = tiny_dataset();
    d.covariates = {{0.7, -0.3}, {1.2, 0.5}};
    RngStream rng(3);
    Hyperparams h = Hyperparams::defaults(0.5, 2, 2, 2);
    McmcState st = init_state(d, h, ModelVariant::Full, rng);
    st.intercept = 0.3;
    st.slope = 1.1;
    st.covariate_coef = {0.4, -0.9};

    const double step = 1e-6;
    auto slope_of = [&](auto&& setter) {
        McmcState s1 = st, s2 = st;
        setter(s1, step);
        setter(s2, 2.0 * step);
        const double f0 = linear_predictor(st, d, 0, 0, false);
        const double f1 = linear_predictor(s1, d, 0, 0, false);
        const double f2 = linear_predictor(s2, d, 0, 0, false);
        const double d1 = (f1 - f0) / step;
        const double d2 = (f2 - f0) / (2.0 * step);
        return std::fabs(d1 - d2) / std::max(1.0, std::fabs(d1));
    };
    CHECK(slope_of([](McmcState& s, double e) { s.intercept += e; }) < 1e-6);
    CHECK(slope_of([](McmcState& s, double e) { s.slope += e; }) < 1e-6);
    CHECK(slope_of([](McmcState& s, double e) { s.covariate_coef[1] += e; }) < 1e-6);
    CHECK(slope_of([](McmcState& s, double e) { s.shared.coef.margin(0, 0)[1] += e; }) < 1e-6);
    CHECK(slope_of([](McmcState& s, double e) { s.visit[0].coef.margin(1, 1)[0] += e; }) < 1e-6);
}

TEST_CASE("initial state honors the sparse-null defaults") {
    Dataset d = tiny_dataset();
    RngStream rng(4);
    Hyperparams h = Hyperparams::defaults(0.5, 2, 3, 2);
    const McmcState st = init_state(d, h, ModelVariant::Full, rng);
    CHECK(st.sigma == 1.0);
    CHECK(st.intercept == 0.0);
    CHECK(st.slope == 0.0);
    for (double v : st.mixing) CHECK(v == 1.0);
    for (double v : st.subject_intercept) CHECK(v == 0.0);
    for (const auto& blk : st.visit)
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t j = 0; j < 2; ++j)
                for (std::size_t k = 0; k < blk.include[r][j].size(); ++k) {
                    CHECK(blk.include[r][j][k] == 0);
                    CHECK(blk.local_scale[r][j][k] == h.spike);
                }

    const McmcState only_shared = init_state(d, h, ModelVariant::SharedOnly, rng);
    for (const auto& blk : only_shared.visit)
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t j = 0; j < 2; ++j)
                for (double v : blk.coef.margin(r, j)) CHECK(v == 0.0);

    const McmcState only_visit = init_state(d, h, ModelVariant::VisitOnly, rng);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t j = 0; j < 2; ++j)
            for (double v : only_visit.shared.coef.margin(r, j)) CHECK(v == 0.0);
}

TEST_CASE("variant names round-trip") {
    for (auto v : {ModelVariant::Full, ModelVariant::VisitOnly, ModelVariant::SharedOnly})
        CHECK(parse_variant(to_string(v)) == v);
    CHECK_THROWS(parse_variant("nope"));
}
