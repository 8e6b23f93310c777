#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bltqr/io.hpp"
#include "bltqr/inference.hpp"
#include "bltqr/simulate.hpp"

using namespace bltqr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("bltqr_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.1, -1.5e300, 1e-300, 3.141592653589793, 0.0, -0.0, 42.0,
                     1.0 / 3.0, 6.02e23}) {
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK_THROWS(parse_double("1.5x"));
    CHECK_THROWS(parse_double(""));
}

TEST_CASE("tensor files round-trip bit-exactly") {
    TempDir tmp("tensor");
    DenseTensor t({2, 3}, {1.0, 0.1, -2.5, 1e-300, 3e300, 0.0});
    write_tensor(tmp.path / "t.btq", t);
    const DenseTensor back = read_tensor(tmp.path / "t.btq");
    CHECK(back.dims() == t.dims());
    CHECK(back.values() == t.values());

    TensorStack stack;
    stack.dims = {2, 2};
    stack.count = 3;
    stack.payload = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    write_tensor_stack(tmp.path / "s.btq", stack);
    const TensorStack sback = read_tensor_stack(tmp.path / "s.btq");
    CHECK(sback.dims == stack.dims);
    CHECK(sback.count == 3);
    CHECK(sback.payload == stack.payload);
}

TEST_CASE("tensor file errors name the problem") {
    TempDir tmp("tensorerr");
    DenseTensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    write_tensor(tmp.path / "t.btq", t);

    // truncate the payload
    {
        std::ifstream in(tmp.path / "t.btq", std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(tmp.path / "short.btq", std::ios::binary);
        out.write(all.data(), static_cast<std::streamsize>(all.size() - 9));
    }
    try {
        read_tensor(tmp.path / "short.btq");
        FAIL("expected a byte-count error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("48") != std::string::npos); // expected bytes
        CHECK(msg.find("39") != std::string::npos); // actual bytes
    }

    std::ofstream bad(tmp.path / "bad.btq", std::ios::binary);
    bad << "NOPE\n";
    bad.close();
    CHECK_THROWS(read_tensor(tmp.path / "bad.btq"));
    CHECK_THROWS(read_tensor(tmp.path / "missing.btq"));
}

TEST_CASE("dataset directories round-trip, missing visits preserved") {
    ScenarioSpec spec = ScenarioSpec::defaults(1);
    spec.dims = {6, 6};
    spec.n_train = 4;
    spec.n_test = 2;
    spec.seed = 9;
    SimulatedData sim = generate(spec);
    sim.train.records.erase(sim.train.records.begin() + 5); // drop one visit
    sim.train.covariates.assign(sim.train.n_subjects, {1.25, -0.5});

    TempDir tmp("dataset");
    write_dataset(tmp.path / "d", sim.train);
    const Dataset back = read_dataset(tmp.path / "d");
    CHECK(back.n_subjects == sim.train.n_subjects);
    CHECK(back.n_visits == sim.train.n_visits);
    CHECK(back.records.size() == sim.train.records.size());
    for (std::size_t m = 0; m < back.records.size(); ++m) {
        CHECK(back.records[m].subject == sim.train.records[m].subject);
        CHECK(back.records[m].visit == sim.train.records[m].visit);
        CHECK(back.records[m].outcome == sim.train.records[m].outcome);
        CHECK(back.records[m].time == sim.train.records[m].time);
        CHECK(back.records[m].image.values() == sim.train.records[m].image.values());
    }
    CHECK(back.covariates == sim.train.covariates);
    CHECK_FALSE(back.observed(1, 2));
}

TEST_CASE("chain archives round-trip and drive identical selection output") {
    ChainOutput chain;
    chain.manifest.hyper = Hyperparams::defaults(0.4, 2, 1, 2);
    chain.manifest.config.iterations = 50;
    chain.manifest.config.burn_in = 26;
    chain.manifest.config.thin = 1;
    chain.manifest.config.seed = 4;
    chain.manifest.config.variant = ModelVariant::SharedOnly;
    chain.manifest.image_dims = {3, 2};
    chain.manifest.n_visits = 2;
    chain.manifest.n_subjects = 2;
    chain.manifest.n_covariates = 1;
    chain.manifest.data_dir = "somewhere";
    const std::size_t k_draws = 24;
    RngStream rng(11);
    chain.coef_draws.assign(2, {});
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t k = 0; k < k_draws; ++k) {
            std::vector<double> draw(6);
            for (double& v : draw) v = sample_normal(0.5, 1.0, rng);
            chain.coef_draws[t].push_back(std::move(draw));
        }
    for (std::size_t k = 0; k < k_draws; ++k) {
        chain.sigma_draws.push_back(sample_gamma(2, 2, rng));
        chain.intercept_draws.push_back(sample_normal(0, 1, rng));
        chain.slope_draws.push_back(sample_normal(0, 1, rng));
        chain.subject_intercept_draws.push_back({sample_normal(0, 1, rng), 0.25});
        chain.covariate_draws.push_back({sample_normal(0, 1, rng)});
    }

    TempDir tmp("chain");
    write_chain(tmp.path / "c", chain);
    const ChainOutput back = read_chain(tmp.path / "c");
    CHECK(back.manifest.hyper.quantile == chain.manifest.hyper.quantile);
    CHECK(back.manifest.config.seed == chain.manifest.config.seed);
    CHECK(back.draw_count() == k_draws);
    CHECK(back.coef_draws == chain.coef_draws);
    CHECK(back.sigma_draws == chain.sigma_draws);
    CHECK(back.subject_intercept_draws == chain.subject_intercept_draws);
    CHECK(back.covariate_draws == chain.covariate_draws);

    for (std::size_t t = 0; t < 2; ++t) {
        const SelectionMap a = mdev_bands(chain, t, 0.1);
        const SelectionMap b = mdev_bands(back, t, 0.1);
        CHECK(a.estimate.values() == b.estimate.values());
        CHECK(a.lower.values() == b.lower.values());
        CHECK(a.upper.values() == b.upper.values());
        CHECK(a.selected == b.selected);
    }
}

TEST_CASE("mask reader marks nonzero voxels") {
    TempDir tmp("mask");
    DenseTensor m({2, 2}, {0.0, 1.0, 2.0, 0.0});
    write_tensor(tmp.path / "m.btq", m);
    CHECK(read_mask(tmp.path / "m.btq") == std::vector<std::uint8_t>{0, 1, 1, 0});
}
