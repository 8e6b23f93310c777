// Command-line front end: simulate, fit, summarize, predict, diagnose,
// evaluate. Every subcommand is deterministic given its flags and seed and
// writes its resolved configuration next to its outputs.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bltqr/bltqr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::size_t> parse_dims(const std::string& text) {
    std::vector<std::size_t> dims;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find('x', start);
        const std::string tok =
            pos == std::string::npos ? text.substr(start) : text.substr(start, pos - start);
        if (tok.empty()) throw CLI::ValidationError("--dims", "malformed dims '" + text + "'");
        dims.push_back(bltqr::parse_size(tok));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (dims.size() != 2 && dims.size() != 3)
        throw CLI::ValidationError("--dims", "expected 2 or 3 axes, got '" + text + "'");
    return dims;
}

std::string fmt(double v) { return bltqr::format_double(v); }

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    int scenario = 1;
    std::string dims;
    std::size_t n_train = 250;
    std::size_t n_test = 50;
    double quantile = 0.5;
    std::uint64_t seed = 0;
    bool misspecified = false;
    std::string out;
};

int run_simulate(const SimulateArgs& a) {
    bltqr::ScenarioSpec spec = bltqr::ScenarioSpec::defaults(a.scenario);
    if (!a.dims.empty()) spec.dims = parse_dims(a.dims);
    spec.n_train = a.n_train;
    spec.n_test = a.n_test;
    spec.quantile = a.quantile;
    spec.seed = a.seed;
    spec.validate();

    const bltqr::SimulatedData sim =
        a.misspecified ? bltqr::generate_misspecified(spec) : bltqr::generate(spec);

    const fs::path out(a.out);
    fs::create_directories(out);
    bltqr::write_dataset(out / "train", sim.train);
    bltqr::write_dataset(out / "test", sim.test);
    for (std::size_t t = 0; t < sim.truth.size(); ++t)
        bltqr::write_tensor(out / ("truth_v" + std::to_string(t + 1) + ".btq"), sim.truth[t]);

    bltqr::write_json(out / "config.json",
                      json{{"command", "simulate"},
                           {"scenario", spec.scenario_id},
                           {"dims", spec.dims},
                           {"n_train", spec.n_train},
                           {"n_test", spec.n_test},
                           {"n_visits", spec.n_visits},
                           {"quantile", spec.quantile},
                           {"seed", spec.seed},
                           {"misspecified", a.misspecified}});
    std::cout << "simulate: wrote " << sim.train.records.size() << " training and "
              << sim.test.records.size() << " test records to " << out.string() << "\n";
    return 0;
}

// --- fit ---------------------------------------------------------------------

struct FitArgs {
    std::string data;
    double quantile = 0.5;
    std::size_t rank_shared = 2;
    std::size_t rank_visit = 2;
    std::size_t iters = 7000;
    std::size_t burnin = 2500;
    std::size_t thin = 1;
    std::uint64_t seed = 0;
    std::string variant = "bltqr";
    std::string mask;
    std::string out;
};

int run_fit(const FitArgs& a) {
    bltqr::Dataset data = bltqr::read_dataset(a.data);

    std::vector<std::uint8_t> mask;
    if (!a.mask.empty()) {
        mask = bltqr::read_mask(a.mask);
        std::size_t cells = 1;
        for (std::size_t d : data.image_dims) cells *= d;
        if (mask.size() != cells)
            throw std::runtime_error("mask size does not match the image dimensions");
        // Voxels outside the mask are ignored: zero them so they contribute
        // nothing to any inner product.
        for (auto& rec : data.records)
            for (std::size_t c = 0; c < cells; ++c)
                if (!mask[c]) rec.image[c] = 0.0;
    }

    bltqr::Hyperparams hyper =
        bltqr::Hyperparams::defaults(a.quantile, a.rank_shared, a.rank_visit, data.image_dims.size());
    bltqr::SamplerConfig config;
    config.iterations = a.iters;
    config.burn_in = a.burnin;
    config.thin = a.thin;
    config.seed = a.seed;
    config.variant = bltqr::parse_variant(a.variant);

    bltqr::ChainOutput chain = bltqr::run_chain(config, data, hyper);
    chain.manifest.data_dir = a.data;
    chain.manifest.masked = !mask.empty();

    const fs::path out(a.out);
    bltqr::write_chain(out, chain);
    if (!mask.empty()) {
        bltqr::TensorStack stack;
        stack.dims = data.image_dims;
        stack.count = 1;
        stack.payload.assign(mask.begin(), mask.end());
        bltqr::write_tensor_stack(out / "mask.btq", stack);
    }
    std::cout << "fit: stored " << chain.draw_count() << " draws in " << out.string() << "\n";
    return 0;
}

// --- summarize ---------------------------------------------------------------

struct SummarizeArgs {
    std::string chain;
    double alpha = 0.1;
    std::string method = "mdev";
    std::string labels;
    std::string out;
};

int run_summarize(const SummarizeArgs& a) {
    const bltqr::ChainOutput chain = bltqr::read_chain(a.chain);
    if (a.method != "mdev" && a.method != "pointwise")
        throw std::runtime_error("unknown method '" + a.method + "' (expected mdev or pointwise)");

    std::vector<std::uint8_t> mask;
    if (chain.manifest.masked) mask = bltqr::read_mask(fs::path(a.chain) / "mask.btq");

    std::vector<double> labels;
    if (!a.labels.empty()) {
        const bltqr::DenseTensor lab = bltqr::read_tensor(a.labels);
        if (lab.dims() != chain.manifest.image_dims)
            throw std::runtime_error("label map dims do not match the chain");
        labels = lab.values();
    }

    const fs::path out(a.out);
    fs::create_directories(out);
    std::vector<std::vector<std::string>> counts;
    std::map<long long, std::vector<std::size_t>> region_counts; // label -> per-visit count
    std::map<long long, std::size_t> region_sizes;

    for (std::size_t t = 0; t < chain.visit_count(); ++t) {
        const bltqr::SelectionMap sel =
            a.method == "mdev"
                ? bltqr::mdev_bands(chain, t, a.alpha, mask.empty() ? nullptr : &mask)
                : bltqr::pointwise_bands(chain, t, a.alpha, mask.empty() ? nullptr : &mask);
        const std::string vtag = "_v" + std::to_string(t + 1) + ".btq";
        bltqr::write_tensor(out / ("estimate" + vtag), sel.estimate);
        bltqr::write_tensor(out / ("band_lower" + vtag), sel.lower);
        bltqr::write_tensor(out / ("band_upper" + vtag), sel.upper);
        bltqr::DenseTensor selected(chain.manifest.image_dims);
        for (std::size_t c = 0; c < sel.selected.size(); ++c)
            selected[c] = static_cast<double>(sel.selected[c]);
        bltqr::write_tensor(out / ("selected" + vtag), selected);
        counts.push_back({std::to_string(t + 1), std::to_string(sel.selected_count()),
                          std::to_string(sel.selected.size())});

        if (!labels.empty()) {
            for (std::size_t c = 0; c < sel.selected.size(); ++c) {
                const long long lab = static_cast<long long>(labels[c]);
                auto& per_visit = region_counts[lab];
                per_visit.resize(chain.visit_count(), 0);
                if (sel.selected[c]) ++per_visit[t];
                if (t == 0) ++region_sizes[lab];
            }
        }
    }
    bltqr::write_tsv(out / "selection.tsv", {"visit", "selected", "total"}, counts);

    if (!labels.empty()) {
        std::vector<std::string> header{"region", "size"};
        for (std::size_t t = 0; t < chain.visit_count(); ++t)
            header.push_back("selected_v" + std::to_string(t + 1));
        std::vector<std::vector<std::string>> rows;
        for (const auto& [lab, per_visit] : region_counts) {
            std::vector<std::string> row{std::to_string(lab), std::to_string(region_sizes[lab])};
            for (std::size_t v : per_visit) row.push_back(std::to_string(v));
            rows.push_back(std::move(row));
        }
        bltqr::write_tsv(out / "regions.tsv", header, rows);
    }

    bltqr::write_json(out / "config.json", json{{"command", "summarize"},
                                                {"chain", a.chain},
                                                {"alpha", a.alpha},
                                                {"method", a.method},
                                                {"labels", a.labels}});
    std::cout << "summarize: wrote selection maps for " << chain.visit_count() << " visits to "
              << out.string() << "\n";
    return 0;
}

// --- predict -------------------------------------------------------------------

struct PredictArgs {
    std::string chain;
    std::string data;
    std::string out;
};

int run_predict(const PredictArgs& a) {
    const bltqr::ChainOutput chain = bltqr::read_chain(a.chain);
    const bltqr::Dataset data = bltqr::read_dataset(a.data);
    const std::vector<double> pred = bltqr::predict_quantile(chain, data);
    const double q = chain.manifest.hyper.quantile;

    std::vector<std::vector<std::string>> rows;
    std::vector<double> loss_by_visit(data.n_visits, 0.0);
    std::vector<std::size_t> n_by_visit(data.n_visits, 0);
    double total_loss = 0.0;
    for (std::size_t m = 0; m < data.records.size(); ++m) {
        const auto& rec = data.records[m];
        const double loss = bltqr::check_loss(rec.outcome, pred[m], q);
        total_loss += loss;
        loss_by_visit[rec.visit] += loss;
        ++n_by_visit[rec.visit];
        rows.push_back({std::to_string(rec.subject), std::to_string(rec.visit + 1),
                        fmt(rec.time), fmt(rec.outcome), fmt(pred[m]), fmt(loss)});
    }

    const fs::path out(a.out);
    fs::create_directories(out);
    bltqr::write_tsv(out / "predictions.tsv",
                     {"subject", "visit", "time", "outcome", "predicted", "check_loss"}, rows);

    std::vector<std::vector<std::string>> summary;
    for (std::size_t t = 0; t < data.n_visits; ++t) {
        const double mean =
            n_by_visit[t] ? loss_by_visit[t] / static_cast<double>(n_by_visit[t]) : 0.0;
        summary.push_back({std::to_string(t + 1), std::to_string(n_by_visit[t]), fmt(mean)});
    }
    summary.push_back({"all", std::to_string(data.records.size()),
                       fmt(data.records.empty()
                               ? 0.0
                               : total_loss / static_cast<double>(data.records.size()))});
    bltqr::write_tsv(out / "summary.tsv", {"visit", "n", "mean_check_loss"}, summary);

    bltqr::write_json(out / "config.json",
                      json{{"command", "predict"}, {"chain", a.chain}, {"data", a.data}});
    std::cout << "predict: mean check loss "
              << fmt(total_loss / static_cast<double>(data.records.size())) << " over "
              << data.records.size() << " records\n";
    return 0;
}

// --- diagnose --------------------------------------------------------------------

struct DiagnoseArgs {
    std::string chain;
    std::string data; // optional override of the manifest's data path
};

int run_diagnose(const DiagnoseArgs& a) {
    const bltqr::ChainOutput chain = bltqr::read_chain(a.chain);
    const bltqr::GewekeResult gw = bltqr::geweke(chain);

    std::string data_dir = a.data.empty() ? chain.manifest.data_dir : a.data;
    if (data_dir.empty())
        throw std::runtime_error("no dataset available for DIC: pass --data");
    const bltqr::Dataset data = bltqr::read_dataset(data_dir);
    const double dic_value = bltqr::dic(chain, data);

    std::cout << "geweke_pass_fraction\t" << fmt(gw.pass_fraction) << "\n";
    std::cout << "geweke_params\t" << gw.z.size() << "\n";
    std::cout << "dic\t" << fmt(dic_value) << "\n";
    return 0;
}

// --- evaluate ---------------------------------------------------------------------

struct EvaluateArgs {
    std::string est;   // summarize output directory
    std::string truth; // simulate output directory
    std::string out;   // optional
};

int run_evaluate(const EvaluateArgs& a) {
    const fs::path est(a.est), truth(a.truth);
    std::vector<std::vector<std::string>> rows;
    std::cout << "visit\tre\trmse\tcorr\tsensitivity\tspecificity\tf1\tmcc\n";
    for (std::size_t t = 1;; ++t) {
        const fs::path est_file = est / ("estimate_v" + std::to_string(t) + ".btq");
        const fs::path truth_file = truth / ("truth_v" + std::to_string(t) + ".btq");
        if (!fs::exists(est_file) || !fs::exists(truth_file)) {
            if (t == 1) throw std::runtime_error("no matching estimate_v*/truth_v* tensor pairs");
            break;
        }
        const bltqr::DenseTensor e = bltqr::read_tensor(est_file);
        const bltqr::DenseTensor g = bltqr::read_tensor(truth_file);
        const double re = bltqr::relative_error(e, g);
        const double rm = bltqr::rmse(e, g);
        const double co = bltqr::correlation(e, g);

        const fs::path sel_file = est / ("selected_v" + std::to_string(t) + ".btq");
        bltqr::SelectionScores sc;
        bool have_sel = fs::exists(sel_file);
        if (have_sel) {
            const bltqr::DenseTensor sel = bltqr::read_tensor(sel_file);
            std::vector<std::uint8_t> selected(sel.size());
            for (std::size_t c = 0; c < sel.size(); ++c) selected[c] = sel[c] != 0.0 ? 1 : 0;
            sc = bltqr::selection_metrics(selected, bltqr::support_mask(g));
        }
        std::vector<std::string> row{std::to_string(t), fmt(re), fmt(rm), fmt(co)};
        if (have_sel) {
            row.push_back(fmt(sc.sensitivity));
            row.push_back(fmt(sc.specificity));
            row.push_back(fmt(sc.f1));
            row.push_back(fmt(sc.mcc));
        } else {
            row.insert(row.end(), {"nan", "nan", "nan", "nan"});
        }
        for (std::size_t c = 0; c < row.size(); ++c) std::cout << (c ? "\t" : "") << row[c];
        std::cout << "\n";
        rows.push_back(std::move(row));
    }
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        bltqr::write_tsv(fs::path(a.out) / "metrics.tsv",
                         {"visit", "re", "rmse", "corr", "sensitivity", "specificity", "f1", "mcc"},
                         rows);
        bltqr::write_json(fs::path(a.out) / "config.json",
                          json{{"command", "evaluate"}, {"est", a.est}, {"truth", a.truth}});
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian longitudinal tensor quantile regression"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* csim = app.add_subcommand("simulate", "Generate a synthetic longitudinal dataset");
    csim->add_option("--scenario", sim.scenario, "Scenario id (1-5)")->check(CLI::Range(1, 5));
    csim->add_option("--dims", sim.dims, "Image dims, e.g. 48x48 or 30x30x30");
    csim->add_option("--n-train", sim.n_train, "Training subjects per visit");
    csim->add_option("--n-test", sim.n_test, "Test subjects per visit");
    csim->add_option("--q", sim.quantile, "Quantile level of the ALD noise");
    csim->add_option("--seed", sim.seed, "RNG seed");
    csim->add_flag("--misspecified", sim.misspecified, "Use standard normal noise");
    csim->add_option("--out", sim.out, "Output directory")->required();

    FitArgs fit;
    auto* cfit = app.add_subcommand("fit", "Run the MCMC sampler on a dataset");
    cfit->add_option("--data", fit.data, "Dataset directory")->required();
    cfit->add_option("--q", fit.quantile, "Quantile level");
    cfit->add_option("--rank-b0", fit.rank_shared, "CP rank of the visit-invariant effect");
    cfit->add_option("--rank-bt", fit.rank_visit, "CP rank of the visit-specific effects");
    cfit->add_option("--iters", fit.iters, "Total MCMC iterations");
    cfit->add_option("--burnin", fit.burnin, "Burn-in iterations");
    cfit->add_option("--thin", fit.thin, "Thinning interval");
    cfit->add_option("--seed", fit.seed, "RNG seed");
    cfit->add_option("--variant", fit.variant, "Model variant: bltqr, csb1 or csb2");
    cfit->add_option("--mask", fit.mask, "Voxel mask tensor (.btq); zeros are ignored voxels");
    cfit->add_option("--out", fit.out, "Chain archive directory")->required();

    SummarizeArgs sum;
    auto* csum = app.add_subcommand("summarize", "Point estimates and selection maps");
    csum->add_option("--chain", sum.chain, "Chain archive directory")->required();
    csum->add_option("--alpha", sum.alpha, "Band level alpha");
    csum->add_option("--method", sum.method, "mdev or pointwise");
    csum->add_option("--labels", sum.labels, "Region label map (.btq) for per-region counts");
    csum->add_option("--out", sum.out, "Output directory")->required();

    PredictArgs pre;
    auto* cpre = app.add_subcommand("predict", "Quantile predictions for new records");
    cpre->add_option("--chain", pre.chain, "Chain archive directory")->required();
    cpre->add_option("--data", pre.data, "Dataset directory to predict")->required();
    cpre->add_option("--out", pre.out, "Output directory")->required();

    DiagnoseArgs dia;
    auto* cdia = app.add_subcommand("diagnose", "Geweke pass fraction and DIC");
    cdia->add_option("--chain", dia.chain, "Chain archive directory")->required();
    cdia->add_option("--data", dia.data, "Dataset directory (defaults to the fit's)");

    EvaluateArgs eva;
    auto* ceva = app.add_subcommand("evaluate", "Estimation and selection metrics vs a truth");
    ceva->add_option("--est", eva.est, "Summarize output directory")->required();
    ceva->add_option("--truth", eva.truth, "Simulate output directory")->required();
    ceva->add_option("--out", eva.out, "Optional output directory");

    try {
        app.parse(argc, argv);
        if (csim->parsed()) return run_simulate(sim);
        if (cfit->parsed()) return run_fit(fit);
        if (csum->parsed()) return run_summarize(sum);
        if (cpre->parsed()) return run_predict(pre);
        if (cdia->parsed()) return run_diagnose(dia);
        if (ceva->parsed()) return run_evaluate(eva);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "bltqr: error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
