#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "chain.hpp"
#include "data.hpp"
#include "model.hpp"
#include "tensor.hpp"

namespace bltqr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Number formatting: shortest representation that parses back to the exact
// same double, so text tables round-trip value-exactly and outputs are
// byte-deterministic for a fixed seed.

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("malformed number '" + std::string(s) + "'");
    return v;
}

inline std::size_t parse_size(std::string_view s) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("malformed integer '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// ---------------------------------------------------------------------------
// Tensor files (.btq): a short ASCII header followed by raw little-endian
// 64-bit floats, row-major, `count` tensors back to back. Round trips are
// bit-exact.

struct TensorStack {
    std::vector<std::size_t> dims;
    std::size_t count = 0;
    std::vector<double> payload; // count * prod(dims)

    std::size_t cells() const {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }
};

namespace detail {

inline void payload_to_little_endian(std::vector<double>& v) {
    if constexpr (std::endian::native == std::endian::big) {
        for (double& d : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            bits = __builtin_bswap64(bits);
            std::memcpy(&d, &bits, 8);
        }
    } else {
        (void)v;
    }
}

} // namespace detail

inline void write_tensor_stack(const fs::path& path, const TensorStack& stack) {
    if (stack.payload.size() != stack.count * stack.cells())
        throw std::invalid_argument("write_tensor_stack: payload length mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << "BTQ1\n";
    out << "dims";
    for (std::size_t d : stack.dims) out << ' ' << d;
    out << "\ncount " << stack.count << "\ndtype f64\nendian little\nend\n";
    std::vector<double> payload = stack.payload;
    detail::payload_to_little_endian(payload);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

inline TensorStack read_tensor_stack(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != "BTQ1")
        throw std::runtime_error("'" + path.string() + "': missing BTQ1 magic");
    TensorStack stack;
    bool have_dims = false, have_count = false;
    while (std::getline(in, line)) {
        if (line == "end") break;
        std::istringstream fields(line);
        std::string key;
        fields >> key;
        if (key == "dims") {
            std::size_t d;
            while (fields >> d) stack.dims.push_back(d);
            have_dims = !stack.dims.empty();
        } else if (key == "count") {
            fields >> stack.count;
            have_count = true;
        } else if (key == "dtype") {
            std::string v;
            fields >> v;
            if (v != "f64") throw std::runtime_error("'" + path.string() + "': unsupported dtype " + v);
        } else if (key == "endian") {
            std::string v;
            fields >> v;
            if (v != "little")
                throw std::runtime_error("'" + path.string() + "': unsupported endianness " + v);
        } else {
            throw std::runtime_error("'" + path.string() + "': unknown header field '" + key + "'");
        }
    }
    if (!have_dims || !have_count)
        throw std::runtime_error("'" + path.string() + "': incomplete header");
    const std::size_t expect = stack.count * stack.cells();
    const std::streamoff header_end = in.tellg();
    in.seekg(0, std::ios::end);
    const std::streamoff file_end = in.tellg();
    const std::size_t actual_bytes = static_cast<std::size_t>(file_end - header_end);
    if (actual_bytes != expect * sizeof(double))
        throw std::runtime_error("'" + path.string() + "': expected " +
                                 std::to_string(expect * sizeof(double)) + " payload bytes, found " +
                                 std::to_string(actual_bytes));
    in.seekg(header_end);
    stack.payload.resize(expect);
    in.read(reinterpret_cast<char*>(stack.payload.data()),
            static_cast<std::streamsize>(expect * sizeof(double)));
    if (!in) throw std::runtime_error("short read from '" + path.string() + "'");
    detail::payload_to_little_endian(stack.payload);
    return stack;
}

inline void write_tensor(const fs::path& path, const DenseTensor& t) {
    TensorStack stack{t.dims(), 1, t.values()};
    write_tensor_stack(path, stack);
}

inline DenseTensor read_tensor(const fs::path& path) {
    TensorStack stack = read_tensor_stack(path);
    if (stack.count != 1)
        throw std::runtime_error("'" + path.string() + "': expected a single tensor, found " +
                                 std::to_string(stack.count));
    return DenseTensor(stack.dims, std::move(stack.payload));
}

/// Nonzero cells of a stored tensor as a 0/1 mask.
inline std::vector<std::uint8_t> read_mask(const fs::path& path) {
    const TensorStack stack = read_tensor_stack(path);
    if (stack.count != 1) throw std::runtime_error("mask file must hold a single tensor");
    std::vector<std::uint8_t> mask(stack.payload.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = stack.payload[i] != 0.0 ? 1 : 0;
    return mask;
}

// ---------------------------------------------------------------------------
// Plain TSV tables.

inline void write_tsv(const fs::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "\t" : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "\t" : "") << row[c];
        out << '\n';
    }
    if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    json j;
    in >> j;
    return j;
}

// ---------------------------------------------------------------------------
// Dataset directory:
//   dataset.json    counts and dims
//   records.tsv     subject, visit (1-based in files), outcome, time
//   images.btq      one image per record, records.tsv order
//   covariates.tsv  one row per subject (only when covariates exist)

inline void write_dataset(const fs::path& dir, const Dataset& data) {
    data.validate();
    fs::create_directories(dir);
    json meta{{"n_subjects", data.n_subjects},
              {"n_visits", data.n_visits},
              {"image_dims", data.image_dims},
              {"n_covariates", data.n_covariates()},
              {"n_records", data.records.size()}};
    write_json(dir / "dataset.json", meta);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(data.records.size());
    TensorStack images;
    images.dims = data.image_dims;
    images.count = data.records.size();
    images.payload.reserve(images.count * images.cells());
    for (const auto& rec : data.records) {
        rows.push_back({std::to_string(rec.subject), std::to_string(rec.visit + 1),
                        format_double(rec.outcome), format_double(rec.time)});
        images.payload.insert(images.payload.end(), rec.image.values().begin(),
                              rec.image.values().end());
    }
    write_tsv(dir / "records.tsv", {"subject", "visit", "outcome", "time"}, rows);
    write_tensor_stack(dir / "images.btq", images);

    if (data.n_covariates() > 0) {
        std::vector<std::string> header{"subject"};
        for (std::size_t k = 0; k < data.n_covariates(); ++k)
            header.push_back("z" + std::to_string(k + 1));
        std::vector<std::vector<std::string>> zrows;
        for (std::size_t i = 0; i < data.n_subjects; ++i) {
            std::vector<std::string> row{std::to_string(i)};
            for (double v : data.covariates[i]) row.push_back(format_double(v));
            zrows.push_back(std::move(row));
        }
        write_tsv(dir / "covariates.tsv", header, zrows);
    }
}

inline Dataset read_dataset(const fs::path& dir) {
    const json meta = read_json(dir / "dataset.json");
    Dataset data;
    data.n_subjects = meta.at("n_subjects").get<std::size_t>();
    data.n_visits = meta.at("n_visits").get<std::size_t>();
    data.image_dims = meta.at("image_dims").get<std::vector<std::size_t>>();
    const std::size_t n_cov = meta.at("n_covariates").get<std::size_t>();
    const std::size_t n_records = meta.at("n_records").get<std::size_t>();

    TensorStack images = read_tensor_stack(dir / "images.btq");
    if (images.dims != data.image_dims || images.count != n_records)
        throw std::runtime_error("images.btq does not match dataset.json");
    const std::size_t cells = images.cells();

    std::ifstream in(dir / "records.tsv");
    if (!in) throw std::runtime_error("cannot open '" + (dir / "records.tsv").string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != "subject\tvisit\toutcome\ttime")
        throw std::runtime_error("records.tsv: unexpected header");
    data.records.reserve(n_records);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 4) throw std::runtime_error("records.tsv: expected 4 columns");
        VisitRecord rec;
        rec.subject = parse_size(f[0]);
        const std::size_t visit1 = parse_size(f[1]);
        if (visit1 == 0) throw std::runtime_error("records.tsv: visit ids are 1-based");
        rec.visit = visit1 - 1;
        rec.outcome = parse_double(f[2]);
        rec.time = parse_double(f[3]);
        const std::size_t m = data.records.size();
        if (m >= n_records) throw std::runtime_error("records.tsv: more rows than dataset.json lists");
        rec.image = DenseTensor(
            data.image_dims,
            std::vector<double>(images.payload.begin() + static_cast<std::ptrdiff_t>(m * cells),
                                images.payload.begin() + static_cast<std::ptrdiff_t>((m + 1) * cells)));
        data.records.push_back(std::move(rec));
    }
    if (data.records.size() != n_records)
        throw std::runtime_error("records.tsv: fewer rows than dataset.json lists");

    if (n_cov > 0) {
        std::ifstream zin(dir / "covariates.tsv");
        if (!zin) throw std::runtime_error("cannot open covariates.tsv");
        std::getline(zin, line); // header
        data.covariates.assign(data.n_subjects, std::vector<double>(n_cov, 0.0));
        while (std::getline(zin, line)) {
            if (line.empty()) continue;
            const auto f = split_tabs(line);
            if (f.size() != n_cov + 1) throw std::runtime_error("covariates.tsv: column mismatch");
            const std::size_t subj = parse_size(f[0]);
            if (subj >= data.n_subjects) throw std::runtime_error("covariates.tsv: bad subject id");
            for (std::size_t k = 0; k < n_cov; ++k) data.covariates[subj][k] = parse_double(f[k + 1]);
        }
    }
    data.validate();
    return data;
}

// ---------------------------------------------------------------------------
// Chain archives:
//   manifest.json            config, hyperparameters, dims (deterministic)
//   coef_v{t}.btq            stored coefficient draws per visit
//   scalars.tsv              draw, sigma, intercept, slope
//   subject_intercepts.tsv   draw, one column per training subject
//   covariate_coefs.tsv      draw, one column per covariate (when present)
//   include_v{t}.btq         inclusion flags (when the variant has them)
//   mask.btq                 fitted voxel mask (when supplied)
//   timing.json              wall-clock metadata; not reproducible by design

namespace detail {

inline json hyper_to_json(const Hyperparams& h) {
    return json{{"quantile", h.quantile},
                {"rank_shared", h.rank_shared},
                {"rank_visit", h.rank_visit},
                {"dirichlet_weight", h.dirichlet_weight},
                {"dirichlet_weight_visit", h.dirichlet_weight_visit},
                {"a_lambda", h.a_lambda},
                {"b_lambda", h.b_lambda},
                {"a_tau", h.a_tau},
                {"b_tau", h.b_tau},
                {"b_tau_visit", h.b_tau_visit},
                {"a_zeta", h.a_zeta},
                {"b_zeta", h.b_zeta},
                {"spike", h.spike},
                {"sigma_prior_shape", h.sigma_prior_shape},
                {"sigma_prior_scale", h.sigma_prior_scale},
                {"subject_intercept_var", h.subject_intercept_var},
                {"slope_var", h.slope_var},
                {"covariate_var", h.covariate_var}};
}

inline Hyperparams hyper_from_json(const json& j) {
    Hyperparams h;
    h.quantile = j.at("quantile").get<double>();
    h.rank_shared = j.at("rank_shared").get<std::size_t>();
    h.rank_visit = j.at("rank_visit").get<std::size_t>();
    h.dirichlet_weight = j.at("dirichlet_weight").get<std::vector<double>>();
    h.dirichlet_weight_visit = j.at("dirichlet_weight_visit").get<std::vector<double>>();
    h.a_lambda = j.at("a_lambda").get<double>();
    h.b_lambda = j.at("b_lambda").get<double>();
    h.a_tau = j.at("a_tau").get<double>();
    h.b_tau = j.at("b_tau").get<double>();
    h.b_tau_visit = j.at("b_tau_visit").get<double>();
    h.a_zeta = j.at("a_zeta").get<double>();
    h.b_zeta = j.at("b_zeta").get<double>();
    h.spike = j.at("spike").get<double>();
    h.sigma_prior_shape = j.at("sigma_prior_shape").get<double>();
    h.sigma_prior_scale = j.at("sigma_prior_scale").get<double>();
    h.subject_intercept_var = j.at("subject_intercept_var").get<double>();
    h.slope_var = j.at("slope_var").get<double>();
    h.covariate_var = j.at("covariate_var").get<double>();
    return h;
}

} // namespace detail

inline void write_chain(const fs::path& dir, const ChainOutput& chain) {
    fs::create_directories(dir);
    const ChainManifest& m = chain.manifest;
    json manifest{{"format", "bltqr-chain-1"},
                  {"version", m.version},
                  {"variant", to_string(m.config.variant)},
                  {"seed", m.config.seed},
                  {"iterations", m.config.iterations},
                  {"burn_in", m.config.burn_in},
                  {"thin", m.config.thin},
                  {"hyper", detail::hyper_to_json(m.hyper)},
                  {"image_dims", m.image_dims},
                  {"n_visits", m.n_visits},
                  {"n_subjects", m.n_subjects},
                  {"n_covariates", m.n_covariates},
                  {"data_dir", m.data_dir},
                  {"masked", m.masked},
                  {"stored_draws", chain.draw_count()}};
    write_json(dir / "manifest.json", manifest);
    write_json(dir / "timing.json", json{{"fit_seconds", m.fit_seconds}});

    const std::size_t k_draws = chain.draw_count();
    for (std::size_t t = 0; t < chain.visit_count(); ++t) {
        TensorStack stack;
        stack.dims = m.image_dims;
        stack.count = k_draws;
        stack.payload.reserve(k_draws * chain.cell_count());
        for (const auto& draw : chain.coef_draws[t])
            stack.payload.insert(stack.payload.end(), draw.begin(), draw.end());
        write_tensor_stack(dir / ("coef_v" + std::to_string(t + 1) + ".btq"), stack);
    }
    for (std::size_t t = 0; t < chain.include_draws.size(); ++t) {
        const auto& flags = chain.include_draws[t];
        TensorStack stack;
        stack.dims = {flags.empty() ? 1 : flags.front().size(), 1};
        stack.count = k_draws;
        stack.payload.reserve(k_draws * stack.cells());
        for (const auto& draw : flags)
            for (std::uint8_t f : draw) stack.payload.push_back(static_cast<double>(f));
        write_tensor_stack(dir / ("include_v" + std::to_string(t + 1) + ".btq"), stack);
    }

    std::vector<std::vector<std::string>> rows;
    rows.reserve(k_draws);
    for (std::size_t k = 0; k < k_draws; ++k)
        rows.push_back({std::to_string(k), format_double(chain.sigma_draws[k]),
                        format_double(chain.intercept_draws[k]),
                        format_double(chain.slope_draws[k])});
    write_tsv(dir / "scalars.tsv", {"draw", "sigma", "intercept", "slope"}, rows);

    {
        std::vector<std::string> header{"draw"};
        for (std::size_t i = 0; i < m.n_subjects; ++i) header.push_back("s" + std::to_string(i));
        std::vector<std::vector<std::string>> srows;
        srows.reserve(k_draws);
        for (std::size_t k = 0; k < k_draws; ++k) {
            std::vector<std::string> row{std::to_string(k)};
            for (double v : chain.subject_intercept_draws[k]) row.push_back(format_double(v));
            srows.push_back(std::move(row));
        }
        write_tsv(dir / "subject_intercepts.tsv", header, srows);
    }

    if (m.n_covariates > 0) {
        std::vector<std::string> header{"draw"};
        for (std::size_t c = 0; c < m.n_covariates; ++c)
            header.push_back("eta" + std::to_string(c + 1));
        std::vector<std::vector<std::string>> crows;
        for (std::size_t k = 0; k < k_draws; ++k) {
            std::vector<std::string> row{std::to_string(k)};
            for (double v : chain.covariate_draws[k]) row.push_back(format_double(v));
            crows.push_back(std::move(row));
        }
        write_tsv(dir / "covariate_coefs.tsv", header, crows);
    }
}

inline ChainOutput read_chain(const fs::path& dir) {
    const json manifest = read_json(dir / "manifest.json");
    if (manifest.at("format").get<std::string>() != "bltqr-chain-1")
        throw std::runtime_error("'" + dir.string() + "': not a chain archive");
    ChainOutput chain;
    ChainManifest& m = chain.manifest;
    m.version = manifest.at("version").get<std::string>();
    m.config.variant = parse_variant(manifest.at("variant").get<std::string>());
    m.config.seed = manifest.at("seed").get<std::uint64_t>();
    m.config.iterations = manifest.at("iterations").get<std::size_t>();
    m.config.burn_in = manifest.at("burn_in").get<std::size_t>();
    m.config.thin = manifest.at("thin").get<std::size_t>();
    m.hyper = detail::hyper_from_json(manifest.at("hyper"));
    m.image_dims = manifest.at("image_dims").get<std::vector<std::size_t>>();
    m.n_visits = manifest.at("n_visits").get<std::size_t>();
    m.n_subjects = manifest.at("n_subjects").get<std::size_t>();
    m.n_covariates = manifest.at("n_covariates").get<std::size_t>();
    m.data_dir = manifest.at("data_dir").get<std::string>();
    m.masked = manifest.at("masked").get<bool>();
    const std::size_t k_draws = manifest.at("stored_draws").get<std::size_t>();

    chain.coef_draws.resize(m.n_visits);
    const std::size_t cells = chain.cell_count();
    for (std::size_t t = 0; t < m.n_visits; ++t) {
        TensorStack stack = read_tensor_stack(dir / ("coef_v" + std::to_string(t + 1) + ".btq"));
        if (stack.dims != m.image_dims || stack.count != k_draws)
            throw std::runtime_error("coef stack does not match the manifest");
        chain.coef_draws[t].resize(k_draws);
        for (std::size_t k = 0; k < k_draws; ++k)
            chain.coef_draws[t][k].assign(
                stack.payload.begin() + static_cast<std::ptrdiff_t>(k * cells),
                stack.payload.begin() + static_cast<std::ptrdiff_t>((k + 1) * cells));
    }

    if (m.config.variant != ModelVariant::SharedOnly) {
        chain.include_draws.resize(m.n_visits);
        for (std::size_t t = 0; t < m.n_visits; ++t) {
            TensorStack stack =
                read_tensor_stack(dir / ("include_v" + std::to_string(t + 1) + ".btq"));
            const std::size_t flat = stack.cells();
            chain.include_draws[t].resize(stack.count);
            for (std::size_t k = 0; k < stack.count; ++k) {
                chain.include_draws[t][k].resize(flat);
                for (std::size_t c = 0; c < flat; ++c)
                    chain.include_draws[t][k][c] =
                        stack.payload[k * flat + c] != 0.0 ? 1 : 0;
            }
        }
    }

    {
        std::ifstream in(dir / "scalars.tsv");
        if (!in) throw std::runtime_error("cannot open scalars.tsv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = split_tabs(line);
            if (f.size() != 4) throw std::runtime_error("scalars.tsv: expected 4 columns");
            chain.sigma_draws.push_back(parse_double(f[1]));
            chain.intercept_draws.push_back(parse_double(f[2]));
            chain.slope_draws.push_back(parse_double(f[3]));
        }
        if (chain.sigma_draws.size() != k_draws)
            throw std::runtime_error("scalars.tsv: row count does not match the manifest");
    }
    {
        std::ifstream in(dir / "subject_intercepts.tsv");
        if (!in) throw std::runtime_error("cannot open subject_intercepts.tsv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = split_tabs(line);
            if (f.size() != m.n_subjects + 1)
                throw std::runtime_error("subject_intercepts.tsv: column mismatch");
            std::vector<double> row(m.n_subjects);
            for (std::size_t i = 0; i < m.n_subjects; ++i) row[i] = parse_double(f[i + 1]);
            chain.subject_intercept_draws.push_back(std::move(row));
        }
    }
    if (m.n_covariates > 0) {
        std::ifstream in(dir / "covariate_coefs.tsv");
        if (!in) throw std::runtime_error("cannot open covariate_coefs.tsv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = split_tabs(line);
            if (f.size() != m.n_covariates + 1)
                throw std::runtime_error("covariate_coefs.tsv: column mismatch");
            std::vector<double> row(m.n_covariates);
            for (std::size_t c = 0; c < m.n_covariates; ++c) row[c] = parse_double(f[c + 1]);
            chain.covariate_draws.push_back(std::move(row));
        }
    }
    return chain;
}

} // namespace bltqr
