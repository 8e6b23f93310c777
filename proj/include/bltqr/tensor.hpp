#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bltqr {

/// Dense D-way numeric array, row-major flat storage. Orders 2 and 3 are
/// supported; other orders are rejected.
class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(std::vector<std::size_t> dims)
        : dims_(std::move(dims)), data_(checked_size(dims_), 0.0) {
        init_strides();
    }

    DenseTensor(std::vector<std::size_t> dims, std::vector<double> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        if (data_.size() != checked_size(dims_))
            throw std::invalid_argument("DenseTensor: data length " + std::to_string(data_.size()) +
                                        " does not match dims product " +
                                        std::to_string(checked_size(dims_)));
        init_strides();
    }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t order() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t stride(std::size_t j) const { return strides_[j]; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * strides_[0] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * strides_[0] + j]; }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[i * strides_[0] + j * strides_[1] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[i * strides_[0] + j * strides_[1] + k];
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& dims) {
        if (dims.size() != 2 && dims.size() != 3)
            throw std::invalid_argument("DenseTensor: order " + std::to_string(dims.size()) +
                                        " not supported (only 2 and 3)");
        std::size_t n = 1;
        for (std::size_t d : dims) {
            if (d == 0) throw std::invalid_argument("DenseTensor: zero-length dimension");
            n *= d;
        }
        return n;
    }

    void init_strides() {
        strides_.assign(dims_.size(), 1);
        for (std::size_t j = dims_.size(); j-- > 1;)
            strides_[j - 1] = strides_[j] * dims_[j];
    }

    std::vector<std::size_t> dims_;
    std::vector<std::size_t> strides_;
    std::vector<double> data_;
};

/// Rank-R CP (PARAFAC) representation: one margin vector per mode per
/// component. margins(r, j) has length dims[j]. Materialization is a plain
/// sum of outer products and is bit-reproducible.
class ParafacCoef {
public:
    ParafacCoef() = default;

    ParafacCoef(std::size_t rank, std::vector<std::size_t> dims)
        : rank_(rank), dims_(std::move(dims)) {
        if (rank_ == 0) throw std::invalid_argument("ParafacCoef: rank must be positive");
        if (dims_.size() != 2 && dims_.size() != 3)
            throw std::invalid_argument("ParafacCoef: order " + std::to_string(dims_.size()) +
                                        " not supported (only 2 and 3)");
        margins_.resize(rank_);
        for (auto& comp : margins_) {
            comp.resize(dims_.size());
            for (std::size_t j = 0; j < dims_.size(); ++j) comp[j].assign(dims_[j], 0.0);
        }
    }

    std::size_t rank() const { return rank_; }
    std::size_t order() const { return dims_.size(); }
    const std::vector<std::size_t>& dims() const { return dims_; }

    std::vector<double>& margin(std::size_t r, std::size_t j) { return margins_.at(r).at(j); }
    const std::vector<double>& margin(std::size_t r, std::size_t j) const {
        return margins_.at(r).at(j);
    }

    void check() const {
        for (std::size_t r = 0; r < rank_; ++r)
            for (std::size_t j = 0; j < dims_.size(); ++j)
                if (margins_[r][j].size() != dims_[j])
                    throw std::invalid_argument("ParafacCoef: margin (" + std::to_string(r) + "," +
                                                std::to_string(j) + ") has length " +
                                                std::to_string(margins_[r][j].size()) +
                                                ", expected " + std::to_string(dims_[j]));
    }

private:
    std::size_t rank_ = 0;
    std::vector<std::size_t> dims_;
    std::vector<std::vector<std::vector<double>>> margins_; // [r][j][k]
};

/// Dense tensor from the CP representation: out[k1..kD] = sum_r prod_j margin(r,j)[kj].
inline DenseTensor materialize(const ParafacCoef& c) {
    c.check();
    DenseTensor out(c.dims());
    const auto& dims = c.dims();
    if (dims.size() == 2) {
        for (std::size_t r = 0; r < c.rank(); ++r) {
            const auto& m0 = c.margin(r, 0);
            const auto& m1 = c.margin(r, 1);
            double* row = out.data();
            for (std::size_t i = 0; i < dims[0]; ++i, row += dims[1]) {
                const double a = m0[i];
                for (std::size_t j = 0; j < dims[1]; ++j) row[j] += a * m1[j];
            }
        }
    } else {
        for (std::size_t r = 0; r < c.rank(); ++r) {
            const auto& m0 = c.margin(r, 0);
            const auto& m1 = c.margin(r, 1);
            const auto& m2 = c.margin(r, 2);
            double* cell = out.data();
            for (std::size_t i = 0; i < dims[0]; ++i) {
                for (std::size_t j = 0; j < dims[1]; ++j) {
                    const double ab = m0[i] * m1[j];
                    for (std::size_t k = 0; k < dims[2]; ++k) *cell++ += ab * m2[k];
                }
            }
        }
    }
    return out;
}

inline double inner_product(const DenseTensor& x, const DenseTensor& b) {
    if (x.dims() != b.dims())
        throw std::invalid_argument("inner_product: shape mismatch");
    const double* xs = x.data();
    const double* bs = b.data();
    double sum = 0.0;
    for (std::size_t i = 0, n = x.size(); i < n; ++i) sum += xs[i] * bs[i];
    return sum;
}

namespace detail {

/// Contraction of x against all margins of one rank-1 component except mode j.
/// The returned vector v satisfies <x, component r> = v . margin(r, j), which
/// makes the likelihood linear in that margin.
inline void design_vector_into(const DenseTensor& x,
                               const std::vector<const std::vector<double>*>& margins,
                               std::size_t j, std::vector<double>& v) {
    const auto& dims = x.dims();
    v.assign(dims[j], 0.0);
    if (dims.size() == 2) {
        const double* cell = x.data();
        if (j == 0) {
            const auto& m1 = *margins[1];
            for (std::size_t i = 0; i < dims[0]; ++i, cell += dims[1]) {
                double s = 0.0;
                for (std::size_t k = 0; k < dims[1]; ++k) s += cell[k] * m1[k];
                v[i] = s;
            }
        } else {
            const auto& m0 = *margins[0];
            for (std::size_t i = 0; i < dims[0]; ++i, cell += dims[1]) {
                const double a = m0[i];
                for (std::size_t k = 0; k < dims[1]; ++k) v[k] += a * cell[k];
            }
        }
        return;
    }
    const auto& m0 = *margins[0];
    const auto& m1 = *margins[1];
    const auto& m2 = *margins[2];
    const double* cell = x.data();
    if (j == 0) {
        for (std::size_t i = 0; i < dims[0]; ++i) {
            double si = 0.0;
            for (std::size_t k1 = 0; k1 < dims[1]; ++k1) {
                double s = 0.0;
                for (std::size_t k2 = 0; k2 < dims[2]; ++k2) s += cell[k2] * m2[k2];
                si += s * m1[k1];
                cell += dims[2];
            }
            v[i] = si;
        }
    } else if (j == 1) {
        for (std::size_t i = 0; i < dims[0]; ++i) {
            const double a = m0[i];
            for (std::size_t k1 = 0; k1 < dims[1]; ++k1) {
                double s = 0.0;
                for (std::size_t k2 = 0; k2 < dims[2]; ++k2) s += cell[k2] * m2[k2];
                v[k1] += a * s;
                cell += dims[2];
            }
        }
    } else {
        for (std::size_t i = 0; i < dims[0]; ++i) {
            for (std::size_t k1 = 0; k1 < dims[1]; ++k1) {
                const double ab = m0[i] * m1[k1];
                for (std::size_t k2 = 0; k2 < dims[2]; ++k2) v[k2] += ab * cell[k2];
                cell += dims[2];
            }
        }
    }
}

} // namespace detail

inline std::vector<double> margin_design_vector(const DenseTensor& x, const ParafacCoef& c,
                                                std::size_t r, std::size_t j) {
    if (r >= c.rank()) throw std::out_of_range("margin_design_vector: component index out of range");
    if (j >= c.order()) throw std::out_of_range("margin_design_vector: mode index out of range");
    if (x.dims() != c.dims())
        throw std::invalid_argument("margin_design_vector: tensor/coefficient shape mismatch");
    std::vector<const std::vector<double>*> margins(c.order());
    for (std::size_t l = 0; l < c.order(); ++l) margins[l] = &c.margin(r, l);
    std::vector<double> v;
    detail::design_vector_into(x, margins, j, v);
    return v;
}

} // namespace bltqr
