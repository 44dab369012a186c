#pragma once

// Dense potential tables and CP-decomposed factors.
//
// A DenseTensor stores an order-m table in row-major order (last axis
// fastest). A CPFactor stores the same table as a sum of R rank-1 terms,
// one d x R matrix per scope slot; column r of slot j holds the r-th
// weight vector with its scale already folded in:
//
//   T(i_1, ..., i_m) = sum_r prod_j W_j(i_j, r)

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lrbp/capacity.hpp"
#include "lrbp/errors.hpp"

namespace lrbp {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

// Advances a row-major multi-index; returns false after the last entry.
inline bool next_index(std::vector<Index>& idx, std::span<const Index> shape) {
    for (std::size_t k = idx.size(); k-- > 0;) {
        if (++idx[k] < shape[k]) {
            return true;
        }
        idx[k] = 0;
    }
    return false;
}

inline std::int64_t checked_numel(std::span<const Index> shape, std::int64_t cap) {
    std::int64_t n = 1;
    for (Index s : shape) {
        if (s < 1) {
            throw ShapeError("tensor axis cardinality must be >= 1, got " + std::to_string(s));
        }
        if (n > cap / s) {
            throw CapacityError("tensor with " + std::to_string(shape.size()) +
                                " axes exceeds element cap " + std::to_string(cap));
        }
        n *= s;
    }
    return n;
}

}  // namespace detail

template <typename Scalar>
class DenseTensor {
public:
    DenseTensor() = default;

    DenseTensor(std::vector<Index> shape, Vec<Scalar> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_.empty()) {
            throw ShapeError("tensor shape must be non-empty");
        }
        const auto n = detail::checked_numel(shape_, std::numeric_limits<std::int64_t>::max());
        if (data_.size() != n) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape product " + std::to_string(n));
        }
        strides_.assign(shape_.size(), 1);
        for (std::size_t k = shape_.size() - 1; k-- > 0;) {
            strides_[k] = strides_[k + 1] * shape_[k + 1];
        }
    }

    static DenseTensor zeros(std::vector<Index> shape) {
        const auto n = detail::checked_numel(shape, capacity_limit());
        return DenseTensor(std::move(shape), Vec<Scalar>::Zero(n));
    }

    static DenseTensor constant(std::vector<Index> shape, Scalar value) {
        const auto n = detail::checked_numel(shape, capacity_limit());
        return DenseTensor(std::move(shape), Vec<Scalar>::Constant(n, value));
    }

    Index order() const { return static_cast<Index>(shape_.size()); }
    Index size() const { return data_.size(); }
    const std::vector<Index>& shape() const { return shape_; }
    const std::vector<Index>& strides() const { return strides_; }
    const Vec<Scalar>& data() const { return data_; }
    Vec<Scalar>& data() { return data_; }

    // Uniform cardinality if all axes agree, otherwise -1.
    Index uniform_cardinality() const {
        for (Index s : shape_) {
            if (s != shape_.front()) return -1;
        }
        return shape_.front();
    }

    Index offset(std::span<const Index> idx) const {
        Index off = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) off += idx[k] * strides_[k];
        return off;
    }

    Scalar operator()(std::span<const Index> idx) const { return data_[offset(idx)]; }
    Scalar& operator()(std::span<const Index> idx) { return data_[offset(idx)]; }

    Scalar total() const { return data_.sum(); }

private:
    std::vector<Index> shape_;
    std::vector<Index> strides_;
    Vec<Scalar> data_;
};

template <typename Scalar>
class CPFactor {
public:
    CPFactor() = default;

    explicit CPFactor(std::vector<Mat<Scalar>> weights) : weights_(std::move(weights)) {
        if (weights_.empty()) {
            throw ValidationError("CP factor needs arity >= 1");
        }
        const Index d = weights_.front().rows();
        const Index r = weights_.front().cols();
        if (d < 2) throw ValidationError("CP factor cardinality must be >= 2");
        if (r < 1) throw ValidationError("CP factor rank must be >= 1");
        for (std::size_t j = 0; j < weights_.size(); ++j) {
            if (weights_[j].rows() != d || weights_[j].cols() != r) {
                throw ShapeError("CP weight matrix " + std::to_string(j) + " is " +
                                 std::to_string(weights_[j].rows()) + "x" +
                                 std::to_string(weights_[j].cols()) + ", expected " +
                                 std::to_string(d) + "x" + std::to_string(r));
            }
        }
    }

    Index arity() const { return static_cast<Index>(weights_.size()); }
    Index cardinality() const { return weights_.front().rows(); }
    Index rank() const { return weights_.front().cols(); }

    const Mat<Scalar>& weight(Index slot) const { return weights_[static_cast<std::size_t>(slot)]; }
    const std::vector<Mat<Scalar>>& weights() const { return weights_; }

    bool nonnegative() const {
        for (const auto& w : weights_) {
            if ((w.array() < Scalar(0)).any()) return false;
        }
        return true;
    }

    friend bool operator==(const CPFactor& a, const CPFactor& b) {
        if (a.weights_.size() != b.weights_.size()) return false;
        for (std::size_t j = 0; j < a.weights_.size(); ++j) {
            if (a.weights_[j].rows() != b.weights_[j].rows() ||
                a.weights_[j].cols() != b.weights_[j].cols() || a.weights_[j] != b.weights_[j]) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<Mat<Scalar>> weights_;
};

using DenseTensord = DenseTensor<double>;
using CPFactord = CPFactor<double>;

// Expands a CP factor into its full [d]^arity table. Prefix products over
// the leading slots are cached so each entry costs O(R) amortized.
template <typename Scalar>
DenseTensor<Scalar> cp_expand(const CPFactor<Scalar>& f, std::int64_t cap = capacity_limit()) {
    const Index m = f.arity();
    const Index d = f.cardinality();
    const Index r = f.rank();
    std::vector<Index> shape(static_cast<std::size_t>(m), d);
    const auto n = detail::checked_numel(shape, cap);

    Vec<Scalar> out(n);
    // prefix.col(k) = prod_{j<=k} W_j(idx_j, :)
    Mat<Scalar> prefix(r, m);
    std::vector<Index> idx(static_cast<std::size_t>(m), 0);
    Index dirty = 0;
    for (Index e = 0; e < n; ++e) {
        for (Index k = dirty; k < m; ++k) {
            const auto row = f.weight(k).row(idx[static_cast<std::size_t>(k)]).transpose();
            if (k == 0) {
                prefix.col(0) = row;
            } else {
                prefix.col(k) = prefix.col(k - 1).cwiseProduct(row);
            }
        }
        out[e] = prefix.col(m - 1).sum();

        // Find the leftmost axis that changes on increment.
        Index k = m - 1;
        while (k >= 0) {
            if (++idx[static_cast<std::size_t>(k)] < d) break;
            idx[static_cast<std::size_t>(k)] = 0;
            --k;
        }
        dirty = k < 0 ? 0 : k;
    }
    return DenseTensor<Scalar>(std::move(shape), std::move(out));
}

// Seeded CP factor with i.i.d. entries uniform on [0, scale].
inline CPFactord cp_random(Index arity, Index d, Index rank, std::uint64_t seed, double scale = 1.0) {
    if (arity < 1) throw ValidationError("cp_random: arity must be >= 1");
    if (d < 2) throw ValidationError("cp_random: cardinality must be >= 2");
    if (rank < 1) throw ValidationError("cp_random: rank must be >= 1");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("cp_random: scale must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, scale);
    std::vector<Mat<double>> w(static_cast<std::size_t>(arity), Mat<double>(d, rank));
    for (auto& mtx : w) {
        for (Index c = 0; c < rank; ++c) {
            for (Index i = 0; i < d; ++i) mtx(i, c) = unif(rng);
        }
    }
    return CPFactord(std::move(w));
}

// Dense factor-to-variable contraction:
//   out(x_keep) = sum_{X \ x_keep} T(X) prod_{j != keep} incoming_j(x_j)
// `incoming` holds one vector per axis; the entry at `keep` is ignored and
// may be empty.
template <typename Scalar>
Vec<Scalar> marginalize_product(const DenseTensor<Scalar>& t, std::span<const Vec<Scalar>> incoming,
                                Index keep) {
    const Index m = t.order();
    if (keep < 0 || keep >= m) {
        throw ShapeError("keep axis " + std::to_string(keep) + " out of range for order " + std::to_string(m));
    }
    if (static_cast<Index>(incoming.size()) != m) {
        throw ShapeError("expected " + std::to_string(m) + " incoming vectors, got " +
                         std::to_string(incoming.size()));
    }
    const auto& shape = t.shape();
    for (Index j = 0; j < m; ++j) {
        if (j == keep) continue;
        if (incoming[static_cast<std::size_t>(j)].size() != shape[static_cast<std::size_t>(j)]) {
            throw ShapeError("incoming vector " + std::to_string(j) + " has length " +
                             std::to_string(incoming[static_cast<std::size_t>(j)].size()) + ", axis has " +
                             std::to_string(shape[static_cast<std::size_t>(j)]));
        }
    }

    Vec<Scalar> out = Vec<Scalar>::Zero(shape[static_cast<std::size_t>(keep)]);
    std::vector<Index> idx(static_cast<std::size_t>(m), 0);
    const auto& data = t.data();
    Index e = 0;
    do {
        Scalar w = data[e++];
        for (Index j = 0; j < m; ++j) {
            if (j != keep) w *= incoming[static_cast<std::size_t>(j)][idx[static_cast<std::size_t>(j)]];
        }
        out[idx[static_cast<std::size_t>(keep)]] += w;
    } while (detail::next_index(idx, shape));
    return out;
}

template <typename Scalar>
struct CPFitResult {
    CPFactor<Scalar> factor;
    Scalar relative_error{};
    // Ridge-regularized least-squares objective after init and after each sweep.
    std::vector<Scalar> objective;
    int iterations = 0;
};

inline constexpr double kAlsRidge = 1e-9;

namespace detail {

// Residual sum of squares ||T - [[W]]||^2 by direct enumeration.
template <typename Scalar>
Scalar cp_residual_sq(const DenseTensor<Scalar>& t, const std::vector<Mat<Scalar>>& w) {
    const auto& shape = t.shape();
    const Index m = t.order();
    const Index r = w.front().cols();
    std::vector<Index> idx(static_cast<std::size_t>(m), 0);
    Vec<Scalar> prod(r);
    Scalar acc = 0;
    Index e = 0;
    do {
        prod.setOnes();
        for (Index j = 0; j < m; ++j) {
            prod.array() *= w[static_cast<std::size_t>(j)].row(idx[static_cast<std::size_t>(j)]).transpose().array();
        }
        const Scalar diff = t.data()[e++] - prod.sum();
        acc += diff * diff;
    } while (next_index(idx, shape));
    return acc;
}

template <typename Scalar>
Scalar cp_objective(const DenseTensor<Scalar>& t, const std::vector<Mat<Scalar>>& w, Scalar ridge) {
    Scalar reg = 0;
    for (const auto& m : w) reg += m.squaredNorm();
    return cp_residual_sq(t, w) + ridge * reg;
}

}  // namespace detail

// Alternating least squares CP fit. Each sweep solves one slot exactly
// against the ridge-regularized normal equations
//   W_k (V + ridge I) = MTTKRP_k,  V = hadamard_{j != k} W_j^T W_j,
// so the regularized objective is non-increasing. Stops once the relative
// error drops below tol or a sweep lowers the objective by less than
// tol^2 * ||T||^2.
template <typename Scalar>
CPFitResult<Scalar> cp_fit_als(const DenseTensor<Scalar>& t, Index rank, int max_iters, Scalar tol,
                               std::uint64_t seed = 0) {
    const Index d = t.uniform_cardinality();
    if (d < 0) throw UnsupportedError("cp_fit_als: tensor axes must share one cardinality");
    if (d < 2) throw UnsupportedError("cp_fit_als: cardinality must be >= 2");
    if (rank < 1) throw ValidationError("cp_fit_als: rank must be >= 1");
    if (max_iters < 0) throw ValidationError("cp_fit_als: max_iters must be >= 0");

    const Index m = t.order();
    const auto& shape = t.shape();
    const Scalar ridge = static_cast<Scalar>(kAlsRidge);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Mat<Scalar>> w(static_cast<std::size_t>(m), Mat<Scalar>(d, rank));
    for (auto& mtx : w) {
        for (Index c = 0; c < rank; ++c) {
            for (Index i = 0; i < d; ++i) mtx(i, c) = static_cast<Scalar>(unif(rng));
        }
    }

    const Scalar norm_sq = t.data().squaredNorm();
    CPFitResult<Scalar> result;
    result.objective.push_back(detail::cp_objective(t, w, ridge));

    std::vector<Index> idx(static_cast<std::size_t>(m));
    Vec<Scalar> prod(rank);
    Mat<Scalar> mttkrp(d, rank);
    for (int it = 0; it < max_iters; ++it) {
        for (Index k = 0; k < m; ++k) {
            mttkrp.setZero();
            std::fill(idx.begin(), idx.end(), 0);
            Index e = 0;
            do {
                prod.setConstant(t.data()[e++]);
                for (Index j = 0; j < m; ++j) {
                    if (j == k) continue;
                    prod.array() *=
                        w[static_cast<std::size_t>(j)].row(idx[static_cast<std::size_t>(j)]).transpose().array();
                }
                mttkrp.row(idx[static_cast<std::size_t>(k)]) += prod.transpose();
            } while (detail::next_index(idx, shape));

            Mat<Scalar> gram = Mat<Scalar>::Ones(rank, rank);
            for (Index j = 0; j < m; ++j) {
                if (j == k) continue;
                const auto& wj = w[static_cast<std::size_t>(j)];
                gram.array() *= (wj.transpose() * wj).array();
            }
            gram.diagonal().array() += ridge;
            w[static_cast<std::size_t>(k)] = gram.ldlt().solve(mttkrp.transpose()).transpose();
        }
        const Scalar obj = detail::cp_objective(t, w, ridge);
        const Scalar prev = result.objective.back();
        result.objective.push_back(obj);
        result.iterations = it + 1;
        const Scalar rel = norm_sq > 0 ? std::sqrt(detail::cp_residual_sq(t, w) / norm_sq) : Scalar(0);
        if (rel < tol || prev - obj <= tol * tol * norm_sq) break;
    }

    result.factor = CPFactor<Scalar>(std::move(w));
    // Relative error recomputed from the explicit expansion.
    const auto fitted = cp_expand(result.factor);
    result.relative_error =
        norm_sq > 0 ? (fitted.data() - t.data()).norm() / std::sqrt(norm_sq) : fitted.data().norm();
    return result;
}

}  // namespace lrbp
