#pragma once

// Factor-to-variable messages for CP factors without expanding the table:
//
//   m_{a->i} = W_i [ hadamard_{j != i} (W_j^T m_{j->a}) ]
//
// Outputs are unnormalized; callers normalize.

#include <span>
#include <string>

#include "lrbp/tensor.hpp"

namespace lrbp {

namespace detail {

template <typename Scalar>
void check_incoming(const CPFactor<Scalar>& f, std::span<const Vec<Scalar>> incoming, Index skip) {
    if (static_cast<Index>(incoming.size()) != f.arity()) {
        throw ShapeError("expected " + std::to_string(f.arity()) + " incoming messages, got " +
                         std::to_string(incoming.size()));
    }
    for (Index j = 0; j < f.arity(); ++j) {
        if (j == skip) continue;
        if (incoming[static_cast<std::size_t>(j)].size() != f.cardinality()) {
            throw ShapeError("incoming message " + std::to_string(j) + " has length " +
                             std::to_string(incoming[static_cast<std::size_t>(j)].size()) + ", expected " +
                             std::to_string(f.cardinality()));
        }
    }
}

}  // namespace detail

// Single target slot. The Hadamard product runs over j != target in
// ascending slot order; an arity-1 factor yields W_target * 1.
template <typename Scalar>
Vec<Scalar> lowrank_message(const CPFactor<Scalar>& f, std::span<const Vec<Scalar>> incoming, Index target) {
    if (target < 0 || target >= f.arity()) {
        throw ShapeError("target slot " + std::to_string(target) + " out of range for arity " +
                         std::to_string(f.arity()));
    }
    detail::check_incoming(f, incoming, target);
    Vec<Scalar> acc = Vec<Scalar>::Ones(f.rank());
    for (Index j = 0; j < f.arity(); ++j) {
        if (j == target) continue;
        acc.array() *= (f.weight(j).transpose() * incoming[static_cast<std::size_t>(j)]).array();
    }
    return f.weight(target) * acc;
}

// Scratch buffers reused across sweeps so the timed kernel does not allocate.
template <typename Scalar>
struct LowRankWorkspace {
    Mat<Scalar> gamma;   // R x n, column j = W_j^T m_j
    Mat<Scalar> prefix;  // R x (n+1), column j = prod_{l<j} gamma_l
    Mat<Scalar> suffix;  // R x (n+1), column j = prod_{l>=j} gamma_l
    Vec<Scalar> loo;     // leave-one-out product

    void resize(Index rank, Index arity) {
        if (gamma.rows() != rank || gamma.cols() != arity) {
            gamma.resize(rank, arity);
            prefix.resize(rank, arity + 1);
            suffix.resize(rank, arity + 1);
            loo.resize(rank);
        }
    }
};

// All outgoing messages of one factor. Prefix/suffix products give every
// leave-one-out Hadamard product without division, so a full sweep costs
// O(arity * d * R). `out` must hold arity vectors; they are resized here.
template <typename Scalar>
void lowrank_sweep(const CPFactor<Scalar>& f, std::span<const Vec<Scalar>> incoming, std::span<Vec<Scalar>> out,
                   LowRankWorkspace<Scalar>& ws) {
    detail::check_incoming(f, incoming, -1);
    const Index n = f.arity();
    if (static_cast<Index>(out.size()) != n) {
        throw ShapeError("sweep output needs " + std::to_string(n) + " slots");
    }
    ws.resize(f.rank(), n);
    for (Index j = 0; j < n; ++j) {
        ws.gamma.col(j).noalias() = f.weight(j).transpose() * incoming[static_cast<std::size_t>(j)];
    }
    ws.prefix.col(0).setOnes();
    for (Index j = 0; j < n; ++j) {
        ws.prefix.col(j + 1) = ws.prefix.col(j).cwiseProduct(ws.gamma.col(j));
    }
    ws.suffix.col(n).setOnes();
    for (Index j = n; j-- > 0;) {
        ws.suffix.col(j) = ws.gamma.col(j).cwiseProduct(ws.suffix.col(j + 1));
    }
    for (Index i = 0; i < n; ++i) {
        ws.loo = ws.prefix.col(i).cwiseProduct(ws.suffix.col(i + 1));
        auto& dst = out[static_cast<std::size_t>(i)];
        dst.resize(f.cardinality());
        dst.noalias() = f.weight(i) * ws.loo;
    }
}

}  // namespace lrbp
