#pragma once

// Sum-product loopy belief propagation on a FactorGraph.
//
// Messages are stored per edge (see FactorGraph::edge). Dense factors use
// direct marginalization; low-rank factors use the CP message kernel, whose
// cost is linear in the factor arity.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lrbp/factor_graph.hpp"

namespace lrbp {

struct MessageState {
    std::vector<Vector> var_to_factor;  // m_{i->a}, indexed by edge
    std::vector<Vector> factor_to_var;  // m_{a->i}, indexed by edge

    const Vector& to_factor(const FactorGraph& g, int i, int a) const;
    const Vector& to_var(const FactorGraph& g, int a, int i) const;
};

// gamma[edge] = W_slot^T m_{i->a} for every low-rank edge; empty for dense.
struct GammaCache {
    std::vector<Vector> gamma;
};

struct BeliefSet {
    std::vector<Vector> beliefs;
    bool converged = false;
    int iterations = 0;
    double final_delta = std::numeric_limits<double>::infinity();
    std::size_t sign_warnings = 0;
};

enum class Schedule { Flooding };

struct LbpOptions {
    int max_iters = 200;
    double tol = 1e-8;
    double damping = 0.0;  // new <- (1 - damping) new + damping old, on factor-to-variable messages
    Schedule schedule = Schedule::Flooding;
    int workers = 1;
    std::int64_t capacity = -1;  // expansion cap for dense fallbacks; -1 reads capacity_limit()
    std::function<void(int iteration, double max_delta)> trace;
    std::function<void(const std::string&)> warn;
};

// Counts low-rank outputs with entries below -1e-12 before normalization.
struct Diagnostics {
    std::size_t sign_violations = 0;
};

// Position of variable i within the scope of factor a.
int slot_of(const FactorGraph& g, int a, int i);

MessageState init_messages(const FactorGraph& g);

Vector var_to_factor_update(const MessageState& state, const FactorGraph& g, int i, int a);
Vector factor_to_var_dense(const FactorGraph& g, const MessageState& state, int a, int i,
                           std::int64_t cap = -1);
Vector factor_to_var_lowrank(const FactorGraph& g, const MessageState& state, int a, int i,
                             Diagnostics* diag = nullptr);

GammaCache compute_gammas(const FactorGraph& g, const MessageState& state);

// Normalized b_i = f_i * prod_{a in N(i)} m_{a->i}.
std::vector<Vector> compute_beliefs(const FactorGraph& g, const MessageState& state);

BeliefSet run_lbp(const FactorGraph& g, const LbpOptions& opts = {});
BeliefSet run_lbp(const FactorGraph& g, const LbpOptions& opts, MessageState initial);

// Marginals by summing the joint table.
BeliefSet exact_marginals(const FactorGraph& g, std::int64_t cap = -1);

// Copy of g with every low-rank payload replaced by its dense expansion.
FactorGraph expand_to_dense(const FactorGraph& g, std::int64_t cap = -1);

}  // namespace lrbp
