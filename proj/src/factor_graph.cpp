#include "lrbp/factor_graph.hpp"

#include <numeric>
#include <string>

namespace lrbp {

namespace {

std::string at_factor(std::size_t a) { return "factor " + std::to_string(a) + ": "; }

}  // namespace

std::string slot_key(const LowRankRef& ref, std::size_t k) {
    if (k < ref.slots.size()) return ref.slots[k];
    return ref.param_id + "/" + std::to_string(k);
}

FactorGraph FactorGraph::build(int num_vars, int cardinality, std::vector<FactorBinding> factors,
                               std::vector<Vector> unary, std::map<std::string, CPFactord> params) {
    if (num_vars < 1) throw ValidationError("graph needs at least one variable");
    if (cardinality < 2) throw ValidationError("cardinality must be >= 2");

    FactorGraph g;
    g.num_vars_ = num_vars;
    g.cardinality_ = cardinality;

    if (!unary.empty()) {
        if (static_cast<int>(unary.size()) != num_vars) {
            throw ShapeError("unary list has " + std::to_string(unary.size()) + " entries for " +
                             std::to_string(num_vars) + " variables");
        }
        for (std::size_t i = 0; i < unary.size(); ++i) {
            if (unary[i].size() != cardinality) {
                throw ShapeError("unary " + std::to_string(i) + " has length " + std::to_string(unary[i].size()));
            }
            if (!unary[i].allFinite() || (unary[i].array() < 0.0).any()) {
                throw ValidationError("unary " + std::to_string(i) + " must be finite and nonnegative");
            }
        }
    }

    for (const auto& [id, f] : params) {
        if (f.cardinality() != cardinality) {
            throw ShapeError("param '" + id + "' has cardinality " + std::to_string(f.cardinality()) +
                             ", graph has " + std::to_string(cardinality));
        }
    }

    g.var_adjacency_.assign(static_cast<std::size_t>(num_vars), {});
    g.edge_offset_.assign(1, 0);
    for (std::size_t a = 0; a < factors.size(); ++a) {
        const auto& b = factors[a];
        if (b.scope.empty()) throw ValidationError(at_factor(a) + "empty scope");
        std::vector<bool> seen(static_cast<std::size_t>(num_vars), false);
        for (int v : b.scope) {
            if (v < 0 || v >= num_vars) {
                throw ValidationError(at_factor(a) + "variable id " + std::to_string(v) + " out of range");
            }
            if (seen[static_cast<std::size_t>(v)]) {
                throw ValidationError(at_factor(a) + "duplicate variable " + std::to_string(v) + " in scope");
            }
            seen[static_cast<std::size_t>(v)] = true;
        }
        const auto arity = static_cast<Index>(b.scope.size());
        if (const auto* t = std::get_if<DenseTensord>(&b.payload)) {
            if (t->order() != arity || t->uniform_cardinality() != cardinality) {
                throw ShapeError(at_factor(a) + "dense payload shape does not match [d]^|scope|");
            }
        } else {
            const auto& ref = std::get<LowRankRef>(b.payload);
            const auto it = params.find(ref.param_id);
            if (it == params.end()) {
                throw ValidationError(at_factor(a) + "unknown param id '" + ref.param_id + "'");
            }
            if (it->second.arity() != arity) {
                throw ShapeError(at_factor(a) + "param '" + ref.param_id + "' has arity " +
                                 std::to_string(it->second.arity()) + ", scope has " + std::to_string(arity));
            }
            if (!ref.slots.empty() && static_cast<Index>(ref.slots.size()) != arity) {
                throw ShapeError(at_factor(a) + "slot list length does not match scope");
            }
        }
        for (std::size_t k = 0; k < b.scope.size(); ++k) {
            g.var_adjacency_[static_cast<std::size_t>(b.scope[k])].push_back(
                Incidence{static_cast<int>(a), static_cast<int>(k)});
        }
        g.edge_offset_.push_back(g.edge_offset_.back() + static_cast<int>(arity));
    }

    g.factors_ = std::move(factors);
    g.unary_ = std::move(unary);
    g.params_ = std::move(params);
    return g;
}

Vector FactorGraph::unary_or_ones(int i) const {
    if (unary_.empty()) return Vector::Ones(cardinality_);
    return unary_[static_cast<std::size_t>(i)];
}

std::vector<int> FactorGraph::neighbor_factors(int i) const {
    std::vector<int> out;
    for (const auto& inc : adjacency(i)) out.push_back(inc.factor);
    return out;
}

const CPFactord& FactorGraph::low_rank(int a) const {
    const auto* ref = std::get_if<LowRankRef>(&factor(a).payload);
    if (ref == nullptr) throw ValidationError(at_factor(static_cast<std::size_t>(a)) + "payload is not low-rank");
    return params_.at(ref->param_id);
}

DenseTensord FactorGraph::dense_payload(int a, std::int64_t cap) const {
    const auto& b = factor(a);
    if (const auto* t = std::get_if<DenseTensord>(&b.payload)) return *t;
    return cp_expand(low_rank(a), cap);
}

bool FactorGraph::is_forest() const {
    std::vector<int> parent(static_cast<std::size_t>(num_vars_ + num_factors()));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (int a = 0; a < num_factors(); ++a) {
        for (int v : factor(a).scope) {
            const int ra = find(num_vars_ + a);
            const int rv = find(v);
            if (ra == rv) return false;
            parent[static_cast<std::size_t>(ra)] = rv;
        }
    }
    return true;
}

JointTable joint_table(const FactorGraph& g, std::int64_t cap) {
    const int n = g.num_vars();
    const Index d = g.cardinality();
    std::vector<Index> shape(static_cast<std::size_t>(n), d);
    const auto numel = checked_power(d, n, cap);
    if (numel < 0) throw CapacityError("joint table of d^" + std::to_string(n) + " exceeds element cap " + std::to_string(cap));
    DenseTensord joint(shape, Vector::Ones(numel));

    std::vector<DenseTensord> tables;
    tables.reserve(static_cast<std::size_t>(g.num_factors()));
    for (int a = 0; a < g.num_factors(); ++a) tables.push_back(g.dense_payload(a, cap));

    std::vector<Index> x(static_cast<std::size_t>(n), 0);
    auto& data = joint.data();
    Index e = 0;
    do {
        double p = 1.0;
        if (g.has_unary()) {
            for (int i = 0; i < n; ++i) p *= g.unary()[static_cast<std::size_t>(i)][x[static_cast<std::size_t>(i)]];
        }
        for (int a = 0; a < g.num_factors(); ++a) {
            const auto& scope = g.factor(a).scope;
            const auto& t = tables[static_cast<std::size_t>(a)];
            Index off = 0;
            for (std::size_t k = 0; k < scope.size(); ++k) {
                off += x[static_cast<std::size_t>(scope[k])] * t.strides()[k];
            }
            p *= t.data()[off];
        }
        data[e++] = p;
    } while (detail::next_index(x, shape));

    const double z = data.sum();
    if (!(z > 0.0)) {
        throw ZeroMassError("joint distribution has total mass " + std::to_string(z));
    }
    return JointTable{std::move(joint), z};
}

JointTable joint_table(const FactorGraph& g) { return joint_table(g, capacity_limit()); }

}  // namespace lrbp
