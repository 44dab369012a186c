#include "lrbp/neural.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

namespace lrbp {

namespace {

using Param = std::tuple<std::string, double*, Index>;
using ConstParam = std::tuple<std::string, const double*, Index>;

void fill_uniform(Eigen::Ref<Matrix> m, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (Index c = 0; c < m.cols(); ++c) {
        for (Index r = 0; r < m.rows(); ++r) m(r, c) = unif(rng);
    }
}

std::string factor_tag(int a) { return "factor " + std::to_string(a) + ": "; }

// Resolved slot weights for every scope position of a low-rank factor.
std::vector<const SlotWeights*> resolve_slots(const FactorGraph& g, const LayerParams& p, int a) {
    const auto* ref = std::get_if<LowRankRef>(&g.factor(a).payload);
    if (ref == nullptr) throw ValidationError(factor_tag(a) + "neural layer requires low-rank payloads");
    std::vector<const SlotWeights*> out;
    for (std::size_t k = 0; k < g.factor(a).scope.size(); ++k) {
        const auto key = slot_key(*ref, k);
        const auto it = p.slots.find(key);
        if (it == p.slots.end()) throw ValidationError(factor_tag(a) + "unmapped slot id '" + key + "'");
        out.push_back(&it->second);
    }
    return out;
}

// Leave-one-out Hadamard products of the columns of gamma (R x n).
Matrix leave_one_out(const Matrix& gamma) {
    const Index r = gamma.rows();
    const Index n = gamma.cols();
    Matrix prefix(r, n + 1);
    Matrix suffix(r, n + 1);
    prefix.col(0).setOnes();
    for (Index j = 0; j < n; ++j) prefix.col(j + 1) = prefix.col(j).cwiseProduct(gamma.col(j));
    suffix.col(n).setOnes();
    for (Index j = n; j-- > 0;) suffix.col(j) = gamma.col(j).cwiseProduct(suffix.col(j + 1));
    Matrix loo(r, n);
    for (Index i = 0; i < n; ++i) loo.col(i) = prefix.col(i).cwiseProduct(suffix.col(i + 1));
    return loo;
}

std::vector<Param> collect(LayerParams& p) {
    std::vector<Param> out;
    p.visit([&](const std::string& name, double* data, Index n) { out.emplace_back(name, data, n); });
    return out;
}

std::vector<ConstParam> collect(const Model& m) {
    std::vector<ConstParam> out;
    m.visit([&](const std::string& name, const double* data, Index n) { out.emplace_back(name, data, n); });
    return out;
}

Matrix stacked_preactivations(const std::vector<LayerTape>& tapes) {
    Index total = 0;
    for (const auto& t : tapes) total += t.z1.size();
    Matrix z(total, 1);
    Index off = 0;
    for (const auto& t : tapes) {
        z.block(off, 0, t.z1.size(), 1) = Eigen::Map<const Vector>(t.z1.data(), t.z1.size());
        off += t.z1.size();
    }
    return z;
}

double sum_squares_loss(const Matrix& h) { return h.squaredNorm(); }

bool straddles_kink(const Matrix& base, const Matrix& moved, double eps) {
    for (Index k = 0; k < base.size(); ++k) {
        const double z0 = base(k);
        const double z = moved(k);
        if ((z0 > 0.0) != (z > 0.0)) return true;
        if (std::abs(z0) < 10.0 * eps && z != z0) return true;
    }
    return false;
}

double sorted_mean(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

Vector node_mean(const Eigen::Ref<const Matrix>& h) {
    if (h.cols() == 0) throw ValidationError("readout of an empty node set");
    if (!h.allFinite()) throw NonFiniteError("readout: non-finite node state");
    Vector mean(h.rows());
    std::vector<double> buf(static_cast<std::size_t>(h.cols()));
    for (Index r = 0; r < h.rows(); ++r) {
        for (Index c = 0; c < h.cols(); ++c) buf[static_cast<std::size_t>(c)] = h(r, c);
        mean[r] = sorted_mean(buf);
    }
    return mean;
}

}  // namespace

LayerParams LayerParams::init(const std::vector<std::string>& slot_keys, int d_h, int rank, std::uint64_t seed,
                              int mlp_width) {
    if (d_h < 1 || rank < 1) throw ValidationError("layer needs d_h >= 1 and rank >= 1");
    if (mlp_width < 0) mlp_width = 2 * d_h;
    if (mlp_width < 1) throw ValidationError("MLP width must be >= 1");
    LayerParams p;
    p.d_h = d_h;
    p.rank = rank;
    std::mt19937_64 rng(seed);
    const double wb = 1.0 / std::sqrt(static_cast<double>(rank));
    for (const auto& key : std::set<std::string>(slot_keys.begin(), slot_keys.end())) {
        SlotWeights s{Matrix(d_h, rank), Matrix(d_h, rank)};
        fill_uniform(s.w_in, wb, rng);
        fill_uniform(s.w_out, wb, rng);
        p.slots.emplace(key, std::move(s));
    }
    const double b1 = 1.0 / std::sqrt(static_cast<double>(d_h));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(mlp_width));
    p.mlp.w1.resize(mlp_width, d_h);
    p.mlp.b1.resize(mlp_width);
    p.mlp.w2.resize(d_h, mlp_width);
    p.mlp.b2.resize(d_h);
    fill_uniform(p.mlp.w1, b1, rng);
    fill_uniform(p.mlp.b1, b1, rng);
    fill_uniform(p.mlp.w2, b2, rng);
    fill_uniform(p.mlp.b2, b2, rng);
    return p;
}

LayerParams LayerParams::zeros_like() const {
    LayerParams z = *this;
    z.visit([](const std::string&, double* data, Index n) { std::fill(data, data + n, 0.0); });
    return z;
}

void LayerParams::visit(const std::function<void(const std::string&, double*, Index)>& fn) {
    for (auto& [key, s] : slots) {
        fn("slot[" + key + "].w_in", s.w_in.data(), s.w_in.size());
        fn("slot[" + key + "].w_out", s.w_out.data(), s.w_out.size());
    }
    fn("mlp.w1", mlp.w1.data(), mlp.w1.size());
    fn("mlp.b1", mlp.b1.data(), mlp.b1.size());
    fn("mlp.w2", mlp.w2.data(), mlp.w2.size());
    fn("mlp.b2", mlp.b2.data(), mlp.b2.size());
}

void LayerParams::visit(const std::function<void(const std::string&, const double*, Index)>& fn) const {
    const_cast<LayerParams*>(this)->visit(
        [&](const std::string& name, double* data, Index n) { fn(name, static_cast<const double*>(data), n); });
}

void LayerParams::add(const LayerParams& other) {
    for (const auto& [key, s] : other.slots) {
        auto it = slots.find(key);
        if (it == slots.end()) throw ShapeError("gradient for unknown slot '" + key + "'");
        it->second.w_in += s.w_in;
        it->second.w_out += s.w_out;
    }
    mlp.w1 += other.mlp.w1;
    mlp.b1 += other.mlp.b1;
    mlp.w2 += other.mlp.w2;
    mlp.b2 += other.mlp.b2;
}

std::vector<std::string> graph_slot_keys(const FactorGraph& g) {
    std::set<std::string> keys;
    for (const auto& b : g.factors()) {
        if (const auto* ref = std::get_if<LowRankRef>(&b.payload)) {
            for (std::size_t k = 0; k < b.scope.size(); ++k) keys.insert(slot_key(*ref, k));
        }
    }
    return {keys.begin(), keys.end()};
}

ForwardResult lrbp_forward(const HiddenStates& h, const FactorGraph& g, const LayerParams& p) {
    const Index n = g.num_vars();
    if (h.h.rows() != p.d_h || h.h.cols() != n) {
        throw ShapeError("hidden states are " + std::to_string(h.h.rows()) + "x" + std::to_string(h.h.cols()) +
                         ", expected " + std::to_string(p.d_h) + "x" + std::to_string(n));
    }
    if (!h.h.allFinite()) throw NonFiniteError("input hidden states contain non-finite entries");

    ForwardResult res;
    auto& tape = res.tape;
    tape.graph = &g;
    tape.params = &p;
    tape.h_in = h.h;
    tape.msg = Matrix::Zero(p.d_h, n);
    tape.gamma.resize(static_cast<std::size_t>(g.num_factors()));
    tape.loo.resize(static_cast<std::size_t>(g.num_factors()));

    for (int a = 0; a < g.num_factors(); ++a) {
        const auto slots = resolve_slots(g, p, a);
        const auto& scope = g.factor(a).scope;
        const auto m = static_cast<Index>(scope.size());
        Matrix gamma(p.rank, m);
        for (Index k = 0; k < m; ++k) {
            gamma.col(k).noalias() = slots[static_cast<std::size_t>(k)]->w_in.transpose() * h.h.col(scope[static_cast<std::size_t>(k)]);
        }
        Matrix loo = leave_one_out(gamma);
        if (!loo.allFinite() || !gamma.allFinite()) {
            throw NonFiniteError(factor_tag(a) + "non-finite Hadamard product");
        }
        for (Index i = 0; i < m; ++i) {
            tape.msg.col(scope[static_cast<std::size_t>(i)]).noalias() += slots[static_cast<std::size_t>(i)]->w_out * loo.col(i);
        }
        tape.gamma[static_cast<std::size_t>(a)] = std::move(gamma);
        tape.loo[static_cast<std::size_t>(a)] = std::move(loo);
    }
    for (Index i = 0; i < n; ++i) {
        if (!tape.msg.col(i).allFinite()) throw NonFiniteError("node " + std::to_string(i) + ": non-finite message");
    }

    tape.z1 = p.mlp.w1 * tape.msg;
    tape.z1.colwise() += p.mlp.b1;
    tape.a1 = tape.z1.cwiseMax(0.0);
    Matrix out = p.mlp.w2 * tape.a1;
    out.colwise() += p.mlp.b2;
    res.out.h = h.h + out;
    res.out.t = h.t + 1;
    for (Index i = 0; i < n; ++i) {
        if (!res.out.h.col(i).allFinite()) throw NonFiniteError("node " + std::to_string(i) + ": non-finite output state");
    }
    return res;
}

GradientBundle lrbp_backward(const LayerTape& tape, const Matrix& upstream) {
    if (tape.graph == nullptr || tape.params == nullptr) throw ValidationError("empty tape");
    const auto& g = *tape.graph;
    const auto& p = *tape.params;
    if (upstream.rows() != tape.h_in.rows() || upstream.cols() != tape.h_in.cols()) {
        throw ShapeError("upstream gradient is " + std::to_string(upstream.rows()) + "x" +
                         std::to_string(upstream.cols()) + ", expected " + std::to_string(tape.h_in.rows()) + "x" +
                         std::to_string(tape.h_in.cols()));
    }

    GradientBundle gb;
    gb.params = p.zeros_like();
    gb.d_input = upstream;  // residual path

    // MLP
    gb.params.mlp.w2.noalias() = upstream * tape.a1.transpose();
    gb.params.mlp.b2 = upstream.rowwise().sum();
    Matrix dz1 = p.mlp.w2.transpose() * upstream;
    dz1.array() *= (tape.z1.array() > 0.0).cast<double>();
    gb.params.mlp.w1.noalias() = dz1 * tape.msg.transpose();
    gb.params.mlp.b1 = dz1.rowwise().sum();
    const Matrix dmsg = p.mlp.w1.transpose() * dz1;

    // Low-rank factor messages
    const Index r = p.rank;
    for (int a = 0; a < g.num_factors(); ++a) {
        const auto slots = resolve_slots(g, p, a);
        const auto* ref = std::get_if<LowRankRef>(&g.factor(a).payload);
        const auto& scope = g.factor(a).scope;
        const auto m = static_cast<Index>(scope.size());
        const auto& gamma = tape.gamma[static_cast<std::size_t>(a)];
        const auto& loo = tape.loo[static_cast<std::size_t>(a)];

        Matrix u(r, m);
        for (Index i = 0; i < m; ++i) {
            const auto node = scope[static_cast<std::size_t>(i)];
            u.col(i).noalias() = slots[static_cast<std::size_t>(i)]->w_out.transpose() * dmsg.col(node);
            gb.params.slots.at(slot_key(*ref, static_cast<std::size_t>(i))).w_out.noalias() +=
                dmsg.col(node) * loo.col(i).transpose();
        }

        // d gamma_k = sum_{i != k} u_i * prod_{l not in {i,k}} gamma_l, via
        // running one-hole sums from both ends (no division).
        Matrix prefix(r, m + 1);
        Matrix suffix(r, m + 1);
        prefix.col(0).setOnes();
        for (Index j = 0; j < m; ++j) prefix.col(j + 1) = prefix.col(j).cwiseProduct(gamma.col(j));
        suffix.col(m).setOnes();
        for (Index j = m; j-- > 0;) suffix.col(j) = gamma.col(j).cwiseProduct(suffix.col(j + 1));
        Matrix left(r, m);
        Matrix right(r, m);
        left.col(0).setZero();
        for (Index k = 0; k + 1 < m; ++k) {
            left.col(k + 1) = left.col(k).cwiseProduct(gamma.col(k)) + u.col(k).cwiseProduct(prefix.col(k));
        }
        right.col(m - 1).setZero();
        for (Index k = m - 1; k > 0; --k) {
            right.col(k - 1) = right.col(k).cwiseProduct(gamma.col(k)) + u.col(k).cwiseProduct(suffix.col(k + 1));
        }
        for (Index k = 0; k < m; ++k) {
            const Vector dgamma =
                left.col(k).cwiseProduct(suffix.col(k + 1)) + prefix.col(k).cwiseProduct(right.col(k));
            const auto node = scope[static_cast<std::size_t>(k)];
            gb.params.slots.at(slot_key(*ref, static_cast<std::size_t>(k))).w_in.noalias() +=
                tape.h_in.col(node) * dgamma.transpose();
            gb.d_input.col(node).noalias() += slots[static_cast<std::size_t>(k)]->w_in * dgamma;
        }
    }
    return gb;
}

StackResult lrbp_forward_stack(const HiddenStates& h0, const FactorGraph& g, const LayerParams& p, int layers) {
    if (layers < 0) throw ValidationError("layer count must be >= 0");
    StackResult res;
    res.out = h0;
    for (int t = 0; t < layers; ++t) {
        auto step = lrbp_forward(res.out, g, p);
        res.out = std::move(step.out);
        res.tapes.push_back(std::move(step.tape));
    }
    return res;
}

GradientBundle lrbp_backward_stack(const std::vector<LayerTape>& tapes, const Matrix& upstream) {
    if (tapes.empty()) throw ValidationError("backward through an empty stack");
    GradientBundle total;
    total.params = tapes.front().params->zeros_like();
    Matrix g = upstream;
    for (std::size_t t = tapes.size(); t-- > 0;) {
        auto step = lrbp_backward(tapes[t], g);
        total.params.add(step.params);
        g = std::move(step.d_input);
    }
    total.d_input = std::move(g);
    return total;
}

GradCheckReport grad_check(const FactorGraph& g, const LayerParams& p, std::uint64_t seed, double eps, int layers) {
    std::mt19937_64 rng(seed);
    Matrix h0(p.d_h, g.num_vars());
    fill_uniform(h0, 1.0, rng);
    return grad_check(g, p, h0, eps, layers);
}

GradCheckReport grad_check(const FactorGraph& g, const LayerParams& p, const Matrix& h0, double eps, int layers) {
    if (!(eps > 0.0)) throw ValidationError("eps must be positive");
    if (layers < 1) throw ValidationError("grad_check needs at least one layer");
    LayerParams work = p;
    HiddenStates hs{h0, 0};

    const auto base = lrbp_forward_stack(hs, g, work, layers);
    const auto analytic = lrbp_backward_stack(base.tapes, 2.0 * base.out.h);
    const Matrix z_base = stacked_preactivations(base.tapes);
    const double floor = 1e-8;

    GradCheckReport rep;
    auto probe = [&](const std::string& name, double* value, double analytic_grad, Index idx) {
        const double saved = *value;
        *value = saved + eps;
        const auto plus = lrbp_forward_stack(hs, g, work, layers);
        *value = saved - eps;
        const auto minus = lrbp_forward_stack(hs, g, work, layers);
        *value = saved;
        if (straddles_kink(z_base, stacked_preactivations(plus.tapes), eps) ||
            straddles_kink(z_base, stacked_preactivations(minus.tapes), eps)) {
            ++rep.excluded;
            return;
        }
        const double numeric = (sum_squares_loss(plus.out.h) - sum_squares_loss(minus.out.h)) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic_grad), std::abs(numeric), floor});
        const double err = std::abs(analytic_grad - numeric) / denom;
        ++rep.compared;
        if (rep.worst.empty() || err > rep.max_rel_error) {
            rep.max_rel_error = err;
            rep.worst = name + "[" + std::to_string(idx) + "]";
        }
    };

    auto params = collect(work);
    LayerParams grad_params = analytic.params;
    const auto grads = collect(grad_params);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& [name, data, n] = params[k];
        const double* gdata = std::get<1>(grads[k]);
        for (Index e = 0; e < n; ++e) probe(name, data + e, gdata[e], e);
    }
    for (Index e = 0; e < hs.h.size(); ++e) probe("input", hs.h.data() + e, analytic.d_input.data()[e], e);
    return rep;
}

Readout Readout::init(int d_h, int out_dim, std::uint64_t seed) {
    if (d_h < 1 || out_dim < 1) throw ValidationError("readout needs positive dimensions");
    std::mt19937_64 rng(seed);
    Readout r{Matrix(out_dim, d_h), Vector(out_dim)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_h));
    fill_uniform(r.w, bound, rng);
    fill_uniform(r.b, bound, rng);
    return r;
}

Vector readout(const HiddenStates& h, const Readout& r) {
    if (r.w.cols() != h.h.rows()) throw ShapeError("readout width does not match state dimension");
    return r.w * node_mean(h.h) + r.b;
}

std::vector<Vector> readout_batch(const Matrix& h, std::span<const Index> offsets, const Readout& r) {
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != h.cols()) {
        throw ShapeError("batch offsets must run from 0 to the node count");
    }
    std::vector<Vector> out;
    for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
        if (offsets[k + 1] < offsets[k]) throw ShapeError("batch offsets must be non-decreasing");
        const auto block = h.middleCols(offsets[k], offsets[k + 1] - offsets[k]);
        if (r.w.cols() != block.rows()) throw ShapeError("readout width does not match state dimension");
        out.push_back(r.w * node_mean(block) + r.b);
    }
    return out;
}

void Model::visit(const std::function<void(const std::string&, double*, Index)>& fn) {
    layer.visit(fn);
    fn("head.w", head.w.data(), head.w.size());
    fn("head.b", head.b.data(), head.b.size());
}

void Model::visit(const std::function<void(const std::string&, const double*, Index)>& fn) const {
    const_cast<Model*>(this)->visit(
        [&](const std::string& name, double* data, Index n) { fn(name, static_cast<const double*>(data), n); });
}

void AdamState::apply(Model& params, const Model& grads, double lr) {
    const auto gs = collect(grads);
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    std::size_t k = 0;
    params.visit([&](const std::string& name, double* data, Index n) {
        const auto& [gname, gdata, gn] = gs.at(k++);
        if (gname != name || gn != n) throw ShapeError("gradient layout does not match parameters at '" + name + "'");
        auto& mv = m[name];
        auto& vv = v[name];
        if (mv.size() != n) mv = Vector::Zero(n);
        if (vv.size() != n) vv = Vector::Zero(n);
        Eigen::Map<Vector> p(data, n);
        const Eigen::Map<const Vector> gr(gdata, n);
        mv = beta1 * mv + (1.0 - beta1) * gr;
        vv = beta2 * vv + (1.0 - beta2) * gr.cwiseAbs2();
        p.array() -= lr * (mv.array() / c1) / ((vv.array() / c2).sqrt() + eps);
    });
}

LossAndGrad regression_loss_and_grad(std::span<const Sample> batch, const Model& model) {
    if (batch.empty()) throw ValidationError("empty training batch");
    LossAndGrad res;
    res.grad = model;
    res.grad.layer = model.layer.zeros_like();
    res.grad.head.w.setZero();
    res.grad.head.b.setZero();

    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        if (s.graph == nullptr) throw ValidationError("sample without a graph");
        if (s.target.size() != model.head.w.rows()) throw ShapeError("target length does not match readout");
        const auto fwd = lrbp_forward_stack(HiddenStates{s.h0, 0}, *s.graph, model.layer, model.layers);
        const Vector mean = node_mean(fwd.out.h);
        const Vector y = model.head.w * mean + model.head.b;
        const Vector diff = y - s.target;
        const double k = static_cast<double>(diff.size());
        res.loss += scale * diff.cwiseAbs().sum() / k;

        const Vector gy = diff.unaryExpr([](double x) { return double((x > 0.0) - (x < 0.0)); }) * (scale / k);
        res.grad.head.w.noalias() += gy * mean.transpose();
        res.grad.head.b += gy;
        if (model.layers > 0) {
            const Vector dmean = model.head.w.transpose() * gy;
            const Matrix upstream = dmean.replicate(1, fwd.out.h.cols()) / static_cast<double>(fwd.out.h.cols());
            res.grad.layer.add(lrbp_backward_stack(fwd.tapes, upstream).params);
        }
    }
    return res;
}

TrainStepResult train_step(std::span<const Sample> batch, const Model& model, AdamState& opt, double lr) {
    auto lg = regression_loss_and_grad(batch, model);
    if (!std::isfinite(lg.loss)) throw NonFiniteError("non-finite training loss; step aborted");
    TrainStepResult res{model, lg.loss};
    AdamState next = opt;
    next.apply(res.params, lg.grad, lr);
    opt = std::move(next);
    return res;
}

}  // namespace lrbp
