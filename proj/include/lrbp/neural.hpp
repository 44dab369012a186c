#pragma once

// Neuralized low-rank message passing layer.
//
// Node states are unconstrained real vectors h_i (columns of a d_h x n
// matrix). One layer computes, for every node i,
//
//   msg_i = sum_{a in N(i)} W_out[a,i] ( hadamard_{j in N(a)\{i}} W_in[a,j]^T h_j )
//   h'_i  = h_i + MLP(msg_i)
//
// where W_in / W_out are d_h x R matrices looked up by slot key (see
// slot_key in factor_graph.hpp) and MLP is one ReLU hidden layer. The
// sending states h_j are the raw previous-layer states; there is no
// leave-one-factor-out product on the node side. An arity-1 factor
// contributes W_out * 1.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lrbp/factor_graph.hpp"

namespace lrbp {

struct SlotWeights {
    Matrix w_in;   // d_h x R, projects sending states before the Hadamard product
    Matrix w_out;  // d_h x R, projects the product back to state space
};

struct Mlp {
    Matrix w1;  // width x d_h
    Vector b1;
    Matrix w2;  // d_h x width
    Vector b2;
};

struct LayerParams {
    int d_h = 0;
    int rank = 0;
    std::map<std::string, SlotWeights> slots;
    Mlp mlp;

    // W_in/W_out ~ U[-1/sqrt(R), 1/sqrt(R)], MLP weights and biases
    // ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)]. Width defaults to 2 * d_h.
    static LayerParams init(const std::vector<std::string>& slot_keys, int d_h, int rank, std::uint64_t seed,
                            int mlp_width = -1);

    // Same shapes, every entry zero.
    LayerParams zeros_like() const;

    int mlp_width() const { return static_cast<int>(mlp.w1.rows()); }

    // Visits every parameter array in a fixed order with a stable name.
    void visit(const std::function<void(const std::string&, double*, Index)>& fn);
    void visit(const std::function<void(const std::string&, const double*, Index)>& fn) const;

    void add(const LayerParams& other);
};

// Sorted, de-duplicated slot keys used by the low-rank bindings of g.
std::vector<std::string> graph_slot_keys(const FactorGraph& g);

struct HiddenStates {
    Matrix h;  // d_h x num_nodes
    int t = 0;
};

// Intermediates of one forward call. Holds a pointer to the graph and
// params; both must outlive the tape.
struct LayerTape {
    const FactorGraph* graph = nullptr;
    const LayerParams* params = nullptr;
    Matrix h_in;                // d_h x n
    std::vector<Matrix> gamma;  // per factor, R x arity: W_in^T h_j
    std::vector<Matrix> loo;    // per factor, R x arity: leave-one-out Hadamard products
    Matrix msg;                 // d_h x n, aggregated messages before the MLP
    Matrix z1;                  // width x n, MLP pre-activations
    Matrix a1;                  // width x n, ReLU outputs
};

struct GradientBundle {
    LayerParams params;  // d loss / d parameter, same shapes as the layer
    Matrix d_input;      // d loss / d h_in, d_h x n
};

struct ForwardResult {
    HiddenStates out;
    LayerTape tape;
};

ForwardResult lrbp_forward(const HiddenStates& h, const FactorGraph& g, const LayerParams& p);

// Exact reverse-mode gradients given d loss / d output states.
GradientBundle lrbp_backward(const LayerTape& tape, const Matrix& upstream);

// T layers sharing one parameter set.
struct StackResult {
    HiddenStates out;
    std::vector<LayerTape> tapes;
};

StackResult lrbp_forward_stack(const HiddenStates& h0, const FactorGraph& g, const LayerParams& p, int layers);
GradientBundle lrbp_backward_stack(const std::vector<LayerTape>& tapes, const Matrix& upstream);

// Central-difference check of lrbp_backward_stack on the loss sum ||h_T||^2.
//
// A coordinate is skipped when its +/- eps evaluations flip the sign of any
// ReLU pre-activation relative to the base pass, or move a pre-activation
// whose base magnitude is below 10 * eps. The reported error for a compared
// coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst;  // name[index] of the worst coordinate
    std::size_t compared = 0;
    std::size_t excluded = 0;
};

GradCheckReport grad_check(const FactorGraph& g, const LayerParams& p, std::uint64_t seed, double eps = 1e-5,
                           int layers = 3);
// Same, with caller-supplied input states.
GradCheckReport grad_check(const FactorGraph& g, const LayerParams& p, const Matrix& h0, double eps, int layers);

struct Readout {
    Matrix w;  // out_dim x d_h
    Vector b;

    static Readout init(int d_h, int out_dim, std::uint64_t seed);
};

// Mean over node states followed by w * mean + b. The per-coordinate sum is
// taken over sorted values, so any node permutation gives a bitwise-equal
// embedding.
Vector readout(const HiddenStates& h, const Readout& r);

// Graph i owns columns [offsets[i], offsets[i+1]).
std::vector<Vector> readout_batch(const Matrix& h, std::span<const Index> offsets, const Readout& r);

struct Model {
    LayerParams layer;
    Readout head;
    int layers = 3;

    void visit(const std::function<void(const std::string&, double*, Index)>& fn);
    void visit(const std::function<void(const std::string&, const double*, Index)>& fn) const;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::map<std::string, Vector> m;
    std::map<std::string, Vector> v;

    // params -= lr * mhat / (sqrt(vhat) + eps), keyed by parameter name.
    void apply(Model& params, const Model& grads, double lr);
};

struct Sample {
    const FactorGraph* graph = nullptr;
    Matrix h0;
    Vector target;
};

struct TrainStepResult {
    Model params;
    double loss = 0.0;
};

// Forward/backward of the graph-regression model and its mean absolute
// error, without updating anything.
struct LossAndGrad {
    double loss = 0.0;
    Model grad;
};

LossAndGrad regression_loss_and_grad(std::span<const Sample> batch, const Model& model);

// One Adam step on the mean absolute error of the batch. A non-finite loss
// throws NonFiniteError and leaves `opt` untouched.
TrainStepResult train_step(std::span<const Sample> batch, const Model& model, AdamState& opt, double lr);

}  // namespace lrbp
