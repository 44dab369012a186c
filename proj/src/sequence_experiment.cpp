#include "lrbp/sequence_experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "lrbp/bench.hpp"
#include "lrbp/factor_builder.hpp"

namespace lrbp {

namespace {

Matrix observe(const std::vector<int>& word, int alphabet, double noise, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix obs = Matrix::Zero(alphabet, static_cast<Index>(word.size()));
    for (std::size_t p = 0; p < word.size(); ++p) {
        obs(word[p], static_cast<Index>(p)) = 1.0;
        if (noise > 0.0) {
            for (Index r = 0; r < alphabet; ++r) obs(r, static_cast<Index>(p)) += noise * gauss(rng);
        }
    }
    return obs;
}

struct Loss {
    double value = 0.0;
    Model grad;
};

Matrix logits_of(const Model& model, const Matrix& h) {
    Matrix z = model.head.w * h;
    z.colwise() += model.head.b;
    return z;
}

// Mean softmax cross-entropy over every character of the selected words.
Loss classification_loss(const FactorGraph& g, const Model& model, const std::vector<Matrix>& obs,
                         const std::vector<std::vector<int>>& labels, std::span<const std::size_t> words) {
    Loss res;
    res.grad = model;
    res.grad.layer = model.layer.zeros_like();
    res.grad.head.w.setZero();
    res.grad.head.b.setZero();

    std::size_t total = 0;
    for (auto w : words) total += labels[w].size();
    const double scale = 1.0 / static_cast<double>(total);

    for (auto w : words) {
        const auto fwd = lrbp_forward_stack(HiddenStates{obs[w], 0}, g, model.layer, model.layers);
        const Matrix& h = fwd.out.h;
        Matrix z = logits_of(model, h);
        for (Index c = 0; c < z.cols(); ++c) {
            const double mx = z.col(c).maxCoeff();
            z.col(c).array() = (z.col(c).array() - mx).exp();
            const double s = z.col(c).sum();
            z.col(c) /= s;
            const int y = labels[w][static_cast<std::size_t>(c)];
            res.value -= scale * std::log(std::max(z(y, c), 1e-300));
            z(y, c) -= 1.0;
        }
        z *= scale;  // d loss / d logits
        res.grad.head.w.noalias() += z * h.transpose();
        res.grad.head.b += z.rowwise().sum();
        if (model.layers > 0) {
            const Matrix upstream = model.head.w.transpose() * z;
            res.grad.layer.add(lrbp_backward_stack(fwd.tapes, upstream).params);
        }
    }
    return res;
}

double accuracy(const FactorGraph& g, const Model& model, const std::vector<Matrix>& obs,
                const std::vector<std::vector<int>>& labels) {
    std::size_t hit = 0;
    std::size_t total = 0;
    for (std::size_t w = 0; w < obs.size(); ++w) {
        const auto fwd = lrbp_forward_stack(HiddenStates{obs[w], 0}, g, model.layer, model.layers);
        const Matrix z = logits_of(model, fwd.out.h);
        for (Index c = 0; c < z.cols(); ++c) {
            Index best = 0;
            z.col(c).maxCoeff(&best);
            hit += static_cast<int>(best) == labels[w][static_cast<std::size_t>(c)] ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

SeqDataset make_seq_dataset(const SeqExperimentConfig& cfg) {
    if (cfg.alphabet < 2 || cfg.alphabet > 26) throw ValidationError("alphabet must be in [2, 26]");
    if (cfg.vocab_size < 1 || cfg.vocab_size > 50) throw ValidationError("vocabulary must hold 1..50 words");
    if (cfg.word_len < 1) throw ValidationError("word length must be >= 1");
    if (cfg.train_words < 1 || cfg.test_words < 1) throw ValidationError("corpus sizes must be positive");
    if (cfg.noise < 0.0) throw ValidationError("noise must be nonnegative");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> letter(0, cfg.alphabet - 1);
    std::uniform_int_distribution<int> pick(0, cfg.vocab_size - 1);

    SeqDataset ds;
    for (int v = 0; v < cfg.vocab_size; ++v) {
        std::vector<int> word(static_cast<std::size_t>(cfg.word_len));
        for (auto& c : word) c = letter(rng);
        ds.vocabulary.push_back(std::move(word));
    }
    for (int k = 0; k < cfg.train_words; ++k) {
        const auto& w = ds.vocabulary[static_cast<std::size_t>(pick(rng))];
        ds.train_labels.push_back(w);
        ds.train_obs.push_back(observe(w, cfg.alphabet, cfg.noise, rng));
    }
    for (int k = 0; k < cfg.test_words; ++k) {
        const auto& w = ds.vocabulary[static_cast<std::size_t>(pick(rng))];
        ds.test_labels.push_back(w);
        ds.test_obs.push_back(observe(w, cfg.alphabet, cfg.noise, rng));
    }
    return ds;
}

SeqRunResult run_seq_model(const SeqExperimentConfig& cfg, const SeqDataset& data, int order) {
    if (order < 0) throw ValidationError("order must be >= 0");
    const int d_h = cfg.alphabet;
    const int rank = cfg.rank > 0 ? cfg.rank : 2 * d_h;
    const int graph_order = std::max(order, 1);
    const auto g = sequence_graph(cfg.word_len, graph_order, true, std::max(2, cfg.alphabet), 1, cfg.seed);

    Model model;
    model.layers = order == 0 ? 0 : cfg.layers;
    model.layer = LayerParams::init(graph_slot_keys(g), d_h, rank, cfg.seed * 31 + static_cast<std::uint64_t>(order));
    model.head = Readout::init(d_h, cfg.alphabet, cfg.seed * 17 + 3);
    AdamState opt;

    std::vector<std::size_t> idx(data.train_obs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(cfg.seed * 101 + 7);
    double last_epoch_loss = 0.0;
    const auto batch = static_cast<std::size_t>(std::max(1, cfg.batch));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < idx.size(); start += batch) {
            const auto end = std::min(idx.size(), start + batch);
            const std::span<const std::size_t> words(idx.data() + start, end - start);
            auto loss = classification_loss(g, model, data.train_obs, data.train_labels, words);
            if (!std::isfinite(loss.value)) throw NonFiniteError("sequence experiment: non-finite loss");
            opt.apply(model, loss.grad, cfg.lr);
            epoch_loss += loss.value;
            ++batches;
        }
        last_epoch_loss = epoch_loss / static_cast<double>(batches);
    }

    SeqRunResult res;
    res.model = order == 0 ? "baseline" : "lrbp";
    res.order = order;
    res.seed = cfg.seed;
    res.noise = cfg.noise;
    res.accuracy = accuracy(g, model, data.test_obs, data.test_labels);
    res.train_loss = last_epoch_loss;
    return res;
}

std::vector<SeqRunResult> run_seq_experiment(const SeqExperimentConfig& cfg, std::span<const int> orders) {
    const auto data = make_seq_dataset(cfg);
    std::vector<SeqRunResult> rows;
    rows.push_back(run_seq_model(cfg, data, 0));
    for (int k : orders) {
        if (k < 1) throw ValidationError("factor orders must be >= 1");
        rows.push_back(run_seq_model(cfg, data, k));
    }
    return rows;
}

std::string seq_csv_header() { return "schema,model,order,seed,noise,accuracy,train_loss"; }

void write_seq_csv(std::ostream& os, std::span<const SeqRunResult> rows) {
    os << seq_csv_header() << '\n';
    for (const auto& r : rows) {
        os << kSeqSchema << ',' << r.model << ',' << r.order << ',' << r.seed << ',' << format_double(r.noise) << ','
           << format_double(r.accuracy) << ',' << format_double(r.train_loss) << '\n';
    }
}

}  // namespace lrbp
