#pragma once

// Synthetic character-sequence experiment.
//
// Words are drawn from a small random vocabulary over an alphabet, so a
// character is strongly predictable from its neighbors. Each character is
// observed as one_hot(char) + N(0, noise^2) noise in R^alphabet; these
// observations are the initial node states. A stack of low-rank message
// passing layers over k-order sequence factors (parameters shared per
// order) feeds a per-node softmax classifier trained with Adam.
//
// CSV schema "lrbp-seq/1":
//   schema,model,order,seed,noise,accuracy,train_loss

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lrbp/neural.hpp"

namespace lrbp {

inline constexpr const char* kSeqSchema = "lrbp-seq/1";

struct SeqExperimentConfig {
    int alphabet = 10;
    int vocab_size = 12;
    int word_len = 6;
    int train_words = 1000;
    int test_words = 1000;
    double noise = 0.6;
    int rank = -1;  // -1: twice the state dimension
    int layers = 3;
    int epochs = 10;
    int batch = 10;
    double lr = 1e-2;
    std::uint64_t seed = 1;
};

struct SeqDataset {
    std::vector<std::vector<int>> vocabulary;
    std::vector<std::vector<int>> train_labels;
    std::vector<Matrix> train_obs;
    std::vector<std::vector<int>> test_labels;
    std::vector<Matrix> test_obs;
};

SeqDataset make_seq_dataset(const SeqExperimentConfig& cfg);

struct SeqRunResult {
    std::string model;  // "lrbp" or "baseline"
    int order = 0;      // 0 for the baseline
    std::uint64_t seed = 0;
    double noise = 0.0;
    double accuracy = 0.0;
    double train_loss = 0.0;
};

// Trains and evaluates one model. order = 0 trains the per-character
// classifier directly on the observations (no message passing).
SeqRunResult run_seq_model(const SeqExperimentConfig& cfg, const SeqDataset& data, int order);

// Baseline plus one run per order, for one seed.
std::vector<SeqRunResult> run_seq_experiment(const SeqExperimentConfig& cfg, std::span<const int> orders);

std::string seq_csv_header();
void write_seq_csv(std::ostream& os, std::span<const SeqRunResult> rows);

}  // namespace lrbp
