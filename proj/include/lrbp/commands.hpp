#pragma once

// Subcommand implementations behind the `lrbp` executable. Each returns the
// process exit code and writes human-readable output to `out` / `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lrbp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitCheckFailed = 3;

struct InferArgs {
    std::filesystem::path graph;
    std::optional<std::filesystem::path> out;    // beliefs JSON; stdout when absent
    std::optional<std::filesystem::path> trace;  // CSV iteration,max_delta
    int max_iters = 200;
    double tol = 1e-8;
    double damping = 0.0;
    int parallel = 1;
};

// Exit 0 on convergence, kExitNotConverged when max_iters is reached.
int cmd_infer(const InferArgs& args, std::ostream& out, std::ostream& err);

struct VerifyArgs {
    std::filesystem::path graph;
    std::uint64_t seed = 1;
    int parallel = 1;
    double message_tol = 1e-10;
    double belief_tol = 1e-8;
};

// Exit 0 iff every executed check is within tolerance.
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);

struct BenchArgs {
    std::vector<int> values;  // orders for bench-order, ranks for bench-rank
    int d = 4;
    int rank = 64;   // bench-order
    int order = 3;   // bench-rank
    int reps = 7;
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> out;
};

int cmd_bench_order(const BenchArgs& args, std::ostream& out, std::ostream& err);
int cmd_bench_rank(const BenchArgs& args, std::ostream& out, std::ostream& err);

struct SeqArgs {
    int alphabet = 10;
    int vocab_size = 12;
    int word_len = 6;
    int corpus_size = 1000;
    double noise = 0.6;
    std::vector<int> orders{1, 2, 3};
    std::vector<std::uint64_t> seeds{1};
    int rank = -1;
    int epochs = 10;
    double lr = 1e-2;
    std::optional<std::filesystem::path> out;
};

int cmd_seq_experiment(const SeqArgs& args, std::ostream& out, std::ostream& err);

struct FitArgs {
    std::filesystem::path tensor;  // JSON {"shape": [...], "data": [...]}
    int rank = 4;
    int max_iters = 500;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> out;
};

int cmd_fit_cp(const FitArgs& args, std::ostream& out, std::ostream& err);

struct BuildArgs {
    std::filesystem::path typed_graph;
    std::string scheme = "CABT";
    int d = 2;
    int rank = 8;
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> out;
};

// Converts a typed graph into a node-centered factor graph file.
int cmd_build_factors(const BuildArgs& args, std::ostream& out, std::ostream& err);

}  // namespace lrbp::cli
