// lrbp: command-line front end.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lrbp/commands.hpp"

namespace {

using lrbp::cli::kExitError;

// CLI11 stores into std::string; empty means "not given".
std::optional<std::filesystem::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank higher-order belief propagation"};
    app.require_subcommand(1);

    lrbp::cli::InferArgs infer;
    std::string infer_graph, infer_out, infer_trace;
    auto* c_infer = app.add_subcommand("infer", "run loopy belief propagation on a factor graph file");
    c_infer->add_option("--graph", infer_graph, "factor graph JSON")->required();
    c_infer->add_option("--out", infer_out, "beliefs JSON (default stdout)");
    c_infer->add_option("--trace", infer_trace, "per-iteration CSV of max message change");
    c_infer->add_option("--max-iters", infer.max_iters)->check(CLI::NonNegativeNumber);
    c_infer->add_option("--tol", infer.tol)->check(CLI::PositiveNumber);
    c_infer->add_option("--damping", infer.damping)->check(CLI::Range(0.0, 1.0));
    c_infer->add_option("--parallel", infer.parallel, "worker threads")->check(CLI::PositiveNumber);

    lrbp::cli::VerifyArgs verify;
    std::string verify_graph;
    auto* c_verify = app.add_subcommand("verify", "check low-rank messages and tree beliefs against dense oracles");
    c_verify->add_option("--graph", verify_graph, "factor graph JSON")->required();
    c_verify->add_option("--seed", verify.seed);
    c_verify->add_option("--parallel", verify.parallel)->check(CLI::PositiveNumber);

    lrbp::cli::BenchArgs bo;
    bo.values = {2, 4, 8, 16};
    std::string bo_out;
    auto* c_bo = app.add_subcommand("bench-order", "time one low-rank message sweep per factor order");
    c_bo->add_option("--orders", bo.values)->delimiter(',');
    c_bo->add_option("--d", bo.d)->check(CLI::Range(2, 1 << 20));
    c_bo->add_option("--rank", bo.rank)->check(CLI::PositiveNumber);
    c_bo->add_option("--reps", bo.reps)->check(CLI::PositiveNumber);
    c_bo->add_option("--seed", bo.seed);
    c_bo->add_option("--out", bo_out, "CSV (default stdout)");

    lrbp::cli::BenchArgs br;
    br.values = {4, 8, 16, 32, 64, 128};
    std::string br_out;
    auto* c_br = app.add_subcommand("bench-rank", "time one low-rank message sweep per rank");
    c_br->add_option("--ranks", br.values)->delimiter(',');
    c_br->add_option("--order", br.order)->check(CLI::PositiveNumber);
    c_br->add_option("--d", br.d)->check(CLI::Range(2, 1 << 20));
    c_br->add_option("--reps", br.reps)->check(CLI::PositiveNumber);
    c_br->add_option("--seed", br.seed);
    c_br->add_option("--out", br_out, "CSV (default stdout)");

    lrbp::cli::SeqArgs seq;
    std::string seq_out;
    auto* c_seq = app.add_subcommand("seq-exp", "noisy word recognition with order-k sequence factors");
    c_seq->add_option("--alphabet", seq.alphabet);
    c_seq->add_option("--vocab", seq.vocab_size);
    c_seq->add_option("--word-len", seq.word_len);
    c_seq->add_option("--corpus", seq.corpus_size, "words in each of train and test");
    c_seq->add_option("--noise", seq.noise);
    c_seq->add_option("--orders", seq.orders)->delimiter(',');
    c_seq->add_option("--seeds", seq.seeds)->delimiter(',');
    c_seq->add_option("--rank", seq.rank, "CP rank of the layer (default 2 * alphabet)");
    c_seq->add_option("--epochs", seq.epochs);
    c_seq->add_option("--lr", seq.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
    c_seq->add_option("--out", seq_out, "CSV (default stdout)");

    lrbp::cli::FitArgs fit;
    std::string fit_tensor, fit_out;
    auto* c_fit = app.add_subcommand("fit-cp", "fit a CP decomposition to a dense tensor by ALS");
    c_fit->add_option("--tensor", fit_tensor, "JSON {shape, data}")->required();
    c_fit->add_option("--rank", fit.rank)->check(CLI::PositiveNumber);
    c_fit->add_option("--max-iters", fit.max_iters)->check(CLI::PositiveNumber);
    c_fit->add_option("--tol", fit.tol);
    c_fit->add_option("--seed", fit.seed);
    c_fit->add_option("--out", fit_out);

    lrbp::cli::BuildArgs build;
    std::string build_in, build_out;
    auto* c_build = app.add_subcommand("build-factors", "turn a typed graph into node-centered low-rank factors");
    c_build->add_option("--typed-graph", build_in)->required();
    c_build->add_option("--scheme", build.scheme)->check(CLI::IsMember({"CAT", "BT", "CABT", "CABTA"}));
    c_build->add_option("--d", build.d);
    c_build->add_option("--rank", build.rank)->check(CLI::PositiveNumber);
    c_build->add_option("--seed", build.seed);
    c_build->add_option("--out", build_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitError;
    }

    auto& out = std::cout;
    auto& err = std::cerr;
    if (*c_infer) {
        infer.graph = infer_graph;
        infer.out = opt_path(infer_out);
        infer.trace = opt_path(infer_trace);
        return lrbp::cli::cmd_infer(infer, out, err);
    }
    if (*c_verify) {
        verify.graph = verify_graph;
        return lrbp::cli::cmd_verify(verify, out, err);
    }
    if (*c_bo) {
        bo.out = opt_path(bo_out);
        return lrbp::cli::cmd_bench_order(bo, out, err);
    }
    if (*c_br) {
        br.out = opt_path(br_out);
        return lrbp::cli::cmd_bench_rank(br, out, err);
    }
    if (*c_seq) {
        seq.out = opt_path(seq_out);
        return lrbp::cli::cmd_seq_experiment(seq, out, err);
    }
    if (*c_fit) {
        fit.tensor = fit_tensor;
        fit.out = opt_path(fit_out);
        return lrbp::cli::cmd_fit_cp(fit, out, err);
    }
    if (*c_build) {
        build.typed_graph = build_in;
        build.out = opt_path(build_out);
        return lrbp::cli::cmd_build_factors(build, out, err);
    }
    return kExitError;
}
