#include "lrbp/commands.hpp"

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "lrbp/bench.hpp"
#include "lrbp/factor_builder.hpp"
#include "lrbp/graph_io.hpp"
#include "lrbp/json_util.hpp"
#include "lrbp/lbp.hpp"
#include "lrbp/lowrank.hpp"
#include "lrbp/sequence_experiment.hpp"

namespace lrbp::cli {

namespace {

using nlohmann::json;

// Writes through a file when a path is given, otherwise to `fallback`.
class Sink {
public:
    Sink(const std::optional<std::filesystem::path>& path, std::ostream& fallback) : os_(&fallback) {
        if (path) {
            file_.open(*path);
            if (!file_) throw Error(path->string() + ": cannot open for writing");
            os_ = &file_;
        }
    }
    std::ostream& stream() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_;
};

json beliefs_to_json(const BeliefSet& b) {
    json arr = json::array();
    for (const auto& v : b.beliefs) arr.push_back(json_util::vector_to_json(v));
    return json{{"converged", b.converged},
                {"iterations", b.iterations},
                {"final_delta", std::isfinite(b.final_delta) ? json(b.final_delta) : json(nullptr)},
                {"sign_warnings", b.sign_warnings},
                {"beliefs", arr}};
}

void print_fit(std::ostream& os, const char* what, const std::vector<BenchRecord>& recs,
               int BenchRecord::*axis) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& r : recs) {
        x.push_back(static_cast<double>(r.*axis));
        y.push_back(r.median_ns_per_sweep);
    }
    const auto fit = fit_line(x, y);
    if (!fit.valid) {
        os << "fit: n/a (need at least two distinct " << what << " values)\n";
        return;
    }
    os << "fit: time_ns = " << format_double(fit.intercept) << " + " << format_double(fit.slope) << " * " << what
       << "  r2=" << format_double(fit.r2) << '\n';
    if (recs.size() >= 2) {
        os << "ratio: time(" << what << "=" << recs.back().*axis << ")/time(" << what << "=" << recs.front().*axis
           << ") = " << format_double(recs.back().median_ns_per_sweep / recs.front().median_ns_per_sweep) << '\n';
    }
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace

int cmd_infer(const InferArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto g = load_graph(args.graph);
        LbpOptions opts;
        opts.max_iters = args.max_iters;
        opts.tol = args.tol;
        opts.damping = args.damping;
        opts.workers = args.parallel;
        opts.warn = [&](const std::string& msg) { err << "warning: " << msg << '\n'; };

        std::ofstream trace;
        if (args.trace) {
            trace.open(*args.trace);
            if (!trace) throw Error(args.trace->string() + ": cannot open for writing");
            trace << "iteration,max_delta\n";
            opts.trace = [&](int it, double delta) { trace << it << ',' << format_double(delta) << '\n'; };
        }

        const auto beliefs = run_lbp(g, opts);
        Sink sink(args.out, out);
        sink.stream() << beliefs_to_json(beliefs).dump(1) << '\n';
        if (!beliefs.converged) {
            err << "not converged after " << beliefs.iterations << " iteration(s); final delta "
                << format_double(beliefs.final_delta) << '\n';
            return kExitNotConverged;
        }
        return kExitOk;
    });
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto g = load_graph(args.graph);
        bool ok = true;
        std::vector<std::string> skipped;

        std::mt19937_64 rng(args.seed);
        std::uniform_real_distribution<double> unif(0.05, 1.0);
        double worst_msg = 0.0;
        int checked_factors = 0;
        int checked_slots = 0;
        for (int a = 0; a < g.num_factors(); ++a) {
            if (!g.factor(a).is_low_rank()) continue;
            DenseTensord dense;
            try {
                dense = g.dense_payload(a, capacity_limit());
            } catch (const CapacityError& e) {
                skipped.push_back("low-rank factor " + std::to_string(a) + ": " + e.what());
                continue;
            }
            const auto& f = g.low_rank(a);
            std::vector<Vector> incoming(static_cast<std::size_t>(f.arity()), Vector(g.cardinality()));
            for (auto& m : incoming) {
                for (Index i = 0; i < m.size(); ++i) m[i] = unif(rng);
                m /= m.sum();
            }
            for (Index k = 0; k < f.arity(); ++k) {
                Vector fast = lowrank_message<double>(f, incoming, k);
                Vector slow = marginalize_product<double>(dense, incoming, k);
                fast /= fast.sum();
                slow /= slow.sum();
                const double dev = (fast - slow).cwiseAbs().maxCoeff() / slow.cwiseAbs().maxCoeff();
                worst_msg = std::max(worst_msg, dev);
                ++checked_slots;
            }
            ++checked_factors;
        }
        if (checked_factors > 0) {
            const bool pass = worst_msg < args.message_tol;
            ok = ok && pass;
            out << "low-rank messages: factors=" << checked_factors << " slots=" << checked_slots
                << " max_rel_deviation=" << format_double(worst_msg) << " tol=" << format_double(args.message_tol)
                << (pass ? " PASS" : " FAIL") << '\n';
        } else if (skipped.empty()) {
            skipped.push_back("low-rank messages: graph has no low-rank factors");
        }

        if (!g.is_forest()) {
            skipped.push_back("tree beliefs: graph has cycles");
        } else {
            try {
                const auto exact = exact_marginals(g);
                LbpOptions opts;
                opts.tol = 1e-13;
                opts.max_iters = 1000;
                opts.workers = args.parallel;
                const auto bp = run_lbp(g, opts);
                double worst = 0.0;
                for (std::size_t i = 0; i < bp.beliefs.size(); ++i) {
                    worst = std::max(worst, (bp.beliefs[i] - exact.beliefs[i]).cwiseAbs().maxCoeff());
                }
                const bool pass = bp.converged && worst < args.belief_tol;
                ok = ok && pass;
                out << "tree beliefs: iterations=" << bp.iterations << " max_abs_deviation=" << format_double(worst)
                    << " tol=" << format_double(args.belief_tol) << (pass ? " PASS" : " FAIL") << '\n';
            } catch (const CapacityError& e) {
                skipped.push_back(std::string("tree beliefs: ") + e.what());
            }
        }

        for (const auto& s : skipped) out << "skipped: " << s << '\n';
        out << (ok ? "verify: PASS" : "verify: FAIL") << '\n';
        return ok ? kExitOk : kExitCheckFailed;
    });
}

int cmd_bench_order(const BenchArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        BenchOptions opts;
        opts.reps = args.reps;
        opts.seed = args.seed;
        const auto recs = bench_order(args.values, args.d, args.rank, opts);
        Sink sink(args.out, out);
        write_bench_csv(sink.stream(), recs);
        print_fit(args.out ? out : err, "order", recs, &BenchRecord::order);
        return kExitOk;
    });
}

int cmd_bench_rank(const BenchArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        BenchOptions opts;
        opts.reps = args.reps;
        opts.seed = args.seed;
        const auto recs = bench_rank(args.values, args.order, args.d, opts);
        Sink sink(args.out, out);
        write_bench_csv(sink.stream(), recs);
        print_fit(args.out ? out : err, "rank", recs, &BenchRecord::rank);
        return kExitOk;
    });
}

int cmd_seq_experiment(const SeqArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        SeqExperimentConfig cfg;
        cfg.alphabet = args.alphabet;
        cfg.vocab_size = args.vocab_size;
        cfg.word_len = args.word_len;
        cfg.train_words = args.corpus_size;
        cfg.test_words = args.corpus_size;
        cfg.noise = args.noise;
        cfg.rank = args.rank;
        cfg.epochs = args.epochs;
        cfg.lr = args.lr;
        if (cfg.rank > 0 && cfg.rank < 2 * cfg.alphabet) {
            err << "warning: rank " << cfg.rank << " is below twice the state dimension (" << 2 * cfg.alphabet
                << ")\n";
        }
        std::vector<SeqRunResult> rows;
        for (auto seed : args.seeds) {
            cfg.seed = seed;
            auto r = run_seq_experiment(cfg, args.orders);
            rows.insert(rows.end(), r.begin(), r.end());
        }
        Sink sink(args.out, out);
        write_seq_csv(sink.stream(), rows);
        return kExitOk;
    });
}

int cmd_fit_cp(const FitArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto j = read_json_file(args.tensor);
        const auto& shape_j = json_util::to_array(json_util::field(j, "shape", "tensor"), "shape");
        std::vector<Index> shape;
        for (std::size_t k = 0; k < shape_j.size(); ++k) {
            shape.push_back(static_cast<Index>(json_util::to_int(shape_j[k], "shape[" + std::to_string(k) + "]")));
        }
        DenseTensord t(shape, json_util::vector_from_json(json_util::field(j, "data", "tensor"), "data"));
        const auto fit = cp_fit_als(t, args.rank, args.max_iters, args.tol, args.seed);
        Sink sink(args.out, out);
        json res = cp_to_json(fit.factor);
        res["relative_error"] = fit.relative_error;
        res["iterations"] = fit.iterations;
        sink.stream() << res.dump(1) << '\n';
        (args.out ? out : err) << "relative_error=" << format_double(fit.relative_error)
                               << " iterations=" << fit.iterations << '\n';
        return kExitOk;
    });
}

int cmd_build_factors(const BuildArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto tg = load_typed_graph(args.typed_graph);
        const auto scheme = parse_scheme(args.scheme);
        const auto g = typed_to_factor_graph(tg, scheme, args.d, args.rank, KeyedSlotWeights(args.seed));
        const auto built = build_node_centered(tg, scheme, args.rank);
        Sink sink(args.out, out);
        sink.stream() << graph_to_json(g).dump(1) << '\n';
        (args.out ? out : err) << "factors=" << g.num_factors() << " slots=" << built.slot_table.size()
                               << " slot_space=" << slot_count(scheme, tg.num_atom_types(), tg.num_bond_types())
                               << '\n';
        return kExitOk;
    });
}

}  // namespace lrbp::cli
