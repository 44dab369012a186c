#include "lrbp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "lrbp/lowrank.hpp"

namespace lrbp {

namespace {

using Clock = std::chrono::steady_clock;

bool ascending(std::span<const int> v) { return std::is_sorted(v.begin(), v.end()); }

}  // namespace

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    LinearFit fit;
    if (x.size() != y.size()) throw ShapeError("fit_line: x and y differ in length");
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) return fit;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    if (sxx == 0.0) return fit;
    fit.valid = true;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

BenchRecord bench_lowrank_sweep(int order, int d, int rank, const BenchOptions& opts) {
    if (opts.reps < 5) throw ValidationError("benchmarks need at least 5 reps");
    const auto f = cp_random(order, d, rank, opts.seed + static_cast<std::uint64_t>(order) * 1315423911ULL, 1.0);
    std::mt19937_64 rng(opts.seed ^ 0xA5A5A5A5ULL);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    std::vector<Vec<double>> incoming(static_cast<std::size_t>(order), Vec<double>(d));
    for (auto& m : incoming) {
        for (Index i = 0; i < d; ++i) m[i] = unif(rng);
        m /= m.sum();
    }
    std::vector<Vec<double>> out(static_cast<std::size_t>(order));
    LowRankWorkspace<double> ws;

    auto run = [&](long sweeps) {
        double sum = 0.0;
        for (long s = 0; s < sweeps; ++s) {
            lowrank_sweep<double>(f, incoming, out, ws);
            for (const auto& m : out) sum += m.sum();
        }
        return sum;
    };

    // Calibrate: double the sweep count until one rep reaches the target.
    long sweeps = 1;
    for (;;) {
        const auto t0 = Clock::now();
        run(sweeps);
        const double ns = std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
        if (ns >= opts.target_rep_ns || sweeps >= (1L << 30)) break;
        const double scale = ns > 0.0 ? opts.target_rep_ns / ns : 16.0;
        sweeps = std::max(sweeps * 2, static_cast<long>(std::ceil(static_cast<double>(sweeps) * std::min(scale, 64.0))));
    }

    std::vector<double> per_sweep;
    double checksum = 0.0;
    for (int r = 0; r < opts.reps; ++r) {
        const auto t0 = Clock::now();
        const double sum = run(sweeps);
        const double ns = std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
        per_sweep.push_back(ns / static_cast<double>(sweeps));
        if (r == 0) {
            checksum = sum;
        } else if (sum != checksum) {
            throw Error("benchmark checksum changed between reps");
        }
    }
    std::nth_element(per_sweep.begin(), per_sweep.begin() + static_cast<long>(per_sweep.size() / 2), per_sweep.end());
    BenchRecord rec;
    rec.order = order;
    rec.d = d;
    rec.rank = rank;
    rec.nodes = order;
    rec.reps = opts.reps;
    rec.sweeps = sweeps;
    rec.median_ns_per_sweep = per_sweep[per_sweep.size() / 2];
    rec.checksum = checksum;
    return rec;
}

std::vector<BenchRecord> bench_order(std::span<const int> orders, int d, int rank, const BenchOptions& opts) {
    if (!ascending(orders)) throw ValidationError("orders must be sorted ascending");
    std::vector<BenchRecord> out;
    for (int k : orders) {
        auto r = bench_lowrank_sweep(k, d, rank, opts);
        r.kind = "order";
        out.push_back(r);
    }
    return out;
}

std::vector<BenchRecord> bench_rank(std::span<const int> ranks, int order, int d, const BenchOptions& opts) {
    if (!ascending(ranks)) throw ValidationError("ranks must be sorted ascending");
    std::vector<BenchRecord> out;
    for (int r : ranks) {
        auto rec = bench_lowrank_sweep(order, d, r, opts);
        rec.kind = "rank";
        out.push_back(rec);
    }
    return out;
}

std::string bench_csv_header() { return "schema,kind,order,d,rank,nodes,reps,sweeps,median_ns_per_sweep,checksum"; }

void write_bench_csv(std::ostream& os, std::span<const BenchRecord> records) {
    os << bench_csv_header() << '\n';
    for (const auto& r : records) {
        os << kBenchSchema << ',' << r.kind << ',' << r.order << ',' << r.d << ',' << r.rank << ',' << r.nodes << ','
           << r.reps << ',' << r.sweeps << ',' << format_double(r.median_ns_per_sweep) << ','
           << format_double(r.checksum) << '\n';
    }
}

}  // namespace lrbp
