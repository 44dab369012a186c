#pragma once

// Timing harness for the low-rank message kernel.
//
// One "sweep" computes every outgoing message of a single CP factor. Each
// rep times a calibrated number of sweeps; records report the median
// per-sweep time over reps plus a checksum of the outputs, which must agree
// across reps.
//
// CSV schema "lrbp-bench/1":
//   schema,kind,order,d,rank,nodes,reps,sweeps,median_ns_per_sweep,checksum

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lrbp {

inline constexpr const char* kBenchSchema = "lrbp-bench/1";

struct BenchRecord {
    std::string kind;  // "order" or "rank"
    int order = 0;
    int d = 0;
    int rank = 0;
    int nodes = 0;
    int reps = 0;
    long sweeps = 0;
    double median_ns_per_sweep = 0.0;
    double checksum = 0.0;
};

struct LinearFit {
    bool valid = false;  // false for fewer than two distinct x values
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
};

// Ordinary least squares y = intercept + slope * x with coefficient of determination.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct BenchOptions {
    int reps = 7;
    double target_rep_ns = 4e6;  // sweeps per rep are calibrated to roughly this duration
    std::uint64_t seed = 1;
};

BenchRecord bench_lowrank_sweep(int order, int d, int rank, const BenchOptions& opts);

std::vector<BenchRecord> bench_order(std::span<const int> orders, int d, int rank, const BenchOptions& opts);
std::vector<BenchRecord> bench_rank(std::span<const int> ranks, int order, int d, const BenchOptions& opts);

std::string bench_csv_header();
void write_bench_csv(std::ostream& os, std::span<const BenchRecord> records);

// 17 significant digits, the CSV float convention.
std::string format_double(double v);

}  // namespace lrbp
