#pragma once

// Benchmark orchestration: trains each architecture variant on identical
// data, seed, and budget, evaluates on the held-out split, and writes a
// comparison CSV, a plaintext summary, and SVG charts. Everything except the
// wall-clock latency column (summary/plot only) is deterministic per seed.

#include <cstdint>
#include <string>
#include <vector>

#include "mipose/eval.hpp"
#include "mipose/model.hpp"
#include "mipose/synth.hpp"
#include "mipose/train.hpp"

namespace mipose {

struct BenchSpec {
    std::string name;
    Variant variant = Variant::mipnet;
    int n_slots = 1;
};

/// baseline_n1, mipnet_n2, mipnet_n3, two_heads.
std::vector<BenchSpec> default_bench_specs();

struct BenchRow {
    BenchSpec spec;
    std::size_t param_count = 0;
    std::vector<EpochLoss> curve;
    EvalReport report;          // held-out split, per-difficulty included
    double ms_per_image = 0.0;  // median wall time, single-threaded inference
};

struct BenchmarkResult {
    std::string eval_split;
    std::vector<BenchRow> rows;
};

/// Trains and evaluates every spec sequentially (fair timing), writing
/// per-config artifacts under <out_dir>/<name>/ and the comparison outputs
/// at the top level. Evaluates on "test" when present, else "val".
BenchmarkResult run_benchmark(const LoadedDataset& data, const TrainConfig& base_cfg,
                              std::uint64_t model_seed, double nms_threshold,
                              const std::string& out_dir,
                              const std::vector<BenchSpec>& specs = default_bench_specs());

}  // namespace mipose
