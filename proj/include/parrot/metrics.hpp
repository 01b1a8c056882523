#pragma once

#include <string>
#include <vector>

#include "parrot/runner.hpp"

namespace parrot::harness {

/// Writes a metrics log as CSV with '#' metadata lines (method, task, seed,
/// schema, config hash, dataset hash). Deterministic bytes: %.17g floats
/// and no timestamps, so identical runs produce identical files.
void write_metrics_csv(const std::string& path, const rl::MetricsLog& log);

rl::MetricsLog read_metrics_csv(const std::string& path);

struct CurvePoint {
    long env_step = 0;
    double mean_success = 0.0;
    double std_success = 0.0;
    double mean_return = 0.0;
    double std_return = 0.0;
    long n_seeds = 0;
};

/// Merges per-seed logs into mean and sample standard deviation per
/// env_step. Pure function of its inputs; steps must align across seeds.
std::vector<CurvePoint> merge_curves(const std::vector<rl::MetricsLog>& logs);

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve,
                     const std::string& method, const std::string& task);

} // namespace parrot::harness
