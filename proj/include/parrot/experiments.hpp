#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "parrot/baselines.hpp"
#include "parrot/config.hpp"
#include "parrot/metrics.hpp"

namespace parrot::harness {

/// Runs jobs on a fixed-size worker pool. Jobs must not share mutable
/// state; exceptions are captured and rethrown after all jobs finish.
void run_jobs(const std::vector<std::function<void()>>& jobs, long workers);

/// Collects the dataset into cfg.dataset_path if the file is missing,
/// then returns its content hash. Never rewrites an existing file.
std::string ensure_dataset(const ExperimentConfig& cfg);

/// Variant dataset path and config for the ablation grids.
enum class DatasetVariant { Mixed, GraspOnly, PickPlaceOnly, Size1K, Size5K };
ExperimentConfig variant_config(const ExperimentConfig& base, DatasetVariant v);

// Model caches, keyed by dataset hash and hyperparameters; files live
// under <output_dir>/models/.
std::string prior_checkpoint_path(const ExperimentConfig& cfg, const std::string& ds_hash);
flow::FlowModel ensure_prior(const ExperimentConfig& cfg, const std::string& ds_hash,
                             flow::TrainCurve* curve = nullptr);
rl::GaussianPolicy ensure_bc(const ExperimentConfig& cfg, const std::string& ds_hash);
baselines::CvaePrior ensure_cvae(const ExperimentConfig& cfg, const std::string& ds_hash);

void save_policy(const std::string& path, const rl::GaussianPolicy& policy);
rl::GaussianPolicy load_policy(const std::string& path);
void save_cvae(const std::string& path, const baselines::CvaePrior& model);
baselines::CvaePrior load_cvae(const std::string& path);

std::string run_csv_path(const ExperimentConfig& cfg, uint64_t seed);

/// One (method, task, seed) run. Writes the metrics CSV atomically and
/// returns the log. If the CSV already exists with a matching config hash
/// the run is skipped and the cached log returned; runs are byte-identical
/// either way because everything is seeded.
rl::MetricsLog run_experiment_seed(const ExperimentConfig& cfg, uint64_t seed,
                                   bool force = false);

/// All seeds of one experiment, optionally in parallel, plus the merged
/// mean/std curve file "<output_dir>/<method>-<task>-curve.csv".
std::vector<rl::MetricsLog> run_experiment(const ExperimentConfig& cfg, long jobs = 1,
                                           bool force = false);

struct MismatchReport {
    double pickplace_prior_on_grasp = 0.0;
    double grasp_prior_on_pickplace = 0.0;
    double mixed_on_grasp = 0.0;
    double mixed_on_pickplace = 0.0;
    bool transfer_ok = false;     // pickplace-trained prior solves grasp
    bool mismatch_fails = false;  // grasp-trained prior near zero on pickplace
    std::string to_string() const;
};

/// Fig. 7 analog grid: priors from grasp-only / pickplace-only / mixed
/// data, each evaluated on both task families.
MismatchReport ablation_mismatch(const ExperimentConfig& base, long jobs);

struct SizeReport {
    double success_1k = 0.0;
    double success_5k = 0.0;
    double success_10k = 0.0;
    std::string to_string() const;
};

/// Fig. 5 analog grid: dataset sizes 1K / 5K / 10K on the grasp task.
SizeReport ablation_size(const ExperimentConfig& base, long jobs);

/// Final eval success averaged across seeds (last row of each log).
double final_success(const std::vector<rl::MetricsLog>& logs);

} // namespace parrot::harness
