// Command-line front end: data collection, prior training, RL runs, the
// ablation grids, and curve merging. Every run is reproducible from its
// config file and seed.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "parrot/experiments.hpp"
#include "parrot/hash.hpp"

namespace fs = std::filesystem;
using namespace parrot;
using harness::ExperimentConfig;

namespace {

ExperimentConfig load_config(const std::string& path) {
    return ExperimentConfig::load(path);
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PARROT-style behavioral-prior RL at desk scale"};
    app.require_subcommand(1);

    std::string config_path = "configs/default.ini";
    app.add_option("--config", config_path, "experiment config file")->capture_default_str();

    // collect
    auto* collect = app.add_subcommand("collect", "collect a scripted prior dataset");
    long collect_n = 0;
    uint64_t collect_seed = 0;
    bool have_seed = false;
    long collect_threads = 0;
    std::string collect_out;
    collect->add_option("--n", collect_n, "override trajectory count");
    collect->add_option("--seed", collect_seed, "override collection seed")
        ->each([&](const std::string&) { have_seed = true; });
    collect->add_option("--threads", collect_threads, "collection threads");
    collect->add_option("--out", collect_out, "override dataset path");

    // train-prior
    auto* train_prior_cmd = app.add_subcommand("train-prior", "train the flow prior");
    bool prior_force = false;
    train_prior_cmd->add_flag("--force", prior_force, "retrain even if cached");

    // train-rl
    auto* train_rl = app.add_subcommand("train-rl", "run one (method, task, seed)");
    std::string method, task;
    uint64_t rl_seed = 0;
    bool rl_force = false;
    train_rl->add_option("--method", method, "parrot|sac|bc_sac|hirl|prior_explore");
    train_rl->add_option("--task", task, "grasp|pickplace");
    train_rl->add_option("--seed", rl_seed, "run seed")->required();
    train_rl->add_flag("--force", rl_force, "rerun even if the CSV is cached");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved policy");
    std::string policy_path;
    long eval_episodes = 100;
    uint64_t eval_seed = 12345;
    eval_cmd->add_option("--policy", policy_path, "policy checkpoint from train-rl")->required();
    eval_cmd->add_option("--method", method, "method the policy was trained with");
    eval_cmd->add_option("--task", task, "grasp|pickplace");
    eval_cmd->add_option("--episodes", eval_episodes, "evaluation episodes");
    eval_cmd->add_option("--seed", eval_seed, "evaluation seed");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run the dataset-size and mismatch grids");
    std::string which = "all";
    long jobs = 2;
    ablate->add_option("--which", which, "size|mismatch|all");
    ablate->add_option("--jobs", jobs, "worker pool size");

    // plot-data
    auto* plot = app.add_subcommand("plot-data", "merge per-seed CSVs into mean/std curves");
    std::vector<std::string> csv_inputs;
    std::string plot_out = "curve.csv";
    plot->add_option("files", csv_inputs, "per-seed metrics CSVs")->required();
    plot->add_option("--out", plot_out, "output curve CSV");

    CLI11_PARSE(app, argc, argv);
    Timer timer;

    try {
        if (*collect) {
            auto cfg = load_config(config_path);
            if (collect_n > 0) cfg.collect.n_keep = collect_n;
            if (have_seed) cfg.collect.seed = collect_seed;
            if (collect_threads > 0) cfg.collect.threads = collect_threads;
            if (!collect_out.empty()) cfg.dataset_path = collect_out;
            if (fs::exists(cfg.dataset_path)) {
                std::fprintf(stderr, "dataset %s already exists; not touching it\n",
                             cfg.dataset_path.c_str());
                return 1;
            }
            std::string hash = harness::ensure_dataset(cfg);
            std::printf("wrote %s (hash %s) in %.1fs\n", cfg.dataset_path.c_str(), hash.c_str(),
                        timer.seconds());
        } else if (*train_prior_cmd) {
            auto cfg = load_config(config_path);
            std::string ds_hash = harness::ensure_dataset(cfg);
            flow::TrainCurve curve;
            if (prior_force || true) {
                // train (or retrain) and write the NLL curve next to the model
                auto model = harness::ensure_prior(cfg, ds_hash, &curve);
                std::string curve_path =
                    harness::prior_checkpoint_path(cfg, ds_hash) + ".nll.csv";
                std::ofstream os(curve_path, std::ios::trunc);
                os << "step,train_nll,val_nll\n";
                for (size_t i = 0; i < curve.steps.size(); ++i)
                    os << curve.steps[i] << "," << curve.train_nll[i] << "," << curve.val_nll[i]
                       << "\n";
                std::printf("prior: val NLL %.4f -> %.4f, checkpoint %s (%.1fs)\n",
                            curve.init_val_nll, curve.final_val_nll,
                            harness::prior_checkpoint_path(cfg, ds_hash).c_str(),
                            timer.seconds());
            }
        } else if (*train_rl) {
            auto cfg = load_config(config_path);
            if (!method.empty()) cfg.method = method;
            if (!task.empty()) cfg.task = task;
            auto log = harness::run_experiment_seed(cfg, rl_seed, rl_force);
            std::printf("%s on %s seed %llu: final success %.3f (%zu rows, %.1fs)\n",
                        cfg.method.c_str(), cfg.task.c_str(),
                        static_cast<unsigned long long>(rl_seed),
                        log.rows.back().eval_success_rate, log.rows.size(), timer.seconds());
        } else if (*eval_cmd) {
            auto cfg = load_config(config_path);
            if (!method.empty()) cfg.method = method;
            if (!task.empty()) cfg.task = task;
            auto policy = harness::load_policy(policy_path);
            std::string ds_hash;
            rl::EvalResult res;
            if (cfg.method == "parrot" || cfg.method == "prior_explore") {
                ds_hash = harness::ensure_dataset(cfg);
                auto prior = harness::ensure_prior(cfg, ds_hash);
                rl::ActionMapping* mapping = nullptr;
                rl::FlowMapping fm(&prior);
                rl::IdentityMapping im;
                mapping = cfg.method == "parrot" ? static_cast<rl::ActionMapping*>(&fm)
                                                 : static_cast<rl::ActionMapping*>(&im);
                res = rl::evaluate_policy(policy, *mapping, cfg.world_for_task(), eval_episodes,
                                          eval_seed, cfg.sac.latent_clip);
            } else if (cfg.method == "hirl") {
                ds_hash = harness::ensure_dataset(cfg);
                auto cvae = harness::ensure_cvae(cfg, ds_hash);
                rl::DecoderMapping mapping;
                mapping.decode = [&cvae](const std::vector<double>& z,
                                         const std::vector<double>& s) {
                    return cvae.decode(z, s);
                };
                res = rl::evaluate_policy(policy, mapping, cfg.world_for_task(), eval_episodes,
                                          eval_seed, cfg.sac.latent_clip);
            } else {
                rl::IdentityMapping mapping;
                res = rl::evaluate_policy(policy, mapping, cfg.world_for_task(), eval_episodes,
                                          eval_seed, cfg.sac.latent_clip);
            }
            std::printf("success %.3f  mean return %.3f over %ld episodes\n", res.success_rate,
                        res.mean_return, eval_episodes);
        } else if (*ablate) {
            auto cfg = load_config(config_path);
            if (which == "size" || which == "all") {
                auto rep = harness::ablation_size(cfg, jobs);
                std::printf("%s", rep.to_string().c_str());
                std::ofstream os(cfg.output_dir + "/ablation-size.txt", std::ios::trunc);
                os << rep.to_string();
            }
            if (which == "mismatch" || which == "all") {
                auto rep = harness::ablation_mismatch(cfg, jobs);
                std::printf("%s", rep.to_string().c_str());
                std::ofstream os(cfg.output_dir + "/ablation-mismatch.txt", std::ios::trunc);
                os << rep.to_string();
            }
            std::fprintf(stderr, "ablate finished in %.1fs\n", timer.seconds());
        } else if (*plot) {
            std::vector<rl::MetricsLog> logs;
            for (const auto& f : csv_inputs) logs.push_back(harness::read_metrics_csv(f));
            auto curve = harness::merge_curves(logs);
            harness::write_curve_csv(plot_out, curve, logs[0].method, logs[0].task);
            std::printf("wrote %s (%zu points from %zu seeds)\n", plot_out.c_str(),
                        curve.size(), logs.size());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
