#include "parrot/experiments.hpp"

#include <atomic>
#include <map>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "parrot/checkpoint.hpp"
#include "parrot/hash.hpp"

namespace fs = std::filesystem;

namespace parrot::harness {

void run_jobs(const std::vector<std::function<void()>>& jobs, long workers) {
    workers = std::max<long>(1, workers);
    if (workers == 1 || jobs.size() <= 1) {
        for (const auto& j : jobs) j();
        return;
    }
    std::atomic<size_t> cursor{0};
    std::mutex err_mutex;
    std::string first_error;
    std::vector<std::thread> pool;
    for (long w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            while (true) {
                size_t i = cursor.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    jobs[i]();
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (first_error.empty()) first_error = e.what();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (!first_error.empty()) throw std::runtime_error(first_error);
}

std::string ensure_dataset(const ExperimentConfig& cfg) {
    if (!fs::exists(cfg.dataset_path)) {
        fs::path dir = fs::path(cfg.dataset_path).parent_path();
        if (!dir.empty()) fs::create_directories(dir);
        scripted::CollectConfig c = cfg.collect;
        c.proto = cfg.world; // kind/target randomized per episode by the collector
        auto ds = scripted::collect_dataset(c);
        std::string tmp = cfg.dataset_path + ".tmp";
        scripted::save_dataset(tmp, ds);
        fs::rename(tmp, cfg.dataset_path);
    }
    return hex64(hash_file(cfg.dataset_path));
}

ExperimentConfig variant_config(const ExperimentConfig& base, DatasetVariant v) {
    ExperimentConfig cfg = base;
    fs::path p(base.dataset_path);
    std::string stem = (p.parent_path() / p.stem()).string();
    switch (v) {
        case DatasetVariant::Mixed:
            break;
        case DatasetVariant::GraspOnly:
            cfg.collect.grasp_fraction = 1.0;
            cfg.dataset_path = stem + "-grasponly.prds";
            break;
        case DatasetVariant::PickPlaceOnly:
            cfg.collect.grasp_fraction = 0.0;
            cfg.dataset_path = stem + "-pickplaceonly.prds";
            break;
        case DatasetVariant::Size1K:
            cfg.collect.n_keep = 1000;
            cfg.dataset_path = stem + "-1k.prds";
            break;
        case DatasetVariant::Size5K:
            cfg.collect.n_keep = 5000;
            cfg.dataset_path = stem + "-5k.prds";
            break;
    }
    return cfg;
}

namespace {

std::string models_dir(const ExperimentConfig& cfg) {
    fs::path dir = fs::path(cfg.output_dir) / "models";
    fs::create_directories(dir);
    return dir.string();
}

std::string short_hash(const std::string& text) { return hex64(fnv1a(text)).substr(0, 12); }

std::string meta_path_of(const std::string& ckpt) { return ckpt + ".meta"; }

bool checkpoint_fresh(const std::string& ckpt, const std::string& key) {
    std::ifstream is(meta_path_of(ckpt) + ".key");
    if (!is) return false;
    std::string stored;
    std::getline(is, stored);
    return stored == key && fs::exists(ckpt);
}

void stamp_checkpoint(const std::string& ckpt, const std::string& key) {
    std::ofstream os(meta_path_of(ckpt) + ".key", std::ios::trunc);
    os << key << "\n";
}

} // namespace

std::string prior_checkpoint_path(const ExperimentConfig& cfg, const std::string& ds_hash) {
    std::ostringstream key;
    key << ds_hash << "|" << cfg.flow_feat_dim << "|" << cfg.flow_layers << "|"
        << cfg.flow_hidden << "|" << cfg.flow_clamp << "|" << cfg.prior.learning_rate << "|"
        << cfg.prior.steps << "|" << cfg.prior.batch_size << "|" << cfg.prior.seed;
    return models_dir(cfg) + "/prior-" + short_hash(key.str()) + ".ndif";
}

flow::FlowModel ensure_prior(const ExperimentConfig& cfg, const std::string& ds_hash,
                             flow::TrainCurve* curve) {
    std::string ckpt = prior_checkpoint_path(cfg, ds_hash);
    if (curve == nullptr && checkpoint_fresh(ckpt, ds_hash)) return flow::load_flow(ckpt);

    auto ds = scripted::load_dataset(cfg.dataset_path);
    nd::Tensor obs, act;
    ds.to_matrices(obs, act);

    flow::FlowModel model(ds.act_dim, ds.obs_dim, cfg.flow_feat_dim, cfg.flow_layers,
                          cfg.flow_hidden, cfg.flow_clamp);
    nd::Rng init_rng(nd::Rng::derive(cfg.prior.seed, {0xf10au}));
    model.init(init_rng);

    flow::PriorTrainConfig pcfg = cfg.prior;
    pcfg.group_size = ds.episode_len;
    auto tc = flow::train_prior(model, obs, act, pcfg);
    if (curve) *curve = tc;

    std::ostringstream extra;
    flow::save_flow(ckpt, model,
                    {{"dataset_hash", ds_hash},
                     {"learning_rate", std::to_string(pcfg.learning_rate)},
                     {"steps", std::to_string(pcfg.steps)},
                     {"batch_size", std::to_string(pcfg.batch_size)},
                     {"final_val_nll", std::to_string(tc.final_val_nll)}});
    stamp_checkpoint(ckpt, ds_hash);
    return model;
}

void save_policy(const std::string& path, const rl::GaussianPolicy& policy) {
    auto params = const_cast<rl::GaussianPolicy&>(policy).params();
    nd::save_params(path, std::vector<const nd::Param*>(params.begin(), params.end()));
    std::ofstream os(meta_path_of(path), std::ios::trunc);
    os << "obs_dim = " << policy.obs_dim() << "\n";
    os << "act_dim = " << policy.act_dim() << "\n";
    // hidden width is recoverable from the trunk parameter shapes
    auto& p0 = *params[0];
    os << "hidden = " << p0.value.shape()[1] << "\n";
    os << "name = " << params[0]->name.substr(0, params[0]->name.find('/')) << "\n";
}

rl::GaussianPolicy load_policy(const std::string& path) {
    std::ifstream is(meta_path_of(path));
    if (!is) throw std::runtime_error("load_policy: missing sidecar for " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    rl::GaussianPolicy policy(kv.at("name"), std::stol(kv.at("obs_dim")),
                              std::stol(kv.at("act_dim")), std::stol(kv.at("hidden")));
    auto params = policy.params();
    nd::load_params(path, params);
    return policy;
}

rl::GaussianPolicy ensure_bc(const ExperimentConfig& cfg, const std::string& ds_hash) {
    std::ostringstream key;
    key << ds_hash << "|" << cfg.bc.learning_rate << "|" << cfg.bc.steps << "|"
        << cfg.bc.batch_size << "|" << cfg.bc.entropy_weight << "|" << cfg.sac.hidden_units;
    std::string ckpt = models_dir(cfg) + "/bc-" + short_hash(key.str()) + ".ndif";
    if (checkpoint_fresh(ckpt, key.str())) return load_policy(ckpt);

    auto ds = scripted::load_dataset(cfg.dataset_path);
    nd::Tensor obs, act;
    ds.to_matrices(obs, act);
    baselines::BcConfig bcfg = cfg.bc;
    bcfg.hidden_units = cfg.sac.hidden_units; // must load as the SAC actor
    bcfg.group_size = ds.episode_len;
    auto res = baselines::train_bc(obs, act, bcfg);
    save_policy(ckpt, res.policy);
    stamp_checkpoint(ckpt, key.str());
    return std::move(res.policy);
}

void save_cvae(const std::string& path, const baselines::CvaePrior& model) {
    auto params = const_cast<baselines::CvaePrior&>(model).params();
    nd::save_params(path, std::vector<const nd::Param*>(params.begin(), params.end()));
    std::ofstream os(meta_path_of(path), std::ios::trunc);
    os << "action_dim = " << model.action_dim() << "\n";
    os << "obs_dim = " << model.obs_dim() << "\n";
}

baselines::CvaePrior load_cvae(const std::string& path) {
    std::ifstream is(meta_path_of(path));
    if (!is) throw std::runtime_error("load_cvae: missing sidecar for " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    baselines::CvaePrior model(std::stol(kv.at("action_dim")), std::stol(kv.at("obs_dim")));
    auto params = model.params();
    nd::load_params(path, params);
    return model;
}

baselines::CvaePrior ensure_cvae(const ExperimentConfig& cfg, const std::string& ds_hash) {
    std::ostringstream key;
    key << ds_hash << "|" << cfg.cvae.learning_rate << "|" << cfg.cvae.steps << "|"
        << cfg.cvae.batch_size << "|" << cfg.cvae.beta_target << "|" << cfg.cvae.beta_half_step;
    std::string ckpt = models_dir(cfg) + "/cvae-" + short_hash(key.str()) + ".ndif";
    if (checkpoint_fresh(ckpt, key.str())) return load_cvae(ckpt);

    auto ds = scripted::load_dataset(cfg.dataset_path);
    nd::Tensor obs, act;
    ds.to_matrices(obs, act);
    baselines::CvaePrior model(ds.act_dim, ds.obs_dim);
    nd::Rng init_rng(nd::Rng::derive(cfg.cvae.seed, {0xc4aeu}));
    model.init(init_rng);
    baselines::CvaeConfig ccfg = cfg.cvae;
    ccfg.group_size = ds.episode_len;
    baselines::train_cvae(model, obs, act, ccfg);
    save_cvae(ckpt, model);
    stamp_checkpoint(ckpt, key.str());
    return model;
}

std::string run_csv_path(const ExperimentConfig& cfg, uint64_t seed) {
    fs::create_directories(cfg.output_dir);
    return cfg.output_dir + "/" + cfg.method + "-" + cfg.task + "-s" + std::to_string(seed) +
           ".csv";
}

rl::MetricsLog run_experiment_seed(const ExperimentConfig& cfg, uint64_t seed, bool force) {
    std::string csv = run_csv_path(cfg, seed);
    std::string chash = cfg.config_hash();
    if (!force && fs::exists(csv)) {
        auto cached = read_metrics_csv(csv);
        if (cached.config_hash == chash) return cached;
    }

    std::string ds_hash = ensure_dataset(cfg);
    rl::RunConfig rc = cfg.run_config(seed);
    rl::MetricsLog log;
    rl::GaussianPolicy policy;

    if (cfg.method == "parrot") {
        auto prior = ensure_prior(cfg, ds_hash);
        log = rl::run_parrot(prior, rc, &policy);
    } else if (cfg.method == "sac") {
        log = baselines::run_sac_scratch(rc, &policy);
    } else if (cfg.method == "bc_sac") {
        auto bc = ensure_bc(cfg, ds_hash);
        log = baselines::run_bc_sac(bc, rc, &policy);
    } else if (cfg.method == "hirl") {
        auto cvae = ensure_cvae(cfg, ds_hash);
        log = baselines::run_hirl(cvae, rc, &policy);
    } else if (cfg.method == "prior_explore") {
        auto prior = ensure_prior(cfg, ds_hash);
        log = baselines::run_prior_explore(prior, cfg.explore_eps, rc, &policy);
    } else {
        throw std::runtime_error("unknown method '" + cfg.method + "'");
    }

    log.config_hash = chash;
    log.dataset_hash = cfg.method == "sac" ? "none" : ds_hash;
    write_metrics_csv(csv, log);
    save_policy(csv.substr(0, csv.size() - 4) + "-policy.ndif", policy);
    return log;
}

std::vector<rl::MetricsLog> run_experiment(const ExperimentConfig& cfg, long jobs, bool force) {
    // train shared artifacts up front so parallel seed runs only read them
    std::string ds_hash = ensure_dataset(cfg);
    if (cfg.method == "parrot" || cfg.method == "prior_explore") ensure_prior(cfg, ds_hash);
    if (cfg.method == "bc_sac") ensure_bc(cfg, ds_hash);
    if (cfg.method == "hirl") ensure_cvae(cfg, ds_hash);

    std::vector<rl::MetricsLog> logs(cfg.seeds.size());
    std::vector<std::function<void()>> tasks;
    for (size_t i = 0; i < cfg.seeds.size(); ++i)
        tasks.push_back([&, i] { logs[i] = run_experiment_seed(cfg, cfg.seeds[i], force); });
    run_jobs(tasks, jobs);

    auto curve = merge_curves(logs);
    write_curve_csv(cfg.output_dir + "/" + cfg.method + "-" + cfg.task + "-curve.csv", curve,
                    cfg.method, cfg.task);
    return logs;
}

double final_success(const std::vector<rl::MetricsLog>& logs) {
    double s = 0;
    for (const auto& l : logs) s += l.rows.back().eval_success_rate;
    return s / static_cast<double>(logs.size());
}

std::string MismatchReport::to_string() const {
    std::ostringstream os;
    os << "train/test mismatch grid (final success, mean over seeds)\n";
    os << "  pickplace-trained prior on grasp:    " << pickplace_prior_on_grasp << "\n";
    os << "  grasp-trained prior on pickplace:    " << grasp_prior_on_pickplace << "\n";
    os << "  mixed prior on grasp:                " << mixed_on_grasp << "\n";
    os << "  mixed prior on pickplace:            " << mixed_on_pickplace << "\n";
    os << "  transfer (pickplace->grasp works):   " << (transfer_ok ? "yes" : "no") << "\n";
    os << "  mismatch (grasp->pickplace fails):   " << (mismatch_fails ? "yes" : "no") << "\n";
    return os.str();
}

MismatchReport ablation_mismatch(const ExperimentConfig& base, long jobs) {
    MismatchReport rep;
    struct Cell {
        DatasetVariant variant;
        std::string task;
        double* out;
    };
    std::vector<Cell> cells = {
        {DatasetVariant::PickPlaceOnly, "grasp", &rep.pickplace_prior_on_grasp},
        {DatasetVariant::GraspOnly, "pickplace", &rep.grasp_prior_on_pickplace},
        {DatasetVariant::Mixed, "grasp", &rep.mixed_on_grasp},
        {DatasetVariant::Mixed, "pickplace", &rep.mixed_on_pickplace},
    };
    for (const auto& cell : cells) {
        ExperimentConfig cfg = variant_config(base, cell.variant);
        cfg.method = "parrot";
        cfg.task = cell.task;
        auto logs = run_experiment(cfg, jobs);
        *cell.out = final_success(logs);
    }
    rep.transfer_ok = rep.pickplace_prior_on_grasp >= 0.5;
    rep.mismatch_fails = rep.grasp_prior_on_pickplace <= 0.1;
    return rep;
}

std::string SizeReport::to_string() const {
    std::ostringstream os;
    os << "dataset size grid (final grasp success, mean over seeds)\n";
    os << "  1K trajectories:  " << success_1k << "\n";
    os << "  5K trajectories:  " << success_5k << "\n";
    os << "  10K trajectories: " << success_10k << "\n";
    return os.str();
}

SizeReport ablation_size(const ExperimentConfig& base, long jobs) {
    SizeReport rep;
    struct Cell {
        DatasetVariant variant;
        double* out;
    };
    std::vector<Cell> cells = {
        {DatasetVariant::Size1K, &rep.success_1k},
        {DatasetVariant::Size5K, &rep.success_5k},
        {DatasetVariant::Mixed, &rep.success_10k},
    };
    for (const auto& cell : cells) {
        ExperimentConfig cfg = variant_config(base, cell.variant);
        cfg.method = "parrot";
        cfg.task = "grasp";
        auto logs = run_experiment(cfg, jobs);
        *cell.out = final_success(logs);
    }
    return rep;
}

} // namespace parrot::harness
