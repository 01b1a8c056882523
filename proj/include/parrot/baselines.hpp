#pragma once

#include <string>
#include <vector>

#include "parrot/flow.hpp"
#include "parrot/runner.hpp"
#include "parrot/sac.hpp"

namespace parrot::baselines {

using nd::Graph;
using nd::Param;
using nd::Rng;
using nd::Tensor;
using nd::Value;

struct BcConfig {
    double learning_rate = 3e-4;
    long steps = 30000;
    long batch_size = 256;
    double entropy_weight = 1e-3;
    double validation_fraction = 0.05;
    long group_size = 1;
    long hidden_units = 256; // must match the SAC actor to fine-tune it
    uint64_t seed = 2;
    long eval_every = 1000;
};

struct BcResult {
    rl::GaussianPolicy policy;
    double init_val_nll = 0.0;
    double final_val_nll = 0.0;
};

/// Behavioral cloning: maximum likelihood of a Gaussian policy on the
/// dataset plus a small entropy bonus. The result loads directly as the
/// SAC actor.
BcResult train_bc(const Tensor& obs, const Tensor& act, const BcConfig& cfg);

/// Mean negative log likelihood of a Gaussian policy on held-out rows;
/// comparable against flow and CVAE numbers on the same split.
double bc_nll(const rl::GaussianPolicy& policy, const Tensor& obs, const Tensor& act);

/// Conditional VAE over actions (the HIRL baseline): encoder
/// (a, psi(s)) -> q(z'|a,s), decoder (z', psi(s)) -> a. The decoder plays
/// the role of the flow mapping at RL time but has no inverse.
class CvaePrior {
  public:
    CvaePrior() = default;
    CvaePrior(long action_dim, long obs_dim, long feat_dim = 32, long hidden = 128);

    void init(Rng& rng);

    long action_dim() const { return action_dim_; }
    long obs_dim() const { return obs_dim_; }

    struct Posterior {
        Value mean;
        Value log_std;
    };
    Posterior encode_graph(Graph& g, Value act, Value psi) const;
    Value decode_graph(Graph& g, Value z, Value psi) const;
    Value psi_graph(Graph& g, Value obs) const { return psi_.forward(g, obs); }

    /// Deterministic decoder map for RL execution.
    std::vector<double> decode(const std::vector<double>& z,
                               const std::vector<double>& obs) const;

    std::vector<Param*> params();

  private:
    long action_dim_ = 0;
    long obs_dim_ = 0;
    flow::ConditionEncoder psi_;
    nd::PairLinear enc_in_;
    nd::Linear enc_mid_;
    nd::Linear enc_mean_;
    nd::Linear enc_logstd_;
    nd::PairLinear dec_in_;
    nd::Linear dec_mid_;
    nd::Linear dec_out_;
};

struct CvaeConfig {
    double learning_rate = 1e-4;
    long steps = 50000;
    long batch_size = 256;
    double beta_target = 0.001;
    double beta_half_step = 25000; // logistic anneal reaches beta_target/2 here
    double validation_fraction = 0.05;
    long group_size = 1;
    uint64_t seed = 3;
    long eval_every = 1000;
};

/// Logistic annealing schedule for the KL weight; exactly beta_target/2 at
/// beta_half_step and approximately zero at step 0.
double cvae_beta(long step, const CvaeConfig& cfg);

struct CvaeResult {
    double init_val_loss = 0.0;
    double final_val_loss = 0.0;
    double final_recon_mse = 0.0; // per-sample mean squared error, training set
};

CvaeResult train_cvae(CvaePrior& model, const Tensor& obs, const Tensor& act,
                      const CvaeConfig& cfg);

/// Negative ELBO per sample (upper bound on NLL) on held-out rows, with
/// a unit-variance Gaussian likelihood; comparable across models.
double cvae_neg_elbo(const CvaePrior& model, const Tensor& obs, const Tensor& act,
                     double beta = 1.0);

// Comparison runs; all share run_rl and its logging.
rl::MetricsLog run_sac_scratch(const rl::RunConfig& cfg,
                               rl::GaussianPolicy* final_policy = nullptr);
rl::MetricsLog run_bc_sac(const rl::GaussianPolicy& bc_policy, const rl::RunConfig& cfg,
                          rl::GaussianPolicy* final_policy = nullptr);
rl::MetricsLog run_hirl(const CvaePrior& prior, const rl::RunConfig& cfg,
                        rl::GaussianPolicy* final_policy = nullptr);
rl::MetricsLog run_prior_explore(const flow::FlowModel& prior, double eps,
                                 const rl::RunConfig& cfg,
                                 rl::GaussianPolicy* final_policy = nullptr);

} // namespace parrot::baselines
