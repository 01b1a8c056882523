#pragma once

#include <memory>
#include <string>
#include <vector>

#include "parrot/adam.hpp"
#include "parrot/nn.hpp"
#include "parrot/replay.hpp"
#include "parrot/rng.hpp"

namespace parrot::rl {

using nd::Graph;
using nd::Param;
using nd::Rng;
using nd::Tensor;
using nd::Value;

/// Diagonal Gaussian policy over the latent space. Zero-initialized output
/// heads give mean 0 and std 1 everywhere at construction, i.e. the policy
/// starts as the flow's base distribution.
class GaussianPolicy {
  public:
    GaussianPolicy() = default;
    GaussianPolicy(const std::string& name, long obs_dim, long act_dim, long hidden);

    void init(Rng& rng);

    struct Heads {
        Value mean;
        Value log_std; // clamped to [log_std_min, log_std_max]
    };
    Heads forward(Graph& g, Value obs) const;

    /// Draws z (stochastic) or returns the mean (deterministic). Pre-clip.
    std::vector<double> select_latent(const std::vector<double>& obs, Rng& rng,
                                      bool deterministic) const;

    long obs_dim() const { return obs_dim_; }
    long act_dim() const { return act_dim_; }
    void collect(std::vector<Param*>& out);
    std::vector<Param*> params();
    void copy_from(const GaussianPolicy& other);

    static constexpr double kLogStdMin = -5.0;
    static constexpr double kLogStdMax = 2.0;

  private:
    long obs_dim_ = 0;
    long act_dim_ = 0;
    nd::Mlp trunk_;        // obs -> hidden
    nd::Linear mean_head_; // hidden -> D
    nd::Linear std_head_;  // hidden -> D (log std)
};

/// Q(s, z) MLP with two hidden layers. The zero-initialized output layer
/// starts every Q estimate at zero, matching the all-zero-reward start.
class QFunction {
  public:
    QFunction() = default;
    QFunction(const std::string& name, long obs_dim, long act_dim, long hidden);

    void init(Rng& rng);
    Value forward(Graph& g, Value obs, Value act) const;
    double value(const std::vector<double>& obs, const std::vector<double>& act) const;
    void collect(std::vector<Param*>& out);
    std::vector<Param*> params();
    void copy_from(const QFunction& other);

  private:
    nd::PairLinear in_;
    nd::Linear mid_;
    nd::Linear out_;
};

struct SacConfig {
    double gamma = 0.99;
    double policy_lr = 3e-4;
    double q_lr = 3e-4;
    double alpha_lr = 3e-4;
    double reward_scale = 1.0;
    long target_update_period = 1000; // hard copy every this many updates
    long updates_per_step = 1;
    long batch_size = 256;
    long hidden_units = 256;
    bool auto_entropy = true;
    double init_alpha = 1.0;
    double target_entropy_per_dim = -1.0; // target entropy = -D
    long warmup_steps = 1000;
    long replay_capacity = 200000;
    double latent_clip = 4.0; // |z| bound applied before mapping execution
    // quadratic penalty on actor samples outside the clip box; zero inside,
    // keeps the unsquashed policy mean from drifting into the flat region
    double latent_penalty = 1e-2;

    void validate() const;
};

/// Twin-critic SAC over (s, z) with automatic temperature tuning.
///
/// Update order per call is fixed and documented for oracle tests:
/// 1. draw target noise eps' [B,D] row-major, compute targets
///    y = r_scaled + gamma * (1 - done) * (min target Q - alpha log pi),
/// 2. critic step on mean squared error of both critics,
/// 3. draw actor noise eps [B,D], actor step on mean(alpha log pi - min Q),
/// 4. alpha step on mean(-log_alpha * (log pi + target_entropy)),
/// 5. hard-copy targets every target_update_period updates.
class SacLearner {
  public:
    SacLearner(long obs_dim, long latent_dim, const SacConfig& cfg, uint64_t seed);

    struct Losses {
        double critic = 0.0;
        double actor = 0.0;
        double alpha_loss = 0.0;
    };
    Losses update(const ReplayBuffer::Batch& batch);

    double alpha() const;
    double target_entropy() const { return target_entropy_; }
    long update_count() const { return updates_; }
    const SacConfig& config() const { return cfg_; }

    GaussianPolicy& policy() { return policy_; }
    const GaussianPolicy& policy() const { return policy_; }
    const QFunction& q1() const { return q1_; }
    const QFunction& q2() const { return q2_; }
    const QFunction& target_q1() const { return t1_; }
    const QFunction& target_q2() const { return t2_; }

    /// Replays the learner's internal noise stream; oracle tests use this
    /// to reproduce the exact update targets.
    Rng noise_rng_snapshot() const { return noise_rng_; }

  private:
    SacConfig cfg_;
    long latent_dim_;
    double target_entropy_;
    GaussianPolicy policy_;
    QFunction q1_, q2_, t1_, t2_;
    Param log_alpha_;
    std::unique_ptr<nd::Adam> policy_opt_;
    std::unique_ptr<nd::Adam> q_opt_;
    std::unique_ptr<nd::Adam> alpha_opt_;
    Rng noise_rng_;
    long updates_ = 0;

    void sync_targets();
};

} // namespace parrot::rl
