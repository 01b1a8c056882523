#pragma once

#include <functional>
#include <string>
#include <vector>

#include "parrot/env.hpp"
#include "parrot/flow.hpp"
#include "parrot/sac.hpp"

namespace parrot::rl {

/// Frozen map from the policy's latent output to the environment action.
/// The identity mapping makes the runner a vanilla SAC baseline; the flow
/// mapping is the prior-accelerated agent; a decoder mapping plugs in the
/// conditional-VAE baseline.
struct ActionMapping {
    virtual ~ActionMapping() = default;
    virtual std::vector<double> apply(const std::vector<double>& z,
                                      const std::vector<double>& obs) const = 0;
    /// Replay schema tag: "latent" when the buffer stores z distinct from
    /// the executed action, "raw" when it stores the action itself.
    virtual const char* schema() const = 0;
};

struct IdentityMapping final : ActionMapping {
    std::vector<double> apply(const std::vector<double>& z,
                              const std::vector<double>&) const override {
        return z;
    }
    const char* schema() const override { return "raw"; }
};

struct FlowMapping final : ActionMapping {
    const flow::FlowModel* model;
    explicit FlowMapping(const flow::FlowModel* m) : model(m) {}
    std::vector<double> apply(const std::vector<double>& z,
                              const std::vector<double>& obs) const override {
        return model->forward_map(z, obs);
    }
    const char* schema() const override { return "latent"; }
};

/// Mapping backed by an arbitrary decoder function (CVAE baseline).
struct DecoderMapping final : ActionMapping {
    std::function<std::vector<double>(const std::vector<double>&, const std::vector<double>&)>
        decode;
    const char* tag = "latent";
    std::vector<double> apply(const std::vector<double>& z,
                              const std::vector<double>& obs) const override {
        return decode(z, obs);
    }
    const char* schema() const override { return tag; }
};

struct MetricsRow {
    long env_step = 0;
    double eval_success_rate = 0.0;
    double mean_episode_return = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double alpha = 0.0;
};

struct MetricsLog {
    std::string method;
    std::string task;
    uint64_t seed = 0;
    std::string schema; // replay schema tag of the method
    std::string config_hash;
    std::string dataset_hash;
    std::vector<MetricsRow> rows; // strictly increasing env_step
};

struct RunConfig {
    env::WorldSpec world;
    SacConfig sac;
    long total_env_steps = 100000;
    long eval_period = 5000;
    long eval_episodes = 20;
    uint64_t seed = 0;

    // Prior-explore: with probability explore_eps the executed action is a
    // sample from the prior instead of the policy's mapped action.
    double explore_eps = 0.0;
    const flow::FlowModel* explore_prior = nullptr;
};

/// Deterministic evaluation: episodes under the policy mean, averaged
/// success rate and return.
struct EvalResult {
    double success_rate = 0.0;
    double mean_return = 0.0;
};
EvalResult evaluate_policy(const GaussianPolicy& policy, const ActionMapping& mapping,
                           const env::WorldSpec& world, long episodes, uint64_t seed,
                           double latent_clip);

/// The collect-store-update loop shared by every method. The mapping is
/// frozen; the replay buffer stores the latent fed to it. Evaluation runs
/// every eval_period env steps plus once at step zero and once at the end.
/// `init_actor` (when given) seeds the policy weights before training.
MetricsLog run_rl(const ActionMapping& mapping, const RunConfig& cfg,
                  const std::string& method_tag,
                  const GaussianPolicy* init_actor = nullptr,
                  std::function<void(long, const MetricsRow&)> on_eval = {},
                  GaussianPolicy* final_policy = nullptr);

/// Algorithm wrapper: latent-space SAC through a trained flow.
MetricsLog run_parrot(const flow::FlowModel& prior, const RunConfig& cfg,
                      GaussianPolicy* final_policy = nullptr);

} // namespace parrot::rl
