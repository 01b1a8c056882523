#include "parrot/sac.hpp"

#include <cmath>
#include <stdexcept>

namespace parrot::rl {

GaussianPolicy::GaussianPolicy(const std::string& name, long obs_dim, long act_dim, long hidden)
    : obs_dim_(obs_dim), act_dim_(act_dim), trunk_(name + "/trunk", obs_dim, {hidden}, hidden),
      mean_head_(name + "/mean", hidden, act_dim), std_head_(name + "/logstd", hidden, act_dim) {}

void GaussianPolicy::init(Rng& rng) {
    trunk_.init(rng); // two hidden layers via trunk (in->h->h), linear output relu'd below
    nd::init_zero(mean_head_.W);
    nd::init_zero(mean_head_.b);
    nd::init_zero(std_head_.W);
    nd::init_zero(std_head_.b); // log std 0 -> std 1 at initialization
}

GaussianPolicy::Heads GaussianPolicy::forward(Graph& g, Value obs) const {
    Value h = g.relu(trunk_.forward(g, obs));
    Value mean = mean_head_.forward(g, h);
    Value log_std = g.clamp(std_head_.forward(g, h), kLogStdMin, kLogStdMax);
    return {mean, log_std};
}

std::vector<double> GaussianPolicy::select_latent(const std::vector<double>& obs, Rng& rng,
                                                  bool deterministic) const {
    Graph g(false);
    auto heads = forward(g, g.leaf(Tensor::row(obs)));
    const Tensor& mean = g.value(heads.mean);
    const Tensor& log_std = g.value(heads.log_std);
    std::vector<double> z(static_cast<size_t>(act_dim_));
    for (long i = 0; i < act_dim_; ++i) {
        z[static_cast<size_t>(i)] =
            deterministic ? mean[i] : mean[i] + std::exp(log_std[i]) * rng.normal();
    }
    return z;
}

void GaussianPolicy::collect(std::vector<Param*>& out) {
    trunk_.collect(out);
    mean_head_.collect(out);
    std_head_.collect(out);
}

std::vector<Param*> GaussianPolicy::params() {
    std::vector<Param*> out;
    collect(out);
    return out;
}

void GaussianPolicy::copy_from(const GaussianPolicy& other) {
    auto dst = params();
    auto src = const_cast<GaussianPolicy&>(other).params();
    if (dst.size() != src.size())
        throw std::runtime_error("GaussianPolicy::copy_from: parameter count mismatch");
    for (size_t i = 0; i < dst.size(); ++i) {
        if (dst[i]->value.shape() != src[i]->value.shape())
            throw std::runtime_error("GaussianPolicy::copy_from: shape mismatch for " +
                                     dst[i]->name);
        dst[i]->value = src[i]->value;
    }
}

QFunction::QFunction(const std::string& name, long obs_dim, long act_dim, long hidden)
    : in_(name + "/in", obs_dim, act_dim, hidden), mid_(name + "/mid", hidden, hidden),
      out_(name + "/out", hidden, 1) {}

void QFunction::init(Rng& rng) {
    nd::init_he(in_.Wa, in_.Wa.value.shape()[0], rng);
    nd::init_he(in_.Wb, in_.Wb.value.shape()[0], rng);
    nd::init_zero(in_.b);
    nd::init_he(mid_.W, mid_.W.value.shape()[0], rng);
    nd::init_zero(mid_.b);
    nd::init_zero(out_.W); // Q starts at zero everywhere
    nd::init_zero(out_.b);
}

Value QFunction::forward(Graph& g, Value obs, Value act) const {
    Value h = g.relu(in_.forward(g, obs, act));
    h = g.relu(mid_.forward(g, h));
    return out_.forward(g, h);
}

double QFunction::value(const std::vector<double>& obs, const std::vector<double>& act) const {
    Graph g(false);
    auto q = forward(g, g.leaf(Tensor::row(obs)), g.leaf(Tensor::row(act)));
    return g.value(q)[0];
}

void QFunction::collect(std::vector<Param*>& out) {
    in_.collect(out);
    mid_.collect(out);
    out_.collect(out);
}

std::vector<Param*> QFunction::params() {
    std::vector<Param*> out;
    collect(out);
    return out;
}

void QFunction::copy_from(const QFunction& other) {
    auto dst = params();
    auto src = const_cast<QFunction&>(other).params();
    for (size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
}

void SacConfig::validate() const {
    if (gamma <= 0 || gamma >= 1) throw std::runtime_error("SacConfig: gamma must be in (0,1)");
    if (init_alpha <= 0) throw std::runtime_error("SacConfig: init_alpha must be positive");
    if (policy_lr <= 0 || q_lr <= 0 || alpha_lr <= 0 || reward_scale <= 0 ||
        target_update_period <= 0 || updates_per_step <= 0 || batch_size <= 0 ||
        hidden_units <= 0 || warmup_steps < 0 || replay_capacity <= 0 || latent_clip <= 0)
        throw std::runtime_error("SacConfig: all fields must be positive");
}

SacLearner::SacLearner(long obs_dim, long latent_dim, const SacConfig& cfg, uint64_t seed)
    : cfg_(cfg), latent_dim_(latent_dim),
      target_entropy_(cfg.target_entropy_per_dim * static_cast<double>(latent_dim)),
      policy_("actor", obs_dim, latent_dim, cfg.hidden_units),
      q1_("q1", obs_dim, latent_dim, cfg.hidden_units),
      q2_("q2", obs_dim, latent_dim, cfg.hidden_units),
      t1_("t1", obs_dim, latent_dim, cfg.hidden_units),
      t2_("t2", obs_dim, latent_dim, cfg.hidden_units),
      log_alpha_("log_alpha", Tensor::scalar(std::log(cfg.init_alpha))), noise_rng_(seed) {
    cfg_.validate();
    Rng init_rng(nd::Rng::derive(seed, {0x1417u}));
    policy_.init(init_rng);
    q1_.init(init_rng);
    q2_.init(init_rng);
    sync_targets();

    policy_opt_ = std::make_unique<nd::Adam>(policy_.params(), nd::AdamConfig{.lr = cfg.policy_lr});
    std::vector<Param*> qp = q1_.params();
    for (Param* p : q2_.params()) qp.push_back(p);
    q_opt_ = std::make_unique<nd::Adam>(qp, nd::AdamConfig{.lr = cfg.q_lr});
    alpha_opt_ = std::make_unique<nd::Adam>(std::vector<Param*>{&log_alpha_},
                                            nd::AdamConfig{.lr = cfg.alpha_lr});
}

double SacLearner::alpha() const { return std::exp(log_alpha_.value[0]); }

void SacLearner::sync_targets() {
    t1_.copy_from(q1_);
    t2_.copy_from(q2_);
}

SacLearner::Losses SacLearner::update(const ReplayBuffer::Batch& batch) {
    const long B = batch.obs.rows();
    const long D = latent_dim_;
    const double a_val = alpha();
    Losses out;

    // 1. targets (no gradients anywhere)
    Tensor eps_t(std::vector<long>{B, D});
    for (long i = 0; i < eps_t.size(); ++i) eps_t[i] = noise_rng_.normal();
    Tensor y(std::vector<long>{B, 1});
    {
        Graph g(false);
        Value obs2 = g.leaf(batch.next_obs);
        auto heads = policy_.forward(g, obs2);
        Value std2 = g.exp(heads.log_std);
        Value z2 = g.add(heads.mean, g.mul(std2, g.leaf(eps_t)));
        // log pi uses the pre-clip sample; Q only ever sees executable z
        Value logp2 = g.gaussian_log_density(z2, heads.mean, std2);
        Value z2c = g.clamp(z2, -cfg_.latent_clip, cfg_.latent_clip);
        Value qmin = g.minimum(t1_.forward(g, obs2, z2c), t2_.forward(g, obs2, z2c));
        const Tensor& qv = g.value(qmin);
        const Tensor& lp = g.value(logp2);
        for (long i = 0; i < B; ++i) {
            double soft_v = qv[i] - a_val * lp[i];
            y[i] = cfg_.reward_scale * batch.reward[i] +
                   cfg_.gamma * (1.0 - batch.done[i]) * soft_v;
        }
    }

    // 2. critic regression toward y
    {
        Graph g;
        Value obs = g.leaf(batch.obs);
        Value act = g.leaf(batch.act);
        Value target = g.leaf(y);
        Value d1 = g.sub(q1_.forward(g, obs, act), target);
        Value d2 = g.sub(q2_.forward(g, obs, act), target);
        Value loss = g.add(g.mean(g.mul(d1, d1)), g.mean(g.mul(d2, d2)));
        out.critic = g.scalar_value(loss);
        std::vector<Param*> qp = q1_.params();
        for (Param* p : q2_.params()) qp.push_back(p);
        g.backward(loss, qp);
        q_opt_->step();
    }

    // 3. actor: maximize min-Q minus alpha * log pi via reparameterization
    double mean_logp = 0.0;
    Tensor eps_a(std::vector<long>{B, D});
    for (long i = 0; i < eps_a.size(); ++i) eps_a[i] = noise_rng_.normal();
    {
        Graph g;
        Value obs = g.leaf(batch.obs);
        auto heads = policy_.forward(g, obs);
        Value stddev = g.exp(heads.log_std);
        Value z = g.add(heads.mean, g.mul(stddev, g.leaf(eps_a)));
        Value logp = g.gaussian_log_density(z, heads.mean, stddev);
        Value zc = g.clamp(z, -cfg_.latent_clip, cfg_.latent_clip);
        Value qmin = g.minimum(q1_.forward(g, obs, zc), q2_.forward(g, obs, zc));
        Value loss = g.mean(g.sub(g.scale(logp, a_val), qmin));
        if (cfg_.latent_penalty > 0.0) {
            Value over_hi = g.relu(g.add_scalar(z, -cfg_.latent_clip));
            Value over_lo = g.relu(g.add_scalar(g.neg(z), -cfg_.latent_clip));
            Value excess = g.add(g.mul(over_hi, over_hi), g.mul(over_lo, over_lo));
            loss = g.add(loss, g.scale(g.mean(g.row_sum(excess)), cfg_.latent_penalty));
        }
        out.actor = g.scalar_value(loss);
        auto pp = policy_.params();
        g.backward(loss, pp);
        policy_opt_->step();

        const Tensor& lp = g.value(logp);
        for (long i = 0; i < B; ++i) mean_logp += lp[i];
        mean_logp /= static_cast<double>(B);
    }

    // 4. temperature on the detached log pi
    if (cfg_.auto_entropy) {
        out.alpha_loss = -log_alpha_.value[0] * (mean_logp + target_entropy_);
        log_alpha_.grad = Tensor::scalar(-(mean_logp + target_entropy_));
        alpha_opt_->step();
    }

    ++updates_;
    if (updates_ % cfg_.target_update_period == 0) sync_targets();
    return out;
}

} // namespace parrot::rl
