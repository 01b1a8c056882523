#include "parrot/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace parrot::baselines {

namespace {

Tensor gather_rows(const Tensor& src, const std::vector<long>& rows) {
    const long c = src.cols();
    Tensor out(std::vector<long>{static_cast<long>(rows.size()), c});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(src.data() + rows[i] * c, c, out.data() + static_cast<long>(i) * c);
    return out;
}

/// Group-aware train/validation row split shared by BC and CVAE training.
void split_rows(long n, long group, double val_fraction, Rng& rng,
                std::vector<long>& train_rows, std::vector<long>& val_rows) {
    group = std::max<long>(1, group);
    const long n_groups = std::max<long>(1, n / group);
    std::vector<long> order(static_cast<size_t>(n_groups));
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
    long val_groups = static_cast<long>(std::floor(val_fraction * static_cast<double>(n_groups)));
    for (size_t gi = 0; gi < order.size(); ++gi) {
        bool is_val = static_cast<long>(gi) < val_groups;
        long base = order[gi] * group;
        long end = std::min(n, base + group);
        for (long r = base; r < end; ++r) (is_val ? val_rows : train_rows).push_back(r);
    }
    for (long r = n_groups * group; r < n; ++r) train_rows.push_back(r);
}

} // namespace

double bc_nll(const rl::GaussianPolicy& policy, const Tensor& obs, const Tensor& act) {
    const long n = obs.rows();
    const long chunk = 2048;
    double total = 0.0;
    for (long start = 0; start < n; start += chunk) {
        long len = std::min(chunk, n - start);
        Tensor ob(std::vector<long>{len, obs.cols()});
        Tensor ac(std::vector<long>{len, act.cols()});
        std::copy_n(obs.data() + start * obs.cols(), len * obs.cols(), ob.data());
        std::copy_n(act.data() + start * act.cols(), len * act.cols(), ac.data());
        Graph g(false);
        auto heads = policy.forward(g, g.leaf(std::move(ob)));
        auto lp = g.gaussian_log_density(g.leaf(std::move(ac)), heads.mean,
                                         g.exp(heads.log_std));
        const Tensor& v = g.value(lp);
        for (long i = 0; i < v.size(); ++i) total -= v[i];
    }
    return total / static_cast<double>(n);
}

BcResult train_bc(const Tensor& obs, const Tensor& act, const BcConfig& cfg) {
    const long n = obs.rows();
    if (n == 0) throw nd::ShapeError("train_bc: empty dataset");
    Rng rng(cfg.seed);

    BcResult res;
    res.policy = rl::GaussianPolicy("bc_actor", obs.cols(), act.cols(), cfg.hidden_units);
    res.policy.init(rng);

    std::vector<long> train_rows, val_rows;
    split_rows(n, cfg.group_size, cfg.validation_fraction, rng, train_rows, val_rows);
    Tensor val_obs, val_act;
    const bool have_val = !val_rows.empty();
    if (have_val) {
        val_obs = gather_rows(obs, val_rows);
        val_act = gather_rows(act, val_rows);
    }

    auto params = res.policy.params();
    nd::Adam opt(params, {.lr = cfg.learning_rate});
    res.init_val_nll = have_val ? bc_nll(res.policy, val_obs, val_act) : 0.0;

    const long batch = std::min<long>(cfg.batch_size, static_cast<long>(train_rows.size()));
    std::vector<long> rows(static_cast<size_t>(batch));
    for (long step = 1; step <= cfg.steps; ++step) {
        for (long i = 0; i < batch; ++i)
            rows[static_cast<size_t>(i)] = train_rows[rng.uniform_int(train_rows.size())];
        Graph g;
        auto heads = res.policy.forward(g, g.leaf(gather_rows(obs, rows)));
        auto lp = g.gaussian_log_density(g.leaf(gather_rows(act, rows)), heads.mean,
                                         g.exp(heads.log_std));
        // diagonal Gaussian entropy is sum(log std) plus a constant
        auto entropy = g.row_sum(heads.log_std);
        auto loss = g.sub(g.neg(g.mean(lp)), g.scale(g.mean(entropy), cfg.entropy_weight));
        auto pp = params;
        g.backward(loss, pp);
        opt.step();
    }
    res.final_val_nll = have_val ? bc_nll(res.policy, val_obs, val_act) : 0.0;
    return res;
}

CvaePrior::CvaePrior(long action_dim, long obs_dim, long feat_dim, long hidden)
    : action_dim_(action_dim), obs_dim_(obs_dim), psi_(obs_dim, feat_dim, 64),
      enc_in_("cvae/enc_in", action_dim, feat_dim, hidden),
      enc_mid_("cvae/enc_mid", hidden, hidden), enc_mean_("cvae/enc_mean", hidden, action_dim),
      enc_logstd_("cvae/enc_logstd", hidden, action_dim),
      dec_in_("cvae/dec_in", action_dim, feat_dim, hidden),
      dec_mid_("cvae/dec_mid", hidden, hidden), dec_out_("cvae/dec_out", hidden, action_dim) {}

void CvaePrior::init(Rng& rng) {
    psi_.init(rng);
    nd::init_he(enc_in_.Wa, enc_in_.Wa.value.shape()[0], rng);
    nd::init_he(enc_in_.Wb, enc_in_.Wb.value.shape()[0], rng);
    nd::init_zero(enc_in_.b);
    nd::init_he(enc_mid_.W, enc_mid_.W.value.shape()[0], rng);
    nd::init_zero(enc_mid_.b);
    nd::init_zero(enc_mean_.W);
    nd::init_zero(enc_mean_.b);
    nd::init_zero(enc_logstd_.W);
    nd::init_zero(enc_logstd_.b);
    nd::init_he(dec_in_.Wa, dec_in_.Wa.value.shape()[0], rng);
    nd::init_he(dec_in_.Wb, dec_in_.Wb.value.shape()[0], rng);
    nd::init_zero(dec_in_.b);
    nd::init_he(dec_mid_.W, dec_mid_.W.value.shape()[0], rng);
    nd::init_zero(dec_mid_.b);
    nd::init_he(dec_out_.W, dec_out_.W.value.shape()[0], rng);
    nd::init_zero(dec_out_.b);
}

CvaePrior::Posterior CvaePrior::encode_graph(Graph& g, Value act, Value psi) const {
    Value h = g.relu(enc_in_.forward(g, act, psi));
    h = g.relu(enc_mid_.forward(g, h));
    Value mean = enc_mean_.forward(g, h);
    Value log_std = g.clamp(enc_logstd_.forward(g, h), -5.0, 2.0);
    return {mean, log_std};
}

Value CvaePrior::decode_graph(Graph& g, Value z, Value psi) const {
    Value h = g.relu(dec_in_.forward(g, z, psi));
    h = g.relu(dec_mid_.forward(g, h));
    return dec_out_.forward(g, h);
}

std::vector<double> CvaePrior::decode(const std::vector<double>& z,
                                      const std::vector<double>& obs) const {
    Graph g(false);
    Value psi = psi_graph(g, g.leaf(Tensor::row(obs)));
    Value a = decode_graph(g, g.leaf(Tensor::row(z)), psi);
    return g.value(a).vec();
}

std::vector<Param*> CvaePrior::params() {
    std::vector<Param*> out;
    psi_.collect(out);
    enc_in_.collect(out);
    enc_mid_.collect(out);
    enc_mean_.collect(out);
    enc_logstd_.collect(out);
    dec_in_.collect(out);
    dec_mid_.collect(out);
    dec_out_.collect(out);
    return out;
}

double cvae_beta(long step, const CvaeConfig& cfg) {
    const double tau = cfg.beta_half_step / 10.0;
    return cfg.beta_target /
           (1.0 + std::exp(-(static_cast<double>(step) - cfg.beta_half_step) / tau));
}

namespace {

/// Per-sample CVAE loss pieces on a row batch. KL is against the standard
/// normal; reconstruction is the squared error summed over action dims.
struct CvaeLossValues {
    double total = 0.0;
    double recon = 0.0;
};

CvaeLossValues cvae_loss_batch(CvaePrior& model, Graph& g, const Tensor& ob, const Tensor& ac,
                               const Tensor& eps, double beta, Value* loss_out) {
    Value obs = g.leaf(ob);
    Value act = g.leaf(ac);
    Value psi = model.psi_graph(g, obs);
    auto post = model.encode_graph(g, act, psi);
    Value stddev = g.exp(post.log_std);
    Value z = g.add(post.mean, g.mul(stddev, g.leaf(eps)));
    Value recon = model.decode_graph(g, z, psi);
    Value diff = g.sub(recon, act);
    Value recon_loss = g.mean(g.row_sum(g.mul(diff, diff)));
    // KL(q || N(0,I)) = sum 0.5 (mu^2 + sigma^2 - 1) - log sigma
    Value mu2 = g.mul(post.mean, post.mean);
    Value var = g.mul(stddev, stddev);
    Value kl_terms =
        g.sub(g.scale(g.add_scalar(g.add(mu2, var), -1.0), 0.5), post.log_std);
    Value kl = g.mean(g.row_sum(kl_terms));
    Value loss = g.add(recon_loss, g.scale(kl, beta));
    if (loss_out) *loss_out = loss;
    CvaeLossValues v;
    v.total = g.scalar_value(loss);
    v.recon = g.scalar_value(recon_loss);
    return v;
}

} // namespace

double cvae_neg_elbo(const CvaePrior& model, const Tensor& obs, const Tensor& act, double beta) {
    // Deterministic evaluation noise so the number is reproducible.
    Rng rng(12345);
    auto& m = const_cast<CvaePrior&>(model);
    const long n = obs.rows();
    const long chunk = 2048;
    double total = 0.0;
    static constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    for (long start = 0; start < n; start += chunk) {
        long len = std::min(chunk, n - start);
        Tensor ob(std::vector<long>{len, obs.cols()});
        Tensor ac(std::vector<long>{len, act.cols()});
        std::copy_n(obs.data() + start * obs.cols(), len * obs.cols(), ob.data());
        std::copy_n(act.data() + start * act.cols(), len * act.cols(), ac.data());
        Tensor eps(std::vector<long>{len, act.cols()});
        for (long i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
        Graph g(false);
        auto v = cvae_loss_batch(m, g, ob, ac, eps, beta, nullptr);
        // unit-variance Gaussian likelihood: NLL = 0.5*SSE + D/2 log(2 pi) + beta*KL
        total += (0.5 * v.recon + (v.total - v.recon) +
                  0.5 * kLog2Pi * static_cast<double>(act.cols())) *
                 static_cast<double>(len);
    }
    return total / static_cast<double>(n);
}

CvaeResult train_cvae(CvaePrior& model, const Tensor& obs, const Tensor& act,
                      const CvaeConfig& cfg) {
    const long n = obs.rows();
    if (n == 0) throw nd::ShapeError("train_cvae: empty dataset");
    Rng rng(cfg.seed);

    std::vector<long> train_rows, val_rows;
    split_rows(n, cfg.group_size, cfg.validation_fraction, rng, train_rows, val_rows);
    Tensor val_obs, val_act;
    const bool have_val = !val_rows.empty();
    if (have_val) {
        val_obs = gather_rows(obs, val_rows);
        val_act = gather_rows(act, val_rows);
    }

    auto params = model.params();
    nd::Adam opt(params, {.lr = cfg.learning_rate});

    CvaeResult res;
    res.init_val_loss = have_val ? cvae_neg_elbo(model, val_obs, val_act, cfg.beta_target) : 0.0;

    const long batch = std::min<long>(cfg.batch_size, static_cast<long>(train_rows.size()));
    std::vector<long> rows(static_cast<size_t>(batch));
    double last_recon = 0.0;
    for (long step = 1; step <= cfg.steps; ++step) {
        for (long i = 0; i < batch; ++i)
            rows[static_cast<size_t>(i)] = train_rows[rng.uniform_int(train_rows.size())];
        Tensor ob = gather_rows(obs, rows);
        Tensor ac = gather_rows(act, rows);
        Tensor eps(std::vector<long>{batch, act.cols()});
        for (long i = 0; i < eps.size(); ++i) eps[i] = rng.normal();

        Graph g;
        Value loss;
        auto v = cvae_loss_batch(model, g, ob, ac, eps, cvae_beta(step, cfg), &loss);
        last_recon = v.recon;
        g.backward(loss, params);
        opt.step();
    }
    res.final_recon_mse = last_recon / static_cast<double>(act.cols());
    res.final_val_loss = have_val ? cvae_neg_elbo(model, val_obs, val_act, cfg.beta_target) : 0.0;
    return res;
}

rl::MetricsLog run_sac_scratch(const rl::RunConfig& cfg, rl::GaussianPolicy* final_policy) {
    rl::IdentityMapping mapping;
    return rl::run_rl(mapping, cfg, "sac", nullptr, {}, final_policy);
}

rl::MetricsLog run_bc_sac(const rl::GaussianPolicy& bc_policy, const rl::RunConfig& cfg,
                          rl::GaussianPolicy* final_policy) {
    rl::IdentityMapping mapping;
    return rl::run_rl(mapping, cfg, "bc_sac", &bc_policy, {}, final_policy);
}

rl::MetricsLog run_hirl(const CvaePrior& prior, const rl::RunConfig& cfg,
                        rl::GaussianPolicy* final_policy) {
    rl::DecoderMapping mapping;
    mapping.decode = [&prior](const std::vector<double>& z, const std::vector<double>& s) {
        return prior.decode(z, s);
    };
    return rl::run_rl(mapping, cfg, "hirl", nullptr, {}, final_policy);
}

rl::MetricsLog run_prior_explore(const flow::FlowModel& prior, double eps,
                                 const rl::RunConfig& cfg, rl::GaussianPolicy* final_policy) {
    if (eps < 0.0 || eps > 1.0)
        throw std::runtime_error("run_prior_explore: eps must be in [0, 1]");
    rl::RunConfig c = cfg;
    c.explore_eps = eps;
    c.explore_prior = &prior;
    rl::IdentityMapping mapping;
    return rl::run_rl(mapping, c, "prior_explore", nullptr, {}, final_policy);
}

} // namespace parrot::baselines
