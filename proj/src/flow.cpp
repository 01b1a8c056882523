#include "parrot/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "parrot/checkpoint.hpp"

namespace parrot::flow {

namespace {

Tensor selection_matrix(long dim, const std::vector<long>& idx) {
    Tensor m(std::vector<long>{dim, static_cast<long>(idx.size())});
    for (size_t j = 0; j < idx.size(); ++j) m.at(idx[j], static_cast<long>(j)) = 1.0;
    return m;
}

Tensor scatter_matrix(long dim, const std::vector<long>& idx) {
    Tensor m(std::vector<long>{static_cast<long>(idx.size()), dim});
    for (size_t j = 0; j < idx.size(); ++j) m.at(static_cast<long>(j), idx[j]) = 1.0;
    return m;
}

uint64_t fnv1a(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 1469598103934665603ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

std::vector<double> ConditionEncoder::encode(const std::vector<double>& s) const {
    if (static_cast<long>(s.size()) != obs_dim)
        throw nd::ShapeError("encode: observation has dim " + std::to_string(s.size()) +
                             ", expected " + std::to_string(obs_dim));
    Graph g(false);
    auto out = forward(g, g.leaf(Tensor::row(s)));
    return g.value(out).vec();
}

CouplingLayer::CouplingLayer(const std::string& name, long dim, std::vector<long> pass,
                             std::vector<long> trans, long feat_dim, long hidden, double clamp)
    : pass_idx(std::move(pass)), trans_idx(std::move(trans)),
      pass_select(selection_matrix(dim, pass_idx)),
      trans_select(selection_matrix(dim, trans_idx)),
      pass_scatter(scatter_matrix(dim, pass_idx)),
      trans_scatter(scatter_matrix(dim, trans_idx)),
      in(name + "/in", static_cast<long>(pass_idx.size()), feat_dim, hidden),
      mid(name + "/mid", hidden, hidden),
      head_v(name + "/v", hidden, static_cast<long>(trans_idx.size())),
      head_t(name + "/t", hidden, static_cast<long>(trans_idx.size())), clamp_c(clamp) {}

void CouplingLayer::init(Rng& rng) {
    nd::init_he(in.Wa, std::max<long>(1, in.Wa.value.shape()[0]), rng);
    nd::init_he(in.Wb, in.Wb.value.shape()[0], rng);
    nd::init_zero(in.b);
    nd::init_he(mid.W, mid.W.value.shape()[0], rng);
    nd::init_zero(mid.b);
    // zero heads start the flow at the identity
    nd::init_zero(head_v.W);
    nd::init_zero(head_v.b);
    nd::init_zero(head_t.W);
    nd::init_zero(head_t.b);
}

CouplingLayer::ScaleShift CouplingLayer::scale_shift(Graph& g, Value z_pass, Value psi) const {
    Value h = g.relu(in.forward(g, z_pass, psi));
    h = g.relu(mid.forward(g, h));
    Value v_raw = head_v.forward(g, h);
    // v <- c * tanh(v / c)
    Value v = g.scale(g.tanh(g.scale(v_raw, 1.0 / clamp_c)), clamp_c);
    Value t = head_t.forward(g, h);
    return {v, t};
}

void CouplingLayer::collect(std::vector<Param*>& out) {
    in.collect(out);
    mid.collect(out);
    head_v.collect(out);
    head_t.collect(out);
}

FlowModel::FlowModel(long action_dim, long obs_dim, long feat_dim, int n_layers, long hidden,
                     double clamp)
    : action_dim_(action_dim), obs_dim_(obs_dim), hidden_(hidden), clamp_(clamp),
      encoder_(obs_dim, feat_dim, hidden) {
    if (action_dim < 2) throw nd::ShapeError("FlowModel: action dim must be >= 2");
    if (n_layers < 1) throw nd::ShapeError("FlowModel: need at least one coupling layer");
    const long d = action_dim / 2;
    std::vector<long> first_half, second_half;
    for (long i = 0; i < d; ++i) first_half.push_back(i);
    for (long i = d; i < action_dim; ++i) second_half.push_back(i);

    std::vector<bool> covered(static_cast<size_t>(action_dim), false);
    for (int l = 0; l < n_layers; ++l) {
        auto pass = (l % 2 == 0) ? first_half : second_half;
        auto trans = (l % 2 == 0) ? second_half : first_half;
        for (long i : trans) covered[static_cast<size_t>(i)] = true;
        layers_.emplace_back("flow/c" + std::to_string(l), action_dim, pass, trans, feat_dim,
                             hidden, clamp);
    }
    if (std::find(covered.begin(), covered.end(), false) != covered.end())
        throw nd::ShapeError("FlowModel: mask pattern leaves some index untransformed");
}

void FlowModel::init(Rng& rng) {
    encoder_.init(rng);
    for (auto& l : layers_) l.init(rng);
}

Value FlowModel::forward_map_graph(Graph& g, Value z, Value obs) const {
    Value psi = encoder_.forward(g, obs);
    Value cur = z;
    for (const auto& layer : layers_) {
        Value zp = g.matmul(cur, g.leaf(layer.pass_select));
        Value zt = g.matmul(cur, g.leaf(layer.trans_select));
        auto st = layer.scale_shift(g, zp, psi);
        Value out_t = g.add(g.mul(zt, g.exp(st.v)), st.t);
        // scatter the two parts back into place
        Value back_p = g.matmul(zp, g.leaf(layer.pass_scatter));
        Value back_t = g.matmul(out_t, g.leaf(layer.trans_scatter));
        cur = g.add(back_p, back_t);
    }
    return cur;
}

FlowModel::InverseValues FlowModel::inverse_map_graph(Graph& g, Value a, Value obs) const {
    Value psi = encoder_.forward(g, obs);
    Value cur = a;
    Value log_det{-1};
    bool first = true;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        const auto& layer = *it;
        Value ap = g.matmul(cur, g.leaf(layer.pass_select));
        Value at = g.matmul(cur, g.leaf(layer.trans_select));
        auto st = layer.scale_shift(g, ap, psi);
        Value zt = g.mul(g.sub(at, st.t), g.exp(g.neg(st.v)));
        Value back_p = g.matmul(ap, g.leaf(layer.pass_scatter));
        Value back_t = g.matmul(zt, g.leaf(layer.trans_scatter));
        cur = g.add(back_p, back_t);
        Value contrib = g.neg(g.row_sum(st.v));
        log_det = first ? contrib : g.add(log_det, contrib);
        first = false;
    }
    return {cur, log_det};
}

Value FlowModel::log_prob_graph(Graph& g, Value a, Value obs) const {
    auto inv = inverse_map_graph(g, a, obs);
    const Tensor& zval = g.value(inv.z);
    Tensor zeros(std::vector<long>{zval.rows(), zval.cols()});
    Tensor ones = Tensor::full({zval.rows(), zval.cols()}, 1.0);
    Value base = g.gaussian_log_density(inv.z, g.leaf(zeros), g.leaf(ones));
    return g.add(base, inv.log_det_inv);
}

void FlowModel::check_vector(const std::vector<double>& v, long want, const char* what) const {
    if (static_cast<long>(v.size()) != want)
        throw nd::ShapeError(std::string(what) + ": got dim " + std::to_string(v.size()) +
                             ", expected " + std::to_string(want));
}

std::vector<double> FlowModel::forward_map(const std::vector<double>& z,
                                           const std::vector<double>& s) const {
    check_vector(z, action_dim_, "forward_map");
    check_vector(s, obs_dim_, "forward_map observation");
    Graph g(false);
    auto out = forward_map_graph(g, g.leaf(Tensor::row(z)), g.leaf(Tensor::row(s)));
    return g.value(out).vec();
}

std::pair<std::vector<double>, double>
FlowModel::inverse_map(const std::vector<double>& a, const std::vector<double>& s) const {
    check_vector(a, action_dim_, "inverse_map");
    check_vector(s, obs_dim_, "inverse_map observation");
    Graph g(false);
    auto inv = inverse_map_graph(g, g.leaf(Tensor::row(a)), g.leaf(Tensor::row(s)));
    return {g.value(inv.z).vec(), g.value(inv.log_det_inv)[0]};
}

double FlowModel::log_prob(const std::vector<double>& a, const std::vector<double>& s) const {
    check_vector(a, action_dim_, "log_prob");
    check_vector(s, obs_dim_, "log_prob observation");
    Graph g(false);
    auto lp = log_prob_graph(g, g.leaf(Tensor::row(a)), g.leaf(Tensor::row(s)));
    return g.value(lp)[0];
}

std::vector<double> FlowModel::sample(const std::vector<double>& s, Rng& rng) const {
    std::vector<double> z(static_cast<size_t>(action_dim_));
    for (double& x : z) x = rng.normal();
    return forward_map(z, s);
}

std::vector<Param*> FlowModel::params() {
    std::vector<Param*> out;
    encoder_.collect(out);
    for (auto& l : layers_) l.collect(out);
    return out;
}

std::vector<const Param*> FlowModel::params() const {
    auto mut = const_cast<FlowModel*>(this)->params();
    return {mut.begin(), mut.end()};
}

namespace {

/// Gathers rows of a data matrix into a batch tensor.
Tensor gather_rows(const Tensor& src, const std::vector<long>& rows) {
    const long c = src.cols();
    Tensor out(std::vector<long>{static_cast<long>(rows.size()), c});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(src.data() + rows[i] * c, c, out.data() + static_cast<long>(i) * c);
    return out;
}

} // namespace

double mean_nll(const FlowModel& model, const Tensor& obs, const Tensor& act) {
    const long n = obs.rows();
    if (n == 0) throw nd::ShapeError("mean_nll: empty evaluation set");
    const long chunk = 1024;
    double total = 0.0;
    for (long start = 0; start < n; start += chunk) {
        long len = std::min(chunk, n - start);
        Tensor ob(std::vector<long>{len, obs.cols()});
        Tensor ac(std::vector<long>{len, act.cols()});
        std::copy_n(obs.data() + start * obs.cols(), len * obs.cols(), ob.data());
        std::copy_n(act.data() + start * act.cols(), len * act.cols(), ac.data());
        Graph g(false);
        auto lp = model.log_prob_graph(g, g.leaf(std::move(ac)), g.leaf(std::move(ob)));
        const Tensor& v = g.value(lp);
        for (long i = 0; i < v.size(); ++i) total -= v[i];
    }
    return total / static_cast<double>(n);
}

TrainCurve train_prior(FlowModel& model, const Tensor& obs, const Tensor& act,
                       const PriorTrainConfig& cfg) {
    const long n = obs.rows();
    if (n == 0) throw nd::ShapeError("train_prior: empty dataset");
    if (act.cols() != model.action_dim())
        throw nd::ShapeError("train_prior: action dim " + std::to_string(act.cols()) +
                             " does not match model dim " + std::to_string(model.action_dim()));
    if (obs.cols() != model.obs_dim())
        throw nd::ShapeError("train_prior: obs dim mismatch");
    if (cfg.learning_rate <= 0) throw nd::ShapeError("train_prior: learning rate must be > 0");
    if (cfg.validation_fraction < 0 || cfg.validation_fraction >= 1)
        throw nd::ShapeError("train_prior: validation fraction must be in [0, 1)");

    Rng rng(cfg.seed);

    // Split on groups (trajectories) so validation rows are not interleaved
    // with training rows from the same episode.
    const long group = std::max<long>(1, cfg.group_size);
    const long n_groups = n / group;
    std::vector<long> group_order(static_cast<size_t>(std::max<long>(n_groups, 1)));
    std::iota(group_order.begin(), group_order.end(), 0);
    for (size_t i = group_order.size(); i > 1; --i)
        std::swap(group_order[i - 1], group_order[rng.uniform_int(i)]);

    long val_groups = static_cast<long>(std::floor(cfg.validation_fraction *
                                                   static_cast<double>(group_order.size())));
    std::vector<long> train_rows, val_rows;
    for (size_t gi = 0; gi < group_order.size(); ++gi) {
        bool is_val = static_cast<long>(gi) < val_groups;
        long base = group_order[gi] * group;
        long end = std::min(n, base + group);
        for (long r = base; r < end; ++r)
            (is_val ? val_rows : train_rows).push_back(r);
    }
    // leftover rows not covered by whole groups go to training
    for (long r = n_groups * group; r < n; ++r) train_rows.push_back(r);
    if (train_rows.empty()) throw nd::ShapeError("train_prior: no training rows after split");
    bool have_val = !val_rows.empty();

    Tensor val_obs, val_act;
    if (have_val) {
        val_obs = gather_rows(obs, val_rows);
        val_act = gather_rows(act, val_rows);
    }

    auto params = model.params();
    nd::Adam opt(params, {.lr = cfg.learning_rate});

    TrainCurve curve;
    curve.init_val_nll = have_val ? mean_nll(model, val_obs, val_act) : 0.0;

    const long batch = std::min<long>(cfg.batch_size, static_cast<long>(train_rows.size()));
    std::vector<long> batch_rows(static_cast<size_t>(batch));
    for (long step = 1; step <= cfg.steps; ++step) {
        for (long i = 0; i < batch; ++i)
            batch_rows[static_cast<size_t>(i)] =
                train_rows[rng.uniform_int(train_rows.size())];
        Tensor ob = gather_rows(obs, batch_rows);
        Tensor ac = gather_rows(act, batch_rows);

        double train_nll = 0.0;
        try {
            Graph g;
            auto lp = model.log_prob_graph(g, g.leaf(std::move(ac)), g.leaf(std::move(ob)));
            auto loss = g.neg(g.mean(lp));
            train_nll = g.scalar_value(loss);
            g.backward(loss, params);
            opt.step();
        } catch (const nd::NumericError& e) {
            uint64_t fp = fnv1a(batch_rows.data(), batch_rows.size() * sizeof(long));
            std::ostringstream msg;
            msg << "train_prior: non-finite loss at step " << step << ", batch fingerprint 0x"
                << std::hex << fp << " (" << e.what() << ")";
            throw nd::NumericError(msg.str());
        }

        if (step % cfg.eval_every == 0 || step == cfg.steps) {
            curve.steps.push_back(step);
            curve.train_nll.push_back(train_nll);
            curve.val_nll.push_back(have_val ? mean_nll(model, val_obs, val_act) : train_nll);
        }
    }
    curve.final_val_nll = curve.val_nll.empty() ? curve.init_val_nll : curve.val_nll.back();
    return curve;
}

void save_flow(const std::string& path, const FlowModel& model,
               const std::vector<std::pair<std::string, std::string>>& extra) {
    auto params = model.params();
    nd::save_params(path, params);

    std::ofstream os(path + ".meta");
    if (!os) throw std::runtime_error("save_flow: cannot write sidecar for " + path);
    os << "[flow]\n";
    os << "action_dim = " << model.action_dim() << "\n";
    os << "obs_dim = " << model.obs_dim() << "\n";
    os << "feat_dim = " << model.feat_dim() << "\n";
    os << "layers = " << model.layer_count() << "\n";
    os << "hidden = " << model.hidden() << "\n";
    os << "clamp = " << model.clamp() << "\n";
    os << "masks = ";
    for (int l = 0; l < model.layer_count(); ++l) {
        const auto& layer = model.layers()[static_cast<size_t>(l)];
        if (l) os << ";";
        for (size_t i = 0; i < layer.pass_idx.size(); ++i)
            os << (i ? "," : "") << layer.pass_idx[i];
        os << "|";
        for (size_t i = 0; i < layer.trans_idx.size(); ++i)
            os << (i ? "," : "") << layer.trans_idx[i];
    }
    os << "\n";
    if (!extra.empty()) {
        os << "[train]\n";
        for (const auto& [k, v] : extra) os << k << " = " << v << "\n";
    }
}

FlowModel load_flow(const std::string& path) {
    std::ifstream is(path + ".meta");
    if (!is) throw std::runtime_error("load_flow: missing sidecar " + path + ".meta");
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
    auto need = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end())
            throw std::runtime_error("load_flow: sidecar missing key '" + k + "'");
        return it->second;
    };
    FlowModel model(std::stol(need("action_dim")), std::stol(need("obs_dim")),
                    std::stol(need("feat_dim")), std::stoi(need("layers")),
                    std::stol(need("hidden")), std::stod(need("clamp")));
    auto params = model.params();
    nd::load_params(path, params);
    return model;
}

} // namespace parrot::flow
