#pragma once

#include <string>
#include <utility>
#include <vector>

#include "parrot/adam.hpp"
#include "parrot/graph.hpp"
#include "parrot/nn.hpp"
#include "parrot/rng.hpp"

namespace parrot::flow {

using nd::Graph;
using nd::Param;
using nd::Rng;
using nd::Tensor;
using nd::Value;

/// Shared observation encoder psi(s): obs vector -> feature vector, one
/// instance conditioning every coupling layer.
struct ConditionEncoder {
    long obs_dim = 0;
    long feat_dim = 0;
    nd::Mlp net;

    ConditionEncoder() = default;
    ConditionEncoder(long obs_dim_, long feat_dim_, long hidden = 64)
        : obs_dim(obs_dim_), feat_dim(feat_dim_),
          net("flow/enc", obs_dim_, {hidden, hidden}, feat_dim_) {}

    void init(Rng& rng) { net.init(rng); }
    void init_zero() {
        for (auto& l : net.layers) {
            nd::init_zero(l.W);
            nd::init_zero(l.b);
        }
    }

    Value forward(Graph& g, Value obs) const { return net.forward(g, obs); }

    /// Single-observation convenience path.
    std::vector<double> encode(const std::vector<double>& s) const;

    void collect(std::vector<Param*>& out) { net.collect(out); }
};

/// One conditional affine coupling layer. Indices in `pass_idx` go through
/// unchanged; the rest are scaled and shifted by networks of the passed
/// part and psi(s). The scale output is clamped, v <- c*tanh(v/c), which
/// keeps exp(v) bounded without breaking invertibility.
struct CouplingLayer {
    std::vector<long> pass_idx;
    std::vector<long> trans_idx;
    Tensor pass_select;   // [D, d] constant selection matrix
    Tensor trans_select;  // [D, D-d]
    Tensor pass_scatter;  // [d, D], transpose of pass_select
    Tensor trans_scatter; // [D-d, D]
    nd::PairLinear in;   // (z_pass, psi) -> hidden
    nd::Linear mid;      // hidden -> hidden
    nd::Linear head_v;   // hidden -> D-d
    nd::Linear head_t;   // hidden -> D-d
    double clamp_c = 5.0;

    CouplingLayer() = default;
    CouplingLayer(const std::string& name, long dim, std::vector<long> pass,
                  std::vector<long> trans, long feat_dim, long hidden, double clamp);

    void init(Rng& rng);

    struct ScaleShift {
        Value v; // clamped log-scale
        Value t; // shift
    };
    ScaleShift scale_shift(Graph& g, Value z_pass, Value psi) const;

    void collect(std::vector<Param*>& out);
};

/// Conditional real NVP: a stack of coupling layers with alternating masks
/// over a standard-normal base, trained by exact maximum likelihood.
/// Latent dimension equals action dimension. A trained model is immutable
/// and safe to share across threads for sampling and inversion.
class FlowModel {
  public:
    FlowModel() = default;
    FlowModel(long action_dim, long obs_dim, long feat_dim = 32, int n_layers = 4,
              long hidden = 64, double clamp = 5.0);

    void init(Rng& rng);

    long action_dim() const { return action_dim_; }
    long obs_dim() const { return obs_dim_; }
    long feat_dim() const { return encoder_.feat_dim; }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    long hidden() const { return hidden_; }
    double clamp() const { return clamp_; }
    const std::vector<CouplingLayer>& layers() const { return layers_; }
    const ConditionEncoder& encoder() const { return encoder_; }
    ConditionEncoder& encoder() { return encoder_; }

    /// a = f(z; s) for batches [B,D], [B,S].
    Value forward_map_graph(Graph& g, Value z, Value obs) const;

    struct InverseValues {
        Value z;
        Value log_det_inv; // [B,1], ln|det d z / d a|
    };
    InverseValues inverse_map_graph(Graph& g, Value a, Value obs) const;

    /// log p(a|s) = base log density at f^-1(a;s) plus the inverse log-det.
    Value log_prob_graph(Graph& g, Value a, Value obs) const;

    // Single-sample convenience paths (no-grad graphs underneath).
    std::vector<double> forward_map(const std::vector<double>& z,
                                    const std::vector<double>& s) const;
    std::pair<std::vector<double>, double> inverse_map(const std::vector<double>& a,
                                                       const std::vector<double>& s) const;
    double log_prob(const std::vector<double>& a, const std::vector<double>& s) const;

    /// Draws z ~ N(0, I) and maps it through the flow.
    std::vector<double> sample(const std::vector<double>& s, Rng& rng) const;

    std::vector<Param*> params();
    std::vector<const Param*> params() const;

  private:
    long action_dim_ = 0;
    long obs_dim_ = 0;
    long hidden_ = 64;
    double clamp_ = 5.0;
    ConditionEncoder encoder_;
    std::vector<CouplingLayer> layers_;

    void check_vector(const std::vector<double>& v, long want, const char* what) const;
};

struct PriorTrainConfig {
    double learning_rate = 1e-4;
    long steps = 50000;
    long batch_size = 256;
    double validation_fraction = 0.05;
    long group_size = 1; // rows per trajectory; validation splits on groups
    long eval_every = 500;
    uint64_t seed = 1;
};

struct TrainCurve {
    std::vector<long> steps;
    std::vector<double> train_nll; // nats per sample, running minibatch value
    std::vector<double> val_nll;   // nats per sample on the held-out split
    double init_val_nll = 0.0;
    double final_val_nll = 0.0;
};

/// Maximum-likelihood training of the behavioral prior on flattened
/// (observation, action) rows. Aborts with step number and a batch
/// fingerprint if the loss goes non-finite.
TrainCurve train_prior(FlowModel& model, const Tensor& obs, const Tensor& act,
                       const PriorTrainConfig& cfg);

/// Mean negative log likelihood of rows under the model, evaluated in
/// chunks without gradients.
double mean_nll(const FlowModel& model, const Tensor& obs, const Tensor& act);

/// Checkpoint = ndiff parameter file + text sidecar ("<path>.meta") with
/// the architecture and training config.
void save_flow(const std::string& path, const FlowModel& model,
               const std::vector<std::pair<std::string, std::string>>& extra = {});
FlowModel load_flow(const std::string& path);

} // namespace parrot::flow
