#pragma once

#include <vector>

#include "parrot/rng.hpp"
#include "parrot/tensor.hpp"

namespace parrot::rl {

/// FIFO ring buffer of (s, z, r, s', done) transitions. For latent-space
/// methods z is the latent fed to the frozen mapping; for raw-space
/// baselines it is the executed action itself. The stored done flag is the
/// bootstrap mask: set on task success, not on time-outs.
class ReplayBuffer {
  public:
    ReplayBuffer(long capacity, long obs_dim, long act_dim);

    void add(const std::vector<double>& obs, const std::vector<double>& act, double reward,
             const std::vector<double>& next_obs, bool done);

    long size() const { return size_; }
    long capacity() const { return capacity_; }
    long obs_dim() const { return obs_dim_; }
    long act_dim() const { return act_dim_; }

    struct Batch {
        nd::Tensor obs;      // [B, S]
        nd::Tensor act;      // [B, D]
        nd::Tensor next_obs; // [B, S]
        nd::Tensor reward;   // [B, 1]
        nd::Tensor done;     // [B, 1]
    };

    /// Uniform sample without replacement within the batch.
    Batch sample(long batch_size, nd::Rng& rng) const;

  private:
    long capacity_;
    long obs_dim_;
    long act_dim_;
    long head_ = 0;
    long size_ = 0;
    std::vector<double> obs_;
    std::vector<double> act_;
    std::vector<double> next_obs_;
    std::vector<double> reward_;
    std::vector<uint8_t> done_;
};

} // namespace parrot::rl
