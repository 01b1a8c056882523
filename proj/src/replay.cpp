#include "parrot/replay.hpp"

#include <stdexcept>
#include <string>
#include <unordered_set>

namespace parrot::rl {

ReplayBuffer::ReplayBuffer(long capacity, long obs_dim, long act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
    if (capacity < 1) throw std::runtime_error("ReplayBuffer: capacity must be >= 1");
    obs_.resize(static_cast<size_t>(capacity * obs_dim));
    act_.resize(static_cast<size_t>(capacity * act_dim));
    next_obs_.resize(static_cast<size_t>(capacity * obs_dim));
    reward_.resize(static_cast<size_t>(capacity));
    done_.resize(static_cast<size_t>(capacity));
}

void ReplayBuffer::add(const std::vector<double>& obs, const std::vector<double>& act,
                       double reward, const std::vector<double>& next_obs, bool done) {
    if (static_cast<long>(obs.size()) != obs_dim_ ||
        static_cast<long>(next_obs.size()) != obs_dim_ ||
        static_cast<long>(act.size()) != act_dim_)
        throw std::runtime_error("ReplayBuffer::add: dimension mismatch");
    std::copy(obs.begin(), obs.end(), obs_.begin() + head_ * obs_dim_);
    std::copy(act.begin(), act.end(), act_.begin() + head_ * act_dim_);
    std::copy(next_obs.begin(), next_obs.end(), next_obs_.begin() + head_ * obs_dim_);
    reward_[static_cast<size_t>(head_)] = reward;
    done_[static_cast<size_t>(head_)] = done ? 1 : 0;
    head_ = (head_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
}

ReplayBuffer::Batch ReplayBuffer::sample(long batch_size, nd::Rng& rng) const {
    if (batch_size > size_)
        throw std::runtime_error("ReplayBuffer::sample: batch " + std::to_string(batch_size) +
                                 " exceeds stored " + std::to_string(size_));
    // Floyd's algorithm: batch_size distinct indices in [0, size_)
    std::unordered_set<long> chosen;
    std::vector<long> idx;
    idx.reserve(static_cast<size_t>(batch_size));
    for (long i = size_ - batch_size; i < size_; ++i) {
        long j = static_cast<long>(rng.uniform_int(static_cast<uint64_t>(i + 1)));
        if (chosen.insert(j).second) {
            idx.push_back(j);
        } else {
            chosen.insert(i);
            idx.push_back(i);
        }
    }

    Batch b;
    b.obs = nd::Tensor(std::vector<long>{batch_size, obs_dim_});
    b.act = nd::Tensor(std::vector<long>{batch_size, act_dim_});
    b.next_obs = nd::Tensor(std::vector<long>{batch_size, obs_dim_});
    b.reward = nd::Tensor(std::vector<long>{batch_size, 1});
    b.done = nd::Tensor(std::vector<long>{batch_size, 1});
    for (long r = 0; r < batch_size; ++r) {
        long k = idx[static_cast<size_t>(r)];
        std::copy_n(obs_.begin() + k * obs_dim_, obs_dim_, b.obs.data() + r * obs_dim_);
        std::copy_n(act_.begin() + k * act_dim_, act_dim_, b.act.data() + r * act_dim_);
        std::copy_n(next_obs_.begin() + k * obs_dim_, obs_dim_,
                    b.next_obs.data() + r * obs_dim_);
        b.reward[r] = reward_[static_cast<size_t>(k)];
        b.done[r] = done_[static_cast<size_t>(k)] ? 1.0 : 0.0;
    }
    return b;
}

} // namespace parrot::rl
