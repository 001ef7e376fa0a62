#include "fbee/replay_buffer.hpp"

#include <stdexcept>

namespace fbee {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& transition) {
  if (items_.size() < capacity_) {
    items_.push_back(transition);
    return;
  }
  items_[head_] = transition;
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
  if (items_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  return pick(rng);
}

std::vector<Transition> ReplayBuffer::contents() const {
  std::vector<Transition> out;
  out.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) out.push_back((*this)[i]);
  return out;
}

}  // namespace fbee
