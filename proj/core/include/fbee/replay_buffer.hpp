#pragma once

#include <cstddef>
#include <vector>

#include "fbee/mdp.hpp"

namespace fbee {

/// Fixed-capacity FIFO of transitions. Once full, each insertion evicts the
/// oldest entry; indexing is always oldest-first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& transition);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  const Transition& operator[](std::size_t i) const;
  /// Uniform index in [0, size). Throws std::logic_error when empty.
  std::size_t sample_index(Rng& rng) const;
  const Transition& sample(Rng& rng) const { return (*this)[sample_index(rng)]; }

  std::vector<Transition> contents() const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

}  // namespace fbee
