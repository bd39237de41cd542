#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "soilgen/arch.hpp"
#include "soilgen/tensor.hpp"

namespace soilgen::nn {

template <typename T>
struct Param {
  std::string key;  // "<layer>.<role>", e.g. "3.weight", "5.conv1.norm.scale"
  std::vector<int> shape;
  Buffer<T> values;
  bool trainable = true;  // false for batch-norm running statistics

  friend bool operator==(const Param&, const Param&) = default;
};

// Named parameter arrays of one network. Gradients use the same type, with
// identical keys and shapes.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(std::string key, std::vector<int> shape, bool trainable = true);

  Param<T>* find(const std::string& key);
  const Param<T>* find(const std::string& key) const;
  Param<T>& at(const std::string& key);
  const Param<T>& at(const std::string& key) const;

  std::vector<Param<T>>& params() noexcept { return params_; }
  const std::vector<Param<T>>& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;

  ParamStore zeros_like() const;
  void set_zero();
  bool all_finite() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    out.seed = seed;
    for (const auto& p : params_) {
      auto& q = out.add(p.key, p.shape, p.trainable);
      for (std::size_t i = 0; i < p.values.size(); ++i) q.values[i] = static_cast<U>(p.values[i]);
    }
    return out;
  }

  std::uint64_t seed = 0;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.params_ == b.params_;
  }

 private:
  std::vector<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Gaussian(0, 0.02) weights, zero biases, unit norm scales, zero offsets;
// identical (arch, seed) pairs give bit-identical stores.
template <typename T>
ParamStore<T> init_params(const arch::ArchDescriptor& arch, std::uint64_t seed, double weight_std = 0.02);

enum class Mode { train, eval };

template <typename T>
struct Tape;

// A network instantiated from an ArchDescriptor.
//
// forward() without a tape is a pure function of (params, input). The taped
// overload records what backward() needs and, in train mode, updates
// batch-norm running statistics. One network may be applied several times per
// step; every application gets its own tape.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(arch::ArchDescriptor arch, ParamStore<T> params);
  static Network create(const arch::ArchDescriptor& arch, std::uint64_t seed);

  const arch::ArchDescriptor& arch() const noexcept { return arch_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }

  Tensor<T> forward(const Tensor<T>& input) const;
  Tensor<T> forward(const Tensor<T>& input, Tape<T>& tape);

  // Propagates grad_output back through the recorded application. Parameter
  // gradients are accumulated into `grads` when it is non-null (pass nullptr
  // to treat the network as frozen). Returns the gradient w.r.t. the input.
  Tensor<T> backward(const Tape<T>& tape, const Tensor<T>& grad_output, ParamStore<T>* grads) const;

  ParamStore<T> zero_grads() const { return params_.zeros_like(); }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(arch_, params_.template cast<U>());
    out.set_mode(mode_);
    return out;
  }

 private:
  Tensor<T> run(const Tensor<T>& input, Tape<T>* tape, bool update_stats);

  arch::ArchDescriptor arch_;
  ParamStore<T> params_;
  Mode mode_ = Mode::train;
};

// Opaque record of one forward application.
template <typename T>
struct Tape {
  struct Record;
  std::vector<std::shared_ptr<Record>> records;
  bool complete = false;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Network<float>;
extern template class Network<double>;

}  // namespace soilgen::nn
