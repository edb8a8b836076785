#pragma once

// Named parameter tensors, gradient collection from a tape, and Adam.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "morphnerf/autodiff.hpp"

namespace mnrf {

struct ParamTensor {
  ad::Mat value;
  bool trainable = true;
};

/// Named dense tensors with a trainable flag. Iteration order is the map
/// order (lexicographic by name), which keeps everything downstream
/// deterministic: gradient reports, Adam sweeps, checkpoint payload order.
class ParameterStore {
 public:
  void add(const std::string& name, ad::Mat value, bool trainable = true);
  bool has(const std::string& name) const { return tensors_.count(name) != 0; }
  ad::Mat& value(const std::string& name);
  const ad::Mat& value(const std::string& name) const;
  bool trainable(const std::string& name) const;
  void set_trainable(const std::string& name, bool trainable);

  const std::map<std::string, ParamTensor>& tensors() const { return tensors_; }
  std::map<std::string, ParamTensor>& tensors() { return tensors_; }

  std::size_t parameter_count() const;

 private:
  std::map<std::string, ParamTensor> tensors_;
  ParamTensor& at(const std::string& name);
  const ParamTensor& at(const std::string& name) const;
};

struct GradientReport {
  std::map<std::string, ad::Mat> grads;  // full tensor shape, zero where untouched
  double global_norm = 0.0;
};

/// Records which store tensors were placed on a tape during one forward pass
/// so their gradients can be routed back by name afterwards.
class GraphBinding {
 public:
  /// Whole tensor as a leaf.
  ad::Var use(ad::Tape& tape, const ParameterStore& store, const std::string& name);
  /// One row of a tensor as a [1 x d] leaf (latent-table lookups).
  ad::Var use_row(ad::Tape& tape, const ParameterStore& store, const std::string& name, int row);

  /// Gathers leaf gradients into per-tensor arrays (full tensor shape; rows
  /// accumulate in place). Throws DivergenceError on any non-finite entry,
  /// naming the offending tensor. Uses from multiple stores are fine: the
  /// report is keyed by tensor name only.
  GradientReport collect(const ad::Tape& tape) const;

  void reset() { uses_.clear(); }

 private:
  struct Use {
    std::string name;
    ad::Var var;
    int row;  // -1 for whole-tensor uses
    Eigen::Index rows, cols;  // owning tensor shape
  };
  std::vector<Use> uses_;
};

/// Standard Adam over the trainable tensors of a store. Moment state is keyed
/// by tensor name and created lazily at zero.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Applies one update. `lr_for` maps tensor name to learning rate; tensors
  /// absent from the report see a zero gradient. Frozen tensors never move.
  void step(ParameterStore& store, const GradientReport& grads,
            const std::function<double(const std::string&)>& lr_for);

  void step(ParameterStore& store, const GradientReport& grads, double lr) {
    step(store, grads, [lr](const std::string&) { return lr; });
  }

  std::int64_t step_count() const { return step_count_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  std::map<std::string, std::pair<ad::Mat, ad::Mat>> moments_;
};

}  // namespace mnrf
