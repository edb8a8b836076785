#include "morphnerf/optim.hpp"

#include <cmath>

namespace mnrf {

void ParameterStore::add(const std::string& name, ad::Mat value, bool trainable) {
  if (tensors_.count(name)) throw DomainError("ParameterStore: duplicate tensor '" + name + "'");
  tensors_.emplace(name, ParamTensor{std::move(value), trainable});
}

ParamTensor& ParameterStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw DomainError("ParameterStore: unknown tensor '" + name + "'");
  return it->second;
}

const ParamTensor& ParameterStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw DomainError("ParameterStore: unknown tensor '" + name + "'");
  return it->second;
}

ad::Mat& ParameterStore::value(const std::string& name) { return at(name).value; }
const ad::Mat& ParameterStore::value(const std::string& name) const { return at(name).value; }
bool ParameterStore::trainable(const std::string& name) const { return at(name).trainable; }
void ParameterStore::set_trainable(const std::string& name, bool trainable) {
  at(name).trainable = trainable;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

ad::Var GraphBinding::use(ad::Tape& tape, const ParameterStore& store, const std::string& name) {
  const ad::Mat& m = store.value(name);
  ad::Var v = tape.leaf(m);
  uses_.push_back(Use{name, v, -1, m.rows(), m.cols()});
  return v;
}

ad::Var GraphBinding::use_row(ad::Tape& tape, const ParameterStore& store,
                              const std::string& name, int row) {
  const ad::Mat& m = store.value(name);
  if (row < 0 || row >= m.rows()) throw DomainError("use_row: row out of range for '" + name + "'");
  ad::Var v = tape.leaf(m.row(row));
  uses_.push_back(Use{name, v, row, m.rows(), m.cols()});
  return v;
}

GradientReport GraphBinding::collect(const ad::Tape& tape) const {
  GradientReport report;
  for (const Use& u : uses_) {
    auto it = report.grads.find(u.name);
    if (it == report.grads.end())
      it = report.grads.emplace(u.name, ad::Mat::Zero(u.rows, u.cols)).first;
    const ad::Mat g = tape.grad(u.var);
    if (u.row < 0)
      it->second += g;
    else
      it->second.row(u.row) += g.row(0);
  }
  double sq = 0.0;
  for (const auto& [name, g] : report.grads) {
    if (!g.allFinite())
      throw DivergenceError("non-finite gradient in tensor '" + name + "'");
    sq += g.squaredNorm();
  }
  report.global_norm = std::sqrt(sq);
  return report;
}

void Adam::step(ParameterStore& store, const GradientReport& grads,
                const std::function<double(const std::string&)>& lr_for) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (auto& [name, tensor] : store.tensors()) {
    if (!tensor.trainable) continue;
    auto mit = moments_.find(name);
    if (mit == moments_.end()) {
      mit = moments_
                .emplace(name, std::make_pair(ad::Mat::Zero(tensor.value.rows(), tensor.value.cols()),
                                              ad::Mat::Zero(tensor.value.rows(), tensor.value.cols())))
                .first;
    }
    auto git = grads.grads.find(name);
    const bool has_grad = git != grads.grads.end();
    ad::Mat& m = mit->second.first;
    ad::Mat& v = mit->second.second;
    const double lr = lr_for(name);
    // single fused pass; the expression form allocates several full-size
    // temporaries per tensor and dominates small-batch iterations
    double* mp = m.data();
    double* vp = v.data();
    double* value = tensor.value.data();
    const double* gp = has_grad ? git->second.data() : nullptr;
    const Eigen::Index count = tensor.value.size();
    bool finite = true;
    for (Eigen::Index i = 0; i < count; ++i) {
      const double g = gp ? gp[i] : 0.0;
      mp[i] = beta1_ * mp[i] + (1.0 - beta1_) * g;
      vp[i] = beta2_ * vp[i] + (1.0 - beta2_) * g * g;
      value[i] -= lr * (mp[i] / bc1) / (std::sqrt(vp[i] / bc2) + eps_);
      finite = finite && std::isfinite(value[i]);
    }
    if (!finite)
      throw DivergenceError("non-finite parameter after update in tensor '" + name + "'");
  }
}

}  // namespace mnrf
