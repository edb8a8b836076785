#pragma once

// The neural field: latent codes, positional encoding, the appearance and
// density MLP architectures, and the hypernetwork that emits subject-specific
// weights for both MLPs from an identity code.
//
// Appearance MLP (hidden width 128, LeakyReLU 0.2, final sigmoid):
//   A1(appearance ⊕ PE(x)) -> A2 -> A3(A2 ⊕ appearance ⊕ PE(x))
//   -> A4(A3 ⊕ PE(d)) -> A5 -> rgb
// Density MLP (final ReLU):
//   MB/MS: three-layer maps from the shape code; the expression code is
//   modulated elementwise as eps' = MS(shape) * eps + MB(shape), then
//   E1(eps' ⊕ PE(x)) -> E2 -> E3 -> S1(shape ⊕ E3) -> S2
//   -> S3(shape ⊕ E3 ⊕ S2) -> S4 -> S5(appearance ⊕ PE(x) ⊕ S4) -> S6 -> sigma
//
// The hypernetwork owns one pair of dense layers per target layer: the first
// is dim(identity) x dim(identity) with LeakyReLU, the second maps to that
// layer's flat parameter count. Generated parameters are added to a learned
// per-layer base vector.
//
// All widths (hidden sizes and latent dims alike) divide by `width_divisor`
// so the same wiring runs at reduced scale; the positional encoding stays at
// 66 = 3 * 2 * 11 dims and final outputs stay 3 and 1.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "morphnerf/autodiff.hpp"
#include "morphnerf/optim.hpp"
#include "morphnerf/rng.hpp"

namespace mnrf {

struct PositionalEncodingSpec {
  int num_frequencies = 11;
  bool include_identity = false;  // fixed; kept for documentation value
  int output_dim() const { return 3 * 2 * num_frequencies; }
};

/// Encodes one 3D point: column c*2*J + 2*j is sin(2^j * pi * x_c) and the
/// next is cos(2^j * pi * x_c), for j = 0..J-1.
Eigen::VectorXd encode_position(const Eigen::Vector3d& x,
                                const PositionalEncodingSpec& spec = {});

/// Row-batched encoding: points [n x 3] -> [n x output_dim].
ad::Mat encode_positions(const Eigen::Matrix<double, Eigen::Dynamic, 3>& points,
                         const PositionalEncodingSpec& spec = {});

enum class Activation { None, LeakyRelu, Relu, Sigmoid };

struct LayerSpec {
  std::string name;
  int in = 0, out = 0;
  Activation activation = Activation::None;
  int weight_count() const { return in * out; }
  int parameter_count() const { return in * out + out; }
};

/// Offsets of one layer inside a flat parameter vector: weights first
/// (row-major, out x in), then biases.
struct LayerChunk {
  std::string name;
  std::size_t offset = 0;       // start of the weight block
  int rows = 0, cols = 0;       // out, in
  std::size_t bias_offset = 0;  // start of the bias block
};

struct WeightLayout {
  std::vector<LayerChunk> chunks;
  std::size_t total = 0;
  const LayerChunk& chunk(const std::string& name) const;
};

/// Flat parameter vector for one generated MLP plus its layout map.
struct GeneratedWeights {
  Eigen::VectorXd flat;
  WeightLayout layout;

  Eigen::MatrixXd weights(const std::string& layer) const;
  Eigen::VectorXd biases(const std::string& layer) const;
};

struct MlpArchitecture {
  std::vector<LayerSpec> appearance;  // A1..A5
  std::vector<LayerSpec> shape;       // MB1..MB3, MS1..MS3, E1..E3, S1..S6
  int dim_identity = 0;               // hypernetwork input
  int dim_appearance = 0;
  int dim_shape = 0;
  int dim_expression = 0;
  int pe_dim = 66;
  int hyper_hidden = 0;  // width of the first hypernetwork layer
  int width_divisor = 1;
  bool shared_weights = false;  // ablation: one weight set, identity code as input

  /// Builds the architecture, checking every input width against the wiring
  /// arithmetic (322/450/194/130/256/384/450 at divisor 1).
  static MlpArchitecture make(int width_divisor = 1, bool shared_weights = false);

  WeightLayout appearance_layout() const;
  WeightLayout shape_layout() const;
  const LayerSpec& layer(const std::string& name) const;
  std::vector<const LayerSpec*> all_layers() const;
};

struct LatentCodes {
  Eigen::VectorXd theta;  // identity, feeds the hypernetwork
  Eigen::VectorXd alpha;  // appearance
  Eigen::VectorXd beta;   // shape
  int epsilon_index = 0;  // row of the shared expression table
};

/// Fully resolved codes for rendering. Identity is split per branch so that
/// appearance/shape swaps between subjects (which exchange the generated
/// weights too) stay expressible.
struct CodeSet {
  Eigen::VectorXd theta_appearance;
  Eigen::VectorXd theta_shape;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd epsilon;
};

struct FieldModelConfig {
  int width_divisor = 1;
  int subjects = 1;
  int expressions = 4;
  bool hypernetwork = true;
  std::uint64_t seed = 0;
};

/// A dense layer bound on a tape.
struct LayerVars {
  ad::Var w;  // [out x in]
  ad::Var b;  // [out x 1]
};
using LayerMap = std::map<std::string, LayerVars>;

/// Owns the architecture and all trainable tensors: hypernetwork pairs, base
/// weight vectors, per-subject latent tables, and the shared expression table
/// (exactly one storage slot, referenced by every subject).
class FieldModel {
 public:
  FieldModel() = default;
  FieldModel(const FieldModelConfig& config, ParameterStore store)
      : config_(config), arch_(MlpArchitecture::make(config.width_divisor, !config.hypernetwork)),
        store_(std::move(store)) {}

  static FieldModel create(const FieldModelConfig& config);

  const MlpArchitecture& arch() const { return arch_; }
  const FieldModelConfig& config() const { return config_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  /// Graph: generated layers for one MLP from an identity code [1 x d]. With
  /// `frozen` the hypernetwork tensors enter the tape as constants (no
  /// gradients, nothing registered on the binding): gradients still flow to
  /// the identity code through them.
  LayerMap generate_layers(ad::Tape& tape, GraphBinding& binding, ad::Var identity,
                           const std::vector<LayerSpec>& layers, bool frozen = false) const;
  /// Graph: directly parameterized layers (shared-weights ablation).
  LayerMap direct_layers(ad::Tape& tape, GraphBinding& binding,
                         const std::vector<LayerSpec>& layers, bool frozen = false) const;

  /// Graph: rgb [n x 3] for a batch of points. `identity` is consumed only in
  /// shared-weights mode (concatenated into the first trunk layer).
  ad::Var appearance_rgb(ad::Tape& tape, const LayerMap& layers, ad::Var appearance,
                         const ad::Mat& pe_x, const ad::Mat& pe_d, ad::Var identity) const;

  /// Graph: sigma [n x 1] for a batch of points.
  ad::Var density_sigma(ad::Tape& tape, const LayerMap& layers, ad::Var appearance,
                        ad::Var shape, ad::Var expression, const ad::Mat& pe_x,
                        ad::Var identity) const;

  /// Eager hypernetwork evaluation: flat generated parameter vectors for the
  /// appearance and shape MLPs (base + second_layer(LeakyReLU(first_layer))).
  std::pair<GeneratedWeights, GeneratedWeights> hypernet_forward(
      const Eigen::VectorXd& identity) const;

  /// Eager single-point queries against explicit generated weights.
  Eigen::Vector3d appearance_forward(const GeneratedWeights& weights,
                                     const Eigen::VectorXd& appearance,
                                     const Eigen::Vector3d& x, const Eigen::Vector3d& d) const;
  double shape_forward(const GeneratedWeights& weights_shape, const Eigen::VectorXd& appearance,
                       const Eigen::VectorXd& shape, const Eigen::VectorXd& expression,
                       const Eigen::Vector3d& x) const;

  /// Table lookups into the latent stores.
  LatentCodes codes_for_subject(int subject, int expression) const;
  CodeSet resolve(const LatentCodes& codes) const;
  Eigen::VectorXd expression_row(int index) const;

 private:
  FieldModelConfig config_;
  MlpArchitecture arch_;
  ParameterStore store_;

  LayerMap layers_from_flat(ad::Tape& tape, ad::Var flat_appearance, ad::Var flat_shape) const;
};

/// Binds explicit generated weights on a tape as constants (no gradients).
LayerMap bind_generated(ad::Tape& tape, const GeneratedWeights& weights,
                        const std::vector<LayerSpec>& layers);

/// Deterministic tensor initializers.
ad::Mat uniform_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound);
ad::Mat normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev);

}  // namespace mnrf
