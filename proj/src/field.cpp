#include "morphnerf/field.hpp"

#include <cmath>

namespace mnrf {

namespace {
constexpr double kLeakySlope = 0.2;
constexpr double kPi = 3.14159265358979323846;

ad::Var activate(ad::Var x, Activation act) {
  switch (act) {
    case Activation::None: return x;
    case Activation::LeakyRelu: return ad::leaky_relu(x, kLeakySlope);
    case Activation::Relu: return ad::relu(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
  }
  throw DomainError("unknown activation");
}

WeightLayout layout_of(const std::vector<LayerSpec>& layers) {
  WeightLayout layout;
  std::size_t offset = 0;
  for (const LayerSpec& l : layers) {
    LayerChunk c;
    c.name = l.name;
    c.offset = offset;
    c.rows = l.out;
    c.cols = l.in;
    c.bias_offset = offset + static_cast<std::size_t>(l.weight_count());
    offset += static_cast<std::size_t>(l.parameter_count());
    layout.chunks.push_back(c);
  }
  layout.total = offset;
  return layout;
}

}  // namespace

Eigen::VectorXd encode_position(const Eigen::Vector3d& x, const PositionalEncodingSpec& spec) {
  const int j_count = spec.num_frequencies;
  Eigen::VectorXd out(spec.output_dim());
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < j_count; ++j) {
      const double arg = std::ldexp(kPi, j) * x(c);  // 2^j * pi * x_c
      out(c * 2 * j_count + 2 * j) = std::sin(arg);
      out(c * 2 * j_count + 2 * j + 1) = std::cos(arg);
    }
  }
  return out;
}

ad::Mat encode_positions(const Eigen::Matrix<double, Eigen::Dynamic, 3>& points,
                         const PositionalEncodingSpec& spec) {
  // double-angle recurrence: one sin/cos pair per coordinate instead of one
  // per frequency (the batched path is hot inside ray marching)
  const int j_count = spec.num_frequencies;
  const Eigen::Index n = points.rows();
  ad::Mat out(n, spec.output_dim());
  Eigen::ArrayXd s(n), c(n);
  for (int axis = 0; axis < 3; ++axis) {
    s = (kPi * points.col(axis)).array().sin();
    c = (kPi * points.col(axis)).array().cos();
    const int base = axis * 2 * j_count;
    out.col(base) = s;
    out.col(base + 1) = c;
    for (int j = 1; j < j_count; ++j) {
      const Eigen::ArrayXd s2 = 2.0 * s * c;       // sin(2a) = 2 sin a cos a
      c = c * c - s * s;                           // cos(2a) = cos^2 - sin^2
      s = s2;
      out.col(base + 2 * j) = s;
      out.col(base + 2 * j + 1) = c;
    }
  }
  return out;
}

const LayerChunk& WeightLayout::chunk(const std::string& name) const {
  for (const LayerChunk& c : chunks)
    if (c.name == name) return c;
  throw DomainError("WeightLayout: unknown layer '" + name + "'");
}

Eigen::MatrixXd GeneratedWeights::weights(const std::string& layer) const {
  const LayerChunk& c = layout.chunk(layer);
  Eigen::MatrixXd w(c.rows, c.cols);
  for (int r = 0; r < c.rows; ++r)
    for (int k = 0; k < c.cols; ++k)
      w(r, k) = flat(static_cast<Eigen::Index>(c.offset) + r * c.cols + k);
  return w;
}

Eigen::VectorXd GeneratedWeights::biases(const std::string& layer) const {
  const LayerChunk& c = layout.chunk(layer);
  return flat.segment(static_cast<Eigen::Index>(c.bias_offset), c.rows);
}

MlpArchitecture MlpArchitecture::make(int width_divisor, bool shared_weights) {
  if (width_divisor != 1 && width_divisor != 2 && width_divisor != 4)
    throw DomainError("MlpArchitecture: width divisor must be 1, 2, or 4");
  const int d = width_divisor;
  MlpArchitecture a;
  a.width_divisor = d;
  a.shared_weights = shared_weights;
  a.dim_identity = 256 / d;
  a.dim_appearance = 256 / d;
  a.dim_shape = 128 / d;
  a.dim_expression = 64 / d;
  a.hyper_hidden = 256 / d;
  const int pe = a.pe_dim;
  const int h = 128 / d;   // main hidden width
  const int hv = 64 / d;   // narrow hidden width
  const int id_extra = shared_weights ? a.dim_identity : 0;

  a.appearance = {
      {"A1", a.dim_appearance + pe + id_extra, h, Activation::LeakyRelu},
      {"A2", h, h, Activation::LeakyRelu},
      {"A3", h + a.dim_appearance + pe, h, Activation::LeakyRelu},
      {"A4", h + pe, hv, Activation::LeakyRelu},
      {"A5", hv, 3, Activation::Sigmoid},
  };
  a.shape = {
      {"MB1", a.dim_shape, h, Activation::LeakyRelu},
      {"MB2", h, h, Activation::LeakyRelu},
      {"MB3", h, a.dim_expression, Activation::None},
      {"MS1", a.dim_shape, h, Activation::LeakyRelu},
      {"MS2", h, h, Activation::LeakyRelu},
      {"MS3", h, a.dim_expression, Activation::None},
      {"E1", a.dim_expression + pe, h, Activation::LeakyRelu},
      {"E2", h, h, Activation::LeakyRelu},
      {"E3", h, h, Activation::LeakyRelu},
      {"S1", a.dim_shape + h + id_extra, h, Activation::LeakyRelu},
      {"S2", h, h, Activation::LeakyRelu},
      {"S3", a.dim_shape + h + h, h, Activation::LeakyRelu},
      {"S4", h, h, Activation::LeakyRelu},
      {"S5", a.dim_appearance + pe + h, hv, Activation::LeakyRelu},
      {"S6", hv, 1, Activation::Relu},
  };

  // Cross-check the wiring arithmetic against the published widths. Inputs
  // decompose into a fixed PE part (66) plus width-scaled parts; the shared
  // baseline additionally feeds the identity code into A1 and S1.
  const auto expect = [&](const std::string& name, int published_in, bool has_pe,
                          bool gets_identity) {
    const int pe_part = has_pe ? pe : 0;
    const int scaled = (published_in - pe_part) / d + pe_part +
                       (shared_weights && gets_identity ? a.dim_identity : 0);
    if (a.layer(name).in != scaled)
      throw DomainError("architecture: layer " + name + " input width mismatch");
  };
  expect("A1", 322, true, true);
  expect("A2", 128, false, false);
  expect("A3", 450, true, false);
  expect("A4", 194, true, false);
  expect("A5", 64, false, false);
  expect("MB1", 128, false, false);
  expect("MB3", 128, false, false);
  expect("E1", 130, true, false);
  expect("S1", 256, false, true);
  expect("S3", 384, false, false);
  expect("S5", 450, true, false);
  expect("S6", 64, false, false);
  return a;
}

WeightLayout MlpArchitecture::appearance_layout() const { return layout_of(appearance); }
WeightLayout MlpArchitecture::shape_layout() const { return layout_of(shape); }

const LayerSpec& MlpArchitecture::layer(const std::string& name) const {
  for (const LayerSpec& l : appearance)
    if (l.name == name) return l;
  for (const LayerSpec& l : shape)
    if (l.name == name) return l;
  throw DomainError("architecture: unknown layer '" + name + "'");
}

std::vector<const LayerSpec*> MlpArchitecture::all_layers() const {
  std::vector<const LayerSpec*> out;
  for (const LayerSpec& l : appearance) out.push_back(&l);
  for (const LayerSpec& l : shape) out.push_back(&l);
  return out;
}

ad::Mat uniform_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  ad::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

ad::Mat normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  ad::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

FieldModel FieldModel::create(const FieldModelConfig& config) {
  const MlpArchitecture arch = MlpArchitecture::make(config.width_divisor, !config.hypernetwork);
  ParameterStore store;

  for (const LayerSpec* l : arch.all_layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l->in));
    if (config.hypernetwork) {
      Rng rng(config.seed, "init/" + l->name);
      const int p = l->parameter_count();
      ad::Mat base(1, p);
      base.leftCols(l->weight_count()) = uniform_init(rng, 1, l->weight_count(), bound);
      base.rightCols(l->out) = uniform_init(rng, 1, l->out, bound);
      store.add("base/" + l->name, std::move(base));
      const double hyper_bound = 1.0 / std::sqrt(static_cast<double>(arch.dim_identity));
      store.add("hyper/" + l->name + "/w1",
                uniform_init(rng, arch.hyper_hidden, arch.dim_identity, hyper_bound));
      store.add("hyper/" + l->name + "/b1", ad::Mat::Zero(arch.hyper_hidden, 1));
      // near-zero offsets on the shared base stabilize early steps
      const double out_bound = 1e-2 / std::sqrt(static_cast<double>(arch.hyper_hidden));
      store.add("hyper/" + l->name + "/w2", uniform_init(rng, p, arch.hyper_hidden, out_bound));
      store.add("hyper/" + l->name + "/b2", ad::Mat::Zero(p, 1));
    } else {
      Rng rng(config.seed, "init/" + l->name);
      store.add("net/" + l->name + "/w", uniform_init(rng, l->out, l->in, bound));
      store.add("net/" + l->name + "/b", uniform_init(rng, l->out, 1, bound));
    }
  }

  {
    Rng rng(config.seed, "init/latents");
    store.add("latent/identity", normal_init(rng, config.subjects, arch.dim_identity, 0.1));
    store.add("latent/appearance", normal_init(rng, config.subjects, arch.dim_appearance, 0.1));
    store.add("latent/shape", normal_init(rng, config.subjects, arch.dim_shape, 0.1));
    store.add("latent/expression", normal_init(rng, config.expressions, arch.dim_expression, 0.1));
  }

  return FieldModel(config, std::move(store));
}

LayerMap FieldModel::generate_layers(ad::Tape& tape, GraphBinding& binding, ad::Var identity,
                                     const std::vector<LayerSpec>& layers, bool frozen) const {
  if (!config_.hypernetwork)
    throw DomainError("generate_layers: model runs in shared-weights mode");
  const auto bind = [&](const std::string& name) {
    return frozen ? tape.constant(store_.value(name)) : binding.use(tape, store_, name);
  };
  LayerMap out;
  for (const LayerSpec& l : layers) {
    ad::Var w1 = bind("hyper/" + l.name + "/w1");
    ad::Var b1 = bind("hyper/" + l.name + "/b1");
    ad::Var w2 = bind("hyper/" + l.name + "/w2");
    ad::Var b2 = bind("hyper/" + l.name + "/b2");
    ad::Var base = bind("base/" + l.name);
    ad::Var hidden = ad::leaky_relu(ad::linear(identity, w1, b1), kLeakySlope);
    ad::Var flat = ad::add(ad::linear(hidden, w2, b2), base);  // [1 x P]
    LayerVars lv;
    lv.w = ad::reshape_rowmajor(ad::slice_cols(flat, 0, l.weight_count()), l.out, l.in);
    lv.b = ad::reshape_rowmajor(ad::slice_cols(flat, l.weight_count(), l.out), l.out, 1);
    out.emplace(l.name, lv);
  }
  return out;
}

LayerMap FieldModel::direct_layers(ad::Tape& tape, GraphBinding& binding,
                                   const std::vector<LayerSpec>& layers, bool frozen) const {
  if (config_.hypernetwork)
    throw DomainError("direct_layers: model runs in hypernetwork mode");
  const auto bind = [&](const std::string& name) {
    return frozen ? tape.constant(store_.value(name)) : binding.use(tape, store_, name);
  };
  LayerMap out;
  for (const LayerSpec& l : layers) {
    LayerVars lv;
    lv.w = bind("net/" + l.name + "/w");
    lv.b = bind("net/" + l.name + "/b");
    out.emplace(l.name, lv);
  }
  return out;
}

namespace {
ad::Var apply(const LayerMap& layers, const MlpArchitecture& arch, const std::string& name,
              ad::Var in) {
  const LayerSpec& spec = arch.layer(name);
  if (in.cols() != spec.in)
    throw DomainError("field: layer " + name + " input width mismatch");
  const LayerVars& lv = layers.at(name);
  return activate(ad::linear(in, lv.w, lv.b), spec.activation);
}
}  // namespace

ad::Var FieldModel::appearance_rgb(ad::Tape& tape, const LayerMap& layers, ad::Var appearance,
                                   const ad::Mat& pe_x, const ad::Mat& pe_d,
                                   ad::Var identity) const {
  const Eigen::Index n = pe_x.rows();
  ad::Var pex = tape.constant(pe_x);
  ad::Var ped = tape.constant(pe_d);
  ad::Var alpha_rows = ad::broadcast_rows(appearance, n);
  std::vector<ad::Var> in1{alpha_rows, pex};
  if (arch_.shared_weights) in1.push_back(ad::broadcast_rows(identity, n));
  ad::Var a1 = apply(layers, arch_, "A1", ad::concat_cols(in1));
  ad::Var a2 = apply(layers, arch_, "A2", a1);
  ad::Var a3 = apply(layers, arch_, "A3", ad::concat_cols(a2, alpha_rows, pex));
  ad::Var a4 = apply(layers, arch_, "A4", ad::concat_cols(a3, ped));
  return apply(layers, arch_, "A5", a4);
}

ad::Var FieldModel::density_sigma(ad::Tape& tape, const LayerMap& layers, ad::Var appearance,
                                  ad::Var shape, ad::Var expression, const ad::Mat& pe_x,
                                  ad::Var identity) const {
  const Eigen::Index n = pe_x.rows();
  ad::Var pex = tape.constant(pe_x);
  ad::Var mb = apply(layers, arch_, "MB3", apply(layers, arch_, "MB2", apply(layers, arch_, "MB1", shape)));
  ad::Var ms = apply(layers, arch_, "MS3", apply(layers, arch_, "MS2", apply(layers, arch_, "MS1", shape)));
  ad::Var eps_mod = ad::add(ad::mul(ms, expression), mb);  // [1 x dim_expression]
  ad::Var e1 = apply(layers, arch_, "E1", ad::concat_cols(ad::broadcast_rows(eps_mod, n), pex));
  ad::Var e3 = apply(layers, arch_, "E3", apply(layers, arch_, "E2", e1));
  ad::Var beta_rows = ad::broadcast_rows(shape, n);
  std::vector<ad::Var> s1_in{beta_rows, e3};
  if (arch_.shared_weights) s1_in.push_back(ad::broadcast_rows(identity, n));
  ad::Var s1 = apply(layers, arch_, "S1", ad::concat_cols(s1_in));
  ad::Var s2 = apply(layers, arch_, "S2", s1);
  ad::Var s3 = apply(layers, arch_, "S3", ad::concat_cols(beta_rows, e3, s2));
  ad::Var s4 = apply(layers, arch_, "S4", s3);
  ad::Var alpha_rows = ad::broadcast_rows(appearance, n);
  ad::Var s5 = apply(layers, arch_, "S5", ad::concat_cols(alpha_rows, pex, s4));
  return apply(layers, arch_, "S6", s5);
}

std::pair<GeneratedWeights, GeneratedWeights> FieldModel::hypernet_forward(
    const Eigen::VectorXd& identity) const {
  if (!identity.allFinite()) throw DomainError("hypernet_forward: non-finite identity code");
  if (identity.size() != arch_.dim_identity)
    throw DomainError("hypernet_forward: identity code has wrong dimension");
  ad::Tape tape(false);
  GraphBinding binding;
  ad::Var id_row = tape.constant(identity.transpose());
  const auto fill = [&](const std::vector<LayerSpec>& layers, const WeightLayout& layout) {
    GeneratedWeights gw;
    gw.layout = layout;
    gw.flat.resize(static_cast<Eigen::Index>(layout.total));
    LayerMap lm = generate_layers(tape, binding, id_row, layers);
    for (const LayerChunk& c : layout.chunks) {
      const LayerVars& lv = lm.at(c.name);
      for (int r = 0; r < c.rows; ++r)
        for (int k = 0; k < c.cols; ++k)
          gw.flat(static_cast<Eigen::Index>(c.offset) + r * c.cols + k) = lv.w.val()(r, k);
      gw.flat.segment(static_cast<Eigen::Index>(c.bias_offset), c.rows) = lv.b.val().col(0);
    }
    return gw;
  };
  return {fill(arch_.appearance, arch_.appearance_layout()),
          fill(arch_.shape, arch_.shape_layout())};
}

LayerMap bind_generated(ad::Tape& tape, const GeneratedWeights& weights,
                        const std::vector<LayerSpec>& layers) {
  LayerMap out;
  for (const LayerSpec& l : layers) {
    LayerVars lv;
    lv.w = tape.constant(weights.weights(l.name));
    lv.b = tape.constant(weights.biases(l.name));
    out.emplace(l.name, lv);
  }
  return out;
}

Eigen::Vector3d FieldModel::appearance_forward(const GeneratedWeights& weights,
                                               const Eigen::VectorXd& appearance,
                                               const Eigen::Vector3d& x,
                                               const Eigen::Vector3d& d) const {
  if (std::abs(d.norm() - 1.0) > 1e-9)
    throw DomainError("appearance_forward: view direction must be unit length");
  ad::Tape tape(false);
  LayerMap layers = bind_generated(tape, weights, arch_.appearance);
  Eigen::Matrix<double, Eigen::Dynamic, 3> px(1, 3), pd(1, 3);
  px.row(0) = x.transpose();
  pd.row(0) = d.transpose();
  ad::Var alpha = tape.constant(appearance.transpose());
  ad::Var rgb = appearance_rgb(tape, layers, alpha, encode_positions(px), encode_positions(pd),
                               ad::Var{});
  return rgb.val().row(0).transpose();
}

double FieldModel::shape_forward(const GeneratedWeights& weights_shape,
                                 const Eigen::VectorXd& appearance, const Eigen::VectorXd& shape,
                                 const Eigen::VectorXd& expression, const Eigen::Vector3d& x) const {
  ad::Tape tape(false);
  LayerMap layers = bind_generated(tape, weights_shape, arch_.shape);
  Eigen::Matrix<double, Eigen::Dynamic, 3> px(1, 3);
  px.row(0) = x.transpose();
  ad::Var alpha = tape.constant(appearance.transpose());
  ad::Var beta = tape.constant(shape.transpose());
  ad::Var eps = tape.constant(expression.transpose());
  ad::Var sigma = density_sigma(tape, layers, alpha, beta, eps, encode_positions(px), ad::Var{});
  return sigma.val()(0, 0);
}

LatentCodes FieldModel::codes_for_subject(int subject, int expression) const {
  if (subject < 0 || subject >= config_.subjects)
    throw DomainError("codes_for_subject: subject index out of range");
  if (expression < 0 || expression >= config_.expressions)
    throw DomainError("codes_for_subject: expression index out of range");
  LatentCodes codes;
  codes.theta = store_.value("latent/identity").row(subject).transpose();
  codes.alpha = store_.value("latent/appearance").row(subject).transpose();
  codes.beta = store_.value("latent/shape").row(subject).transpose();
  codes.epsilon_index = expression;
  return codes;
}

Eigen::VectorXd FieldModel::expression_row(int index) const {
  const ad::Mat& table = store_.value("latent/expression");
  if (index < 0 || index >= table.rows())
    throw DomainError("expression_row: index out of range");
  return table.row(index).transpose();
}

CodeSet FieldModel::resolve(const LatentCodes& codes) const {
  CodeSet set;
  set.theta_appearance = codes.theta;
  set.theta_shape = codes.theta;
  set.alpha = codes.alpha;
  set.beta = codes.beta;
  set.epsilon = expression_row(codes.epsilon_index);
  return set;
}

}  // namespace mnrf
