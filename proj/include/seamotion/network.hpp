#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seamotion/dataset.hpp"
#include "seamotion/error.hpp"

namespace seamotion {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;
/// Flat parameter or gradient storage, aligned for Eigen's packet kernels.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

enum class Activation { tanh, identity };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }
inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw LoadError("unknown activation '" + s + "'");
}

struct LstmShape {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  /// W_input (4H x r), W_hidden (4H x H), b_input (4H), b_hidden (4H).
  std::size_t param_count() const { return 4 * (hidden_size * input_size + hidden_size * hidden_size + 2 * hidden_size); }
};

struct FcShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::tanh;

  std::size_t param_count() const { return out * in + out; }
};

/// Mutable or const view of one LSTM layer's parameters inside a flat buffer.
/// Gate blocks are stacked in row order i, f, g, o.
template <typename T>
struct BasicLstmView {
  using Map = std::conditional_t<std::is_const_v<T>, ConstRowMatrixMap, RowMatrixMap>;
  using VMap = std::conditional_t<std::is_const_v<T>, ConstVectorMap, VectorMap>;
  Map W_input;
  Map W_hidden;
  VMap b_input;
  VMap b_hidden;

  BasicLstmView(T* base, const LstmShape& s)
      : W_input(base, 4 * s.hidden_size, s.input_size),
        W_hidden(base + 4 * s.hidden_size * s.input_size, 4 * s.hidden_size, s.hidden_size),
        b_input(base + 4 * s.hidden_size * (s.input_size + s.hidden_size), 4 * s.hidden_size),
        b_hidden(base + 4 * s.hidden_size * (s.input_size + s.hidden_size + 1), 4 * s.hidden_size) {}

  template <typename U>
    requires(std::is_const_v<T> && !std::is_const_v<U>)
  BasicLstmView(const BasicLstmView<U>& o)
      : W_input(o.W_input.data(), o.W_input.rows(), o.W_input.cols()),
        W_hidden(o.W_hidden.data(), o.W_hidden.rows(), o.W_hidden.cols()),
        b_input(o.b_input.data(), o.b_input.size()),
        b_hidden(o.b_hidden.data(), o.b_hidden.size()) {}
};
using LstmView = BasicLstmView<double>;
using ConstLstmView = BasicLstmView<const double>;

template <typename T>
struct BasicFcView {
  using Map = std::conditional_t<std::is_const_v<T>, ConstRowMatrixMap, RowMatrixMap>;
  using VMap = std::conditional_t<std::is_const_v<T>, ConstVectorMap, VectorMap>;
  Map weights;
  VMap bias;

  BasicFcView(T* base, const FcShape& s) : weights(base, s.out, s.in), bias(base + s.out * s.in, s.out) {}
};
using FcView = BasicFcView<double>;
using ConstFcView = BasicFcView<const double>;

/// Layer sizes used to build a Network. The FC stack is `fc_widths` tanh
/// layers followed by an affine output layer of size output_size.
struct Architecture {
  std::size_t input_size = 2;
  std::vector<std::size_t> lstm_hidden{50};
  std::vector<std::size_t> fc_widths{50, 50, 50};
  std::size_t output_size = 20;
};

/// Stacked LSTM layers feeding a fully connected stack. All parameters live
/// in one flat buffer; gradients use the same layout.
class Network {
public:
  Network() = default;

  explicit Network(const Architecture& arch) {
    if (arch.lstm_hidden.empty()) throw DomainError("Network: need at least one LSTM layer");
    if (arch.input_size == 0 || arch.output_size == 0) throw DomainError("Network: sizes must be positive");
    std::size_t in = arch.input_size;
    for (std::size_t h : arch.lstm_hidden) {
      if (h == 0) throw DomainError("Network: hidden size must be positive");
      lstm_.push_back({in, h});
      in = h;
    }
    for (std::size_t wdt : arch.fc_widths) {
      if (wdt == 0) throw DomainError("Network: FC width must be positive");
      fc_.push_back({in, wdt, Activation::tanh});
      in = wdt;
    }
    fc_.push_back({in, arch.output_size, Activation::identity});
    layout();
  }

  Network(std::vector<LstmShape> lstm, std::vector<FcShape> fc) : lstm_(std::move(lstm)), fc_(std::move(fc)) {
    validate_shapes();
    layout();
  }

  const std::vector<LstmShape>& lstm_shapes() const { return lstm_; }
  const std::vector<FcShape>& fc_shapes() const { return fc_; }
  std::size_t input_size() const { return lstm_.empty() ? 0 : lstm_.front().input_size; }
  std::size_t output_size() const { return fc_.empty() ? 0 : fc_.back().out; }
  std::size_t param_count() const { return params_.size(); }
  bool empty() const { return lstm_.empty() && fc_.empty(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  LstmView lstm(std::size_t l) { return {params_.data() + lstm_offset_[l], lstm_[l]}; }
  ConstLstmView lstm(std::size_t l) const { return {params_.data() + lstm_offset_[l], lstm_[l]}; }
  FcView fc(std::size_t k) { return {params_.data() + fc_offset_[k], fc_[k]}; }
  ConstFcView fc(std::size_t k) const { return {params_.data() + fc_offset_[k], fc_[k]}; }

  std::size_t lstm_offset(std::size_t l) const { return lstm_offset_[l]; }
  std::size_t fc_offset(std::size_t k) const { return fc_offset_[k]; }

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) for LSTM layer parameters and
  /// Uniform(-1/sqrt(in), 1/sqrt(in)) for FC layers, drawn in layout order.
  void init_uniform(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(lstm_[l].hidden_size));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < lstm_[l].param_count(); ++i) params_[lstm_offset_[l] + i] = u(rng);
    }
    for (std::size_t k = 0; k < fc_.size(); ++k) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fc_[k].in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < fc_[k].param_count(); ++i) params_[fc_offset_[k] + i] = u(rng);
    }
  }

  bool same_shape(const Network& o) const {
    if (lstm_.size() != o.lstm_.size() || fc_.size() != o.fc_.size()) return false;
    for (std::size_t l = 0; l < lstm_.size(); ++l)
      if (lstm_[l].input_size != o.lstm_[l].input_size || lstm_[l].hidden_size != o.lstm_[l].hidden_size)
        return false;
    for (std::size_t k = 0; k < fc_.size(); ++k)
      if (fc_[k].in != o.fc_[k].in || fc_[k].out != o.fc_[k].out || fc_[k].activation != o.fc_[k].activation)
        return false;
    return true;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "input " << input_size();
    for (const auto& s : lstm_) os << " | lstm " << s.hidden_size;
    for (const auto& s : fc_) os << " | fc " << s.in << "->" << s.out << ' ' << to_string(s.activation);
    os << " | params " << param_count();
    return os.str();
  }

private:
  void validate_shapes() const {
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
      if (lstm_[l].input_size == 0 || lstm_[l].hidden_size == 0) throw DomainError("Network: empty LSTM layer");
      if (l > 0 && lstm_[l].input_size != lstm_[l - 1].hidden_size)
        throw DomainError("Network: LSTM layer input does not match previous hidden size");
    }
    for (std::size_t k = 0; k < fc_.size(); ++k) {
      const std::size_t expect = k == 0 ? (lstm_.empty() ? fc_[k].in : lstm_.back().hidden_size) : fc_[k - 1].out;
      if (fc_[k].in != expect) throw DomainError("Network: FC layer input does not match previous output");
    }
    if (!fc_.empty() && lstm_.empty()) throw DomainError("Network: FC stack needs an LSTM layer in front");
  }

  void layout() {
    std::size_t off = 0;
    lstm_offset_.clear();
    fc_offset_.clear();
    for (const auto& s : lstm_) {
      lstm_offset_.push_back(off);
      off += s.param_count();
    }
    for (const auto& s : fc_) {
      fc_offset_.push_back(off);
      off += s.param_count();
    }
    params_.assign(off, 0.0);
  }

  std::vector<LstmShape> lstm_;
  std::vector<FcShape> fc_;
  std::vector<std::size_t> lstm_offset_, fc_offset_;
  ParamVector params_;
};

/// Closed-form trainable parameter count.
inline std::size_t count_params(const Network& net) {
  std::size_t total = 0;
  for (const auto& s : net.lstm_shapes()) total += s.param_count();
  for (const auto& s : net.fc_shapes()) total += s.param_count();
  return total;
}

inline std::size_t count_params(const Architecture& arch) {
  std::size_t total = 0, in = arch.input_size;
  for (std::size_t h : arch.lstm_hidden) {
    total += LstmShape{in, h}.param_count();
    in = h;
  }
  for (std::size_t w : arch.fc_widths) {
    total += FcShape{in, w}.param_count();
    in = w;
  }
  return total + FcShape{in, arch.output_size}.param_count();
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Per-layer activations of a batched LSTM pass. Column block t (width B)
/// holds time step t; hidden keeps h_0 in block 0.
struct LstmTrace {
  std::size_t steps = 0;
  std::size_t batch = 0;
  Matrix inputs;  // in x nB
  Matrix gates;   // 4H x nB, activated i, f, g, o
  Matrix cells;   // H x nB
  Matrix tanh_cells;
  Matrix hidden;  // H x (n+1)B
  Matrix cell0;   // H x B
};

/// Runs one LSTM layer over a batch. `inputs` is in x (n B) with time-major
/// column blocks; h0 and c0 are H x B.
inline void lstm_layer_forward(ConstLstmView layer, const Matrix& inputs, std::size_t steps, const Matrix& h0,
                               const Matrix& c0, LstmTrace& tr) {
  const auto H = static_cast<Eigen::Index>(layer.W_hidden.cols());
  const auto B = static_cast<Eigen::Index>(h0.cols());
  const auto n = static_cast<Eigen::Index>(steps);
  if (inputs.rows() != layer.W_input.cols() || inputs.cols() != n * B || h0.rows() != H || c0.rows() != H ||
      c0.cols() != B)
    throw DomainError("lstm_layer_forward: shape mismatch");
  tr.steps = steps;
  tr.batch = static_cast<std::size_t>(B);
  tr.inputs = inputs;
  tr.cell0 = c0;
  tr.gates.resize(4 * H, n * B);
  tr.cells.resize(H, n * B);
  tr.tanh_cells.resize(H, n * B);
  tr.hidden.resize(H, (n + 1) * B);
  tr.hidden.leftCols(B) = h0;

  const Vector bias = layer.b_input + layer.b_hidden;
  tr.gates.noalias() = layer.W_input * inputs;
  tr.gates.colwise() += bias;
  for (Eigen::Index t = 0; t < n; ++t) {
    auto g = tr.gates.middleCols(t * B, B);
    g.noalias() += layer.W_hidden * tr.hidden.middleCols(t * B, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      double* col = g.col(b).data();
      for (Eigen::Index j = 0; j < H; ++j) {
        col[j] = sigmoid(col[j]);
        col[H + j] = sigmoid(col[H + j]);
        col[2 * H + j] = std::tanh(col[2 * H + j]);
        col[3 * H + j] = sigmoid(col[3 * H + j]);
      }
      const double* cprev = t == 0 ? tr.cell0.col(b).data() : tr.cells.col((t - 1) * B + b).data();
      double* c = tr.cells.col(t * B + b).data();
      double* tc = tr.tanh_cells.col(t * B + b).data();
      double* h = tr.hidden.col((t + 1) * B + b).data();
      for (Eigen::Index j = 0; j < H; ++j) {
        c[j] = col[H + j] * cprev[j] + col[j] * col[2 * H + j];
        tc[j] = std::tanh(c[j]);
        h[j] = col[3 * H + j] * tc[j];
      }
    }
  }
}

/// Backpropagates through one traced LSTM layer. `d_hidden` is H x nB (the
/// loss gradient w.r.t. each emitted h_t). Accumulates into `grad` and, when
/// `d_inputs` is non-null, writes the gradient w.r.t. the layer inputs.
inline void lstm_layer_backward(ConstLstmView layer, const LstmTrace& tr, const Matrix& d_hidden, LstmView grad,
                                Matrix* d_inputs) {
  const auto H = static_cast<Eigen::Index>(layer.W_hidden.cols());
  const auto B = static_cast<Eigen::Index>(tr.batch);
  const auto n = static_cast<Eigen::Index>(tr.steps);
  Matrix d_pre(4 * H, n * B);
  Matrix dh_next = Matrix::Zero(H, B);
  Matrix dc_next = Matrix::Zero(H, B);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    dh_next += d_hidden.middleCols(t * B, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const double* gate = tr.gates.col(t * B + b).data();
      const double* tc = tr.tanh_cells.col(t * B + b).data();
      const double* cprev = t == 0 ? tr.cell0.col(b).data() : tr.cells.col((t - 1) * B + b).data();
      const double* dh = dh_next.col(b).data();
      double* dc = dc_next.col(b).data();
      double* dp = d_pre.col(t * B + b).data();
      for (Eigen::Index j = 0; j < H; ++j) {
        const double i = gate[j], f = gate[H + j], g = gate[2 * H + j], o = gate[3 * H + j];
        const double dcell = dc[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
        dp[j] = dcell * g * i * (1.0 - i);
        dp[H + j] = dcell * cprev[j] * f * (1.0 - f);
        dp[2 * H + j] = dcell * i * (1.0 - g * g);
        dp[3 * H + j] = dh[j] * tc[j] * o * (1.0 - o);
        dc[j] = dcell * f;
      }
    }
    dh_next.noalias() = layer.W_hidden.transpose() * d_pre.middleCols(t * B, B);
  }
  grad.W_input.noalias() += d_pre * tr.inputs.transpose();
  grad.W_hidden.noalias() += d_pre * tr.hidden.leftCols(n * B).transpose();
  const Vector db = d_pre.rowwise().sum();
  grad.b_input += db;
  grad.b_hidden += db;
  if (d_inputs) d_inputs->noalias() = layer.W_input.transpose() * d_pre;
}

/// Hidden sequence and final state of a single-sequence LSTM pass.
struct LstmSequenceResult {
  Matrix hidden;  // n x H, row t is h_{t+1}
  Vector final_h;
  Vector final_c;
};

/// Single sequence through one layer. `inputs` is n x r (row t = x_t).
/// Initial state defaults to zeros.
inline LstmSequenceResult lstm_forward(ConstLstmView layer, const Matrix& inputs, const Vector* h0 = nullptr,
                                       const Vector* c0 = nullptr) {
  const auto H = layer.W_hidden.cols();
  if (inputs.cols() != layer.W_input.cols()) throw DomainError("lstm_forward: input feature count mismatch");
  if ((h0 && h0->size() != H) || (c0 && c0->size() != H)) throw DomainError("lstm_forward: state size mismatch");
  const Matrix hz = h0 ? Matrix(*h0) : Matrix::Zero(H, 1);
  const Matrix cz = c0 ? Matrix(*c0) : Matrix::Zero(H, 1);
  LstmTrace tr;
  const Matrix in_t = inputs.transpose();
  lstm_layer_forward(layer, in_t, static_cast<std::size_t>(inputs.rows()), hz, cz, tr);
  LstmSequenceResult out;
  out.hidden = tr.hidden.rightCols(inputs.rows()).transpose();
  out.final_h = tr.hidden.col(tr.hidden.cols() - 1);
  out.final_c = inputs.rows() > 0 ? Vector(tr.cells.col(tr.cells.cols() - 1)) : Vector(cz.col(0));
  return out;
}

/// A batch laid out for the network: inputs r x (n B) time-major blocks,
/// targets m x B.
struct Batch {
  std::size_t steps = 0;
  std::size_t size = 0;
  Matrix inputs;
  Matrix targets;
};

inline Batch make_batch(const WindowedDataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.steps = ds.n();
  b.size = indices.size();
  const auto B = static_cast<Eigen::Index>(indices.size());
  b.inputs.resize(static_cast<Eigen::Index>(ds.r()), static_cast<Eigen::Index>(ds.n()) * B);
  b.targets.resize(static_cast<Eigen::Index>(ds.m()), B);
  for (Eigen::Index s = 0; s < B; ++s) {
    const std::size_t i = indices[static_cast<std::size_t>(s)];
    for (std::size_t t = 0; t < ds.n(); ++t)
      for (std::size_t c = 0; c < ds.r(); ++c)
        b.inputs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t) * B + s) = ds.input(i, c, t);
    for (std::size_t j = 0; j < ds.m(); ++j) b.targets(static_cast<Eigen::Index>(j), s) = ds.target(i, j);
  }
  return b;
}

inline Batch make_batch(std::span<const WindowSample> samples) {
  if (samples.empty()) throw DomainError("make_batch: empty batch");
  Batch b;
  const auto& first = samples.front();
  b.steps = first.n;
  b.size = samples.size();
  const auto B = static_cast<Eigen::Index>(samples.size());
  b.inputs.resize(static_cast<Eigen::Index>(first.channels), static_cast<Eigen::Index>(first.n) * B);
  b.targets.resize(static_cast<Eigen::Index>(first.Y.size()), B);
  for (Eigen::Index s = 0; s < B; ++s) {
    const auto& smp = samples[static_cast<std::size_t>(s)];
    if (smp.n != first.n || smp.channels != first.channels || smp.Y.size() != first.Y.size() ||
        smp.X.size() != smp.channels * smp.n)
      throw DomainError("make_batch: samples disagree in shape");
    for (std::size_t t = 0; t < smp.n; ++t)
      for (std::size_t c = 0; c < smp.channels; ++c)
        b.inputs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t) * B + s) = smp.x(c, t);
    for (std::size_t j = 0; j < smp.Y.size(); ++j) b.targets(static_cast<Eigen::Index>(j), s) = smp.Y[j];
  }
  return b;
}

/// Everything the backward pass needs from a forward pass.
struct ForwardTrace {
  std::vector<LstmTrace> lstm;
  std::vector<Matrix> fc_inputs;  // activation entering FC layer k
  Matrix output;                  // m x B
};

inline void check_input(const Network& net, const Batch& batch) {
  if (net.empty()) throw DomainError("forward: empty network");
  if (static_cast<std::size_t>(batch.inputs.rows()) != net.input_size())
    throw DomainError("forward: input feature count " + std::to_string(batch.inputs.rows()) +
                      " does not match network input size " + std::to_string(net.input_size()));
  if (batch.steps == 0 || batch.size == 0) throw DomainError("forward: empty batch");
}

inline void forward_trace(const Network& net, const Batch& batch, ForwardTrace& tr) {
  check_input(net, batch);
  const auto B = static_cast<Eigen::Index>(batch.size);
  tr.lstm.resize(net.lstm_shapes().size());
  const Matrix* in = &batch.inputs;
  for (std::size_t l = 0; l < net.lstm_shapes().size(); ++l) {
    const auto H = static_cast<Eigen::Index>(net.lstm_shapes()[l].hidden_size);
    lstm_layer_forward(net.lstm(l), *in, batch.steps, Matrix::Zero(H, B), Matrix::Zero(H, B), tr.lstm[l]);
    if (l + 1 < net.lstm_shapes().size()) {
      // Next layer consumes h_1..h_n.
      tr.lstm[l + 1].inputs = tr.lstm[l].hidden.rightCols(static_cast<Eigen::Index>(batch.steps) * B);
      in = &tr.lstm[l + 1].inputs;
    }
  }
  tr.fc_inputs.resize(net.fc_shapes().size());
  Matrix act = tr.lstm.back().hidden.rightCols(B);
  for (std::size_t k = 0; k < net.fc_shapes().size(); ++k) {
    tr.fc_inputs[k] = act;
    const auto fc = net.fc(k);
    Matrix z = fc.weights * tr.fc_inputs[k];
    z.colwise() += fc.bias;
    if (net.fc_shapes()[k].activation == Activation::tanh) z = z.array().tanh().matrix();
    act.swap(z);
  }
  tr.output = std::move(act);
}

/// Network output for a batch, m x B.
inline Matrix forward_batch(const Network& net, const Batch& batch) {
  ForwardTrace tr;
  forward_trace(net, batch, tr);
  return std::move(tr.output);
}

/// Prediction (length m) for one window.
inline std::vector<double> forward(const Network& net, const WindowSample& x) {
  if (x.channels != net.input_size()) throw DomainError("forward: feature count does not match network input size");
  Batch b;
  b.steps = x.n;
  b.size = 1;
  b.inputs.resize(static_cast<Eigen::Index>(x.channels), static_cast<Eigen::Index>(x.n));
  for (std::size_t t = 0; t < x.n; ++t)
    for (std::size_t c = 0; c < x.channels; ++c)
      b.inputs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = x.x(c, t);
  const Matrix out = forward_batch(net, b);
  return std::vector<double>(out.data(), out.data() + out.size());
}

inline double mse_loss(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DomainError("mse_loss: length mismatch");
  if (pred.empty()) throw DomainError("mse_loss: empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return acc / static_cast<double>(pred.size());
}

/// Batch-mean MSE of a forward output against targets.
inline double batch_loss(const Matrix& output, const Matrix& targets) {
  if (output.rows() != targets.rows() || output.cols() != targets.cols())
    throw DomainError("batch_loss: output and target shapes differ");
  return (output - targets).squaredNorm() / static_cast<double>(output.size());
}

inline void throw_if_nonfinite(const Matrix& output, const Batch& batch) {
  if (output.allFinite()) return;
  Eigen::Index bad = 0;
  for (; bad < output.cols(); ++bad)
    if (!output.col(bad).allFinite()) break;
  std::ostringstream os;
  os << "non-finite network output: batch size " << batch.size << ", steps " << batch.steps
     << ", first bad sample " << bad << ", max |input| " << batch.inputs.cwiseAbs().maxCoeff();
  throw NumericalError(os.str());
}

/// Batch-mean MSE and its exact gradient (full backpropagation through time),
/// written into `grad` (resized to the parameter count).
inline double loss_and_gradient(const Network& net, const Batch& batch, ParamVector& grad) {
  ForwardTrace tr;
  forward_trace(net, batch, tr);
  throw_if_nonfinite(tr.output, batch);
  if (tr.output.rows() != batch.targets.rows())
    throw DomainError("backward: target length does not match network output size");
  const double loss = batch_loss(tr.output, batch.targets);

  grad.assign(net.param_count(), 0.0);
  const auto B = static_cast<Eigen::Index>(batch.size);
  Matrix d_act = (2.0 / static_cast<double>(tr.output.size())) * (tr.output - batch.targets);
  for (std::size_t k = net.fc_shapes().size(); k-- > 0;) {
    const auto& shape = net.fc_shapes()[k];
    FcView g(grad.data() + net.fc_offset(k), shape);
    if (shape.activation == Activation::tanh) {
      // Recompute tanh output from the next layer's stored input.
      const Matrix& a = (k + 1 < net.fc_shapes().size()) ? tr.fc_inputs[k + 1] : tr.output;
      d_act.array() *= 1.0 - a.array().square();
    }
    g.weights.noalias() += d_act * tr.fc_inputs[k].transpose();
    g.bias += d_act.rowwise().sum();
    Matrix d_in = net.fc(k).weights.transpose() * d_act;
    d_act.swap(d_in);
  }

  const auto n = static_cast<Eigen::Index>(batch.steps);
  Matrix d_hidden;
  for (std::size_t l = net.lstm_shapes().size(); l-- > 0;) {
    const auto H = static_cast<Eigen::Index>(net.lstm_shapes()[l].hidden_size);
    if (l + 1 == net.lstm_shapes().size()) {
      d_hidden = Matrix::Zero(H, n * B);
      d_hidden.rightCols(B) = d_act;
    }
    LstmView g(grad.data() + net.lstm_offset(l), net.lstm_shapes()[l]);
    Matrix d_inputs;
    lstm_layer_backward(net.lstm(l), tr.lstm[l], d_hidden, g, l > 0 ? &d_inputs : nullptr);
    if (l > 0) d_hidden.swap(d_inputs);
  }
  return loss;
}

struct LossAndGradient {
  double loss = 0.0;
  ParamVector gradient;
};

/// Gradient of the batch-mean MSE over a list of windows.
inline LossAndGradient backward(const Network& net, std::span<const WindowSample> batch) {
  if (batch.empty()) throw DomainError("backward: empty batch");
  LossAndGradient out;
  out.loss = loss_and_gradient(net, make_batch(batch), out.gradient);
  return out;
}

/// Mean per-window MSE over a dataset, evaluated in chunks.
inline double dataset_loss(const Network& net, const WindowedDataset& ds, std::size_t chunk = 1024) {
  if (ds.empty()) throw DomainError("dataset_loss: empty dataset");
  double acc = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(ds.size(), start + chunk); ++i) idx.push_back(i);
    const Batch b = make_batch(ds, idx);
    const Matrix out = forward_batch(net, b);
    acc += (out - b.targets).squaredNorm() / static_cast<double>(ds.m());
  }
  return acc / static_cast<double>(ds.size());
}

}  // namespace seamotion
