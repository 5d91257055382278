#include "esmeta/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "esmeta/errors.hpp"
#include "esmeta/rng.hpp"
#include "softplus_kernel.hpp"

namespace esmeta {

int ConvLayerSpec::output_length(int input_length) const {
  const int span = input_length + 2 * padding - kernel;
  if (span < 0 || stride < 1) return 0;
  return span / stride + 1;
}

double softplus(double x, double beta) {
  return std::max(x, 0.0) + std::log1p(std::exp(-beta * std::abs(x))) / beta;
}

ConvSurrogate::ConvSurrogate(std::vector<ConvLayerSpec> layers, int input_length, double beta)
    : layers_(std::move(layers)), input_length_(input_length), beta_(beta) {
  if (layers_.empty()) throw ShapeMismatchError("ConvSurrogate: no layers");
  if (!(beta_ > 0.0)) throw std::invalid_argument("ConvSurrogate: beta must be > 0");
  if (layers_.front().in_channels != 1)
    throw ShapeMismatchError("ConvSurrogate: input layer must have one channel");
  if (layers_.back().out_channels != 1)
    throw ShapeMismatchError("ConvSurrogate: output layer must have one channel");
  lengths_.push_back(input_length_);
  long offset = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const ConvLayerSpec& l = layers_[k];
    if (l.in_channels < 1 || l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.padding < 0)
      throw ShapeMismatchError("ConvSurrogate: map " + std::to_string(k) + " has a non-positive size");
    if (k > 0 && l.in_channels != layers_[k - 1].out_channels)
      throw ShapeMismatchError("ConvSurrogate: channel chain broken at map " + std::to_string(k));
    const int len = l.output_length(lengths_.back());
    if (len < 1)
      throw ShapeMismatchError("ConvSurrogate: length recursion fails at map " + std::to_string(k));
    lengths_.push_back(len);
    offsets_.push_back(offset);
    offset += l.parameter_count();
  }
  if (lengths_.back() != 1) throw ShapeMismatchError("ConvSurrogate: output is not a scalar");
  params_ = Eigen::VectorXd::Zero(offset);
}

std::vector<int> ConvSurrogate::channels() const {
  std::vector<int> c{layers_.front().in_channels};
  for (const auto& l : layers_) c.push_back(l.out_channels);
  return c;
}

long ConvSurrogate::neuron_count(int layer) const {
  return static_cast<long>(lengths_.at(layer)) * channels().at(layer);
}

Eigen::Map<const Eigen::MatrixXd> ConvSurrogate::weights(int map) const {
  const auto& l = layers_[map];
  return {params_.data() + offsets_[map], l.out_channels, static_cast<Eigen::Index>(l.kernel) * l.in_channels};
}

Eigen::Map<Eigen::MatrixXd> ConvSurrogate::weights(int map) {
  const auto& l = layers_[map];
  return {params_.data() + offsets_[map], l.out_channels, static_cast<Eigen::Index>(l.kernel) * l.in_channels};
}

Eigen::Map<const Eigen::VectorXd> ConvSurrogate::bias(int map) const {
  const auto& l = layers_[map];
  return {params_.data() + offsets_[map] + static_cast<long>(l.kernel) * l.in_channels * l.out_channels,
          l.out_channels};
}

Eigen::Map<Eigen::VectorXd> ConvSurrogate::bias(int map) {
  const auto& l = layers_[map];
  return {params_.data() + offsets_[map] + static_cast<long>(l.kernel) * l.in_channels * l.out_channels,
          l.out_channels};
}

void ConvSurrogate::init_params(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  for (int k = 0; k < num_maps(); ++k) {
    const auto& l = layers_[k];
    const double bound = std::sqrt(1.0 / (static_cast<double>(l.in_channels) * l.kernel));
    const long n = l.parameter_count();
    for (long i = 0; i < n; ++i) params_[offsets_[k] + i] = uniform(rng, -bound, bound);
  }
}

void ConvSurrogate::im2col(int map, const Eigen::MatrixXd& in, Eigen::MatrixXd& cols, int batch) const {
  const auto& l = layers_[map];
  const int lin = lengths_[map];
  const int lout = lengths_[map + 1];
  const int cin = l.in_channels;
  cols.resize(static_cast<Eigen::Index>(cin) * l.kernel, static_cast<Eigen::Index>(lout) * batch);
  for (int b = 0; b < batch; ++b) {
    for (int lo = 0; lo < lout; ++lo) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * lout + lo;
      for (int kk = 0; kk < l.kernel; ++kk) {
        const int li = lo * l.stride - l.padding + kk;
        auto dst = cols.block(static_cast<Eigen::Index>(kk) * cin, col, cin, 1);
        if (li >= 0 && li < lin)
          dst = in.col(static_cast<Eigen::Index>(b) * lin + li);
        else
          dst.setZero();
      }
    }
  }
}

void ConvSurrogate::col2im(int map, const Eigen::MatrixXd& cols, Eigen::MatrixXd& out, int batch) const {
  const auto& l = layers_[map];
  const int lin = lengths_[map];
  const int lout = lengths_[map + 1];
  const int cin = l.in_channels;
  out.setZero(cin, static_cast<Eigen::Index>(lin) * batch);
  for (int b = 0; b < batch; ++b) {
    for (int lo = 0; lo < lout; ++lo) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * lout + lo;
      for (int kk = 0; kk < l.kernel; ++kk) {
        const int li = lo * l.stride - l.padding + kk;
        if (li >= 0 && li < lin)
          out.col(static_cast<Eigen::Index>(b) * lin + li) +=
              cols.block(static_cast<Eigen::Index>(kk) * cin, col, cin, 1);
      }
    }
  }
}

Eigen::VectorXd ConvSurrogate::core_forward(const Eigen::MatrixXd& x, Workspace& ws) const {
  if (x.cols() != input_length_) throw ShapeMismatchError("ConvSurrogate: input length mismatch");
  const int batch = static_cast<int>(x.rows());
  const int maps = num_maps();
  ws.batch = batch;
  ws.cols.resize(maps);
  ws.act.resize(maps + 1);
  ws.slope.resize(maps);

  Eigen::MatrixXd& a0 = ws.act[0];
  a0.resize(1, static_cast<Eigen::Index>(input_length_) * batch);
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < input_length_; ++t) a0(0, static_cast<Eigen::Index>(b) * input_length_ + t) = x(b, t);

  for (int k = 0; k < maps; ++k) {
    im2col(k, ws.act[k], ws.cols[k], batch);
    Eigen::MatrixXd& z = ws.act[k + 1];
    z.noalias() = weights(k) * ws.cols[k];
    z.colwise() += bias(k);
    if (k + 1 < maps) {
      ws.slope[k].resize(z.rows(), z.cols());
      detail::softplus_inplace(z.data(), ws.slope[k].data(), static_cast<std::size_t>(z.size()), beta_);
    }
  }
  return ws.act[maps].row(0).transpose();
}

void ConvSurrogate::core_backward(const Eigen::VectorXd& d_out, Workspace& ws, Eigen::VectorXd* d_params,
                                  Eigen::MatrixXd* d_input) const {
  const int batch = ws.batch;
  const int maps = num_maps();
  if (d_out.size() != batch) throw ShapeMismatchError("core_backward: gradient/batch size mismatch");
  if (d_params) d_params->setZero(params_.size());

  Eigen::MatrixXd dz = d_out.transpose();
  for (int k = maps - 1; k >= 0; --k) {
    const auto& l = layers_[k];
    if (d_params) {
      const long w_size = static_cast<long>(l.kernel) * l.in_channels * l.out_channels;
      Eigen::Map<Eigen::MatrixXd> gw(d_params->data() + offsets_[k], l.out_channels,
                                     static_cast<Eigen::Index>(l.kernel) * l.in_channels);
      gw.noalias() = dz * ws.cols[k].transpose();
      Eigen::Map<Eigen::VectorXd> gb(d_params->data() + offsets_[k] + w_size, l.out_channels);
      gb = dz.rowwise().sum();
    }
    if (k == 0 && !d_input) break;
    ws.grad_cols.noalias() = weights(k).transpose() * dz;
    col2im(k, ws.grad_cols, ws.grad, batch);
    if (k > 0) {
      dz = ws.grad.cwiseProduct(ws.slope[k - 1]);
    }
  }
  if (d_input) {
    d_input->resize(batch, input_length_);
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < input_length_; ++t)
        (*d_input)(b, t) = ws.grad(0, static_cast<Eigen::Index>(b) * input_length_ + t);
  }
}

double ConvSurrogate::core_loss_and_grad(const Eigen::MatrixXd& x, std::span<const double> y,
                                         Eigen::VectorXd& grad, Workspace& ws) const {
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw ShapeMismatchError("core_loss_and_grad: target count differs from batch");
  if (x.rows() == 0) throw std::invalid_argument("core_loss_and_grad: empty batch");
  const Eigen::VectorXd out = core_forward(x, ws);
  const double inv_b = 1.0 / static_cast<double>(y.size());
  Eigen::VectorXd resid(out.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    resid[i] = out[i] - y[i];
    loss += resid[i] * resid[i];
  }
  core_backward(2.0 * inv_b * resid, ws, &grad, nullptr);
  return loss * inv_b;
}

double ConvSurrogate::forward(const Schedule& q) const {
  Eigen::MatrixXd m(1, q.size());
  for (int t = 0; t < q.size(); ++t) m(0, t) = q[t];
  return forward_batch(m)[0];
}

Eigen::VectorXd ConvSurrogate::forward_batch(const Eigen::MatrixXd& q) const {
  Workspace ws;
  const Eigen::VectorXd core = core_forward(q / normalization.input_scale, ws);
  return (core.array() * normalization.target_std + normalization.target_mean).matrix();
}

std::vector<double> ConvSurrogate::grad_input(const Schedule& q) const {
  Eigen::MatrixXd m(1, q.size());
  for (int t = 0; t < q.size(); ++t) m(0, t) = q[t];
  Workspace ws;
  const Eigen::MatrixXd g = grad_input_batch(m, nullptr, ws);
  return std::vector<double>(g.data(), g.data() + g.size());
}

Eigen::MatrixXd ConvSurrogate::grad_input_batch(const Eigen::MatrixXd& q, Eigen::VectorXd* values,
                                                Workspace& ws) const {
  const Eigen::VectorXd core = core_forward(q / normalization.input_scale, ws);
  if (values) *values = (core.array() * normalization.target_std + normalization.target_mean).matrix();
  Eigen::MatrixXd d_input;
  core_backward(Eigen::VectorXd::Constant(core.size(), normalization.target_std), ws, nullptr, &d_input);
  return d_input / normalization.input_scale;
}

Eigen::MatrixXd ConvSurrogate::map_affine(int map, const Eigen::MatrixXd& input) const {
  const auto& l = layers_[map];
  if (input.rows() != l.in_channels || input.cols() != lengths_[map])
    throw ShapeMismatchError("map_affine: input shape mismatch");
  Eigen::MatrixXd cols;
  im2col(map, input, cols, 1);
  Eigen::MatrixXd z = weights(map) * cols;
  z.colwise() += bias(map);
  return z;
}

Eigen::MatrixXd ConvSurrogate::dense_map_matrix(int map) const {
  const auto& l = layers_[map];
  const int lin = lengths_[map];
  const int lout = lengths_[map + 1];
  const auto w = weights(map);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(lout) * l.out_channels,
                                                static_cast<Eigen::Index>(lin) * l.in_channels);
  for (int lo = 0; lo < lout; ++lo)
    for (int kk = 0; kk < l.kernel; ++kk) {
      const int li = lo * l.stride - l.padding + kk;
      if (li < 0 || li >= lin) continue;
      dense.block(static_cast<Eigen::Index>(lo) * l.out_channels, static_cast<Eigen::Index>(li) * l.in_channels,
                  l.out_channels, l.in_channels) +=
          w.block(0, static_cast<Eigen::Index>(kk) * l.in_channels, l.out_channels, l.in_channels);
    }
  return dense;
}

Eigen::VectorXd ConvSurrogate::dense_map_bias(int map) const {
  return bias(map).replicate(lengths_[map + 1], 1);
}

bool ConvSurrogate::same_architecture(const ConvSurrogate& other) const {
  return layers_ == other.layers_ && input_length_ == other.input_length_ && beta_ == other.beta_;
}

ConvSurrogate build_default_architecture(int horizon, const ArchitectureOptions& options) {
  if (options.hidden_channels.size() != 6)
    throw std::invalid_argument("build_default_architecture: need six hidden channel counts");
  if (horizon < 1) throw ShapeMismatchError("build_default_architecture: horizon must be >= 1");
  const auto& c = options.hidden_channels;
  std::vector<ConvLayerSpec> layers{
      {1, c[0], 1, 1, 0},
      {c[0], c[1], 3, 1, 1},
      {c[1], c[2], 3, 2, 1},
      {c[2], c[3], 3, 2, 1},
      {c[3], c[4], 3, 2, 1},
  };
  int len = horizon;
  for (const auto& l : layers) {
    len = l.output_length(len);
    if (len < 1) throw ShapeMismatchError("build_default_architecture: horizon too short");
  }
  layers.push_back({c[4], c[5], len, 1, 0});
  layers.push_back({c[5], 1, 1, 1, 0});
  return ConvSurrogate(std::move(layers), horizon, options.beta);
}

ParamGradient grad_params(const ConvSurrogate& net, const Eigen::MatrixXd& q, std::span<const double> targets) {
  if (q.rows() == 0) throw std::invalid_argument("grad_params: empty batch");
  const Normalization& n = net.normalization;
  std::vector<double> y(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) y[i] = (targets[i] - n.target_mean) / n.target_std;
  ConvSurrogate::Workspace ws;
  ParamGradient out;
  out.loss = net.core_loss_and_grad(q / n.input_scale, y, out.gradient, ws);
  return out;
}

namespace {

constexpr const char* kModelFormat = "esmeta-convsurrogate";
constexpr int kModelVersion = 1;

}  // namespace

void save_model(const ConvSurrogate& net, const std::string& path) {
  if (!net.params().allFinite()) throw NumericError("save_model: non-finite parameters");
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["input_length"] = net.input_length();
  j["beta"] = net.beta();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers())
    j["layers"].push_back({{"in_channels", l.in_channels},
                           {"out_channels", l.out_channels},
                           {"kernel", l.kernel},
                           {"stride", l.stride},
                           {"padding", l.padding}});
  j["normalization"] = {{"input_scale", net.normalization.input_scale},
                        {"target_mean", net.normalization.target_mean},
                        {"target_std", net.normalization.target_std}};
  j["parameters"] = std::vector<double>(net.params().data(), net.params().data() + net.params().size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("write failed for checkpoint " + path);
}

ConvSurrogate load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFileError(path, 0, e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw MalformedFileError(path, 0, "not a surrogate checkpoint");
    if (j.at("version").get<int>() != kModelVersion)
      throw MalformedFileError(path, 0, "unsupported checkpoint version " + j.at("version").dump());
    std::vector<ConvLayerSpec> layers;
    for (const auto& l : j.at("layers"))
      layers.push_back({l.at("in_channels").get<int>(), l.at("out_channels").get<int>(), l.at("kernel").get<int>(),
                        l.at("stride").get<int>(), l.at("padding").get<int>()});
    ConvSurrogate net(std::move(layers), j.at("input_length").get<int>(), j.at("beta").get<double>());
    const auto& n = j.at("normalization");
    net.normalization = {n.at("input_scale").get<double>(), n.at("target_mean").get<double>(),
                         n.at("target_std").get<double>()};
    const auto params = j.at("parameters").get<std::vector<double>>();
    if (static_cast<long>(params.size()) != net.parameter_count())
      throw ShapeMismatchError("load_model: checkpoint holds " + std::to_string(params.size()) +
                               " parameters, architecture needs " + std::to_string(net.parameter_count()));
    net.params() = Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(path, 0, e.what());
  }
}

ConvSurrogate load_model(const std::string& path, const ConvSurrogate& expected) {
  ConvSurrogate net = load_model(path);
  if (!net.same_architecture(expected)) throw ShapeMismatchError("load_model: checkpoint architecture differs");
  return net;
}

}  // namespace esmeta
