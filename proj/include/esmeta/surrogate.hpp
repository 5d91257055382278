#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esmeta/dataset.hpp"
#include "esmeta/storage.hpp"

namespace esmeta {

// One 1-D convolution map between consecutive layers. Weights are shared
// across output positions and each output channel has one bias.
struct ConvLayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;

  // floor((len + 2 padding - kernel) / stride) + 1, or 0 when the window
  // does not fit.
  int output_length(int input_length) const;
  long parameter_count() const {
    return static_cast<long>(in_channels) * kernel * out_channels + out_channels;
  }
  bool operator==(const ConvLayerSpec&) const = default;
};

// Numerically stable (1/β) ln(1 + e^{βx}).
double softplus(double x, double beta);

// Deep 1-D CNN surrogate of the upper-level profit. The core network maps
// x = q / input_scale to a standardized profit; forward() composes the
// de-standardization so results are in profit units.
//
// Parameter layout (flat vector, layer by layer): the weight block of map k
// stored column-major as a (C_out x S·C_in) matrix whose column index is
// tap·C_in + c_in, followed by C_out biases.
class ConvSurrogate {
 public:
  ConvSurrogate(std::vector<ConvLayerSpec> layers, int input_length, double beta = 50.0);

  const std::vector<ConvLayerSpec>& layers() const { return layers_; }
  int num_maps() const { return static_cast<int>(layers_.size()); }
  int input_length() const { return input_length_; }
  double beta() const { return beta_; }

  // Lengths L_k and channels C_k for every layer, input first, output last.
  const std::vector<int>& lengths() const { return lengths_; }
  std::vector<int> channels() const;
  long neuron_count(int layer) const;
  long parameter_count() const { return static_cast<long>(params_.size()); }
  long map_parameter_count(int map) const { return layers_[map].parameter_count(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::Map<const Eigen::MatrixXd> weights(int map) const;
  Eigen::Map<Eigen::MatrixXd> weights(int map);
  Eigen::Map<const Eigen::VectorXd> bias(int map) const;
  Eigen::Map<Eigen::VectorXd> bias(int map);
  long weight_offset(int map) const { return offsets_[map]; }

  Normalization normalization;

  // Uniform in ±sqrt(1 / (C_in · S)) for weights and biases of each map.
  void init_params(std::uint64_t seed);

  // Scratch buffers for batched passes; one per thread.
  struct Workspace {
    std::vector<Eigen::MatrixXd> cols;  // im2col input of each map
    std::vector<Eigen::MatrixXd> act;   // activations of each layer
    std::vector<Eigen::MatrixXd> slope; // softplus derivative of hidden maps
    Eigen::MatrixXd grad;
    Eigen::MatrixXd grad_cols;
    int batch = 0;
  };

  // Normalized core on B x H normalized inputs.
  Eigen::VectorXd core_forward(const Eigen::MatrixXd& x, Workspace& ws) const;
  // Back-propagates d loss / d core output from the last core_forward call.
  // Either output may be null. d_params is overwritten, d_input is B x H in
  // normalized input units.
  void core_backward(const Eigen::VectorXd& d_out, Workspace& ws, Eigen::VectorXd* d_params,
                     Eigen::MatrixXd* d_input) const;

  // Mean over rows of (core(x) - y)^2 and its parameter gradient.
  double core_loss_and_grad(const Eigen::MatrixXd& x, std::span<const double> y,
                            Eigen::VectorXd& grad, Workspace& ws) const;

  double forward(const Schedule& q) const;
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& q) const;  // rows are schedules
  std::vector<double> grad_input(const Schedule& q) const;
  // d F̂ / d q for each row of q (profit units per p.u.); values receives F̂.
  Eigen::MatrixXd grad_input_batch(const Eigen::MatrixXd& q, Eigen::VectorXd* values,
                                   Workspace& ws) const;

  // Single map applied to one sample laid out as C_in x L_in (no activation).
  Eigen::MatrixXd map_affine(int map, const Eigen::MatrixXd& input) const;
  // The same map unrolled to a dense (L_out·C_out) x (L_in·C_in) matrix with
  // neuron index position·C + channel, and its repeated bias.
  Eigen::MatrixXd dense_map_matrix(int map) const;
  Eigen::VectorXd dense_map_bias(int map) const;

  bool same_architecture(const ConvSurrogate& other) const;

 private:
  void im2col(int map, const Eigen::MatrixXd& in, Eigen::MatrixXd& cols, int batch) const;
  void col2im(int map, const Eigen::MatrixXd& cols, Eigen::MatrixXd& out, int batch) const;

  std::vector<ConvLayerSpec> layers_;
  int input_length_;
  double beta_;
  std::vector<int> lengths_;
  std::vector<long> offsets_;
  Eigen::VectorXd params_;
};

struct ArchitectureOptions {
  // Output channels of the six hidden layers.
  std::vector<int> hidden_channels{32, 32, 64, 64, 128, 128};
  double beta = 50.0;
};

// Input (1 x 24), six Softplus hidden layers, scalar output. Map kernels
// 1,3,3,3,3,3,1; strides 1,1,2,2,2,1,1; paddings 0,1,1,1,1,0,0, giving
// lengths 24,24,24,12,6,3,1,1 for a 24-hour horizon. Other horizons keep the
// strides and paddings; the sixth map's kernel spans whatever length is left
// (3 for 24 hours) so it fires at a single position. Throws
// ShapeMismatchError when a length drops below 1.
ConvSurrogate build_default_architecture(int horizon, const ArchitectureOptions& options = {});

struct ParamGradient {
  double loss = 0.0;  // mean squared error in standardized target units
  Eigen::VectorXd gradient;
};

// Exact gradient of mean((F̂(q) - F)^2) / target_std^2 over the batch.
ParamGradient grad_params(const ConvSurrogate& net, const Eigen::MatrixXd& q,
                          std::span<const double> targets);

void save_model(const ConvSurrogate& net, const std::string& path);
ConvSurrogate load_model(const std::string& path);
// Loads and requires the checkpoint to match `expected`'s architecture.
ConvSurrogate load_model(const std::string& path, const ConvSurrogate& expected);

}  // namespace esmeta
