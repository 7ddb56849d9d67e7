#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pgff/core/regressor.hpp"
#include "pgff/error.hpp"

namespace pgff {

struct DenseLayer {
  Eigen::MatrixXd weights;  ///< rows = outputs, cols = inputs
  Eigen::VectorXd bias;
};

/**
 * @brief Multilayer perceptron with tanh hidden layers and a linear scalar output.
 *
 * The network reads the regressor entries listed in `inputs` (the input mask).
 * Entries 1 .. difference_block-1 are first replaced by backward differences
 * phi[i-1] - phi[i], a fixed invertible conditioning of the output lags that
 * exposes velocity-like coordinates; then every coordinate is mapped
 * affinely to [-1, 1] with `center` and `half_range`. Entries that are not
 * listed have no influence on the output.
 * Parameters are ordered layer by layer, each layer as its weights in
 * row-major order followed by its bias, so the output bias comes last.
 */
struct MlpNetwork {
  std::vector<std::size_t> inputs;
  Eigen::VectorXd center;
  Eigen::VectorXd half_range;
  std::vector<DenseLayer> layers;
  std::size_t difference_block = 0;

  std::size_t regressor_size() const { return static_cast<std::size_t>(center.size()); }
  std::size_t hidden_layer_count() const { return layers.empty() ? 0 : layers.size() - 1; }

  bool uses(std::size_t entry) const {
    for (auto i : inputs) {
      if (i == entry) return true;
    }
    return false;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  void validate() const {
    if (layers.size() < 2) throw ContractError("network needs at least one hidden layer");
    if (half_range.size() != center.size()) {
      throw ContractError("normalization vectors differ in length");
    }
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (inputs[k] >= regressor_size()) throw ContractError("input mask entry out of range");
      if (k > 0 && inputs[k] <= inputs[k - 1]) {
        throw ContractError("input mask must be strictly ascending");
      }
    }
    for (Eigen::Index i = 0; i < half_range.size(); ++i) {
      if (!(half_range[i] > 0.0)) throw ContractError("normalization half range must be positive");
    }
    if (difference_block > regressor_size()) throw ContractError("difference block exceeds the regressor");
    for (std::size_t i = 0; i < difference_block; ++i) {
      if (!uses(i)) throw ContractError("differenced regressor entries must all be network inputs");
    }
    auto width = static_cast<Eigen::Index>(inputs.size());
    for (const auto& l : layers) {
      if (l.weights.cols() != width || l.bias.size() != l.weights.rows()) {
        throw ContractError("network layer dimensions do not chain");
      }
      width = l.weights.rows();
    }
    if (width != 1) throw ContractError("network output must be scalar");
  }
};

/// Mask listing every regressor entry.
inline std::vector<std::size_t> full_input_mask(const ModelOrders& orders) {
  std::vector<std::size_t> m(orders.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = i;
  return m;
}

/// Mask without the most recent input u(t-nk-1), making the model affine in it.
inline std::vector<std::size_t> input_excluded_mask(const ModelOrders& orders) {
  std::vector<std::size_t> m;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (i != orders.input_slot()) m.push_back(i);
  }
  return m;
}

/// All-zero network with the given hidden widths and identity normalization.
inline MlpNetwork make_network(std::size_t regressor_size, std::vector<std::size_t> inputs,
                               const std::vector<int>& hidden) {
  MlpNetwork net;
  net.inputs = std::move(inputs);
  net.center = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(regressor_size));
  net.half_range = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(regressor_size));
  auto width = static_cast<Eigen::Index>(net.inputs.size());
  for (int h : hidden) {
    if (h < 1) throw ContractError("hidden layer width must be positive");
    net.layers.push_back({Eigen::MatrixXd::Zero(h, width), Eigen::VectorXd::Zero(h)});
    width = h;
  }
  net.layers.push_back({Eigen::MatrixXd::Zero(1, width), Eigen::VectorXd::Zero(1)});
  net.validate();
  return net;
}

namespace detail {
/// Conditioned coordinates (differenced output block), one regressor per column.
inline Eigen::MatrixXd conditioned(const MlpNetwork& net, const Eigen::Ref<const Eigen::MatrixXd>& phi) {
  Eigen::MatrixXd c = phi;
  for (std::size_t i = 1; i < net.difference_block; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    c.row(r) = phi.row(r - 1) - phi.row(r);
  }
  return c;
}

inline double conditioned_entry(const MlpNetwork& net, const Regressor& phi, std::size_t i) {
  const auto r = static_cast<Eigen::Index>(i);
  return i >= 1 && i < net.difference_block ? phi[r - 1] - phi[r] : phi[r];
}
}  // namespace detail

/// Sets the normalization from the range of each conditioned coordinate over the columns of `regressors`.
inline void fit_normalization(MlpNetwork& net, const Eigen::MatrixXd& regressors) {
  if (static_cast<std::size_t>(regressors.rows()) != net.regressor_size()) {
    throw ContractError("regressor matrix height does not match the network");
  }
  if (regressors.cols() == 0) return;
  const Eigen::MatrixXd c = detail::conditioned(net, regressors);
  const Eigen::VectorXd lo = c.rowwise().minCoeff();
  const Eigen::VectorXd hi = c.rowwise().maxCoeff();
  net.center = 0.5 * (hi + lo);
  net.half_range = 0.5 * (hi - lo);
  for (Eigen::Index i = 0; i < net.half_range.size(); ++i) {
    if (!(net.half_range[i] > 0.0)) net.half_range[i] = 1.0;
  }
}

inline Eigen::VectorXd normalized_input(const MlpNetwork& net, const Regressor& phi) {
  if (static_cast<std::size_t>(phi.size()) != net.regressor_size()) {
    throw ContractError("regressor length does not match the network");
  }
  Eigen::VectorXd z(static_cast<Eigen::Index>(net.inputs.size()));
  for (std::size_t k = 0; k < net.inputs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(net.inputs[k]);
    z[static_cast<Eigen::Index>(k)] = (detail::conditioned_entry(net, phi, net.inputs[k]) - net.center[i]) / net.half_range[i];
  }
  return z;
}

inline double nn_forward(const MlpNetwork& net, const Regressor& phi) {
  Eigen::VectorXd x = normalized_input(net, phi);
  const std::size_t hidden = net.hidden_layer_count();
  for (std::size_t i = 0; i < hidden; ++i) {
    x = (net.layers[i].weights * x + net.layers[i].bias).array().tanh().matrix();
  }
  const auto& out = net.layers.back();
  return out.weights.row(0).dot(x) + out.bias[0];
}

namespace detail {
// Hidden activations x_0 (normalized input) .. x_l.
inline std::vector<Eigen::VectorXd> forward_trace(const MlpNetwork& net, const Regressor& phi) {
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(net.layers.size());
  xs.push_back(normalized_input(net, phi));
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
    xs.push_back((net.layers[i].weights * xs.back() + net.layers[i].bias).array().tanh().matrix());
  }
  return xs;
}
}  // namespace detail

/**
 * @brief Gradient of the network output with respect to every regressor entry.
 *
 * Backpropagates W_{l+1} beta_l ... W_1 through the normalization and the
 * differencing; masked-out entries get exactly zero.
 */
inline Eigen::VectorXd nn_input_gradient(const MlpNetwork& net, const Regressor& phi) {
  const auto xs = detail::forward_trace(net, phi);
  Eigen::RowVectorXd g = net.layers.back().weights;
  for (std::size_t i = net.layers.size() - 1; i-- > 0;) {
    const Eigen::ArrayXd beta = 1.0 - xs[i + 1].array().square();
    g = (g.array() * beta.transpose()).matrix() * net.layers[i].weights;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.regressor_size()));
  for (std::size_t k = 0; k < net.inputs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(net.inputs[k]);
    const double gz = g[static_cast<Eigen::Index>(k)] / net.half_range[i];
    if (net.inputs[k] >= 1 && net.inputs[k] < net.difference_block) {
      out[i - 1] += gz;
      out[i] -= gz;
    } else {
      out[i] += gz;
    }
  }
  return out;
}

inline double nn_input_gradient(const MlpNetwork& net, const Regressor& phi, std::size_t entry) {
  if (entry >= net.regressor_size()) throw ContractError("gradient entry out of range");
  if (!net.uses(entry)) return 0.0;
  return nn_input_gradient(net, phi)[static_cast<Eigen::Index>(entry)];
}

/// Gradient of the network output with respect to its parameters, in parameter order.
inline void nn_param_gradient(const MlpNetwork& net, const Regressor& phi,
                              Eigen::Ref<Eigen::VectorXd> out) {
  if (static_cast<std::size_t>(out.size()) != net.parameter_count()) {
    throw ContractError("parameter gradient buffer has the wrong size");
  }
  const auto xs = detail::forward_trace(net, phi);
  std::vector<Eigen::Index> offset(net.layers.size());
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    offset[i] = pos;
    pos += net.layers[i].weights.size() + net.layers[i].bias.size();
  }
  Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& layer = net.layers[i];
    const Eigen::VectorXd& x = xs[i];
    const Eigen::Index rows = layer.weights.rows();
    const Eigen::Index cols = layer.weights.cols();
    for (Eigen::Index r = 0; r < rows; ++r) {
      out.segment(offset[i] + r * cols, cols) = delta[r] * x;
    }
    out.segment(offset[i] + rows * cols, rows) = delta;
    if (i > 0) {
      delta = ((layer.weights.transpose() * delta).array() * (1.0 - x.array().square())).matrix();
    }
  }
}

inline Eigen::VectorXd network_parameters(const MlpNetwork& net) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index pos = 0;
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) theta[pos++] = l.weights(r, c);
    }
    theta.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return theta;
}

inline void set_network_parameters(MlpNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (static_cast<std::size_t>(theta.size()) != net.parameter_count()) {
    throw ContractError("parameter vector has the wrong size for this network");
  }
  Eigen::Index pos = 0;
  for (auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = theta[pos++];
    }
    l.bias = theta.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
}

/**
 * @brief Batched output and parameter Jacobian for training.
 *
 * `phi` holds one regressor per column. On return `out` holds the network
 * output per column and, when `jac_t` is non-null, rows
 * [row0, row0 + parameter_count()) of `*jac_t` hold the parameter gradients
 * (one column per sample).
 */
inline void nn_batch(const MlpNetwork& net, const Eigen::Ref<const Eigen::MatrixXd>& phi,
                     Eigen::Ref<Eigen::RowVectorXd> out, Eigen::MatrixXd* jac_t = nullptr,
                     Eigen::Index row0 = 0) {
  const Eigen::Index batch = phi.cols();
  std::vector<Eigen::MatrixXd> xs;
  xs.reserve(net.layers.size());
  Eigen::MatrixXd z(static_cast<Eigen::Index>(net.inputs.size()), batch);
  for (std::size_t k = 0; k < net.inputs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(net.inputs[k]);
    if (net.inputs[k] >= 1 && net.inputs[k] < net.difference_block) {
      z.row(static_cast<Eigen::Index>(k)) =
          ((phi.row(i - 1) - phi.row(i)).array() - net.center[i]) / net.half_range[i];
    } else {
      z.row(static_cast<Eigen::Index>(k)) = (phi.row(i).array() - net.center[i]) / net.half_range[i];
    }
  }
  xs.push_back(std::move(z));
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
    Eigen::MatrixXd a = net.layers[i].weights * xs.back();
    a.colwise() += net.layers[i].bias;
    xs.push_back(a.array().tanh().matrix());
  }
  const auto& last = net.layers.back();
  out = last.weights * xs.back();
  out.array() += last.bias[0];
  if (jac_t == nullptr) return;

  std::vector<Eigen::Index> offset(net.layers.size());
  Eigen::Index pos = row0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    offset[i] = pos;
    pos += net.layers[i].weights.size() + net.layers[i].bias.size();
  }
  Eigen::MatrixXd delta = Eigen::MatrixXd::Ones(1, batch);
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& layer = net.layers[i];
    const Eigen::MatrixXd& x = xs[i];
    const Eigen::Index rows = layer.weights.rows();
    const Eigen::Index cols = layer.weights.cols();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        jac_t->row(offset[i] + r * cols + c) = delta.row(r).cwiseProduct(x.row(c));
      }
      jac_t->row(offset[i] + rows * cols + r) = delta.row(r);
    }
    if (i > 0) {
      delta = ((layer.weights.transpose() * delta).array() * (1.0 - x.array().square())).matrix();
    }
  }
}

}  // namespace pgff
