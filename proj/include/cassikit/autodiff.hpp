#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cassikit/ops.hpp"
#include "cassikit/tensor.hpp"

namespace cassikit {

/// Ordered list of named tensors. Used both for network parameters and for
/// the gradients returned by TapeT::backward (same names, same order, same
/// shapes).
template <typename T>
struct NamedTensorsT {
  std::vector<std::string> names;
  std::vector<TensorT<T>> tensors;

  std::size_t size() const { return tensors.size(); }

  void add(std::string name, TensorT<T> tensor) {
    names.push_back(std::move(name));
    tensors.push_back(std::move(tensor));
  }

  const TensorT<T>& at(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return tensors[i];
    }
    throw std::out_of_range("no tensor named '" + name + "'");
  }

  TensorT<T>& at(const std::string& name) {
    return const_cast<TensorT<T>&>(std::as_const(*this).at(name));
  }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  template <typename U>
  NamedTensorsT<U> cast() const {
    NamedTensorsT<U> out;
    out.names = names;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
};

using NamedTensors = NamedTensorsT<float>;
template <typename T>
using GradientSetT = NamedTensorsT<T>;
using GradientSet = GradientSetT<float>;

/// Reverse-mode automatic differentiation over a fixed op vocabulary.
///
/// The tape is a static graph: ops are recorded once (each op evaluates
/// immediately, so values and shapes are always materialized), parameter
/// leaves can be re-bound with set_parameter, and refresh() re-evaluates the
/// whole graph in topological (= recording) order. backward() performs one
/// reverse sweep, visiting each node at most once, and returns gradients for
/// every registered parameter; parameters the loss does not reach get zero
/// gradients.
template <typename T>
class TapeT {
 public:
  using NodeId = std::int32_t;

  enum class OpKind {
    constant,
    parameter,
    conv2d,
    upsample2x,
    sigmoid,
    leaky_relu,
    add,
    sub,
    hadamard,
    concat,
    shear_sum,
    abs_sum,
    sum_all,
  };

  NodeId constant(TensorT<T> value) {
    value.require_finite("tape constant");
    Node node;
    node.kind = OpKind::constant;
    node.value = std::move(value);
    node.needs_grad = false;
    return push(std::move(node));
  }

  NodeId parameter(std::string name, TensorT<T> value) {
    value.require_finite("parameter '" + name + "'");
    Node node;
    node.kind = OpKind::parameter;
    node.value = std::move(value);
    node.needs_grad = true;
    node.param_index = static_cast<int>(param_nodes_.size());
    node.name = std::move(name);
    NodeId id = push(std::move(node));
    param_nodes_.push_back(id);
    return id;
  }

  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride) {
    Node node = op_node(OpKind::conv2d, {x, w, b});
    node.attr_int = stride;
    node.value = ops::conv2d(value(x), value(w), value(b), stride);
    return push(std::move(node));
  }

  NodeId upsample2x(NodeId x) {
    Node node = op_node(OpKind::upsample2x, {x});
    node.value = ops::bilinear_upsample2x(value(x));
    return push(std::move(node));
  }

  NodeId sigmoid(NodeId x) {
    Node node = op_node(OpKind::sigmoid, {x});
    node.value = ops::sigmoid(value(x));
    return push(std::move(node));
  }

  NodeId leaky_relu(NodeId x, T slope) {
    Node node = op_node(OpKind::leaky_relu, {x});
    node.attr_scalar = slope;
    node.value = ops::leaky_relu(value(x), slope);
    return push(std::move(node));
  }

  NodeId add(NodeId a, NodeId b) {
    Node node = op_node(OpKind::add, {a, b});
    node.value = ops::add(value(a), value(b));
    return push(std::move(node));
  }

  NodeId sub(NodeId a, NodeId b) {
    Node node = op_node(OpKind::sub, {a, b});
    node.value = ops::sub(value(a), value(b));
    return push(std::move(node));
  }

  NodeId hadamard(NodeId a, NodeId b) {
    Node node = op_node(OpKind::hadamard, {a, b});
    node.value = ops::hadamard(value(a), value(b));
    return push(std::move(node));
  }

  NodeId concat_channels(NodeId a, NodeId b) {
    Node node = op_node(OpKind::concat, {a, b});
    node.value = ops::concat_channels(value(a), value(b));
    return push(std::move(node));
  }

  NodeId shear_sum(NodeId x, int shift) {
    Node node = op_node(OpKind::shear_sum, {x});
    node.attr_int = shift;
    node.value = ops::shear_sum(value(x), shift);
    return push(std::move(node));
  }

  NodeId abs_sum(NodeId x) {
    Node node = op_node(OpKind::abs_sum, {x});
    node.value = TensorT<T>::full(1, 1, 1, ops::abs_sum(value(x)));
    return push(std::move(node));
  }

  NodeId sum_all(NodeId x) {
    Node node = op_node(OpKind::sum_all, {x});
    node.value = TensorT<T>::full(1, 1, 1, ops::sum_all(value(x)));
    return push(std::move(node));
  }

  const TensorT<T>& value(NodeId id) const { return node(id).value; }

  T scalar(NodeId id) const {
    const TensorT<T>& v = value(id);
    if (v.size() != 1) {
      throw std::invalid_argument("node " + std::to_string(id) +
                                  " is not scalar: " + v.shape_string());
    }
    return v.data()[0];
  }

  std::size_t node_count() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return node(id).kind; }

  int input_count(NodeId id) const { return node(id).input_count; }
  NodeId input(NodeId id, int i) const {
    const Node& n = node(id);
    if (i < 0 || i >= n.input_count) {
      throw std::out_of_range("node " + std::to_string(id) +
                              " has no input " + std::to_string(i));
    }
    return n.inputs[i];
  }

  int parameter_count() const { return static_cast<int>(param_nodes_.size()); }

  const std::string& parameter_name(int index) const {
    return node(param_nodes_.at(index)).name;
  }

  const TensorT<T>& parameter_value(int index) const {
    return node(param_nodes_.at(index)).value;
  }

  void set_parameter(int index, const TensorT<T>& value) {
    Node& n = nodes_[param_nodes_.at(index)];
    if (!n.value.same_shape(value)) {
      throw std::invalid_argument("parameter '" + n.name +
                                  "' shape mismatch: " + n.value.shape_string() +
                                  " vs " + value.shape_string());
    }
    value.require_finite("parameter '" + n.name + "'");
    n.value = value;
  }

  /// Re-evaluates every recorded op in topological order using the current
  /// leaf values.
  void refresh() {
    for (Node& n : nodes_) {
      switch (n.kind) {
        case OpKind::constant:
        case OpKind::parameter:
          break;
        case OpKind::conv2d:
          n.value = ops::conv2d(in(n, 0), in(n, 1), in(n, 2), n.attr_int);
          break;
        case OpKind::upsample2x:
          n.value = ops::bilinear_upsample2x(in(n, 0));
          break;
        case OpKind::sigmoid:
          n.value = ops::sigmoid(in(n, 0));
          break;
        case OpKind::leaky_relu:
          n.value = ops::leaky_relu(in(n, 0), n.attr_scalar);
          break;
        case OpKind::add:
          n.value = ops::add(in(n, 0), in(n, 1));
          break;
        case OpKind::sub:
          n.value = ops::sub(in(n, 0), in(n, 1));
          break;
        case OpKind::hadamard:
          n.value = ops::hadamard(in(n, 0), in(n, 1));
          break;
        case OpKind::concat:
          n.value = ops::concat_channels(in(n, 0), in(n, 1));
          break;
        case OpKind::shear_sum:
          n.value = ops::shear_sum(in(n, 0), n.attr_int);
          break;
        case OpKind::abs_sum:
          n.value.data()[0] = ops::abs_sum(in(n, 0));
          break;
        case OpKind::sum_all:
          n.value.data()[0] = ops::sum_all(in(n, 0));
          break;
      }
    }
  }

  /// Reverse sweep from a scalar loss node. Returns one gradient tensor per
  /// registered parameter, in registration order.
  GradientSetT<T> backward(NodeId loss) {
    if (value(loss).size() != 1) {
      throw std::invalid_argument("backward: loss node must be scalar, got " +
                                  value(loss).shape_string());
    }
    std::vector<bool> touched(nodes_.size(), false);
    if (node(loss).needs_grad) {
      for (std::size_t i = 0; i <= static_cast<std::size_t>(loss); ++i) {
        Node& n = nodes_[i];
        if (!n.needs_grad) continue;
        if (!n.grad.same_shape(n.value)) {
          n.grad = TensorT<T>(n.value.channels(), n.value.height(),
                              n.value.width());
        } else {
          n.grad.fill(T(0));
        }
      }
      node(loss).grad.data()[0] = T(1);
      touched[loss] = true;
      for (NodeId id = loss; id >= 0; --id) {
        if (touched[id] && nodes_[id].needs_grad) {
          backprop_node(id, touched);
        }
      }
    }

    GradientSetT<T> grads;
    for (NodeId pid : param_nodes_) {
      const Node& p = node(pid);
      if (touched[pid]) {
        grads.add(p.name, p.grad);
      } else {
        grads.add(p.name, TensorT<T>(p.value.channels(), p.value.height(),
                                     p.value.width()));
      }
    }
    return grads;
  }

 private:
  struct Node {
    OpKind kind = OpKind::constant;
    std::array<NodeId, 3> inputs{-1, -1, -1};
    int input_count = 0;
    int attr_int = 0;
    T attr_scalar = T(0);
    TensorT<T> value;
    TensorT<T> grad;
    bool needs_grad = false;
    int param_index = -1;
    std::string name;
  };

  NodeId push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  Node& node(NodeId id) { return nodes_.at(id); }
  const Node& node(NodeId id) const { return nodes_.at(id); }

  const TensorT<T>& in(const Node& n, int i) const {
    return nodes_[n.inputs[i]].value;
  }

  Node op_node(OpKind kind, std::initializer_list<NodeId> inputs) {
    Node n;
    n.kind = kind;
    for (NodeId id : inputs) {
      if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw std::out_of_range("tape op references unknown node " +
                                std::to_string(id));
      }
      n.inputs[n.input_count++] = id;
      n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
    }
    return n;
  }

  void backprop_node(NodeId id, std::vector<bool>& touched) {
    Node& n = nodes_[id];
    switch (n.kind) {
      case OpKind::constant:
      case OpKind::parameter:
        return;
      case OpKind::conv2d:
        backprop_conv2d(n, touched);
        return;
      case OpKind::upsample2x: {
        if (!mark(n, 0, touched)) return;
        TensorT<T>& gx = grad_of(n, 0);
        const TensorT<T>& g = n.grad;
        const int h = gx.height();
        const int w = gx.width();
        for (int c = 0; c < gx.channels(); ++c) {
          for (int oy = 0; oy < g.height(); ++oy) {
            const ops::BilinearTap ty = ops::bilinear_tap2x(oy, h);
            const T wy1 = static_cast<T>(ty.frac);
            const T wy0 = T(1) - wy1;
            for (int ox = 0; ox < g.width(); ++ox) {
              const ops::BilinearTap tx = ops::bilinear_tap2x(ox, w);
              const T wx1 = static_cast<T>(tx.frac);
              const T wx0 = T(1) - wx1;
              const T gv = g(c, oy, ox);
              gx(c, ty.lo, tx.lo) += wy0 * wx0 * gv;
              gx(c, ty.lo, tx.hi) += wy0 * wx1 * gv;
              gx(c, ty.hi, tx.lo) += wy1 * wx0 * gv;
              gx(c, ty.hi, tx.hi) += wy1 * wx1 * gv;
            }
          }
        }
        return;
      }
      case OpKind::sigmoid: {
        if (!mark(n, 0, touched)) return;
        TensorT<T>& gx = grad_of(n, 0);
        const T* out = n.value.data();
        const T* g = n.grad.data();
        T* gxd = gx.data();
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          gxd[i] += g[i] * out[i] * (T(1) - out[i]);
        }
        return;
      }
      case OpKind::leaky_relu: {
        if (!mark(n, 0, touched)) return;
        TensorT<T>& gx = grad_of(n, 0);
        const T* x = in(n, 0).data();
        const T* g = n.grad.data();
        T* gxd = gx.data();
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          gxd[i] += x[i] > T(0) ? g[i] : n.attr_scalar * g[i];
        }
        return;
      }
      case OpKind::add: {
        for (int i = 0; i < 2; ++i) {
          if (!mark(n, i, touched)) continue;
          TensorT<T>& gi = grad_of(n, i);
          const T* g = n.grad.data();
          T* gd = gi.data();
          for (std::size_t j = 0; j < n.value.size(); ++j) gd[j] += g[j];
        }
        return;
      }
      case OpKind::sub: {
        for (int i = 0; i < 2; ++i) {
          if (!mark(n, i, touched)) continue;
          TensorT<T>& gi = grad_of(n, i);
          const T sign = i == 0 ? T(1) : T(-1);
          const T* g = n.grad.data();
          T* gd = gi.data();
          for (std::size_t j = 0; j < n.value.size(); ++j) gd[j] += sign * g[j];
        }
        return;
      }
      case OpKind::hadamard: {
        for (int i = 0; i < 2; ++i) {
          if (!mark(n, i, touched)) continue;
          TensorT<T>& gi = grad_of(n, i);
          const T* other = in(n, 1 - i).data();
          const T* g = n.grad.data();
          T* gd = gi.data();
          for (std::size_t j = 0; j < n.value.size(); ++j) {
            gd[j] += g[j] * other[j];
          }
        }
        return;
      }
      case OpKind::concat: {
        const std::size_t split = in(n, 0).size();
        if (mark(n, 0, touched)) {
          TensorT<T>& ga = grad_of(n, 0);
          const T* g = n.grad.data();
          for (std::size_t j = 0; j < split; ++j) ga.data()[j] += g[j];
        }
        if (mark(n, 1, touched)) {
          TensorT<T>& gb = grad_of(n, 1);
          const T* g = n.grad.data() + split;
          for (std::size_t j = 0; j < gb.size(); ++j) gb.data()[j] += g[j];
        }
        return;
      }
      case OpKind::shear_sum: {
        if (!mark(n, 0, touched)) return;
        TensorT<T>& gx = grad_of(n, 0);
        const int shift = n.attr_int;
        for (int c = 0; c < gx.channels(); ++c) {
          const int off = c * shift;
          for (int y = 0; y < gx.height(); ++y) {
            const T* g_row = &n.grad(0, y, off);
            T* gx_row = &gx(c, y, 0);
            for (int x = 0; x < gx.width(); ++x) gx_row[x] += g_row[x];
          }
        }
        return;
      }
      case OpKind::abs_sum: {
        if (!mark(n, 0, touched)) return;
        TensorT<T>& gx = grad_of(n, 0);
        const T g = n.grad.data()[0];
        const T* x = in(n, 0).data();
        T* gd = gx.data();
        // Subgradient of |x| at 0 is taken as 0.
        for (std::size_t j = 0; j < gx.size(); ++j) {
          gd[j] += x[j] > T(0) ? g : (x[j] < T(0) ? -g : T(0));
        }
        return;
      }
      case OpKind::sum_all: {
        if (!mark(n, 0, touched)) return;
        TensorT<T>& gx = grad_of(n, 0);
        const T g = n.grad.data()[0];
        T* gd = gx.data();
        for (std::size_t j = 0; j < gx.size(); ++j) gd[j] += g;
        return;
      }
    }
  }

  /// Marks input i of `n` as receiving gradient; false if that input does
  /// not require gradients.
  bool mark(const Node& n, int i, std::vector<bool>& touched) {
    const NodeId id = n.inputs[i];
    if (!nodes_[id].needs_grad) return false;
    touched[id] = true;
    return true;
  }

  TensorT<T>& grad_of(const Node& n, int i) { return nodes_[n.inputs[i]].grad; }

  void backprop_conv2d(Node& n, std::vector<bool>& touched) {
    const TensorT<T>& x = in(n, 0);
    const TensorT<T>& w = in(n, 1);
    const TensorT<T>& g = n.grad;
    const int stride = n.attr_int;
    const int k = w.height();
    const int pad = k / 2;
    const int in_c = x.channels();
    const int out_c = g.channels();
    const int h = x.height();
    const int wd = x.width();
    const int out_h = g.height();
    const int out_w = g.width();

    if (mark(n, 2, touched)) {
      TensorT<T>& gb = grad_of(n, 2);
      for (int oc = 0; oc < out_c; ++oc) {
        double acc = 0.0;
        const T* gp = g.plane(oc).data();
        for (std::size_t j = 0; j < g.plane_size(); ++j) {
          acc += static_cast<double>(gp[j]);
        }
        gb(oc, 0, 0) += static_cast<T>(acc);
      }
    }

    if (mark(n, 1, touched)) {
      TensorT<T>& gw = grad_of(n, 1);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
      for (int oc = 0; oc < out_c; ++oc) {
        for (int ic = 0; ic < in_c; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int oy_lo =
                (pad - ky > 0) ? (pad - ky + stride - 1) / stride : 0;
            const int oy_hi = std::min(out_h, (h - 1 - ky + pad) / stride + 1);
            for (int kx = 0; kx < k; ++kx) {
              const int ox_lo =
                  (pad - kx > 0) ? (pad - kx + stride - 1) / stride : 0;
              const int ox_hi =
                  std::min(out_w, (wd - 1 - kx + pad) / stride + 1);
              const int dx = kx - pad;
              double acc = 0.0;
              for (int oy = oy_lo; oy < oy_hi; ++oy) {
                const int iy = oy * stride + ky - pad;
                const T* g_row = &g(oc, oy, 0);
                const T* x_row = &x(ic, iy, 0);
                if (stride == 1) {
                  acc += dot_lanes(g_row + ox_lo, x_row + dx + ox_lo,
                                   ox_hi - ox_lo);
                } else {
                  for (int ox = ox_lo; ox < ox_hi; ++ox) {
                    acc += static_cast<double>(g_row[ox]) * x_row[2 * ox + dx];
                  }
                }
              }
              gw(oc * in_c + ic, ky, kx) += static_cast<T>(acc);
            }
          }
        }
      }
    }

    if (mark(n, 0, touched)) {
      TensorT<T>& gx = grad_of(n, 0);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
      for (int ic = 0; ic < in_c; ++ic) {
        for (int oc = 0; oc < out_c; ++oc) {
          for (int ky = 0; ky < k; ++ky) {
            const int oy_lo =
                (pad - ky > 0) ? (pad - ky + stride - 1) / stride : 0;
            const int oy_hi = std::min(out_h, (h - 1 - ky + pad) / stride + 1);
            for (int kx = 0; kx < k; ++kx) {
              const T wv = w(oc * in_c + ic, ky, kx);
              const int ox_lo =
                  (pad - kx > 0) ? (pad - kx + stride - 1) / stride : 0;
              const int ox_hi =
                  std::min(out_w, (wd - 1 - kx + pad) / stride + 1);
              const int dx = kx - pad;
              for (int oy = oy_lo; oy < oy_hi; ++oy) {
                const int iy = oy * stride + ky - pad;
                const T* g_row = &g(oc, oy, 0);
                T* gx_row = &gx(ic, iy, 0);
                if (stride == 1) {
                  T* gi = gx_row + dx;
                  for (int ox = ox_lo; ox < ox_hi; ++ox) {
                    gi[ox] += wv * g_row[ox];
                  }
                } else {
                  for (int ox = ox_lo; ox < ox_hi; ++ox) {
                    gx_row[2 * ox + dx] += wv * g_row[ox];
                  }
                }
              }
            }
          }
        }
      }
    }
  }

  /// Dot product with eight independent accumulators combined in a fixed
  /// order; deterministic and auto-vectorizable.
  static double dot_lanes(const T* a, const T* b, int n) {
    T lane[8] = {};
    int i = 0;
    for (; i + 8 <= n; i += 8) {
      for (int l = 0; l < 8; ++l) lane[l] += a[i + l] * b[i + l];
    }
    T tail = T(0);
    for (; i < n; ++i) tail += a[i] * b[i];
    const T low = (lane[0] + lane[1]) + (lane[2] + lane[3]);
    const T high = (lane[4] + lane[5]) + (lane[6] + lane[7]);
    return static_cast<double>((low + high) + tail);
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> param_nodes_;
};

using Tape = TapeT<float>;

}  // namespace cassikit
