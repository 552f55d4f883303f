#pragma once

#include <functional>
#include <vector>

#include "nimbus/tensor.hpp"

namespace nimbus {

/// Reverse-mode differentiation over a linear record of executed ops.
///
/// Every op runs eagerly, stores its output on the tape and registers a
/// closure that routes the output gradient to its inputs. Nodes are created
/// in topological order by construction, so the backward pass is a single
/// reverse sweep. One tape serves one forward/backward pair.
///
/// Any non-finite op output raises NumericError naming the op; silent NaN
/// propagation is treated as a bug, not a value.
class Tape {
 public:
  using NodeId = int;

  NodeId leaf(Tensor value, bool requires_grad = true);

  // elementwise (same shape unless noted)
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId tanh_op(NodeId a);

  // shape plumbing
  NodeId concat_last(NodeId a, NodeId b);
  NodeId slice_last(NodeId a, int begin, int end);
  NodeId slice_first(NodeId a, int index);      // [T,..] -> [..]
  NodeId crop_center(NodeId a, int extent);     // [H,W,C] -> [e,e,C]
  NodeId tile4(NodeId a);                       // [H,W,C] -> [4H,4W,C] nearest
  NodeId broadcast_hw(NodeId vec, int h, int w);  // [C] -> [H,W,C]

  // reductions
  NodeId sum_all(NodeId a);                                  // -> scalar
  NodeId weighted_sum(NodeId a, const Tensor& weights);     // -> scalar, weights constant
  NodeId sum_last(NodeId a);                                 // [..,C] -> [..]

  // NN layers
  NodeId conv2d(NodeId input, NodeId kernel, int dilation);  // [H,W,Ci],[k,k,Ci,Co]
  NodeId bias_channels(NodeId x, NodeId bias);               // [H,W,C] + [C]
  NodeId film(NodeId x, NodeId bias, NodeId scale);          // (x + b[c]) * s[c]
  NodeId dense(NodeId x, NodeId w, NodeId b);                // [..,F],[F,G],[G]
  NodeId softmax_last(NodeId x);
  // masked mean of -log softmax(logits)[target]; mask may be null (all ones)
  NodeId cross_entropy_bins(NodeId logits, const std::vector<int>& target_bins,
                            const Tensor* mask);

  /// Reverse accumulation from a scalar loss node. Single use per tape.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;  // null for leaves
    const char* op = "leaf";
  };

  NodeId push(Tensor value, const char* op, std::initializer_list<NodeId> inputs,
              std::function<void(Tape&)> backprop);
  Tensor& grad_mut(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace nimbus
