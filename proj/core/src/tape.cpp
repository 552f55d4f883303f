#include "nimbus/tape.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "nimbus/conv.hpp"

namespace nimbus {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite())
    throw NumericError(std::string("non-finite value produced by op '") + op + "'");
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tape::NodeId Tape::push(Tensor value, const char* op, std::initializer_list<NodeId> inputs,
                        std::function<void(Tape&)> backprop) {
  check_finite(value, op);
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (NodeId i : inputs)
    if (nodes_[static_cast<std::size_t>(i)].requires_grad) n.requires_grad = true;
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
  check_finite(value, "leaf");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  NIMBUS_CHECK(n.requires_grad, "node does not track gradients");
  NIMBUS_CHECK(!n.grad.empty() || n.value.size() == 0, "backward() has not run");
  return n.grad;
}

void Tape::backward(NodeId loss) {
  NIMBUS_CHECK(!consumed_, "tape already consumed by a previous backward()");
  NIMBUS_CHECK(nodes_[static_cast<std::size_t>(loss)].value.size() == 1,
               "backward() requires a scalar loss node");
  consumed_ = true;
  for (Node& n : nodes_)
    if (n.requires_grad) n.grad = Tensor(n.value.shape());
  nodes_[static_cast<std::size_t>(loss)].grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backprop) n.backprop(*this);
  }
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  NIMBUS_CHECK(va.same_shape(vb), "add: shape mismatch");
  Tensor out = va;
  accumulate(out, vb);
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "add", {a, b}, [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.requires_grad(a)) accumulate(t.grad_mut(a), g);
    if (t.requires_grad(b)) accumulate(t.grad_mut(b), g);
  });
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  NIMBUS_CHECK(va.same_shape(vb), "sub: shape mismatch");
  Tensor out = va;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "sub", {a, b}, [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.requires_grad(a)) accumulate(t.grad_mut(a), g);
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  NIMBUS_CHECK(va.same_shape(vb), "mul: shape mismatch");
  Tensor out = va;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "mul", {a, b}, [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Tensor out = value(a);
  out *= c;
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "scale", {a}, [a, c, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += c * g[i];
  });
}

Tape::NodeId Tape::relu(NodeId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "relu", {a}, [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t i = 0; i < ga.size(); ++i)
      if (va[i] > 0.0) ga[i] += g[i];
  });
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "sigmoid", {a}, [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& y = t.value(id);
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Tape::NodeId Tape::tanh_op(NodeId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "tanh", {a}, [a, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& y = t.value(id);
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Tape::NodeId Tape::concat_last(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  NIMBUS_CHECK(va.rank() == vb.rank() && va.rank() >= 1, "concat_last: rank mismatch");
  for (int i = 0; i + 1 < va.rank(); ++i)
    NIMBUS_CHECK(va.dim(i) == vb.dim(i), "concat_last: leading extent mismatch");
  const int ca = va.dim(va.rank() - 1), cb = vb.dim(vb.rank() - 1);
  Shape oshape = va.shape();
  oshape.back() = ca + cb;
  Tensor out(oshape);
  const std::int64_t rows = va.size() / ca;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (int c = 0; c < ca; ++c) out[r * (ca + cb) + c] = va[r * ca + c];
    for (int c = 0; c < cb; ++c) out[r * (ca + cb) + ca + c] = vb[r * cb + c];
  }
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "concat_last", {a, b}, [a, b, ca, cb, rows, id](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_mut(a);
      for (std::int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      for (std::int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
    }
  });
}

Tape::NodeId Tape::slice_last(NodeId a, int begin, int end) {
  const Tensor& va = value(a);
  const int c = va.dim(va.rank() - 1);
  NIMBUS_CHECK(0 <= begin && begin < end && end <= c, "slice_last: bad range");
  Shape oshape = va.shape();
  oshape.back() = end - begin;
  Tensor out(oshape);
  const std::int64_t rows = va.size() / c;
  const int oc = end - begin;
  for (std::int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < oc; ++j) out[r * oc + j] = va[r * c + begin + j];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "slice_last", {a}, [a, begin, c, oc, rows, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t r = 0; r < rows; ++r)
      for (int j = 0; j < oc; ++j) ga[r * c + begin + j] += g[r * oc + j];
  });
}

Tape::NodeId Tape::slice_first(NodeId a, int index) {
  const Tensor& va = value(a);
  NIMBUS_CHECK(va.rank() >= 2, "slice_first: rank must be >= 2");
  NIMBUS_CHECK(0 <= index && index < va.dim(0), "slice_first: index out of range");
  Shape oshape(va.shape().begin() + 1, va.shape().end());
  Tensor out(oshape);
  const std::int64_t n = out.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = va[static_cast<std::int64_t>(index) * n + i];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "slice_first", {a}, [a, index, n, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t i = 0; i < n; ++i) ga[static_cast<std::int64_t>(index) * n + i] += g[i];
  });
}

Tape::NodeId Tape::crop_center(NodeId a, int extent) {
  const Tensor& va = value(a);
  NIMBUS_CHECK(va.rank() == 3, "crop_center: input must be [H,W,C]");
  const int h = va.dim(0), w = va.dim(1), c = va.dim(2);
  NIMBUS_CHECK(extent > 0 && extent <= h && extent <= w, "crop_center: extent too large");
  // centered window; for odd splits the smaller margin goes on the low side
  const int y0 = (h - extent) / 2;
  const int x0 = (w - extent) / 2;
  Tensor out(Shape{extent, extent, c});
  for (int y = 0; y < extent; ++y)
    for (int x = 0; x < extent; ++x)
      for (int ch = 0; ch < c; ++ch) out.at3(y, x, ch) = va.at3(y0 + y, x0 + x, ch);
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "crop_center", {a}, [a, y0, x0, extent, c, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (int y = 0; y < extent; ++y)
      for (int x = 0; x < extent; ++x)
        for (int ch = 0; ch < c; ++ch) ga.at3(y0 + y, x0 + x, ch) += g.at3(y, x, ch);
  });
}

Tape::NodeId Tape::tile4(NodeId a) {
  const Tensor& va = value(a);
  NIMBUS_CHECK(va.rank() == 3, "tile4: input must be [H,W,C]");
  const int h = va.dim(0), w = va.dim(1), c = va.dim(2);
  Tensor out(Shape{4 * h, 4 * w, c});
  for (int y = 0; y < 4 * h; ++y)
    for (int x = 0; x < 4 * w; ++x)
      for (int ch = 0; ch < c; ++ch) out.at3(y, x, ch) = va.at3(y / 4, x / 4, ch);
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "tile4", {a}, [a, h, w, c, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (int y = 0; y < 4 * h; ++y)
      for (int x = 0; x < 4 * w; ++x)
        for (int ch = 0; ch < c; ++ch) ga.at3(y / 4, x / 4, ch) += g.at3(y, x, ch);
  });
}

Tape::NodeId Tape::broadcast_hw(NodeId vec, int h, int w) {
  const Tensor& v = value(vec);
  NIMBUS_CHECK(v.rank() == 1, "broadcast_hw: input must be [C]");
  const int c = v.dim(0);
  Tensor out(Shape{h, w, c});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int j = 0; j < c; ++j) out.at3(y, x, j) = v[j];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "broadcast_hw", {vec}, [vec, h, w, c, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& gv = t.grad_mut(vec);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int j = 0; j < c; ++j) gv[j] += g.at3(y, x, j);
  });
}

Tape::NodeId Tape::sum_all(NodeId a) {
  Tensor out = Tensor::scalar(value(a).sum());
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "sum_all", {a}, [a, id](Tape& t) {
    const double g = t.grad(id)[0];
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Tape::NodeId Tape::weighted_sum(NodeId a, const Tensor& weights) {
  const Tensor& va = value(a);
  NIMBUS_CHECK(va.same_shape(weights), "weighted_sum: shape mismatch");
  double s = 0.0;
  for (std::int64_t i = 0; i < va.size(); ++i) s += va[i] * weights[i];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(Tensor::scalar(s), "weighted_sum", {a}, [a, weights, id](Tape& t) {
    const double g = t.grad(id)[0];
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g * weights[i];
  });
}

Tape::NodeId Tape::sum_last(NodeId a) {
  const Tensor& va = value(a);
  NIMBUS_CHECK(va.rank() >= 1, "sum_last: scalar input");
  const int c = va.dim(va.rank() - 1);
  Shape oshape(va.shape().begin(), va.shape().end() - 1);
  Tensor out(oshape);
  const std::int64_t rows = va.size() / c;
  for (std::int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += va[r * c + j];
    out[r] = s;
  }
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "sum_last", {a}, [a, c, rows, id](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    for (std::int64_t r = 0; r < rows; ++r)
      for (int j = 0; j < c; ++j) ga[r * c + j] += g[r];
  });
}

Tape::NodeId Tape::conv2d(NodeId input, NodeId kernel, int dilation) {
  Tensor out;
  convk::forward(value(input), value(kernel), dilation, &out);
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "conv2d", {input, kernel}, [input, kernel, dilation, id](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.requires_grad(input)) {
      Tensor din;
      convk::backward_input(g, t.value(kernel), dilation, &din);
      accumulate(t.grad_mut(input), din);
    }
    if (t.requires_grad(kernel))
      convk::backward_kernel(t.value(input), g, dilation, &t.grad_mut(kernel));
  });
}

Tape::NodeId Tape::bias_channels(NodeId x, NodeId bias) {
  const Tensor& vx = value(x);
  const Tensor& vb = value(bias);
  const int c = vx.dim(vx.rank() - 1);
  NIMBUS_CHECK(vb.rank() == 1 && vb.dim(0) == c, "bias_channels: channel mismatch");
  Tensor out = vx;
  const std::int64_t rows = vx.size() / c;
  for (std::int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < c; ++j) out[r * c + j] += vb[j];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "bias_channels", {x, bias}, [x, bias, c, rows, id](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.requires_grad(x)) accumulate(t.grad_mut(x), g);
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_mut(bias);
      for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) gb[j] += g[r * c + j];
    }
  });
}

Tape::NodeId Tape::film(NodeId x, NodeId bias, NodeId scl) {
  const Tensor& vx = value(x);
  const Tensor& vb = value(bias);
  const Tensor& vs = value(scl);
  const int c = vx.dim(vx.rank() - 1);
  NIMBUS_CHECK(vb.rank() == 1 && vb.dim(0) == c && vs.rank() == 1 && vs.dim(0) == c,
               "film: channel mismatch");
  Tensor out = vx;
  const std::int64_t rows = vx.size() / c;
  for (std::int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < c; ++j) out[r * c + j] = (out[r * c + j] + vb[j]) * vs[j];
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "film", {x, bias, scl}, [x, bias, scl, c, rows, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& vx = t.value(x);
    const Tensor& vb = t.value(bias);
    const Tensor& vs = t.value(scl);
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad_mut(x);
      for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) gx[r * c + j] += g[r * c + j] * vs[j];
    }
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_mut(bias);
      for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) gb[j] += g[r * c + j] * vs[j];
    }
    if (t.requires_grad(scl)) {
      Tensor& gs = t.grad_mut(scl);
      for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) gs[j] += g[r * c + j] * (vx[r * c + j] + vb[j]);
    }
  });
}

Tape::NodeId Tape::dense(NodeId x, NodeId w, NodeId b) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  NIMBUS_CHECK(vw.rank() == 2, "dense: weights must be [F,G]");
  const int f = vw.dim(0), gdim = vw.dim(1);
  NIMBUS_CHECK(vx.rank() >= 1 && vx.dim(vx.rank() - 1) == f,
               "dense: inner extents disagree: input " + shape_str(vx.shape()) + " weights " +
                   shape_str(vw.shape()));
  NIMBUS_CHECK(vb.rank() == 1 && vb.dim(0) == gdim, "dense: bias extent mismatch");
  Shape oshape = vx.shape();
  oshape.back() = gdim;
  Tensor out(oshape);
  const Eigen::Index n = vx.size() / f;
  {
    MapCM xm(vx.data(), n, f);
    MapCM wm(vw.data(), f, gdim);
    MapM om(out.data(), n, gdim);
    om.noalias() = xm * wm;
    for (Eigen::Index r = 0; r < n; ++r)
      for (int j = 0; j < gdim; ++j) out[r * gdim + j] += vb[j];
  }
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "dense", {x, w, b}, [x, w, b, f, gdim, n, id](Tape& t) {
    const Tensor& g = t.grad(id);
    MapCM gm(g.data(), n, gdim);
    if (t.requires_grad(x)) {
      MapCM wm(t.value(w).data(), f, gdim);
      MapM gx(t.grad_mut(x).data(), n, f);
      gx.noalias() += gm * wm.transpose();
    }
    if (t.requires_grad(w)) {
      MapCM xm(t.value(x).data(), n, f);
      MapM gw(t.grad_mut(w).data(), f, gdim);
      gw.noalias() += xm.transpose() * gm;
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_mut(b);
      for (Eigen::Index r = 0; r < n; ++r)
        for (int j = 0; j < gdim; ++j) gb[j] += g[r * gdim + j];
    }
  });
}

Tape::NodeId Tape::softmax_last(NodeId x) {
  const Tensor& vx = value(x);
  const int c = vx.dim(vx.rank() - 1);
  Tensor out = vx;
  const std::int64_t rows = vx.size() / c;
  for (std::int64_t r = 0; r < rows; ++r) {
    double m = out[r * c];
    for (int j = 1; j < c; ++j) m = std::max(m, out[r * c + j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      out[r * c + j] = std::exp(out[r * c + j] - m);
      z += out[r * c + j];
    }
    for (int j = 0; j < c; ++j) out[r * c + j] /= z;
  }
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(std::move(out), "softmax", {x}, [x, c, rows, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& y = t.value(id);
    Tensor& gx = t.grad_mut(x);
    for (std::int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += g[r * c + j] * y[r * c + j];
      for (int j = 0; j < c; ++j) gx[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
    }
  });
}

Tape::NodeId Tape::cross_entropy_bins(NodeId logits, const std::vector<int>& target_bins,
                                      const Tensor* mask) {
  const Tensor& vl = value(logits);
  const int b = vl.dim(vl.rank() - 1);
  const std::int64_t rows = vl.size() / b;
  NIMBUS_CHECK(static_cast<std::int64_t>(target_bins.size()) == rows,
               "cross_entropy: one target bin per pixel required");
  if (mask != nullptr)
    NIMBUS_CHECK(static_cast<std::int64_t>(mask->size()) == rows,
                 "cross_entropy: mask size mismatch");
  double wsum = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) wsum += mask ? (*mask)[r] : 1.0;
  NIMBUS_CHECK(wsum > 0.0, "cross_entropy: mask selects no pixels");

  // stabilized softmax probabilities, kept for the backward pass
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * b);
  double loss = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    const int tb = target_bins[static_cast<std::size_t>(r)];
    NIMBUS_CHECK(0 <= tb && tb < b,
                 "cross_entropy: target bin " + std::to_string(tb) + " out of range [0," +
                     std::to_string(b) + ")");
    double m = vl[r * b];
    for (int j = 1; j < b; ++j) m = std::max(m, vl[r * b + j]);
    double z = 0.0;
    for (int j = 0; j < b; ++j) {
      const double e = std::exp(vl[r * b + j] - m);
      (*probs)[static_cast<std::size_t>(r * b + j)] = e;
      z += e;
    }
    const double w = mask ? (*mask)[r] : 1.0;
    loss += w * (std::log(z) - (vl[r * b + tb] - m));
    for (int j = 0; j < b; ++j) (*probs)[static_cast<std::size_t>(r * b + j)] /= z;
  }
  loss /= wsum;

  Tensor mask_copy;
  if (mask != nullptr) mask_copy = *mask;
  const bool has_mask = mask != nullptr;
  NodeId id = static_cast<NodeId>(nodes_.size());
  return push(Tensor::scalar(loss), "cross_entropy",
              {logits},
              [logits, target_bins, probs, mask_copy, has_mask, wsum, b, rows, id](Tape& t) {
                const double g = t.grad(id)[0];
                Tensor& gl = t.grad_mut(logits);
                for (std::int64_t r = 0; r < rows; ++r) {
                  const double w = (has_mask ? mask_copy[r] : 1.0) / wsum;
                  if (w == 0.0) continue;
                  const int tb = target_bins[static_cast<std::size_t>(r)];
                  for (int j = 0; j < b; ++j) {
                    double d = (*probs)[static_cast<std::size_t>(r * b + j)];
                    if (j == tb) d -= 1.0;
                    gl[r * b + j] += g * w * d;
                  }
                }
              });
}

}  // namespace nimbus
