#ifndef MIXGAME_TAPE_HPP
#define MIXGAME_TAPE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "mixgame/tensor.hpp"

namespace mixgame {

// Reverse-mode autodiff over a dynamic tape. The tape is rebuilt per forward
// pass; node ids are topological by construction (inputs < own id) and
// gradients accumulate additively across fan-out.
class Tape {
 public:
  using NodeId = int;

  enum class Op {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kMatmul,    // {m,n} x {n,k} or {m,n} x {n}
    kVecMat,    // {m} x {m,n} -> {n}
    kExp,
    kLog,
    kTanh,
    kSigmoid,
    kSoftplus,
    kReluSquared,
    kSquare,
    kSum,
    kMean,
    kConcat,    // vectors end-to-end, or matrices along columns
    kSlice,
    kSoftmaxNormalize,  // max-subtracted softmax over a vector
  };

  NodeId constant(Tensor t) { return push(Op::kLeaf, -1, -1, std::move(t), false); }

  NodeId param(Tensor t) {
    NodeId id = push(Op::kLeaf, -1, -1, std::move(t), true);
    params_.push_back(id);
    return id;
  }

  const std::vector<NodeId>& params() const { return params_; }
  const Tensor& value(NodeId id) const { return nodes_[id].val; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
  size_t num_nodes() const { return nodes_.size(); }

  NodeId add(NodeId a, NodeId b) { return binary_elementwise(Op::kAdd, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary_elementwise(Op::kSub, a, b); }

  NodeId mul(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (!ta.same_shape(tb) && !tb.is_scalar())
      throw TensorError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    if (tb.is_scalar()) {
      double s = tb.at(0);
      for (double& v : out.data) v *= s;
    } else {
      for (long i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
    }
    return push(Op::kMul, a, b, std::move(out), needs(a) || needs(b));
  }

  NodeId scale(NodeId a, double s) { return mul(a, constant(Tensor::scalar(s))); }

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (ta.rank() != 2) throw TensorError("matmul: lhs must be a matrix");
    Tensor out;
    if (tb.rank() == 2) {
      if (ta.shape[1] != tb.shape[0])
        throw TensorError("matmul: inner dims " + ta.shape_str() + " vs " + tb.shape_str());
      out = Tensor::zeros({ta.shape[0], tb.shape[1]});
      emap(out) = cmap(ta) * cmap(tb);
    } else if (tb.rank() == 1) {
      if (ta.shape[1] != tb.shape[0])
        throw TensorError("matmul: inner dims " + ta.shape_str() + " vs " + tb.shape_str());
      out = Tensor::zeros({ta.shape[0]});
      evmap(out) = cmap(ta) * cvmap(tb);
    } else {
      throw TensorError("matmul: rhs rank unsupported");
    }
    return push(Op::kMatmul, a, b, std::move(out), needs(a) || needs(b));
  }

  NodeId vecmat(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (ta.rank() != 1 || tb.rank() != 2 || ta.shape[0] != tb.shape[0])
      throw TensorError("vecmat: shapes " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = Tensor::zeros({tb.shape[1]});
    evmap(out) = cmap(tb).transpose() * cvmap(ta);
    return push(Op::kVecMat, a, b, std::move(out), needs(a) || needs(b));
  }

  NodeId exp_(NodeId a) {
    return unary(Op::kExp, a, [](double x) { return std::exp(x); });
  }
  NodeId log_(NodeId a) {
    const Tensor& ta = nodes_[a].val;
    for (double v : ta.data)
      if (v <= 0.0) throw TensorError("log: non-positive input");
    return unary(Op::kLog, a, [](double x) { return std::log(x); });
  }
  NodeId tanh_(NodeId a) {
    return unary(Op::kTanh, a, [](double x) { return std::tanh(x); });
  }
  NodeId sigmoid(NodeId a) {
    return unary(Op::kSigmoid, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  }
  NodeId softplus(NodeId a) {
    return unary(Op::kSoftplus, a, [](double x) {
      return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    });
  }
  NodeId relu_squared(NodeId a) {
    return unary(Op::kReluSquared, a, [](double x) { return x > 0.0 ? x * x : 0.0; });
  }
  NodeId square(NodeId a) {
    return unary(Op::kSquare, a, [](double x) { return x * x; });
  }

  NodeId sum(NodeId a) {
    double s = 0.0;
    for (double v : nodes_[a].val.data) s += v;
    return push(Op::kSum, a, -1, Tensor::scalar(s), needs(a));
  }
  NodeId mean(NodeId a) {
    double s = 0.0;
    for (double v : nodes_[a].val.data) s += v;
    return push(Op::kMean, a, -1, Tensor::scalar(s / nodes_[a].val.size()), needs(a));
  }

  NodeId concat(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    Tensor out;
    if (ta.rank() == 1 && tb.rank() == 1) {
      out = Tensor::zeros({ta.shape[0] + tb.shape[0]});
      std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
      std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + ta.shape[0]);
    } else if (ta.rank() == 2 && tb.rank() == 2 && ta.shape[0] == tb.shape[0]) {
      out = Tensor::zeros({ta.shape[0], ta.shape[1] + tb.shape[1]});
      for (int r = 0; r < ta.shape[0]; ++r) {
        for (int c = 0; c < ta.shape[1]; ++c) out.at(r, c) = ta.at(r, c);
        for (int c = 0; c < tb.shape[1]; ++c) out.at(r, ta.shape[1] + c) = tb.at(r, c);
      }
    } else {
      throw TensorError("concat: shapes " + ta.shape_str() + " vs " + tb.shape_str());
    }
    return push(Op::kConcat, a, b, std::move(out), needs(a) || needs(b));
  }

  // 1-D: flat slice [offset, offset+len). 2-D: column slice.
  NodeId slice(NodeId a, int offset, int len) {
    const Tensor& ta = nodes_[a].val;
    Tensor out;
    if (ta.rank() == 1) {
      if (offset < 0 || offset + len > ta.shape[0]) throw TensorError("slice: out of range");
      out = Tensor::zeros({len});
      std::copy(ta.data.begin() + offset, ta.data.begin() + offset + len, out.data.begin());
    } else if (ta.rank() == 2) {
      if (offset < 0 || offset + len > ta.shape[1]) throw TensorError("slice: out of range");
      out = Tensor::zeros({ta.shape[0], len});
      for (int r = 0; r < ta.shape[0]; ++r)
        for (int c = 0; c < len; ++c) out.at(r, c) = ta.at(r, offset + c);
    } else {
      throw TensorError("slice: rank unsupported");
    }
    NodeId id = push(Op::kSlice, a, -1, std::move(out), needs(a));
    nodes_[id].i0 = offset;
    nodes_[id].i1 = len;
    return id;
  }

  NodeId softmax_normalize(NodeId a) {
    const Tensor& ta = nodes_[a].val;
    if (ta.rank() != 1) throw TensorError("softmax-normalize: expects a vector");
    double mx = *std::max_element(ta.data.begin(), ta.data.end());
    Tensor out = Tensor::zeros(ta.shape);
    double z = 0.0;
    for (long i = 0; i < ta.size(); ++i) {
      out.data[i] = std::exp(ta.data[i] - mx);
      z += out.data[i];
    }
    for (double& v : out.data) v /= z;
    return push(Op::kSoftmaxNormalize, a, -1, std::move(out), needs(a));
  }

  // Convenience: reshape is free for row-major contiguous tensors.
  NodeId reshape(NodeId a, std::vector<int> new_shape) {
    const Tensor& ta = nodes_[a].val;
    if (Tensor::numel(new_shape) != ta.size()) throw TensorError("reshape: size mismatch");
    Tensor out(std::move(new_shape), ta.data);
    NodeId id = push(Op::kSlice, a, -1, std::move(out), needs(a));
    nodes_[id].i0 = 0;
    nodes_[id].i1 = -1;  // marks full-copy reshape
    return id;
  }

  // Accumulates d(loss)/d(node) for every node that requires grad.
  void backward(NodeId loss) {
    if (!nodes_[loss].val.is_scalar()) throw TensorError("backward: loss must be scalar");
    for (auto& n : nodes_) {
      if (n.requires_grad)
        n.grad = Tensor::zeros(n.val.shape);
      else
        n.grad = Tensor();
    }
    if (!nodes_[loss].requires_grad) return;
    nodes_[loss].grad.data[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.op == Op::kLeaf) continue;
      if (n.grad.data.empty()) continue;
      backprop_node(id);
    }
  }

 private:
  struct Node {
    Op op;
    NodeId a, b;
    Tensor val;
    Tensor grad;
    bool requires_grad;
    int i0 = 0, i1 = 0;  // slice attrs
  };

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;

  bool needs(NodeId id) const { return nodes_[id].requires_grad; }

  NodeId push(Op op, NodeId a, NodeId b, Tensor val, bool requires_grad) {
    if (!val.all_finite()) throw TensorError("non-finite value produced by op");
    nodes_.push_back(Node{op, a, b, std::move(val), Tensor(), requires_grad});
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId binary_elementwise(Op op, NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    double sign = (op == Op::kSub) ? -1.0 : 1.0;
    Tensor out = ta;
    if (ta.same_shape(tb)) {
      for (long i = 0; i < out.size(); ++i) out.data[i] += sign * tb.data[i];
    } else if (tb.is_scalar()) {
      for (double& v : out.data) v += sign * tb.at(0);
    } else if (ta.rank() == 2 && tb.rank() == 1 && ta.shape[1] == tb.shape[0]) {
      // row broadcast, e.g. bias over a batch
      for (int r = 0; r < ta.shape[0]; ++r)
        for (int c = 0; c < ta.shape[1]; ++c) out.at(r, c) += sign * tb.at(c);
    } else {
      throw TensorError("add/sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    return push(op, a, b, std::move(out), needs(a) || needs(b));
  }

  template <typename F>
  NodeId unary(Op op, NodeId a, F&& f) {
    Tensor out = nodes_[a].val;
    for (double& v : out.data) v = f(v);
    return push(op, a, -1, std::move(out), needs(a));
  }

  static Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  cmap(const Tensor& t) {
    return {t.data.data(), t.shape[0], t.shape[1]};
  }
  static Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  emap(Tensor& t) {
    return {t.data.data(), t.shape[0], t.shape[1]};
  }
  static Eigen::Map<const Eigen::VectorXd> cvmap(const Tensor& t) {
    return {t.data.data(), static_cast<long>(t.data.size())};
  }
  static Eigen::Map<Eigen::VectorXd> evmap(Tensor& t) {
    return {t.data.data(), static_cast<long>(t.data.size())};
  }

  void acc(NodeId id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    for (long i = 0; i < g.size(); ++i) n.grad.data[i] += g.data[i];
  }

  void backprop_node(NodeId id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    const Tensor& out = n.val;
    switch (n.op) {
      case Op::kAdd:
      case Op::kSub: {
        double sign = (n.op == Op::kSub) ? -1.0 : 1.0;
        acc(n.a, g);
        Node& nb = nodes_[n.b];
        if (!nb.requires_grad) break;
        const Tensor& tb = nb.val;
        if (nodes_[n.a].val.same_shape(tb)) {
          for (long i = 0; i < g.size(); ++i) nb.grad.data[i] += sign * g.data[i];
        } else if (tb.is_scalar()) {
          double s = 0.0;
          for (double v : g.data) s += v;
          nb.grad.data[0] += sign * s;
        } else {  // row broadcast
          int rows = out.shape[0], cols = out.shape[1];
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) nb.grad.data[c] += sign * g.at(r, c);
        }
        break;
      }
      case Op::kMul: {
        const Tensor& ta = nodes_[n.a].val;
        const Tensor& tb = nodes_[n.b].val;
        if (tb.is_scalar()) {
          if (nodes_[n.a].requires_grad) {
            double s = tb.at(0);
            for (long i = 0; i < g.size(); ++i) nodes_[n.a].grad.data[i] += s * g.data[i];
          }
          if (nodes_[n.b].requires_grad) {
            double s = 0.0;
            for (long i = 0; i < g.size(); ++i) s += g.data[i] * ta.data[i];
            nodes_[n.b].grad.data[0] += s;
          }
        } else {
          if (nodes_[n.a].requires_grad)
            for (long i = 0; i < g.size(); ++i) nodes_[n.a].grad.data[i] += g.data[i] * tb.data[i];
          if (nodes_[n.b].requires_grad)
            for (long i = 0; i < g.size(); ++i) nodes_[n.b].grad.data[i] += g.data[i] * ta.data[i];
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& ta = nodes_[n.a].val;
        const Tensor& tb = nodes_[n.b].val;
        if (tb.rank() == 2) {
          if (nodes_[n.a].requires_grad)
            emap(nodes_[n.a].grad) += cmap(g) * cmap(tb).transpose();
          if (nodes_[n.b].requires_grad)
            emap(nodes_[n.b].grad) += cmap(ta).transpose() * cmap(g);
        } else {
          if (nodes_[n.a].requires_grad)
            emap(nodes_[n.a].grad) += cvmap(g) * cvmap(tb).transpose();
          if (nodes_[n.b].requires_grad)
            evmap(nodes_[n.b].grad) += cmap(ta).transpose() * cvmap(g);
        }
        break;
      }
      case Op::kVecMat: {
        const Tensor& ta = nodes_[n.a].val;
        const Tensor& tb = nodes_[n.b].val;
        if (nodes_[n.a].requires_grad)
          evmap(nodes_[n.a].grad) += cmap(tb) * cvmap(g);
        if (nodes_[n.b].requires_grad)
          emap(nodes_[n.b].grad) += cvmap(ta) * cvmap(g).transpose();
        break;
      }
      case Op::kExp:
        for (long i = 0; i < g.size(); ++i)
          nodes_[n.a].grad.data[i] += g.data[i] * out.data[i];
        break;
      case Op::kLog:
        for (long i = 0; i < g.size(); ++i)
          nodes_[n.a].grad.data[i] += g.data[i] / nodes_[n.a].val.data[i];
        break;
      case Op::kTanh:
        for (long i = 0; i < g.size(); ++i)
          nodes_[n.a].grad.data[i] += g.data[i] * (1.0 - out.data[i] * out.data[i]);
        break;
      case Op::kSigmoid:
        for (long i = 0; i < g.size(); ++i)
          nodes_[n.a].grad.data[i] += g.data[i] * out.data[i] * (1.0 - out.data[i]);
        break;
      case Op::kSoftplus:
        for (long i = 0; i < g.size(); ++i) {
          double x = nodes_[n.a].val.data[i];
          nodes_[n.a].grad.data[i] += g.data[i] / (1.0 + std::exp(-x));
        }
        break;
      case Op::kReluSquared:
        for (long i = 0; i < g.size(); ++i) {
          double x = nodes_[n.a].val.data[i];
          if (x > 0.0) nodes_[n.a].grad.data[i] += g.data[i] * 2.0 * x;
        }
        break;
      case Op::kSquare:
        for (long i = 0; i < g.size(); ++i)
          nodes_[n.a].grad.data[i] += g.data[i] * 2.0 * nodes_[n.a].val.data[i];
        break;
      case Op::kSum:
        for (long i = 0; i < nodes_[n.a].grad.size(); ++i)
          nodes_[n.a].grad.data[i] += g.data[0];
        break;
      case Op::kMean: {
        double s = g.data[0] / nodes_[n.a].val.size();
        for (long i = 0; i < nodes_[n.a].grad.size(); ++i) nodes_[n.a].grad.data[i] += s;
        break;
      }
      case Op::kConcat: {
        const Tensor& ta = nodes_[n.a].val;
        const Tensor& tb = nodes_[n.b].val;
        if (ta.rank() == 1) {
          if (nodes_[n.a].requires_grad)
            for (int i = 0; i < ta.shape[0]; ++i) nodes_[n.a].grad.data[i] += g.data[i];
          if (nodes_[n.b].requires_grad)
            for (int i = 0; i < tb.shape[0]; ++i)
              nodes_[n.b].grad.data[i] += g.data[ta.shape[0] + i];
        } else {
          for (int r = 0; r < ta.shape[0]; ++r) {
            if (nodes_[n.a].requires_grad)
              for (int c = 0; c < ta.shape[1]; ++c)
                nodes_[n.a].grad.at(r, c) += g.at(r, c);
            if (nodes_[n.b].requires_grad)
              for (int c = 0; c < tb.shape[1]; ++c)
                nodes_[n.b].grad.at(r, c) += g.at(r, ta.shape[1] + c);
          }
        }
        break;
      }
      case Op::kSlice: {
        Node& na = nodes_[n.a];
        if (!na.requires_grad) break;
        if (n.i1 == -1) {  // reshape
          for (long i = 0; i < g.size(); ++i) na.grad.data[i] += g.data[i];
        } else if (na.val.rank() == 1) {
          for (int i = 0; i < n.i1; ++i) na.grad.data[n.i0 + i] += g.data[i];
        } else {
          for (int r = 0; r < na.val.shape[0]; ++r)
            for (int c = 0; c < n.i1; ++c) na.grad.at(r, n.i0 + c) += g.at(r, c);
        }
        break;
      }
      case Op::kSoftmaxNormalize: {
        double dot = 0.0;
        for (long i = 0; i < g.size(); ++i) dot += g.data[i] * out.data[i];
        for (long i = 0; i < g.size(); ++i)
          nodes_[n.a].grad.data[i] += out.data[i] * (g.data[i] - dot);
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
};

}  // namespace mixgame

#endif  // MIXGAME_TAPE_HPP
