#pragma once

#include <deque>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hit/einsum.hpp"
#include "hit/tensor.hpp"

namespace hit {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; the tape owns all storage.
struct Var {
  Tape* tape = nullptr;
  int32_t id = -1;

  bool defined() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const;
  int64_t size() const;
};

enum class Op : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,      // c * x
  AddScalar,  // x + c
  Exp,
  Log,
  Sqrt,
  Sigmoid,
  Softplus,
  Relu,
  ReluMask,  // 1 where x > 0 else 0; derivative defined as 0 everywhere
  SumAxes,
  BroadcastTo,
  Reshape,
  Contract,
  Softmax,
  IndexMap,      // out[i] = x[map[i]]
  IndexScatter,  // out[map[i]] += x[i]
  Concat2,
};

const char* op_name(Op op);
Op op_from_name(std::string_view name);

struct ContractStrings {
  std::string a, b, out;
  std::map<char, int64_t> extra;  // extents for output labels absent from inputs
};

struct NodeAttr {
  double c = 0.0;
  int axis = -1;
  uint32_t axes_mask = 0;
  bool keepdims = true;
  Shape shape;  // output shape for Reshape/BroadcastTo/IndexMap/IndexScatter
  std::shared_ptr<const std::vector<int64_t>> map;
  std::shared_ptr<const ContractStrings> cs;
};

struct Node {
  Op op = Op::Leaf;
  int32_t a = -1, b = -1;
  bool requires_grad = false;
  NodeAttr attr;
  Tensor value;
};

/// Ordered record of a computation. Operations evaluate eagerly as nodes are
/// appended; operands always precede their consumers, so replaying nodes in
/// order reproduces every stored value. Gradients are emitted as ordinary
/// nodes, which is what makes differentiating through a gradient possible.
/// Single-writer: do not append from multiple threads.
class Tape {
 public:
  Var leaf(Tensor v, bool requires_grad);
  Var constant(Tensor v) { return leaf(std::move(v), false); }
  Var param(Tensor v) { return leaf(std::move(v), true); }

  const Node& node(int32_t id) const { return nodes_[static_cast<size_t>(id)]; }
  int32_t size() const { return static_cast<int32_t>(nodes_.size()); }

  Var emit(Op op, int32_t a, int32_t b, NodeAttr attr);

  /// All tracked-parameter leaves, in creation order.
  std::vector<Var> params();

  /// Recomputes every non-leaf node from its stored operands and compares
  /// bitwise. Returns -1 when the whole tape reproduces, else the first
  /// mismatching node id.
  int32_t replay_check() const;

  void add_logit_entries(int64_t n) { logit_entries_ += n; }
  int64_t logit_entries() const { return logit_entries_; }

  /// Test hook: scales every gradient contribution emitted for `op`.
  /// Used by the verify suite's mutation fixture; 1.0 disables.
  void set_vjp_fault(Op op, double s) {
    fault_op_ = op;
    fault_scale_ = s;
  }
  Op fault_op() const { return fault_op_; }
  double fault_scale() const { return fault_scale_; }

 private:
  // deque: appends must not invalidate references to existing nodes (ops and
  // vjp rules hold node/value references across emissions)
  std::deque<Node> nodes_;
  int64_t logit_entries_ = 0;
  Op fault_op_ = Op::Leaf;
  double fault_scale_ = 1.0;
};

// ---- elementwise / structural ops ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var x);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var exp(Var x);
Var log(Var x);
Var sqrt(Var x);
Var sigmoid(Var x);
Var softplus(Var x);
Var relu(Var x);
Var relu_mask(Var x);
Var sum_axes(Var x, uint32_t axes_mask, bool keepdims);
Var sum_axis(Var x, int axis, bool keepdims);
Var sum_all(Var x);   // rank-0 result
Var mean_all(Var x);  // rank-0 result
Var mean_axes(Var x, uint32_t axes_mask, bool keepdims);
Var broadcast_to(Var x, Shape shape);  // same rank; axes equal or 1 in x
Var reshape(Var x, Shape shape);
Var contract(std::string_view spec, Var a, Var b);
Var softmax(Var x, int axis);
Var index_map(Var x, std::shared_ptr<const std::vector<int64_t>> map, Shape out_shape);
Var index_scatter(Var x, std::shared_ptr<const std::vector<int64_t>> map, Shape out_shape);
Var concat2(Var a, Var b, int axis);
Var narrow(Var x, int axis, int64_t start, int64_t len);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }

/// Reverse-mode gradients of a scalar loss, emitted as nodes on the same
/// tape (so the result can itself be differentiated). One Var per entry of
/// `wrt`; parameters the loss never touches get zero gradients.
std::vector<Var> grad(Var loss, std::span<const Var> wrt);

/// Values of grad(); the spec-level backward() surface.
std::vector<Tensor> backward(Var loss, std::span<const Var> wrt);

/// backward against every tracked parameter on the tape.
std::vector<Tensor> backward(Var loss);

/// Softmax along `axis` (max-subtracted, fixed summation order). Shared by
/// the tape op and the raw benchmark kernels.
template <class S>
TensorT<S> softmax_raw(const TensorT<S>& x, int axis) {
  const int rank = x.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw std::invalid_argument("softmax: axis out of range");
  const int64_t n = x.extent(axis);
  int64_t inner = 1;
  for (int i = axis + 1; i < rank; ++i) inner *= x.extent(i);
  const int64_t outer = x.size() / (n * inner);

  TensorT<S> out(x.shape());
  const S* px = x.data();
  S* po = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * n * inner + i;
      S m = px[base];
      for (int64_t j = 1; j < n; ++j) m = std::max(m, px[base + j * inner]);
      S denom = S(0);
      for (int64_t j = 0; j < n; ++j) {
        S e = std::exp(px[base + j * inner] - m);
        po[base + j * inner] = e;
        denom += e;
      }
      for (int64_t j = 0; j < n; ++j) po[base + j * inner] /= denom;
    }
  }
  return out;
}

}  // namespace hit
