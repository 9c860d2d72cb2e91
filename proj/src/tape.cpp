#include "hit/tape.hpp"

#include <algorithm>
#include <cmath>

namespace hit {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Relu: return "relu";
    case Op::ReluMask: return "relu_mask";
    case Op::SumAxes: return "sum_axes";
    case Op::BroadcastTo: return "broadcast_to";
    case Op::Reshape: return "reshape";
    case Op::Contract: return "contract";
    case Op::Softmax: return "softmax";
    case Op::IndexMap: return "index_map";
    case Op::IndexScatter: return "index_scatter";
    case Op::Concat2: return "concat2";
  }
  return "?";
}

Op op_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Op::Concat2); ++i) {
    Op op = static_cast<Op>(i);
    if (name == op_name(op)) return op;
  }
  throw std::invalid_argument("unknown op name: " + std::string(name));
}

const Tensor& Var::value() const { return tape->node(id).value; }
const Shape& Var::shape() const { return value().shape(); }
int64_t Var::size() const { return value().size(); }

// ---------------------------------------------------------------------------
// forward evaluation (shared by emission and replay)

namespace {

Tensor elementwise1(const Tensor& a, double (*f)(double)) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

double relu1(double x) { return x > 0.0 ? x : 0.0; }
double relu_mask1(double x) { return x > 0.0 ? 1.0 : 0.0; }
double sigmoid1(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
double softplus1(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

Tensor eval_sum_axes(const Tensor& x, uint32_t mask, bool keepdims) {
  const int rank = x.rank();
  Shape out_shape;
  for (int i = 0; i < rank; ++i) {
    bool summed = (mask >> i) & 1u;
    if (summed) {
      if (keepdims) out_shape.push_back(1);
    } else {
      out_shape.push_back(x.extent(i));
    }
  }
  Tensor out(out_shape);
  // walk the input row-major, carrying the output offset
  std::vector<int64_t> out_stride(static_cast<size_t>(rank), 0);
  {
    auto os = row_major_strides(out_shape);
    int j = 0;
    for (int i = 0; i < rank; ++i) {
      bool summed = (mask >> i) & 1u;
      if (summed && !keepdims) continue;
      out_stride[static_cast<size_t>(i)] = summed ? 0 : os[static_cast<size_t>(j)];
      ++j;
    }
  }
  std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
  int64_t off = 0;
  for (int64_t i = 0; i < x.size(); ++i) {
    out[off] += x[i];
    for (int ax = rank - 1; ax >= 0; --ax) {
      idx[static_cast<size_t>(ax)]++;
      off += out_stride[static_cast<size_t>(ax)];
      if (idx[static_cast<size_t>(ax)] < x.extent(ax)) break;
      off -= out_stride[static_cast<size_t>(ax)] * x.extent(ax);
      idx[static_cast<size_t>(ax)] = 0;
    }
  }
  return out;
}

Tensor eval_broadcast_to(const Tensor& x, const Shape& shape) {
  if (static_cast<int>(shape.size()) != x.rank()) {
    throw std::invalid_argument("broadcast_to: rank mismatch " + shape_str(x.shape()) + " -> " +
                                shape_str(shape));
  }
  const int rank = x.rank();
  std::vector<int64_t> in_stride(static_cast<size_t>(rank), 0);
  auto xs = row_major_strides(x.shape());
  for (int i = 0; i < rank; ++i) {
    if (x.extent(i) == shape[static_cast<size_t>(i)]) {
      in_stride[static_cast<size_t>(i)] = xs[static_cast<size_t>(i)];
    } else if (x.extent(i) == 1) {
      in_stride[static_cast<size_t>(i)] = 0;
    } else {
      throw std::invalid_argument("broadcast_to: incompatible " + shape_str(x.shape()) + " -> " +
                                  shape_str(shape));
    }
  }
  Tensor out(shape);
  std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
  int64_t off = 0;
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = x[off];
    for (int ax = rank - 1; ax >= 0; --ax) {
      idx[static_cast<size_t>(ax)]++;
      off += in_stride[static_cast<size_t>(ax)];
      if (idx[static_cast<size_t>(ax)] < shape[static_cast<size_t>(ax)]) break;
      off -= in_stride[static_cast<size_t>(ax)] * shape[static_cast<size_t>(ax)];
      idx[static_cast<size_t>(ax)] = 0;
    }
  }
  return out;
}

Tensor eval_node(const Tape& tape, const Node& n) {
  auto A = [&]() -> const Tensor& { return tape.node(n.a).value; };
  auto B = [&]() -> const Tensor& { return tape.node(n.b).value; };
  switch (n.op) {
    case Op::Leaf: return n.value;
    case Op::Add: {
      require_same_shape(A(), B(), "add");
      Tensor out(A().shape());
      for (int64_t i = 0; i < out.size(); ++i) out[i] = A()[i] + B()[i];
      return out;
    }
    case Op::Sub: {
      require_same_shape(A(), B(), "sub");
      Tensor out(A().shape());
      for (int64_t i = 0; i < out.size(); ++i) out[i] = A()[i] - B()[i];
      return out;
    }
    case Op::Mul: {
      require_same_shape(A(), B(), "mul");
      Tensor out(A().shape());
      for (int64_t i = 0; i < out.size(); ++i) out[i] = A()[i] * B()[i];
      return out;
    }
    case Op::Div: {
      require_same_shape(A(), B(), "div");
      Tensor out(A().shape());
      for (int64_t i = 0; i < out.size(); ++i) out[i] = A()[i] / B()[i];
      return out;
    }
    case Op::Neg: {
      Tensor out(A().shape());
      for (int64_t i = 0; i < out.size(); ++i) out[i] = -A()[i];
      return out;
    }
    case Op::Scale: {
      Tensor out(A().shape());
      for (int64_t i = 0; i < out.size(); ++i) out[i] = n.attr.c * A()[i];
      return out;
    }
    case Op::AddScalar: {
      Tensor out(A().shape());
      for (int64_t i = 0; i < out.size(); ++i) out[i] = A()[i] + n.attr.c;
      return out;
    }
    case Op::Exp: return elementwise1(A(), [](double x) { return std::exp(x); });
    case Op::Log: return elementwise1(A(), [](double x) { return std::log(x); });
    case Op::Sqrt: return elementwise1(A(), [](double x) { return std::sqrt(x); });
    case Op::Sigmoid: return elementwise1(A(), sigmoid1);
    case Op::Softplus: return elementwise1(A(), softplus1);
    case Op::Relu: return elementwise1(A(), relu1);
    case Op::ReluMask: return elementwise1(A(), relu_mask1);
    case Op::SumAxes: return eval_sum_axes(A(), n.attr.axes_mask, n.attr.keepdims);
    case Op::BroadcastTo: return eval_broadcast_to(A(), n.attr.shape);
    case Op::Reshape: return A().reshaped(n.attr.shape);
    case Op::Contract: {
      const auto& cs = *n.attr.cs;
      return contract_general(cs.a, A(), cs.b, B(), cs.out, cs.extra);
    }
    case Op::Softmax: return softmax_raw(A(), n.attr.axis);
    case Op::IndexMap: {
      const auto& map = *n.attr.map;
      if (static_cast<int64_t>(map.size()) != shape_numel(n.attr.shape)) {
        throw std::invalid_argument("index_map: map size does not match output shape");
      }
      Tensor out(n.attr.shape);
      for (size_t i = 0; i < map.size(); ++i) out[static_cast<int64_t>(i)] = A()[map[i]];
      return out;
    }
    case Op::IndexScatter: {
      const auto& map = *n.attr.map;
      if (static_cast<int64_t>(map.size()) != A().size()) {
        throw std::invalid_argument("index_scatter: map size does not match input shape");
      }
      Tensor out(n.attr.shape);
      for (size_t i = 0; i < map.size(); ++i) out[map[i]] += A()[static_cast<int64_t>(i)];
      return out;
    }
    case Op::Concat2: {
      const Tensor& a = A();
      const Tensor& b = B();
      const int axis = n.attr.axis;
      Shape shape = a.shape();
      shape[static_cast<size_t>(axis)] += b.extent(axis);
      Tensor out(shape);
      int64_t inner = 1;
      for (int i = axis + 1; i < a.rank(); ++i) inner *= a.extent(i);
      const int64_t arun = a.extent(axis) * inner;
      const int64_t brun = b.extent(axis) * inner;
      const int64_t outer = a.size() / arun;
      for (int64_t o = 0; o < outer; ++o) {
        std::copy(a.data() + o * arun, a.data() + (o + 1) * arun, out.data() + o * (arun + brun));
        std::copy(b.data() + o * brun, b.data() + (o + 1) * brun,
                  out.data() + o * (arun + brun) + arun);
      }
      return out;
    }
  }
  throw std::logic_error("eval_node: unhandled op");
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

Var Tape::leaf(Tensor v, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.requires_grad = requires_grad;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{this, size() - 1};
}

Var Tape::emit(Op op, int32_t a, int32_t b, NodeAttr attr) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.attr = std::move(attr);
  bool rg = false;
  if (a >= 0) rg = rg || node(a).requires_grad;
  if (b >= 0) rg = rg || node(b).requires_grad;
  // masks are piecewise constant: no gradient flows through them
  n.requires_grad = op == Op::ReluMask ? false : rg;
  n.value = eval_node(*this, n);
  nodes_.push_back(std::move(n));
  return Var{this, size() - 1};
}

std::vector<Var> Tape::params() {
  std::vector<Var> out;
  for (int32_t i = 0; i < size(); ++i) {
    if (nodes_[static_cast<size_t>(i)].op == Op::Leaf &&
        nodes_[static_cast<size_t>(i)].requires_grad) {
      out.push_back(Var{this, i});
    }
  }
  return out;
}

int32_t Tape::replay_check() const {
  for (int32_t i = 0; i < size(); ++i) {
    const Node& n = nodes_[static_cast<size_t>(i)];
    if (n.op == Op::Leaf) continue;
    Tensor redo = eval_node(*this, n);
    if (!redo.bit_equal(n.value)) return i;
  }
  return -1;
}

// ---------------------------------------------------------------------------
// op emission

namespace {

Tape& same_tape(Var a, Var b, const char* what) {
  if (!a.defined() || !b.defined() || a.tape != b.tape) {
    throw std::invalid_argument(std::string(what) + ": operands on different tapes");
  }
  return *a.tape;
}

Var emit1(Op op, Var x, NodeAttr attr = {}) {
  if (!x.defined()) throw std::invalid_argument("op on undefined var");
  return x.tape->emit(op, x.id, -1, std::move(attr));
}

Var emit2(Op op, Var a, Var b, NodeAttr attr = {}) {
  same_tape(a, b, op_name(op));
  return a.tape->emit(op, a.id, b.id, std::move(attr));
}

int normalize_axis(int axis, int rank, const char* what) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw std::invalid_argument(std::string(what) + ": axis out of range");
  return axis;
}

}  // namespace

Var add(Var a, Var b) { return emit2(Op::Add, a, b); }
Var sub(Var a, Var b) { return emit2(Op::Sub, a, b); }
Var mul(Var a, Var b) { return emit2(Op::Mul, a, b); }
Var div(Var a, Var b) { return emit2(Op::Div, a, b); }
Var neg(Var x) { return emit1(Op::Neg, x); }

Var scale(Var x, double c) {
  NodeAttr attr;
  attr.c = c;
  return emit1(Op::Scale, x, std::move(attr));
}

Var add_scalar(Var x, double c) {
  NodeAttr attr;
  attr.c = c;
  return emit1(Op::AddScalar, x, std::move(attr));
}

Var exp(Var x) { return emit1(Op::Exp, x); }
Var log(Var x) { return emit1(Op::Log, x); }
Var sqrt(Var x) { return emit1(Op::Sqrt, x); }
Var sigmoid(Var x) { return emit1(Op::Sigmoid, x); }
Var softplus(Var x) { return emit1(Op::Softplus, x); }
Var relu(Var x) { return emit1(Op::Relu, x); }
Var relu_mask(Var x) { return emit1(Op::ReluMask, x); }

Var sum_axes(Var x, uint32_t axes_mask, bool keepdims) {
  NodeAttr attr;
  attr.axes_mask = axes_mask;
  attr.keepdims = keepdims;
  return emit1(Op::SumAxes, x, std::move(attr));
}

Var sum_axis(Var x, int axis, bool keepdims) {
  axis = normalize_axis(axis, x.value().rank(), "sum_axis");
  return sum_axes(x, 1u << axis, keepdims);
}

Var sum_all(Var x) {
  uint32_t mask = x.value().rank() == 0 ? 0u : (1u << x.value().rank()) - 1u;
  return sum_axes(x, mask, false);
}

Var mean_all(Var x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

Var mean_axes(Var x, uint32_t axes_mask, bool keepdims) {
  int64_t count = 1;
  for (int i = 0; i < x.value().rank(); ++i) {
    if ((axes_mask >> i) & 1u) count *= x.value().extent(i);
  }
  return scale(sum_axes(x, axes_mask, keepdims), 1.0 / static_cast<double>(count));
}

Var broadcast_to(Var x, Shape shape) {
  NodeAttr attr;
  attr.shape = std::move(shape);
  return emit1(Op::BroadcastTo, x, std::move(attr));
}

Var reshape(Var x, Shape shape) {
  NodeAttr attr;
  attr.shape = std::move(shape);
  return emit1(Op::Reshape, x, std::move(attr));
}

namespace {

Var contract_node(Var a, Var b, std::string sa, std::string sb, std::string so,
                  std::map<char, int64_t> extra) {
  auto cs = std::make_shared<ContractStrings>();
  cs->a = std::move(sa);
  cs->b = std::move(sb);
  cs->out = std::move(so);
  cs->extra = std::move(extra);
  NodeAttr attr;
  attr.cs = std::move(cs);
  return emit2(Op::Contract, a, b, std::move(attr));
}

}  // namespace

Var contract(std::string_view spec, Var a, Var b) {
  ContractSpec cs = parse_contract_spec(spec);
  for (char c : cs.out) {
    if (cs.a.find(c) == std::string::npos && cs.b.find(c) == std::string::npos) {
      throw std::invalid_argument("contract: output label '" + std::string(1, c) +
                                  "' absent from inputs in spec " + std::string(spec));
    }
  }
  return contract_node(a, b, cs.a, cs.b, cs.out, {});
}

Var softmax(Var x, int axis) {
  axis = normalize_axis(axis, x.value().rank(), "softmax");
  if (x.value().extent(axis) == 0) throw std::invalid_argument("softmax: empty axis");
  NodeAttr attr;
  attr.axis = axis;
  return emit1(Op::Softmax, x, std::move(attr));
}

Var index_map(Var x, std::shared_ptr<const std::vector<int64_t>> map, Shape out_shape) {
  NodeAttr attr;
  attr.map = std::move(map);
  attr.shape = std::move(out_shape);
  return emit1(Op::IndexMap, x, std::move(attr));
}

Var index_scatter(Var x, std::shared_ptr<const std::vector<int64_t>> map, Shape out_shape) {
  NodeAttr attr;
  attr.map = std::move(map);
  attr.shape = std::move(out_shape);
  return emit1(Op::IndexScatter, x, std::move(attr));
}

Var concat2(Var a, Var b, int axis) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  axis = normalize_axis(axis, ta.rank(), "concat2");
  if (ta.rank() != tb.rank()) throw std::invalid_argument("concat2: rank mismatch");
  for (int i = 0; i < ta.rank(); ++i) {
    if (i != axis && ta.extent(i) != tb.extent(i)) {
      throw std::invalid_argument("concat2: shape mismatch off the concat axis");
    }
  }
  NodeAttr attr;
  attr.axis = axis;
  return emit2(Op::Concat2, a, b, std::move(attr));
}

Var narrow(Var x, int axis, int64_t start, int64_t len) {
  const Tensor& t = x.value();
  axis = normalize_axis(axis, t.rank(), "narrow");
  if (start < 0 || len <= 0 || start + len > t.extent(axis)) {
    throw std::invalid_argument("narrow: range out of bounds");
  }
  Shape out_shape = t.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  auto strides = row_major_strides(t.shape());
  auto map = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(shape_numel(out_shape)));
  const int rank = t.rank();
  std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
  for (size_t i = 0; i < map->size(); ++i) {
    int64_t src = 0;
    for (int ax = 0; ax < rank; ++ax) {
      int64_t v = idx[static_cast<size_t>(ax)] + (ax == axis ? start : 0);
      src += v * strides[static_cast<size_t>(ax)];
    }
    (*map)[i] = src;
    for (int ax = rank - 1; ax >= 0; --ax) {
      if (++idx[static_cast<size_t>(ax)] < out_shape[static_cast<size_t>(ax)]) break;
      idx[static_cast<size_t>(ax)] = 0;
    }
  }
  return index_map(x, std::move(map), std::move(out_shape));
}

// ---------------------------------------------------------------------------
// reverse-mode sweep

namespace {

struct Accum {
  std::vector<Var>& adj;
  Tape& tape;

  void push(int32_t input, Var contribution) {
    if (input < 0) return;
    if (!tape.node(input).requires_grad) return;
    Var& slot = adj[static_cast<size_t>(input)];
    slot = slot.defined() ? add(slot, contribution) : contribution;
  }
};

void emit_vjp(Tape& tape, int32_t id, Var gy, Accum& acc) {
  const Node& n = tape.node(id);
  Var self{&tape, id};
  Var a{&tape, n.a};
  Var b{&tape, n.b};

  // mutation-test hook
  auto faulted = [&](Var g) {
    if (tape.fault_scale() != 1.0 && tape.fault_op() == n.op) return scale(g, tape.fault_scale());
    return g;
  };

  switch (n.op) {
    case Op::Leaf: return;
    case Op::Add:
      acc.push(n.a, faulted(gy));
      acc.push(n.b, faulted(gy));
      return;
    case Op::Sub:
      acc.push(n.a, faulted(gy));
      acc.push(n.b, faulted(neg(gy)));
      return;
    case Op::Mul:
      acc.push(n.a, faulted(mul(gy, b)));
      acc.push(n.b, faulted(mul(gy, a)));
      return;
    case Op::Div:
      acc.push(n.a, faulted(div(gy, b)));
      acc.push(n.b, faulted(neg(div(mul(gy, self), b))));
      return;
    case Op::Neg: acc.push(n.a, faulted(neg(gy))); return;
    case Op::Scale: acc.push(n.a, faulted(scale(gy, n.attr.c))); return;
    case Op::AddScalar: acc.push(n.a, faulted(gy)); return;
    case Op::Exp: acc.push(n.a, faulted(mul(gy, self))); return;
    case Op::Log: acc.push(n.a, faulted(div(gy, a))); return;
    case Op::Sqrt: acc.push(n.a, faulted(scale(div(gy, self), 0.5))); return;
    case Op::Sigmoid:
      acc.push(n.a, faulted(mul(gy, mul(self, add_scalar(neg(self), 1.0)))));
      return;
    case Op::Softplus: acc.push(n.a, faulted(mul(gy, sigmoid(a)))); return;
    case Op::Relu: acc.push(n.a, faulted(mul(gy, relu_mask(a)))); return;
    case Op::ReluMask: return;
    case Op::SumAxes: {
      Var g = gy;
      if (!n.attr.keepdims) {
        Shape keep;
        const Tensor& in = a.value();
        for (int i = 0; i < in.rank(); ++i) {
          keep.push_back(((n.attr.axes_mask >> i) & 1u) ? 1 : in.extent(i));
        }
        g = reshape(g, std::move(keep));
      }
      acc.push(n.a, faulted(broadcast_to(g, a.value().shape())));
      return;
    }
    case Op::BroadcastTo: {
      const Tensor& in = a.value();
      uint32_t mask = 0;
      for (int i = 0; i < in.rank(); ++i) {
        if (in.extent(i) == 1 && n.value.extent(i) != 1) mask |= 1u << i;
      }
      Var g = mask ? sum_axes(gy, mask, true) : gy;
      acc.push(n.a, faulted(g));
      return;
    }
    case Op::Reshape: acc.push(n.a, faulted(reshape(gy, a.value().shape()))); return;
    case Op::Contract: {
      const auto& cs = *n.attr.cs;
      auto extents_of = [](const std::string& s, const Tensor& t) {
        std::map<char, int64_t> m;
        for (size_t i = 0; i < s.size(); ++i) m[s[i]] = t.shape()[i];
        return m;
      };
      acc.push(n.a, faulted(contract_node(gy, b, cs.out, cs.b, cs.a, extents_of(cs.a, a.value()))));
      acc.push(n.b, faulted(contract_node(gy, a, cs.out, cs.a, cs.b, extents_of(cs.b, b.value()))));
      return;
    }
    case Op::Softmax: {
      Var t = mul(gy, self);
      Var s = sum_axes(t, 1u << n.attr.axis, true);
      Var g = mul(sub(gy, broadcast_to(s, n.value.shape())), self);
      acc.push(n.a, faulted(g));
      return;
    }
    case Op::IndexMap:
      acc.push(n.a, faulted(index_scatter(gy, n.attr.map, a.value().shape())));
      return;
    case Op::IndexScatter:
      acc.push(n.a, faulted(index_map(gy, n.attr.map, a.value().shape())));
      return;
    case Op::Concat2: {
      const int axis = n.attr.axis;
      const int64_t ea = a.value().extent(axis);
      const int64_t eb = b.value().extent(axis);
      acc.push(n.a, faulted(narrow(gy, axis, 0, ea)));
      acc.push(n.b, faulted(narrow(gy, axis, ea, eb)));
      return;
    }
  }
}

}  // namespace

std::vector<Var> grad(Var loss, std::span<const Var> wrt) {
  if (!loss.defined()) throw std::invalid_argument("backward: loss not on a tape");
  Tape& tape = *loss.tape;
  for (const Var& w : wrt) {
    if (w.tape != &tape) throw std::invalid_argument("backward: parameter on a different tape");
  }
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }

  const int32_t top = loss.id;
  std::vector<uint8_t> reach(static_cast<size_t>(top) + 1, 0);
  if (tape.node(top).requires_grad) {
    std::vector<int32_t> stack{top};
    reach[static_cast<size_t>(top)] = 1;
    while (!stack.empty()) {
      int32_t id = stack.back();
      stack.pop_back();
      const Node& n = tape.node(id);
      for (int32_t in : {n.a, n.b}) {
        if (in >= 0 && tape.node(in).requires_grad && !reach[static_cast<size_t>(in)]) {
          reach[static_cast<size_t>(in)] = 1;
          stack.push_back(in);
        }
      }
    }
  }

  std::vector<Var> adj(static_cast<size_t>(top) + 1);
  if (reach[static_cast<size_t>(top)]) {
    adj[static_cast<size_t>(top)] = tape.constant(Tensor::full(loss.shape(), 1.0));
    Accum acc{adj, tape};
    for (int32_t id = top; id >= 0; --id) {
      if (!reach[static_cast<size_t>(id)] || !adj[static_cast<size_t>(id)].defined()) continue;
      if (tape.node(id).op == Op::Leaf) continue;
      emit_vjp(tape, id, adj[static_cast<size_t>(id)], acc);
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id <= top && adj[static_cast<size_t>(w.id)].defined()) {
      out.push_back(adj[static_cast<size_t>(w.id)]);
    } else {
      out.push_back(tape.constant(Tensor(w.shape())));
    }
  }
  return out;
}

std::vector<Tensor> backward(Var loss, std::span<const Var> wrt) {
  std::vector<Var> g = grad(loss, wrt);
  std::vector<Tensor> out;
  out.reserve(g.size());
  for (const Var& v : g) out.push_back(v.value());
  return out;
}

std::vector<Tensor> backward(Var loss) {
  std::vector<Var> ps = loss.tape->params();
  return backward(loss, ps);
}

}  // namespace hit
