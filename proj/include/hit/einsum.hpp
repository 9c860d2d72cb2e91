#pragma once

#include <map>
#include <string>
#include <string_view>

#include "hit/tensor.hpp"

namespace hit {

/// Parsed form of a two-operand contraction spec like "bmnd,hdk->bhmnk".
struct ContractSpec {
  std::string a, b, out;
};

ContractSpec parse_contract_spec(std::string_view spec);

/// Execution plan for one contraction. Axis labels fall into: output labels
/// (kept, in spec order) and reduction labels (summed, ordered by first
/// appearance in A then B). Reduction runs row-major over that order, which
/// fixes the floating-point summation order.
struct ContractPlan {
  Shape out_shape;
  std::vector<int64_t> out_ext, red_ext;
  std::vector<int64_t> a_out_stride, b_out_stride;  // 0 where label absent
  std::vector<int64_t> a_red_stride, b_red_stride;
  int64_t out_numel = 1, red_numel = 1;
};

/// Builds the plan. `out` may contain labels absent from both inputs only if
/// their extent is given in `extra_extents` (the result is broadcast along
/// them); the public contract() entry point forbids that case.
ContractPlan make_contract_plan(const std::string& sa, const Shape& a_shape,
                                const std::string& sb, const Shape& b_shape,
                                const std::string& so,
                                const std::map<char, int64_t>& extra_extents = {});

template <class S>
TensorT<S> run_contract(const ContractPlan& plan, const TensorT<S>& a, const TensorT<S>& b) {
  TensorT<S> out(plan.out_shape);
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();

  const int out_rank = static_cast<int>(plan.out_ext.size());
  const int red_rank = static_cast<int>(plan.red_ext.size());
  std::vector<int64_t> oidx(static_cast<size_t>(out_rank), 0);

  // innermost reduction axis peeled off for a tight loop
  int64_t last_ext = 1, last_sa = 0, last_sb = 0;
  if (red_rank > 0) {
    last_ext = plan.red_ext.back();
    last_sa = plan.a_red_stride.back();
    last_sb = plan.b_red_stride.back();
  }
  const int red_outer = red_rank > 0 ? red_rank - 1 : 0;
  std::vector<int64_t> ridx(static_cast<size_t>(red_outer), 0);

  int64_t offa = 0, offb = 0;
  for (int64_t o = 0; o < plan.out_numel; ++o) {
    S acc = S(0);
    int64_t roffa = 0, roffb = 0;
    std::fill(ridx.begin(), ridx.end(), 0);
    for (;;) {
      const S* qa = pa + offa + roffa;
      const S* qb = pb + offb + roffb;
      for (int64_t i = 0; i < last_ext; ++i) acc += qa[i * last_sa] * qb[i * last_sb];
      int ax = red_outer - 1;
      for (; ax >= 0; --ax) {
        ridx[static_cast<size_t>(ax)]++;
        roffa += plan.a_red_stride[static_cast<size_t>(ax)];
        roffb += plan.b_red_stride[static_cast<size_t>(ax)];
        if (ridx[static_cast<size_t>(ax)] < plan.red_ext[static_cast<size_t>(ax)]) break;
        roffa -= plan.a_red_stride[static_cast<size_t>(ax)] * plan.red_ext[static_cast<size_t>(ax)];
        roffb -= plan.b_red_stride[static_cast<size_t>(ax)] * plan.red_ext[static_cast<size_t>(ax)];
        ridx[static_cast<size_t>(ax)] = 0;
      }
      if (ax < 0) break;
    }
    po[o] = acc;

    for (int ax = out_rank - 1; ax >= 0; --ax) {
      oidx[static_cast<size_t>(ax)]++;
      offa += plan.a_out_stride[static_cast<size_t>(ax)];
      offb += plan.b_out_stride[static_cast<size_t>(ax)];
      if (oidx[static_cast<size_t>(ax)] < plan.out_ext[static_cast<size_t>(ax)]) break;
      offa -= plan.a_out_stride[static_cast<size_t>(ax)] * plan.out_ext[static_cast<size_t>(ax)];
      offb -= plan.b_out_stride[static_cast<size_t>(ax)] * plan.out_ext[static_cast<size_t>(ax)];
      oidx[static_cast<size_t>(ax)] = 0;
    }
  }
  return out;
}

template <class S>
TensorT<S> contract_general(const std::string& sa, const TensorT<S>& a, const std::string& sb,
                            const TensorT<S>& b, const std::string& so,
                            const std::map<char, int64_t>& extra_extents = {}) {
  return run_contract(make_contract_plan(sa, a.shape(), sb, b.shape(), so, extra_extents), a, b);
}

/// Axis-labeled contraction of two tensors, einsum style. Each label may
/// appear at most once per operand; output labels must be drawn from the
/// inputs. Shared labels are checked for equal extents.
template <class S>
TensorT<S> contract(std::string_view spec, const TensorT<S>& a, const TensorT<S>& b) {
  ContractSpec cs = parse_contract_spec(spec);
  for (char c : cs.out) {
    if (cs.a.find(c) == std::string::npos && cs.b.find(c) == std::string::npos) {
      throw std::invalid_argument("contract: output label '" + std::string(1, c) +
                                  "' absent from inputs in spec " + std::string(spec));
    }
  }
  return contract_general(cs.a, a, cs.b, b, cs.out);
}

}  // namespace hit
