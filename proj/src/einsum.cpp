#include "hit/einsum.hpp"

#include <algorithm>
#include <cctype>

namespace hit {

ContractSpec parse_contract_spec(std::string_view spec) {
  auto arrow = spec.find("->");
  if (arrow == std::string_view::npos) {
    throw std::invalid_argument("contract: spec missing '->': " + std::string(spec));
  }
  std::string_view lhs = spec.substr(0, arrow);
  std::string_view out = spec.substr(arrow + 2);
  auto comma = lhs.find(',');
  if (comma == std::string_view::npos) {
    throw std::invalid_argument("contract: spec needs two operands: " + std::string(spec));
  }
  ContractSpec cs;
  cs.a = std::string(lhs.substr(0, comma));
  cs.b = std::string(lhs.substr(comma + 1));
  cs.out = std::string(out);

  auto validate = [&](const std::string& s, const char* which) {
    for (char c : s) {
      if (!std::isalpha(static_cast<unsigned char>(c))) {
        throw std::invalid_argument(std::string("contract: non-letter label in ") + which +
                                    " of spec " + std::string(spec));
      }
    }
    for (size_t i = 0; i < s.size(); ++i) {
      if (s.find(s[i], i + 1) != std::string::npos) {
        throw std::invalid_argument("contract: label '" + std::string(1, s[i]) +
                                    "' repeated within " + which + " in spec " +
                                    std::string(spec));
      }
    }
  };
  validate(cs.a, "operand A");
  validate(cs.b, "operand B");
  validate(cs.out, "output");
  return cs;
}

ContractPlan make_contract_plan(const std::string& sa, const Shape& a_shape,
                                const std::string& sb, const Shape& b_shape,
                                const std::string& so,
                                const std::map<char, int64_t>& extra_extents) {
  if (sa.size() != a_shape.size() || sb.size() != b_shape.size()) {
    throw std::invalid_argument("contract: spec rank does not match operand rank (" + sa + ":" +
                                shape_str(a_shape) + ", " + sb + ":" + shape_str(b_shape) + ")");
  }

  std::map<char, int64_t> extent;
  auto record = [&](char c, int64_t e) {
    auto it = extent.find(c);
    if (it == extent.end()) {
      extent.emplace(c, e);
    } else if (it->second != e) {
      throw std::invalid_argument("contract: extent mismatch for label '" + std::string(1, c) +
                                  "': " + std::to_string(it->second) + " vs " + std::to_string(e));
    }
  };
  for (size_t i = 0; i < sa.size(); ++i) record(sa[i], a_shape[i]);
  for (size_t i = 0; i < sb.size(); ++i) record(sb[i], b_shape[i]);

  ContractPlan plan;
  auto a_strides = row_major_strides(a_shape);
  auto b_strides = row_major_strides(b_shape);
  auto stride_of = [](const std::string& s, const std::vector<int64_t>& strides, char c) {
    auto pos = s.find(c);
    return pos == std::string::npos ? int64_t{0} : strides[pos];
  };

  for (char c : so) {
    int64_t e;
    auto it = extent.find(c);
    if (it != extent.end()) {
      e = it->second;
    } else {
      auto jt = extra_extents.find(c);
      if (jt == extra_extents.end()) {
        throw std::invalid_argument("contract: unknown extent for output label '" +
                                    std::string(1, c) + "'");
      }
      e = jt->second;
    }
    plan.out_shape.push_back(e);
    plan.out_ext.push_back(e);
    plan.a_out_stride.push_back(stride_of(sa, a_strides, c));
    plan.b_out_stride.push_back(stride_of(sb, b_strides, c));
    plan.out_numel *= e;
  }

  // reduction labels in order of first appearance in A then B
  std::string red;
  for (char c : sa) {
    if (so.find(c) == std::string::npos) red.push_back(c);
  }
  for (char c : sb) {
    if (so.find(c) == std::string::npos && red.find(c) == std::string::npos) red.push_back(c);
  }
  for (char c : red) {
    int64_t e = extent.at(c);
    plan.red_ext.push_back(e);
    plan.a_red_stride.push_back(stride_of(sa, a_strides, c));
    plan.b_red_stride.push_back(stride_of(sb, b_strides, c));
    plan.red_numel *= e;
  }
  return plan;
}

}  // namespace hit
