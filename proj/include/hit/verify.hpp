#pragma once

#include <ostream>

#include "hit/tape.hpp"

namespace hit {

struct PropertyResult {
  std::string name;
  double max_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
  int64_t cases = 0;
};

struct VerifyOptions {
  uint64_t seed = 2026;
  // mutation fixture: corrupt one op's backward rule on the tapes the
  // gradcheck suite builds (scale 1.0 = off)
  Op fault_op = Op::Leaf;
  double fault_scale = 1.0;
};

std::vector<PropertyResult> verify_roundtrip(const VerifyOptions& opt = {});
std::vector<PropertyResult> verify_equivalence(const VerifyOptions& opt = {});
std::vector<PropertyResult> verify_gradcheck(const VerifyOptions& opt = {});

/// suite: "roundtrip" | "equivalence" | "gradcheck" | "all"
std::vector<PropertyResult> verify_suite(const std::string& suite, const VerifyOptions& opt = {});

/// One line per property: name, max error, threshold, verdict.
void print_report(std::ostream& os, const std::vector<PropertyResult>& results);
bool all_pass(const std::vector<PropertyResult>& results);

}  // namespace hit
