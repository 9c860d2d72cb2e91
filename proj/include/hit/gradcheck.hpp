#pragma once

#include <functional>
#include <span>
#include <string>

#include "hit/tensor.hpp"

namespace hit {

struct FdReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_coord = -1;
  double worst_fd = 0.0, worst_ad = 0.0;
  int64_t coords_checked = 0;
};

/// Central-difference check of analytic gradients. For each selected
/// coordinate, (f(p+h e) - f(p-h e)) / (2h) is compared against the matching
/// entry of `analytic`; the relative error uses max(|fd|, |ad|, 1e-8) as the
/// denominator. `max_coords_per_param` < 0 checks every coordinate; otherwise
/// a deterministic evenly strided subset of that size is used per tensor.
/// Throws if any evaluation of f is non-finite.
FdReport finite_diff_check(const std::function<double(std::span<const Tensor>)>& f,
                           std::vector<Tensor> params, std::span<const Tensor> analytic,
                           std::span<const std::string> names, double h,
                           int64_t max_coords_per_param = -1);

}  // namespace hit
