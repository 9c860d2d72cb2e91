#include "hit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hit {

FdReport finite_diff_check(const std::function<double(std::span<const Tensor>)>& f,
                           std::vector<Tensor> params, std::span<const Tensor> analytic,
                           std::span<const std::string> names, double h,
                           int64_t max_coords_per_param) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("finite_diff_check: analytic gradient count mismatch");
  }
  if (!names.empty() && names.size() != params.size()) {
    throw std::invalid_argument("finite_diff_check: name count mismatch");
  }

  FdReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    if (!p.same_shape(analytic[pi])) {
      throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
    }
    const int64_t n = p.size();
    int64_t count = (max_coords_per_param < 0 || max_coords_per_param >= n)
                        ? n
                        : max_coords_per_param;
    // when subsetting, probe the largest-gradient coordinates: they carry the
    // most signal against the |f|*eps/h noise floor of central differences,
    // and a corrupted rule scales them like any other entry
    std::vector<int64_t> coords;
    if (count == n) {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
      const Tensor& g = analytic[pi];
      std::stable_sort(coords.begin(), coords.end(), [&](int64_t a, int64_t b) {
        return std::abs(g[a]) > std::abs(g[b]);
      });
      coords.resize(static_cast<size_t>(count));
    }
    for (int64_t ci = 0; ci < count; ++ci) {
      int64_t coord = coords[static_cast<size_t>(ci)];
      const double saved = p[coord];
      p[coord] = saved + h;
      const double fp = f(params);
      p[coord] = saved - h;
      const double fm = f(params);
      p[coord] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::runtime_error("finite_diff_check: non-finite objective evaluation");
      }
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic[pi][coord];
      const double denom = std::max({std::abs(fd), std::abs(ad), 1e-8});
      const double rel = std::abs(fd - ad) / denom;
      rep.coords_checked += 1;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = names.empty() ? ("param" + std::to_string(pi)) : names[pi];
        rep.worst_coord = coord;
        rep.worst_fd = fd;
        rep.worst_ad = ad;
      }
    }
  }
  return rep;
}

}  // namespace hit
