#include "hit/blocking.hpp"

#include <cmath>
#include <stdexcept>

namespace hit {

namespace {

void require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) {
    throw std::invalid_argument(std::string(what) + ": expected rank-4 [b,h,w,d], got " +
                                shape_str(s));
  }
}

int64_t isqrt_exact(int64_t n, const char* what) {
  int64_t r = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (r * r != n) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(n) +
                                " is not a perfect square");
  }
  return r;
}

}  // namespace

GatherMap space_to_depth_map(const Shape& in, int64_t p) {
  require_rank4(in, "space_to_depth");
  const int64_t b = in[0], h = in[1], w = in[2], d = in[3];
  if (p < 1 || h % p != 0 || w % p != 0) {
    throw std::invalid_argument("space_to_depth: patch size " + std::to_string(p) +
                                " does not divide " + shape_str(in));
  }
  GatherMap gm;
  gm.out_shape = {b, h / p, w / p, d * p * p};
  auto map = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(shape_numel(in)));
  int64_t idx = 0;
  for (int64_t bb = 0; bb < b; ++bb) {
    for (int64_t i = 0; i < h / p; ++i) {
      for (int64_t j = 0; j < w / p; ++j) {
        for (int64_t di = 0; di < p; ++di) {
          for (int64_t dj = 0; dj < p; ++dj) {
            for (int64_t c = 0; c < d; ++c) {
              (*map)[static_cast<size_t>(idx++)] =
                  ((bb * h + i * p + di) * w + j * p + dj) * d + c;
            }
          }
        }
      }
    }
  }
  gm.map = std::move(map);
  return gm;
}

GatherMap depth_to_space_map(const Shape& in, int64_t p) {
  require_rank4(in, "depth_to_space");
  const int64_t b = in[0], h = in[1], w = in[2], dpp = in[3];
  if (p < 1 || dpp % (p * p) != 0) {
    throw std::invalid_argument("depth_to_space: channel extent " + std::to_string(dpp) +
                                " not divisible by patch size squared " + std::to_string(p * p));
  }
  const int64_t d = dpp / (p * p);
  GatherMap gm;
  gm.out_shape = {b, h * p, w * p, d};
  auto map = std::make_shared<std::vector<int64_t>>(
      static_cast<size_t>(shape_numel(gm.out_shape)));
  int64_t idx = 0;
  for (int64_t bb = 0; bb < b; ++bb) {
    for (int64_t oi = 0; oi < h * p; ++oi) {
      for (int64_t oj = 0; oj < w * p; ++oj) {
        const int64_t i = oi / p, di = oi % p;
        const int64_t j = oj / p, dj = oj % p;
        for (int64_t c = 0; c < d; ++c) {
          (*map)[static_cast<size_t>(idx++)] =
              ((bb * h + i) * w + j) * dpp + (di * p + dj) * d + c;
        }
      }
    }
  }
  gm.map = std::move(map);
  return gm;
}

GatherMap nearest_upsample_map(const Shape& in) {
  require_rank4(in, "nearest_upsample");
  const int64_t b = in[0], h = in[1], w = in[2], d = in[3];
  GatherMap gm;
  gm.out_shape = {b, 2 * h, 2 * w, d};
  auto map = std::make_shared<std::vector<int64_t>>(
      static_cast<size_t>(shape_numel(gm.out_shape)));
  int64_t idx = 0;
  for (int64_t bb = 0; bb < b; ++bb) {
    for (int64_t oi = 0; oi < 2 * h; ++oi) {
      for (int64_t oj = 0; oj < 2 * w; ++oj) {
        for (int64_t c = 0; c < d; ++c) {
          (*map)[static_cast<size_t>(idx++)] = ((bb * h + oi / 2) * w + oj / 2) * d + c;
        }
      }
    }
  }
  gm.map = std::move(map);
  return gm;
}

Tensor space_to_depth(const Tensor& x, int64_t p) { return apply_gather(space_to_depth_map(x.shape(), p), x); }
Tensor depth_to_space(const Tensor& x, int64_t p) { return apply_gather(depth_to_space_map(x.shape(), p), x); }
Tensor32 space_to_depth(const Tensor32& x, int64_t p) { return apply_gather(space_to_depth_map(x.shape(), p), x); }
Tensor32 depth_to_space(const Tensor32& x, int64_t p) { return apply_gather(depth_to_space_map(x.shape(), p), x); }

Tensor pixel_shuffle(const Tensor& x) {
  if (x.rank() != 4 || x.extent(3) % 4 != 0) {
    throw std::invalid_argument("pixel_shuffle: channel extent must be divisible by 4, got " +
                                shape_str(x.shape()));
  }
  return depth_to_space(x, 2);
}

Tensor nearest_upsample(const Tensor& x) { return apply_gather(nearest_upsample_map(x.shape()), x); }

BlockedTensor block(const Tensor& x, int64_t p) {
  Tensor s2d = space_to_depth(x, p);
  const int64_t b = x.extent(0), h = x.extent(1), w = x.extent(2), d = x.extent(3);
  BlockedTensor out;
  out.data = s2d.reshaped(Shape{b, h * w / (p * p), p * p, d});
  out.patch_size = p;
  out.src_h = h;
  out.src_w = w;
  out.aspect_ratio = static_cast<double>(w) / static_cast<double>(h);
  return out;
}

Tensor unblock(const BlockedTensor& y) {
  const Tensor& t = y.data;
  require_rank4(t.shape(), "unblock");
  const int64_t b = t.extent(0), m = t.extent(1), n = t.extent(2), d = t.extent(3);
  const int64_t p = y.patch_size;
  if (n != p * p || m * n != y.src_h * y.src_w) {
    throw std::invalid_argument("unblock: metadata inconsistent with data shape");
  }
  Tensor grid = t.reshaped(Shape{b, y.src_h / p, y.src_w / p, d * p * p});
  return depth_to_space(grid, p);
}

Tensor unblock(const Tensor& y, double aspect_ratio) {
  require_rank4(y.shape(), "unblock");
  const int64_t m = y.extent(1), n = y.extent(2);
  const int64_t p = isqrt_exact(n, "unblock: patch axis");
  const int64_t grid_h =
      static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(m) / aspect_ratio)));
  const int64_t grid_w =
      static_cast<int64_t>(std::llround(static_cast<double>(grid_h) * aspect_ratio));
  if (grid_h <= 0 || grid_w <= 0 || grid_h * grid_w != m ||
      static_cast<double>(grid_w) != static_cast<double>(grid_h) * aspect_ratio) {
    throw std::invalid_argument("unblock: patch count " + std::to_string(m) +
                                " incompatible with aspect ratio");
  }
  BlockedTensor bt;
  bt.data = y;
  bt.patch_size = p;
  bt.src_h = grid_h * p;
  bt.src_w = grid_w * p;
  bt.aspect_ratio = aspect_ratio;
  return unblock(bt);
}

// ---- tape-level ----

Var space_to_depth(Var x, int64_t p) {
  GatherMap gm = space_to_depth_map(x.value().shape(), p);
  return index_map(x, gm.map, gm.out_shape);
}

Var depth_to_space(Var x, int64_t p) {
  GatherMap gm = depth_to_space_map(x.value().shape(), p);
  return index_map(x, gm.map, gm.out_shape);
}

Var pixel_shuffle(Var x) {
  if (x.value().rank() != 4 || x.value().extent(3) % 4 != 0) {
    throw std::invalid_argument("pixel_shuffle: channel extent must be divisible by 4, got " +
                                shape_str(x.value().shape()));
  }
  return depth_to_space(x, 2);
}

Var nearest_upsample(Var x) {
  GatherMap gm = nearest_upsample_map(x.value().shape());
  return index_map(x, gm.map, gm.out_shape);
}

BlockedVar block(Var x, int64_t p) {
  const Shape& s = x.value().shape();
  require_rank4(s, "block");
  Var s2d = space_to_depth(x, p);
  BlockedVar out;
  out.data = reshape(s2d, Shape{s[0], s[1] * s[2] / (p * p), p * p, s[3]});
  out.patch_size = p;
  out.src_h = s[1];
  out.src_w = s[2];
  out.aspect_ratio = static_cast<double>(s[2]) / static_cast<double>(s[1]);
  return out;
}

Var unblock(const BlockedVar& y) {
  const Shape& s = y.data.value().shape();
  require_rank4(s, "unblock");
  const int64_t p = y.patch_size;
  if (s[2] != p * p || s[1] * s[2] != y.src_h * y.src_w) {
    throw std::invalid_argument("unblock: metadata inconsistent with data shape");
  }
  Var grid = reshape(y.data, Shape{s[0], y.src_h / p, y.src_w / p, s[3] * p * p});
  return depth_to_space(grid, p);
}

}  // namespace hit
