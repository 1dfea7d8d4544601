#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpos/common.hpp"

namespace dpos {

/// Extra constraint carving a non-box compact set out of the bounding box.
/// `margin(x) >= 0` inside; the samplers return deterministic point sets.
struct RegionShape {
  std::string kind;
  std::function<double(const Vec&)> margin;
  std::function<std::vector<Vec>(int density)> interior;
  std::function<std::vector<Vec>(int density)> boundary;
  nlohmann::json params = nlohmann::json::object();
};

/// Axis-aligned box in chart coordinates, optionally intersected with a shape.
/// A wrapped axis spanning at least 2*pi is the full circle and has no faces.
class CompactRegion {
 public:
  Vec lo;
  Vec hi;
  std::vector<bool> wrap;
  int grid_density = 15;
  std::size_t max_grid_points = 20000;
  std::optional<RegionShape> shape;

  CompactRegion() = default;
  CompactRegion(Vec lo_, Vec hi_, std::vector<bool> wrap_ = {}, int density = 15)
      : lo(std::move(lo_)), hi(std::move(hi_)), wrap(std::move(wrap_)), grid_density(density) {
    if (wrap.empty()) wrap.assign(static_cast<std::size_t>(lo.size()), false);
    validate();
  }

  static CompactRegion box(std::initializer_list<std::pair<double, double>> bounds, int density = 15) {
    Vec l(static_cast<Eigen::Index>(bounds.size())), h(static_cast<Eigen::Index>(bounds.size()));
    Eigen::Index i = 0;
    for (const auto& [a, b] : bounds) {
      l[i] = a;
      h[i] = b;
      ++i;
    }
    return CompactRegion(l, h, {}, density);
  }

  int dim() const { return static_cast<int>(lo.size()); }

  void validate() const {
    if (lo.size() == 0 || lo.size() != hi.size() || static_cast<std::size_t>(lo.size()) != wrap.size())
      throw PreconditionError("region bounds and wrap flags must have equal, positive length");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
        throw PreconditionError("region bound on axis " + std::to_string(i) + " is not finite");
      if (!(lo[i] < hi[i])) throw PreconditionError("region needs lo < hi on axis " + std::to_string(i));
    }
    if (grid_density < 2) throw PreconditionError("grid density must be at least 2");
  }

  bool full_circle(Eigen::Index i) const {
    return wrap[static_cast<std::size_t>(i)] && hi[i] - lo[i] >= kTwoPi - 1e-12;
  }

  /// Signed distance-like margin: >= 0 inside, negative by the worst violation outside.
  double margin(const Vec& x) const {
    double m = kInf;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (full_circle(i)) continue;
      double xi = x[i];
      if (wrap[static_cast<std::size_t>(i)]) {
        // Position along the circle measured from lo.
        double s = std::fmod(xi - lo[i], kTwoPi);
        if (s < 0) s += kTwoPi;
        const double arc = hi[i] - lo[i];
        m = std::min(m, s <= arc ? std::min(s, arc - s) : -std::min(s - arc, kTwoPi - s));
      } else {
        m = std::min(m, std::min(xi - lo[i], hi[i] - xi));
      }
    }
    if (shape) m = std::min(m, shape->margin(x));
    return m;
  }

  bool contains(const Vec& x, double tol = 1e-9) const { return margin(x) >= -tol; }

  /// Per-axis sample count after capping the tensor grid at max_grid_points.
  int effective_density() const {
    int d = grid_density;
    while (d > 2 && std::pow(static_cast<double>(d), dim()) > static_cast<double>(max_grid_points)) --d;
    return d;
  }

  /// Deterministic interior samples: a tensor grid (filtered by the shape) or the shape's own sampler.
  std::vector<Vec> grid() const {
    if (shape && shape->interior) return shape->interior(grid_density);
    auto pts = tensor_grid(effective_density());
    if (shape) std::erase_if(pts, [&](const Vec& p) { return shape->margin(p) < -1e-12; });
    return pts;
  }

  /// Deterministic samples on the boundary: box faces plus the shape boundary.
  std::vector<Vec> boundary_grid(int per_axis) const {
    std::vector<Vec> out;
    const int n = dim();
    for (int axis = 0; axis < n; ++axis) {
      if (full_circle(axis)) continue;
      for (int side = 0; side < 2; ++side) {
        for (const auto& p : face_grid(axis, side == 0 ? lo[axis] : hi[axis], per_axis)) {
          if (!shape || shape->margin(p) >= -1e-12) out.push_back(p);
        }
      }
    }
    if (shape && shape->boundary) {
      for (auto& p : shape->boundary(per_axis))
        if (margin(p) >= -1e-9) out.push_back(std::move(p));
    }
    return out;
  }

  /// Uniform sample by rejection from the bounding box.
  template <class Rng>
  Vec sample_uniform(Rng& rng, int max_tries = 100000) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < max_tries; ++t) {
      Vec x(lo.size());
      for (Eigen::Index i = 0; i < lo.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * u(rng);
      wrap_state(x, wrap);
      if (contains(x, 0.0)) return x;
    }
    throw PreconditionError("region rejection sampler found no interior point");
  }

  nlohmann::json describe() const {
    nlohmann::json j;
    j["lo"] = to_std(lo);
    j["hi"] = to_std(hi);
    j["wrap"] = wrap;
    j["grid_density"] = grid_density;
    j["effective_density"] = effective_density();
    if (shape) j["shape"] = {{"kind", shape->kind}, {"params", shape->params}};
    return j;
  }

 private:
  std::vector<double> axis_points(Eigen::Index i, int count) const {
    std::vector<double> v;
    if (full_circle(i)) {
      for (int k = 0; k < count; ++k) v.push_back(wrap_angle(lo[i] + kTwoPi * k / count));
    } else {
      for (int k = 0; k < count; ++k) v.push_back(lo[i] + (hi[i] - lo[i]) * k / (count - 1));
    }
    return v;
  }

  static std::vector<Vec> cartesian(const std::vector<std::vector<double>>& axes) {
    const auto n = axes.size();
    std::vector<Vec> pts;
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      Vec p(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) p[static_cast<Eigen::Index>(i)] = axes[i][idx[i]];
      pts.push_back(p);
      std::size_t k = 0;
      for (; k < n; ++k) {
        if (++idx[k] < axes[k].size()) break;
        idx[k] = 0;
      }
      if (k == n) return pts;
    }
  }

  std::vector<Vec> tensor_grid(int d) const {
    const int n = dim();
    std::vector<std::vector<double>> axes;
    for (int i = 0; i < n; ++i) axes.push_back(axis_points(i, d));
    return cartesian(axes);
  }

  std::vector<Vec> face_grid(int axis, double value, int per_axis) const {
    const int n = dim();
    if (n == 1) {
      Vec p(1);
      p[0] = value;
      return {p};
    }
    std::vector<std::vector<double>> axes;
    for (int i = 0; i < n; ++i) {
      if (i == axis) axes.push_back({value});
      else axes.push_back(axis_points(i, per_axis));
    }
    return cartesian(axes);
  }
};

// ---------------------------------------------------------------------------
// Shapes used by the model zoo.
// ---------------------------------------------------------------------------

/// Smallest arc of the circle containing every phase.
inline double circular_spread(const Vec& theta) {
  const auto n = theta.size();
  if (n < 2) return 0.0;
  std::vector<double> a(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = std::fmod(theta[i], kTwoPi);
    if (s < 0) s += kTwoPi;
    a[static_cast<std::size_t>(i)] = s;
  }
  std::sort(a.begin(), a.end());
  double largest_gap = a.front() + kTwoPi - a.back();
  for (std::size_t i = 1; i < a.size(); ++i) largest_gap = std::max(largest_gap, a[i] - a[i - 1]);
  return kTwoPi - largest_gap;
}

/// Phases on the n-torus whose circular spread is at most `max_gap`
/// (every pairwise shortest-arc gap is then <= max_gap as well).
inline CompactRegion max_gap_region(int n, double max_gap, int density = 15, std::uint64_t seed = 7) {
  if (n < 2) throw PreconditionError("gap region needs at least two phases");
  if (!(max_gap > 0 && max_gap < kPi)) throw PreconditionError("max_gap must lie in (0, pi)");
  CompactRegion r(Vec::Constant(n, -kPi), Vec::Constant(n, kPi), std::vector<bool>(static_cast<std::size_t>(n), true),
                  density);
  RegionShape s;
  s.kind = "max_gap";
  s.params = {{"n", n}, {"max_gap", max_gap}, {"seed", seed}};
  s.margin = [max_gap](const Vec& x) { return max_gap - circular_spread(x); };
  auto draw = [n, max_gap, seed](int count, bool on_boundary, std::uint64_t salt) {
    std::mt19937_64 rng(seed ^ salt);
    std::uniform_real_distribution<double> center(-kPi, kPi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      Vec off(n);
      for (int i = 0; i < n; ++i) off[i] = unit(rng);
      double lo = off.minCoeff(), hi = off.maxCoeff();
      double spread = on_boundary ? max_gap : max_gap * unit(rng);
      Vec p(n);
      const double c = center(rng);
      for (int i = 0; i < n; ++i) p[i] = wrap_angle(c + spread * ((off[i] - lo) / (hi - lo) - 0.5));
      pts.push_back(p);
    }
    return pts;
  };
  s.interior = [draw](int density) { return draw(4 * density * density, false, 0x9e3779b97f4a7c15ULL); };
  s.boundary = [draw](int density) { return draw(4 * density * density, true, 0xc2b2ae3d27d4eb4fULL); };
  r.shape = std::move(s);
  return r;
}

/// Band { |x[value_axis] - center(x[param_axis])| <= half_width } around a curve
/// over a full-circle axis. Used for cylinder bands that follow a rotation.
inline CompactRegion tube_region(std::function<double(double)> center, double half_width, double v_lo, double v_hi,
                                 int density = 15) {
  Vec lo(2), hi(2);
  lo << -kPi, v_lo;
  hi << kPi, v_hi;
  CompactRegion r(lo, hi, {true, false}, density);
  RegionShape s;
  s.kind = "tube";
  s.params = {{"half_width", half_width}};
  s.margin = [center, half_width](const Vec& x) { return half_width - std::abs(x[1] - center(x[0])); };
  s.interior = [center, half_width](int d) {
    std::vector<Vec> pts;
    for (int i = 0; i < 2 * d; ++i) {
      const double th = wrap_angle(-kPi + kTwoPi * i / (2 * d));
      for (int j = 0; j < d; ++j) {
        Vec p(2);
        p << th, center(th) - half_width + 2.0 * half_width * j / (d - 1);
        pts.push_back(p);
      }
    }
    return pts;
  };
  s.boundary = [center, half_width](int d) {
    std::vector<Vec> pts;
    for (int i = 0; i < 4 * d; ++i) {
      const double th = wrap_angle(-kPi + kTwoPi * i / (4 * d));
      for (double sgn : {-1.0, 1.0}) {
        Vec p(2);
        p << th, center(th) + sgn * half_width;
        pts.push_back(p);
      }
    }
    return pts;
  };
  r.shape = std::move(s);
  return r;
}

}  // namespace dpos
