// Copyright 2026, The hmmrange Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * \file localizer.hpp
 * \brief Presence imaging from per-link delay evidence, and a least-squares
 *        ellipse-intersection baseline.
 *
 * Every pixel z_i maps, for link m, to the bin k = ceil(excess(z_i) / d_k).
 * The soft image uses the posterior increment A = (alpha_k - alpha_{k-1})^+
 * (alpha_0 = 0) at that bin; the hard image uses an indicator of
 * k == k_hat. Links are fused per pixel with a p-norm, the image is smoothed
 * by a Gaussian filter and the brightest pixel is the location estimate.
 */

#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "hmmrange/common.hpp"
#include "hmmrange/geometry.hpp"
#include "hmmrange/hmm.hpp"

namespace hmmrange {

/// Row-major grid of square pixels; pixel (ix, iy) has index iy * nx + ix.
struct PixelGrid {
  double x0 = 0.0;
  double y0 = 0.0;
  double pitch = 0.1;
  std::size_t nx = 0;
  std::size_t ny = 0;

  static PixelGrid covering(const Rect &area, double pitch) {
    require(pitch > 0.0, "pixel pitch must be positive");
    require(area.valid(), "grid area must have positive extent");
    PixelGrid g;
    g.x0 = area.x0;
    g.y0 = area.y0;
    g.pitch = pitch;
    g.nx = static_cast<std::size_t>(std::ceil(area.width() / pitch - 1e-9));
    g.ny = static_cast<std::size_t>(std::ceil(area.height() / pitch - 1e-9));
    return g;
  }

  std::size_t size() const { return nx * ny; }
  Point center(std::size_t i) const {
    return {x0 + (static_cast<double>(i % nx) + 0.5) * pitch, y0 + (static_cast<double>(i / nx) + 0.5) * pitch};
  }
};

struct PresenceImage {
  std::vector<double> values;
  PixelGrid grid;
  double p_norm = 0.2;
  double smoothing_sigma = 0.2;  // m
  /// Fewer than three links contributed evidence; the location is ambiguous.
  bool underdetermined = false;
};

struct ImageOptions {
  double p = 0.2;
  double smoothing_sigma = 0.2;
  /// Count links with nonzero evidence instead of taking a p-norm.
  bool count_nonzero = false;
};

struct BinMapping {
  std::size_t bin = 1;
  bool out_of_window = false;
};

/// Bin of pixel z for link (tx, rx), clamped to [1, n]; bins past n are flagged.
inline BinMapping pixel_bin_map(Point tx, Point rx, Point z, double bin_distance, std::size_t n) {
  const std::size_t k = excess_to_bin(excess_path(tx, z, rx), bin_distance);
  if (k > n) return {n, true};
  return {k, false};
}

struct LinkPosterior {
  PosteriorTrack track;
  Point tx;
  Point rx;
  double bin_width = 1e-9;
};

struct LinkEstimate {
  std::optional<std::size_t> k_hat;
  Point tx;
  Point rx;
  double bin_width = 1e-9;
  std::size_t bin_count = 0;
};

namespace detail {

inline double fuse(const std::vector<double> &evidence, const ImageOptions &options) {
  if (options.count_nonzero) {
    double c = 0.0;
    for (double a : evidence) c += a > 0.0 ? 1.0 : 0.0;
    return c;
  }
  double acc = 0.0;
  for (double a : evidence)
    if (a > 0.0) acc += std::pow(a, options.p);
  return acc > 0.0 ? std::pow(acc, 1.0 / options.p) : 0.0;
}

template <typename EvidenceFn>
PresenceImage assemble(std::size_t links, const PixelGrid &grid, const ImageOptions &options,
                       EvidenceFn evidence_at) {
  require(options.count_nonzero || options.p > 0.0, "p must be positive");
  PresenceImage img;
  img.grid = grid;
  img.p_norm = options.p;
  img.smoothing_sigma = options.smoothing_sigma;
  img.values.assign(grid.size(), 0.0);
  std::vector<double> evidence(links);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point z = grid.center(i);
    for (std::size_t m = 0; m < links; ++m) evidence[m] = evidence_at(m, z);
    img.values[i] = fuse(evidence, options);
  }
  return img;
}

}  // namespace detail

/// p-norm over links of the positive posterior increment at each pixel's bin.
inline PresenceImage presence_image_soft(const std::vector<LinkPosterior> &posts,
                                         const PixelGrid &grid, const ImageOptions &options = {}) {
  for (const auto &p : posts)
    require(std::abs(p.bin_width - posts.front().bin_width) <= 1e-15 * posts.front().bin_width,
            "all links must share one bin width");
  auto img = detail::assemble(posts.size(), grid, options, [&](std::size_t m, Point z) {
    const auto &alpha = posts[m].track.alpha;
    if (alpha.empty()) return 0.0;
    const auto map = pixel_bin_map(posts[m].tx, posts[m].rx, z, kSpeedOfLight * posts[m].bin_width, alpha.size());
    if (map.out_of_window) return 0.0;
    const double prev = map.bin >= 2 ? alpha[map.bin - 2] : 0.0;
    return std::max(alpha[map.bin - 1] - prev, 0.0);
  });
  img.underdetermined = posts.size() < 3;
  return img;
}

/// Indicator image: link m lights the pixels whose bin equals its k_hat.
inline PresenceImage presence_image_hard(const std::vector<LinkEstimate> &estimates,
                                         const PixelGrid &grid, const ImageOptions &options = {}) {
  std::size_t detections = 0;
  for (const auto &e : estimates) detections += e.k_hat ? 1 : 0;
  auto img = detail::assemble(estimates.size(), grid, options, [&](std::size_t m, Point z) {
    const auto &e = estimates[m];
    if (!e.k_hat) return 0.0;
    const auto map = pixel_bin_map(e.tx, e.rx, z, kSpeedOfLight * e.bin_width, e.bin_count);
    return !map.out_of_window && map.bin == *e.k_hat ? 1.0 : 0.0;
  });
  img.underdetermined = detections < 3;
  return img;
}

/// Separable Gaussian filter with reflective (edge-duplicating) borders.
inline std::vector<double> gaussian_blur(const std::vector<double> &values, const PixelGrid &grid,
                                         double sigma) {
  if (sigma <= 0.0) return values;
  const double s = sigma / grid.pitch;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * s));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
    const double w = std::exp(-0.5 * static_cast<double>(d * d) / (s * s));
    kernel[static_cast<std::size_t>(d + radius)] = w;
    total += w;
  }
  for (auto &w : kernel) w /= total;

  auto reflect = [](std::ptrdiff_t i, std::ptrdiff_t len) {
    while (i < 0 || i >= len) i = i < 0 ? -i - 1 : 2 * len - i - 1;
    return i;
  };
  const auto nx = static_cast<std::ptrdiff_t>(grid.nx);
  const auto ny = static_cast<std::ptrdiff_t>(grid.ny);
  std::vector<double> tmp(values.size(), 0.0), out(values.size(), 0.0);
  for (std::ptrdiff_t y = 0; y < ny; ++y)
    for (std::ptrdiff_t x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d)
        acc += kernel[static_cast<std::size_t>(d + radius)] * values[static_cast<std::size_t>(y * nx + reflect(x + d, nx))];
      tmp[static_cast<std::size_t>(y * nx + x)] = acc;
    }
  for (std::ptrdiff_t y = 0; y < ny; ++y)
    for (std::ptrdiff_t x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d)
        acc += kernel[static_cast<std::size_t>(d + radius)] * tmp[static_cast<std::size_t>(reflect(y + d, ny) * nx + x)];
      out[static_cast<std::size_t>(y * nx + x)] = acc;
    }
  return out;
}

/// Center of the brightest pixel after smoothing; ties go to the lowest index.
inline Point locate(const PresenceImage &image) {
  require(image.values.size() == image.grid.size(), "image does not match its grid");
  bool any = false;
  for (double v : image.values) any = any || v > 0.0;
  if (!any) throw NoEstimateError("presence image is empty; no location estimate");
  const auto blurred = gaussian_blur(image.values, image.grid, image.smoothing_sigma);
  std::size_t best = 0;
  for (std::size_t i = 1; i < blurred.size(); ++i)
    if (blurred[i] > blurred[best]) best = i;
  return image.grid.center(best);
}

/// Image as CSV rows x,y,value.
inline void write_image_csv(std::ostream &os, const PresenceImage &image) {
  os << "x,y,value\n";
  os.precision(10);
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    const Point c = image.grid.center(i);
    os << c.x << ',' << c.y << ',' << image.values[i] << '\n';
  }
}

/// Image as an ny x nx matrix scaled to [0, 1], first row at the lowest y.
inline void write_image_matrix(std::ostream &os, const PresenceImage &image) {
  double peak = 0.0;
  for (double v : image.values) peak = std::max(peak, v);
  os.precision(6);
  for (std::size_t y = 0; y < image.grid.ny; ++y) {
    for (std::size_t x = 0; x < image.grid.nx; ++x) {
      const double v = image.values[y * image.grid.nx + x];
      os << (x ? "," : "") << (peak > 0.0 ? v / peak : 0.0);
    }
    os << '\n';
  }
}

struct SlaOptions {
  std::size_t max_iters = 200;
  double step_tol = 1e-9;
  /// Polish the linear solution with Gauss-Newton on the ellipse residuals.
  bool refine = false;
};

struct SlaResult {
  Point position;
  bool converged = false;
  std::size_t iterations = 0;
  /// False when the linear system was underdetermined and only Gauss-Newton ran.
  bool linear = true;
};

namespace detail {

struct RangeEq {
  Point t, r;
  double range;
};

inline double ellipse_cost(const std::vector<RangeEq> &eqs, Point q) {
  double c = 0.0;
  for (const auto &e : eqs) {
    const double f = distance(e.t, q) + distance(q, e.r) - e.range;
    c += f * f;
  }
  return c;
}

/// Damped Gauss-Newton on |t - z| + |z - r| - range.
inline SlaResult ellipse_gauss_newton(const std::vector<RangeEq> &eqs, Point z, const SlaOptions &options) {
  auto unit = [](Point from, Point to) {
    const double d = distance(from, to);
    return d > 1e-12 ? Point{(to.x - from.x) / d, (to.y - from.y) / d} : Point{0.0, 0.0};
  };
  SlaResult res;
  double cost = ellipse_cost(eqs, z);
  double damping = 1e-3;
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    res.iterations = it;
    double a11 = 0.0, a12 = 0.0, a22 = 0.0, g1 = 0.0, g2 = 0.0;
    for (const auto &e : eqs) {
      const double f = distance(e.t, z) + distance(z, e.r) - e.range;
      const Point u = unit(e.t, z);
      const Point v = unit(e.r, z);
      const double jx = u.x + v.x, jy = u.y + v.y;
      a11 += jx * jx;
      a12 += jx * jy;
      a22 += jy * jy;
      g1 += jx * f;
      g2 += jy * f;
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 30 && !stepped; ++attempt) {
      const double b11 = a11 + damping * (a11 + 1e-9), b22 = a22 + damping * (a22 + 1e-9);
      const double det = b11 * b22 - a12 * a12;
      if (!(std::abs(det) > 0.0)) {
        damping *= 10.0;
        continue;
      }
      const Point step{-(b22 * g1 - a12 * g2) / det, -(b11 * g2 - a12 * g1) / det};
      const Point cand{z.x + step.x, z.y + step.y};
      const double c = ellipse_cost(eqs, cand);
      if (c <= cost) {
        const double size = std::hypot(step.x, step.y);
        z = cand;
        cost = c;
        damping = std::max(damping / 3.0, 1e-12);
        stepped = true;
        if (size < options.step_tol) {
          res.converged = true;
          res.position = z;
          return res;
        }
      } else {
        damping *= 4.0;
      }
    }
    if (!stepped) {
      res.converged = true;
      break;
    }
  }
  res.position = z;
  return res;
}

}  // namespace detail

/// Semi-linear least-squares localization from range-only estimates.
///
/// Each detected link gives |t - z| + |z - r| = |t - r| + k_hat d_k. With
/// d_t = |z - t| treated as a free unknown per transmitter, squaring yields
/// the linear system 2 (t - r) . z + 2 R d_t = R^2 + |t|^2 - |r|^2, solved
/// for (z, d_t) in the least-squares sense. An underdetermined system falls
/// back to Gauss-Newton from the radio centroid.
inline SlaResult sla_locate(const std::vector<LinkEstimate> &estimates, const SlaOptions &options = {}) {
  std::vector<detail::RangeEq> eqs;
  std::vector<Point> radios;
  std::vector<Point> transmitters;
  auto index_of = [](std::vector<Point> &set, Point p) {
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set[i] == p) return i;
    set.push_back(p);
    return set.size() - 1;
  };
  std::vector<std::size_t> tx_index;
  for (const auto &e : estimates) {
    if (!e.k_hat) continue;
    eqs.push_back({e.tx, e.rx, distance(e.tx, e.rx) + static_cast<double>(*e.k_hat) * kSpeedOfLight * e.bin_width});
    index_of(radios, e.tx);
    index_of(radios, e.rx);
    tx_index.push_back(index_of(transmitters, e.tx));
  }
  require(eqs.size() >= 3, "least-squares localization needs at least 3 detections");

  const std::size_t unknowns = 2 + transmitters.size();
  if (eqs.size() >= unknowns) {
    Eigen::MatrixXd A(eqs.size(), unknowns);
    Eigen::VectorXd g(eqs.size());
    A.setZero();
    for (std::size_t m = 0; m < eqs.size(); ++m) {
      const auto &e = eqs[m];
      A(m, 0) = 2.0 * (e.t.x - e.r.x);
      A(m, 1) = 2.0 * (e.t.y - e.r.y);
      A(m, 2 + tx_index[m]) = 2.0 * e.range;
      g(m) = e.range * e.range + e.t.x * e.t.x + e.t.y * e.t.y - e.r.x * e.r.x - e.r.y * e.r.y;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() == static_cast<Eigen::Index>(unknowns)) {
      const Eigen::VectorXd theta = qr.solve(g);
      const Point z{theta(0), theta(1)};
      if (std::isfinite(z.x) && std::isfinite(z.y)) {
        if (options.refine) return detail::ellipse_gauss_newton(eqs, z, options);
        SlaResult res;
        res.position = z;
        res.converged = true;
        res.iterations = 1;
        return res;
      }
    }
  }

  Point z{0.0, 0.0};
  for (const auto &p : radios) {
    z.x += p.x / static_cast<double>(radios.size());
    z.y += p.y / static_cast<double>(radios.size());
  }
  SlaResult res = detail::ellipse_gauss_newton(eqs, z, options);
  res.linear = false;
  return res;
}

}  // namespace hmmrange
