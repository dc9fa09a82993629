#pragma once

#include "synthset/error.hpp"
#include "synthset/raster.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace synthset {

template <typename Scalar, int Channels>
using ChannelPlanes = std::array<Plane<Scalar>, Channels>;

/// Discrete seamless-cloning system over a window. For every p in the domain:
///
///   4 f_p - sum_{q in N(p) and domain} f_q = sum_{q in N(p) and boundary} f*_q + sum_q v_pq
///
/// with v_pq = g_p - g_q the source differences along each of the four edges.
template <typename Scalar, int Channels>
struct PoissonSystem {
  using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, Channels>;

  Eigen::Index width = 0;  // window size
  Eigen::Index height = 0;
  std::vector<Eigen::Vector2i> domain;    // (x, y), raster order
  std::vector<Eigen::Vector2i> boundary;  // (x, y), raster order
  Eigen::Matrix<int, Eigen::Dynamic, 4> neighbors;  // domain index, -1 when on the boundary
  Values dirichlet;  // f* per boundary pixel
  Values guidance;   // sum_q v_pq per domain pixel
  Values rhs;        // boundary term + guidance term
  Values initial;    // starting iterate

  Eigen::Index size() const { return static_cast<Eigen::Index>(domain.size()); }
};

template <typename Scalar, int Channels>
struct PoissonSolution {
  using Values = typename PoissonSystem<Scalar, Channels>::Values;

  Values values;     // clamped to [0, 1]
  Values unclamped;  // best iterate before clamping
  Scalar residual = 0;  // max-norm residual of `unclamped`
  int iterations = 0;
  bool converged = false;
};

namespace detail {
inline constexpr int kNeighbourOffsets[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
}

/// Assembles the system for `domain` over a window. `target` supplies the Dirichlet values and
/// `source` the guidance. Throws DataError when a domain pixel touches the window edge.
/// The initial iterate is the source shifted by the mean boundary offset per channel.
template <typename Scalar, int Channels>
PoissonSystem<Scalar, Channels> assemble_poisson_system(const Mask& domain,
                                                        const ChannelPlanes<Scalar, Channels>& target,
                                                        const ChannelPlanes<Scalar, Channels>& source) {
  using System = PoissonSystem<Scalar, Channels>;
  System sys;
  sys.height = domain.rows();
  sys.width = domain.cols();

  Plane<int> index = Plane<int>::Constant(sys.height, sys.width, -1);
  for (Eigen::Index y = 0; y < sys.height; ++y)
    for (Eigen::Index x = 0; x < sys.width; ++x) {
      if (!domain(y, x)) continue;
      if (x == 0 || y == 0 || x == sys.width - 1 || y == sys.height - 1)
        throw DataError("poisson domain touches the window edge");
      index(y, x) = static_cast<int>(sys.domain.size());
      sys.domain.emplace_back(static_cast<int>(x), static_cast<int>(y));
    }

  Plane<int> boundary_index = Plane<int>::Constant(sys.height, sys.width, -1);
  for (Eigen::Index y = 0; y < sys.height; ++y)
    for (Eigen::Index x = 0; x < sys.width; ++x) {
      if (domain(y, x)) continue;
      bool adjacent = false;
      for (const auto& o : detail::kNeighbourOffsets) {
        const Eigen::Index nx = x + o[0], ny = y + o[1];
        if (nx >= 0 && ny >= 0 && nx < sys.width && ny < sys.height && domain(ny, nx)) adjacent = true;
      }
      if (!adjacent) continue;
      boundary_index(y, x) = static_cast<int>(sys.boundary.size());
      sys.boundary.emplace_back(static_cast<int>(x), static_cast<int>(y));
    }

  const Eigen::Index n = sys.size();
  sys.neighbors.resize(n, 4);
  sys.dirichlet.resize(static_cast<Eigen::Index>(sys.boundary.size()), Channels);
  sys.guidance.setZero(n, Channels);
  sys.rhs.setZero(n, Channels);
  sys.initial.resize(n, Channels);

  for (std::size_t b = 0; b < sys.boundary.size(); ++b)
    for (int c = 0; c < Channels; ++c)
      sys.dirichlet(static_cast<Eigen::Index>(b), c) = target[c](sys.boundary[b].y(), sys.boundary[b].x());

  Eigen::Matrix<Scalar, 1, Channels> offset = Eigen::Matrix<Scalar, 1, Channels>::Zero();
  for (std::size_t b = 0; b < sys.boundary.size(); ++b)
    for (int c = 0; c < Channels; ++c)
      offset(c) += target[c](sys.boundary[b].y(), sys.boundary[b].x()) -
                   source[c](sys.boundary[b].y(), sys.boundary[b].x());
  if (!sys.boundary.empty()) offset /= static_cast<Scalar>(sys.boundary.size());

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2i p = sys.domain[static_cast<std::size_t>(i)];
    for (int k = 0; k < 4; ++k) {
      const int qx = p.x() + detail::kNeighbourOffsets[k][0];
      const int qy = p.y() + detail::kNeighbourOffsets[k][1];
      sys.neighbors(i, k) = index(qy, qx);
      for (int c = 0; c < Channels; ++c) {
        sys.guidance(i, c) += source[c](p.y(), p.x()) - source[c](qy, qx);
        if (index(qy, qx) < 0) sys.rhs(i, c) += target[c](qy, qx);
      }
    }
    for (int c = 0; c < Channels; ++c) sys.initial(i, c) = source[c](p.y(), p.x()) + offset(c);
  }
  sys.rhs += sys.guidance;
  return sys;
}

/// Max-norm residual of the assembled equations at `values`.
template <typename Scalar, int Channels>
Scalar poisson_residual(const PoissonSystem<Scalar, Channels>& sys,
                        const typename PoissonSystem<Scalar, Channels>::Values& values) {
  Scalar worst = 0;
  for (Eigen::Index i = 0; i < sys.size(); ++i)
    for (int c = 0; c < Channels; ++c) {
      Scalar r = sys.rhs(i, c) - 4 * values(i, c);
      for (int k = 0; k < 4; ++k)
        if (const int q = sys.neighbors(i, k); q >= 0) r += values(q, c);
      worst = std::max(worst, std::abs(r));
    }
  return worst;
}

/// Gauss-Seidel in fixed raster order until the max-norm residual is at most `tolerance` or
/// `max_iters` sweeps have run. The iterate with the lowest residual seen is returned, so the
/// reported residual never grows with a larger sweep budget.
template <typename Scalar, int Channels>
PoissonSolution<Scalar, Channels> poisson_solve(const PoissonSystem<Scalar, Channels>& sys,
                                                Scalar tolerance = Scalar(1e-4),
                                                int max_iters = 10000) {
  PoissonSolution<Scalar, Channels> out;
  auto current = sys.initial;
  out.unclamped = current;
  out.residual = poisson_residual(sys, current);
  const Eigen::Index n = sys.size();

  while (out.residual > tolerance && out.iterations < max_iters) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < Channels; ++c) {
        Scalar acc = sys.rhs(i, c);
        for (int k = 0; k < 4; ++k)
          if (const int q = sys.neighbors(i, k); q >= 0) acc += current(q, c);
        current(i, c) = acc / Scalar(4);
      }
    }
    ++out.iterations;
    const Scalar r = poisson_residual(sys, current);
    if (r < out.residual) {
      out.residual = r;
      out.unclamped = current;
    }
  }
  out.converged = out.residual <= tolerance;
  out.values = out.unclamped.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  return out;
}

/// Recomputes the discrete equation residual from raw planes: `solution` holds the solved
/// values at domain pixels (other entries are ignored and taken from `target`).
template <typename Scalar, int Channels>
Scalar poisson_equation_residual(const Mask& domain, const ChannelPlanes<Scalar, Channels>& target,
                                 const ChannelPlanes<Scalar, Channels>& source,
                                 const ChannelPlanes<Scalar, Channels>& solution) {
  Scalar worst = 0;
  for (Eigen::Index y = 1; y + 1 < domain.rows(); ++y)
    for (Eigen::Index x = 1; x + 1 < domain.cols(); ++x) {
      if (!domain(y, x)) continue;
      for (int c = 0; c < Channels; ++c) {
        const auto f = [&](Eigen::Index yy, Eigen::Index xx) {
          return domain(yy, xx) ? solution[c](yy, xx) : target[c](yy, xx);
        };
        const Scalar lap = 4 * f(y, x) - f(y - 1, x) - f(y + 1, x) - f(y, x - 1) - f(y, x + 1);
        const Scalar div = 4 * source[c](y, x) - source[c](y - 1, x) - source[c](y + 1, x) -
                           source[c](y, x - 1) - source[c](y, x + 1);
        worst = std::max(worst, std::abs(lap - div));
      }
    }
  return worst;
}

}  // namespace synthset
