#pragma once

// 7-point finite-difference Laplacian on each level, restricted to a region,
// together with the interface sub-stencil split, grid transfers and the
// hybrid Gauss-Seidel smoother.

#include "ftmg/grid_hierarchy.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ftmg {

/// Unknown sets an operator acts on. Everything outside the set is read as
/// frozen data and never written.
enum class RegionKind : std::uint8_t {
  Full,              ///< all non-Dirichlet nodes
  FaultyDirichlet,   ///< faulty nodes, interface frozen
  HealthyDirichlet,  ///< healthy nodes, interface frozen
  HealthyNeumann,    ///< healthy + interface nodes, interface rows use the healthy sub-stencil
};

const char* to_string(RegionKind kind);

/// Neighbor slots of a stencil row: -x, +x, -y, +y, -z, +z.
using Quarters = std::array<std::uint8_t, 6>;

/// Split of one interface row into the parts assembled from the healthy and
/// the faulty side. Every coupling is measured in quarters of the dual cell
/// face it crosses, so healthy[k] + faulty[k] == 4 for every slot.
struct SubStencilRow {
  std::int32_t node = 0;
  Quarters healthy{};
  Quarters faulty{};
};

struct SubStencilSplit {
  int level = 0;
  std::vector<SubStencilRow> rows;  ///< one per interface node, lexicographic
};

SubStencilSplit sub_stencils(const GridHierarchy& h, const RegionMask& mask, int level);

/// Coefficients of a (partial) stencil row: the diagonal and the magnitudes
/// of the six off-diagonal couplings (the matrix entries are -off[k]).
struct StencilRow {
  double diag = 0.0;
  std::array<double, 6> off{};

  bool operator==(const StencilRow&) const = default;
};

StencilRow row_coefficients(const LevelGrid& g, const Quarters& quarters);
StencilRow full_row(const LevelGrid& g);

class StencilOperator {
 public:
  StencilOperator(const GridHierarchy& h, int level, RegionKind kind = RegionKind::Full,
                  const RegionMask* mask = nullptr);

  const LevelGrid& grid() const { return *grid_; }
  int level() const { return grid_->level; }
  RegionKind kind() const { return kind_; }

  /// Active nodes in hybrid smoothing order.
  std::span<const std::int32_t> active() const { return active_; }
  bool is_active(std::int32_t n) const { return flag_[n] != 0; }

  double diag(std::size_t p) const { return special_[p] < 0 ? full_.diag : rows_[special_[p]].diag; }

  /// (A u) at active position p.
  double apply_row(std::size_t p, const double* u) const {
    const std::int32_t n = active_[p];
    const std::ptrdiff_t sx = stride_[0], sy = stride_[1], sz = stride_[2];
    if (special_[p] < 0) {
      return full_.diag * u[n] - full_.off[0] * (u[n - sx] + u[n + sx]) -
             full_.off[2] * (u[n - sy] + u[n + sy]) - full_.off[4] * (u[n - sz] + u[n + sz]);
    }
    // Cut couplings are skipped, not multiplied by zero: the other side may
    // hold garbage.
    const StencilRow& r = rows_[special_[p]];
    const std::ptrdiff_t step[6] = {-sx, sx, -sy, sy, -sz, sz};
    double v = r.diag * u[n];
    for (int k = 0; k < 6; ++k) {
      if (r.off[k] != 0.0) v -= r.off[k] * u[n + step[k]];
    }
    return v;
  }

  /// Row coefficients used at active position p.
  StencilRow row(std::size_t p) const { return special_[p] < 0 ? full_ : rows_[special_[p]]; }

 private:
  const LevelGrid* grid_;
  RegionKind kind_;
  std::array<std::ptrdiff_t, 3> stride_{};
  StencilRow full_;
  std::vector<std::int32_t> active_;
  std::vector<std::int32_t> special_;
  std::vector<StencilRow> rows_;
  std::vector<std::uint8_t> flag_;
};

/// v = A u on the active nodes; other entries of v untouched.
void apply(const StencilOperator& A, std::span<const double> u, std::span<double> v);

/// r = f - A u on the active nodes; other entries of r untouched.
void residual(const StencilOperator& A, std::span<const double> u, std::span<const double> f,
              std::span<double> r);

/// Euclidean norm of r over the active nodes.
double active_norm(const StencilOperator& A, std::span<const double> r);

/// Gauss-Seidel in container-group order: volume masters first, then face,
/// edge and vertex masters. Containers of one group are not coupled by the
/// 7-point stencil, so the sweep is Gauss-Seidel inside a container and
/// Jacobi across containers with ghosts refreshed between groups. Inactive
/// nodes are never written.
void smooth_hybrid_gs(const StencilOperator& A, std::span<double> u, std::span<const double> f,
                      int sweeps);

/// Trilinear interpolation from level `coarse_level` to the next finer
/// level, written to every fine node.
void prolongate(const GridHierarchy& h, int coarse_level, std::span<const double> coarse,
                std::span<double> fine);

/// Full weighting, R = P^T / 8, written to every coarse node.
void restrict_full_weighting(const GridHierarchy& h, int fine_level, std::span<const double> fine,
                             std::span<double> coarse);

/// Declared scaling between the transfers: <P uc, vf> == kTransferScaling * <uc, R vf>.
inline constexpr double kTransferScaling = 8.0;

/// Row-major dense matrix over the active nodes of an operator, in ascending
/// node order. Test oracle only.
struct DenseMatrix {
  std::vector<std::int32_t> unknowns;
  std::size_t n = 0;
  std::vector<double> a;

  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline constexpr std::size_t kDenseLimit = 20000;

/// Throws InvalidArgument above kDenseLimit unknowns.
DenseMatrix assemble_dense(const StencilOperator& A);

}  // namespace ftmg
