#pragma once

// Multigrid cycles, Jacobi-preconditioned CG and the stopping-criterion
// driver. Every solver runs either on the full domain or on one of the
// recovery regions (see RegionKind).

#include "ftmg/discrete_operators.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ftmg {

enum class CycleKind : std::uint8_t { V, W, F };

const char* to_string(CycleKind kind);

struct KrylovSpec {
  bool jacobi = true;
  double rel_tol = 1e-10;
  int max_iter = 1000;
};

struct CycleSpec {
  CycleKind kind = CycleKind::V;
  int pre_smooth = 3;
  int post_smooth = 3;
  KrylovSpec coarse;
};

struct StoppingRule {
  double rel_residual_tol = 1e-13;
  int max_cycles = 100;
};

struct PcgResult {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

/// Jacobi-preconditioned CG on the active nodes of A, starting from u.
/// rel_tol == 0 runs exactly max_iter iterations (unless the residual
/// vanishes). Throws Breakdown on nonpositive curvature.
PcgResult pcg(const StencilOperator& A, std::span<double> u, std::span<const double> f,
              const KrylovSpec& spec);

/// n Gauss-Seidel sweeps, nothing else.
void smooth_only(const StencilOperator& A, std::span<double> u, std::span<const double> f, int n);

/// Geometric multigrid on one region of the hierarchy. Coarse levels are
/// rediscretized geometrically on the same region; the coarsest level is
/// solved with Jacobi-PCG.
class MultigridSolver {
 public:
  MultigridSolver(const GridHierarchy& h, const CycleSpec& spec,
                  RegionKind kind = RegionKind::Full, const RegionMask* mask = nullptr);

  /// One cycle on the finest level. For HealthyNeumann the interface rows
  /// take -flux[n] as right-hand side; the flux is mandatory there.
  void cycle(std::span<double> u, std::span<const double> f, std::span<const double> flux = {});

  const StencilOperator& op(int level) const { return ops_.at(level); }
  const StencilOperator& finest() const { return ops_.back(); }
  const CycleSpec& spec() const { return spec_; }
  RegionKind kind() const { return kind_; }

  /// Smoother node updates plus coarse PCG node updates since construction.
  std::uint64_t work() const { return work_; }
  std::uint64_t coarse_solves() const { return coarse_solves_; }

  /// Zeroes every workspace entry that belongs to the faulty region.
  void discard(const RegionMask& mask);

 private:
  void visit(int level, CycleKind kind, double* x, const double* b);

  const GridHierarchy* h_;
  CycleSpec spec_;
  RegionKind kind_;
  std::vector<StencilOperator> ops_;
  std::vector<std::vector<double>> x_;  // coarse corrections
  std::vector<std::vector<double>> b_;  // coarse right-hand sides
  std::vector<std::vector<double>> r_;  // residuals, zero off the region
  std::vector<std::vector<double>> e_;  // prolongated corrections
  std::vector<double> rhs_;             // finest right-hand side with flux rows
  std::vector<std::int32_t> interface_;  // finest interface nodes (Neumann only)
  std::uint64_t work_ = 0;
  std::uint64_t coarse_solves_ = 0;
};

struct ResidualSplit {
  double total = 0.0;
  double healthy = std::numeric_limits<double>::quiet_NaN();
  double faulty = std::numeric_limits<double>::quiet_NaN();
  double interface = std::numeric_limits<double>::quiet_NaN();
};

/// Global residual f - A u and its norm restricted to the three regions of
/// the mask (NaN when no mask is given).
ResidualSplit residual_split(const StencilOperator& full, const RegionMask* mask,
                             std::span<const double> u, std::span<const double> f,
                             std::span<double> scratch);

struct TraceRow {
  int cycle = 0;
  double rel_residual = 0.0;
  double res_healthy = std::numeric_limits<double>::quiet_NaN();
  double res_faulty = std::numeric_limits<double>::quiet_NaN();
  double res_interface = std::numeric_limits<double>::quiet_NaN();
  double logical_time = 0.0;
  std::string phase;  ///< initial | cycle | fault | recovery | reconnect
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  double initial_residual = 0.0;
  int iterations = 0;  ///< accounted iterations when the tolerance was first met
  int global_cycles = 0;
  bool converged = false;
};

/// State shared with the per-cycle hook. The hook may modify u, advance
/// the accounted iteration counter and the logical time, and record rows.
struct CycleContext {
  int counter = 0;
  int global_cycles = 0;
  double rel_residual = 0.0;  ///< after the cycle that triggered the hook
  Rational logical_time{0};
  std::span<double> u;
  std::function<void(const std::string& phase)> record;
};

using CycleHook = std::function<void(CycleContext&)>;

struct SolveOptions {
  const RegionMask* trace_mask = nullptr;  ///< region split of the trace, optional
  CycleHook hook;                           ///< invoked after every global cycle
};

/// Global cycles until ||r||/||r0|| <= tol. Exceeding max_cycles is
/// reported through SolveTrace::converged, not thrown.
SolveTrace solve_to_tol(MultigridSolver& mg, std::span<double> u, std::span<const double> f,
                        const StoppingRule& stop, const SolveOptions& options = {});

}  // namespace ftmg
