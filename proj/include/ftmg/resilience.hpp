#pragma once

// Fault injection, the local / Dirichlet-Dirichlet / Dirichlet-Neumann
// recovery strategies, the logical-time model and the cycle-advantage metric.

#include "ftmg/solvers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace ftmg {

enum class Strategy : std::uint8_t { None, LR, DD, DN };
enum class LocalSolver : std::uint8_t { Vcycle, Wcycle, Fcycle, PCG, Smooth };

/// How recovery work enters k_faulty.
///  Global: every recovery adds n_I accounted iterations (ceil(n_F/eta) for
///          local recovery given by a direct n_F).
///  Table1: recovery is free, only global cycles count.
enum class Accounting : std::uint8_t { Global, Table1 };

const char* to_string(Strategy s);
const char* to_string(LocalSolver s);
const char* to_string(Accounting a);

struct FaultEvent {
  int after_cycle = 1;
  std::vector<int> subdomains;
};

struct RecoveryConfig {
  Strategy strategy = Strategy::None;
  LocalSolver local_solver = LocalSolver::Vcycle;
  int n_I = 0;
  Rational eta{1};
  std::optional<int> n_F_direct;  ///< local recovery only

  /// Throws InvalidArgument for inconsistent settings.
  void validate() const;
  /// ceil(eta * n_I) unless given directly; 0 for Strategy::None.
  int n_F() const;
  /// Accounted iterations charged per recovery under Accounting::Global.
  int accounted_units() const;
};

/// Elapsed time in units of one global multigrid cycle.
class LogicalClock {
 public:
  explicit LogicalClock(Rational start = Rational(0)) : elapsed_(start) {}
  void advance(const Rational& dt);
  const Rational& elapsed() const { return elapsed_; }

 private:
  Rational elapsed_;
};

enum class ProblemKind : std::uint8_t {
  Harmonic,      ///< f = 0, g = 1 + x^2 + y^2 - 2z^2 + xyz
  Manufactured,  ///< u = sin(pi x) sin(pi y) sin(pi z), g = 0
};

const char* to_string(ProblemKind k);

struct ProblemSpec {
  PartitionSpec grid{{3, 3, 3}, 2, 4};
  ProblemKind kind = ProblemKind::Harmonic;
  bool random_guess = false;  ///< uniform [-1,1) interior start instead of zero
  std::uint64_t seed = 0;
};

/// Poisson problem on the unit cube with analytic data that can be
/// regenerated after a fault.
class PoissonProblem {
 public:
  explicit PoissonProblem(const ProblemSpec& spec);

  const ProblemSpec& spec() const { return spec_; }
  const GridHierarchy& hierarchy() const { return h_; }

  double boundary(const std::array<double, 3>& x) const;
  double source(const std::array<double, 3>& x) const;
  /// Exact solution of the continuous problem.
  double exact(const std::array<double, 3>& x) const;

  /// Finest-level initial iterate (Dirichlet values set) and right-hand side.
  void initialize(std::span<double> u, std::span<double> f) const;

 private:
  ProblemSpec spec_;
  GridHierarchy h_;
};

/// Iterate, right-hand side and global solver of one job.
struct SolverState {
  SolverState(const PoissonProblem& problem, const CycleSpec& cycle);

  const PoissonProblem* problem;
  FieldVector u;
  std::vector<double> f;
  MultigridSolver mg;

  std::span<double> finest() { return u.values(problem->hierarchy().finest()); }
};

/// Destroys the faulty subdomains: volume data on every level, their ghost
/// layers and solver workspaces are zeroed, interface values are rebuilt
/// from surviving copies and the right-hand side and boundary data are
/// regenerated. Healthy data is not touched.
void inject_fault(SolverState& s, const RegionMask& mask);

/// Called after every healthy-side step of a decoupled recovery (1-based).
using StepObserver = std::function<void(int step)>;

/// Local recovery: n_F steps of the local solver on the faulty Dirichlet
/// problem, healthy side idle. Clock += n_F / eta.
void recover_local(SolverState& s, const RecoveryConfig& cfg, const RegionMask& mask,
                   LogicalClock& clock);

/// Dirichlet-Dirichlet recovery: faulty side n_F local steps, healthy side
/// n_I cycles with the interface frozen. Clock += n_I.
void recover_dd(SolverState& s, const RecoveryConfig& cfg, const RegionMask& mask,
                LogicalClock& clock, const StepObserver& observer = {});

/// lambda = -(healthy interface sub-stencil applied to u) on interface
/// nodes, zero elsewhere. Finest level.
std::vector<double> compute_neumann_flux(const GridHierarchy& h, const RegionMask& mask,
                                         const SubStencilSplit& split, std::span<const double> u);

/// Dirichlet-Neumann recovery with static flux computed at fault time.
/// Step j runs one healthy Neumann cycle, whose interface values are
/// pushed to the faulty side, then faulty batch j on the pushed values.
/// Clock += n_I.
void recover_dn(SolverState& s, const RecoveryConfig& cfg, const RegionMask& mask,
                LogicalClock& clock, const StepObserver& observer = {});

/// Size of faulty batch j (1-based) when n_F steps are spread over n_I pushes.
int dn_batch_size(int n_F, int n_I, int j);

/// (k_faulty - k_free) / k_F. Throws InvalidArgument for k_F < 1.
Rational cycle_advantage(int k_faulty, int k_free, int k_F);

struct JobSpec {
  std::vector<FaultEvent> schedule;
  RecoveryConfig recovery;
  StoppingRule stop;
  Accounting accounting = Accounting::Global;
  bool trace_regions = true;
};

struct RecoveryReport {
  int k_free = 0;
  int k_faulty = 0;
  int k_F = 0;  ///< first fault, 0 without faults
  Rational kappa{0};
  Rational logical_time{0};
  bool converged = false;
  SolveTrace baseline;
  SolveTrace faulty;
};

/// Fault-free solve from the problem's initial iterate.
SolveTrace run_baseline(const PoissonProblem& problem, const CycleSpec& cycle,
                        const StoppingRule& stop, const RegionMask* trace_mask = nullptr);

/// Complete experiment: baseline (unless given), global cycling with the
/// scheduled faults and recoveries, accounting and kappa.
RecoveryReport run_faulty_job(const PoissonProblem& problem, const CycleSpec& cycle,
                              const JobSpec& job, const SolveTrace* baseline = nullptr);

}  // namespace ftmg
