#include "ftmg/resilience.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ftmg {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::LR: return "LR";
    case Strategy::DD: return "DD";
    case Strategy::DN: return "DN";
  }
  return "?";
}

const char* to_string(LocalSolver s) {
  switch (s) {
    case LocalSolver::Vcycle: return "Vcycle";
    case LocalSolver::Wcycle: return "Wcycle";
    case LocalSolver::Fcycle: return "Fcycle";
    case LocalSolver::PCG: return "PCG";
    case LocalSolver::Smooth: return "Smooth";
  }
  return "?";
}

const char* to_string(Accounting a) {
  return a == Accounting::Global ? "global" : "table1";
}

const char* to_string(ProblemKind k) {
  return k == ProblemKind::Harmonic ? "harmonic" : "manufactured";
}

namespace {

int ceil_div(const Rational& r) {
  // boost::rational keeps the denominator positive.
  const auto n = r.numerator(), d = r.denominator();
  const auto q = n / d;
  return static_cast<int>((n % d != 0 && n > 0) ? q + 1 : q);
}

}  // namespace

void RecoveryConfig::validate() const {
  if (static_cast<int>(local_solver) > static_cast<int>(LocalSolver::Smooth)) {
    fail(ErrorCode::UnsupportedSolver, "unknown local solver");
  }
  if (static_cast<int>(strategy) > static_cast<int>(Strategy::DN)) {
    fail(ErrorCode::InvalidArgument, "unknown recovery strategy");
  }
  if (n_I < 0) fail(ErrorCode::InvalidArgument, "n_I must be >= 0");
  if (eta < 1) fail(ErrorCode::InvalidArgument, "eta must be >= 1");
  if (n_F_direct) {
    if (strategy != Strategy::LR) {
      fail(ErrorCode::InvalidArgument, "n_F can only be given directly for local recovery");
    }
    if (*n_F_direct < 0) fail(ErrorCode::InvalidArgument, "n_F must be >= 0");
  }
}

int RecoveryConfig::n_F() const {
  if (strategy == Strategy::None) return 0;
  if (n_F_direct) return *n_F_direct;
  return ceil_div(eta * n_I);
}

int RecoveryConfig::accounted_units() const {
  switch (strategy) {
    case Strategy::None: return 0;
    case Strategy::LR: return n_F_direct ? ceil_div(Rational(*n_F_direct) / eta) : n_I;
    case Strategy::DD:
    case Strategy::DN: return n_I;
  }
  return 0;
}

void LogicalClock::advance(const Rational& dt) {
  if (dt < 0) fail(ErrorCode::InvalidArgument, "logical time cannot run backwards");
  elapsed_ += dt;
}

PoissonProblem::PoissonProblem(const ProblemSpec& spec) : spec_(spec), h_(spec.grid) {}

double PoissonProblem::boundary(const std::array<double, 3>& x) const {
  return exact(x);
}

double PoissonProblem::source(const std::array<double, 3>& x) const {
  if (spec_.kind == ProblemKind::Harmonic) return 0.0;
  return 3.0 * std::numbers::pi * std::numbers::pi * exact(x);
}

double PoissonProblem::exact(const std::array<double, 3>& x) const {
  if (spec_.kind == ProblemKind::Harmonic) {
    return 1.0 + x[0] * x[0] + x[1] * x[1] - 2.0 * x[2] * x[2] + x[0] * x[1] * x[2];
  }
  const double pi = std::numbers::pi;
  return std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::sin(pi * x[2]);
}

void PoissonProblem::initialize(std::span<double> u, std::span<double> f) const {
  const LevelGrid& g = h_.level(h_.finest());
  if (u.size() != g.size() || f.size() != g.size()) {
    fail(ErrorCode::LevelMismatch, "initial vectors do not match the finest level");
  }
  std::mt19937_64 rng(spec_.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
    const auto x = g.position(n);
    f[n] = source(x);
    if (g.on_boundary(n)) {
      u[n] = boundary(x);
    } else {
      u[n] = spec_.random_guess ? dist(rng) : 0.0;
    }
  }
}

SolverState::SolverState(const PoissonProblem& p, const CycleSpec& cycle)
    : problem(&p),
      u(p.hierarchy()),
      f(p.hierarchy().level(p.hierarchy().finest()).size(), 0.0),
      mg(p.hierarchy(), cycle) {
  p.initialize(finest(), f);
  sync_ghosts(p.hierarchy(), u, p.hierarchy().finest());
}

void inject_fault(SolverState& s, const RegionMask& mask) {
  const GridHierarchy& h = s.problem->hierarchy();
  if (mask.level_count() != h.level_count()) {
    fail(ErrorCode::LevelMismatch, "region mask does not match the hierarchy");
  }
  const int L = h.finest();
  for (int l = 0; l <= L; ++l) {
    const LevelGrid& g = h.level(l);
    auto v = s.u.values(l);
    const auto regions = mask.level(l);
    for (std::size_t n = 0; n < g.size(); ++n) {
      if (regions[n] == Region::Faulty) v[n] = 0.0;
    }
    for (std::size_t c = 0; c < g.containers.size(); ++c) {
      if (mask.entity(static_cast<int>(c)) != Region::Faulty) continue;
      auto gh = s.u.ghosts(l, static_cast<int>(c));
      std::fill(gh.begin(), gh.end(), 0.0);
    }
  }
  const LevelGrid& g = h.level(L);
  auto u = s.u.values(L);
  const auto regions = mask.level(L);
  // The faulty process held copies of the interface; rebuild them from the
  // healthy side.
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (regions[n] == Region::Interface) u[n] = std::numeric_limits<double>::quiet_NaN();
  }
  restore_interface(h, s.u, mask.faulty(), L);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (regions[n] == Region::Faulty || regions[n] == Region::Interface) {
      s.f[n] = s.problem->source(g.position(static_cast<std::int32_t>(n)));
    }
  }
  for (int id : mask.faulty()) {
    for (std::int32_t n : h.boundary_nodes_of(L, id)) {
      const auto x = g.position(n);
      u[n] = s.problem->boundary(x);
      s.f[n] = s.problem->source(x);
    }
  }
  s.mg.discard(mask);
}

namespace {

/// Repeated steps of one local solver on the faulty Dirichlet problem.
class LocalStepper {
 public:
  LocalStepper(const SolverState& s, LocalSolver kind, const RegionMask& mask)
      : kind_(kind) {
    const GridHierarchy& h = s.problem->hierarchy();
    switch (kind) {
      case LocalSolver::Vcycle:
      case LocalSolver::Wcycle:
      case LocalSolver::Fcycle: {
        CycleSpec spec = s.mg.spec();
        spec.kind = kind == LocalSolver::Vcycle   ? CycleKind::V
                    : kind == LocalSolver::Wcycle ? CycleKind::W
                                                  : CycleKind::F;
        mg_.emplace(h, spec, RegionKind::FaultyDirichlet, &mask);
        break;
      }
      case LocalSolver::PCG:
      case LocalSolver::Smooth:
        op_.emplace(h, h.finest(), RegionKind::FaultyDirichlet, &mask);
        break;
      default: fail(ErrorCode::UnsupportedSolver, "unknown local solver");
    }
  }

  void run(std::span<double> u, std::span<const double> f, int steps) {
    if (steps <= 0) return;
    switch (kind_) {
      case LocalSolver::PCG:
        // A batch restarts the Krylov space.
        pcg(*op_, u, f, KrylovSpec{true, 0.0, steps});
        break;
      case LocalSolver::Smooth: smooth_only(*op_, u, f, steps); break;
      default:
        for (int i = 0; i < steps; ++i) mg_->cycle(u, f);
    }
  }

 private:
  LocalSolver kind_;
  std::optional<MultigridSolver> mg_;
  std::optional<StencilOperator> op_;
};

void zero_faulty(std::span<double> u, const RegionMask& mask, int level) {
  const auto regions = mask.level(level);
  for (std::size_t n = 0; n < u.size(); ++n) {
    if (regions[n] == Region::Faulty) u[n] = 0.0;
  }
}

void check_recovery(const SolverState& s, const RecoveryConfig& cfg, const RegionMask& mask) {
  cfg.validate();
  if (mask.faulty().empty()) fail(ErrorCode::InvalidArgument, "recovery without faulty subdomains");
  if (mask.level_count() != s.problem->hierarchy().level_count()) {
    fail(ErrorCode::LevelMismatch, "region mask does not match the hierarchy");
  }
}

}  // namespace

void recover_local(SolverState& s, const RecoveryConfig& cfg, const RegionMask& mask,
                   LogicalClock& clock) {
  check_recovery(s, cfg, mask);
  const int L = s.problem->hierarchy().finest();
  const int n_F = cfg.n_F();
  auto u = s.finest();
  zero_faulty(u, mask, L);
  LocalStepper(s, cfg.local_solver, mask).run(u, s.f, n_F);
  clock.advance(Rational(n_F) / cfg.eta);
}

void recover_dd(SolverState& s, const RecoveryConfig& cfg, const RegionMask& mask,
                LogicalClock& clock, const StepObserver& observer) {
  check_recovery(s, cfg, mask);
  const GridHierarchy& h = s.problem->hierarchy();
  const int n_F = cfg.n_F();
  auto u = s.finest();
  zero_faulty(u, mask, h.finest());
  LocalStepper(s, cfg.local_solver, mask).run(u, s.f, n_F);
  if (cfg.n_I == 0) return;
  MultigridSolver healthy(h, s.mg.spec(), RegionKind::HealthyDirichlet, &mask);
  for (int j = 1; j <= cfg.n_I; ++j) {
    healthy.cycle(u, s.f);
    clock.advance(Rational(1));
    if (observer) observer(j);
  }
}

std::vector<double> compute_neumann_flux(const GridHierarchy& h, const RegionMask& mask,
                                         const SubStencilSplit& split, std::span<const double> u) {
  const int L = h.finest();
  const LevelGrid& g = h.level(L);
  if (split.level != L || split.rows.size() != mask.count(L, Region::Interface)) {
    fail(ErrorCode::MissingFlux, "sub-stencil split does not cover the finest interface");
  }
  if (u.size() != g.size()) fail(ErrorCode::LevelMismatch, "iterate does not match the finest level");
  std::vector<double> lambda(g.size(), 0.0);
  for (const SubStencilRow& r : split.rows) {
    const StencilRow c = row_coefficients(g, r.healthy);
    const std::int32_t n = r.node;
    double v = c.diag * u[n];
    for (int slot = 0; slot < 6; ++slot) {
      if (c.off[slot] == 0.0) continue;
      const std::ptrdiff_t step = g.stride[slot / 2];
      v -= c.off[slot] * u[slot % 2 == 0 ? n - step : n + step];
    }
    lambda[n] = -v;
  }
  return lambda;
}

int dn_batch_size(int n_F, int n_I, int j) {
  if (n_I <= 0 || j < 1 || j > n_I || n_F < 0) {
    fail(ErrorCode::InvalidArgument, "batch index out of range");
  }
  const std::int64_t a = static_cast<std::int64_t>(j) * n_F / n_I;
  const std::int64_t b = static_cast<std::int64_t>(j - 1) * n_F / n_I;
  return static_cast<int>(a - b);
}

void recover_dn(SolverState& s, const RecoveryConfig& cfg, const RegionMask& mask,
                LogicalClock& clock, const StepObserver& observer) {
  check_recovery(s, cfg, mask);
  const GridHierarchy& h = s.problem->hierarchy();
  const int L = h.finest();
  const int n_F = cfg.n_F();
  if (cfg.n_I == 0) return;
  auto u = s.finest();
  // Static flux from the state at fault time.
  const std::vector<double> lambda = compute_neumann_flux(h, mask, sub_stencils(h, mask, L), u);
  zero_faulty(u, mask, L);
  LocalStepper faulty(s, cfg.local_solver, mask);
  MultigridSolver healthy(h, s.mg.spec(), RegionKind::HealthyNeumann, &mask);
  for (int j = 1; j <= cfg.n_I; ++j) {
    healthy.cycle(u, s.f, lambda);  // writes the interface: push j
    faulty.run(u, s.f, dn_batch_size(n_F, cfg.n_I, j));
    clock.advance(Rational(1));
    if (observer) observer(j);
  }
}

Rational cycle_advantage(int k_faulty, int k_free, int k_F) {
  if (k_F < 1) fail(ErrorCode::InvalidArgument, "k_F must be >= 1");
  return Rational(k_faulty - k_free, k_F);
}

SolveTrace run_baseline(const PoissonProblem& problem, const CycleSpec& cycle,
                        const StoppingRule& stop, const RegionMask* trace_mask) {
  SolverState s(problem, cycle);
  SolveOptions opt;
  opt.trace_mask = trace_mask;
  return solve_to_tol(s.mg, s.finest(), s.f, stop, opt);
}

RecoveryReport run_faulty_job(const PoissonProblem& problem, const CycleSpec& cycle,
                              const JobSpec& job, const SolveTrace* baseline) {
  job.recovery.validate();
  const GridHierarchy& h = problem.hierarchy();
  const int L = h.finest();
  std::vector<RegionMask> masks;
  int last = 0;
  for (const FaultEvent& ev : job.schedule) {
    if (ev.after_cycle < 1) fail(ErrorCode::InvalidArgument, "faults fire after cycle 1 or later");
    if (ev.after_cycle <= last) {
      fail(ErrorCode::InvalidArgument, "fault schedule must be strictly ordered by after_cycle");
    }
    if (ev.subdomains.empty()) fail(ErrorCode::InvalidArgument, "fault without subdomains");
    last = ev.after_cycle;
    masks.push_back(region_masks(h, ev.subdomains));
  }
  const RegionMask* trace_mask = job.trace_regions && !masks.empty() ? &masks.front() : nullptr;

  RecoveryReport rep;
  rep.baseline = baseline ? *baseline : run_baseline(problem, cycle, job.stop, trace_mask);
  rep.k_free = rep.baseline.iterations;

  SolverState s(problem, cycle);
  const RecoveryConfig& rc = job.recovery;
  const int units = job.accounting == Accounting::Global ? rc.accounted_units() : 0;
  std::size_t next = 0;
  Rational recovery_time(0);

  SolveOptions opt;
  opt.trace_mask = trace_mask;
  opt.hook = [&](CycleContext& ctx) {
    sync_ghosts(h, s.u, L);
    if (ctx.rel_residual <= job.stop.rel_residual_tol) return;
    while (next < job.schedule.size()) {
      const FaultEvent& ev = job.schedule[next];
      if (ev.after_cycle > ctx.counter) break;
      if (ev.after_cycle < ctx.counter) {
        fail(ErrorCode::ScheduleConflict,
             "fault scheduled after cycle " + std::to_string(ev.after_cycle) +
                 " falls into the recovery that ended at " + std::to_string(ctx.counter));
      }
      const RegionMask& mask = masks[next];
      inject_fault(s, mask);
      ctx.record("fault");
      const Rational start = ctx.logical_time;
      LogicalClock clock(start);
      const int base = ctx.counter;
      StepObserver observer = [&](int step) {
        ctx.logical_time = clock.elapsed();
        ctx.counter = base + std::min(step, units);
        ctx.record("recovery");
      };
      switch (rc.strategy) {
        case Strategy::None: break;
        case Strategy::LR:
          recover_local(s, rc, mask, clock);
          ctx.logical_time = clock.elapsed();
          ctx.counter = base + units;
          ctx.record("recovery");
          break;
        case Strategy::DD: recover_dd(s, rc, mask, clock, observer); break;
        case Strategy::DN: recover_dn(s, rc, mask, clock, observer); break;
      }
      recovery_time += clock.elapsed() - start;
      ctx.counter = base + units;
      ctx.logical_time = clock.elapsed();
      sync_ghosts(h, s.u, L);
      if (rc.strategy != Strategy::None) ctx.record("reconnect");
      ++next;
    }
  };
  rep.faulty = solve_to_tol(s.mg, s.finest(), s.f, job.stop, opt);
  rep.k_faulty = rep.faulty.iterations;
  rep.converged = rep.baseline.converged && rep.faulty.converged;
  rep.k_F = job.schedule.empty() ? 0 : job.schedule.front().after_cycle;
  rep.kappa = job.schedule.empty() ? Rational(0) : cycle_advantage(rep.k_faulty, rep.k_free, rep.k_F);
  rep.logical_time = Rational(rep.faulty.global_cycles) + recovery_time;
  return rep;
}

}  // namespace ftmg
