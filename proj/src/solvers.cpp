#include "ftmg/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace ftmg {

const char* to_string(CycleKind kind) {
  switch (kind) {
    case CycleKind::V: return "V";
    case CycleKind::W: return "W";
    case CycleKind::F: return "F";
  }
  return "?";
}

namespace {

double dot_active(std::span<const std::int32_t> act, const double* a, const double* b) {
  double s = 0.0;
  for (std::int32_t n : act) s += a[n] * b[n];
  return s;
}

}  // namespace

PcgResult pcg(const StencilOperator& A, std::span<double> u, std::span<const double> f,
              const KrylovSpec& spec) {
  if (spec.max_iter < 0 || spec.rel_tol < 0.0) {
    fail(ErrorCode::InvalidArgument, "pcg needs max_iter >= 0 and rel_tol >= 0");
  }
  const std::size_t size = A.grid().size();
  if (u.size() != size || f.size() != size) {
    fail(ErrorCode::LevelMismatch, "pcg vectors do not match the operator level");
  }
  const auto act = A.active();
  // p must read as zero off the active set, the others are only touched on it.
  std::vector<double> r(size, 0.0), z(size, 0.0), p(size, 0.0), q(size, 0.0);
  residual(A, u, f, r);
  auto precondition = [&] {
    for (std::size_t i = 0; i < act.size(); ++i) {
      z[act[i]] = spec.jacobi ? r[act[i]] / A.diag(i) : r[act[i]];
    }
  };
  precondition();
  for (std::int32_t n : act) p[n] = z[n];
  double rz = dot_active(act, r.data(), z.data());
  const double r0 = active_norm(A, r);
  PcgResult res;
  if (r0 == 0.0) {
    res.converged = true;
    return res;
  }
  for (int it = 1; it <= spec.max_iter; ++it) {
    apply(A, p, q);
    const double pq = dot_active(act, p.data(), q.data());
    if (pq == 0.0) {
      // Search direction vanished: nothing left to reduce.
      res.converged = true;
      return res;
    }
    if (!(pq > 0.0)) {
      fail(ErrorCode::Breakdown, "pcg: nonpositive curvature " + std::to_string(pq) +
                                     " at iteration " + std::to_string(it));
    }
    const double alpha = rz / pq;
    for (std::int32_t n : act) {
      u[n] += alpha * p[n];
      r[n] -= alpha * q[n];
    }
    res.iterations = it;
    const double rn = active_norm(A, r);
    res.rel_residual = rn / r0;
    if (rn == 0.0 || (spec.rel_tol > 0.0 && res.rel_residual <= spec.rel_tol)) {
      res.converged = true;
      return res;
    }
    precondition();
    const double rz_new = dot_active(act, r.data(), z.data());
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::int32_t n : act) p[n] = z[n] + beta * p[n];
  }
  res.converged = spec.rel_tol > 0.0 ? res.rel_residual <= spec.rel_tol : true;
  return res;
}

void smooth_only(const StencilOperator& A, std::span<double> u, std::span<const double> f, int n) {
  if (n < 0) fail(ErrorCode::InvalidArgument, "negative sweep count");
  smooth_hybrid_gs(A, u, f, n);
}

MultigridSolver::MultigridSolver(const GridHierarchy& h, const CycleSpec& spec, RegionKind kind,
                                 const RegionMask* mask)
    : h_(&h), spec_(spec), kind_(kind) {
  if (spec.pre_smooth < 0 || spec.post_smooth < 0) {
    fail(ErrorCode::InvalidArgument, "smoothing step counts must be nonnegative");
  }
  if (mask != nullptr && mask->level_count() != h.level_count()) {
    fail(ErrorCode::LevelMismatch, "region mask does not match the hierarchy");
  }
  const int levels = h.level_count();
  ops_.reserve(levels);
  for (int l = 0; l < levels; ++l) ops_.emplace_back(h, l, kind, mask);
  x_.resize(levels);
  b_.resize(levels);
  r_.resize(levels);
  e_.resize(levels);
  for (int l = 0; l < levels; ++l) {
    const std::size_t n = h.level(l).size();
    r_[l].assign(n, 0.0);
    if (l < levels - 1) {
      x_[l].assign(n, 0.0);
      b_[l].assign(n, 0.0);
    }
    if (l > 0) e_[l].assign(n, 0.0);
  }
  if (kind == RegionKind::HealthyNeumann) {
    rhs_.assign(h.level(h.finest()).size(), 0.0);
    for (std::int32_t n : ops_.back().active()) {
      if (mask->at(h.finest(), n) == Region::Interface) interface_.push_back(n);
    }
  }
}

void MultigridSolver::cycle(std::span<double> u, std::span<const double> f,
                            std::span<const double> flux) {
  const int L = h_->finest();
  const std::size_t size = h_->level(L).size();
  if (u.size() != size || f.size() != size) {
    fail(ErrorCode::LevelMismatch, "cycle vectors do not match the finest level");
  }
  const double* b = f.data();
  if (kind_ == RegionKind::HealthyNeumann) {
    if (flux.size() != size) {
      fail(ErrorCode::MissingFlux, "the Neumann solve needs an interface flux on the finest level");
    }
    std::copy(f.begin(), f.end(), rhs_.begin());
    for (std::int32_t n : interface_) rhs_[n] = -flux[n];
    b = rhs_.data();
  }
  visit(L, spec_.kind, u.data(), b);
}

void MultigridSolver::visit(int level, CycleKind kind, double* x, const double* b) {
  const StencilOperator& A = ops_[level];
  const std::size_t size = A.grid().size();
  const std::size_t active = A.active().size();
  if (level == 0) {
    const PcgResult res =
        pcg(A, std::span<double>(x, size), std::span<const double>(b, size), spec_.coarse);
    ++coarse_solves_;
    work_ += static_cast<std::uint64_t>(res.iterations + 1) * active;
    return;
  }
  std::span<double> xs(x, size);
  std::span<const double> bs(b, size);
  smooth_hybrid_gs(A, xs, bs, spec_.pre_smooth);
  residual(A, xs, bs, r_[level]);
  restrict_full_weighting(*h_, level, r_[level], b_[level - 1]);
  std::fill(x_[level - 1].begin(), x_[level - 1].end(), 0.0);
  double* xc = x_[level - 1].data();
  const double* bc = b_[level - 1].data();
  switch (kind) {
    case CycleKind::V: visit(level - 1, CycleKind::V, xc, bc); break;
    case CycleKind::W:
      visit(level - 1, CycleKind::W, xc, bc);
      visit(level - 1, CycleKind::W, xc, bc);
      break;
    case CycleKind::F:
      visit(level - 1, CycleKind::F, xc, bc);
      visit(level - 1, CycleKind::V, xc, bc);
      break;
  }
  prolongate(*h_, level - 1, x_[level - 1], e_[level]);
  for (std::int32_t n : A.active()) x[n] += e_[level][n];
  smooth_hybrid_gs(A, xs, bs, spec_.post_smooth);
  work_ += static_cast<std::uint64_t>(spec_.pre_smooth + spec_.post_smooth + 1) * active;
}

void MultigridSolver::discard(const RegionMask& mask) {
  for (int l = 0; l < h_->level_count(); ++l) {
    const auto regions = mask.level(l);
    for (auto* v : {&x_[l], &b_[l], &r_[l], &e_[l]}) {
      if (v->empty()) continue;
      for (std::size_t n = 0; n < v->size(); ++n) {
        if (regions[n] == Region::Faulty) (*v)[n] = 0.0;
      }
    }
  }
  if (!rhs_.empty()) {
    const auto regions = mask.level(h_->finest());
    for (std::size_t n = 0; n < rhs_.size(); ++n) {
      if (regions[n] == Region::Faulty) rhs_[n] = 0.0;
    }
  }
}

ResidualSplit residual_split(const StencilOperator& full, const RegionMask* mask,
                             std::span<const double> u, std::span<const double> f,
                             std::span<double> scratch) {
  residual(full, u, f, scratch);
  ResidualSplit out;
  if (mask == nullptr) {
    out.total = active_norm(full, scratch);
    return out;
  }
  const int l = full.level();
  double s[3] = {0.0, 0.0, 0.0};
  for (std::int32_t n : full.active()) {
    const double v = scratch[n] * scratch[n];
    switch (mask->at(l, n)) {
      case Region::Healthy: s[0] += v; break;
      case Region::Interface: s[1] += v; break;
      case Region::Faulty: s[2] += v; break;
      case Region::Dirichlet: break;
    }
  }
  out.total = std::sqrt(s[0] + s[1] + s[2]);
  out.healthy = std::sqrt(s[0]);
  out.interface = std::sqrt(s[1]);
  out.faulty = std::sqrt(s[2]);
  return out;
}

SolveTrace solve_to_tol(MultigridSolver& mg, std::span<double> u, std::span<const double> f,
                        const StoppingRule& stop, const SolveOptions& options) {
  if (stop.rel_residual_tol < 0.0 || stop.max_cycles < 0) {
    fail(ErrorCode::InvalidArgument, "stopping rule needs tol >= 0 and max_cycles >= 0");
  }
  if (mg.kind() != RegionKind::Full) {
    fail(ErrorCode::InvalidArgument, "global solves run on the full domain");
  }
  const StencilOperator& A = mg.finest();
  std::vector<double> scratch(A.grid().size(), 0.0);
  SolveTrace trace;
  CycleContext ctx;
  ctx.u = u;
  double rel = 0.0;
  auto measure = [&] {
    const ResidualSplit s = residual_split(A, options.trace_mask, u, f, scratch);
    if (trace.rows.empty()) trace.initial_residual = s.total;
    const double r0 = trace.initial_residual;
    const double scale = r0 > 0.0 ? 1.0 / r0 : 1.0;
    rel = r0 > 0.0 ? s.total / r0 : 0.0;
    return TraceRow{ctx.counter, rel, s.healthy * scale, s.faulty * scale, s.interface * scale,
                    to_double(ctx.logical_time), {}};
  };
  ctx.record = [&](const std::string& phase) {
    TraceRow row = measure();
    row.phase = phase;
    trace.rows.push_back(std::move(row));
  };
  ctx.record("initial");
  while (true) {
    if (rel <= stop.rel_residual_tol) {
      trace.converged = true;
      break;
    }
    if (ctx.global_cycles >= stop.max_cycles) break;
    mg.cycle(u, f);
    ++ctx.global_cycles;
    ++ctx.counter;
    ctx.logical_time += 1;
    ctx.record("cycle");
    if (options.hook) {
      ctx.rel_residual = rel;
      options.hook(ctx);
      // The hook may have changed u.
      measure();
    }
  }
  trace.iterations = ctx.counter;
  trace.global_cycles = ctx.global_cycles;
  return trace;
}

}  // namespace ftmg
