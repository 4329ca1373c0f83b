#include "ftmg/discrete_operators.hpp"

#include <algorithm>
#include <cmath>

namespace ftmg {

const char* to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::Full: return "full";
    case RegionKind::FaultyDirichlet: return "faulty-dirichlet";
    case RegionKind::HealthyDirichlet: return "healthy-dirichlet";
    case RegionKind::HealthyNeumann: return "healthy-neumann";
  }
  return "?";
}

SubStencilSplit sub_stencils(const GridHierarchy& h, const RegionMask& mask, int level) {
  const LevelGrid& g = h.level(level);
  if (mask.level_count() != h.level_count()) {
    fail(ErrorCode::LevelMismatch, "region mask does not match the hierarchy");
  }
  const auto regions = mask.level(level);
  const int span4 = 4 * g.cells_per_subdomain;
  SubStencilSplit split;
  split.level = level;
  for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
    if (regions[n] != Region::Interface) continue;
    const Index3 c = g.ijk(n);
    SubStencilRow row;
    row.node = n;
    for (int slot = 0; slot < 6; ++slot) {
      const int axis = slot / 2;
      const int sign = (slot % 2 == 0) ? -1 : 1;
      const int b = (axis + 1) % 3, d = (axis + 2) % 3;
      std::uint8_t bad = 0;
      // Centers of the four quarters of the dual face crossed by this coupling,
      // in units of h/4.
      for (int ob : {-1, 1}) {
        for (int od : {-1, 1}) {
          Index3 p4{4 * c[0], 4 * c[1], 4 * c[2]};
          p4[axis] += 2 * sign;
          p4[b] += ob;
          p4[d] += od;
          const int id = h.subdomain_id({p4[0] / span4, p4[1] / span4, p4[2] / span4});
          bad += mask.is_faulty(id) ? 1 : 0;
        }
      }
      row.faulty[slot] = bad;
      row.healthy[slot] = static_cast<std::uint8_t>(4 - bad);
    }
    split.rows.push_back(row);
  }
  return split;
}

StencilRow row_coefficients(const LevelGrid& g, const Quarters& quarters) {
  StencilRow r;
  for (int slot = 0; slot < 6; ++slot) {
    r.off[slot] = quarters[slot] * 0.25 * g.inv_h2[slot / 2];
    r.diag += r.off[slot];
  }
  return r;
}

StencilRow full_row(const LevelGrid& g) { return row_coefficients(g, Quarters{4, 4, 4, 4, 4, 4}); }

StencilOperator::StencilOperator(const GridHierarchy& h, int level, RegionKind kind,
                                 const RegionMask* mask)
    : grid_(&h.level(level)), kind_(kind) {
  const LevelGrid& g = *grid_;
  stride_ = g.stride;
  full_ = full_row(g);
  if (kind != RegionKind::Full && mask == nullptr) {
    fail(ErrorCode::InvalidArgument, std::string("region ") + to_string(kind) + " needs a mask");
  }
  auto wanted = [&](std::int32_t n) {
    if (kind == RegionKind::Full) return true;
    const Region r = mask->at(level, n);
    switch (kind) {
      case RegionKind::FaultyDirichlet: return r == Region::Faulty;
      case RegionKind::HealthyDirichlet: return r == Region::Healthy;
      case RegionKind::HealthyNeumann: return r == Region::Healthy || r == Region::Interface;
      default: return false;
    }
  };
  flag_.assign(g.size(), 0);
  for (std::int32_t n : g.smoothing_order) {
    if (wanted(n)) {
      active_.push_back(n);
      flag_[n] = 1;
    }
  }
  if (active_.empty()) {
    fail(ErrorCode::EmptyRegion,
         std::string("region ") + to_string(kind) + " has no unknowns on level " +
             std::to_string(level));
  }
  special_.assign(active_.size(), -1);
  if (kind == RegionKind::HealthyNeumann) {
    const SubStencilSplit split = sub_stencils(h, *mask, level);
    for (std::size_t p = 0; p < active_.size(); ++p) {
      if (mask->at(level, active_[p]) != Region::Interface) continue;
      const auto it = std::lower_bound(
          split.rows.begin(), split.rows.end(), active_[p],
          [](const SubStencilRow& r, std::int32_t n) { return r.node < n; });
      special_[p] = static_cast<std::int32_t>(rows_.size());
      rows_.push_back(row_coefficients(g, it->healthy));
    }
  }
}

void apply(const StencilOperator& A, std::span<const double> u, std::span<double> v) {
  const auto act = A.active();
  for (std::size_t p = 0; p < act.size(); ++p) v[act[p]] = A.apply_row(p, u.data());
}

void residual(const StencilOperator& A, std::span<const double> u, std::span<const double> f,
              std::span<double> r) {
  const auto act = A.active();
  for (std::size_t p = 0; p < act.size(); ++p) {
    r[act[p]] = f[act[p]] - A.apply_row(p, u.data());
  }
}

double active_norm(const StencilOperator& A, std::span<const double> r) {
  double s = 0.0;
  for (std::int32_t n : A.active()) s += r[n] * r[n];
  return std::sqrt(s);
}

void smooth_hybrid_gs(const StencilOperator& A, std::span<double> u, std::span<const double> f,
                      int sweeps) {
  const auto act = A.active();
  double* x = u.data();
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t p = 0; p < act.size(); ++p) {
      const std::int32_t n = act[p];
      const double d = A.diag(p);
      x[n] += (f[n] - A.apply_row(p, x)) / d;
    }
  }
}

namespace {

struct AxisWeights {
  std::vector<int> lo, hi;
  std::vector<double> wlo, whi;
};

AxisWeights axis_weights(int fine_nodes) {
  AxisWeights w;
  for (int i = 0; i < fine_nodes; ++i) {
    if (i % 2 == 0) {
      w.lo.push_back(i / 2);
      w.hi.push_back(i / 2);
      w.wlo.push_back(1.0);
      w.whi.push_back(0.0);
    } else {
      w.lo.push_back(i / 2);
      w.hi.push_back(i / 2 + 1);
      w.wlo.push_back(0.5);
      w.whi.push_back(0.5);
    }
  }
  return w;
}

void check_transfer_sizes(const LevelGrid& c, const LevelGrid& f, std::size_t coarse_len,
                          std::size_t fine_len) {
  if (coarse_len != c.size() || fine_len != f.size()) {
    fail(ErrorCode::LevelMismatch, "transfer vectors do not match adjacent levels");
  }
}

}  // namespace

void prolongate(const GridHierarchy& h, int coarse_level, std::span<const double> coarse,
                std::span<double> fine) {
  const LevelGrid& c = h.level(coarse_level);
  const LevelGrid& f = h.level(coarse_level + 1);
  check_transfer_sizes(c, f, coarse.size(), fine.size());
  const AxisWeights wx = axis_weights(f.nodes[0]);
  const AxisWeights wy = axis_weights(f.nodes[1]);
  const AxisWeights wz = axis_weights(f.nodes[2]);
  const std::ptrdiff_t cy = c.stride[1], cz = c.stride[2];
  for (int k = 0; k < f.nodes[2]; ++k) {
    for (int j = 0; j < f.nodes[1]; ++j) {
      const std::ptrdiff_t b00 = wz.lo[k] * cz + wy.lo[j] * cy;
      const std::ptrdiff_t b01 = wz.lo[k] * cz + wy.hi[j] * cy;
      const std::ptrdiff_t b10 = wz.hi[k] * cz + wy.lo[j] * cy;
      const std::ptrdiff_t b11 = wz.hi[k] * cz + wy.hi[j] * cy;
      const double w00 = wz.wlo[k] * wy.wlo[j], w01 = wz.wlo[k] * wy.whi[j];
      const double w10 = wz.whi[k] * wy.wlo[j], w11 = wz.whi[k] * wy.whi[j];
      double* out = fine.data() + f.index(0, j, k);
      for (int i = 0; i < f.nodes[0]; ++i) {
        const int lo = wx.lo[i], hi = wx.hi[i];
        const double a = wx.wlo[i], b = wx.whi[i];
        double v = w00 * (a * coarse[b00 + lo] + b * coarse[b00 + hi]);
        if (w01 != 0.0) v += w01 * (a * coarse[b01 + lo] + b * coarse[b01 + hi]);
        if (w10 != 0.0) v += w10 * (a * coarse[b10 + lo] + b * coarse[b10 + hi]);
        if (w11 != 0.0) v += w11 * (a * coarse[b11 + lo] + b * coarse[b11 + hi]);
        out[i] = v;
      }
    }
  }
}

void restrict_full_weighting(const GridHierarchy& h, int fine_level, std::span<const double> fine,
                             std::span<double> coarse) {
  const LevelGrid& f = h.level(fine_level);
  const LevelGrid& c = h.level(fine_level - 1);
  check_transfer_sizes(c, f, coarse.size(), fine.size());
  static constexpr double w1[3] = {0.5, 1.0, 0.5};
  for (int K = 0; K < c.nodes[2]; ++K) {
    for (int J = 0; J < c.nodes[1]; ++J) {
      for (int I = 0; I < c.nodes[0]; ++I) {
        double s = 0.0;
        for (int oz = -1; oz <= 1; ++oz) {
          const int k = 2 * K + oz;
          if (k < 0 || k >= f.nodes[2]) continue;
          for (int oy = -1; oy <= 1; ++oy) {
            const int j = 2 * J + oy;
            if (j < 0 || j >= f.nodes[1]) continue;
            const double wzy = w1[oz + 1] * w1[oy + 1];
            const double* row = fine.data() + f.index(0, j, k);
            double sx = row[2 * I];
            if (I > 0) sx += 0.5 * row[2 * I - 1];
            if (2 * I + 1 < f.nodes[0]) sx += 0.5 * row[2 * I + 1];
            s += wzy * sx;
          }
        }
        coarse[c.index(I, J, K)] = s / kTransferScaling;
      }
    }
  }
}

DenseMatrix assemble_dense(const StencilOperator& A) {
  const auto act = A.active();
  if (act.size() > kDenseLimit) {
    fail(ErrorCode::InvalidArgument, "dense assembly limited to " + std::to_string(kDenseLimit) +
                                         " unknowns, got " + std::to_string(act.size()));
  }
  DenseMatrix m;
  m.unknowns.assign(act.begin(), act.end());
  std::sort(m.unknowns.begin(), m.unknowns.end());
  m.n = m.unknowns.size();
  m.a.assign(m.n * m.n, 0.0);
  auto column = [&](std::int32_t node) -> std::ptrdiff_t {
    const auto it = std::lower_bound(m.unknowns.begin(), m.unknowns.end(), node);
    if (it == m.unknowns.end() || *it != node) return -1;
    return it - m.unknowns.begin();
  };
  const auto& st = A.grid().stride;
  for (std::size_t p = 0; p < act.size(); ++p) {
    const std::int32_t n = act[p];
    const std::size_t i = static_cast<std::size_t>(column(n));
    const StencilRow r = A.row(p);
    m.at(i, i) = r.diag;
    for (int slot = 0; slot < 6; ++slot) {
      if (r.off[slot] == 0.0) continue;
      const std::ptrdiff_t step = st[slot / 2];
      const std::int32_t nb = static_cast<std::int32_t>(slot % 2 == 0 ? n - step : n + step);
      const std::ptrdiff_t j = column(nb);
      if (j >= 0) m.at(i, static_cast<std::size_t>(j)) = -r.off[slot];
    }
  }
  return m;
}

}  // namespace ftmg
