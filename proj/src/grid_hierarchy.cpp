#include "ftmg/grid_hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace ftmg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::LevelMismatch: return "LevelMismatch";
    case ErrorCode::UnrecoverableInterface: return "UnrecoverableInterface";
    case ErrorCode::NoHealthyRegion: return "NoHealthyRegion";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::MissingFlux: return "MissingFlux";
    case ErrorCode::Breakdown: return "Breakdown";
    case ErrorCode::UnsupportedSolver: return "UnsupportedSolver";
    case ErrorCode::ScheduleConflict: return "ScheduleConflict";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

const char* to_string(ContainerKind kind) {
  switch (kind) {
    case ContainerKind::Volume: return "volume";
    case ContainerKind::Face: return "face";
    case ContainerKind::Edge: return "edge";
    case ContainerKind::Vertex: return "vertex";
  }
  return "?";
}

void validate(const PartitionSpec& spec) {
  for (int p : spec.subdomains) {
    if (p < 1) fail(ErrorCode::InvalidArgument, "subdomain counts must be >= 1");
  }
  if (spec.base_cells < 2) {
    fail(ErrorCode::InvalidArgument,
         "base_cells must be >= 2 so every subdomain owns an interior node on level 0");
  }
  if (spec.levels < 0) fail(ErrorCode::InvalidArgument, "levels must be >= 0");
  const long long cells = static_cast<long long>(spec.base_cells) << spec.levels;
  for (int p : spec.subdomains) {
    if (spec.levels > 12 || cells * p + 1 > 2048) {
      fail(ErrorCode::InvalidArgument, "grid too large");
    }
  }
}

std::array<double, 3> LevelGrid::position(std::int32_t n) const {
  const Index3 c = ijk(n);
  return {static_cast<double>(c[0]) / cells[0], static_cast<double>(c[1]) / cells[1],
          static_cast<double>(c[2]) / cells[2]};
}

namespace {

ContainerKind kind_from_even_count(int evens) {
  switch (evens) {
    case 0: return ContainerKind::Volume;
    case 1: return ContainerKind::Face;
    case 2: return ContainerKind::Edge;
    default: return ContainerKind::Vertex;
  }
}

// Doubled entity coordinate of a node index along one axis.
inline int doubled(int i, int m) { return (i % m == 0) ? 2 * (i / m) : 2 * (i / m) + 1; }

}  // namespace

GridHierarchy::GridHierarchy(const PartitionSpec& spec) : spec_(spec) {
  validate(spec_);
  const Index3 P = spec_.subdomains;
  const Index3 D{2 * P[0] + 1, 2 * P[1] + 1, 2 * P[2] + 1};

  // Enumerate entities, grouped by kind, z-major inside each group.
  std::array<std::vector<Entity>, 4> by_kind;
  for (int cz = 0; cz < D[2]; ++cz) {
    for (int cy = 0; cy < D[1]; ++cy) {
      for (int cx = 0; cx < D[0]; ++cx) {
        const Index3 c{cx, cy, cz};
        bool boundary = false;
        int evens = 0;
        for (int d = 0; d < 3; ++d) {
          if (c[d] % 2 == 0) {
            ++evens;
            if (c[d] == 0 || c[d] == D[d] - 1) boundary = true;
          }
        }
        if (boundary) continue;
        Entity e;
        e.kind = kind_from_even_count(evens);
        e.coord = c;
        std::array<std::vector<int>, 3> slabs;
        for (int d = 0; d < 3; ++d) {
          if (c[d] % 2 == 1) {
            slabs[d] = {(c[d] - 1) / 2};
          } else {
            slabs[d] = {c[d] / 2 - 1, c[d] / 2};
          }
        }
        for (int bz : slabs[2])
          for (int by : slabs[1])
            for (int bx : slabs[0]) e.adjacent.push_back(subdomain_id({bx, by, bz}));
        std::sort(e.adjacent.begin(), e.adjacent.end());
        by_kind[static_cast<int>(e.kind)].push_back(std::move(e));
      }
    }
  }
  for (auto& group : by_kind) {
    for (auto& e : group) entities_.push_back(std::move(e));
  }

  std::vector<int> entity_lookup(static_cast<std::size_t>(D[0]) * D[1] * D[2], -1);
  for (std::size_t id = 0; id < entities_.size(); ++id) {
    const Index3& c = entities_[id].coord;
    entity_lookup[(static_cast<std::size_t>(c[2]) * D[1] + c[1]) * D[0] + c[0]] =
        static_cast<int>(id);
  }

  levels_.resize(spec_.levels + 1);
  for (int l = 0; l <= spec_.levels; ++l) {
    LevelGrid& g = levels_[l];
    g.level = l;
    const int m = spec_.base_cells << l;
    g.cells_per_subdomain = m;
    for (int d = 0; d < 3; ++d) {
      g.cells[d] = P[d] * m;
      g.nodes[d] = g.cells[d] + 1;
      g.inv_h2[d] = static_cast<double>(g.cells[d]) * g.cells[d];
    }
    g.stride = {1, g.nodes[0], static_cast<std::ptrdiff_t>(g.nodes[0]) * g.nodes[1]};
    g.container_of.assign(g.size(), -1);
    g.containers.resize(entities_.size());
    for (std::size_t id = 0; id < entities_.size(); ++id) {
      g.containers[id].kind = entities_[id].kind;
      g.containers[id].owner = entities_[id].adjacent.front();
    }

    for (int k = 0; k < g.nodes[2]; ++k) {
      for (int j = 0; j < g.nodes[1]; ++j) {
        for (int i = 0; i < g.nodes[0]; ++i) {
          if (i == 0 || j == 0 || k == 0 || i == g.cells[0] || j == g.cells[1] ||
              k == g.cells[2]) {
            continue;
          }
          const int cx = doubled(i, m), cy = doubled(j, m), cz = doubled(k, m);
          const int id = entity_lookup[(static_cast<std::size_t>(cz) * D[1] + cy) * D[0] + cx];
          const std::int32_t n = g.index(i, j, k);
          g.container_of[n] = id;
          g.containers[id].masters.push_back(n);
        }
      }
    }

    // One layer of ghosts: every non-Dirichlet node within Chebyshev
    // distance 1 of a master that belongs to another container.
    for (int k = 1; k < g.cells[2]; ++k) {
      for (int j = 1; j < g.cells[1]; ++j) {
        for (int i = 1; i < g.cells[0]; ++i) {
          const std::int32_t n = g.index(i, j, k);
          const int own = g.container_of[n];
          if (g.containers[own].kind == ContainerKind::Volume) {
            const int ri = i % m, rj = j % m, rk = k % m;
            const bool near = ri == 1 || ri == m - 1 || rj == 1 || rj == m - 1 || rk == 1 ||
                              rk == m - 1;
            if (!near) continue;
          }
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int other = g.container_of[g.index(i + dx, j + dy, k + dz)];
                if (other >= 0 && other != own) g.containers[other].ghosts.push_back(n);
              }
        }
      }
    }
    for (auto& c : g.containers) {
      std::sort(c.ghosts.begin(), c.ghosts.end());
      c.ghosts.erase(std::unique(c.ghosts.begin(), c.ghosts.end()), c.ghosts.end());
    }

    for (const auto& c : g.containers) {
      g.smoothing_order.insert(g.smoothing_order.end(), c.masters.begin(), c.masters.end());
    }
  }
}

const LevelGrid& GridHierarchy::level(int l) const {
  if (l < 0 || l >= static_cast<int>(levels_.size())) {
    fail(ErrorCode::LevelMismatch, "level " + std::to_string(l) + " does not exist");
  }
  return levels_[l];
}

int GridHierarchy::subdomain_count() const {
  return spec_.subdomains[0] * spec_.subdomains[1] * spec_.subdomains[2];
}

int GridHierarchy::subdomain_id(const Index3& b) const {
  return (b[2] * spec_.subdomains[1] + b[1]) * spec_.subdomains[0] + b[0];
}

Index3 GridHierarchy::subdomain_box(int id) const {
  const auto& P = spec_.subdomains;
  return {id % P[0], (id / P[0]) % P[1], id / (P[0] * P[1])};
}

std::size_t GridHierarchy::count(ContainerKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      entities_.begin(), entities_.end(), [kind](const Entity& e) { return e.kind == kind; }));
}

std::int32_t GridHierarchy::inject_index(int coarse_level, std::int32_t n) const {
  const LevelGrid& c = level(coarse_level);
  const LevelGrid& f = level(coarse_level + 1);
  const Index3 ijk = c.ijk(n);
  return f.index(2 * ijk[0], 2 * ijk[1], 2 * ijk[2]);
}

std::vector<std::int32_t> GridHierarchy::boundary_nodes_of(int l, int subdomain) const {
  const LevelGrid& g = level(l);
  const Index3 b = subdomain_box(subdomain);
  const int m = g.cells_per_subdomain;
  std::vector<std::int32_t> out;
  for (int k = b[2] * m; k <= (b[2] + 1) * m; ++k)
    for (int j = b[1] * m; j <= (b[1] + 1) * m; ++j)
      for (int i = b[0] * m; i <= (b[0] + 1) * m; ++i) {
        const std::int32_t n = g.index(i, j, k);
        if (g.on_boundary(n)) out.push_back(n);
      }
  return out;
}

void GridHierarchy::dump_containers_csv(std::ostream& os, int l) const {
  const LevelGrid& g = level(l);
  os << "container,kind,owner,masters,ghosts\n";
  for (std::size_t id = 0; id < g.containers.size(); ++id) {
    const auto& c = g.containers[id];
    os << id << ',' << to_string(c.kind) << ',' << c.owner << ',' << c.masters.size() << ','
       << c.ghosts.size() << '\n';
  }
}

GridHierarchy build_hierarchy(const PartitionSpec& spec) { return GridHierarchy(spec); }

NodeClass classify_node(const GridHierarchy& h, int level, const Index3& ijk) {
  const LevelGrid& g = h.level(level);
  for (int d = 0; d < 3; ++d) {
    if (ijk[d] < 0 || ijk[d] >= g.nodes[d]) {
      std::ostringstream msg;
      msg << "node (" << ijk[0] << ',' << ijk[1] << ',' << ijk[2] << ") outside level " << level;
      fail(ErrorCode::OutOfRange, msg.str());
    }
  }
  const int c = g.container_of[g.index(ijk)];
  if (c < 0) return {NodeKind::DomainBoundary, -1};
  switch (h.entities()[c].kind) {
    case ContainerKind::Volume: return {NodeKind::VolumeInterior, c};
    case ContainerKind::Face: return {NodeKind::FaceNode, c};
    case ContainerKind::Edge: return {NodeKind::EdgeNode, c};
    case ContainerKind::Vertex: return {NodeKind::VertexNode, c};
  }
  return {};
}

FieldVector::FieldVector(const GridHierarchy& h) {
  values_.resize(h.level_count());
  ghosts_.resize(h.level_count());
  for (int l = 0; l < h.level_count(); ++l) {
    const LevelGrid& g = h.level(l);
    values_[l].assign(g.size(), 0.0);
    ghosts_[l].resize(g.containers.size());
    for (std::size_t c = 0; c < g.containers.size(); ++c) {
      ghosts_[l][c].assign(g.containers[c].ghosts.size(), 0.0);
    }
  }
}

void sync_ghosts(const GridHierarchy& h, FieldVector& u, int level) {
  const LevelGrid& g = h.level(level);
  const auto values = u.values(level);
  for (std::size_t c = 0; c < g.containers.size(); ++c) {
    const auto& idx = g.containers[c].ghosts;
    auto slots = u.ghosts(level, static_cast<int>(c));
    for (std::size_t k = 0; k < idx.size(); ++k) slots[k] = values[idx[k]];
  }
}

double max_ghost_mismatch(const GridHierarchy& h, const FieldVector& u, int level) {
  const LevelGrid& g = h.level(level);
  const auto values = u.values(level);
  double worst = 0.0;
  for (std::size_t c = 0; c < g.containers.size(); ++c) {
    const auto& idx = g.containers[c].ghosts;
    const auto slots = u.ghosts(level, static_cast<int>(c));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double d = std::abs(slots[k] - values[idx[k]]);
      if (!(d <= worst)) worst = d;  // NaN propagates
    }
  }
  return worst;
}

bool RegionMask::is_faulty(int subdomain) const {
  return std::binary_search(faulty_.begin(), faulty_.end(), subdomain);
}

std::size_t RegionMask::count(int l, Region r) const {
  const auto lv = level(l);
  return static_cast<std::size_t>(std::count(lv.begin(), lv.end(), r));
}

namespace {

std::vector<int> checked_faulty_set(const GridHierarchy& h, std::span<const int> faulty) {
  std::vector<int> ids(faulty.begin(), faulty.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids) {
    if (id < 0 || id >= h.subdomain_count()) {
      fail(ErrorCode::OutOfRange, "faulty subdomain id " + std::to_string(id) + " out of range");
    }
  }
  return ids;
}

std::vector<Region> entity_regions(const GridHierarchy& h, const std::vector<int>& faulty) {
  std::vector<Region> out;
  out.reserve(h.entities().size());
  for (const auto& e : h.entities()) {
    std::size_t bad = 0;
    for (int s : e.adjacent) bad += std::binary_search(faulty.begin(), faulty.end(), s);
    if (bad == 0) {
      out.push_back(Region::Healthy);
    } else if (bad == e.adjacent.size()) {
      out.push_back(Region::Faulty);
    } else {
      out.push_back(Region::Interface);
    }
  }
  return out;
}

}  // namespace

RegionMask region_masks(const GridHierarchy& h, std::span<const int> faulty) {
  std::vector<int> ids = checked_faulty_set(h, faulty);
  if (static_cast<int>(ids.size()) == h.subdomain_count()) {
    fail(ErrorCode::NoHealthyRegion, "every subdomain is marked faulty");
  }
  std::vector<Region> ent = entity_regions(h, ids);
  std::vector<std::vector<Region>> levels(h.level_count());
  for (int l = 0; l < h.level_count(); ++l) {
    const LevelGrid& g = h.level(l);
    levels[l].resize(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
      const int c = g.container_of[n];
      levels[l][n] = c < 0 ? Region::Dirichlet : ent[c];
    }
  }
  return RegionMask(std::move(ids), std::move(levels), std::move(ent));
}

std::size_t restore_interface(const GridHierarchy& h, FieldVector& u, std::span<const int> faulty,
                              int level) {
  const std::vector<int> ids = checked_faulty_set(h, faulty);
  if (ids.empty()) return 0;
  const std::vector<Region> ent = entity_regions(h, ids);
  const LevelGrid& g = h.level(level);
  auto values = u.values(level);
  std::size_t restored = 0;
  for (std::size_t c = 0; c < g.containers.size(); ++c) {
    if (ent[c] != Region::Interface) continue;
    // Surviving copies: ghosts held by the healthy volume containers.
    std::vector<int> holders;
    for (int s : h.entities()[c].adjacent) {
      if (!std::binary_search(ids.begin(), ids.end(), s)) holders.push_back(s);
    }
    for (std::int32_t n : g.containers[c].masters) {
      bool found = false;
      for (int s : holders) {
        const auto& gl = g.containers[s].ghosts;
        const auto it = std::lower_bound(gl.begin(), gl.end(), n);
        if (it != gl.end() && *it == n) {
          values[n] = u.ghosts(level, s)[static_cast<std::size_t>(it - gl.begin())];
          found = true;
          break;
        }
      }
      if (!found) {
        fail(ErrorCode::UnrecoverableInterface,
             "interface node " + std::to_string(n) + " has no surviving copy");
      }
      ++restored;
    }
  }
  return restored;
}

}  // namespace ftmg
