#pragma once

// Nested structured grids over a box partition of the unit cube, with the
// master/ghost container system used for communication and recovery.
//
// Every node of every level is classified geometrically against the box
// partition. Nodes strictly inside a box are volume masters, nodes on a
// shared face / edge / corner belong to the corresponding interface
// container and nodes on the outer surface carry Dirichlet data. Each
// container additionally holds one layer of ghost copies of the masters it
// touches. Node ids are lexicographic with x fastest and z slowest.

#include "ftmg/errors.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace ftmg {

using Index3 = std::array<int, 3>;

struct PartitionSpec {
  Index3 subdomains{1, 1, 1};
  int base_cells = 2;  ///< cells per axis per subdomain on level 0
  int levels = 1;      ///< finest level index L

  bool operator==(const PartitionSpec&) const = default;
};

/// Throws InvalidArgument for specs that cannot be built.
void validate(const PartitionSpec& spec);

enum class ContainerKind : std::uint8_t { Volume, Face, Edge, Vertex };

const char* to_string(ContainerKind kind);

enum class NodeKind : std::uint8_t {
  VolumeInterior,
  FaceNode,
  EdgeNode,
  VertexNode,
  DomainBoundary,
};

struct NodeClass {
  NodeKind kind = NodeKind::DomainBoundary;
  /// Subdomain id for volume nodes, container id for interface nodes, -1 on the boundary.
  int id = -1;

  bool operator==(const NodeClass&) const = default;
};

/// Geometric entity of the partition. Coordinates are "doubled": an odd
/// coordinate 2b+1 lies inside box slab b, an even coordinate 2b on the
/// partition plane between slabs b-1 and b.
struct Entity {
  ContainerKind kind = ContainerKind::Volume;
  Index3 coord{};
  std::vector<int> adjacent;  ///< sorted ids of the subdomains whose closure contains the entity
};

struct Container {
  ContainerKind kind = ContainerKind::Volume;
  int owner = 0;  ///< logical process id
  std::vector<std::int32_t> masters;  ///< lexicographic
  std::vector<std::int32_t> ghosts;   ///< lexicographic; each is a master of exactly one other container
};

struct LevelGrid {
  int level = 0;
  int cells_per_subdomain = 0;
  Index3 cells{};
  Index3 nodes{};
  std::array<double, 3> inv_h2{};  ///< 1/h_d^2, exact integers
  std::array<std::ptrdiff_t, 3> stride{};

  std::vector<std::int32_t> container_of;  ///< per node, -1 for Dirichlet nodes
  std::vector<Container> containers;       ///< indexed by container id
  std::vector<std::int32_t> smoothing_order;  ///< masters of volumes, then faces, edges, vertices

  std::size_t size() const {
    return static_cast<std::size_t>(nodes[0]) * nodes[1] * nodes[2];
  }
  std::int32_t index(int i, int j, int k) const {
    return static_cast<std::int32_t>((static_cast<std::ptrdiff_t>(k) * nodes[1] + j) * nodes[0] + i);
  }
  std::int32_t index(const Index3& ijk) const { return index(ijk[0], ijk[1], ijk[2]); }
  Index3 ijk(std::int32_t n) const {
    return {n % nodes[0], (n / nodes[0]) % nodes[1], n / (nodes[0] * nodes[1])};
  }
  std::array<double, 3> position(std::int32_t n) const;
  bool on_boundary(std::int32_t n) const { return container_of[n] < 0; }
};

class GridHierarchy {
 public:
  explicit GridHierarchy(const PartitionSpec& spec);

  const PartitionSpec& spec() const { return spec_; }
  int finest() const { return spec_.levels; }
  int level_count() const { return spec_.levels + 1; }
  const LevelGrid& level(int l) const;

  int subdomain_count() const;
  int subdomain_id(const Index3& box) const;
  Index3 subdomain_box(int id) const;

  /// Entities in container-id order: volumes (== subdomain ids), faces, edges, vertices.
  const std::vector<Entity>& entities() const { return entities_; }
  std::size_t count(ContainerKind kind) const;

  /// Index of the level-l node that coincides with coarse node n of level l-1.
  std::int32_t inject_index(int coarse_level, std::int32_t n) const;

  /// Dirichlet nodes on the closure of a subdomain, level l.
  std::vector<std::int32_t> boundary_nodes_of(int level, int subdomain) const;

  /// Debug table: container id, kind, owner, master count, ghost count.
  void dump_containers_csv(std::ostream& os, int level) const;

 private:
  PartitionSpec spec_;
  std::vector<Entity> entities_;
  std::vector<LevelGrid> levels_;
};

GridHierarchy build_hierarchy(const PartitionSpec& spec);

/// Throws OutOfRange for indices outside the level.
NodeClass classify_node(const GridHierarchy& h, int level, const Index3& ijk);

/// Level-indexed nodal values. Master values of all containers live in one
/// lexicographic array per level (including Dirichlet nodes); every container
/// keeps its ghost copies in a separate array aligned with Container::ghosts.
class FieldVector {
 public:
  explicit FieldVector(const GridHierarchy& h);

  std::span<double> values(int level) { return values_.at(level); }
  std::span<const double> values(int level) const { return values_.at(level); }
  std::span<double> ghosts(int level, int container) { return ghosts_.at(level).at(container); }
  std::span<const double> ghosts(int level, int container) const {
    return ghosts_.at(level).at(container);
  }
  int level_count() const { return static_cast<int>(values_.size()); }

  bool operator==(const FieldVector&) const = default;

 private:
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<std::vector<double>>> ghosts_;
};

/// Copies every master into all of its ghost slots on one level.
void sync_ghosts(const GridHierarchy& h, FieldVector& u, int level);

/// Largest |ghost - master| over all containers of a level.
double max_ghost_mismatch(const GridHierarchy& h, const FieldVector& u, int level);

enum class Region : std::uint8_t { Healthy, Interface, Faulty, Dirichlet };

/// Per-level partition of nodes into the healthy region, the interface and
/// the faulty region (Dirichlet nodes marked separately).
class RegionMask {
 public:
  RegionMask() = default;
  RegionMask(std::vector<int> faulty, std::vector<std::vector<Region>> levels,
             std::vector<Region> entity_regions)
      : faulty_(std::move(faulty)), levels_(std::move(levels)), entities_(std::move(entity_regions)) {}

  const std::vector<int>& faulty() const { return faulty_; }
  bool is_faulty(int subdomain) const;
  std::span<const Region> level(int l) const { return levels_.at(l); }
  Region at(int l, std::int32_t n) const { return levels_.at(l)[n]; }
  /// Region of an entity (by container id).
  Region entity(int container) const { return entities_.at(container); }
  int level_count() const { return static_cast<int>(levels_.size()); }
  std::size_t count(int l, Region r) const;

 private:
  std::vector<int> faulty_;
  std::vector<std::vector<Region>> levels_;
  std::vector<Region> entities_;
};

/// Throws OutOfRange for unknown ids and NoHealthyRegion when every subdomain is faulty.
RegionMask region_masks(const GridHierarchy& h, std::span<const int> faulty);

/// Rebuilds the interface values of the faulty subdomains from the ghost
/// copies held by healthy volume containers. Interface nodes shared only by
/// faulty subdomains and volume nodes are left untouched. Returns the number
/// of restored nodes.
std::size_t restore_interface(const GridHierarchy& h, FieldVector& u, std::span<const int> faulty,
                              int level);

}  // namespace ftmg
