#include "ftmg/grid_hierarchy.hpp"

#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

using namespace ftmg;

namespace {

struct EntityCount {
  int volume = 0, face = 0, edge = 0, vertex = 0;
};

// Independent enumeration: a doubled coordinate with k odd components is a
// (k)-dimensional entity; entities touching the outer surface are not shared.
EntityCount brute_force_entities(const Index3& P) {
  EntityCount c;
  for (int x = 0; x <= 2 * P[0]; ++x) {
    for (int y = 0; y <= 2 * P[1]; ++y) {
      for (int z = 0; z <= 2 * P[2]; ++z) {
        const Index3 d{x, y, z};
        bool outer = false;
        int odd = 0;
        for (int a = 0; a < 3; ++a) {
          if (d[a] % 2 == 1) ++odd;
          else if (d[a] == 0 || d[a] == 2 * P[a]) outer = true;
        }
        if (outer) continue;
        if (odd == 3) ++c.volume;
        if (odd == 2) ++c.face;
        if (odd == 1) ++c.edge;
        if (odd == 0) ++c.vertex;
      }
    }
  }
  return c;
}

bool closure_contains(const Index3& coord, const Index3& box) {
  for (int a = 0; a < 3; ++a) {
    if (coord[a] < 2 * box[a] || coord[a] > 2 * box[a] + 2) return false;
  }
  return true;
}

// Interface entities by geometry alone: shared entities in the closure of a
// faulty box and of at least one healthy box.
std::map<ContainerKind, int> interface_by_geometry(const GridHierarchy& h, const std::set<int>& faulty) {
  std::map<ContainerKind, int> out;
  for (const Entity& e : h.entities()) {
    if (e.kind == ContainerKind::Volume) continue;
    bool touches_faulty = false, touches_healthy = false;
    for (int s = 0; s < h.subdomain_count(); ++s) {
      if (!closure_contains(e.coord, h.subdomain_box(s))) continue;
      (faulty.count(s) ? touches_faulty : touches_healthy) = true;
    }
    if (touches_faulty && touches_healthy) ++out[e.kind];
  }
  return out;
}

std::map<ContainerKind, int> interface_by_mask(const GridHierarchy& h, const RegionMask& m) {
  std::map<ContainerKind, int> out;
  for (std::size_t c = 0; c < h.entities().size(); ++c) {
    if (m.entity(static_cast<int>(c)) == Region::Interface) ++out[h.entities()[c].kind];
  }
  return out;
}

void fill(const GridHierarchy& h, FieldVector& u, int l, double (*fn)(const std::array<double, 3>&)) {
  const LevelGrid& g = h.level(l);
  auto v = u.values(l);
  for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) v[n] = fn(g.position(n));
}

double x_plus_2y(const std::array<double, 3>& x) { return x[0] + 2.0 * x[1]; }
double linear3(const std::array<double, 3>& x) { return 0.5 * x[0] - 1.25 * x[1] + 3.0 * x[2]; }

}  // namespace

TEST_CASE("single subdomain level counts") {
  const GridHierarchy h({{1, 1, 1}, 2, 1});
  CHECK(h.subdomain_count() == 1);
  CHECK(h.level_count() == 2);
  CHECK(h.level(1).size() == 125);
  CHECK(h.level(0).size() == 27);
}

TEST_CASE("node count formula on every level") {
  const PartitionSpec spec{{3, 2, 1}, 3, 2};
  const GridHierarchy h(spec);
  for (int l = 0; l <= 2; ++l) {
    std::size_t expect = 1;
    for (int d = 0; d < 3; ++d) expect *= static_cast<std::size_t>(spec.subdomains[d] * 3 * (1 << l) + 1);
    CHECK(h.level(l).size() == expect);
  }
}

TEST_CASE("two boxes share one face") {
  const GridHierarchy h({{2, 1, 1}, 2, 1});
  REQUIRE(h.count(ContainerKind::Face) == 1);
  int face = -1;
  for (std::size_t c = 0; c < h.entities().size(); ++c) {
    if (h.entities()[c].kind == ContainerKind::Face) face = static_cast<int>(c);
  }
  // Interior of the plane x = 0.5 without its rim.
  CHECK(h.level(0).containers[face].masters.size() == 1);
  CHECK(h.level(1).containers[face].masters.size() == 9);
  const LevelGrid& g = h.level(1);
  for (std::int32_t n : g.containers[face].masters) CHECK(g.position(n)[0] == 0.5);
}

TEST_CASE("3x3x3 partition entity counts") {
  const Index3 P{3, 3, 3};
  const GridHierarchy h({P, 2, 3});
  const EntityCount e = brute_force_entities(P);
  CHECK(e.volume == 27);
  CHECK(e.face == 54);
  CHECK(e.edge == 36);
  CHECK(e.vertex == 8);
  CHECK(h.count(ContainerKind::Volume) == static_cast<std::size_t>(e.volume));
  CHECK(h.count(ContainerKind::Face) == static_cast<std::size_t>(e.face));
  CHECK(h.count(ContainerKind::Edge) == static_cast<std::size_t>(e.edge));
  CHECK(h.count(ContainerKind::Vertex) == static_cast<std::size_t>(e.vertex));
}

TEST_CASE("entity counts on anisotropic partitions") {
  for (const Index3 P : {Index3{2, 1, 1}, Index3{2, 3, 1}, Index3{4, 2, 3}}) {
    const GridHierarchy h({P, 2, 0});
    const EntityCount e = brute_force_entities(P);
    CHECK(h.count(ContainerKind::Volume) == static_cast<std::size_t>(e.volume));
    CHECK(h.count(ContainerKind::Face) == static_cast<std::size_t>(e.face));
    CHECK(h.count(ContainerKind::Edge) == static_cast<std::size_t>(e.edge));
    CHECK(h.count(ContainerKind::Vertex) == static_cast<std::size_t>(e.vertex));
  }
}

TEST_CASE("invalid partitions are rejected") {
  CHECK_THROWS_AS(GridHierarchy({{1, 1, 1}, 1, 2}), Error);
  CHECK_THROWS_AS(GridHierarchy({{0, 1, 1}, 2, 2}), Error);
  CHECK_THROWS_AS(GridHierarchy({{1, 1, 1}, 2, -1}), Error);
  try {
    validate({{1, 1, 1}, 1, 2});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("classify_node examples") {
  const GridHierarchy h({{2, 2, 2}, 2, 1});
  const LevelGrid& g = h.level(1);
  // Box (1,0,1) spans cells 4..8 in x; its center is node (6,2,6).
  const NodeClass center = classify_node(h, 1, {6, 2, 6});
  CHECK(center.kind == NodeKind::VolumeInterior);
  CHECK(center.id == h.subdomain_id({1, 0, 1}));
  CHECK(classify_node(h, 1, {0, 3, 3}).kind == NodeKind::DomainBoundary);
  CHECK(classify_node(h, 1, {3, 3, 8}).kind == NodeKind::DomainBoundary);
  const NodeClass mid = classify_node(h, 1, {4, 4, 4});
  CHECK(g.position(g.index(4, 4, 4)) == std::array<double, 3>{0.5, 0.5, 0.5});
  REQUIRE(mid.kind == NodeKind::VertexNode);
  CHECK(h.entities()[mid.id].adjacent.size() == 8);
  CHECK(classify_node(h, 1, {4, 4, 2}).kind == NodeKind::EdgeNode);
  CHECK(classify_node(h, 1, {4, 2, 2}).kind == NodeKind::FaceNode);
  CHECK(classify_node(h, 1, {6, 2, 6}) == classify_node(h, 1, {6, 2, 6}));
}

TEST_CASE("classify_node rejects out-of-range indices") {
  const GridHierarchy h({{1, 1, 1}, 2, 1});
  try {
    classify_node(h, 1, {5, 0, 0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
  CHECK_THROWS(classify_node(h, 1, {0, -1, 0}));
}

TEST_CASE("node kinds are level independent") {
  const GridHierarchy h({{3, 2, 2}, 2, 2});
  for (int l = 1; l <= 2; ++l) {
    const LevelGrid& c = h.level(l - 1);
    for (std::int32_t n = 0; n < static_cast<std::int32_t>(c.size()); ++n) {
      const std::int32_t m = h.inject_index(l - 1, n);
      CHECK(h.level(l).position(m) == c.position(n));
      const NodeClass a = classify_node(h, l - 1, c.ijk(n));
      const NodeClass b = classify_node(h, l, h.level(l).ijk(m));
      CHECK(a == b);
    }
  }
}

TEST_CASE("master sets partition the non-Dirichlet nodes") {
  const GridHierarchy h({{3, 3, 3}, 2, 2});
  for (int l = 0; l < h.level_count(); ++l) {
    const LevelGrid& g = h.level(l);
    std::vector<int> owner(g.size(), -1);
    std::size_t total = 0;
    for (std::size_t c = 0; c < g.containers.size(); ++c) {
      for (std::int32_t n : g.containers[c].masters) {
        CHECK(owner[n] == -1);
        owner[n] = static_cast<int>(c);
        CHECK(g.container_of[n] == static_cast<int>(c));
        ++total;
      }
    }
    std::size_t interior = 0;
    for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
      if (!g.on_boundary(n)) ++interior;
      CHECK((owner[n] >= 0) == !g.on_boundary(n));
    }
    CHECK(total == interior);
    CHECK(g.smoothing_order.size() == interior);
  }
}

TEST_CASE("every ghost has exactly one foreign master") {
  const GridHierarchy h({{2, 2, 2}, 2, 1});
  const LevelGrid& g = h.level(1);
  for (std::size_t c = 0; c < g.containers.size(); ++c) {
    const auto& gh = g.containers[c].ghosts;
    CHECK(std::is_sorted(gh.begin(), gh.end()));
    for (std::int32_t n : gh) {
      REQUIRE(g.container_of[n] >= 0);
      CHECK(g.container_of[n] != static_cast<int>(c));
    }
  }
  // Volume containers see every adjacent interface master next to their own.
  const int v0 = h.subdomain_id({0, 0, 0});
  const auto& ghosts = g.containers[v0].ghosts;
  const std::int32_t face_node = g.index(4, 1, 1);
  CHECK(std::binary_search(ghosts.begin(), ghosts.end(), face_node));
  const std::int32_t vertex_node = g.index(4, 4, 4);
  CHECK(std::binary_search(ghosts.begin(), ghosts.end(), vertex_node));
}

TEST_CASE("sync_ghosts copies masters") {
  const GridHierarchy h({{2, 2, 1}, 2, 2});
  FieldVector u(h);
  const int L = h.finest();
  SUBCASE("constant") {
    auto v = u.values(L);
    std::fill(v.begin(), v.end(), 1.0);
    sync_ghosts(h, u, L);
    for (std::size_t c = 0; c < h.level(L).containers.size(); ++c) {
      for (double x : u.ghosts(L, static_cast<int>(c))) CHECK(x == 1.0);
    }
  }
  SUBCASE("linear function at ghost coordinates") {
    fill(h, u, L, linear3);
    sync_ghosts(h, u, L);
    const LevelGrid& g = h.level(L);
    for (std::size_t c = 0; c < g.containers.size(); ++c) {
      const auto& idx = g.containers[c].ghosts;
      const auto vals = u.ghosts(L, static_cast<int>(c));
      for (std::size_t k = 0; k < idx.size(); ++k) CHECK(vals[k] == linear3(g.position(idx[k])));
    }
    CHECK(max_ghost_mismatch(h, u, L) == 0.0);
  }
  SUBCASE("idempotent and master preserving") {
    fill(h, u, L, x_plus_2y);
    sync_ghosts(h, u, L);
    const FieldVector once = u;
    sync_ghosts(h, u, L);
    CHECK(u == once);
  }
  SUBCASE("mismatch detected until resync") {
    fill(h, u, L, x_plus_2y);
    sync_ghosts(h, u, L);
    const std::int32_t n = h.level(L).index(7, 1, 1);  // next to the face x = 0.5
    u.values(L)[n] += 0.25;
    CHECK(max_ghost_mismatch(h, u, L) >= 0.25);
    sync_ghosts(h, u, L);
    CHECK(max_ghost_mismatch(h, u, L) == 0.0);
  }
}

TEST_CASE("restore_interface rebuilds the faulty boundary from copies") {
  const GridHierarchy h({{3, 3, 3}, 2, 2});
  const int L = h.finest();
  const LevelGrid& g = h.level(L);
  FieldVector u(h);
  fill(h, u, L, x_plus_2y);
  sync_ghosts(h, u, L);
  const std::vector<int> faulty{h.subdomain_id({1, 1, 1})};
  const RegionMask m = region_masks(h, faulty);
  auto v = u.values(L);
  std::vector<double> volume_before;
  for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
    if (m.at(L, n) == Region::Interface) v[n] = -777.0;
    if (m.at(L, n) == Region::Faulty) volume_before.push_back(v[n] = -5.0);
  }
  const std::size_t restored = restore_interface(h, u, faulty, L);
  CHECK(restored == m.count(L, Region::Interface));
  for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
    if (m.at(L, n) == Region::Interface) CHECK(v[n] == x_plus_2y(g.position(n)));
    if (m.at(L, n) == Region::Faulty) CHECK(v[n] == -5.0);
  }
}

TEST_CASE("restore_interface with no faulty subdomain is the identity") {
  const GridHierarchy h({{2, 2, 2}, 2, 1});
  FieldVector u(h);
  fill(h, u, 1, linear3);
  const FieldVector before = u;
  CHECK(restore_interface(h, u, {}, 1) == 0);
  CHECK(u == before);
}

TEST_CASE("two disjoint faults restore like two single faults") {
  const GridHierarchy h({{3, 3, 3}, 2, 1});
  const int L = 1;
  const int a = h.subdomain_id({0, 0, 0}), b = h.subdomain_id({2, 2, 2});
  FieldVector u(h);
  fill(h, u, L, linear3);
  sync_ghosts(h, u, L);
  const RegionMask both = region_masks(h, std::vector<int>{a, b});
  auto poison = [&](FieldVector& w) {
    auto v = w.values(L);
    for (std::size_t n = 0; n < v.size(); ++n) {
      if (both.at(L, static_cast<std::int32_t>(n)) == Region::Interface) v[n] = 1e300;
    }
  };
  FieldVector joint = u, split = u;
  poison(joint);
  poison(split);
  restore_interface(h, joint, std::vector<int>{a, b}, L);
  restore_interface(h, split, std::vector<int>{a}, L);
  restore_interface(h, split, std::vector<int>{b}, L);
  CHECK(joint == split);
  CHECK(joint.values(L)[0] == u.values(L)[0]);
  for (std::size_t n = 0; n < u.values(L).size(); ++n) CHECK(joint.values(L)[n] == u.values(L)[n]);
}

TEST_CASE("every single fault leaves a surviving copy of each interface node") {
  const GridHierarchy h({{3, 3, 3}, 2, 1});
  FieldVector u(h);
  fill(h, u, 1, x_plus_2y);
  sync_ghosts(h, u, 1);
  for (int s = 0; s < h.subdomain_count(); ++s) {
    FieldVector w = u;
    const std::vector<int> f{s};
    const RegionMask m = region_masks(h, f);
    CHECK_NOTHROW(restore_interface(h, w, f, 1));
    CHECK(w == u);
    CHECK(m.count(1, Region::Interface) > 0);
  }
}

TEST_CASE("restore_interface rejects unknown subdomains") {
  const GridHierarchy h({{2, 1, 1}, 2, 1});
  FieldVector u(h);
  try {
    restore_interface(h, u, std::vector<int>{7}, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
}

TEST_CASE("region masks for the corner and the center") {
  const GridHierarchy h({{3, 3, 3}, 2, 2});
  SUBCASE("corner") {
    const std::set<int> f{h.subdomain_id({0, 0, 0})};
    const RegionMask m = region_masks(h, std::vector<int>(f.begin(), f.end()));
    auto got = interface_by_mask(h, m);
    CHECK(got == interface_by_geometry(h, f));
    CHECK(got[ContainerKind::Face] == 3);
    CHECK(got[ContainerKind::Edge] == 3);
    CHECK(got[ContainerKind::Vertex] == 1);
  }
  SUBCASE("center") {
    const std::set<int> f{h.subdomain_id({1, 1, 1})};
    const RegionMask m = region_masks(h, std::vector<int>(f.begin(), f.end()));
    auto got = interface_by_mask(h, m);
    CHECK(got == interface_by_geometry(h, f));
    CHECK(got[ContainerKind::Face] == 6);
    CHECK(got[ContainerKind::Edge] == 12);
    CHECK(got[ContainerKind::Vertex] == 8);
    // Floating: every node of the closure is either faulty or interface.
    const LevelGrid& g = h.level(2);
    for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
      const auto x = g.position(n);
      const bool inside = std::all_of(x.begin(), x.end(), [](double c) { return c > 1.0 / 3 && c < 2.0 / 3; });
      if (inside) CHECK(m.at(2, n) == Region::Faulty);
    }
  }
  SUBCASE("two faulty neighbours share no interface between them") {
    const std::set<int> f{h.subdomain_id({0, 0, 0}), h.subdomain_id({1, 0, 0})};
    const RegionMask m = region_masks(h, std::vector<int>(f.begin(), f.end()));
    CHECK(interface_by_mask(h, m) == interface_by_geometry(h, f));
    const LevelGrid& g = h.level(2);
    // The face between the two boxes is faulty, not interface.
    CHECK(m.at(2, g.index(4, 2, 2)) == Region::Faulty);
  }
}

TEST_CASE("region masks partition every level") {
  const GridHierarchy h({{3, 3, 3}, 2, 2});
  const RegionMask m = region_masks(h, std::vector<int>{13});
  for (int l = 0; l < h.level_count(); ++l) {
    const LevelGrid& g = h.level(l);
    std::size_t sum = 0;
    for (Region r : {Region::Healthy, Region::Interface, Region::Faulty, Region::Dirichlet}) {
      sum += m.count(l, r);
    }
    CHECK(sum == g.size());
    for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
      CHECK((m.at(l, n) == Region::Dirichlet) == g.on_boundary(n));
    }
    CHECK(m.count(l, Region::Faulty) > 0);
  }
}

TEST_CASE("empty faulty set is all healthy") {
  const GridHierarchy h({{2, 2, 2}, 2, 1});
  const RegionMask m = region_masks(h, {});
  const LevelGrid& g = h.level(1);
  for (std::int32_t n = 0; n < static_cast<std::int32_t>(g.size()); ++n) {
    CHECK(m.at(1, n) == (g.on_boundary(n) ? Region::Dirichlet : Region::Healthy));
  }
}

TEST_CASE("region mask errors") {
  const GridHierarchy h({{2, 1, 1}, 2, 1});
  try {
    region_masks(h, std::vector<int>{0, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoHealthyRegion);
  }
  try {
    region_masks(h, std::vector<int>{2});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
}

TEST_CASE("region masks are deterministic") {
  const GridHierarchy h({{3, 3, 3}, 2, 1});
  const RegionMask a = region_masks(h, std::vector<int>{4, 13});
  const RegionMask b = region_masks(h, std::vector<int>{13, 4});
  for (int l = 0; l < h.level_count(); ++l) {
    CHECK(std::equal(a.level(l).begin(), a.level(l).end(), b.level(l).begin()));
  }
}

TEST_CASE("boundary nodes of a subdomain closure") {
  const GridHierarchy h({{3, 3, 3}, 2, 1});
  const LevelGrid& g = h.level(1);
  CHECK(h.boundary_nodes_of(1, h.subdomain_id({1, 1, 1})).empty());
  const auto corner = h.boundary_nodes_of(1, h.subdomain_id({0, 0, 0}));
  // Three outer faces of a 5x5x5 closure: 3*25 - 3*5 + 1 nodes.
  CHECK(corner.size() == 61);
  for (std::int32_t n : corner) CHECK(g.on_boundary(n));
}

TEST_CASE("container dump") {
  const GridHierarchy h({{2, 1, 1}, 2, 1});
  std::ostringstream os;
  h.dump_containers_csv(os, 1);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "container,kind,owner,masters,ghosts");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(h.entities().size()));
  CHECK(os.str().find("2,face,") != std::string::npos);
}
