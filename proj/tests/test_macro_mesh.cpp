#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "klref/macro_mesh.hpp"
#include "support/fixtures.hpp"

using namespace klref;
using namespace klref::testing;

namespace {

MarkSet marks_of(std::initializer_list<Index> ids) {
  MarkSet m;
  m.ids = ids;
  return m;
}

std::size_t count_state(const MacroMesh& m, ElementState s) {
  std::size_t n = 0;
  for (Index id : m.active())
    if (m.element(id).state == s) ++n;
  return n;
}

}  // namespace

TEST_CASE("mark_top_fraction selects the largest indicators") {
  const MacroMesh mesh = triangle_strip_10();
  REQUIRE(mesh.num_active() == 10);

  SUBCASE("top 1 of 10") {
    const std::vector<double> ind{5, 4, 3, 2, 1, 0.5, 0.2, 0.1, 0.05, 0.01};
    const MarkSet m = mark_top_fraction(mesh, ind, 0.10);
    CHECK(m.ids == std::vector<Index>{0});
  }
  SUBCASE("ties break to the lowest id") {
    const std::vector<double> ind(10, 1.0);
    const MarkSet m = mark_top_fraction(mesh, ind, 0.10);
    CHECK(m.ids == std::vector<Index>{0});
  }
  SUBCASE("fraction one marks everything") {
    const std::vector<double> ind(10, 1.0);
    const MarkSet m = mark_top_fraction(mesh, ind, 1.0);
    CHECK(m.ids.size() == 10);
  }
  SUBCASE("ceiling guarantees progress") {
    const std::vector<double> ind(10, 1.0);
    CHECK(mark_top_fraction(mesh, ind, 0.01).ids.size() == 1);
  }
  SUBCASE("length mismatch is a structural error") {
    CHECK_THROWS_AS(mark_top_fraction(mesh, {1.0, 2.0}, 0.5), StructuralError);
  }
}

TEST_CASE("refine_rg_2d single marked triangle becomes four similar children") {
  const MacroMesh mesh = single_triangle();
  const MacroMesh ref = refine_rg_2d(mesh, marks_of({0}));
  CHECK(ref.num_active() == 4);
  CHECK(ref.num_vertices() == 6);
  CHECK(conformity_check(ref).empty());
  CHECK(ref.total_volume() == doctest::Approx(0.5).epsilon(1e-13));
  for (Index id : ref.active()) CHECK(ref.element(id).state == ElementState::RedChild);
  // Children of a red split are similar to the parent.
  const auto q = mesh_quality(ref);
  for (const auto& e : q) CHECK(e.min_angle == doctest::Approx(M_PI / 4).epsilon(1e-12));
}

TEST_CASE("refine_rg_2d closes the neighbor with a green bisection") {
  const MacroMesh mesh = two_triangle_square();
  const MacroMesh ref = refine_rg_2d(mesh, marks_of({0}));
  CHECK(ref.num_active() == 6);
  CHECK(count_state(ref, ElementState::RedChild) == 4);
  CHECK(count_state(ref, ElementState::GreenChild) == 2);
  CHECK(conformity_check(ref).empty());
  CHECK(geometric_hanging_count(ref) == 0);
  CHECK(ref.total_volume() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("refine_rg_2d with no marks leaves the mesh untouched") {
  const MacroMesh mesh = two_triangle_square();
  const MacroMesh ref = refine_rg_2d(mesh, MarkSet{});
  CHECK(ref == mesh);
}

TEST_CASE("boundary flags propagate to midpoints of boundary edges") {
  const MacroMesh ref = refine_rg_2d(two_triangle_square(), marks_of({0}));
  bool saw_boundary_mid = false, saw_interior_mid = false;
  for (std::size_t i = 4; i < ref.num_vertices(); ++i) {
    const auto& v = ref.vertex(static_cast<Index>(i));
    const bool on_unit_square_rim = v.coords[0] == 0.0 || v.coords[0] == 1.0 ||
                                    v.coords[1] == 0.0 || v.coords[1] == 1.0;
    CHECK(v.boundary == on_unit_square_rim);
    saw_boundary_mid = saw_boundary_mid || on_unit_square_rim;
    saw_interior_mid = saw_interior_mid || !on_unit_square_rim;
  }
  CHECK(saw_boundary_mid);
  CHECK(saw_interior_mid);
}

TEST_CASE("revert_green restores parents and keeps red marks") {
  SUBCASE("mesh without greens is returned unchanged") {
    const MacroMesh mesh = two_triangle_square();
    const auto [rev, marks] = revert_green(mesh, marks_of({1}));
    CHECK(rev == mesh);
    CHECK(marks.ids == std::vector<Index>{1});
  }
  SUBCASE("green pair collapses to the parent and re-exposes one hanging node") {
    const MacroMesh ref = refine_rg_2d(two_triangle_square(), marks_of({0}));
    // Mark one red child; the greens must disappear, the mark must survive.
    Index red_child = kNoIndex;
    for (Index id : ref.active())
      if (ref.element(id).state == ElementState::RedChild) red_child = id;
    const auto [rev, marks] = revert_green(ref, marks_of({red_child}));
    CHECK(rev.num_active() == 5);  // 4 red children + restored parent
    CHECK(count_state(rev, ElementState::GreenChild) == 0);
    CHECK(marks.ids == std::vector<Index>{red_child});
    const auto reports = conformity_check(rev);
    REQUIRE(reports.size() == 1);
    CHECK(rev.element(reports[0].element).state == ElementState::Unrefined);
    CHECK(geometric_hanging_count(rev) == 1);
    CHECK(rev.total_volume() == doctest::Approx(1.0).epsilon(1e-13));
  }
  SUBCASE("marks on green children transfer to the parent") {
    const MacroMesh ref = refine_rg_2d(two_triangle_square(), marks_of({0}));
    Index green_child = kNoIndex;
    for (Index id : ref.active())
      if (ref.element(id).state == ElementState::GreenChild) green_child = id;
    const auto [rev, marks] = revert_green(ref, marks_of({green_child}));
    REQUIRE(marks.ids.size() == 1);
    CHECK(marks.ids[0] == ref.element(green_child).parent);
    CHECK(rev.element(marks.ids[0]).state == ElementState::Unrefined);
  }
}

TEST_CASE("refine_rg_3d applies the regular eight-way split") {
  const MacroMesh mesh = single_tet();
  const MacroMesh ref = refine_rg_3d(mesh, marks_of({0}));
  CHECK(ref.num_active() == 8);
  CHECK(ref.num_vertices() == 10);
  CHECK(conformity_check(ref).empty());
  CHECK(ref.total_volume() == doctest::Approx(mesh.total_volume()).epsilon(1e-13));

  SUBCASE("empty marks leave the mesh unchanged") {
    CHECK(refine_rg_3d(mesh, MarkSet{}) == mesh);
  }
}

TEST_CASE("refine_rg_3d closes a face neighbor with a three-vertex green split") {
  const MacroMesh mesh = two_tets_shared_face();
  const double vol = mesh.total_volume();
  const MacroMesh ref = refine_rg_3d(mesh, marks_of({0}));
  CHECK(ref.num_active() == 12);
  CHECK(count_state(ref, ElementState::RedChild) == 8);
  CHECK(count_state(ref, ElementState::GreenChild) == 4);
  for (Index id : ref.active())
    if (ref.element(id).state == ElementState::GreenChild)
      CHECK(ref.element(id).green_type == GreenType::ThreeVertices);
  CHECK(conformity_check(ref).empty());
  CHECK(geometric_hanging_count(ref) == 0);
  CHECK(ref.total_volume() == doctest::Approx(vol).epsilon(1e-13));

  SUBCASE("reverting the closure exposes three hanging nodes on the parent") {
    const auto [rev, marks] = revert_green(ref, MarkSet{});
    CHECK(rev.num_active() == 9);
    const auto reports = conformity_check(rev);
    CHECK(reports.size() == 3);
    for (const auto& r : reports) CHECK(r.element == 1);
    CHECK(rev.total_volume() == doctest::Approx(vol).epsilon(1e-13));
  }
}

TEST_CASE("refine_rg_3d produces one- and two-vertex green closures") {
  const MacroMesh mesh = three_tets_edge_chain();
  const double vol = mesh.total_volume();

  SUBCASE("one split edge bisects the neighbor") {
    const MacroMesh ref = refine_rg_3d(mesh, marks_of({0}));
    std::map<GreenType, int> green_counts;
    for (Index id : ref.active())
      if (ref.element(id).state == ElementState::GreenChild) ++green_counts[ref.element(id).green_type];
    CHECK(green_counts[GreenType::OneVertex] == 2);
    CHECK(conformity_check(ref).empty());
    CHECK(ref.total_volume() == doctest::Approx(vol).epsilon(1e-13));
  }
  SUBCASE("two opposite split edges yield a four-child closure") {
    const MacroMesh ref = refine_rg_3d(mesh, marks_of({0, 2}));
    std::map<GreenType, int> green_counts;
    for (Index id : ref.active())
      if (ref.element(id).state == ElementState::GreenChild) ++green_counts[ref.element(id).green_type];
    CHECK(green_counts[GreenType::TwoVertices] == 4);
    CHECK(conformity_check(ref).empty());
    CHECK(geometric_hanging_count(ref) == 0);
    CHECK(ref.total_volume() == doctest::Approx(vol).epsilon(1e-13));
  }
}

TEST_CASE("conformity_check on trivial meshes") {
  CHECK(conformity_check(single_triangle()).empty());
  CHECK(conformity_check(single_tet()).empty());
}

TEST_CASE("mesh_quality geometry accessors") {
  const MacroMesh tri = single_triangle();
  const auto q = mesh_quality(tri);
  REQUIRE(q.size() == 1);
  CHECK(q[0].min_angle == doctest::Approx(M_PI / 4).epsilon(1e-12));
  CHECK(q[0].h == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  const MacroMesh eq = MacroMesh::create(
      2, {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}}, {{0, 1, 2, kNoIndex}});
  CHECK(mesh_quality(eq)[0].min_angle == doctest::Approx(M_PI / 3).epsilon(1e-12));

  // Barycenter distance to a reference point.
  const Point bary = tri.element_barycenter(0);
  CHECK(tri.element_distance(0, bary) == doctest::Approx(0.0));
  CHECK(tri.element_distance(0, {0, 0, 0}) ==
        doctest::Approx(std::hypot(1.0 / 3, 1.0 / 3)).epsilon(1e-12));

  // Regular tetrahedron dihedral angle.
  const std::array<Point, 4> regular{{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};
  CHECK(tet_min_dihedral(regular) == doctest::Approx(std::acos(1.0 / 3)).epsilon(1e-12));

  const std::array<Point, 3> degenerate{{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}};
  CHECK(triangle_min_angle(degenerate) == 0.0);
}

TEST_CASE("red similarity classes stay bounded over eight generations") {
  // Expands one representative per similarity class; dihedral quality must not
  // degrade after the first generation.
  auto signature = [](const std::array<Point, 4>& tet) {
    static const int E[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    std::array<double, 6> len{};
    for (int e = 0; e < 6; ++e) {
      const double dx = tet[E[e][0]][0] - tet[E[e][1]][0];
      const double dy = tet[E[e][0]][1] - tet[E[e][1]][1];
      const double dz = tet[E[e][0]][2] - tet[E[e][1]][2];
      len[e] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    std::sort(len.begin(), len.end());
    std::array<long long, 6> key{};
    for (int e = 0; e < 6; ++e) key[e] = std::llround(len[e] / len[5] * 1e9);
    return key;
  };

  std::vector<std::array<Point, 4>> classes{
      {{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 1, 1}}}};
  std::set<std::array<long long, 6>> seen{signature(classes[0])};
  double gen1_min = 0.0;
  for (int gen = 1; gen <= 8; ++gen) {
    std::vector<std::array<Point, 4>> next;
    double gen_min = M_PI;
    for (const auto& tet : classes) {
      for (const auto& child : bey_red_split_coords(tet)) {
        gen_min = std::min(gen_min, tet_min_dihedral(child));
        if (seen.insert(signature(child)).second) next.push_back(child);
      }
    }
    if (gen == 1) gen1_min = gen_min;
    if (gen > 1) CHECK(gen_min >= gen1_min - 1e-12);
    classes = std::move(next);
    if (classes.empty()) break;
  }
  CHECK(seen.size() <= 20);
}

TEST_CASE("randomized 2-d mark sequences keep the mesh conforming") {
  std::mt19937_64 rng(20240817);
  for (int trial = 0; trial < 25; ++trial) {
    MacroMesh mesh = two_triangle_square();
    const double vol0 = mesh.total_volume();
    double gen1_min = 0.0;
    for (int step = 0; step < 6; ++step) {
      std::vector<double> ind(mesh.num_active());
      for (auto& x : ind) x = std::uniform_real_distribution<double>(0, 1)(rng);
      auto [reverted, marks] =
          revert_green(mesh, mark_top_fraction(mesh, ind, 0.25));
      // Re-mark on the reverted element set.
      std::vector<double> ind2(reverted.num_active());
      for (auto& x : ind2) x = std::uniform_real_distribution<double>(0, 1)(rng);
      mesh = refine_rg_2d(reverted, mark_top_fraction(reverted, ind2, 0.25));

      CHECK(conformity_check(mesh).empty());
      CHECK(mesh.total_volume() == doctest::Approx(vol0).epsilon(1e-12));
      for (Index id : mesh.active()) {
        const auto& el = mesh.element(id);
        if (el.state == ElementState::GreenChild)
          CHECK(mesh.element(el.parent).state != ElementState::GreenChild);
      }
      double min_q = M_PI;
      for (const auto& q : mesh_quality(mesh)) min_q = std::min(min_q, q.min_angle);
      // Worst shape in the right-isoceles family is the short-leg green child.
      CHECK(min_q >= std::atan(1.0 / 3.0) - 1e-12);
      (void)gen1_min;
    }
  }
}

TEST_CASE("green closures do not compound: quality floor on equilateral grids") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    MacroMesh mesh = equilateral_grid(3, 2);
    double gen1_min = 0.0;
    for (int step = 0; step < 8; ++step) {
      std::vector<double> ind(mesh.num_active());
      for (auto& x : ind) x = std::uniform_real_distribution<double>(0, 1)(rng);
      auto [reverted, marks] = revert_green(mesh, MarkSet{});
      std::vector<double> ind2(reverted.num_active());
      for (auto& x : ind2) x = std::uniform_real_distribution<double>(0, 1)(rng);
      mesh = refine_rg_2d(reverted, mark_top_fraction(reverted, ind2, 0.15));
      double min_q = M_PI;
      for (const auto& q : mesh_quality(mesh)) min_q = std::min(min_q, q.min_angle);
      if (step == 0) gen1_min = min_q;
      CHECK(min_q >= 0.5 * gen1_min - 1e-12);
      CHECK(conformity_check(mesh).empty());
    }
  }
}

TEST_CASE("identical refinement inputs give bit-identical meshes") {
  auto run = [] {
    MacroMesh mesh = two_triangle_square();
    mesh = refine_rg_2d(mesh, marks_of({0}));
    auto [rev, marks] = revert_green(mesh, marks_of({2}));
    return refine_rg_2d(rev, marks);
  };
  CHECK(run() == run());
}

TEST_CASE("create rejects malformed meshes") {
  CHECK_THROWS_AS(MacroMesh::create(2, {{0, 0, 0}, {1, 0, 0}}, {{0, 1, 1, kNoIndex}}),
                  StructuralError);
  // Degenerate element.
  CHECK_THROWS_AS(
      MacroMesh::create(2, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2, kNoIndex}}),
      StructuralError);
  // Hanging node: vertex 3 sits on the edge of element 0.
  CHECK_THROWS_AS(MacroMesh::create(2,
                                    {{0, 0, 0},
                                     {1, 0, 0},
                                     {0, 1, 0},
                                     {0.5, 0.5, 0},
                                     {1, 1, 0}},
                                    {{0, 1, 2, kNoIndex}, {1, 4, 3, kNoIndex}}),
                  StructuralError);
}
