#ifndef KLREF_MACRO_MESH_HPP
#define KLREF_MACRO_MESH_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "klref/errors.hpp"

namespace klref {

using Index = std::int32_t;
inline constexpr Index kNoIndex = -1;

using Point = std::array<double, 3>;  // z == 0 in 2-d

struct MacroVertex {
  Index id = kNoIndex;
  Point coords{0.0, 0.0, 0.0};
  bool boundary = false;
};

enum class ElementState : std::uint8_t { Unrefined, RedChild, GreenChild };

// Green closure shapes in 3-d, by the number of accommodated new vertices.
// In 2-d the single green shape is an edge bisection and the type stays None.
enum class GreenType : std::uint8_t { None, OneVertex, TwoVertices, ThreeVertices };

struct MacroElement {
  Index id = kNoIndex;
  std::array<Index, 4> v{kNoIndex, kNoIndex, kNoIndex, kNoIndex};  // v[3] unused in 2-d
  ElementState state = ElementState::Unrefined;
  GreenType green_type = GreenType::None;
  Index parent = kNoIndex;
  bool active = true;
};

// Elements selected for red refinement. Kept sorted and unique.
struct MarkSet {
  std::vector<Index> ids;
};

struct HangingNodeReport {
  Index vertex = kNoIndex;
  Index element = kNoIndex;
};

struct ElementQuality {
  Index element = kNoIndex;
  double min_angle = 0.0;  // radians; min interior angle (2-d) or min dihedral (3-d)
  double h = 0.0;          // longest edge length
};

// Unstructured conforming simplicial coarse grid with red-green genealogy.
// Vertices and elements live in append-only arenas so that green reversion can
// reactivate parents. Edge midpoints are recorded on creation and never
// searched geometrically.
class MacroMesh {
 public:
  MacroMesh() = default;

  // Builds a generation-0 mesh and validates conformity (shared facets,
  // positive volumes, geometric hanging nodes).
  static MacroMesh create(int dim, std::vector<Point> vertex_coords,
                          std::vector<std::array<Index, 4>> element_vertices);

  int dim() const { return dim_; }
  int generation() const { return generation_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_active() const { return active_.size(); }
  const std::vector<Index>& active() const { return active_; }

  const MacroVertex& vertex(Index id) const { return vertices_.at(static_cast<std::size_t>(id)); }
  const MacroElement& element(Index id) const { return elements_.at(static_cast<std::size_t>(id)); }

  // Signed volume of the element (area in 2-d).
  double element_volume(Index id) const;
  double total_volume() const;
  Point element_barycenter(Index id) const;
  double element_h(Index id) const;
  double element_distance(Index id, const Point& ref) const;

  // Midpoint of edge (a, b) if some refinement created one.
  std::optional<Index> edge_midpoint(Index a, Index b) const;

  // Facet adjacency of the active mesh. Valid only in conforming states.
  bool edge_on_boundary(Index a, Index b) const;
  // Active element ids incident to the facet, ascending.
  std::vector<Index> edge_elements(Index a, Index b) const;
  std::vector<Index> face_elements(Index a, Index b, Index c) const;  // 3-d only

  // All vertices found on the boundary of the active element via the midpoint
  // genealogy, excluding its own corners.
  std::vector<Index> hanging_nodes(Index element_id) const;

  bool operator==(const MacroMesh& other) const;

 private:
  friend MarkSet mark_top_fraction(const MacroMesh&, const std::vector<double>&, double);
  friend std::pair<MacroMesh, MarkSet> revert_green(const MacroMesh&, const MarkSet&);
  friend MacroMesh refine_rg_2d(const MacroMesh&, const MarkSet&);
  friend MacroMesh refine_rg_3d(const MacroMesh&, const MarkSet&);

  Index get_or_create_midpoint(Index a, Index b);
  Index append_element(const std::array<Index, 4>& verts, ElementState state, GreenType green,
                       Index parent);
  void deactivate(Index id);
  void rebuild_active_list();
  // Recomputes facet->element adjacency and vertex boundary flags. Requires
  // the active mesh to be conforming.
  void rebuild_facets();
  void orient_positive(std::array<Index, 4>& verts) const;
  void collect_edge_nodes(Index a, Index b, std::set<Index>& out) const;
  void collect_face_nodes(Index a, Index b, Index c, std::set<Index>& out) const;
  std::vector<Index> split_edges_of(const MacroElement& el) const;
  void validate_marks(const MarkSet& marks) const;

  void red_refine_element(Index id);
  void green_close_2d(Index id, Index mid);
  void green_close_3d(Index id, const std::vector<Index>& split_edges);
  void run_closure_2d();
  void run_closure_3d();

  int dim_ = 2;
  int generation_ = 0;
  std::vector<MacroVertex> vertices_;
  std::vector<MacroElement> elements_;
  std::vector<Index> active_;  // ascending ids of active elements
  std::map<std::pair<Index, Index>, Index> midpoints_;
  // Facet tables of the active mesh (sorted vertex keys -> ascending element ids).
  std::map<std::pair<Index, Index>, std::vector<Index>> edge_table_;
  std::map<std::array<Index, 3>, std::vector<Index>> face_table_;
};

// Selects the ceil(fraction * #active) active elements with the largest
// indicator; ties resolved by ascending element id. `indicator` is aligned
// with mesh.active().
MarkSet mark_top_fraction(const MacroMesh& mesh, const std::vector<double>& indicator,
                          double fraction);

// Removes all green children and restores their parents; marks on green
// children transfer to the parent. The result is conforming except for the
// hanging nodes re-exposed on the restored parents.
std::pair<MacroMesh, MarkSet> revert_green(const MacroMesh& mesh, const MarkSet& marks);

MacroMesh refine_rg_2d(const MacroMesh& mesh, const MarkSet& marks);
MacroMesh refine_rg_3d(const MacroMesh& mesh, const MarkSet& marks);
inline MacroMesh refine_rg(const MacroMesh& mesh, const MarkSet& marks) {
  return mesh.dim() == 2 ? refine_rg_2d(mesh, marks) : refine_rg_3d(mesh, marks);
}

// Empty iff the active mesh has no hanging nodes.
std::vector<HangingNodeReport> conformity_check(const MacroMesh& mesh);

std::vector<ElementQuality> mesh_quality(const MacroMesh& mesh);

// Geometric kernel of the regular tetrahedron split: 4 corner children plus a
// 4-way split of the inner octahedron along its shortest diagonal (ties by
// the lexicographically smallest local index pair).
std::array<std::array<Point, 4>, 8> bey_red_split_coords(const std::array<Point, 4>& tet);

double tet_min_dihedral(const std::array<Point, 4>& tet);
double triangle_min_angle(const std::array<Point, 3>& tri);

}  // namespace klref

#endif
