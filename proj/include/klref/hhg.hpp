#ifndef KLREF_HHG_HPP
#define KLREF_HHG_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "klref/macro_mesh.hpp"

namespace klref {

// Barycentric triangle lattice with n subdivisions per edge, row-major in j.
inline int lattice_index(int n, int i, int j) { return j * (n + 1) - (j * (j - 1)) / 2 + i; }
inline int lattice_size(int n) { return (n + 1) * (n + 2) / 2; }

enum class SyncMode { ReplaceFromOwner, Additive };

// One node shared between macro copies; members ascend by macro slot.
struct SharedNodeGroup {
  struct Member {
    std::int32_t slot;
    std::int32_t idx;  // lattice index
    std::int32_t i;
    std::int32_t j;
  };
  std::vector<Member> members;
};

class GridHierarchy;
using HierarchyPtr = std::shared_ptr<const GridHierarchy>;

// Level-attached nodal coefficients, stored macro-wise with interface copies.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(HierarchyPtr h, int level);

  int level() const { return level_; }
  const HierarchyPtr& hierarchy() const { return h_; }

  std::vector<double>& macro(int slot) { return data_[static_cast<std::size_t>(slot)]; }
  const std::vector<double>& macro(int slot) const { return data_[static_cast<std::size_t>(slot)]; }
  std::size_t num_macros() const { return data_.size(); }

  void fill(double value);
  void scale(double alpha);
  void add_scaled(const GridFunction& x, double alpha);  // this += alpha * x

 private:
  HierarchyPtr h_;
  int level_ = -1;
  std::vector<std::vector<double>> data_;
};

// Nested structured levels 0..L over a conforming 2-d macro mesh. Macro
// vertices, edges, and faces own the nodes in their interior; interface
// copies are synchronized explicitly.
class GridHierarchy : public std::enable_shared_from_this<GridHierarchy> {
 public:
  struct MacroEdgeInfo {
    int group_start = -1;       // groups for s = 1..n-1 are contiguous from here
    bool owner = false;         // this macro holds the authoritative copies
    bool domain_boundary = false;
  };
  struct MacroLevel {
    std::array<int, 3> corner_group{-1, -1, -1};
    std::array<bool, 3> corner_owner{false, false, false};
    std::array<bool, 3> corner_boundary{false, false, false};
    std::array<MacroEdgeInfo, 3> edge{};
  };
  struct Level {
    int n = 1;  // 2^level
    std::vector<SharedNodeGroup> groups;
    std::vector<MacroLevel> macros;
    std::int64_t dofs = 0;
  };

  static HierarchyPtr build(const MacroMesh& macro, int max_level);

  const MacroMesh& macro_mesh() const { return mesh_; }
  int max_level() const { return static_cast<int>(levels_.size()) - 1; }
  int num_macros() const { return static_cast<int>(macros_.size()); }
  Index macro_element_id(int slot) const { return macros_[static_cast<std::size_t>(slot)]; }
  const std::array<Point, 3>& macro_corners(int slot) const {
    return corner_coords_[static_cast<std::size_t>(slot)];
  }
  double macro_area(int slot) const { return areas_[static_cast<std::size_t>(slot)]; }

  const Level& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }
  std::int64_t dof_count(int l) const { return level(l).dofs; }
  std::int64_t fine_element_count(int l) const {
    return static_cast<std::int64_t>(num_macros()) << (2 * l);
  }

  Point node_coordinates(int slot, int l, int i, int j) const;
  Point node_coordinates_by_id(Index element_id, int l, int i, int j) const;

  // Lattice boundary classification; (i, j) must satisfy i==0 || j==0 || i+j==n.
  int boundary_group(int slot, int l, int i, int j) const;
  bool on_domain_boundary(int slot, int l, int i, int j) const;
  bool owns_boundary_node(int slot, int l, int i, int j) const;

  GridFunction create_function(int l) const;

 private:
  MacroMesh mesh_;
  std::vector<Index> macros_;
  std::vector<std::array<Index, 3>> corner_ids_;
  std::vector<std::array<Point, 3>> corner_coords_;
  std::vector<double> areas_;
  std::vector<Level> levels_;
};

void interface_sync(GridFunction& f, SyncMode mode);

// Euclidean inner product over unique nodes (owner copies only).
double dot_unique(const GridFunction& a, const GridFunction& b);

// Sets every copy of each node from the owner macro's evaluation of fn(x).
template <typename Fn>
void interpolate_nodal(GridFunction& f, Fn&& fn);

// --- implementation of the template -----------------------------------------

template <typename Fn>
void interpolate_nodal(GridFunction& f, Fn&& fn) {
  const GridHierarchy& h = *f.hierarchy();
  const int l = f.level();
  const int n = h.level(l).n;
  for (int slot = 0; slot < h.num_macros(); ++slot) {
    auto& data = f.macro(slot);
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n - j; ++i)
        data[static_cast<std::size_t>(lattice_index(n, i, j))] =
            fn(h.node_coordinates(slot, l, i, j));
  }
  interface_sync(f, SyncMode::ReplaceFromOwner);
}

}  // namespace klref

#endif
