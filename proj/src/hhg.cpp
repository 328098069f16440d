#include "klref/hhg.hpp"

#include <algorithm>
#include <map>
#include <new>

namespace klref {
namespace {

constexpr std::array<std::array<int, 2>, 3> kLocalEdges{{{0, 1}, {0, 2}, {1, 2}}};

// Lattice index of local edge `le` at parameter t counted from its first corner.
int edge_lattice_index(int n, int le, int t) {
  switch (le) {
    case 0: return lattice_index(n, t, 0);
    case 1: return lattice_index(n, 0, t);
    default: return lattice_index(n, n - t, t);
  }
}

}  // namespace

GridFunction::GridFunction(HierarchyPtr h, int level) : h_(std::move(h)), level_(level) {
  const auto& lvl = h_->level(level);
  const std::size_t per_macro = static_cast<std::size_t>(lattice_size(lvl.n));
  data_.assign(static_cast<std::size_t>(h_->num_macros()), std::vector<double>(per_macro, 0.0));
}

void GridFunction::fill(double value) {
  for (auto& m : data_) std::fill(m.begin(), m.end(), value);
}

void GridFunction::scale(double alpha) {
  for (auto& m : data_)
    for (double& x : m) x *= alpha;
}

void GridFunction::add_scaled(const GridFunction& x, double alpha) {
  if (x.level_ != level_ || x.data_.size() != data_.size())
    throw StructuralError("grid function level mismatch");
  for (std::size_t s = 0; s < data_.size(); ++s) {
    const auto& src = x.data_[s];
    auto& dst = data_[s];
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += alpha * src[k];
  }
}

HierarchyPtr GridHierarchy::build(const MacroMesh& macro, int max_level) {
  if (macro.dim() != 2)
    throw StructuralError("grid hierarchies are only available for 2-d macro meshes");
  if (max_level < 0) throw StructuralError("hierarchy level must be nonnegative");
  if (!conformity_check(macro).empty())
    throw StructuralError("hierarchy requires a conforming macro mesh");

  auto h = std::make_shared<GridHierarchy>();
  h->mesh_ = macro;
  h->macros_ = macro.active();

  const int num_macros = static_cast<int>(h->macros_.size());
  h->corner_ids_.resize(static_cast<std::size_t>(num_macros));
  h->corner_coords_.resize(static_cast<std::size_t>(num_macros));
  h->areas_.resize(static_cast<std::size_t>(num_macros));
  for (int slot = 0; slot < num_macros; ++slot) {
    const MacroElement& el = macro.element(h->macros_[static_cast<std::size_t>(slot)]);
    for (int c = 0; c < 3; ++c) {
      h->corner_ids_[static_cast<std::size_t>(slot)][c] = el.v[c];
      h->corner_coords_[static_cast<std::size_t>(slot)][c] = macro.vertex(el.v[c]).coords;
    }
    h->areas_[static_cast<std::size_t>(slot)] =
        macro.element_volume(h->macros_[static_cast<std::size_t>(slot)]);
  }

  // Global vertex and edge incidence, ordered by vertex id / edge key.
  std::map<Index, std::vector<std::pair<int, int>>> vertex_use;  // vid -> (slot, corner)
  std::map<std::pair<Index, Index>, std::vector<std::pair<int, int>>> edge_use;  // -> (slot, le)
  for (int slot = 0; slot < num_macros; ++slot) {
    const auto& ids = h->corner_ids_[static_cast<std::size_t>(slot)];
    for (int c = 0; c < 3; ++c) vertex_use[ids[c]].push_back({slot, c});
    for (int le = 0; le < 3; ++le) {
      const Index a = ids[kLocalEdges[le][0]], b = ids[kLocalEdges[le][1]];
      edge_use[a < b ? std::make_pair(a, b) : std::make_pair(b, a)].push_back({slot, le});
    }
  }

  for (int l = 0; l <= max_level; ++l) {
    Level lvl;
    lvl.n = 1 << l;
    const int n = lvl.n;
    try {
      lvl.macros.resize(static_cast<std::size_t>(num_macros));
      const std::array<int, 3> corner_idx{lattice_index(n, 0, 0), lattice_index(n, n, 0),
                                          lattice_index(n, 0, n)};

      const std::array<std::array<int, 2>, 3> corner_ij{{{0, 0}, {n, 0}, {0, n}}};
      for (const auto& [vid, uses] : vertex_use) {
        const int gid = static_cast<int>(lvl.groups.size());
        SharedNodeGroup group;
        for (const auto& [slot, c] : uses) {
          group.members.push_back({slot, corner_idx[static_cast<std::size_t>(c)],
                                   corner_ij[static_cast<std::size_t>(c)][0],
                                   corner_ij[static_cast<std::size_t>(c)][1]});
          auto& ml = lvl.macros[static_cast<std::size_t>(slot)];
          ml.corner_group[static_cast<std::size_t>(c)] = gid;
          ml.corner_boundary[static_cast<std::size_t>(c)] = macro.vertex(vid).boundary;
        }
        lvl.macros[static_cast<std::size_t>(uses.front().first)]
            .corner_owner[static_cast<std::size_t>(uses.front().second)] = true;
        lvl.groups.push_back(std::move(group));
      }

      for (const auto& [key, uses] : edge_use) {
        const bool boundary = uses.size() == 1;
        const int group_start = static_cast<int>(lvl.groups.size());
        for (int s = 1; s <= n - 1; ++s) {
          SharedNodeGroup group;
          for (const auto& [slot, le] : uses) {
            const auto& ids = h->corner_ids_[static_cast<std::size_t>(slot)];
            const Index first = ids[kLocalEdges[le][0]];
            const int t = (first == key.first) ? s : n - s;
            const int ii = le == 0 ? t : (le == 1 ? 0 : n - t);
            const int jj = le == 0 ? 0 : t;
            group.members.push_back({slot, edge_lattice_index(n, le, t), ii, jj});
          }
          lvl.groups.push_back(std::move(group));
        }
        for (const auto& [slot, le] : uses) {
          auto& info = lvl.macros[static_cast<std::size_t>(slot)].edge[static_cast<std::size_t>(le)];
          info.group_start = group_start;
          info.owner = (slot == uses.front().first && le == uses.front().second);
          info.domain_boundary = boundary;
        }
      }

      const std::int64_t interior = static_cast<std::int64_t>(n - 1) * (n - 2) / 2;
      lvl.dofs = static_cast<std::int64_t>(vertex_use.size()) +
                 static_cast<std::int64_t>(edge_use.size()) * (n - 1) +
                 static_cast<std::int64_t>(num_macros) * interior;
    } catch (const std::bad_alloc&) {
      throw ResourceError("out of memory while building hierarchy level", l);
    }
    h->levels_.push_back(std::move(lvl));
  }
  return h;
}

Point GridHierarchy::node_coordinates(int slot, int l, int i, int j) const {
  const int n = level(l).n;
  if (i < 0 || j < 0 || i + j > n) throw StructuralError("lattice index out of range");
  const auto& c = corner_coords_[static_cast<std::size_t>(slot)];
  const double x = static_cast<double>(i) / n;
  const double y = static_cast<double>(j) / n;
  return {c[0][0] + x * (c[1][0] - c[0][0]) + y * (c[2][0] - c[0][0]),
          c[0][1] + x * (c[1][1] - c[0][1]) + y * (c[2][1] - c[0][1]), 0.0};
}

Point GridHierarchy::node_coordinates_by_id(Index element_id, int l, int i, int j) const {
  const auto it = std::lower_bound(macros_.begin(), macros_.end(), element_id);
  if (it == macros_.end() || *it != element_id)
    throw StructuralError("element is not part of the hierarchy");
  return node_coordinates(static_cast<int>(it - macros_.begin()), l, i, j);
}

int GridHierarchy::boundary_group(int slot, int l, int i, int j) const {
  const Level& lvl = level(l);
  const int n = lvl.n;
  const MacroLevel& ml = lvl.macros[static_cast<std::size_t>(slot)];
  if (i == 0 && j == 0) return ml.corner_group[0];
  if (i == n && j == 0) return ml.corner_group[1];
  if (i == 0 && j == n) return ml.corner_group[2];
  if (j == 0) return ml.edge[0].group_start + (i - 1);
  if (i == 0) return ml.edge[1].group_start + (j - 1);
  if (i + j == n) return ml.edge[2].group_start + (j - 1);
  throw StructuralError("node is not on the lattice boundary");
}

bool GridHierarchy::on_domain_boundary(int slot, int l, int i, int j) const {
  const Level& lvl = level(l);
  const int n = lvl.n;
  const MacroLevel& ml = lvl.macros[static_cast<std::size_t>(slot)];
  if (i == 0 && j == 0) return ml.corner_boundary[0];
  if (i == n && j == 0) return ml.corner_boundary[1];
  if (i == 0 && j == n) return ml.corner_boundary[2];
  if (j == 0) return ml.edge[0].domain_boundary;
  if (i == 0) return ml.edge[1].domain_boundary;
  if (i + j == n) return ml.edge[2].domain_boundary;
  return false;
}

bool GridHierarchy::owns_boundary_node(int slot, int l, int i, int j) const {
  const Level& lvl = level(l);
  const int n = lvl.n;
  const MacroLevel& ml = lvl.macros[static_cast<std::size_t>(slot)];
  if (i == 0 && j == 0) return ml.corner_owner[0];
  if (i == n && j == 0) return ml.corner_owner[1];
  if (i == 0 && j == n) return ml.corner_owner[2];
  if (j == 0) return ml.edge[0].owner;
  if (i == 0) return ml.edge[1].owner;
  if (i + j == n) return ml.edge[2].owner;
  return true;
}

GridFunction GridHierarchy::create_function(int l) const {
  return GridFunction(shared_from_this(), l);
}

void interface_sync(GridFunction& f, SyncMode mode) {
  const GridHierarchy& h = *f.hierarchy();
  const auto& groups = h.level(f.level()).groups;
  if (mode == SyncMode::ReplaceFromOwner) {
    for (const auto& g : groups) {
      if (g.members.size() < 2) continue;
      const double v =
          f.macro(g.members.front().slot)[static_cast<std::size_t>(g.members.front().idx)];
      for (std::size_t k = 1; k < g.members.size(); ++k)
        f.macro(g.members[k].slot)[static_cast<std::size_t>(g.members[k].idx)] = v;
    }
  } else {
    for (const auto& g : groups) {
      if (g.members.size() < 2) continue;
      double sum = 0.0;
      for (const auto& m : g.members) sum += f.macro(m.slot)[static_cast<std::size_t>(m.idx)];
      for (const auto& m : g.members) f.macro(m.slot)[static_cast<std::size_t>(m.idx)] = sum;
    }
  }
}

double dot_unique(const GridFunction& a, const GridFunction& b) {
  if (a.level() != b.level()) throw StructuralError("grid function level mismatch");
  const GridHierarchy& h = *a.hierarchy();
  const int l = a.level();
  const int n = h.level(l).n;
  double sum = 0.0;
  for (int slot = 0; slot < h.num_macros(); ++slot) {
    const auto& xa = a.macro(slot);
    const auto& xb = b.macro(slot);
    for (int j = 1; j < n; ++j) {
      const int base = lattice_index(n, 0, j);
      for (int i = 1; i < n - j; ++i)
        sum += xa[static_cast<std::size_t>(base + i)] * xb[static_cast<std::size_t>(base + i)];
    }
    const auto& ml = h.level(l).macros[static_cast<std::size_t>(slot)];
    const std::array<int, 3> corner_idx{lattice_index(n, 0, 0), lattice_index(n, n, 0),
                                        lattice_index(n, 0, n)};
    for (int c = 0; c < 3; ++c)
      if (ml.corner_owner[static_cast<std::size_t>(c)])
        sum += xa[static_cast<std::size_t>(corner_idx[static_cast<std::size_t>(c)])] *
               xb[static_cast<std::size_t>(corner_idx[static_cast<std::size_t>(c)])];
    for (int le = 0; le < 3; ++le) {
      if (!ml.edge[static_cast<std::size_t>(le)].owner) continue;
      for (int t = 1; t <= n - 1; ++t) {
        const int idx = edge_lattice_index(n, le, t);
        sum += xa[static_cast<std::size_t>(idx)] * xb[static_cast<std::size_t>(idx)];
      }
    }
  }
  return sum;
}

}  // namespace klref
