#include "klref/macro_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace klref {
namespace {

std::pair<Index, Index> edge_key(Index a, Index b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

std::array<Index, 3> face_key(Index a, Index b, Index c) {
  std::array<Index, 3> k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

Point sub(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Point cross(const Point& a, const Point& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Point& a) { return std::sqrt(dot(a, a)); }

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

double signed_volume(const Point& a, const Point& b, const Point& c, const Point& d) {
  return dot(cross(sub(b, a), sub(c, a)), sub(d, a)) / 6.0;
}

Point midpoint_of(const Point& a, const Point& b) {
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}

constexpr std::array<std::array<int, 2>, 3> kTriEdges{{{0, 1}, {0, 2}, {1, 2}}};
constexpr std::array<std::array<int, 2>, 6> kTetEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};

// Equator cycles of the inner octahedron, per chosen diagonal. Entries are
// positions into the midpoint array ordered as kTetEdges.
// diagonal 0: (m01, m23), 1: (m02, m13), 2: (m03, m12).
constexpr std::array<std::array<int, 2>, 3> kOctaDiagonal{{{0, 5}, {1, 4}, {2, 3}}};
constexpr std::array<std::array<int, 4>, 3> kOctaEquator{{{1, 2, 4, 3}, {0, 2, 5, 3}, {0, 1, 5, 4}}};

}  // namespace

double triangle_min_angle(const std::array<Point, 3>& tri) {
  double best = std::numeric_limits<double>::max();
  for (int i = 0; i < 3; ++i) {
    const Point u = sub(tri[(i + 1) % 3], tri[i]);
    const Point v = sub(tri[(i + 2) % 3], tri[i]);
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) return 0.0;
    double c = dot(u, v) / (nu * nv);
    c = std::clamp(c, -1.0, 1.0);
    best = std::min(best, std::acos(c));
  }
  if (std::abs(signed_area(tri[0], tri[1], tri[2])) <= 0.0) return 0.0;
  return best;
}

double tet_min_dihedral(const std::array<Point, 4>& tet) {
  if (std::abs(signed_volume(tet[0], tet[1], tet[2], tet[3])) <= 0.0) return 0.0;
  double best = std::numeric_limits<double>::max();
  for (const auto& e : kTetEdges) {
    const int a = e[0], b = e[1];
    int others[2], k = 0;
    for (int i = 0; i < 4; ++i)
      if (i != a && i != b) others[k++] = i;
    Point ed = sub(tet[b], tet[a]);
    const double len = norm(ed);
    if (len == 0.0) return 0.0;
    ed = {ed[0] / len, ed[1] / len, ed[2] / len};
    auto perp = [&](int i) {
      Point d = sub(tet[i], tet[a]);
      const double t = dot(d, ed);
      return Point{d[0] - t * ed[0], d[1] - t * ed[1], d[2] - t * ed[2]};
    };
    const Point u = perp(others[0]);
    const Point w = perp(others[1]);
    const double angle = std::atan2(norm(cross(u, w)), dot(u, w));
    best = std::min(best, angle);
  }
  return best;
}

std::array<std::array<Point, 4>, 8> bey_red_split_coords(const std::array<Point, 4>& tet) {
  std::array<Point, 6> m;
  for (int e = 0; e < 6; ++e) m[e] = midpoint_of(tet[kTetEdges[e][0]], tet[kTetEdges[e][1]]);

  int diag = 0;
  double best = std::numeric_limits<double>::max();
  for (int d = 0; d < 3; ++d) {
    const double len = norm(sub(m[kOctaDiagonal[d][0]], m[kOctaDiagonal[d][1]]));
    if (len < best) {
      best = len;
      diag = d;
    }
  }

  std::array<std::array<Point, 4>, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i][0] = tet[i];
    int k = 1;
    for (int e = 0; e < 6; ++e)
      if (kTetEdges[e][0] == i || kTetEdges[e][1] == i) out[i][k++] = m[e];
  }
  const Point p = m[kOctaDiagonal[diag][0]];
  const Point q = m[kOctaDiagonal[diag][1]];
  const auto& eq = kOctaEquator[diag];
  for (int i = 0; i < 4; ++i) out[4 + i] = {p, q, m[eq[i]], m[eq[(i + 1) % 4]]};

  for (auto& child : out)
    if (signed_volume(child[0], child[1], child[2], child[3]) < 0.0) std::swap(child[2], child[3]);
  return out;
}

// --- MacroMesh -------------------------------------------------------------

MacroMesh MacroMesh::create(int dim, std::vector<Point> vertex_coords,
                            std::vector<std::array<Index, 4>> element_vertices) {
  if (dim != 2 && dim != 3) throw StructuralError("mesh dimension must be 2 or 3");
  MacroMesh mesh;
  mesh.dim_ = dim;
  mesh.vertices_.reserve(vertex_coords.size());
  for (std::size_t i = 0; i < vertex_coords.size(); ++i) {
    const Point& p = vertex_coords[i];
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
      throw StructuralError("vertex coordinates must be finite");
    if (dim == 2 && p[2] != 0.0) throw StructuralError("2-d vertices must have z == 0");
    mesh.vertices_.push_back({static_cast<Index>(i), p, false});
  }

  const int nv = dim + 1;
  for (const auto& ev : element_vertices) {
    std::array<Index, 4> verts = ev;
    for (int i = 0; i < nv; ++i) {
      if (verts[i] < 0 || verts[i] >= static_cast<Index>(mesh.vertices_.size()))
        throw StructuralError("element references unknown vertex");
      for (int j = i + 1; j < nv; ++j)
        if (verts[i] == verts[j]) throw StructuralError("element vertices must be distinct");
    }
    if (dim == 2) verts[3] = kNoIndex;
    mesh.orient_positive(verts);
    mesh.append_element(verts, ElementState::Unrefined, GreenType::None, kNoIndex);
  }
  if (mesh.elements_.empty()) throw StructuralError("mesh has no elements");
  for (const auto& el : mesh.elements_)
    if (mesh.element_volume(el.id) <= 0.0) throw StructuralError("degenerate element in input");

  mesh.rebuild_active_list();
  mesh.rebuild_facets();

  // Facet sharing: at most two elements per facet.
  if (dim == 2) {
    for (const auto& [k, els] : mesh.edge_table_)
      if (els.size() > 2) throw StructuralError("edge shared by more than two elements");
  } else {
    for (const auto& [k, els] : mesh.face_table_)
      if (els.size() > 2) throw StructuralError("face shared by more than two elements");
  }

  // Geometric hanging-node scan; loaded meshes carry no genealogy, so points
  // are tested directly against edges and faces.
  double scale = 0.0;
  for (const auto& el : mesh.elements_) scale = std::max(scale, mesh.element_h(el.id));
  const double tol = 1e-12 * scale;
  auto on_segment = [&](const Point& p, const Point& a, const Point& b) {
    const Point ab = sub(b, a);
    const double l2 = dot(ab, ab);
    const double t = dot(sub(p, a), ab) / l2;
    if (t < 1e-9 || t > 1.0 - 1e-9) return false;
    const Point proj{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
    return norm(sub(p, proj)) <= tol;
  };
  for (const auto& v : mesh.vertices_) {
    for (const auto& el : mesh.elements_) {
      bool own = false;
      for (int i = 0; i < nv; ++i) own = own || el.v[i] == v.id;
      if (own) continue;
      const auto edges =
          dim == 2 ? std::vector<std::array<int, 2>>(kTriEdges.begin(), kTriEdges.end())
                   : std::vector<std::array<int, 2>>(kTetEdges.begin(), kTetEdges.end());
      for (const auto& e : edges)
        if (on_segment(v.coords, mesh.vertices_[el.v[e[0]]].coords,
                       mesh.vertices_[el.v[e[1]]].coords))
          throw StructuralError("input mesh has a hanging node (vertex " + std::to_string(v.id) +
                                ")");
      if (dim == 3) {
        for (const auto& f : kTetFaces) {
          const Point a = mesh.vertices_[el.v[f[0]]].coords;
          const Point b = mesh.vertices_[el.v[f[1]]].coords;
          const Point c = mesh.vertices_[el.v[f[2]]].coords;
          const Point n = cross(sub(b, a), sub(c, a));
          const double nn = norm(n);
          if (nn == 0.0) continue;
          if (std::abs(dot(sub(v.coords, a), n)) / nn > tol) continue;
          // In-plane: barycentric test with a strict interior margin.
          const double full = nn;
          const double w0 = norm(cross(sub(b, v.coords), sub(c, v.coords)));
          const double w1 = norm(cross(sub(c, v.coords), sub(a, v.coords)));
          const double w2 = norm(cross(sub(a, v.coords), sub(b, v.coords)));
          if (w0 + w1 + w2 <= full * (1.0 + 1e-9) && w0 > 1e-9 * full && w1 > 1e-9 * full &&
              w2 > 1e-9 * full)
            throw StructuralError("input mesh has a hanging node (vertex " +
                                  std::to_string(v.id) + ")");
        }
      }
    }
  }
  return mesh;
}

void MacroMesh::orient_positive(std::array<Index, 4>& verts) const {
  if (dim_ == 2) {
    if (signed_area(vertices_[verts[0]].coords, vertices_[verts[1]].coords,
                    vertices_[verts[2]].coords) < 0.0)
      std::swap(verts[1], verts[2]);
  } else {
    if (signed_volume(vertices_[verts[0]].coords, vertices_[verts[1]].coords,
                      vertices_[verts[2]].coords, vertices_[verts[3]].coords) < 0.0)
      std::swap(verts[2], verts[3]);
  }
}

double MacroMesh::element_volume(Index id) const {
  const MacroElement& el = element(id);
  if (dim_ == 2)
    return signed_area(vertices_[el.v[0]].coords, vertices_[el.v[1]].coords,
                       vertices_[el.v[2]].coords);
  return signed_volume(vertices_[el.v[0]].coords, vertices_[el.v[1]].coords,
                       vertices_[el.v[2]].coords, vertices_[el.v[3]].coords);
}

double MacroMesh::total_volume() const {
  double sum = 0.0;
  for (Index id : active_) sum += element_volume(id);
  return sum;
}

Point MacroMesh::element_barycenter(Index id) const {
  const MacroElement& el = element(id);
  const int nv = dim_ + 1;
  Point b{0.0, 0.0, 0.0};
  for (int i = 0; i < nv; ++i) {
    const Point& p = vertices_[el.v[i]].coords;
    b[0] += p[0];
    b[1] += p[1];
    b[2] += p[2];
  }
  b[0] /= nv;
  b[1] /= nv;
  b[2] /= nv;
  return b;
}

double MacroMesh::element_h(Index id) const {
  const MacroElement& el = element(id);
  double h = 0.0;
  if (dim_ == 2) {
    for (const auto& e : kTriEdges)
      h = std::max(h, norm(sub(vertices_[el.v[e[0]]].coords, vertices_[el.v[e[1]]].coords)));
  } else {
    for (const auto& e : kTetEdges)
      h = std::max(h, norm(sub(vertices_[el.v[e[0]]].coords, vertices_[el.v[e[1]]].coords)));
  }
  return h;
}

double MacroMesh::element_distance(Index id, const Point& ref) const {
  return norm(sub(element_barycenter(id), ref));
}

std::optional<Index> MacroMesh::edge_midpoint(Index a, Index b) const {
  auto it = midpoints_.find(edge_key(a, b));
  if (it == midpoints_.end()) return std::nullopt;
  return it->second;
}

bool MacroMesh::edge_on_boundary(Index a, Index b) const {
  if (dim_ == 2) {
    auto it = edge_table_.find(edge_key(a, b));
    if (it == edge_table_.end()) throw StructuralError("edge not in active mesh");
    return it->second.size() == 1;
  }
  for (const auto& [k, els] : face_table_) {
    if (els.size() != 1) continue;
    const bool has_a = k[0] == a || k[1] == a || k[2] == a;
    const bool has_b = k[0] == b || k[1] == b || k[2] == b;
    if (has_a && has_b) return true;
  }
  return false;
}

std::vector<Index> MacroMesh::edge_elements(Index a, Index b) const {
  auto it = edge_table_.find(edge_key(a, b));
  if (it == edge_table_.end()) return {};
  return it->second;
}

std::vector<Index> MacroMesh::face_elements(Index a, Index b, Index c) const {
  auto it = face_table_.find(face_key(a, b, c));
  if (it == face_table_.end()) return {};
  return it->second;
}

Index MacroMesh::get_or_create_midpoint(Index a, Index b) {
  const auto key = edge_key(a, b);
  auto it = midpoints_.find(key);
  if (it != midpoints_.end()) return it->second;
  MacroVertex v;
  v.id = static_cast<Index>(vertices_.size());
  v.coords = midpoint_of(vertices_[a].coords, vertices_[b].coords);
  v.boundary = false;  // recomputed from facets once the pass is conforming
  vertices_.push_back(v);
  midpoints_.emplace(key, v.id);
  return v.id;
}

Index MacroMesh::append_element(const std::array<Index, 4>& verts, ElementState state,
                                GreenType green, Index parent) {
  MacroElement el;
  el.id = static_cast<Index>(elements_.size());
  el.v = verts;
  el.state = state;
  el.green_type = green;
  el.parent = parent;
  el.active = true;
  elements_.push_back(el);
  return el.id;
}

void MacroMesh::deactivate(Index id) { elements_[static_cast<std::size_t>(id)].active = false; }

void MacroMesh::rebuild_active_list() {
  active_.clear();
  for (const auto& el : elements_)
    if (el.active) active_.push_back(el.id);
}

void MacroMesh::rebuild_facets() {
  edge_table_.clear();
  face_table_.clear();
  for (Index id : active_) {
    const MacroElement& el = elements_[static_cast<std::size_t>(id)];
    if (dim_ == 2) {
      for (const auto& e : kTriEdges) edge_table_[edge_key(el.v[e[0]], el.v[e[1]])].push_back(id);
    } else {
      for (const auto& e : kTetEdges) edge_table_[edge_key(el.v[e[0]], el.v[e[1]])].push_back(id);
      for (const auto& f : kTetFaces)
        face_table_[face_key(el.v[f[0]], el.v[f[1]], el.v[f[2]])].push_back(id);
    }
  }
  for (auto& v : vertices_) v.boundary = false;
  if (dim_ == 2) {
    for (const auto& [k, els] : edge_table_) {
      if (els.size() == 1) {
        vertices_[k.first].boundary = true;
        vertices_[k.second].boundary = true;
      }
    }
  } else {
    for (const auto& [k, els] : face_table_) {
      if (els.size() == 1)
        for (Index vid : k) vertices_[vid].boundary = true;
    }
  }
}

void MacroMesh::collect_edge_nodes(Index a, Index b, std::set<Index>& out) const {
  auto it = midpoints_.find(edge_key(a, b));
  if (it == midpoints_.end()) return;
  out.insert(it->second);
  collect_edge_nodes(a, it->second, out);
  collect_edge_nodes(it->second, b, out);
}

void MacroMesh::collect_face_nodes(Index a, Index b, Index c, std::set<Index>& out) const {
  collect_edge_nodes(a, b, out);
  collect_edge_nodes(b, c, out);
  collect_edge_nodes(a, c, out);
  const auto mab = midpoints_.find(edge_key(a, b));
  const auto mbc = midpoints_.find(edge_key(b, c));
  const auto mac = midpoints_.find(edge_key(a, c));
  if (mab == midpoints_.end() || mbc == midpoints_.end() || mac == midpoints_.end()) return;
  collect_face_nodes(a, mab->second, mac->second, out);
  collect_face_nodes(mab->second, b, mbc->second, out);
  collect_face_nodes(mac->second, mbc->second, c, out);
  collect_face_nodes(mab->second, mbc->second, mac->second, out);
}

std::vector<Index> MacroMesh::hanging_nodes(Index element_id) const {
  const MacroElement& el = element(element_id);
  std::set<Index> nodes;
  if (dim_ == 2) {
    for (const auto& e : kTriEdges) collect_edge_nodes(el.v[e[0]], el.v[e[1]], nodes);
  } else {
    for (const auto& f : kTetFaces) collect_face_nodes(el.v[f[0]], el.v[f[1]], el.v[f[2]], nodes);
  }
  for (int i = 0; i < dim_ + 1; ++i) nodes.erase(el.v[i]);
  return std::vector<Index>(nodes.begin(), nodes.end());
}

std::vector<Index> MacroMesh::split_edges_of(const MacroElement& el) const {
  std::vector<Index> split;
  const int ne = dim_ == 2 ? 3 : 6;
  for (int e = 0; e < ne; ++e) {
    const auto& ed = dim_ == 2 ? kTriEdges[e] : kTetEdges[e];
    if (midpoints_.count(edge_key(el.v[ed[0]], el.v[ed[1]]))) split.push_back(e);
  }
  return split;
}

void MacroMesh::validate_marks(const MarkSet& marks) const {
  for (Index id : marks.ids) {
    if (id < 0 || id >= static_cast<Index>(elements_.size()) || !elements_[id].active)
      throw StructuralError("mark references inactive or unknown element " + std::to_string(id));
  }
  for (Index id : active_)
    if (elements_[static_cast<std::size_t>(id)].state == ElementState::GreenChild)
      throw StructuralError("refinement requires green elements to be reverted first");
}

void MacroMesh::red_refine_element(Index id) {
  MacroElement el = elements_[static_cast<std::size_t>(id)];
  deactivate(id);
  if (dim_ == 2) {
    const Index m01 = get_or_create_midpoint(el.v[0], el.v[1]);
    const Index m02 = get_or_create_midpoint(el.v[0], el.v[2]);
    const Index m12 = get_or_create_midpoint(el.v[1], el.v[2]);
    append_element({el.v[0], m01, m02, kNoIndex}, ElementState::RedChild, GreenType::None, id);
    append_element({m01, el.v[1], m12, kNoIndex}, ElementState::RedChild, GreenType::None, id);
    append_element({m02, m12, el.v[2], kNoIndex}, ElementState::RedChild, GreenType::None, id);
    append_element({m01, m12, m02, kNoIndex}, ElementState::RedChild, GreenType::None, id);
    return;
  }

  std::array<Index, 6> m;
  for (int e = 0; e < 6; ++e) m[e] = get_or_create_midpoint(el.v[kTetEdges[e][0]], el.v[kTetEdges[e][1]]);

  // Corner children.
  for (int i = 0; i < 4; ++i) {
    std::array<Index, 4> child{el.v[i], kNoIndex, kNoIndex, kNoIndex};
    int k = 1;
    for (int e = 0; e < 6; ++e)
      if (kTetEdges[e][0] == i || kTetEdges[e][1] == i) child[k++] = m[e];
    orient_positive(child);
    append_element(child, ElementState::RedChild, GreenType::None, id);
  }

  // Inner octahedron: shortest diagonal, ties by smallest sorted vertex-id pair.
  int diag = 0;
  double best_len = std::numeric_limits<double>::max();
  std::pair<Index, Index> best_pair{std::numeric_limits<Index>::max(),
                                    std::numeric_limits<Index>::max()};
  for (int d = 0; d < 3; ++d) {
    const Index p = m[kOctaDiagonal[d][0]], q = m[kOctaDiagonal[d][1]];
    const double len = norm(sub(vertices_[p].coords, vertices_[q].coords));
    const auto pair = edge_key(p, q);
    if (len < best_len || (len == best_len && pair < best_pair)) {
      best_len = len;
      best_pair = pair;
      diag = d;
    }
  }
  const Index p = m[kOctaDiagonal[diag][0]], q = m[kOctaDiagonal[diag][1]];
  const auto& eq = kOctaEquator[diag];
  for (int i = 0; i < 4; ++i) {
    std::array<Index, 4> child{p, q, m[eq[i]], m[eq[(i + 1) % 4]]};
    orient_positive(child);
    append_element(child, ElementState::RedChild, GreenType::None, id);
  }
}

void MacroMesh::green_close_2d(Index id, Index mid) {
  const MacroElement el = elements_[static_cast<std::size_t>(id)];
  int edge = -1;
  for (int e = 0; e < 3; ++e) {
    auto it = midpoints_.find(edge_key(el.v[kTriEdges[e][0]], el.v[kTriEdges[e][1]]));
    if (it != midpoints_.end() && it->second == mid) edge = e;
  }
  if (edge < 0) throw InternalError("green closure: hanging node is not an edge midpoint");
  const Index a = el.v[kTriEdges[edge][0]];
  const Index b = el.v[kTriEdges[edge][1]];
  const Index c = el.v[3 - kTriEdges[edge][0] - kTriEdges[edge][1]];
  deactivate(id);
  std::array<Index, 4> c1{a, mid, c, kNoIndex};
  std::array<Index, 4> c2{mid, b, c, kNoIndex};
  orient_positive(c1);
  orient_positive(c2);
  append_element(c1, ElementState::GreenChild, GreenType::None, id);
  append_element(c2, ElementState::GreenChild, GreenType::None, id);
}

void MacroMesh::green_close_3d(Index id, const std::vector<Index>& split_edges) {
  const MacroElement el = elements_[static_cast<std::size_t>(id)];
  auto mid_of = [&](int e) {
    return midpoints_.at(edge_key(el.v[kTetEdges[e][0]], el.v[kTetEdges[e][1]]));
  };
  auto emit = [&](std::array<Index, 4> verts, GreenType type) {
    orient_positive(verts);
    append_element(verts, ElementState::GreenChild, type, id);
  };
  deactivate(id);

  if (split_edges.size() == 1) {
    const int e = static_cast<int>(split_edges[0]);
    const Index a = el.v[kTetEdges[e][0]], b = el.v[kTetEdges[e][1]];
    const Index m = mid_of(e);
    Index rest[2];
    int k = 0;
    for (int i = 0; i < 4; ++i)
      if (el.v[i] != a && el.v[i] != b) rest[k++] = el.v[i];
    emit({a, m, rest[0], rest[1]}, GreenType::OneVertex);
    emit({m, b, rest[0], rest[1]}, GreenType::OneVertex);
    return;
  }

  if (split_edges.size() == 2) {
    const int e1 = static_cast<int>(split_edges[0]), e2 = static_cast<int>(split_edges[1]);
    const Index a = el.v[kTetEdges[e1][0]], b = el.v[kTetEdges[e1][1]];
    const Index c = el.v[kTetEdges[e2][0]], d = el.v[kTetEdges[e2][1]];
    if (a == c || a == d || b == c || b == d)
      throw InternalError("green closure: two split edges are not opposite");
    const Index m1 = mid_of(e1), m2 = mid_of(e2);
    emit({a, c, m1, m2}, GreenType::TwoVertices);
    emit({a, d, m1, m2}, GreenType::TwoVertices);
    emit({b, c, m1, m2}, GreenType::TwoVertices);
    emit({b, d, m1, m2}, GreenType::TwoVertices);
    return;
  }

  if (split_edges.size() == 3) {
    // The three split edges must form one face; the remaining vertex is the apex.
    std::array<int, 4> count{0, 0, 0, 0};
    for (Index se : split_edges) {
      for (int i = 0; i < 4; ++i) {
        if (kTetEdges[se][0] == i || kTetEdges[se][1] == i) ++count[i];
      }
    }
    int apex = -1;
    for (int i = 0; i < 4; ++i)
      if (count[i] == 0) apex = i;
    if (apex < 0) throw InternalError("green closure: three split edges do not form a face");
    int face[3], k = 0;
    for (int i = 0; i < 4; ++i)
      if (i != apex) face[k++] = i;
    const Index a = el.v[face[0]], b = el.v[face[1]], c = el.v[face[2]], d = el.v[apex];
    const Index mab = midpoints_.at(edge_key(a, b));
    const Index mbc = midpoints_.at(edge_key(b, c));
    const Index mac = midpoints_.at(edge_key(a, c));
    emit({a, mab, mac, d}, GreenType::ThreeVertices);
    emit({mab, b, mbc, d}, GreenType::ThreeVertices);
    emit({mac, mbc, c, d}, GreenType::ThreeVertices);
    emit({mab, mbc, mac, d}, GreenType::ThreeVertices);
    return;
  }
  throw InternalError("green closure: unexpected number of split edges");
}

void MacroMesh::run_closure_2d() {
  // Triangles with more than one hanging node go red until none remain.
  for (int iter = 0;; ++iter) {
    if (iter > 10000) throw InternalError("2-d closure did not reach a fixpoint");
    std::vector<Index> promote;
    for (const auto& el : elements_) {
      if (!el.active) continue;
      if (hanging_nodes(el.id).size() > 1) promote.push_back(el.id);
    }
    if (promote.empty()) break;
    for (Index id : promote) red_refine_element(id);
  }
  std::vector<Index> greens;
  for (const auto& el : elements_) {
    if (!el.active) continue;
    if (hanging_nodes(el.id).size() == 1) greens.push_back(el.id);
  }
  for (Index id : greens) {
    const auto nodes = hanging_nodes(id);
    green_close_2d(id, nodes[0]);
  }
}

void MacroMesh::run_closure_3d() {
  for (int outer = 0;; ++outer) {
    if (outer > 10000) throw InternalError("3-d closure did not reach a fixpoint");

    // Face loop: every face with more than one hanging node on its boundary is
    // refined regularly, i.e. all three of its edge midpoints are created.
    for (int inner = 0;; ++inner) {
      if (inner > 10000) throw InternalError("3-d face closure did not reach a fixpoint");
      std::set<std::array<Index, 3>> to_split;
      for (const auto& el : elements_) {
        if (!el.active) continue;
        for (const auto& f : kTetFaces) {
          const Index a = el.v[f[0]], b = el.v[f[1]], c = el.v[f[2]];
          const bool full = midpoints_.count(edge_key(a, b)) && midpoints_.count(edge_key(b, c)) &&
                            midpoints_.count(edge_key(a, c));
          if (full) continue;
          std::set<Index> nodes;
          collect_edge_nodes(a, b, nodes);
          collect_edge_nodes(b, c, nodes);
          collect_edge_nodes(a, c, nodes);
          if (nodes.size() > 1) to_split.insert(face_key(a, b, c));
        }
      }
      if (to_split.empty()) break;
      for (const auto& f : to_split) {
        get_or_create_midpoint(f[0], f[1]);
        get_or_create_midpoint(f[1], f[2]);
        get_or_create_midpoint(f[0], f[2]);
      }
    }

    // Cells with more than three hanging nodes are promoted to red.
    std::vector<Index> promote;
    for (const auto& el : elements_) {
      if (!el.active) continue;
      if (hanging_nodes(el.id).size() > 3) promote.push_back(el.id);
    }
    if (promote.empty()) break;
    for (Index id : promote) red_refine_element(id);
  }

  std::vector<Index> greens;
  for (const auto& el : elements_) {
    if (!el.active) continue;
    if (!hanging_nodes(el.id).empty()) greens.push_back(el.id);
  }
  for (Index id : greens) {
    const MacroElement& el = elements_[static_cast<std::size_t>(id)];
    const auto hang = hanging_nodes(id);
    const auto split = split_edges_of(el);
    if (hang.size() != split.size() || split.empty() || split.size() > 3)
      throw InternalError("3-d closure left an inadmissible hanging-node pattern on element " +
                          std::to_string(id));
    green_close_3d(id, split);
  }
}

MacroMesh refine_rg_2d(const MacroMesh& mesh, const MarkSet& marks) {
  MacroMesh out = mesh;
  if (out.dim_ != 2) throw StructuralError("refine_rg_2d requires a 2-d mesh");
  out.validate_marks(marks);
  const std::size_t arena_before = out.elements_.size();
  std::vector<Index> sorted = marks.ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Index id : sorted) out.red_refine_element(id);
  out.run_closure_2d();
  if (out.elements_.size() != arena_before) ++out.generation_;
  out.rebuild_active_list();
  out.rebuild_facets();
  return out;
}

MacroMesh refine_rg_3d(const MacroMesh& mesh, const MarkSet& marks) {
  MacroMesh out = mesh;
  if (out.dim_ != 3) throw StructuralError("refine_rg_3d requires a 3-d mesh");
  out.validate_marks(marks);
  const std::size_t arena_before = out.elements_.size();
  std::vector<Index> sorted = marks.ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Index id : sorted) out.red_refine_element(id);
  out.run_closure_3d();
  if (out.elements_.size() != arena_before) ++out.generation_;
  out.rebuild_active_list();
  out.rebuild_facets();
  return out;
}

MarkSet mark_top_fraction(const MacroMesh& mesh, const std::vector<double>& indicator,
                          double fraction) {
  if (indicator.size() != mesh.num_active())
    throw StructuralError("indicator length does not match the number of active elements");
  if (!(fraction > 0.0) || fraction > 1.0) throw StructuralError("mark fraction must be in (0, 1]");
  const std::size_t count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(mesh.num_active())));
  std::vector<std::size_t> order(indicator.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (indicator[a] != indicator[b]) return indicator[a] > indicator[b];
    return mesh.active()[a] < mesh.active()[b];
  });
  MarkSet marks;
  for (std::size_t i = 0; i < count; ++i) marks.ids.push_back(mesh.active()[order[i]]);
  std::sort(marks.ids.begin(), marks.ids.end());
  return marks;
}

std::pair<MacroMesh, MarkSet> revert_green(const MacroMesh& mesh, const MarkSet& marks) {
  MacroMesh out = mesh;
  std::set<Index> new_marks(marks.ids.begin(), marks.ids.end());
  std::vector<Index> greens;
  for (const auto& el : out.elements_)
    if (el.active && el.state == ElementState::GreenChild) greens.push_back(el.id);
  for (Index id : greens) {
    const MacroElement& el = out.elements_[static_cast<std::size_t>(id)];
    if (el.parent == kNoIndex) throw StructuralError("green child without a parent");
    const MacroElement& parent = out.elements_[static_cast<std::size_t>(el.parent)];
    if (parent.state == ElementState::GreenChild)
      throw StructuralError("green child of a green child found");
    out.deactivate(id);
    out.elements_[static_cast<std::size_t>(el.parent)].active = true;
    if (new_marks.erase(id) > 0) new_marks.insert(el.parent);
  }
  out.rebuild_active_list();
  if (!greens.empty()) {
    out.edge_table_.clear();
    out.face_table_.clear();
  }
  MarkSet result;
  result.ids.assign(new_marks.begin(), new_marks.end());
  return {std::move(out), std::move(result)};
}

std::vector<HangingNodeReport> conformity_check(const MacroMesh& mesh) {
  std::vector<HangingNodeReport> reports;
  for (Index id : mesh.active())
    for (Index v : mesh.hanging_nodes(id)) reports.push_back({v, id});
  return reports;
}

std::vector<ElementQuality> mesh_quality(const MacroMesh& mesh) {
  std::vector<ElementQuality> out;
  out.reserve(mesh.num_active());
  for (Index id : mesh.active()) {
    const MacroElement& el = mesh.element(id);
    ElementQuality q;
    q.element = id;
    q.h = mesh.element_h(id);
    if (mesh.dim() == 2) {
      q.min_angle = triangle_min_angle(
          {mesh.vertex(el.v[0]).coords, mesh.vertex(el.v[1]).coords, mesh.vertex(el.v[2]).coords});
    } else {
      q.min_angle = tet_min_dihedral({mesh.vertex(el.v[0]).coords, mesh.vertex(el.v[1]).coords,
                                      mesh.vertex(el.v[2]).coords, mesh.vertex(el.v[3]).coords});
    }
    out.push_back(q);
  }
  return out;
}

bool MacroMesh::operator==(const MacroMesh& other) const {
  if (dim_ != other.dim_ || generation_ != other.generation_ || active_ != other.active_ ||
      midpoints_ != other.midpoints_)
    return false;
  if (vertices_.size() != other.vertices_.size() || elements_.size() != other.elements_.size())
    return false;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i].coords != other.vertices_[i].coords ||
        vertices_[i].boundary != other.vertices_[i].boundary)
      return false;
  }
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& a = elements_[i];
    const auto& b = other.elements_[i];
    if (a.v != b.v || a.state != b.state || a.green_type != b.green_type || a.parent != b.parent ||
        a.active != b.active)
      return false;
  }
  return true;
}

}  // namespace klref
