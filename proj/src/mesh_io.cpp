#include "klref/mesh_io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

namespace klref {
namespace {

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;
    return true;
  }
  return false;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

MacroMesh read_mesh(std::istream& in) {
  std::string line, tag;
  if (!next_data_line(in, line)) throw IoError("mesh file is empty");
  int dim = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> tag >> dim) || tag != "dim") throw IoError("expected 'dim d' header");
  }
  if (dim != 2 && dim != 3) throw IoError("mesh dimension must be 2 or 3");

  if (!next_data_line(in, line)) throw IoError("expected 'vertices n'");
  std::size_t nv = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> tag >> nv) || tag != "vertices") throw IoError("expected 'vertices n'");
  }
  std::map<long long, Index> id_map;
  std::vector<Point> coords(nv, Point{0, 0, 0});
  for (std::size_t i = 0; i < nv; ++i) {
    if (!next_data_line(in, line)) throw IoError("unexpected end of vertex list");
    std::istringstream ss(line);
    long long id;
    Point p{0, 0, 0};
    int bnd = 0;
    if (dim == 2) {
      if (!(ss >> id >> p[0] >> p[1] >> bnd)) throw IoError("bad vertex line: " + line);
    } else {
      if (!(ss >> id >> p[0] >> p[1] >> p[2] >> bnd)) throw IoError("bad vertex line: " + line);
    }
    if (id_map.count(id)) throw IoError("duplicate vertex id " + std::to_string(id));
    id_map[id] = static_cast<Index>(i);
    coords[i] = p;
  }

  if (!next_data_line(in, line)) throw IoError("expected 'elements m'");
  std::size_t ne = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> tag >> ne) || tag != "elements") throw IoError("expected 'elements m'");
  }
  std::vector<std::array<Index, 4>> elements;
  elements.reserve(ne);
  for (std::size_t i = 0; i < ne; ++i) {
    if (!next_data_line(in, line)) throw IoError("unexpected end of element list");
    std::istringstream ss(line);
    long long id, v[4] = {0, 0, 0, 0};
    const int nvert = dim + 1;
    if (!(ss >> id)) throw IoError("bad element line: " + line);
    for (int k = 0; k < nvert; ++k)
      if (!(ss >> v[k])) throw IoError("bad element line: " + line);
    std::array<Index, 4> verts{kNoIndex, kNoIndex, kNoIndex, kNoIndex};
    for (int k = 0; k < nvert; ++k) {
      auto it = id_map.find(v[k]);
      if (it == id_map.end())
        throw IoError("element references unknown vertex " + std::to_string(v[k]));
      verts[k] = it->second;
    }
    elements.push_back(verts);
  }

  try {
    return MacroMesh::create(dim, std::move(coords), std::move(elements));
  } catch (const StructuralError& e) {
    throw IoError(std::string("invalid mesh: ") + e.what());
  }
}

MacroMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  return read_mesh(in);
}

void write_mesh(const MacroMesh& mesh, std::ostream& out) {
  const std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%d %H:%M:%S", std::gmtime(&now));
  out << "# written " << stamp << " UTC\n";
  out << "dim " << mesh.dim() << "\n";

  // Compact renumbering of the vertices referenced by active elements.
  std::map<Index, Index> vmap;
  for (Index id : mesh.active()) {
    const MacroElement& el = mesh.element(id);
    for (int i = 0; i < mesh.dim() + 1; ++i)
      if (!vmap.count(el.v[i])) vmap.emplace(el.v[i], 0);
  }
  Index next = 0;
  for (auto& [old_id, new_id] : vmap) new_id = next++;

  out << "vertices " << vmap.size() << "\n";
  for (const auto& [old_id, new_id] : vmap) {
    const MacroVertex& v = mesh.vertex(old_id);
    out << new_id << " " << fmt17(v.coords[0]) << " " << fmt17(v.coords[1]);
    if (mesh.dim() == 3) out << " " << fmt17(v.coords[2]);
    out << " " << (v.boundary ? 1 : 0) << "\n";
  }
  out << "elements " << mesh.num_active() << "\n";
  Index eid = 0;
  for (Index id : mesh.active()) {
    const MacroElement& el = mesh.element(id);
    out << eid++;
    for (int i = 0; i < mesh.dim() + 1; ++i) out << " " << vmap.at(el.v[i]);
    out << "\n";
  }
}

void write_mesh_file(const MacroMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  write_mesh(mesh, out);
}

MarkSet read_marks_file(const std::string& path, const MacroMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open marks file: " + path);
  MarkSet marks;
  std::string line;
  while (next_data_line(in, line)) {
    std::istringstream ss(line);
    long long id;
    while (ss >> id) {
      if (id < 0 || id >= static_cast<long long>(mesh.num_active()))
        throw IoError("mark id out of range: " + std::to_string(id));
      // Marks address elements by their position in the written file, i.e.
      // the active-list order.
      marks.ids.push_back(mesh.active()[static_cast<std::size_t>(id)]);
    }
  }
  std::sort(marks.ids.begin(), marks.ids.end());
  marks.ids.erase(std::unique(marks.ids.begin(), marks.ids.end()), marks.ids.end());
  return marks;
}

}  // namespace klref
