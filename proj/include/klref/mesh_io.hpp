#ifndef KLREF_MESH_IO_HPP
#define KLREF_MESH_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "klref/macro_mesh.hpp"

namespace klref {

// ASCII mesh format:
//   dim d
//   vertices n
//   id x y [z] boundary      (n lines)
//   elements m
//   id v0 v1 v2 [v3]         (m lines)
// Lines starting with '#' are comments. The reader rejects nonconforming
// input; boundary flags are recomputed from the facet structure.
MacroMesh read_mesh(std::istream& in);
MacroMesh read_mesh_file(const std::string& path);

void write_mesh(const MacroMesh& mesh, std::ostream& out);
void write_mesh_file(const MacroMesh& mesh, const std::string& path);

// Marks file: one active element id per line, '#' comments allowed.
MarkSet read_marks_file(const std::string& path, const MacroMesh& mesh);

}  // namespace klref

#endif
