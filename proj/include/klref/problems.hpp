#ifndef KLREF_PROBLEMS_HPP
#define KLREF_PROBLEMS_HPP

#include <array>

#include "klref/fem.hpp"
#include "klref/macro_mesh.hpp"

namespace klref {

// u(x, y) = w(x) w(y) with w(t) = 1 - cos(exp(alpha (t - 1)) omega t).
// Oscillations concentrate toward the (1,1) corner of the unit square.
ProblemSpec make_waves_spec(double alpha, double omega);

// u(r, phi) = r^(2/3) sin(2 phi / 3) on (-1,1)^2 restricted to phi in
// (0, 3 pi / 2); harmonic, so f == 0. The reentrant corner sits at the origin.
ProblemSpec make_lshape_spec();

// w, w', w'' of the oscillator factor at t.
std::array<double, 3> waves_derivatives(double alpha, double omega, double t);

// 4x4 unit square, each cell split along one fixed diagonal: 32 triangles.
MacroMesh waves_initial_mesh();
// Three quadrants of (-1,1)^2, 2x2 cells each: 24 triangles.
MacroMesh lshape_initial_mesh();
// Unit cube, 3x3x3 cells of six tetrahedra each: 162 elements. Mesh-level
// pipeline experiments only; no 3-d solver exists here.
MacroMesh waves3d_initial_mesh();

// Laplacian of the 3-d separable waves solution, used as a deterministic
// marking surrogate for the mesh-only pipeline.
double waves3d_laplacian(double alpha, double omega, double x, double y, double z);

}  // namespace klref

#endif
