#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tactile/environment.hpp"
#include "tactile/mesh.hpp"

namespace tactile {

/// Procedural meshes, all centered near the origin of their own frame with
/// outward (counter-clockwise) winding.
namespace shapes {

struct MeshBuilder {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::uint32_t add(const Vec3& v) {
    vertices.push_back(v);
    return static_cast<std::uint32_t>(vertices.size() - 1);
  }
  void tri(std::uint32_t a, std::uint32_t b, std::uint32_t c) { faces.push_back({a, b, c}); }
  void quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
    tri(a, b, c);
    tri(a, c, d);
  }
  void merge(const TriMesh& m, const RigidTransform& t = {}) {
    const auto base = static_cast<std::uint32_t>(vertices.size());
    for (const auto& v : m.vertices()) vertices.push_back(t.apply(v));
    for (const auto& f : m.faces()) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  TriMesh build() && { return TriMesh(std::move(vertices), std::move(faces)); }
};

/// Axis-aligned box with each face split into `div` x `div` quads.
inline TriMesh box(const Vec3& size, int div = 4) {
  MeshBuilder b;
  const Vec3 h = 0.5 * size;
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign = -1; sign <= 1; sign += 2) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      std::vector<std::uint32_t> grid;
      for (int i = 0; i <= div; ++i)
        for (int j = 0; j <= div; ++j) {
          Vec3 p;
          p[axis] = sign * h[axis];
          p[u] = -h[u] + size[u] * i / div;
          p[v] = -h[v] + size[v] * j / div;
          grid.push_back(b.add(p));
        }
      auto at = [&](int i, int j) { return grid[static_cast<std::size_t>(i * (div + 1) + j)]; };
      for (int i = 0; i < div; ++i)
        for (int j = 0; j < div; ++j) {
          if (sign > 0) b.quad(at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
          else b.quad(at(i, j), at(i, j + 1), at(i + 1, j + 1), at(i + 1, j));
        }
    }
  }
  return std::move(b).build();
}

/// Surface of revolution about z from a profile of (radius, z) pairs ordered
/// bottom to top. Zero-radius ends become poles; otherwise ends are capped.
inline TriMesh revolve(const std::vector<std::pair<double, double>>& profile, int segments = 32) {
  MeshBuilder b;
  std::vector<std::vector<std::uint32_t>> rings;
  for (const auto& [r, z] : profile) {
    std::vector<std::uint32_t> ring;
    if (r <= 0.0) {
      ring.push_back(b.add(Vec3(0, 0, z)));
    } else {
      for (int s = 0; s < segments; ++s) {
        const double a = 2 * kPi * s / segments;
        ring.push_back(b.add(Vec3(r * std::cos(a), r * std::sin(a), z)));
      }
    }
    rings.push_back(std::move(ring));
  }
  auto at = [&](const std::vector<std::uint32_t>& ring, int s) { return ring.size() == 1 ? ring[0] : ring[s % segments]; };
  for (std::size_t k = 0; k + 1 < rings.size(); ++k) {
    const auto& lo = rings[k];
    const auto& hi = rings[k + 1];
    for (int s = 0; s < segments; ++s) {
      if (lo.size() == 1) b.tri(lo[0], at(hi, s + 1), at(hi, s));
      else if (hi.size() == 1) b.tri(at(lo, s), at(lo, s + 1), hi[0]);
      else b.quad(at(lo, s), at(lo, s + 1), at(hi, s + 1), at(hi, s));
    }
  }
  if (rings.front().size() > 1) {
    const auto c = b.add(Vec3(0, 0, profile.front().second));
    for (int s = 0; s < segments; ++s) b.tri(c, at(rings.front(), s + 1), at(rings.front(), s));
  }
  if (rings.back().size() > 1) {
    const auto c = b.add(Vec3(0, 0, profile.back().second));
    for (int s = 0; s < segments; ++s) b.tri(c, at(rings.back(), s), at(rings.back(), s + 1));
  }
  return std::move(b).build();
}

inline TriMesh cylinder(double radius, double height, int segments = 32, int stacks = 6) {
  std::vector<std::pair<double, double>> prof;
  for (int i = 0; i <= stacks; ++i) prof.emplace_back(radius, -0.5 * height + height * i / stacks);
  return revolve(prof, segments);
}

inline TriMesh sphere(double radius, int segments = 32, int stacks = 16) {
  std::vector<std::pair<double, double>> prof;
  for (int i = 0; i <= stacks; ++i) {
    const double a = -kPi / 2 + kPi * i / stacks;
    prof.emplace_back(i == 0 || i == stacks ? 0.0 : radius * std::cos(a), radius * std::sin(a));
  }
  return revolve(prof, segments);
}

/// Extrusion along z of a counter-clockwise polygon in the xy plane.
inline TriMesh prism(const std::vector<std::pair<double, double>>& polygon, double length, int stacks = 4) {
  MeshBuilder b;
  const int n = static_cast<int>(polygon.size());
  std::vector<std::vector<std::uint32_t>> rings;
  for (int k = 0; k <= stacks; ++k) {
    std::vector<std::uint32_t> ring;
    for (const auto& [x, y] : polygon) ring.push_back(b.add(Vec3(x, y, -0.5 * length + length * k / stacks)));
    rings.push_back(std::move(ring));
  }
  for (int k = 0; k < stacks; ++k)
    for (int i = 0; i < n; ++i) b.quad(rings[k][i], rings[k][(i + 1) % n], rings[k + 1][(i + 1) % n], rings[k + 1][i]);
  double cx = 0, cy = 0;
  for (const auto& [x, y] : polygon) {
    cx += x;
    cy += y;
  }
  const auto bot = b.add(Vec3(cx / n, cy / n, -0.5 * length));
  const auto top = b.add(Vec3(cx / n, cy / n, 0.5 * length));
  for (int i = 0; i < n; ++i) {
    b.tri(bot, rings.front()[(i + 1) % n], rings.front()[i]);
    b.tri(top, rings.back()[i], rings.back()[(i + 1) % n]);
  }
  return std::move(b).build();
}

/// Triangular prism: a long straight edge between two flat faces.
inline TriMesh wedge(double leg, double length) {
  return prism({{-leg / 3, -leg / 3}, {2 * leg / 3, -leg / 3}, {-leg / 3, 2 * leg / 3}}, length);
}

/// Right-corner tetrahedron (three mutually orthogonal faces), subdivided so
/// faces stay small.
inline TriMesh corner(double leg, int div = 6) {
  const Vec3 o(-leg / 4, -leg / 4, -leg / 4);
  const std::array<Vec3, 4> v = {o, o + Vec3(leg, 0, 0), o + Vec3(0, leg, 0), o + Vec3(0, 0, leg)};
  MeshBuilder b;
  auto face = [&](const Vec3& a, const Vec3& c1, const Vec3& c2) {
    // subdivided triangle a, c1, c2 (counter-clockwise seen from outside)
    std::vector<std::vector<std::uint32_t>> rows;
    for (int i = 0; i <= div; ++i) {
      std::vector<std::uint32_t> row;
      for (int j = 0; j <= div - i; ++j) row.push_back(b.add(a + (c1 - a) * i / div + (c2 - a) * j / div));
      rows.push_back(std::move(row));
    }
    for (int i = 0; i < div; ++i)
      for (int j = 0; j < div - i; ++j) {
        b.tri(rows[i][j], rows[i + 1][j], rows[i][j + 1]);
        if (j + 1 < div - i) b.tri(rows[i + 1][j], rows[i + 1][j + 1], rows[i][j + 1]);
      }
  };
  face(v[0], v[2], v[1]);
  face(v[0], v[1], v[3]);
  face(v[0], v[3], v[2]);
  face(v[1], v[2], v[3]);
  return std::move(b).build();
}

/// Handle built from box segments along a half-ring in the xz plane.
inline TriMesh handle(double radius, double thickness, int pieces = 7) {
  MeshBuilder b;
  for (int i = 0; i < pieces; ++i) {
    const double a = -kPi / 2 + kPi * (i + 0.5) / pieces;
    const double len = 2 * radius * std::sin(kPi / (2 * pieces)) + thickness * 0.5;
    const Vec3 c(radius * std::cos(a), 0, radius * std::sin(a));
    b.merge(box(Vec3(thickness, thickness, len), 1), RigidTransform::from_axis_angle(Vec3::UnitY(), -a, c));
  }
  return std::move(b).build();
}

}  // namespace shapes

inline const std::vector<std::string>& primitive_names() {
  static const std::vector<std::string> n = {"cuboid", "cylinder", "sphere", "edge", "corner"};
  return n;
}

inline const std::vector<std::string>& test_object_names() {
  static const std::vector<std::string> n = {"mustard_bottle", "chips_can", "pitcher", "bleach_cleanser", "mug", "sugar_box"};
  return n;
}

/// Built-in object by name; throws InvalidArgument for unknown names.
inline std::shared_ptr<const ObjectModel> builtin_object(const std::string& name) {
  using namespace shapes;
  TriMesh m;
  if (name == "cuboid") m = box(Vec3(0.08, 0.06, 0.05));
  else if (name == "cylinder") m = cylinder(0.03, 0.09);
  else if (name == "sphere") m = sphere(0.04);
  else if (name == "edge") m = wedge(0.07, 0.08);
  else if (name == "corner") m = corner(0.09);
  else if (name == "mustard_bottle")
    m = revolve({{0.0, -0.06}, {0.028, -0.06}, {0.03, -0.045}, {0.03, 0.02}, {0.024, 0.04}, {0.012, 0.05}, {0.01, 0.065}, {0.0, 0.065}}, 32);
  else if (name == "chips_can") m = cylinder(0.037, 0.12, 32, 8);
  else if (name == "pitcher") {
    MeshBuilder b;
    b.merge(revolve({{0.0, -0.06}, {0.045, -0.06}, {0.05, -0.02}, {0.045, 0.03}, {0.035, 0.06}, {0.0, 0.06}}, 32));
    b.merge(handle(0.03, 0.012), RigidTransform::from_translation(Vec3(0.04, 0, 0.0)));
    m = std::move(b).build();
  } else if (name == "bleach_cleanser") {
    std::vector<std::pair<double, double>> outline;
    for (int i = 0; i < 16; ++i) {
      const double a = 2 * kPi * i / 16;
      const double c = std::cos(a), s = std::sin(a);
      // superellipse 0.045 x 0.03
      outline.emplace_back(0.045 * std::copysign(std::pow(std::abs(c), 0.6), c), 0.03 * std::copysign(std::pow(std::abs(s), 0.6), s));
    }
    MeshBuilder b;
    b.merge(prism(outline, 0.11, 6), RigidTransform::from_axis_angle(Vec3::UnitX(), kPi / 2));
    m = std::move(b).build();
  } else if (name == "mug") {
    MeshBuilder b;
    b.merge(cylinder(0.038, 0.08, 32, 6));
    b.merge(handle(0.025, 0.01), RigidTransform::from_translation(Vec3(0.036, 0, 0)));
    m = std::move(b).build();
  } else if (name == "sugar_box") m = box(Vec3(0.09, 0.04, 0.12));
  else throw InvalidArgument("unknown object '" + name + "'");
  return std::make_shared<const ObjectModel>(ObjectModel{name, std::move(m)});
}

}  // namespace tactile
