#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "tactile/mesh_io.hpp"
#include "tactile/objects.hpp"

using namespace tactile;

TEST(RayPlane, DirectHit) {
  const Plane p{UnitVec3(-1, 0, 0), 0.1};
  auto hit = ray_plane_intersection(Vec3::Zero(), UnitVec3(1, 0, 0), p);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->k, 0.1, 1e-15);
  EXPECT_NEAR((hit->point - Vec3(0.1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(RayPlane, ParallelRayMisses) {
  const Plane p{UnitVec3(-1, 0, 0), 0.1};
  EXPECT_FALSE(ray_plane_intersection(Vec3::Zero(), UnitVec3(0, 1, 0), p));
}

TEST(RayPlane, OffsetOrigin) {
  const Plane p{UnitVec3(-1, 0, 0), 0.1};
  auto hit = ray_plane_intersection(Vec3(0.05, 0, 0), UnitVec3(1, 0, 0), p);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->k, 0.05, 1e-15);
}

TEST(RayPlane, NonOpposingPlaneIgnored) {
  const Plane p{UnitVec3(1, 0, 0), 0.1};
  EXPECT_FALSE(ray_plane_intersection(Vec3::Zero(), UnitVec3(1, 0, 0), p));
}

TEST(RayPlane, HitLiesOnPlane) {
  Rng rng(7);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 w(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const UnitVec3 d(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    const Plane p{UnitVec3(standard_normal(rng), standard_normal(rng), standard_normal(rng)), uniform(rng, -1, 1)};
    if (auto h = ray_plane_intersection(w, d, p)) {
      ++hits;
      EXPECT_NEAR(p.signed_distance(h->point), 0.0, 1e-9);
      EXPECT_GE(h->k, 0.0);
    }
  }
  EXPECT_GT(hits, 1000);
}

TEST(Voxel, SingleCellCentroid) {
  const std::vector<Vec3> pts{{0, 0, 0}, {0.001, 0, 0}};
  const auto out = voxel_downsample(pts, 0.01);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR((out[0] - Vec3(0.0005, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(Voxel, DistinctCells) {
  const std::vector<Vec3> pts{{0, 0, 0}, {0.02, 0, 0}};
  EXPECT_EQ(voxel_downsample(pts, 0.01).size(), 2u);
}

TEST(Voxel, EmptyInput) { EXPECT_TRUE(voxel_downsample(std::vector<Vec3>{}, 0.01).empty()); }

TEST(Voxel, NonPositiveCellRejected) {
  EXPECT_THROW(voxel_downsample(std::vector<Vec3>{{0, 0, 0}}, 0.0), InvalidArgument);
  EXPECT_THROW(voxel_downsample(std::vector<Vec3>{{0, 0, 0}}, -1.0), InvalidArgument);
}

TEST(Voxel, BoundaryGoesToHigherCell) {
  VoxelGrid g(0.01);
  const auto idx = g.index_of(Vec3(0.01, 0.0, -0.01));
  EXPECT_EQ(idx[0], 1);
  EXPECT_EQ(idx[1], 0);
  EXPECT_EQ(idx[2], -1);
}

TEST(Voxel, OutputBoundedAndNearInput) {
  Rng rng(3);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1));
  const double cell = 0.02;
  const auto out = voxel_downsample(pts, cell);
  EXPECT_LE(out.size(), pts.size());
  for (const auto& c : out) {
    double best = 1e9;
    for (const auto& p : pts) best = std::min(best, (p - c).norm());
    EXPECT_LE(best, cell / 2 * std::sqrt(3.0) + 1e-12);
  }
}

TEST(Voxel, OrderIsLexicographic) {
  const std::vector<Vec3> pts{{0.05, 0, 0}, {0, 0.05, 0}, {-0.05, 0, 0}, {0, 0, 0.05}};
  VoxelGrid g(0.01);
  for (const auto& p : pts) g.insert(p);
  const auto c = g.centroids();
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(g.index_of(c[i - 1]), g.index_of(c[i]));
}

namespace {
TriMesh unit_triangle() {
  // area 1
  return TriMesh({{0, 0, 0}, {2, 0, 0}, {0, 1, 0}}, {{{0, 1, 2}}});
}
}  // namespace

TEST(Sampling, PointsInsideSingleTriangle) {
  const auto m = unit_triangle();
  const auto c = sample_mesh_surface(m, 1000, 1);
  ASSERT_EQ(c.size(), 1000u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3& p = c.points()[i];
    EXPECT_NEAR(p.z(), 0.0, 1e-15);
    EXPECT_GE(p.x(), -1e-15);
    EXPECT_GE(p.y(), -1e-15);
    EXPECT_LE(p.x() / 2 + p.y(), 1.0 + 1e-12);
    EXPECT_NEAR((c.normals()[i].vec() - Vec3(0, 0, 1)).norm(), 0.0, 1e-12);
  }
}

TEST(Sampling, AreaWeightedCountsWithinThreeSigma) {
  // Two disjoint triangles of area 1 (z = 0) and 3 (z = 1).
  const TriMesh m({{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, 0, 1}, {3, 0, 1}, {0, 2, 1}}, {{{0, 1, 2}}, {{3, 4, 5}}});
  const std::size_t n = 40000;
  const auto c = sample_mesh_surface(m, n, 11);
  std::size_t small = 0;
  for (const auto& p : c.points()) small += p.z() < 0.5;
  const double mean = 0.25 * n, sigma = std::sqrt(n * 0.25 * 0.75);
  EXPECT_LE(std::abs(static_cast<double>(small) - mean), 3 * sigma);
}

TEST(Sampling, Deterministic) {
  const auto m = shapes::sphere(0.05);
  const auto a = sample_mesh_surface(m, 500, 42), b = sample_mesh_surface(m, 500, 42);
  EXPECT_EQ(a.points(), b.points());
}

TEST(Sampling, EmptyMeshRejected) { EXPECT_THROW(sample_mesh_surface(TriMesh{}, 10, 0), InvalidArgument); }

TEST(ClosestPoint, OnFaceIsZero) {
  const TriMesh m({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{{0, 1, 2}}, {{0, 2, 3}}});
  EXPECT_NEAR(closest_point_on_mesh(Vec3(0.3, 0.6, 0), m).distance, 0.0, 1e-15);
}

TEST(ClosestPoint, AboveUnitSquare) {
  const TriMesh m({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{{0, 1, 2}}, {{0, 2, 3}}});
  const auto cp = closest_point_on_mesh(Vec3(0, 0, 1), m);
  EXPECT_NEAR(cp.distance, 1.0, 1e-15);
  EXPECT_NEAR(cp.point.norm(), 0.0, 1e-15);
}

TEST(ClosestPoint, MatchesExhaustiveOracle) {
  const auto m = shapes::sphere(0.05, 12, 8);  // under 200 faces
  ASSERT_LE(m.faces().size(), 200u);
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 q(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1));
    EXPECT_NEAR(closest_point_on_mesh(q, m).distance, oracle::mesh_distance(q, m), 1e-12);
  }
}

TEST(ClosestPoint, EmptyMeshRejected) { EXPECT_THROW(closest_point_on_mesh(Vec3::Zero(), TriMesh{}), InvalidArgument); }

TEST(MeshIo, CubeObj) {
  std::stringstream s;
  s << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
       "f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";
  const auto m = parse_obj(s);
  EXPECT_EQ(m.vertices().size(), 8u);
  EXPECT_EQ(m.faces().size(), 12u);
}

TEST(MeshIo, ZeroFaceIndexIsParseError) {
  std::stringstream s("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
  try {
    parse_obj(s);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(MeshIo, MalformedNumberReportsLine) {
  std::stringstream s("v 0 0 0\nv 1 x 0\n");
  try {
    parse_obj(s);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(MeshIo, CloudRoundTrip) {
  const auto c = sample_mesh_surface(shapes::sphere(0.05), 300, 9);
  const auto path = std::filesystem::temp_directory_path() / "tactile_cloud_roundtrip.ply";
  save_cloud(c, path);
  const auto d = load_cloud(path);
  ASSERT_EQ(d.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR((c.points()[i] - d.points()[i]).norm(), 0.0, 1e-9);
    EXPECT_NEAR((c.normals()[i].vec() - d.normals()[i].vec()).norm(), 0.0, 1e-9);
    EXPECT_EQ(c.timestamps()[i], d.timestamps()[i]);
  }
  std::filesystem::remove(path);
}

TEST(MeshIo, MeshRoundTrip) {
  const auto m = shapes::box(Vec3(0.1, 0.2, 0.3), 2);
  const auto path = std::filesystem::temp_directory_path() / "tactile_mesh_roundtrip.obj";
  save_mesh(m, path);
  const auto n = load_mesh(path);
  ASSERT_EQ(n.faces(), m.faces());
  for (std::size_t i = 0; i < m.vertices().size(); ++i) EXPECT_NEAR((m.vertices()[i] - n.vertices()[i]).norm(), 0.0, 1e-9);
  std::filesystem::remove(path);
}

TEST(Transform, AssociativeAndInvertible) {
  Rng rng(13);
  auto random_tf = [&] {
    return RigidTransform::from_approx(random_rotation(rng), Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)));
  };
  for (int i = 0; i < 200; ++i) {
    const auto a = random_tf(), b = random_tf(), c = random_tf();
    const auto l = (a * b) * c, r = a * (b * c);
    EXPECT_LT((l.rotation() - r.rotation()).norm(), 1e-9);
    EXPECT_LT((l.translation() - r.translation()).norm(), 1e-9);
    const auto id = a.inverse() * a;
    EXPECT_LT((id.rotation() - Mat3::Identity()).norm(), 1e-9);
    EXPECT_LT(id.translation().norm(), 1e-9);
    EXPECT_NEAR(a.rotation().determinant(), 1.0, 1e-9);
  }
}

TEST(Transform, RejectsNonRotation) {
  Mat3 r = Mat3::Identity();
  r(0, 0) = -1.0;
  EXPECT_THROW(RigidTransform(r, Vec3::Zero(), 1e-9), InvalidArgument);
}

TEST(UnitVector, ZeroRejected) { EXPECT_THROW(UnitVec3(0, 0, 0), InvalidArgument); }

TEST(Cloud, ColumnsStayAligned) {
  ContactCloud c;
  c.push_back(Vec3(1, 2, 3), UnitVec3(0, 0, 1), 4);
  EXPECT_EQ(c.points().size(), c.normals().size());
  EXPECT_EQ(c.points().size(), c.timestamps().size());
}
