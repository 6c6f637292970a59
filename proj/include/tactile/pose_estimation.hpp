#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "tactile/ball_pivoting.hpp"
#include "tactile/geometry.hpp"
#include "tactile/mesh.hpp"
#include "tactile/point_cloud.hpp"

namespace tactile {

struct CameraIntrinsics {
  double fx = 120.0, fy = 120.0, cx = 64.0, cy = 64.0;
  int width = 128, height = 128;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw InvalidArgument("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidArgument("camera: empty image");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      throw InvalidArgument("camera: principal point outside image");
  }
};

/// Row-major depth grid in meters; 0 marks an empty pixel.
class DepthImage {
 public:
  DepthImage(int width, int height) : width_(width), height_(height), depth_(static_cast<std::size_t>(width * height), 0.0) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double at(int u, int v) const { return depth_[static_cast<std::size_t>(v * width_ + u)]; }
  double& at(int u, int v) { return depth_[static_cast<std::size_t>(v * width_ + u)]; }
  const std::vector<double>& data() const noexcept { return depth_; }

  std::size_t filled() const {
    return static_cast<std::size_t>(std::count_if(depth_.begin(), depth_.end(), [](double d) { return d > 0.0; }));
  }

  bool operator==(const DepthImage& o) const = default;

 private:
  int width_, height_;
  std::vector<double> depth_;
};

// ---------------------------------------------------------------------------
// Viewpoints, visibility, projection

/// Camera poses (camera -> base) on a spherical cap around `start`, centered
/// on `center`. Each camera's +z optical axis points at `center`, so points
/// in front of it have positive depth. Placement is a Fibonacci spiral in
/// equal-area cap coordinates; N = 1 returns the start position itself.
inline std::vector<RigidTransform> generate_viewpoints(const Vec3& start, const Vec3& center, int count,
                                                       double cap_half_angle = kPi / 3) {
  if (count < 1) throw InvalidArgument("generate_viewpoints: need at least one viewpoint");
  const double radius = (start - center).norm();
  if (!(radius > 0.0)) throw InvalidArgument("generate_viewpoints: start coincides with center");
  const Vec3 axis = (start - center) / radius;
  const Vec3 helper = std::abs(axis.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 e1 = helper.cross(axis).normalized();
  const Vec3 e2 = axis.cross(e1);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  const double cap = 1.0 - std::cos(cap_half_angle);

  std::vector<RigidTransform> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vec3 dir = axis;
    if (count > 1) {
      const double cos_t = 1.0 - cap * (i + 0.5) / count;
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
      const double phi = golden * i;
      dir = sin_t * std::cos(phi) * e1 + sin_t * std::sin(phi) * e2 + cos_t * axis;
    }
    const Vec3 pos = center + radius * dir;
    const Vec3 z = -dir;
    const Vec3 up = std::abs(z.dot(Vec3::UnitZ())) < 0.99 ? Vec3::UnitZ() : Vec3::UnitY();
    const Vec3 x = up.cross(z).normalized();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r << x, y, z;
    out.push_back(RigidTransform::from_approx(r, pos));
  }
  return out;
}

/// Points of `cloud` (base frame) expressed in the camera frame, keeping those
/// whose position-normal dot product is strictly negative.
inline ContactCloud visibility_filter(const ContactCloud& cloud, const RigidTransform& camera) {
  const RigidTransform to_cam = camera.inverse();
  ContactCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = to_cam.apply(cloud.points()[i]);
    const Vec3 n = to_cam.rotate(cloud.normals()[i].vec());
    if (p.dot(n) < 0.0) out.push_back(p, UnitVec3(n), cloud.timestamps()[i]);
  }
  return out;
}

/// Pinhole projection with a z-buffer. Each point splats into the square of
/// half-width `splat` pixels around its rounded projection; the smallest
/// depth wins. Points with Z <= 0 are skipped.
inline DepthImage render_depth(const std::vector<Vec3>& points, const CameraIntrinsics& k, int splat = 1) {
  k.validate();
  DepthImage img(k.width, k.height);
  for (const auto& p : points) {
    if (!(p.z() > 0.0)) continue;
    const long u0 = static_cast<long>(std::floor(k.fx * p.x() / p.z() + k.cx + 0.5));
    const long v0 = static_cast<long>(std::floor(k.fy * p.y() / p.z() + k.cy + 0.5));
    for (long v = v0 - splat; v <= v0 + splat; ++v) {
      if (v < 0 || v >= k.height) continue;
      for (long u = u0 - splat; u <= u0 + splat; ++u) {
        if (u < 0 || u >= k.width) continue;
        double& d = img.at(static_cast<int>(u), static_cast<int>(v));
        if (d == 0.0 || p.z() < d) d = p.z();
      }
    }
  }
  return img;
}

/// Back-projects filled pixels into the base frame.
inline std::vector<Vec3> backproject(const DepthImage& img, const CameraIntrinsics& k, const RigidTransform& camera) {
  std::vector<Vec3> out;
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      const double z = img.at(u, v);
      if (z <= 0.0) continue;
      out.push_back(camera.apply(Vec3((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z)));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

/// Per-model-point symmetric distances: for each x, min over y of
/// |est(x) - gt(y)|.
inline std::vector<double> add_s_distances(const RigidTransform& est, const RigidTransform& gt,
                                           const std::vector<Vec3>& model_sample) {
  if (model_sample.empty()) throw InvalidArgument("add_s: empty model sample");
  std::vector<Vec3> target;
  target.reserve(model_sample.size());
  for (const auto& y : model_sample) target.push_back(gt.apply(y));
  const KdTree tree(std::move(target));
  std::vector<double> d;
  d.reserve(model_sample.size());
  for (const auto& x : model_sample) d.push_back(std::sqrt(tree.nearest(est.apply(x)).dist_sq));
  return d;
}

/// Same, measured against the posed model surface instead of its sample.
inline std::vector<double> add_s_distances(const RigidTransform& est, const RigidTransform& gt,
                                           const std::vector<Vec3>& model_sample, const TriMesh& model) {
  if (model_sample.empty()) throw InvalidArgument("add_s: empty model sample");
  const RigidTransform rel = gt.inverse() * est;
  std::vector<double> d;
  d.reserve(model_sample.size());
  for (const auto& x : model_sample) d.push_back(model.closest_point(rel.apply(x)).distance);
  return d;
}

inline double add_s(const RigidTransform& est, const RigidTransform& gt, const std::vector<Vec3>& model_sample) {
  const auto d = add_s_distances(est, gt, model_sample);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

/// Area under the accuracy-vs-threshold curve for thresholds in [0, d_max],
/// normalized by d_max: mean of max(0, 1 - d / d_max).
inline double auc_from_distances(const std::vector<double>& d, double d_max = 0.1) {
  if (d.empty()) return 0.0;
  if (!(d_max > 0.0)) throw InvalidArgument("auc: d_max must be positive");
  double s = 0.0;
  for (double x : d) s += std::max(0.0, 1.0 - x / d_max);
  return s / static_cast<double>(d.size());
}

inline double auc_add_s(const RigidTransform& est, const RigidTransform& gt, const std::vector<Vec3>& model_sample,
                        double d_max = 0.1) {
  return auc_from_distances(add_s_distances(est, gt, model_sample), d_max);
}

/// Occupied-cell IoU between voxelized contacts and a voxelized dense sample
/// of the posed object surface.
inline double coverage_iou(const std::vector<Vec3>& contacts, const std::vector<Vec3>& surface_sample, double cell) {
  VoxelGrid a(cell), b(cell);
  for (const auto& p : contacts) a.insert(p);
  for (const auto& p : surface_sample) b.insert(p);
  std::size_t inter = 0;
  for (const auto& [idx, acc] : a.cells()) inter += b.cells().count(idx);
  const std::size_t uni = a.occupied() + b.occupied() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Surface sample dense enough for `cell`-sized voxels (about 20 samples per
/// cell face), with a fixed seed.
inline std::vector<Vec3> dense_surface_sample(const TriMesh& mesh, double cell, std::uint64_t seed = 0) {
  const auto n = static_cast<std::size_t>(std::clamp(20.0 * mesh.surface_area() / (cell * cell), 2000.0, 400000.0));
  return sample_mesh_surface(mesh, n, seed).points();
}

inline double coverage_iou(const ContactCloud& contacts, const TriMesh& model, const RigidTransform& gt, double cell) {
  if (!(cell > 0.0)) throw InvalidArgument("coverage_iou: cell must be positive");
  return coverage_iou(contacts.points(), dense_surface_sample(model.transformed(gt), cell), cell);
}

// ---------------------------------------------------------------------------
// Registration

struct RegistrationOptions {
  int max_iterations = 50;
  double convergence = 1e-6;  // meters of update
  double trim_fraction = 0.9;
  double voxel = 0.004;           // data downsampling before ICP
  std::size_t max_points = 300;   // cap on ICP data points per hypothesis
  int extra_hypotheses = 36;
};

struct PoseEstimate {
  RigidTransform transform;  // model frame -> base frame
  double add_s = 0.0;
  double auc = 0.0;
  int hypothesis = -1;
  double score = std::numeric_limits<double>::infinity();  // trimmed RMS, meters
};

/// The 24 proper rotations of the cube.
inline std::vector<Mat3> cube_rotation_group() {
  std::vector<Mat3> out;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms)
    for (int s = 0; s < 8; ++s) {
      Mat3 r = Mat3::Zero();
      for (int row = 0; row < 3; ++row) r(row, p[row]) = (s >> row) & 1 ? -1.0 : 1.0;
      if (r.determinant() > 0.0) out.push_back(r);
    }
  return out;
}

/// 24 cube rotations followed by `extra` axis-angle samples (Fibonacci axes,
/// angles cycling through pi/4, pi/2, 3pi/4).
inline std::vector<Mat3> rotation_hypotheses(int extra) {
  auto out = cube_rotation_group();
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < extra; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / extra;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 axis(r * std::cos(golden * i), r * std::sin(golden * i), z);
    const double angle = kPi / 4 * (1 + i % 3);
    out.push_back(Eigen::AngleAxisd(angle, axis).toRotationMatrix());
  }
  return out;
}

namespace icp_detail {

struct IcpResult {
  RigidTransform data_to_model;
  double trimmed_rms = std::numeric_limits<double>::infinity();
};

/// Point-to-plane ICP of `data` (base frame) onto `model`, starting from the
/// data->model transform `init`.
inline IcpResult refine(const std::vector<Vec3>& data, const TriMesh& model, const RigidTransform& init,
                        const RegistrationOptions& opt) {
  RigidTransform s = init;
  const std::size_t n = data.size();
  const std::size_t keep = std::max<std::size_t>(std::min<std::size_t>(n, 3),
                                                  static_cast<std::size_t>(std::ceil(opt.trim_fraction * n)));
  std::vector<Vec3> moved(n), target(n), normal(n);
  std::vector<double> dist(n);
  std::vector<std::size_t> order(n);
  auto correspond = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      moved[i] = s.apply(data[i]);
      const auto cp = model.closest_point(moved[i]);
      target[i] = cp.point;
      normal[i] = model.face_normals()[cp.face].vec();
      dist[i] = cp.distance;
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  };
  auto rms = [&]() {
    double acc = 0.0;
    for (std::size_t r = 0; r < keep; ++r) acc += dist[order[r]] * dist[order[r]];
    return std::sqrt(acc / static_cast<double>(keep));
  };

  correspond();
  for (int it = 0; it < opt.max_iterations; ++it) {
    Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t r = 0; r < keep; ++r) {
      const std::size_t i = order[r];
      Eigen::Matrix<double, 6, 1> j;
      j.head<3>() = moved[i].cross(normal[i]);
      j.tail<3>() = normal[i];
      const double res = (moved[i] - target[i]).dot(normal[i]);
      ata += j * j.transpose();
      atb -= j * res;
    }
    ata.diagonal().array() += 1e-12;
    const Eigen::Matrix<double, 6, 1> x = ata.ldlt().solve(atb);
    if (!x.allFinite()) break;
    const Vec3 w = x.head<3>(), t = x.tail<3>();
    const double angle = w.norm();
    const Mat3 dr = angle > 1e-15 ? Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() : Mat3::Identity();
    s = RigidTransform::from_approx(dr, t) * s;
    correspond();
    // update magnitude measured as the largest displacement of a data point
    double step = t.norm();
    for (std::size_t r = 0; r < std::min<std::size_t>(keep, 8); ++r) step = std::max(step, (dr * moved[order[r]] - moved[order[r]]).norm());
    if (step < opt.convergence) break;
  }
  return {s, rms()};
}

/// Deterministic thinning to at most `cap` points (voxel centroids then stride).
inline std::vector<Vec3> thin(const std::vector<Vec3>& pts, double voxel, std::size_t cap) {
  std::vector<Vec3> v = voxel > 0.0 ? voxel_downsample(pts, voxel) : pts;
  if (v.size() <= cap) return v;
  std::vector<Vec3> out;
  out.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) out.push_back(v[i * v.size() / cap]);
  return out;
}

inline Vec3 area_centroid(const TriMesh& mesh) {
  Vec3 c = Vec3::Zero();
  double a = 0.0;
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const auto& t = mesh.faces()[f];
    const double fa = mesh.face_area(f);
    c += fa * (mesh.vertices()[t[0]] + mesh.vertices()[t[1]] + mesh.vertices()[t[2]]) / 3.0;
    a += fa;
  }
  return c / a;
}

}  // namespace icp_detail

/// Multi-hypothesis point-to-plane ICP of observed points (base frame) against
/// the object model. Returns the model->base transform with the lowest
/// trimmed RMS; ties go to the lowest hypothesis id.
inline PoseEstimate register_pose(const std::vector<Vec3>& observed, const TriMesh& model,
                                  const RegistrationOptions& opt = {}) {
  if (observed.empty()) throw RegistrationFailed("register_pose: no observed points");
  if (model.empty()) throw InvalidArgument("register_pose: empty model");
  const auto data = icp_detail::thin(observed, opt.voxel, opt.max_points);
  Vec3 data_c = Vec3::Zero();
  for (const auto& p : data) data_c += p;
  data_c /= static_cast<double>(data.size());
  const Vec3 model_c = icp_detail::area_centroid(model);

  PoseEstimate best;
  const auto hyps = rotation_hypotheses(opt.extra_hypotheses);
  for (std::size_t h = 0; h < hyps.size(); ++h) {
    // model->base pose R x + (data_c - R model_c); ICP refines its inverse
    const RigidTransform pose(hyps[h], data_c - hyps[h] * model_c, 1e-9);
    const auto res = icp_detail::refine(data, model, pose.inverse(), opt);
    if (res.trimmed_rms < best.score) {
      best.score = res.trimmed_rms;
      best.hypothesis = static_cast<int>(h);
      best.transform = res.data_to_model.inverse();
    }
  }
  return best;
}

inline PoseEstimate register_pose(const std::vector<DepthImage>& images, const std::vector<RigidTransform>& cameras,
                                  const CameraIntrinsics& k, const TriMesh& model, const RegistrationOptions& opt = {}) {
  if (images.size() != cameras.size()) throw InvalidArgument("register_pose: one camera pose per image");
  std::vector<Vec3> merged;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto pts = backproject(images[i], k, cameras[i]);
    merged.insert(merged.end(), pts.begin(), pts.end());
  }
  return register_pose(merged, model, opt);
}

// ---------------------------------------------------------------------------
// Full pipeline

struct PipelineConfig {
  BallPivotOptions bpa;
  std::size_t resample_points = 2000;
  int viewpoints = 6;
  double cap_half_angle = kPi / 3;
  CameraIntrinsics camera;
  int splat = 1;
  RegistrationOptions registration;
  double auc_threshold = 0.1;
  std::size_t metric_samples = 1000;
  std::uint64_t seed = 0;
};

struct PipelineResult {
  TriMesh reconstruction;
  std::vector<RigidTransform> cameras;
  std::vector<DepthImage> depth;
  PoseEstimate estimate;
};

/// Reconstruct -> resample -> render from viewpoints around `view_start`
/// facing `view_center` -> register against `model`. When `gt` is given the
/// estimate carries ADD-S and its AUC.
inline PipelineResult estimate_pose(const ContactCloud& contacts, const TriMesh& model, const Vec3& view_start,
                                    const Vec3& view_center, const PipelineConfig& cfg,
                                    const std::optional<RigidTransform>& gt = std::nullopt) {
  PipelineResult out;
  out.reconstruction = ball_pivot_reconstruct(contacts, cfg.bpa);
  const ContactCloud dense = sample_mesh_surface(out.reconstruction, cfg.resample_points, cfg.seed);
  out.cameras = generate_viewpoints(view_start, view_center, cfg.viewpoints, cfg.cap_half_angle);
  for (const auto& cam : out.cameras)
    out.depth.push_back(render_depth(visibility_filter(dense, cam).points(), cfg.camera, cfg.splat));
  out.estimate = register_pose(out.depth, out.cameras, cfg.camera, model, cfg.registration);
  if (gt) {
    const auto sample = sample_mesh_surface(model, cfg.metric_samples, cfg.seed + 1).points();
    const auto d = add_s_distances(out.estimate.transform, *gt, sample, model);
    out.estimate.add_s = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    out.estimate.auc = auc_from_distances(d, cfg.auc_threshold);
  }
  return out;
}

}  // namespace tactile
