#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "aerialnav/bspline.hpp"
#include "aerialnav/geometry.hpp"
#include "aerialnav/world.hpp"

namespace aerialnav {

struct PerceptionConfig {
  int stride = 4;
  double voxel_size = 0.10;
  double horizon = 5.0;
};

struct LocalObstacleCloud {
  std::vector<Vec3> points;
  double voxel_size = 0.1;
  double horizon = 5.0;
  double stamp = 0.0;
  // Camera position at capture; free space lies toward it.
  Vec3 viewpoint = Vec3::Zero();
};

/// Uniform spatial hash over a fixed point set.
class SpatialHashGrid {
 public:
  struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
  };

  SpatialHashGrid(std::span<const Vec3> points, double cell_size);

  /// Nearest point within max_radius (inclusive); ties go to the lower index.
  std::optional<Neighbor> nearest(const Vec3& query, double max_radius) const;
  /// Unbounded nearest neighbor.
  std::optional<Neighbor> nearest(const Vec3& query) const;
  /// Indices within radius, in ascending index order.
  std::vector<std::size_t> radius_search(const Vec3& query, double radius) const;

  const std::vector<Vec3>& points() const { return points_; }
  double cell_size() const { return cell_; }
  bool empty() const { return points_.empty(); }

 private:
  using Key = std::uint64_t;
  Eigen::Vector3i cell_of(const Vec3& p) const;
  static Key key_of(const Eigen::Vector3i& c);
  void scan_cell(const Eigen::Vector3i& c, const Vec3& query, double limit, std::optional<Neighbor>& best) const;

  std::vector<Vec3> points_;
  double cell_;
  std::unordered_map<Key, std::vector<std::size_t>> cells_;
  Eigen::Vector3i lo_ = Eigen::Vector3i::Zero();
  Eigen::Vector3i hi_ = Eigen::Vector3i::Zero();
};

enum class VoxelRepresentative {
  Centroid,
  // The input point closest to the voxel centroid; keeps samples on surfaces.
  NearestToCentroid,
};

/// One representative per occupied voxel, ordered by first occupancy.
std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double voxel_size,
                                   VoxelRepresentative representative = VoxelRepresentative::Centroid);

/// World-frame obstacle points from valid depth pixels on the stride grid,
/// clipped to the horizon around the camera and thinned so that no two points
/// are closer than voxel_size / 2.
LocalObstacleCloud backproject(const DepthImage& depth, const CameraModel& camera, const Rigid3& world_T_camera,
                               const PerceptionConfig& config = {});

struct Conflict {
  Eigen::Index control_index = 0;
  Vec3 nearest_point = Vec3::Zero();
  double distance = 0.0;
};

/// Interior control points (3 .. M-4) whose nearest obstacle point is closer
/// than s_clear.
std::vector<Conflict> detect_conflicts(const BSpline& traj, const SpatialHashGrid& grid, double s_clear);
std::vector<Conflict> detect_conflicts(const BSpline& traj, const LocalObstacleCloud& cloud, double s_clear);

struct AnchorPair {
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  Eigen::Index owner_index = 0;
};

/// Deduplicating anchor store keyed by (control point, anchor voxel).
class AnchorSet {
 public:
  explicit AnchorSet(double voxel_size) : voxel_(voxel_size) {}
  bool insert(const AnchorPair& anchor);
  const std::vector<AnchorPair>& anchors() const { return anchors_; }
  std::size_t size() const { return anchors_.size(); }

 private:
  struct KeyHash {
    std::size_t operator()(const std::pair<Eigen::Index, std::uint64_t>& k) const;
  };
  double voxel_;
  std::vector<AnchorPair> anchors_;
  std::unordered_map<std::pair<Eigen::Index, std::uint64_t>, std::size_t, KeyHash> index_;
};

/// Nearest-point anchors: direction from the obstacle sample toward the
/// control point. When they coincide the direction points back to the
/// previous control point, then world +z.
std::vector<AnchorPair> build_anchors(std::span<const Conflict> conflicts, const ControlPoints<double>& control_points,
                                      double voxel_size);

/// Cloud plus the queries refinement needs: nearest samples, oriented surface
/// normals and a behind-the-surface test.
class SurfaceModel {
 public:
  SurfaceModel(const LocalObstacleCloud& cloud, double cell_size, double occlusion_radius);

  const SpatialHashGrid& grid() const { return grid_; }
  bool empty() const { return grid_.empty(); }
  double voxel_size() const { return voxel_; }

  /// Unit outward normal of the sample, oriented toward the viewpoint.
  Vec3 normal(std::size_t index) const;

  /// True when the nearest sample within the occlusion radius has the query
  /// on its back side and the line of sight from the query back to the
  /// viewpoint passes within one voxel of a sample.
  bool behind_surface(const Vec3& query) const;

  /// Line of sight toward the viewpoint, checked up to twice the occlusion
  /// radius, passes within one voxel of a sample.
  bool line_of_sight_blocked(const Vec3& query) const;

 private:
  SpatialHashGrid grid_;
  SpatialHashGrid coarse_;
  Vec3 viewpoint_;
  double voxel_;
  double occlusion_radius_;
  mutable std::unordered_map<std::size_t, Vec3> normals_;
};

/// Anchors for control points lying behind the observed surface. Runs of
/// consecutive penetrating points share one escape direction orthogonal to
/// the local path; each anchor sits where that direction leaves the obstacle.
/// These anchors start with negative signed offset (Q - p) . v.
std::vector<AnchorPair> build_escape_anchors(const ControlPoints<double>& control_points,
                                             std::span<const Eigen::Index> penetrating, const SurfaceModel& surface,
                                             double s_clear, double max_escape = 3.0);

}  // namespace aerialnav
