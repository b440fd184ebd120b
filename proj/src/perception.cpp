#include "aerialnav/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace aerialnav {

namespace {

constexpr std::int64_t kKeyOffset = 1 << 20;

std::uint64_t pack(const Eigen::Vector3i& c) {
  const auto part = [](int v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v) + kKeyOffset) & 0x1FFFFF; };
  return (part(c.x()) << 42) | (part(c.y()) << 21) | part(c.z());
}

Eigen::Vector3i voxel_index(const Vec3& p, double size) {
  return (p / size).array().floor().cast<int>();
}

}  // namespace

// ---------------------------------------------------------------------------
// SpatialHashGrid

SpatialHashGrid::SpatialHashGrid(std::span<const Vec3> points, double cell_size)
    : points_(points.begin(), points.end()), cell_(cell_size) {
  if (!(cell_size > 0.0)) throw InvalidInput("SpatialHashGrid: cell size must be positive");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Eigen::Vector3i c = cell_of(points_[i]);
    if (i == 0) {
      lo_ = hi_ = c;
    } else {
      lo_ = lo_.cwiseMin(c);
      hi_ = hi_.cwiseMax(c);
    }
    cells_[key_of(c)].push_back(i);
  }
}

Eigen::Vector3i SpatialHashGrid::cell_of(const Vec3& p) const { return voxel_index(p, cell_); }

SpatialHashGrid::Key SpatialHashGrid::key_of(const Eigen::Vector3i& c) { return pack(c); }

void SpatialHashGrid::scan_cell(const Eigen::Vector3i& c, const Vec3& query, double limit,
                                std::optional<Neighbor>& best) const {
  auto it = cells_.find(key_of(c));
  if (it == cells_.end()) return;
  for (std::size_t idx : it->second) {
    const double d = (points_[idx] - query).norm();
    if (d > limit) continue;
    if (!best || d < best->distance || (d == best->distance && idx < best->index)) best = Neighbor{idx, d};
  }
}

std::optional<SpatialHashGrid::Neighbor> SpatialHashGrid::nearest(const Vec3& query, double max_radius) const {
  std::optional<Neighbor> best;
  if (points_.empty()) return best;
  const Eigen::Vector3i lo = cell_of(query - Vec3::Constant(max_radius)).cwiseMax(lo_);
  const Eigen::Vector3i hi = cell_of(query + Vec3::Constant(max_radius)).cwiseMin(hi_);
  for (int x = lo.x(); x <= hi.x(); ++x)
    for (int y = lo.y(); y <= hi.y(); ++y)
      for (int z = lo.z(); z <= hi.z(); ++z) scan_cell({x, y, z}, query, max_radius, best);
  return best;
}

std::optional<SpatialHashGrid::Neighbor> SpatialHashGrid::nearest(const Vec3& query) const {
  std::optional<Neighbor> best;
  if (points_.empty()) return best;
  const double inf = std::numeric_limits<double>::infinity();
  const Eigen::Vector3i c = cell_of(query);
  const int reach = std::max((c - lo_).cwiseAbs().maxCoeff(), (hi_ - c).cwiseAbs().maxCoeff());
  for (int k = 0; k <= reach; ++k) {
    for (int dx = -k; dx <= k; ++dx) {
      for (int dy = -k; dy <= k; ++dy) {
        const bool rim = std::max(std::abs(dx), std::abs(dy)) == k;
        for (int dz = -k; dz <= k; dz += (rim || k == 0) ? 1 : 2 * k)
          scan_cell(c + Eigen::Vector3i(dx, dy, dz), query, inf, best);
      }
    }
    // Cells beyond ring k are at least k cells away from the query.
    if (best && best->distance <= k * cell_) break;
  }
  return best;
}

std::vector<std::size_t> SpatialHashGrid::radius_search(const Vec3& query, double radius) const {
  std::vector<std::size_t> out;
  if (points_.empty()) return out;
  const Eigen::Vector3i lo = cell_of(query - Vec3::Constant(radius)).cwiseMax(lo_);
  const Eigen::Vector3i hi = cell_of(query + Vec3::Constant(radius)).cwiseMin(hi_);
  for (int x = lo.x(); x <= hi.x(); ++x)
    for (int y = lo.y(); y <= hi.y(); ++y)
      for (int z = lo.z(); z <= hi.z(); ++z) {
        auto it = cells_.find(key_of({x, y, z}));
        if (it == cells_.end()) continue;
        for (std::size_t idx : it->second)
          if ((points_[idx] - query).norm() <= radius) out.push_back(idx);
      }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Cloud construction

std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double voxel_size,
                                   VoxelRepresentative representative) {
  if (!(voxel_size > 0.0)) throw InvalidInput("voxel_downsample: voxel size must be positive");
  std::unordered_map<std::uint64_t, std::size_t> slot;
  std::vector<Vec3> sums;
  std::vector<std::size_t> counts;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [it, fresh] = slot.try_emplace(pack(voxel_index(points[i], voxel_size)), sums.size());
    if (fresh) {
      sums.push_back(Vec3::Zero());
      counts.push_back(0);
      members.emplace_back();
    }
    sums[it->second] += points[i];
    ++counts[it->second];
    members[it->second].push_back(i);
  }

  std::vector<Vec3> out;
  out.reserve(sums.size());
  for (std::size_t v = 0; v < sums.size(); ++v) {
    const Vec3 centroid = sums[v] / static_cast<double>(counts[v]);
    if (representative == VoxelRepresentative::Centroid) {
      out.push_back(centroid);
      continue;
    }
    std::size_t best = members[v].front();
    double best_d = (points[best] - centroid).squaredNorm();
    for (std::size_t idx : members[v]) {
      const double d = (points[idx] - centroid).squaredNorm();
      if (d < best_d) {
        best = idx;
        best_d = d;
      }
    }
    out.push_back(points[best]);
  }
  return out;
}

LocalObstacleCloud backproject(const DepthImage& depth, const CameraModel& camera, const Rigid3& world_T_camera,
                               const PerceptionConfig& config) {
  LocalObstacleCloud cloud;
  cloud.voxel_size = config.voxel_size;
  cloud.horizon = config.horizon;
  cloud.stamp = depth.timestamp;
  cloud.viewpoint = world_T_camera.translation();

  const int stride = std::max(config.stride, 1);
  std::vector<Vec3> raw;
  for (int v = 0; v < depth.height; v += stride) {
    for (int u = 0; u < depth.width; u += stride) {
      const double d = depth.at(u, v);
      if (!(d > 0.0)) continue;
      const Vec3 p_cam(d * (u - camera.cx) / camera.fx, d * (v - camera.cy) / camera.fy, d);
      const Vec3 p = world_T_camera * p_cam;
      if ((p - cloud.viewpoint).norm() <= config.horizon) raw.push_back(p);
    }
  }
  if (raw.empty()) return cloud;

  const auto reps = voxel_downsample(raw, config.voxel_size, VoxelRepresentative::NearestToCentroid);

  // Greedy minimum-spacing pass; voxel representatives in neighboring cells
  // can otherwise sit arbitrarily close to each other.
  const double spacing = 0.5 * config.voxel_size;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> kept;
  for (const Vec3& p : reps) {
    const Eigen::Vector3i c = voxel_index(p, spacing);
    bool crowded = false;
    for (int dx = -1; dx <= 1 && !crowded; ++dx)
      for (int dy = -1; dy <= 1 && !crowded; ++dy)
        for (int dz = -1; dz <= 1 && !crowded; ++dz) {
          auto it = kept.find(pack(c + Eigen::Vector3i(dx, dy, dz)));
          if (it == kept.end()) continue;
          for (std::size_t idx : it->second)
            if ((cloud.points[idx] - p).norm() < spacing) {
              crowded = true;
              break;
            }
        }
    if (crowded) continue;
    kept[pack(c)].push_back(cloud.points.size());
    cloud.points.push_back(p);
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Conflicts and anchors

std::vector<Conflict> detect_conflicts(const BSpline& traj, const SpatialHashGrid& grid, double s_clear) {
  if (!(s_clear > 0.0)) throw InvalidInput("detect_conflicts: s_clear must be positive");
  std::vector<Conflict> out;
  const auto& q = traj.control_points();
  for (Eigen::Index i = 3; i <= q.cols() - 4; ++i) {
    const auto hit = grid.nearest(q.col(i), s_clear);
    if (hit && hit->distance < s_clear) out.push_back({i, grid.points()[hit->index], hit->distance});
  }
  return out;
}

std::vector<Conflict> detect_conflicts(const BSpline& traj, const LocalObstacleCloud& cloud, double s_clear) {
  if (!(s_clear > 0.0)) throw InvalidInput("detect_conflicts: s_clear must be positive");
  return detect_conflicts(traj, SpatialHashGrid(cloud.points, s_clear), s_clear);
}

std::size_t AnchorSet::KeyHash::operator()(const std::pair<Eigen::Index, std::uint64_t>& k) const {
  return std::hash<std::uint64_t>()(k.second * 1000003u + static_cast<std::uint64_t>(k.first));
}

bool AnchorSet::insert(const AnchorPair& anchor) {
  const auto key = std::make_pair(anchor.owner_index, pack(voxel_index(anchor.anchor, voxel_)));
  if (index_.count(key)) return false;
  index_.emplace(key, anchors_.size());
  anchors_.push_back(anchor);
  return true;
}

std::vector<AnchorPair> build_anchors(std::span<const Conflict> conflicts, const ControlPoints<double>& control_points,
                                      double voxel_size) {
  AnchorSet set(voxel_size);
  for (const auto& c : conflicts) {
    const Vec3 q = control_points.col(c.control_index);
    Vec3 dir = q - c.nearest_point;
    if (dir.norm() < 1e-12) {
      dir = c.control_index > 0 ? Vec3(control_points.col(c.control_index - 1) - c.nearest_point) : Vec3::Zero();
      if (dir.norm() < 1e-12) dir = Vec3::UnitZ();
    }
    set.insert({c.nearest_point, dir.normalized(), c.control_index});
  }
  return set.anchors();
}

// ---------------------------------------------------------------------------
// SurfaceModel

SurfaceModel::SurfaceModel(const LocalObstacleCloud& cloud, double cell_size, double occlusion_radius)
    : grid_(cloud.points, cell_size),
      coarse_(cloud.points, std::max(cell_size, occlusion_radius)),
      viewpoint_(cloud.viewpoint),
      voxel_(cloud.voxel_size),
      occlusion_radius_(occlusion_radius) {}

Vec3 SurfaceModel::normal(std::size_t index) const {
  if (auto it = normals_.find(index); it != normals_.end()) return it->second;
  const Vec3& p = grid_.points()[index];
  Vec3 toward_view = viewpoint_ - p;
  toward_view = toward_view.norm() > 1e-12 ? Vec3(toward_view.normalized()) : Vec3::UnitZ();

  Vec3 n = toward_view;
  const auto neighbors = coarse_.radius_search(p, std::max(3.0 * voxel_, 0.25));
  if (neighbors.size() >= 3) {
    Vec3 mean = Vec3::Zero();
    for (auto i : neighbors) mean += grid_.points()[i];
    mean /= static_cast<double>(neighbors.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto i : neighbors) {
      const Vec3 r = grid_.points()[i] - mean;
      cov += r * r.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const auto& values = solver.eigenvalues();
    // Planar patch only; collinear neighborhoods keep the line of sight.
    if (values(1) > 1e-6 * values(2)) {
      n = solver.eigenvectors().col(0);
      if (n.dot(toward_view) < 0.0) n = -n;
    }
  }
  normals_.emplace(index, n);
  return n;
}

bool SurfaceModel::behind_surface(const Vec3& query) const {
  const auto hit = coarse_.nearest(query, occlusion_radius_);
  if (!hit) return false;
  if ((query - coarse_.points()[hit->index]).dot(normal(hit->index)) >= 0.0) return false;
  return line_of_sight_blocked(query);
}

bool SurfaceModel::line_of_sight_blocked(const Vec3& query) const {
  const Vec3 to_view = viewpoint_ - query;
  const double length = to_view.norm();
  if (length < 1e-12) return false;
  const Vec3 dir = to_view / length;
  // Samples sit at most about one voxel apart on a surface facing the camera.
  const double step = 0.5 * voxel_;
  const double reach = std::min(length, 2.0 * occlusion_radius_ + voxel_);
  for (double s = step; s <= reach; s += step) {
    const auto near = grid_.nearest(query + s * dir, voxel_);
    if (near && near->distance <= voxel_) return true;
  }
  return false;
}

std::vector<AnchorPair> build_escape_anchors(const ControlPoints<double>& q, std::span<const Eigen::Index> penetrating,
                                             const SurfaceModel& surface, double s_clear, double max_escape) {
  std::vector<AnchorPair> out;
  if (penetrating.empty() || surface.empty()) return out;
  const double step = 0.5 * surface.voxel_size();
  constexpr int kDirections = 16;
  constexpr double inf = std::numeric_limits<double>::infinity();

  struct Escape {
    double surface_exit = inf;
    double clear = inf;
  };
  const auto march = [&](const Vec3& from, const Vec3& dir, double give_up) {
    Escape e;
    for (double s = step; s <= give_up; s += step) {
      const Vec3 x = from + s * dir;
      if (surface.behind_surface(x)) {
        e.surface_exit = inf;
        continue;
      }
      if (e.surface_exit == inf) e.surface_exit = s;
      const auto hit = surface.grid().nearest(x, s_clear);
      if (!hit) {
        e.clear = s;
        return e;
      }
    }
    return Escape{};
  };

  std::size_t begin = 0;
  while (begin < penetrating.size()) {
    std::size_t end = begin + 1;
    while (end < penetrating.size() && penetrating[end] == penetrating[end - 1] + 1) ++end;
    const Eigen::Index first = penetrating[begin];
    const Eigen::Index last = penetrating[end - 1];

    const Eigen::Index before = std::max<Eigen::Index>(first - 1, 0);
    const Eigen::Index after = std::min<Eigen::Index>(last + 1, q.cols() - 1);
    Vec3 tangent = q.col(after) - q.col(before);
    tangent = tangent.norm() > 1e-9 ? Vec3(tangent.normalized()) : Vec3::UnitX();
    Vec3 lateral = Vec3::UnitZ().cross(tangent);
    if (lateral.norm() < 1e-6) lateral = Vec3::UnitX().cross(tangent);
    lateral.normalize();
    const Vec3 binormal = tangent.cross(lateral);

    double best_cost = max_escape;
    int best_k = -1;
    std::vector<Escape> best_escapes;
    for (int k = 0; k < kDirections; ++k) {
      const double theta = 2.0 * kPi * k / kDirections;
      const Vec3 dir = std::cos(theta) * lateral + std::sin(theta) * binormal;
      std::vector<Escape> escapes;
      double cost = 0.0;
      for (Eigen::Index i = first; i <= last && cost <= best_cost; ++i) {
        escapes.push_back(march(q.col(i), dir, best_cost));
        cost = std::max(cost, escapes.back().clear);
      }
      if (cost < best_cost || (best_k < 0 && cost <= best_cost)) {
        best_cost = cost;
        best_k = k;
        best_escapes = std::move(escapes);
      }
    }
    if (best_k >= 0 && best_escapes.size() == static_cast<std::size_t>(last - first + 1)) {
      const double theta = 2.0 * kPi * best_k / kDirections;
      const Vec3 dir = std::cos(theta) * lateral + std::sin(theta) * binormal;
      for (Eigen::Index i = first; i <= last; ++i) {
        const auto& e = best_escapes[static_cast<std::size_t>(i - first)];
        if (e.surface_exit == inf) continue;
        out.push_back({Vec3(q.col(i)) + e.surface_exit * dir, dir, i});
      }
    }
    begin = end;
  }
  return out;
}

}  // namespace aerialnav
