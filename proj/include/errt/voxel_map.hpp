#pragma once

#include "errt/common.hpp"

#include <array>
#include <cctype>
#include <limits>
#include <optional>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace errt {

enum class VoxelState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

/// Axis-aligned box in world coordinates.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool valid() const { return (min.array() <= max.array()).all(); }
  bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
};

/// Range-limited spinning LiDAR: full azimuth, limited elevation.
struct SensorGeometry {
  double range = 10.0;                    // S_r, used for information gain
  double vertical_fov = deg2rad(45.0);    // S_theta, full angle
  double map_range = 20.0;                // S_map, used when integrating scans

  void validate() const {
    if (!(range > 0.0)) throw ConfigError("S_r", "sensor range must be positive");
    if (!(vertical_fov > 0.0 && vertical_fov <= std::numbers::pi + 1e-12))
      throw ConfigError("S_theta_deg", "vertical field of view must be in (0, 180] degrees");
    if (!(map_range >= range)) throw ConfigError("S_map", "mapping range must be >= S_r");
  }
};

/// True when `offset` (voxel center minus sensor pose) lies inside the
/// range ball and the elevation band of the sensor.
inline bool in_frustum(const Vec3& offset, const SensorGeometry& sensor) {
  if (offset.squaredNorm() > sensor.range * sensor.range) return false;
  const double elevation = std::atan2(offset.z(), std::hypot(offset.x(), offset.y()));
  return std::abs(elevation) <= 0.5 * sensor.vertical_fov;
}

inline double point_segment_distance2(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double dd = d.squaredNorm();
  double t = 0.0;
  if (dd > 0.0) t = std::clamp((p - a).dot(d) / dd, 0.0, 1.0);
  return (a + t * d - p).squaredNorm();
}

namespace detail {

inline int floor_to_int(double v) { return static_cast<int>(std::floor(v)); }

/// Integer indices i whose cell center offset + (i + 0.5) * size lies in [lo, hi].
inline std::pair<int, int> center_index_range(double lo, double hi, double offset, double size) {
  return {static_cast<int>(std::ceil((lo - offset) / size - 0.5)),
          static_cast<int>(std::floor((hi - offset) / size - 0.5))};
}

/// Parameter interval of a + t*d inside [lo, hi]; empty when first > second.
inline std::pair<double, double> slab(double a, double d, double lo, double hi) {
  if (std::abs(d) < 1e-300) {
    if (a >= lo && a <= hi) return {-1e300, 1e300};
    return {1.0, 0.0};
  }
  double t0 = (lo - a) / d;
  double t1 = (hi - a) / d;
  if (t0 > t1) std::swap(t0, t1);
  return {t0, t1};
}

}  // namespace detail

/// Amanatides-Woo traversal of the voxels crossed by segment [from, to] on a
/// grid with the given origin and edge length. Visits the voxel containing
/// `from` first and the voxel containing `to` last; each step moves one face.
/// `fn(key)` returns false to stop early. Returns false if stopped early.
template <typename Fn>
bool walk_voxels(const Vec3& from, const Vec3& to, const Vec3& grid_origin, double res, Fn&& fn) {
  const Vec3 a = (from - grid_origin) / res;
  const Vec3 b = (to - grid_origin) / res;
  VoxelKey key{detail::floor_to_int(a.x()), detail::floor_to_int(a.y()), detail::floor_to_int(a.z())};
  const VoxelKey last{detail::floor_to_int(b.x()), detail::floor_to_int(b.y()), detail::floor_to_int(b.z())};
  const Vec3 d = b - a;

  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int remaining = 0;
  for (int i = 0; i < 3; ++i) {
    remaining += std::abs(last[i] - key[i]);
    if (key[i] == last[i] || d[i] == 0.0) {
      step[i] = 0;
      t_max[i] = kInf;
      t_delta[i] = kInf;
    } else if (d[i] > 0.0) {
      step[i] = 1;
      t_delta[i] = 1.0 / d[i];
      t_max[i] = (key[i] + 1 - a[i]) / d[i];
    } else {
      step[i] = -1;
      t_delta[i] = -1.0 / d[i];
      t_max[i] = (a[i] - key[i]) / -d[i];
    }
  }
  if (!fn(key)) return false;
  while (remaining > 0) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] == kInf) {
      // Floating-point drift left an axis short; finish on the remaining ones.
      for (int i = 0; i < 3; ++i)
        if (key[i] != last[i]) {
          axis = i;
          break;
        }
      step[axis] = last[axis] > key[axis] ? 1 : -1;
    }
    key[axis] += step[axis];
    --remaining;
    if (key[axis] == last[axis]) {
      t_max[axis] = kInf;
    } else {
      t_max[axis] += t_delta[axis];
    }
    if (!fn(key)) return false;
  }
  return true;
}

/// Sparse tri-state voxel map. Voxels are stored in 16^3 chunks allocated on
/// first write; absent voxels are Unknown. Each chunk keeps free/known counts
/// for the 2^d blocks it contains (d = 1..4), which backs the coarse "depth"
/// queries: a block is Free only when every voxel in it is Free.
class OccupancyGrid {
 public:
  static constexpr int kChunkBits = 4;
  static constexpr int kChunkSize = 1 << kChunkBits;
  static constexpr int kMaxDepth = kChunkBits;

 private:
  static constexpr int kCells = kChunkSize * kChunkSize * kChunkSize;
  // Block slots per depth: 8^(4-d) blocks of 2^d voxels, packed d = 1..4.
  static constexpr std::array<int, 5> kSlotOffset{0, 0, 512, 576, 584};
  static constexpr int kSlots = 585;

  struct Chunk {
    std::array<VoxelState, kCells> cells{};
    std::array<std::uint16_t, kSlots> free_count{};
    std::array<std::uint16_t, kSlots> known_count{};
    int known = 0;
  };

  static VoxelKey chunk_key(const VoxelKey& k) { return {k.x >> kChunkBits, k.y >> kChunkBits, k.z >> kChunkBits}; }
  static int cell_index(const VoxelKey& k) {
    constexpr int m = kChunkSize - 1;
    return (((k.x & m) << kChunkBits) + (k.y & m)) * kChunkSize + (k.z & m);
  }
  static int block_slot(int bx, int by, int bz, int depth) {
    const int n = kChunkSize >> depth;
    return kSlotOffset[depth] + (bx * n + by) * n + bz;
  }
  static void check_depth(int depth) {
    if (depth < 0 || depth > kMaxDepth) throw Error("aggregation depth must be in [0, 4]");
  }


 public:

  explicit OccupancyGrid(double resolution = 0.2, Vec3 origin = Vec3::Zero()) : res_(resolution), origin_(origin) {
    if (!(resolution > 0.0) || !std::isfinite(resolution)) throw Error("voxel resolution must be positive");
  }

  OccupancyGrid(const OccupancyGrid& other) : res_(other.res_), origin_(other.origin_), known_(other.known_),
                                              los_unknown_blocks_(other.los_unknown_blocks_) {
    for (const auto& [k, c] : other.chunks_) chunks_.emplace(k, std::make_unique<Chunk>(*c));
  }
  OccupancyGrid& operator=(const OccupancyGrid& other) {
    if (this != &other) *this = OccupancyGrid(other);
    return *this;
  }
  OccupancyGrid(OccupancyGrid&&) noexcept = default;
  OccupancyGrid& operator=(OccupancyGrid&&) noexcept = default;

  double resolution() const { return res_; }
  const Vec3& origin() const { return origin_; }

  /// When true (default) Unknown voxels occlude line of sight; otherwise only
  /// Occupied voxels do.
  bool los_unknown_blocks() const { return los_unknown_blocks_; }
  void set_los_unknown_blocks(bool v) { los_unknown_blocks_ = v; }

  VoxelKey key_of(const Vec3& p) const {
    const Vec3 q = (p - origin_) / res_;
    return {detail::floor_to_int(q.x()), detail::floor_to_int(q.y()), detail::floor_to_int(q.z())};
  }
  Vec3 center_of(const VoxelKey& k) const {
    return origin_ + res_ * Vec3(k.x + 0.5, k.y + 0.5, k.z + 0.5);
  }

  VoxelState state(const VoxelKey& k) const {
    const Chunk* c = find_chunk(chunk_key(k));
    return c ? c->cells[cell_index(k)] : VoxelState::Unknown;
  }
  VoxelState get_state(const Vec3& p) const { return state(key_of(p)); }

  void set(const VoxelKey& k, VoxelState s) {
    const VoxelKey ck = chunk_key(k);
    auto it = chunks_.find(ck);
    if (it == chunks_.end()) {
      if (s == VoxelState::Unknown) return;
      it = chunks_.emplace(ck, std::make_unique<Chunk>()).first;
    }
    Chunk& c = *it->second;
    VoxelState& cell = c.cells[cell_index(k)];
    const VoxelState old = cell;
    if (old == s) return;
    cell = s;
    const int known_delta = (s != VoxelState::Unknown) - (old != VoxelState::Unknown);
    const int free_delta = (s == VoxelState::Free) - (old == VoxelState::Free);
    known_ += known_delta;
    c.known += known_delta;
    const int lx = k.x & (kChunkSize - 1), ly = k.y & (kChunkSize - 1), lz = k.z & (kChunkSize - 1);
    for (int d = 1; d <= kMaxDepth; ++d) {
      const int slot = block_slot(lx >> d, ly >> d, lz >> d, d);
      c.known_count[slot] = static_cast<std::uint16_t>(c.known_count[slot] + known_delta);
      c.free_count[slot] = static_cast<std::uint16_t>(c.free_count[slot] + free_delta);
    }
  }
  void set(const Vec3& p, VoxelState s) { set(key_of(p), s); }

  std::size_t known_count() const { return known_; }

  /// Marks the voxels crossed by [origin, endpoint] Free and the endpoint
  /// voxel Occupied (hit) or Free (miss). Occupied voxels are never cleared.
  void integrate_ray(const Vec3& origin, const Vec3& endpoint, bool hit) {
    const VoxelKey end_key = key_of(endpoint);
    walk_voxels(origin, endpoint, origin_, res_, [&](const VoxelKey& k) {
      if (k == end_key) {
        if (hit) {
          set(k, VoxelState::Occupied);
        } else if (state(k) != VoxelState::Occupied) {
          set(k, VoxelState::Free);
        }
      } else if (state(k) == VoxelState::Unknown) {
        set(k, VoxelState::Free);
      }
      return true;
    });
  }

  /// True when no non-Free cell at `depth` has its center within r of `center`.
  bool sphere_safe(const Vec3& center, double r, int depth = 0) const { return segment_safe(center, center, r, depth); }

  /// Capsule test: every cell (at `depth`) whose center lies within r of the
  /// segment [a, b] is Free. At depth d > 0 a 2^d block counts as Free only if
  /// all of its voxels are Free, and the radius is grown by the block's
  /// center-spread so the test stays conservative with respect to depth 0.
  bool segment_safe(const Vec3& a_in, const Vec3& b_in, double r, int depth = 0) const {
    check_depth(depth);
    Vec3 a = a_in, b = b_in;
    if (std::lexicographical_compare(b.data(), b.data() + 3, a.data(), a.data() + 3)) std::swap(a, b);
    const double cell = res_ * (1 << depth);
    const double reach = r + 0.5 * std::sqrt(3.0) * res_ * ((1 << depth) - 1);
    Cursor cur(*this);
    return for_each_center_near_segment(a, b, reach, cell, [&](const VoxelKey& block) {
      return cur.block_free(block, depth);
    });
  }

  /// Local sampling box: cube of side L around p, shrunk to the extent of the
  /// Free voxel centers inside it (unchanged when it holds no Free voxel).
  Aabb local_bounds(const Vec3& p, double side) const {
    if (!(side > 0.0)) throw Error("local box side must be positive");
    const Aabb cube{p - Vec3::Constant(0.5 * side), p + Vec3::Constant(0.5 * side)};
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    bool any = false;
    const VoxelKey kmin = key_of(cube.min), kmax = key_of(cube.max);
    for (const auto& [ck, chunk] : chunks_) {
      if (chunk->known == 0) continue;
      const VoxelKey base{ck.x * kChunkSize, ck.y * kChunkSize, ck.z * kChunkSize};
      if (base.x > kmax.x || base.y > kmax.y || base.z > kmax.z || base.x + kChunkSize <= kmin.x ||
          base.y + kChunkSize <= kmin.y || base.z + kChunkSize <= kmin.z)
        continue;
      for (int i = 0; i < kChunkSize * kChunkSize * kChunkSize; ++i) {
        if (chunk->cells[i] != VoxelState::Free) continue;
        const VoxelKey k{base.x + (i >> (2 * kChunkBits)), base.y + ((i >> kChunkBits) & (kChunkSize - 1)),
                         base.z + (i & (kChunkSize - 1))};
        const Vec3 c = center_of(k);
        if (!cube.contains(c)) continue;
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
        any = true;
      }
    }
    return any ? Aabb{lo, hi} : cube;
  }

  /// Line of sight from `from` to the center of `target`: every voxel crossed
  /// strictly between the two end voxels must be Free (or merely not
  /// Occupied when Unknown does not block).
  bool los_free(const Vec3& from, const VoxelKey& target) const {
    Cursor cur(*this);
    return los_free(cur, from, key_of(from), target);
  }

  /// Calls fn(key) for each Unknown voxel in the sensor frustum at `pose`.
  /// At depth d > 0 at most one voxel (the first in x-y-z order that lies in
  /// the frustum) is reported per 2^d block, so results are a subset of the
  /// depth-0 set. fn returns false to stop early.
  template <typename Fn>
  bool for_each_unknown_in_frustum(const Vec3& pose, const SensorGeometry& sensor, int depth, Fn&& fn) const {
    check_depth(depth);
    Cursor cur(*this);
    const double range = sensor.range;
    const double half = 0.5 * sensor.vertical_fov;
    const bool elev_limited = half < 0.5 * std::numbers::pi - 1e-12;
    const double tan_half = elev_limited ? std::tan(half) : 0.0;
    if (depth == 0) {
      const auto [x0, x1] = detail::center_index_range(pose.x() - range, pose.x() + range, origin_.x(), res_);
      for (int ix = x0; ix <= x1; ++ix) {
        const double dx = origin_.x() + (ix + 0.5) * res_ - pose.x();
        const double ry = std::sqrt(std::max(0.0, range * range - dx * dx));
        const auto [y0, y1] = detail::center_index_range(pose.y() - ry, pose.y() + ry, origin_.y(), res_);
        for (int iy = y0; iy <= y1; ++iy) {
          const double dy = origin_.y() + (iy + 0.5) * res_ - pose.y();
          const double h2 = dx * dx + dy * dy;
          double rz = std::sqrt(std::max(0.0, range * range - h2));
          if (elev_limited) rz = std::min(rz, tan_half * std::sqrt(h2));
          rz += res_;  // margin; the exact test below decides
          const auto [z0, z1] = detail::center_index_range(pose.z() - rz, pose.z() + rz, origin_.z(), res_);
          for (int iz = z0; iz <= z1; ++iz) {
            const VoxelKey k{ix, iy, iz};
            if (cur.state(k) != VoxelState::Unknown) continue;
            if (!in_frustum(center_of(k) - pose, sensor)) continue;
            if (!fn(k)) return false;
          }
        }
      }
      return true;
    }
    const int n = 1 << depth;
    const double cell = res_ * n;
    const double reach = range + 0.5 * std::sqrt(3.0) * res_ * (n - 1);
    std::array<std::pair<int, int>, 3> rng;
    for (int i = 0; i < 3; ++i) rng[i] = detail::center_index_range(pose[i] - reach, pose[i] + reach, origin_[i], cell);
    for (int bx = rng[0].first; bx <= rng[0].second; ++bx)
      for (int by = rng[1].first; by <= rng[1].second; ++by)
        for (int bz = rng[2].first; bz <= rng[2].second; ++bz) {
          const VoxelKey block{bx, by, bz};
          const Vec3 bc = origin_ + cell * Vec3(bx + 0.5, by + 0.5, bz + 0.5);
          if ((bc - pose).norm() > reach) continue;
          if (!cur.block_has_unknown(block, depth)) continue;
          bool found = false;
          for (int i = 0; i < n && !found; ++i)
            for (int j = 0; j < n && !found; ++j)
              for (int l = 0; l < n && !found; ++l) {
                const VoxelKey k{bx * n + i, by * n + j, bz * n + l};
                if (cur.state(k) != VoxelState::Unknown) continue;
                if (!in_frustum(center_of(k) - pose, sensor)) continue;
                found = true;
                if (!fn(k)) return false;
              }
        }
    return true;
  }

  std::vector<VoxelKey> unknown_in_frustum(const Vec3& pose, const SensorGeometry& sensor, int depth = 0) const {
    std::vector<VoxelKey> out;
    for_each_unknown_in_frustum(pose, sensor, depth, [&](const VoxelKey& k) {
      out.push_back(k);
      return true;
    });
    return out;
  }

  /// Calls fn(key, state) for every known voxel in ascending key order.
  template <typename Fn>
  void for_each_known(Fn&& fn) const {
    std::vector<std::pair<VoxelKey, VoxelState>> known;
    known.reserve(known_);
    for (const auto& [ck, c] : chunks_) {
      if (c->known == 0) continue;
      for (int i = 0; i < kCells; ++i) {
        if (c->cells[i] == VoxelState::Unknown) continue;
        known.push_back({VoxelKey{ck.x * kChunkSize + (i >> (2 * kChunkBits)),
                                  ck.y * kChunkSize + ((i >> kChunkBits) & (kChunkSize - 1)),
                                  ck.z * kChunkSize + (i & (kChunkSize - 1))},
                         c->cells[i]});
      }
    }
    std::sort(known.begin(), known.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    for (const auto& [k, s] : known) fn(k, s);
  }

  /// Read cursor caching the last chunk touched. Cheap to create; not shared
  /// between threads.
  class Cursor {
   public:
    explicit Cursor(const OccupancyGrid& g) : g_(g) {}

    VoxelState state(const VoxelKey& k) {
      const Chunk* c = chunk(chunk_key(k));
      return c ? c->cells[cell_index(k)] : VoxelState::Unknown;
    }

    bool block_free(const VoxelKey& block, int depth) {
      if (depth == 0) return state(block) == VoxelState::Free;
      const int shift = kChunkBits - depth;
      const Chunk* c = chunk({block.x >> shift, block.y >> shift, block.z >> shift});
      if (!c) return false;
      const int mask = (1 << shift) - 1;
      return c->free_count[block_slot(block.x & mask, block.y & mask, block.z & mask, depth)] == (1 << (3 * depth));
    }

    bool block_has_unknown(const VoxelKey& block, int depth) {
      if (depth == 0) return state(block) == VoxelState::Unknown;
      const int shift = kChunkBits - depth;
      const Chunk* c = chunk({block.x >> shift, block.y >> shift, block.z >> shift});
      if (!c) return true;
      const int mask = (1 << shift) - 1;
      return c->known_count[block_slot(block.x & mask, block.y & mask, block.z & mask, depth)] < (1 << (3 * depth));
    }

   private:
    friend class OccupancyGrid;
    const Chunk* chunk(const VoxelKey& ck) {
      if (!has_last_ || !(ck == last_key_)) {
        last_ = g_.find_chunk(ck);
        last_key_ = ck;
        has_last_ = true;
      }
      return last_;
    }

    const OccupancyGrid& g_;
    VoxelKey last_key_{};
    const Chunk* last_ = nullptr;
    bool has_last_ = false;
  };

  bool los_free(Cursor& cur, const Vec3& from, const VoxelKey& from_key, const VoxelKey& target) const {
    if (from_key == target) return true;
    const bool unknown_blocks = los_unknown_blocks_;
    return walk_voxels(from, center_of(target), origin_, res_, [&](const VoxelKey& k) {
      if (k == from_key || k == target) return true;
      const VoxelState s = cur.state(k);
      return unknown_blocks ? s == VoxelState::Free : s != VoxelState::Occupied;
    });
  }

  /// Enumerates cell indices (cells of edge `cell`, centers at
  /// origin + (i + 0.5) * cell) whose centers lie within `reach` of [a, b].
  /// Stops and returns false as soon as fn returns false.
  template <typename Fn>
  bool for_each_center_near_segment(const Vec3& a, const Vec3& b, double reach, double cell, Fn&& fn) const {
    const Vec3 d = b - a;
    const double reach2 = reach * reach;
    const double pad = reach + 1e-9 * (1.0 + reach);
    const auto [x0, x1] = detail::center_index_range(std::min(a.x(), b.x()) - pad, std::max(a.x(), b.x()) + pad,
                                                     origin_.x(), cell);
    for (int ix = x0; ix <= x1; ++ix) {
      const double cx = origin_.x() + (ix + 0.5) * cell;
      auto [t0, t1] = detail::slab(a.x(), d.x(), cx - pad, cx + pad);
      t0 = std::max(t0, 0.0);
      t1 = std::min(t1, 1.0);
      if (t0 > t1) continue;
      const double ya = a.y() + t0 * d.y(), yb = a.y() + t1 * d.y();
      const auto [y0, y1] = detail::center_index_range(std::min(ya, yb) - pad, std::max(ya, yb) + pad, origin_.y(), cell);
      for (int iy = y0; iy <= y1; ++iy) {
        const double cy = origin_.y() + (iy + 0.5) * cell;
        auto [u0, u1] = detail::slab(a.y(), d.y(), cy - pad, cy + pad);
        u0 = std::max(u0, t0);
        u1 = std::min(u1, t1);
        if (u0 > u1) continue;
        const double za = a.z() + u0 * d.z(), zb = a.z() + u1 * d.z();
        const auto [z0, z1] =
            detail::center_index_range(std::min(za, zb) - pad, std::max(za, zb) + pad, origin_.z(), cell);
        for (int iz = z0; iz <= z1; ++iz) {
          const Vec3 c(cx, cy, origin_.z() + (iz + 0.5) * cell);
          if (point_segment_distance2(c, a, b) > reach2) continue;
          if (!fn(VoxelKey{ix, iy, iz})) return false;
        }
      }
    }
    return true;
  }

 private:
  const Chunk* find_chunk(const VoxelKey& ck) const {
    auto it = chunks_.find(ck);
    return it == chunks_.end() ? nullptr : it->second.get();
  }

  double res_;
  Vec3 origin_;
  std::unordered_map<VoxelKey, std::unique_ptr<Chunk>, VoxelKeyHash> chunks_;
  std::size_t known_ = 0;
  bool los_unknown_blocks_ = true;
};

// ERRTM1 map snapshot: `ERRTM1`, `res <r>`, `origin <x> <y> <z>`, then one
// `f`/`o` line per known voxel in ascending key order.

inline void dump_map(const OccupancyGrid& map, std::ostream& os) {
  os << "ERRTM1\n";
  os << "res " << format_double(map.resolution()) << "\n";
  os << "origin " << format_double(map.origin().x()) << " " << format_double(map.origin().y()) << " "
     << format_double(map.origin().z()) << "\n";
  map.for_each_known([&](const VoxelKey& k, VoxelState s) {
    os << (s == VoxelState::Free ? 'f' : 'o') << ' ' << k.x << ' ' << k.y << ' ' << k.z << '\n';
  });
}

inline std::string dump_map(const OccupancyGrid& map) {
  std::ostringstream os;
  dump_map(map, os);
  return os.str();
}

namespace detail {

/// Splits a line into whitespace-separated tokens, dropping `#` comments.
inline std::vector<std::string_view> tokenize(std::string_view line) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double token_double(std::string_view tok, int line) {
  double v = 0.0;
  if (!parse_double(tok, v)) throw ParseError("expected a number, got '" + std::string(tok) + "'", line);
  return v;
}

inline int token_int(std::string_view tok, int line) {
  long long v = 0;
  if (!parse_int(tok, v) || v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ParseError("expected an integer, got '" + std::string(tok) + "'", line);
  return static_cast<int>(v);
}

}  // namespace detail

inline OccupancyGrid load_map(std::istream& is) {
  std::string line;
  int lineno = 0;
  bool have_magic = false;
  double res = 0.0;
  std::optional<Vec3> origin;
  std::vector<std::pair<VoxelKey, VoxelState>> voxels;
  while (std::getline(is, line)) {
    ++lineno;
    const auto tok = detail::tokenize(line);
    if (tok.empty()) continue;
    if (!have_magic) {
      if (tok.size() != 1 || tok[0] != "ERRTM1") throw ParseError("missing ERRTM1 header", lineno);
      have_magic = true;
      continue;
    }
    if (tok[0] == "res") {
      if (tok.size() != 2) throw ParseError("res takes one value", lineno);
      res = detail::token_double(tok[1], lineno);
      if (!(res > 0.0)) throw ParseError("res must be positive", lineno);
    } else if (tok[0] == "origin") {
      if (tok.size() != 4) throw ParseError("origin takes three values", lineno);
      origin = Vec3(detail::token_double(tok[1], lineno), detail::token_double(tok[2], lineno),
                    detail::token_double(tok[3], lineno));
    } else if (tok[0] == "f" || tok[0] == "o") {
      if (tok.size() != 4) throw ParseError("voxel line takes three indices", lineno);
      voxels.push_back({{detail::token_int(tok[1], lineno), detail::token_int(tok[2], lineno),
                         detail::token_int(tok[3], lineno)},
                        tok[0] == "f" ? VoxelState::Free : VoxelState::Occupied});
    } else {
      throw ParseError("unknown record '" + std::string(tok[0]) + "'", lineno);
    }
  }
  if (!have_magic) throw ParseError("empty map file", 0);
  if (res <= 0.0) throw ParseError("missing res line", 0);
  if (!origin) throw ParseError("missing origin line", 0);
  OccupancyGrid map(res, *origin);
  for (const auto& [k, s] : voxels) map.set(k, s);
  return map;
}

inline OccupancyGrid load_map_string(const std::string& text) {
  std::istringstream is(text);
  return load_map(is);
}

}  // namespace errt
