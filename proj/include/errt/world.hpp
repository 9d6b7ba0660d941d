#pragma once

#include "errt/voxel_map.hpp"

#include <deque>
#include <fstream>

namespace errt {

/// Dense ground-truth occupancy. Every in-bounds voxel is Free or Occupied;
/// out-of-bounds voxels read as Occupied unless `solid_boundary` is off.
class GroundTruthWorld {
 public:
  GroundTruthWorld() = default;
  GroundTruthWorld(double res, int nx, int ny, int nz, Vec3 origin = Vec3::Zero())
      : res_(res), dims_{nx, ny, nz}, origin_(origin) {
    if (!(res > 0.0) || !std::isfinite(res)) throw Error("world resolution must be positive");
    if (nx < 1 || ny < 1 || nz < 1) throw Error("world dimensions must be positive");
    if (static_cast<long long>(nx) * ny * nz > 200'000'000LL) throw Error("world too large");
    occ_.assign(static_cast<std::size_t>(nx) * ny * nz, 0);
  }

  double resolution() const { return res_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const Vec3& origin() const { return origin_; }
  std::size_t voxel_count() const { return occ_.size(); }

  bool solid_boundary() const { return solid_boundary_; }
  void set_solid_boundary(bool v) { solid_boundary_ = v; }

  bool in_bounds(const VoxelKey& k) const {
    return k.x >= 0 && k.y >= 0 && k.z >= 0 && k.x < dims_[0] && k.y < dims_[1] && k.z < dims_[2];
  }
  std::size_t index(const VoxelKey& k) const {
    return (static_cast<std::size_t>(k.x) * dims_[1] + k.y) * dims_[2] + k.z;
  }
  VoxelKey key_at(std::size_t idx) const {
    const int z = static_cast<int>(idx % dims_[2]);
    idx /= dims_[2];
    return {static_cast<int>(idx / dims_[1]), static_cast<int>(idx % dims_[1]), z};
  }

  bool occupied(const VoxelKey& k) const { return in_bounds(k) ? occ_[index(k)] != 0 : solid_boundary_; }
  void set_occupied(const VoxelKey& k, bool v) {
    if (!in_bounds(k)) throw Error("voxel out of world bounds");
    occ_[index(k)] = v ? 1 : 0;
  }

  VoxelKey key_of(const Vec3& p) const {
    const Vec3 q = (p - origin_) / res_;
    return {detail::floor_to_int(q.x()), detail::floor_to_int(q.y()), detail::floor_to_int(q.z())};
  }
  Vec3 center_of(const VoxelKey& k) const { return origin_ + res_ * Vec3(k.x + 0.5, k.y + 0.5, k.z + 0.5); }
  bool occupied_at(const Vec3& p) const { return occupied(key_of(p)); }

  std::size_t free_count() const {
    return static_cast<std::size_t>(std::count(occ_.begin(), occ_.end(), std::uint8_t{0}));
  }

  /// Distance from p to the nearest Occupied voxel center, searched up to
  /// `limit`; returns +inf when none lies within the limit.
  double clearance(const Vec3& p, double limit) const {
    const int reach = static_cast<int>(std::ceil(limit / res_)) + 1;
    const VoxelKey c = key_of(p);
    double best2 = std::numeric_limits<double>::infinity();
    for (int dx = -reach; dx <= reach; ++dx)
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dz = -reach; dz <= reach; ++dz) {
          const VoxelKey k{c.x + dx, c.y + dy, c.z + dz};
          if (!occupied(k)) continue;
          best2 = std::min(best2, (center_of(k) - p).squaredNorm());
        }
    const double best = std::sqrt(best2);
    return best <= limit ? best : std::numeric_limits<double>::infinity();
  }

  const std::vector<std::uint8_t>& raw() const { return occ_; }

 private:
  double res_ = 1.0;
  std::array<int, 3> dims_{0, 0, 0};
  Vec3 origin_ = Vec3::Zero();
  std::vector<std::uint8_t> occ_;
  bool solid_boundary_ = true;
};

// ERRTW1 world file: `ERRTW1`, `res <r>`, `dims <nx> <ny> <nz>`,
// `origin <x> <y> <z>`, then `occ <ix> <iy> <iz>` per Occupied voxel.

inline void dump_world(const GroundTruthWorld& w, std::ostream& os) {
  os << "ERRTW1\n";
  os << "res " << format_double(w.resolution()) << "\n";
  os << "dims " << w.dims()[0] << " " << w.dims()[1] << " " << w.dims()[2] << "\n";
  os << "origin " << format_double(w.origin().x()) << " " << format_double(w.origin().y()) << " "
     << format_double(w.origin().z()) << "\n";
  const auto& raw = w.raw();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!raw[i]) continue;
    const VoxelKey k = w.key_at(i);
    os << "occ " << k.x << " " << k.y << " " << k.z << "\n";
  }
}

inline std::string dump_world(const GroundTruthWorld& w) {
  std::ostringstream os;
  dump_world(w, os);
  return os.str();
}

inline GroundTruthWorld load_world(std::istream& is) {
  std::string line;
  int lineno = 0;
  bool have_magic = false;
  std::optional<double> res;
  std::optional<std::array<int, 3>> dims;
  std::optional<Vec3> origin;
  std::vector<std::pair<VoxelKey, int>> occ;
  while (std::getline(is, line)) {
    ++lineno;
    const auto tok = detail::tokenize(line);
    if (tok.empty()) continue;
    if (!have_magic) {
      if (tok.size() != 1 || tok[0] != "ERRTW1") throw ParseError("missing ERRTW1 header", lineno);
      have_magic = true;
      continue;
    }
    if (tok[0] == "res") {
      if (tok.size() != 2) throw ParseError("res takes one value", lineno);
      res = detail::token_double(tok[1], lineno);
      if (!(*res > 0.0)) throw ParseError("res must be positive", lineno);
    } else if (tok[0] == "dims") {
      if (tok.size() != 4) throw ParseError("dims takes three values", lineno);
      std::array<int, 3> d{};
      for (int i = 0; i < 3; ++i) {
        d[i] = detail::token_int(tok[i + 1], lineno);
        if (d[i] < 1) throw ParseError("dims must be positive", lineno);
      }
      dims = d;
    } else if (tok[0] == "origin") {
      if (tok.size() != 4) throw ParseError("origin takes three values", lineno);
      origin = Vec3(detail::token_double(tok[1], lineno), detail::token_double(tok[2], lineno),
                    detail::token_double(tok[3], lineno));
    } else if (tok[0] == "occ") {
      if (tok.size() != 4) throw ParseError("occ takes three indices", lineno);
      occ.push_back({{detail::token_int(tok[1], lineno), detail::token_int(tok[2], lineno),
                      detail::token_int(tok[3], lineno)},
                     lineno});
    } else {
      throw ParseError("unknown record '" + std::string(tok[0]) + "'", lineno);
    }
  }
  if (!have_magic) throw ParseError("empty world file", 0);
  if (!res) throw ParseError("missing res line", 0);
  if (!dims) throw ParseError("missing dims line", 0);
  GroundTruthWorld w(*res, (*dims)[0], (*dims)[1], (*dims)[2], origin.value_or(Vec3::Zero()));
  for (const auto& [k, ln] : occ) {
    if (!w.in_bounds(k)) throw ParseError("occ voxel outside dims", ln);
    w.set_occupied(k, true);
  }
  return w;
}

inline GroundTruthWorld load_world_string(const std::string& text) {
  std::istringstream is(text);
  return load_world(is);
}

inline GroundTruthWorld load_world_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::ios_base::failure("cannot open world file: " + path);
  return load_world(f);
}

/// Number of Free voxels 6-connected to `seed` (0 when seed is not Free).
inline std::size_t flood_fill_count(const GroundTruthWorld& w, const VoxelKey& seed, std::vector<std::uint8_t>* mark = nullptr) {
  std::vector<std::uint8_t> local;
  std::vector<std::uint8_t>& seen = mark ? *mark : local;
  seen.assign(w.voxel_count(), 0);
  if (w.occupied(seed)) return 0;
  std::deque<VoxelKey> queue{seed};
  seen[w.index(seed)] = 1;
  std::size_t count = 0;
  static constexpr std::array<std::array<int, 3>, 6> kNbr{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  while (!queue.empty()) {
    const VoxelKey k = queue.front();
    queue.pop_front();
    ++count;
    for (const auto& o : kNbr) {
      const VoxelKey n{k.x + o[0], k.y + o[1], k.z + o[2]};
      if (!w.in_bounds(n) || w.occupied(n)) continue;
      auto& s = seen[w.index(n)];
      if (s) continue;
      s = 1;
      queue.push_back(n);
    }
  }
  return count;
}

/// True when all Free voxels form one 6-connected component.
inline bool free_space_connected(const GroundTruthWorld& w) {
  const auto& raw = w.raw();
  const auto first = std::find(raw.begin(), raw.end(), std::uint8_t{0});
  if (first == raw.end()) return false;
  const VoxelKey seed = w.key_at(static_cast<std::size_t>(first - raw.begin()));
  return flood_fill_count(w, seed) == w.free_count();
}

/// Voxel offsets whose centers lie within `radius` of the origin voxel center.
inline std::vector<VoxelKey> ball_offsets(double radius, double res) {
  std::vector<VoxelKey> out;
  const int n = static_cast<int>(std::floor(radius / res));
  for (int x = -n; x <= n; ++x)
    for (int y = -n; y <= n; ++y)
      for (int z = -n; z <= n; ++z)
        if (res * res * (x * x + y * y + z * z) <= radius * radius) out.push_back({x, y, z});
  return out;
}

/// True when every voxel center within r of the center of `k` is Free.
inline bool voxel_has_clearance(const GroundTruthWorld& w, const VoxelKey& k, const std::vector<VoxelKey>& ball) {
  for (const auto& o : ball)
    if (w.occupied({k.x + o.x, k.y + o.y, k.z + o.z})) return false;
  return true;
}

/// Default start: the Free voxel farthest (6-connected steps) from any
/// Occupied or out-of-bounds voxel; ties go to the lowest index.
inline Vec3 default_start(const GroundTruthWorld& w) {
  std::vector<int> dist(w.voxel_count(), -1);
  std::deque<VoxelKey> queue;
  static constexpr std::array<std::array<int, 3>, 6> kNbr{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  for (std::size_t i = 0; i < w.voxel_count(); ++i) {
    const VoxelKey k = w.key_at(i);
    if (w.occupied(k)) continue;
    bool border = false;
    for (const auto& o : kNbr) border = border || w.occupied({k.x + o[0], k.y + o[1], k.z + o[2]});
    if (border) {
      dist[i] = 1;
      queue.push_back(k);
    }
  }
  std::size_t best = w.voxel_count();
  while (!queue.empty()) {
    const VoxelKey k = queue.front();
    queue.pop_front();
    const int dk = dist[w.index(k)];
    for (const auto& o : kNbr) {
      const VoxelKey n{k.x + o[0], k.y + o[1], k.z + o[2]};
      if (!w.in_bounds(n) || w.occupied(n) || dist[w.index(n)] >= 0) continue;
      dist[w.index(n)] = dk + 1;
      queue.push_back(n);
    }
  }
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist[i] > 0 && (best == w.voxel_count() || dist[i] > dist[best])) best = i;
  if (best == w.voxel_count()) throw Error("world has no free voxel");
  return w.center_of(w.key_at(best));
}

enum class WorldKind { Tunnel, Rooms, Cavern };

inline std::string to_string(WorldKind k) {
  switch (k) {
    case WorldKind::Tunnel: return "tunnel";
    case WorldKind::Rooms: return "rooms";
    case WorldKind::Cavern: return "cavern";
  }
  return "?";
}

inline WorldKind parse_world_kind(std::string_view s) {
  if (s == "tunnel") return WorldKind::Tunnel;
  if (s == "rooms") return WorldKind::Rooms;
  if (s == "cavern") return WorldKind::Cavern;
  throw ConfigError("world_kind", "expected tunnel, rooms or cavern, got '" + std::string(s) + "'");
}

struct WorldGenParams {
  Vec3 size{20.0, 20.0, 3.0};  // meters
  double res = 0.2;
  double r_robot = 0.3;
  // tunnel
  double tunnel_width = 1.6;
  double tunnel_height = 2.0;
  // rooms
  double door_width = 1.2;
  double room_min = 4.0;
  double room_max = 7.0;
  // cavern
  double void_radius_min = 2.0;
  double void_radius_max = 3.5;
  double free_fraction_min = 0.15;
  double free_fraction_max = 0.60;
};

namespace detail {

struct WorldCanvas {
  GroundTruthWorld& w;

  template <typename Pred>
  void carve(const Vec3& lo, const Vec3& hi, Pred&& inside) {
    const VoxelKey a = w.key_of(lo), b = w.key_of(hi);
    for (int x = std::max(0, a.x); x <= std::min(w.dims()[0] - 1, b.x); ++x)
      for (int y = std::max(0, a.y); y <= std::min(w.dims()[1] - 1, b.y); ++y)
        for (int z = std::max(0, a.z); z <= std::min(w.dims()[2] - 1, b.z); ++z) {
          const VoxelKey k{x, y, z};
          if (inside(w.center_of(k))) w.set_occupied(k, false);
        }
  }

  void fill_box(const Vec3& lo, const Vec3& hi, bool occupied) {
    const VoxelKey a = w.key_of(lo), b = w.key_of(hi);
    for (int x = std::max(0, a.x); x <= std::min(w.dims()[0] - 1, b.x); ++x)
      for (int y = std::max(0, a.y); y <= std::min(w.dims()[1] - 1, b.y); ++y)
        for (int z = std::max(0, a.z); z <= std::min(w.dims()[2] - 1, b.z); ++z) w.set_occupied({x, y, z}, occupied);
  }
};

inline GroundTruthWorld blank_world(const WorldGenParams& p, bool solid) {
  const int nx = static_cast<int>(std::lround(p.size.x() / p.res));
  const int ny = static_cast<int>(std::lround(p.size.y() / p.res));
  const int nz = static_cast<int>(std::lround(p.size.z() / p.res));
  GroundTruthWorld w(p.res, nx, ny, nz);
  if (solid)
    for (std::size_t i = 0; i < w.voxel_count(); ++i) w.set_occupied(w.key_at(i), true);
  return w;
}

/// Maze of horizontal tunnels on a jittered lattice; each lattice node has
/// its own floor height so tunnels slope in 3D.
inline GroundTruthWorld gen_tunnel(const WorldGenParams& p, Rng& rng) {
  GroundTruthWorld w = blank_world(p, true);
  WorldCanvas canvas{w};
  const double spacing = std::max(4.0, 2.5 * p.tunnel_width);
  const double margin = 0.5 * p.tunnel_width + p.res;
  const int cols = std::max(1, static_cast<int>(std::floor((p.size.x() - 2 * margin) / spacing)) + 1);
  const int rows = std::max(1, static_cast<int>(std::floor((p.size.y() - 2 * margin) / spacing)) + 1);
  const double zlo = 0.5 * p.tunnel_height + p.res;
  const double zhi = std::max(zlo, p.size.z() - 0.5 * p.tunnel_height - p.res);
  std::vector<Vec3> nodes;
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < rows; ++j) {
      const double jitter = 0.2 * spacing;
      const double x = std::clamp(margin + i * spacing + uniform(rng, -jitter, jitter), margin, p.size.x() - margin);
      const double y = std::clamp(margin + j * spacing + uniform(rng, -jitter, jitter), margin, p.size.y() - margin);
      nodes.emplace_back(x, y, uniform(rng, zlo, zhi));
    }
  // Randomized depth-first spanning tree plus a few loop edges.
  std::vector<std::pair<int, int>> edges;
  std::vector<std::uint8_t> seen(nodes.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  auto neighbours = [&](int n) {
    std::vector<int> out;
    const int i = n / rows, j = n % rows;
    if (i > 0) out.push_back(n - rows);
    if (i + 1 < cols) out.push_back(n + rows);
    if (j > 0) out.push_back(n - 1);
    if (j + 1 < rows) out.push_back(n + 1);
    return out;
  };
  while (!stack.empty()) {
    const int n = stack.back();
    std::vector<int> open;
    for (int m : neighbours(n))
      if (!seen[m]) open.push_back(m);
    if (open.empty()) {
      stack.pop_back();
      continue;
    }
    const int m = open[static_cast<std::size_t>(rng() % open.size())];
    seen[m] = 1;
    edges.emplace_back(n, m);
    stack.push_back(m);
  }
  for (int n = 0; n < static_cast<int>(nodes.size()); ++n)
    for (int m : neighbours(n))
      if (m > n && uniform(rng, 0.0, 1.0) < 0.15) edges.emplace_back(n, m);

  const double hw = 0.5 * p.tunnel_width, hh = 0.5 * p.tunnel_height;
  for (const auto& [a_id, b_id] : edges) {
    const Vec3 a = nodes[a_id], b = nodes[b_id];
    const Vec3 lo = a.cwiseMin(b) - Vec3(hw, hw, hh) - Vec3::Constant(p.res);
    const Vec3 hi = a.cwiseMax(b) + Vec3(hw, hw, hh) + Vec3::Constant(p.res);
    canvas.carve(lo, hi, [&](const Vec3& c) {
      const Eigen::Vector2d a2 = a.head<2>(), d2 = (b - a).head<2>();
      const double dd = d2.squaredNorm();
      const double t = dd > 0 ? std::clamp((c.head<2>() - a2).dot(d2) / dd, 0.0, 1.0) : 0.0;
      const double lateral = (a2 + t * d2 - c.head<2>()).norm();
      const double zc = a.z() + t * (b.z() - a.z());
      return lateral <= hw && std::abs(c.z() - zc) <= hh;
    });
  }
  return w;
}

/// Splits [0, length] into pieces with lengths in [lo, hi] (best effort).
inline std::vector<double> split_lengths(double length, double lo, double hi, Rng& rng) {
  std::vector<double> cuts{0.0};
  double pos = 0.0;
  while (length - pos > hi) {
    double piece = uniform(rng, lo, hi);
    if (length - pos - piece < lo) piece = 0.5 * (length - pos);
    pos += piece;
    cuts.push_back(pos);
  }
  cuts.push_back(length);
  return cuts;
}

/// Rooms on a jittered grid separated by one-voxel walls, joined by doors
/// along a random spanning tree plus extra doors; some rooms get a box of
/// furniture.
inline GroundTruthWorld gen_rooms(const WorldGenParams& p, Rng& rng) {
  GroundTruthWorld w = blank_world(p, false);
  WorldCanvas canvas{w};
  const auto xs = split_lengths(p.size.x(), p.room_min, p.room_max, rng);
  const auto ys = split_lengths(p.size.y(), p.room_min, p.room_max, rng);
  const int cols = static_cast<int>(xs.size()) - 1, rows = static_cast<int>(ys.size()) - 1;
  const double door_h = std::min(p.size.z() - p.res, 2.2);

  // Interior walls, one voxel thick, on the voxel layer starting at each cut.
  for (int i = 1; i < cols; ++i) canvas.fill_box({xs[i], 0, 0}, {xs[i], p.size.y(), p.size.z()}, true);
  for (int j = 1; j < rows; ++j) canvas.fill_box({0, ys[j], 0}, {p.size.x(), ys[j], p.size.z()}, true);

  auto room = [&](int i, int j) { return i * rows + j; };
  std::vector<int> parent(static_cast<std::size_t>(cols * rows));
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };

  struct Wall {
    int a, b;
    bool vertical;  // wall at constant x
    int i, j;
  };
  std::vector<Wall> walls;
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < rows; ++j) {
      if (i + 1 < cols) walls.push_back({room(i, j), room(i + 1, j), true, i + 1, j});
      if (j + 1 < rows) walls.push_back({room(i, j), room(i, j + 1), false, i, j + 1});
    }
  std::shuffle(walls.begin(), walls.end(), rng);
  std::vector<Wall> doors;
  for (const Wall& wl : walls) {
    const int ra = find(wl.a), rb = find(wl.b);
    if (ra != rb) {
      parent[ra] = rb;
      doors.push_back(wl);
    } else if (uniform(rng, 0.0, 1.0) < 0.3) {
      doors.push_back(wl);
    }
  }
  const double half = 0.5 * p.door_width;
  for (const Wall& d : doors) {
    if (d.vertical) {
      const double lo = ys[d.j] + half + 0.6, hi = ys[d.j + 1] - half - 0.6;
      const double c = lo < hi ? uniform(rng, lo, hi) : 0.5 * (ys[d.j] + ys[d.j + 1]);
      canvas.fill_box({xs[d.i], c - half + 0.5 * p.res, 0}, {xs[d.i], c + half - 0.5 * p.res, door_h}, false);
    } else {
      const double lo = xs[d.i] + half + 0.6, hi = xs[d.i + 1] - half - 0.6;
      const double c = lo < hi ? uniform(rng, lo, hi) : 0.5 * (xs[d.i] + xs[d.i + 1]);
      canvas.fill_box({c - half + 0.5 * p.res, ys[d.j], 0}, {c + half - 0.5 * p.res, ys[d.j], door_h}, false);
    }
  }
  // Furniture: a low box near the middle of some rooms.
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < rows; ++j) {
      if (uniform(rng, 0.0, 1.0) >= 0.5) continue;
      const double cx = 0.5 * (xs[i] + xs[i + 1]) + uniform(rng, -0.5, 0.5);
      const double cy = 0.5 * (ys[j] + ys[j + 1]) + uniform(rng, -0.5, 0.5);
      const double hx = uniform(rng, 0.3, 0.7), hy = uniform(rng, 0.3, 0.7);
      canvas.fill_box({cx - hx, cy - hy, 0}, {cx + hx, cy + hy, uniform(rng, 0.6, 1.2)}, true);
    }
  return w;
}

/// Spherical voids joined by tubes, added until the free fraction reaches
/// the middle of the configured band.
inline GroundTruthWorld gen_cavern(const WorldGenParams& p, Rng& rng) {
  GroundTruthWorld w = blank_world(p, true);
  WorldCanvas canvas{w};
  const double target = 0.5 * (p.free_fraction_min + p.free_fraction_max);
  std::vector<std::pair<Vec3, double>> voids;
  auto carve_sphere = [&](const Vec3& c, double r) {
    canvas.carve(c - Vec3::Constant(r), c + Vec3::Constant(r), [&](const Vec3& q) { return (q - c).norm() <= r; });
  };
  auto carve_tube = [&](const Vec3& a, const Vec3& b, double r) {
    canvas.carve(a.cwiseMin(b) - Vec3::Constant(r), a.cwiseMax(b) + Vec3::Constant(r),
                 [&](const Vec3& q) { return point_segment_distance2(q, a, b) <= r * r; });
  };
  const double total = static_cast<double>(w.voxel_count());
  for (int n = 0; n < 200; ++n) {
    const double r = uniform(rng, p.void_radius_min, p.void_radius_max);
    const double zr = std::min(r, 0.5 * p.size.z());
    Vec3 c;
    if (voids.empty()) {
      c = 0.5 * p.size;
    } else {
      c = Vec3(uniform(rng, zr, p.size.x() - zr), uniform(rng, zr, p.size.y() - zr),
               uniform(rng, std::min(zr, 0.5 * p.size.z()), std::max(0.5 * p.size.z(), p.size.z() - zr)));
    }
    carve_sphere(c, r);
    if (!voids.empty()) {
      std::size_t nearest = 0;
      for (std::size_t i = 1; i < voids.size(); ++i)
        if ((voids[i].first - c).norm() < (voids[nearest].first - c).norm()) nearest = i;
      const double tube = std::max(0.6 * std::min(r, voids[nearest].second), 2.0 * p.r_robot + 3.0 * p.res);
      carve_tube(voids[nearest].first, c, tube);
    }
    voids.emplace_back(c, r);
    if (static_cast<double>(w.free_count()) / total >= target) break;
  }
  return w;
}

}  // namespace detail

/// Deterministic procedural world. Free space is verified to be one
/// 6-connected component; failed attempts are regenerated from the same
/// random stream, up to 100 attempts.
inline GroundTruthWorld gen_world(WorldKind kind, std::uint64_t seed, const WorldGenParams& p) {
  if (!(p.res > 0.0)) throw ConfigError("world_res", "resolution must be positive");
  if ((p.size.array() < 3 * p.res).any()) throw ConfigError("world_size", "world must span at least 3 voxels per axis");
  switch (kind) {
    case WorldKind::Tunnel:
      if (p.tunnel_width < 3 * p.res) throw ConfigError("tunnel_width", "must be at least 3 voxels");
      if (p.tunnel_height < 3 * p.res || p.tunnel_height > p.size.z())
        throw ConfigError("tunnel_height", "must be at least 3 voxels and fit the world height");
      break;
    case WorldKind::Rooms:
      if (p.door_width < 2 * p.r_robot + 2 * p.res) throw ConfigError("door_width", "must be at least 2*r_robot + 2*res");
      if (p.room_min < p.door_width + 1.2 || p.room_max < p.room_min)
        throw ConfigError("room_min", "rooms must fit a door and room_max >= room_min");
      break;
    case WorldKind::Cavern:
      if (p.void_radius_min < 2.0 || p.void_radius_max < p.void_radius_min)
        throw ConfigError("void_radius_min", "void radius must be >= 2 m and max >= min");
      if (!(p.free_fraction_min > 0.0 && p.free_fraction_min < p.free_fraction_max && p.free_fraction_max < 1.0))
        throw ConfigError("free_fraction_min", "free fraction band must satisfy 0 < min < max < 1");
      break;
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    GroundTruthWorld w = kind == WorldKind::Tunnel  ? detail::gen_tunnel(p, rng)
                         : kind == WorldKind::Rooms ? detail::gen_rooms(p, rng)
                                                    : detail::gen_cavern(p, rng);
    if (!free_space_connected(w)) continue;
    if (kind == WorldKind::Cavern) {
      const double frac = static_cast<double>(w.free_count()) / static_cast<double>(w.voxel_count());
      if (frac < p.free_fraction_min || frac > p.free_fraction_max) continue;
    }
    return w;
  }
  throw Error("could not generate a connected " + to_string(kind) + " world in 100 attempts");
}

struct BeamPattern {
  int n_elev = 32;
  int n_azim = 360;
  double vertical_fov = deg2rad(45.0);

  void validate() const {
    if (n_elev < 1) throw ConfigError("lidar_beams", "must be >= 1");
    if (n_azim < 1) throw ConfigError("lidar_azimuth", "must be >= 1");
    if (!(vertical_fov >= 0.0 && vertical_fov <= std::numbers::pi)) throw ConfigError("lidar_fov_deg", "must be in [0, 180]");
  }
};

struct ScanRay {
  Vec3 endpoint;
  bool hit = false;
};

/// Noise-free LiDAR sweep against ground truth. Rays stop at the face of the
/// first Occupied voxel (the endpoint is nudged just inside it so that it
/// lands in that voxel) or at the mapping range.
inline std::vector<ScanRay> simulate_scan(const Vec3& pose, const BeamPattern& pattern, const SensorGeometry& sensor,
                                          const GroundTruthWorld& world) {
  if (world.occupied_at(pose)) throw Error("scan pose lies inside occupied ground truth");
  const double res = world.resolution();
  const double range = sensor.map_range;
  std::vector<ScanRay> out;
  out.reserve(static_cast<std::size_t>(pattern.n_elev) * pattern.n_azim);
  for (int ie = 0; ie < pattern.n_elev; ++ie) {
    const double elev = pattern.n_elev == 1 ? 0.0
                                            : -0.5 * pattern.vertical_fov + pattern.vertical_fov * ie / (pattern.n_elev - 1);
    for (int ia = 0; ia < pattern.n_azim; ++ia) {
      const double azim = 2.0 * std::numbers::pi * ia / pattern.n_azim;
      const Vec3 dir(std::cos(elev) * std::cos(azim), std::cos(elev) * std::sin(azim), std::sin(elev));
      const Vec3 far = pose + range * dir;
      std::optional<VoxelKey> hit;
      walk_voxels(pose, far, world.origin(), res, [&](const VoxelKey& k) {
        if (world.occupied(k)) {
          hit = k;
          return false;
        }
        return true;
      });
      if (!hit) {
        out.push_back({far, false});
        continue;
      }
      const Vec3 lo = world.center_of(*hit) - Vec3::Constant(0.5 * res);
      double entry = 0.0;
      for (int i = 0; i < 3; ++i) {
        if (dir[i] > 0.0) entry = std::max(entry, (lo[i] - pose[i]) / dir[i]);
        if (dir[i] < 0.0) entry = std::max(entry, (lo[i] + res - pose[i]) / dir[i]);
      }
      Vec3 end = pose + (entry + 1e-6 * res) * dir;
      for (int tries = 0; tries < 8 && !(world.key_of(end) == *hit); ++tries) end += 1e-4 * res * dir;
      out.push_back({end, true});
    }
  }
  return out;
}

}  // namespace errt
