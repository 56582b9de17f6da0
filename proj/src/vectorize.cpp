#include "campseg/vectorize.hpp"

#include <algorithm>
#include <cmath>

#include "campseg/error.hpp"

namespace campseg {

double signed_area(const Ring& ring) {
  if (ring.empty()) return 0.0;
  // Relative to the first vertex: projected coordinates are large and the raw
  // cross products would cancel.
  const Point o = ring.front();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    s += (ring[i].x - o.x) * (ring[i + 1].y - o.y) - (ring[i + 1].x - o.x) * (ring[i].y - o.y);
  return 0.5 * s;
}

namespace {

// Directions in the pixel frame (x right, y down). Foreground is kept on the
// right of every boundary edge, so a right turn is d + 1.
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

struct VertexGrid {
  int w = 0, h = 0;  // vertex grid is (w + 1) x (h + 1)
  std::vector<std::uint8_t> out;  // bitmask of unused outgoing edges

  std::uint8_t& at(int x, int y) { return out[static_cast<std::size_t>(y) * (w + 1) + x]; }
};

struct Component {
  int first_row = 0, first_col = 0;
  std::int64_t pixels = 0;
  std::vector<std::vector<std::pair<int, int>>> holes;
  std::vector<std::pair<int, int>> outer;
};

std::vector<std::int32_t> label_components(const RasterGrid& mask, std::vector<Component>& comps) {
  const int w = mask.width(), h = mask.height();
  const auto px = mask.samples<std::uint8_t>();
  std::vector<std::int32_t> label(px.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < px.size(); ++start) {
    if (!px[start] || label[start] >= 0) continue;
    const auto id = static_cast<std::int32_t>(comps.size());
    comps.push_back({static_cast<int>(start / w), static_cast<int>(start % w), 0, {}, {}});
    label[start] = id;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++comps[id].pixels;
      const int r = static_cast<int>(i / w), c = static_cast<int>(i % w);
      for (int d = 0; d < 4; ++d) {
        const int rr = r + kDy[d], cc = c + kDx[d];
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const std::size_t j = static_cast<std::size_t>(rr) * w + cc;
        if (px[j] && label[j] < 0) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  return label;
}

VertexGrid boundary_edges(const RasterGrid& mask) {
  const int w = mask.width(), h = mask.height();
  const auto px = mask.samples<std::uint8_t>();
  auto fg = [&](int r, int c) { return r >= 0 && r < h && c >= 0 && c < w && px[static_cast<std::size_t>(r) * w + c]; };
  VertexGrid g{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w + 1) * (h + 1), 0)};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!fg(r, c)) continue;
      if (!fg(r - 1, c)) g.at(c, r) |= 1 << 0;
      if (!fg(r, c + 1)) g.at(c + 1, r) |= 1 << 1;
      if (!fg(r + 1, c)) g.at(c + 1, r + 1) |= 1 << 2;
      if (!fg(r, c - 1)) g.at(c, r + 1) |= 1 << 3;
    }
  return g;
}

// Follows unused edges from (x, y) heading `dir` until the ring closes, keeping
// only corners. Prefers the right turn, which separates diagonal foreground.
std::vector<std::pair<int, int>> trace_ring(VertexGrid& g, int x, int y, int dir) {
  std::vector<std::pair<int, int>> corners;
  const int sx = x, sy = y, sdir = dir;
  int prev = -1;
  do {
    if (dir != prev) corners.emplace_back(x, y);
    g.at(x, y) &= static_cast<std::uint8_t>(~(1 << dir));
    x += kDx[dir];
    y += kDy[dir];
    prev = dir;
    const bool at_start = x == sx && y == sy;
    const std::uint8_t avail = g.at(x, y) | (at_start ? 1 << sdir : 0);
    int next = -1;
    for (int turn : {1, 0, 3})
      if (avail & (1 << ((dir + turn) % 4))) {
        next = (dir + turn) % 4;
        break;
      }
    if (next < 0) fail(ErrorCode::DegenerateRing, "open boundary while tracing");
    if (at_start && next == sdir) break;
    dir = next;
  } while (true);
  // The start is a corner unless the ring arrives heading the same way.
  if (prev == sdir && corners.size() > 1) corners.erase(corners.begin());
  corners.push_back(corners.front());
  return corners;
}

Ring to_world(const std::vector<std::pair<int, int>>& pts, const GeoTransform& gt, bool outer) {
  Ring ring;
  ring.reserve(pts.size());
  for (const auto& [x, y] : pts) {
    const auto [wx, wy] = gt.world(x, y);
    ring.push_back({wx, wy});
  }
  const double a = signed_area(ring);
  if ((outer && a > 0) || (!outer && a < 0)) std::reverse(ring.begin(), ring.end());
  return ring;
}

}  // namespace

std::vector<PolygonFeature> trace_polygons(const RasterGrid& mask, const GeoTransform& gt) {
  if (mask.bands() != 1) fail(ErrorCode::ShapeMismatch, "vectorize expects a single-band mask");
  if (mask.sample_type() != SampleType::UInt8) fail(ErrorCode::NonBinaryInput, "vectorize expects a uint8 mask");
  for (auto v : mask.samples<std::uint8_t>())
    if (v != 0 && v != 255) fail(ErrorCode::NonBinaryInput, "mask values must be 0 or 255");

  std::vector<Component> comps;
  const auto label = label_components(mask, comps);
  VertexGrid g = boundary_edges(mask);

  for (auto& comp : comps) comp.outer = trace_ring(g, comp.first_col, comp.first_row, 0);

  // What is left are hole rings; the pixel on the right of the first edge
  // names the owning component.
  const int w = mask.width();
  for (int y = 0; y <= mask.height(); ++y)
    for (int x = 0; x <= w; ++x)
      while (g.at(x, y)) {
        int dir = 0;
        while (!(g.at(x, y) & (1 << dir))) ++dir;
        static constexpr int kRightDr[4] = {0, 0, -1, -1};
        static constexpr int kRightDc[4] = {0, -1, -1, 0};
        const std::size_t p = static_cast<std::size_t>(y + kRightDr[dir]) * w + (x + kRightDc[dir]);
        comps[label[p]].holes.push_back(trace_ring(g, x, y, dir));
      }

  const double px_area = std::abs(gt.pixel_width * gt.pixel_height - gt.row_rotation * gt.col_rotation);
  std::vector<PolygonFeature> out;
  out.reserve(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    PolygonFeature f;
    f.id = static_cast<std::int64_t>(i + 1);
    f.pixel_count = comps[i].pixels;
    f.outer = to_world(comps[i].outer, gt, true);
    for (const auto& h : comps[i].holes) f.holes.push_back(to_world(h, gt, false));
    f.area = static_cast<double>(f.pixel_count) * px_area;
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

void douglas_peucker(const Ring& pts, std::size_t lo, std::size_t hi, double tol, std::vector<bool>& keep) {
  if (hi <= lo + 1) return;
  double best = -1.0;
  std::size_t idx = lo;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    const double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
    if (d > best) {
      best = d;
      idx = i;
    }
  }
  if (best <= tol) return;
  keep[idx] = true;
  douglas_peucker(pts, lo, idx, tol, keep);
  douglas_peucker(pts, idx, hi, tol, keep);
}

// The closed ring is split at the vertex farthest from the start so both
// halves have distinct endpoints.
Ring simplify_ring(const Ring& ring, double tol) {
  const std::size_t n = ring.size();
  if (n < 4) return ring;
  std::size_t far = 1;
  double best = -1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = std::hypot(ring[i].x - ring[0].x, ring[i].y - ring[0].y);
    if (d > best) {
      best = d;
      far = i;
    }
  }
  std::vector<bool> keep(n, false);
  keep[0] = keep[far] = keep[n - 1] = true;
  douglas_peucker(ring, 0, far, tol, keep);
  douglas_peucker(ring, far, n - 1, tol, keep);
  Ring out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(ring[i]);
  return out;
}

}  // namespace

SimplifyResult simplify(const PolygonFeature& feature, double tolerance) {
  if (!(tolerance >= 0.0)) fail(ErrorCode::ConfigInvalid, "simplify tolerance must be >= 0");
  if (tolerance == 0.0) return {feature, false};
  PolygonFeature f = feature;
  auto ok = [](const Ring& before, const Ring& after) {
    return after.size() >= 4 && (signed_area(after) < 0) == (signed_area(before) < 0) && signed_area(after) != 0.0;
  };
  f.outer = simplify_ring(feature.outer, tolerance);
  if (!ok(feature.outer, f.outer)) return {feature, true};
  for (std::size_t i = 0; i < f.holes.size(); ++i) {
    f.holes[i] = simplify_ring(feature.holes[i], tolerance);
    if (!ok(feature.holes[i], f.holes[i])) return {feature, true};
  }
  f.area = -signed_area(f.outer);
  for (const auto& h : f.holes) f.area -= signed_area(h);
  return {std::move(f), false};
}

}  // namespace campseg
