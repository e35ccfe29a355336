#include "ntg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "ntg/binary_io.hpp"
#include "ntg/graph_io.hpp"
#include "ntg/graph_ops.hpp"

namespace ntg {

double LikelihoodRaster::sample(Vec2 p) const {
  auto [c, r] = to_pixel(p);
  if (!std::isfinite(c) || !std::isfinite(r)) return 0.0;
  if (c < -1.0 || r < -1.0 || c > width || r > height) return 0.0;
  double c0 = std::floor(c), r0 = std::floor(r);
  double fc = c - c0, fr = r - r0;
  auto v = [&](double cc, double rr) -> double {
    auto ci = static_cast<std::int64_t>(cc), ri = static_cast<std::int64_t>(rr);
    return inside(ci, ri) ? at(ci, ri) : 0.0;
  };
  return (1 - fc) * (1 - fr) * v(c0, r0) + fc * (1 - fr) * v(c0 + 1, r0) +
         (1 - fc) * fr * v(c0, r0 + 1) + fc * fr * v(c0 + 1, r0 + 1);
}

BBox LikelihoodRaster::extent() const {
  double h = resolution / 2;
  return {origin_x - h, origin_y - (height - 0.5) * resolution, origin_x + (width - 0.5) * resolution,
          origin_y + h};
}

void validate_raster(const LikelihoodRaster &r) {
  if (r.width == 0 || r.height == 0) throw DataError("raster: empty size");
  if (!(r.resolution > 0.0) || !std::isfinite(r.resolution))
    throw DataError("raster: resolution must be positive");
  if (!std::isfinite(r.origin_x) || !std::isfinite(r.origin_y))
    throw DataError("raster: non-finite origin");
  if (r.values.size() != static_cast<std::size_t>(r.width) * r.height)
    throw DataError("raster: value count does not match size");
  for (float v : r.values)
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("raster: value outside [0, 1]");
}

std::string raster_bytes(const LikelihoodRaster &r) {
  validate_raster(r);
  std::string out = "NTGR";
  binio::put<std::uint32_t>(out, kRasterVersion);
  binio::put<std::uint32_t>(out, r.width);
  binio::put<std::uint32_t>(out, r.height);
  binio::put<double>(out, r.origin_x);
  binio::put<double>(out, r.origin_y);
  binio::put<double>(out, r.resolution);
  out.reserve(out.size() + r.values.size() * 4);
  for (float v : r.values) binio::put<float>(out, v);
  return out;
}

LikelihoodRaster raster_from_bytes(const std::string &bytes) {
  binio::Reader in(bytes, "raster");
  if (in.bytes(4) != "NTGR") throw DataError("raster: bad magic");
  auto version = in.get<std::uint32_t>();
  if (version != kRasterVersion) throw DataError("raster: unsupported version " + std::to_string(version));
  LikelihoodRaster r;
  r.width = in.get<std::uint32_t>();
  r.height = in.get<std::uint32_t>();
  r.origin_x = in.get<double>();
  r.origin_y = in.get<double>();
  r.resolution = in.get<double>();
  if (r.width == 0 || r.height == 0) throw DataError("raster: empty size");
  std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  if (in.remaining() < n * 4) throw DataError("raster: truncated payload");
  r.values.resize(n);
  for (auto &v : r.values) v = in.get<float>();
  if (in.remaining() != 0) throw DataError("raster: trailing bytes");
  validate_raster(r);
  return r;
}

void save_raster(const LikelihoodRaster &r, const std::filesystem::path &path) {
  write_text_file(path, raster_bytes(r));
}

LikelihoodRaster load_raster(const std::filesystem::path &path) {
  return raster_from_bytes(read_text_file(path));
}

LikelihoodRaster render_likelihood(const RoadGraph &g, const BBox &bbox, double resolution,
                                   double road_halfwidth, std::optional<std::uint64_t> noise_seed,
                                   double noise_sigma) {
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be positive");
  if (!(road_halfwidth > 0.0)) throw std::invalid_argument("road half-width must be positive");
  if (bbox.empty()) throw std::invalid_argument("empty raster bbox");
  LikelihoodRaster r;
  r.resolution = resolution;
  r.width = static_cast<std::uint32_t>(std::max(1.0, std::ceil(bbox.width() / resolution - 1e-9)));
  r.height = static_cast<std::uint32_t>(std::max(1.0, std::ceil(bbox.height() / resolution - 1e-9)));
  r.origin_x = bbox.min_x + resolution / 2;
  r.origin_y = bbox.max_y - resolution / 2;
  std::vector<double> v(static_cast<std::size_t>(r.width) * r.height, 0.0);
  for (const auto &e : g.edges()) {
    Vec2 a = g.position(e.a), b = g.position(e.b);
    auto [ca, ra] = r.to_pixel(a);
    auto [cb, rb] = r.to_pixel(b);
    double pad = road_halfwidth / resolution + 1;
    auto c0 = static_cast<std::int64_t>(std::floor(std::min(ca, cb) - pad));
    auto c1 = static_cast<std::int64_t>(std::ceil(std::max(ca, cb) + pad));
    auto r0 = static_cast<std::int64_t>(std::floor(std::min(ra, rb) - pad));
    auto r1 = static_cast<std::int64_t>(std::ceil(std::max(ra, rb) + pad));
    c0 = std::max<std::int64_t>(c0, 0);
    r0 = std::max<std::int64_t>(r0, 0);
    c1 = std::min<std::int64_t>(c1, r.width - 1);
    r1 = std::min<std::int64_t>(r1, r.height - 1);
    for (std::int64_t row = r0; row <= r1; ++row) {
      for (std::int64_t col = c0; col <= c1; ++col) {
        double d = point_segment_distance(r.pixel_center(col, row), a, b);
        double val = std::clamp(1.0 - d / road_halfwidth, 0.0, 1.0);
        auto &cell = v[static_cast<std::size_t>(row) * r.width + col];
        cell = std::max(cell, val);
      }
    }
  }
  if (noise_seed) {
    std::mt19937_64 rng(*noise_seed);
    std::normal_distribution<double> n(0.0, noise_sigma);
    for (auto &x : v) x = std::clamp(x + n(rng), 0.0, 1.0);
  }
  r.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r.values[i] = static_cast<float>(v[i]);
  return r;
}

std::vector<std::uint8_t> zhang_suen_thin(std::vector<std::uint8_t> m, std::uint32_t w,
                                          std::uint32_t h) {
  auto px = [&](std::int64_t x, std::int64_t y) -> int {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return m[static_cast<std::size_t>(y) * w + x] ? 1 : 0;
  };
  std::vector<std::size_t> remove;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      remove.clear();
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          if (!px(x, y)) continue;
          // P2..P9 clockwise from north
          int p[8] = {px(x, y - 1), px(x + 1, y - 1), px(x + 1, y),     px(x + 1, y + 1),
                      px(x, y + 1), px(x - 1, y + 1), px(x - 1, y),     px(x - 1, y - 1)};
          int b = std::accumulate(p, p + 8, 0);
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int i = 0; i < 8; ++i)
            if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
          if (a != 1) continue;
          if (pass == 0) {
            if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
          } else {
            if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
          }
          remove.push_back(static_cast<std::size_t>(y) * w + x);
        }
      }
      for (auto i : remove) m[i] = 0;
      if (!remove.empty()) changed = true;
    }
  }
  return m;
}

namespace {

struct PixelGraph {
  std::uint32_t w = 0, h = 0;
  std::vector<std::uint8_t> on;
  std::vector<std::vector<std::size_t>> adj;
};

PixelGraph pixel_graph(const std::vector<std::uint8_t> &skel, std::uint32_t w, std::uint32_t h) {
  PixelGraph pg{w, h, skel, std::vector<std::vector<std::size_t>>(skel.size())};
  auto on = [&](std::int64_t x, std::int64_t y) {
    return x >= 0 && y >= 0 && x < w && y < h && skel[static_cast<std::size_t>(y) * w + x];
  };
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      if (!on(x, y)) continue;
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || !on(x + dx, y + dy)) continue;
          // a diagonal step is redundant when a 4-connected detour exists
          if (dx != 0 && dy != 0 && (on(x + dx, y) || on(x, y + dy))) continue;
          pg.adj[i].push_back(static_cast<std::size_t>(y + dy) * w + (x + dx));
        }
      }
    }
  }
  return pg;
}

struct Chain {
  std::size_t a, b;                  // cluster ids
  std::vector<std::size_t> interior;  // pixel indices from a to b
};

}  // namespace

LikelihoodRaster box_filter(const LikelihoodRaster &r, int radius) {
  validate_raster(r);
  if (radius < 0) throw std::invalid_argument("negative filter radius");
  if (radius == 0) return r;
  const long w = r.width, h = r.height;
  // summed-area table
  std::vector<double> sat(static_cast<std::size_t>((w + 1) * (h + 1)), 0.0);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      sat[(y + 1) * (w + 1) + x + 1] = r.values[y * w + x] + sat[y * (w + 1) + x + 1] + sat[(y + 1) * (w + 1) + x] -
                                       sat[y * (w + 1) + x];
  LikelihoodRaster out = r;
  for (long y = 0; y < h; ++y) {
    long y0 = std::max(0L, y - radius), y1 = std::min(h, y + radius + 1);
    for (long x = 0; x < w; ++x) {
      long x0 = std::max(0L, x - radius), x1 = std::min(w, x + radius + 1);
      double s = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
      out.values[y * w + x] = std::clamp(static_cast<float>(s / static_cast<double>((y1 - y0) * (x1 - x0))), 0.0f, 1.0f);
    }
  }
  return out;
}

RoadGraph graph_from_raster(const LikelihoodRaster &r, const SkeletonOptions &opt) {
  validate_raster(r);
  if (!(opt.threshold > 0.0 && opt.threshold < 1.0)) throw std::invalid_argument("threshold must be in (0, 1)");
  if (opt.smooth_radius > 0) {
    SkeletonOptions plain = opt;
    plain.smooth_radius = 0;
    return graph_from_raster(box_filter(r, opt.smooth_radius), plain);
  }
  const std::uint32_t w = r.width, h = r.height;
  std::vector<std::uint8_t> mask(r.values.size());
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = r.values[i] >= opt.threshold;
    any = any || mask[i];
  }
  if (!any) throw DataError("raster: nothing above threshold");
  PixelGraph pg = pixel_graph(zhang_suen_thin(std::move(mask), w, h), w, h);

  // Key pixels (degree != 2); adjacent junction pixels form one cluster.
  const std::size_t N = pg.on.size();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> cluster(N, kNone);
  std::vector<std::vector<std::size_t>> members;
  auto is_key = [&](std::size_t i) { return pg.on[i] && pg.adj[i].size() != 2; };
  for (std::size_t i = 0; i < N; ++i) {
    if (!is_key(i) || cluster[i] != kNone) continue;
    std::size_t id = members.size();
    members.push_back({});
    std::vector<std::size_t> stack{i};
    cluster[i] = id;
    while (!stack.empty()) {
      std::size_t c = stack.back();
      stack.pop_back();
      members[id].push_back(c);
      if (pg.adj[c].size() < 3) continue;
      for (std::size_t n : pg.adj[c]) {
        if (cluster[n] == kNone && pg.adj[n].size() >= 3) {
          cluster[n] = id;
          stack.push_back(n);
        }
      }
    }
  }

  // Trace chains between clusters.
  std::set<std::pair<std::size_t, std::size_t>> used;
  auto mark = [&](std::size_t a, std::size_t b) { used.insert({std::min(a, b), std::max(a, b)}); };
  auto is_used = [&](std::size_t a, std::size_t b) { return used.contains({std::min(a, b), std::max(a, b)}); };
  std::vector<Chain> chains;
  auto trace = [&](std::size_t start, std::size_t first) {
    Chain ch{cluster[start], kNone, {}};
    std::size_t prev = start, cur = first;
    mark(prev, cur);
    while (cluster[cur] == kNone) {
      ch.interior.push_back(cur);
      std::size_t next = kNone;
      for (std::size_t n : pg.adj[cur])
        if (n != prev && !is_used(cur, n)) {
          next = n;
          break;
        }
      if (next == kNone) break;  // closed back onto itself
      mark(cur, next);
      prev = cur;
      cur = next;
    }
    ch.b = cluster[cur] != kNone ? cluster[cur] : kNone;
    return ch;
  };
  for (std::size_t c = 0; c < members.size(); ++c) {
    for (std::size_t p : members[c]) {
      for (std::size_t n : pg.adj[p]) {
        if (cluster[n] == c || is_used(p, n)) continue;
        Chain ch = trace(p, n);
        if (ch.b != kNone) chains.push_back(std::move(ch));
      }
    }
  }
  // Loops without any key pixel.
  for (std::size_t i = 0; i < N; ++i) {
    if (!pg.on[i] || cluster[i] != kNone) continue;
    bool fresh = std::none_of(pg.adj[i].begin(), pg.adj[i].end(), [&](std::size_t n) { return is_used(i, n); });
    if (!fresh) continue;
    cluster[i] = members.size();
    members.push_back({i});
    Chain ch = trace(i, pg.adj[i][0]);
    if (ch.b == kNone) ch.b = cluster[i];
    chains.push_back(std::move(ch));
  }

  // Prune short spurs hanging off junctions.
  std::vector<std::size_t> cdeg(members.size(), 0);
  for (const auto &ch : chains) {
    ++cdeg[ch.a];
    ++cdeg[ch.b];
  }
  std::vector<Chain> kept;
  for (const auto &ch : chains) {
    bool a_end = cdeg[ch.a] == 1, b_end = cdeg[ch.b] == 1;
    bool spur = (a_end != b_end) && static_cast<int>(ch.interior.size()) + 1 < opt.min_spur_px;
    if (!spur) kept.push_back(ch);
  }
  std::vector<bool> alive(members.size(), false);
  for (const auto &ch : kept) alive[ch.a] = alive[ch.b] = true;

  RoadGraph g;
  std::vector<NodeId> cnode(members.size(), -1);
  auto pixel_pos = [&](std::size_t i) {
    return r.pixel_center(static_cast<double>(i % w), static_cast<double>(i / w));
  };
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (!alive[c] && !(kept.empty() && c == 0)) continue;
    Vec2 s{0, 0};
    for (std::size_t p : members[c]) s = s + pixel_pos(p);
    cnode[c] = g.add_node(s * (1.0 / static_cast<double>(members[c].size())));
  }
  for (const auto &ch : kept) {
    if (ch.a == ch.b && ch.interior.size() < 2) continue;
    NodeId prev = cnode[ch.a];
    for (std::size_t p : ch.interior) {
      NodeId id = g.add_node(pixel_pos(p));
      g.add_edge(prev, id);
      prev = id;
    }
    if (prev != cnode[ch.b]) g.add_edge(prev, cnode[ch.b]);
  }
  // Junction centroids can sit within the merge tolerance of a chain pixel.
  bool merged = true;
  while (merged) {
    merged = false;
    for (const auto &e : g.edges()) {
      if (g.edge_length(e.a, e.b) >= kMergeTolerance) continue;
      for (NodeId n : std::set<NodeId>(g.neighbors(e.b)))
        if (n != e.a) g.add_edge(e.a, n);
      g.remove_node(e.b);
      merged = true;
      break;
    }
  }
  return renumbered(rdp_simplify(g, r.resolution));
}

}  // namespace ntg
