#include "mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "error.hpp"

namespace phononet {

namespace {

// Orientation and in-circle predicates with a long-double second pass when the
// double result falls inside its forward error bound.
double orient2d(Vec2 a, Vec2 b, Vec2 c) {
  const double l = (a.x - c.x) * (b.y - c.y);
  const double r = (a.y - c.y) * (b.x - c.x);
  const double det = l - r;
  if (std::abs(det) >= 3.3306690738754716e-16 * (std::abs(l) + std::abs(r))) return det;
  const long double L = (static_cast<long double>(a.x) - c.x) * (static_cast<long double>(b.y) - c.y);
  const long double R = (static_cast<long double>(a.y) - c.y) * (static_cast<long double>(b.x) - c.x);
  return static_cast<double>(L - R);
}

double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdx * cdy - bdy * cdx) + blift * (cdx * ady - cdy * adx) +
                     clift * (adx * bdy - ady * bdx);
  const double perm = alift * (std::abs(bdx * cdy) + std::abs(bdy * cdx)) +
                      blift * (std::abs(cdx * ady) + std::abs(cdy * adx)) +
                      clift * (std::abs(adx * bdy) + std::abs(ady * bdx));
  if (std::abs(det) >= 1.1102230246251577e-15 * perm) return det;
  using LD = long double;
  const LD Adx = LD(a.x) - d.x, Ady = LD(a.y) - d.y;
  const LD Bdx = LD(b.x) - d.x, Bdy = LD(b.y) - d.y;
  const LD Cdx = LD(c.x) - d.x, Cdy = LD(c.y) - d.y;
  const LD det2 = (Adx * Adx + Ady * Ady) * (Bdx * Cdy - Bdy * Cdx) +
                  (Bdx * Bdx + Bdy * Bdy) * (Cdx * Ady - Cdy * Adx) +
                  (Cdx * Cdx + Cdy * Cdy) * (Adx * Bdy - Ady * Bdx);
  return static_cast<double>(det2);
}

Vec2 circumcenter(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ba = b - a, ca = c - a;
  const double bl = dot(ba, ba), cl = dot(ca, ca);
  const double d = 2.0 * cross(ba, ca);
  return a + Vec2{(ca.y * bl - ba.y * cl) / d, (ba.x * cl - ca.x * bl) / d};
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

std::string where_um(Vec2 p_scaled, double scale) {
  std::ostringstream os;
  os << "(" << std::setprecision(9) << p_scaled.x * scale / kMicron << ", "
     << p_scaled.y * scale / kMicron << ") um";
  return os.str();
}

struct Tri {
  std::array<int, 3> v{};
  std::array<int, 3> nb{-1, -1, -1};  // neighbour across the edge opposite v[i]
  bool alive = true;
  bool inside = false;
};

struct Seg {
  int a = 0, b = 0;
  int tag = -1;
  int partner = -1;
  bool reversed = false;
  bool alive = true;
  bool constrained = false;
};

struct InputSegment {
  int a, b, tag;
};

// Constrained Delaunay triangulation with Ruppert refinement. Works in
// coordinates normalized by the target edge length.
class Refiner {
 public:
  Refiner(double min_angle_deg, std::size_t max_vertices, double scale)
      : sin_min_(std::sin(min_angle_deg * kPi / 180.0)), max_vertices_(max_vertices),
        scale_(scale) {}

  void build(const std::vector<Vec2>& pts, const std::vector<Seg>& segs) {
    make_super(pts);
    int hint = 0;
    for (const Vec2& p : pts) {
      const int t = locate(p, hint);
      for (int v : T_[t].v)
        if (norm(P_[v] - p) < 1e-12) fail(ErrorKind::Mesh, "duplicate input vertex at " + where_um(p, scale_));
      insert_vertex(p, {t}, -1);
      hint = vtri_.back();
    }
    S_ = segs;
    recover_segments();
    classify();
  }

  void refine() {
    for (std::size_t s = 0; s < S_.size(); ++s) seg_queue_.push_back(static_cast<int>(s));
    for (std::size_t t = 0; t < T_.size(); ++t) tri_queue_.push_back(static_cast<int>(t));
    std::size_t guard = 0;
    while (true) {
      while (!seg_queue_.empty()) {
        const int s = seg_queue_.front();
        seg_queue_.pop_front();
        if (S_[s].alive && encroached(s)) split_pair(s);
      }
      if (tri_queue_.empty()) break;
      const int t = tri_queue_.front();
      tri_queue_.pop_front();
      if (!T_[t].alive || !T_[t].inside || !is_bad(t)) continue;
      if (++guard > 50 * max_vertices_) fail(ErrorKind::Mesh, "refinement did not terminate");
      split_triangle(t);
    }
  }

  // Accessors used to extract the final mesh.
  const std::vector<Vec2>& points() const { return P_; }
  const std::vector<Tri>& triangles() const { return T_; }
  const std::vector<Seg>& segments() const { return S_; }
  int super_vertex_count() const { return 3; }

 private:
  // ---- basic topology -----------------------------------------------------
  int new_tri(int a, int b, int c) {
    Tri t;
    t.v = {a, b, c};
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      T_[id] = t;
      return id;
    }
    T_.push_back(t);
    return static_cast<int>(T_.size()) - 1;
  }

  void make_super(const std::vector<Vec2>& pts) {
    Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec2 hi{-lo.x, -lo.y};
    for (const Vec2& p : pts) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const Vec2 c = (lo + hi) * 0.5;
    const double r = 50.0 * std::max(hi.x - lo.x, hi.y - lo.y) + 10.0;
    P_ = {c + Vec2{-r, -r}, c + Vec2{r, -r}, c + Vec2{0, r}};
    vtri_ = {0, 0, 0};
    T_.clear();
    new_tri(0, 1, 2);
  }

  bool is_super(int v) const { return v < 3; }

  int local_index(int t, int v) const {
    for (int i = 0; i < 3; ++i)
      if (T_[t].v[i] == v) return i;
    return -1;
  }

  // Triangle and local edge index holding the edge (a, b), or {-1, -1}.
  std::pair<int, int> find_edge(int a, int b) const {
    const int start = vtri_[a];
    int t = start;
    for (int guard = 0; guard < 1000; ++guard) {
      const int i = local_index(t, a);
      for (int e = 0; e < 3; ++e) {
        if (e == i) continue;
        const int u = T_[t].v[(e + 1) % 3], w = T_[t].v[(e + 2) % 3];
        if ((u == a && w == b) || (u == b && w == a)) return {t, e};
      }
      t = T_[t].nb[(i + 1) % 3];
      if (t < 0 || t == start) break;
    }
    return {-1, -1};
  }

  bool constrained_edge(int a, int b) const { return seg_of_edge_.count(edge_key(a, b)) != 0; }

  int locate(Vec2 p, int hint) const {
    int t = (hint >= 0 && hint < static_cast<int>(T_.size()) && T_[hint].alive) ? hint : 0;
    while (!T_[t].alive) ++t;
    int rot = 0;
    for (std::size_t step = 0; step < 4 * T_.size() + 100; ++step) {
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int e = (k + rot) % 3;
        const Vec2 a = P_[T_[t].v[(e + 1) % 3]], b = P_[T_[t].v[(e + 2) % 3]];
        if (orient2d(a, b, p) < 0.0) {
          if (T_[t].nb[e] < 0) fail(ErrorKind::Mesh, "point outside the triangulation at " + where_um(p, scale_));
          t = T_[t].nb[e];
          moved = true;
          break;
        }
      }
      if (!moved) return t;
      rot = (rot + 1) % 3;
    }
    // Fall back to a linear scan.
    for (std::size_t i = 0; i < T_.size(); ++i) {
      if (!T_[i].alive) continue;
      bool in = true;
      for (int e = 0; e < 3 && in; ++e)
        in = orient2d(P_[T_[i].v[(e + 1) % 3]], P_[T_[i].v[(e + 2) % 3]], p) >= 0.0;
      if (in) return static_cast<int>(i);
    }
    fail(ErrorKind::Mesh, "point location failed at " + where_um(p, scale_));
  }

  // ---- Bowyer-Watson insertion -------------------------------------------
  struct Cavity {
    std::vector<int> tris;
    std::vector<std::pair<int, int>> boundary;  // (triangle, local edge)
  };

  Cavity cavity(Vec2 p, const std::vector<int>& seeds, std::uint64_t crossable) {
    std::vector<int> excluded;
    for (int attempt = 0; attempt < 8; ++attempt) {
      ++stamp_;
      if (mark_.size() < T_.size()) mark_.resize(T_.size(), 0);
      Cavity c;
      std::vector<int> stack;
      for (int s : seeds) {
        mark_[s] = stamp_;
        stack.push_back(s);
      }
      auto is_excluded = [&](int t) {
        return std::find(excluded.begin(), excluded.end(), t) != excluded.end();
      };
      while (!stack.empty()) {
        const int t = stack.back();
        stack.pop_back();
        c.tris.push_back(t);
        for (int e = 0; e < 3; ++e) {
          const int n = T_[t].nb[e];
          const int a = T_[t].v[(e + 1) % 3], b = T_[t].v[(e + 2) % 3];
          if (n >= 0 && mark_[n] == stamp_) continue;
          const std::uint64_t key = edge_key(a, b);
          const bool wall = n < 0 || (key != crossable && seg_of_edge_.count(key)) ||
                            is_excluded(n) ||
                            incircle(P_[T_[n].v[0]], P_[T_[n].v[1]], P_[T_[n].v[2]], p) <= 0.0;
          if (wall) {
            c.boundary.push_back({t, e});
          } else {
            mark_[n] = stamp_;
            stack.push_back(n);
          }
        }
      }
      // The cavity must be star-shaped from p; drop offending triangles.
      bool ok = true;
      for (auto [t, e] : c.boundary) {
        const int a = T_[t].v[(e + 1) % 3], b = T_[t].v[(e + 2) % 3];
        if (orient2d(P_[a], P_[b], p) <= 0.0) {
          if (std::find(seeds.begin(), seeds.end(), t) != seeds.end()) continue;
          excluded.push_back(t);
          ok = false;
        }
      }
      if (ok) return c;
    }
    fail(ErrorKind::Mesh, "could not form a valid insertion cavity at " + where_um(p, scale_));
  }

  std::vector<int> commit(Vec2 p, const Cavity& c) {
    if (P_.size() >= max_vertices_)
      fail(ErrorKind::Mesh, "vertex budget exhausted near " + where_um(p, scale_));
    const int pv = static_cast<int>(P_.size());
    P_.push_back(p);
    vtri_.push_back(-1);

    struct Pending {
      int a, b, outside;
      bool inside;
    };
    std::vector<Pending> fan;
    fan.reserve(c.boundary.size());
    for (auto [t, e] : c.boundary)
      fan.push_back({T_[t].v[(e + 1) % 3], T_[t].v[(e + 2) % 3], T_[t].nb[e], T_[t].inside});
    for (int t : c.tris) {
      T_[t].alive = false;
      free_.push_back(t);
    }
    std::vector<int> created;
    created.reserve(fan.size());
    std::unordered_map<int, int> by_first, by_second;
    for (const auto& f : fan) {
      const int id = new_tri(pv, f.a, f.b);
      T_[id].inside = f.inside;
      T_[id].nb[0] = f.outside;
      if (f.outside >= 0) {
        Tri& o = T_[f.outside];
        for (int e = 0; e < 3; ++e) {
          const int u = o.v[(e + 1) % 3], w = o.v[(e + 2) % 3];
          if ((u == f.b && w == f.a) || (u == f.a && w == f.b)) o.nb[e] = id;
        }
      }
      by_first[f.a] = id;
      by_second[f.b] = id;
      created.push_back(id);
    }
    for (int id : created) {
      Tri& t = T_[id];
      const auto nb1 = by_first.find(t.v[2]);
      const auto nb2 = by_second.find(t.v[1]);
      t.nb[1] = nb1 == by_first.end() ? -1 : nb1->second;
      t.nb[2] = nb2 == by_second.end() ? -1 : nb2->second;
      for (int v : t.v) vtri_[v] = id;
    }
    if (mark_.size() < T_.size()) mark_.resize(T_.size(), 0);
    return created;
  }

  std::vector<int> insert_vertex(Vec2 p, const std::vector<int>& seeds, std::uint64_t crossable) {
    return commit(p, cavity(p, seeds, crossable));
  }

  // ---- segments ------------------------------------------------------------
  int add_segment(int a, int b, const Seg& like) {
    Seg s = like;
    s.a = a;
    s.b = b;
    s.partner = -1;
    s.alive = true;
    S_.push_back(s);
    const int id = static_cast<int>(S_.size()) - 1;
    if (s.constrained) seg_of_edge_[edge_key(a, b)] = id;
    return id;
  }

  // Splits segment s at its midpoint; returns the two halves (a-m, m-b).
  std::pair<int, int> split_one(int s, std::vector<int>* created) {
    const Seg seg = S_[s];
    const Vec2 m = (P_[seg.a] + P_[seg.b]) * 0.5;
    if (norm(P_[seg.a] - P_[seg.b]) < 1e-7)
      fail(ErrorKind::Mesh, "boundary feature too small to resolve near " + where_um(m, scale_));
    std::vector<int> made;
    if (seg.constrained) {
      const auto [t1, e1] = find_edge(seg.a, seg.b);
      if (t1 < 0) fail(ErrorKind::Mesh, "lost a boundary segment near " + where_um(m, scale_));
      const int t2 = T_[t1].nb[e1];
      const std::uint64_t key = edge_key(seg.a, seg.b);
      seg_of_edge_.erase(key);
      std::vector<int> seeds{t1};
      if (t2 >= 0) seeds.push_back(t2);
      made = insert_vertex(m, seeds, key);
    } else {
      made = insert_vertex(m, {locate(m, vtri_[seg.a])}, std::uint64_t(-1));
    }
    S_[s].alive = false;
    const int mv = static_cast<int>(P_.size()) - 1;
    const int h1 = add_segment(seg.a, mv, seg);
    const int h2 = add_segment(mv, seg.b, seg);
    if (created) created->insert(created->end(), made.begin(), made.end());
    return {h1, h2};
  }

  std::vector<int> split_pair(int s) {
    std::vector<int> created;
    const int p = S_[s].partner;
    const bool rev = S_[s].reversed;
    const auto [h1, h2] = split_one(s, &created);
    std::vector<int> halves{h1, h2};
    if (p >= 0 && S_[p].alive) {
      const auto [q1, q2] = split_one(p, &created);
      const int m1 = rev ? q2 : q1, m2 = rev ? q1 : q2;
      link(h1, m1, rev);
      link(h2, m2, rev);
      halves.push_back(q1);
      halves.push_back(q2);
    }
    after_change(created, halves);
    return halves;
  }

  void link(int s, int p, bool rev) {
    S_[s].partner = p;
    S_[s].reversed = rev;
    S_[p].partner = s;
    S_[p].reversed = rev;
  }

  void after_change(const std::vector<int>& created, const std::vector<int>& halves) {
    if (!refining_) return;
    for (int s : halves) seg_queue_.push_back(s);
    for (int t : created) {
      if (!T_[t].alive) continue;
      tri_queue_.push_back(t);
      for (int e = 0; e < 3; ++e) {
        const auto it =
            seg_of_edge_.find(edge_key(T_[t].v[(e + 1) % 3], T_[t].v[(e + 2) % 3]));
        if (it != seg_of_edge_.end()) seg_queue_.push_back(it->second);
      }
    }
  }

  void recover_segments() {
    std::deque<int> queue;
    for (std::size_t s = 0; s < S_.size(); ++s) queue.push_back(static_cast<int>(s));
    std::size_t guard = 0;
    while (!queue.empty()) {
      const int s = queue.front();
      queue.pop_front();
      if (!S_[s].alive || S_[s].constrained) continue;
      if (++guard > 20 * max_vertices_) fail(ErrorKind::Mesh, "segment recovery did not terminate");
      if (find_edge(S_[s].a, S_[s].b).first >= 0) {
        S_[s].constrained = true;
        seg_of_edge_[edge_key(S_[s].a, S_[s].b)] = s;
        continue;
      }
      for (int h : split_pair(s)) queue.push_back(h);
    }
  }

  void classify() {
    for (auto& t : T_) t.inside = false;
    std::vector<int> state(T_.size(), -1);
    std::deque<int> queue;
    for (std::size_t t = 0; t < T_.size(); ++t) {
      if (!T_[t].alive) continue;
      if (is_super(T_[t].v[0]) || is_super(T_[t].v[1]) || is_super(T_[t].v[2])) {
        state[t] = 0;
        queue.push_back(static_cast<int>(t));
      }
    }
    while (!queue.empty()) {
      const int t = queue.front();
      queue.pop_front();
      for (int e = 0; e < 3; ++e) {
        const int n = T_[t].nb[e];
        if (n < 0 || state[n] >= 0) continue;
        const bool wall = constrained_edge(T_[t].v[(e + 1) % 3], T_[t].v[(e + 2) % 3]);
        state[n] = wall ? 1 - state[t] : state[t];
        queue.push_back(n);
      }
    }
    for (std::size_t t = 0; t < T_.size(); ++t) T_[t].inside = T_[t].alive && state[t] == 1;
    refining_ = true;
  }

  // ---- refinement -----------------------------------------------------------
  bool encroached(int s) const {
    const auto [t, e] = find_edge(S_[s].a, S_[s].b);
    if (t < 0) return false;
    const Vec2 a = P_[S_[s].a], b = P_[S_[s].b];
    for (int side = 0; side < 2; ++side) {
      const int tt = side == 0 ? t : T_[t].nb[e];
      if (tt < 0 || !T_[tt].inside) continue;
      for (int v : T_[tt].v) {
        if (v == S_[s].a || v == S_[s].b || is_super(v)) continue;
        if (dot(a - P_[v], b - P_[v]) < 0.0) return true;
      }
    }
    return false;
  }

  bool is_bad(int t) const {
    const Vec2 a = P_[T_[t].v[0]], b = P_[T_[t].v[1]], c = P_[T_[t].v[2]];
    const double la = norm(b - c), lb = norm(c - a), lc = norm(a - b);
    const double lmax = std::max({la, lb, lc}), lmin = std::min({la, lb, lc});
    if (lmax > 1.0) return true;
    const double area2 = std::abs(cross(b - a, c - a));
    // sin(min angle) = 2*area / (product of the two longer edges)
    const double sin_min = area2 / (la * lb * lc / lmin);
    return sin_min < sin_min_;
  }

  // Walks from t's centroid toward p; returns {triangle containing p, -1} or
  // {-1, blocking segment}.
  std::pair<int, int> walk_to(int t, Vec2 p) const {
    const Vec2 from = (P_[T_[t].v[0]] + P_[T_[t].v[1]] + P_[T_[t].v[2]]) * (1.0 / 3.0);
    int cur = t, prev = -1;
    for (int step = 0; step < 100000; ++step) {
      int exit = -1;
      for (int e = 0; e < 3; ++e) {
        const int a = T_[cur].v[(e + 1) % 3], b = T_[cur].v[(e + 2) % 3];
        if (T_[cur].nb[e] == prev && prev >= 0) continue;
        if (orient2d(P_[a], P_[b], p) >= 0.0) continue;
        const double oa = orient2d(from, p, P_[a]), ob = orient2d(from, p, P_[b]);
        if ((oa <= 0.0 && ob >= 0.0) || (oa >= 0.0 && ob <= 0.0)) {
          exit = e;
          break;
        }
      }
      if (exit < 0) {
        bool in = true;
        for (int e = 0; e < 3 && in; ++e)
          in = orient2d(P_[T_[cur].v[(e + 1) % 3]], P_[T_[cur].v[(e + 2) % 3]], p) >= 0.0;
        if (in) return {cur, -1};
        return {-1, -1};
      }
      const auto it = seg_of_edge_.find(edge_key(T_[cur].v[(exit + 1) % 3], T_[cur].v[(exit + 2) % 3]));
      if (it != seg_of_edge_.end()) return {-1, it->second};
      prev = cur;
      cur = T_[cur].nb[exit];
      if (cur < 0) return {-1, -1};
    }
    return {-1, -1};
  }

  void split_triangle(int t) {
    const Vec2 a = P_[T_[t].v[0]], b = P_[T_[t].v[1]], c = P_[T_[t].v[2]];
    const Vec2 cc = circumcenter(a, b, c);
    auto [host, blocker] = walk_to(t, cc);
    if (blocker >= 0) {
      split_pair(blocker);
      if (T_[t].alive) tri_queue_.push_back(t);
      return;
    }
    if (host < 0) {
      host = locate(cc, t);
      if (!T_[host].inside) return;  // unreachable circumcentre; leave it
    }
    const Cavity cav = cavity(cc, {host}, std::uint64_t(-1));
    std::vector<int> hit;
    for (auto [tt, e] : cav.boundary) {
      const auto it =
          seg_of_edge_.find(edge_key(T_[tt].v[(e + 1) % 3], T_[tt].v[(e + 2) % 3]));
      if (it == seg_of_edge_.end()) continue;
      const Seg& s = S_[it->second];
      if (dot(P_[s.a] - cc, P_[s.b] - cc) < 0.0) hit.push_back(it->second);
    }
    if (!hit.empty()) {
      for (int s : hit)
        if (S_[s].alive) split_pair(s);
      if (T_[t].alive) tri_queue_.push_back(t);
      return;
    }
    const auto created = commit(cc, cav);
    after_change(created, {});
  }

  double sin_min_;
  std::size_t max_vertices_;
  double scale_;
  bool refining_ = false;
  std::vector<Vec2> P_;
  std::vector<int> vtri_;
  std::vector<Tri> T_;
  std::vector<int> free_;
  std::vector<Seg> S_;
  std::unordered_map<std::uint64_t, int> seg_of_edge_;
  std::vector<unsigned> mark_;
  unsigned stamp_ = 0;
  std::deque<int> seg_queue_, tri_queue_;
};

}  // namespace

Mesh triangulate(const PolyRegion& region, const MeshOptions& options) {
  if (!(options.target_h > 0.0)) fail(ErrorKind::InvalidArgument, "target_h must be > 0");
  if (!(options.min_angle_deg > 0.0 && options.min_angle_deg <= 28.0))
    fail(ErrorKind::InvalidArgument, "min_angle must lie in (0, 28] degrees");
  try {
    region.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Mesh, std::string("unmeshable region: ") + e.what());
  }
  const double scale = options.target_h;

  // Tag table.
  std::vector<std::string> tag_names = region.tag_names();
  auto tag_id = [&](const std::string& t) -> int {
    if (t.empty()) return -1;
    return static_cast<int>(std::find(tag_names.begin(), tag_names.end(), t) - tag_names.begin());
  };

  struct RawEdge {
    Vec2 a, b;
    int tag;
    int partner = -1;
    bool reversed = false;
    int pieces = 0;
  };
  std::vector<RawEdge> raw;
  for (std::size_t l = 0; l < region.loop_count(); ++l) {
    const Loop& lp = region.loop(l);
    for (std::size_t i = 0; i < lp.size(); ++i) {
      const std::string tag =
          l < region.edge_tags.size() && i < region.edge_tags[l].size() ? region.edge_tags[l][i] : "";
      raw.push_back({lp[i] * (1.0 / scale), lp[(i + 1) % lp.size()] * (1.0 / scale), tag_id(tag)});
    }
  }
  for (auto& e : raw) e.pieces = std::max(1, static_cast<int>(std::ceil(norm(e.b - e.a) - 1e-9)));

  for (const auto& m : options.mirrored) {
    const int src = tag_id(m.source), img = tag_id(m.image);
    if (src < 0 || img < 0 || src >= static_cast<int>(tag_names.size()) ||
        img >= static_cast<int>(tag_names.size()))
      fail(ErrorKind::Mesh, "mirrored boundary tags " + m.source + "/" + m.image + " not found");
    Isometry map = m.map;
    map.centre = map.centre * (1.0 / scale);
    map.translation = map.translation * (1.0 / scale);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].tag != src) continue;
      const Vec2 ia = map.apply(raw[i].a), ib = map.apply(raw[i].b);
      bool found = false;
      for (std::size_t j = 0; j < raw.size() && !found; ++j) {
        if (raw[j].tag != img) continue;
        const double tol = 1e-9 * (1.0 + norm(raw[j].b - raw[j].a));
        if (norm(raw[j].a - ia) < tol && norm(raw[j].b - ib) < tol) {
          raw[i].partner = static_cast<int>(j);
          raw[i].reversed = false;
          found = true;
        } else if (norm(raw[j].a - ib) < tol && norm(raw[j].b - ia) < tol) {
          raw[i].partner = static_cast<int>(j);
          raw[i].reversed = true;
          found = true;
        }
        if (found) {
          raw[j].pieces = raw[i].pieces;
          raw[j].partner = static_cast<int>(i);
          raw[j].reversed = raw[i].reversed;
        }
      }
      if (!found)
        fail(ErrorKind::Mesh, "no image segment tagged " + m.image + " for segment near " +
                                  where_um(raw[i].a, scale));
    }
  }

  // Pre-split every boundary edge to at most one target length.
  std::vector<Vec2> pts;
  std::vector<Seg> segs;
  std::vector<int> first_piece(raw.size());
  {
    std::vector<int> loop_start_vertex;
    std::size_t idx = 0;
    for (std::size_t l = 0; l < region.loop_count(); ++l) {
      const std::size_t n = region.loop(l).size();
      const int base = static_cast<int>(pts.size()) + 3;
      std::vector<int> ids;
      for (std::size_t i = 0; i < n; ++i, ++idx) {
        const RawEdge& e = raw[idx];
        ids.push_back(static_cast<int>(pts.size()) + 3);
        pts.push_back(e.a);
        for (int k = 1; k < e.pieces; ++k) {
          const double t = static_cast<double>(k) / e.pieces;
          ids.push_back(static_cast<int>(pts.size()) + 3);
          pts.push_back(e.a + (e.b - e.a) * t);
        }
      }
      // Build segments along the loop.
      std::size_t cursor = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const RawEdge& e = raw[idx - n + i];
        first_piece[idx - n + i] = static_cast<int>(segs.size());
        for (int k = 0; k < e.pieces; ++k) {
          Seg s;
          s.a = ids[cursor];
          s.b = ids[(cursor + 1) % ids.size()];
          s.tag = e.tag;
          segs.push_back(s);
          ++cursor;
        }
      }
      (void)base;
    }
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int j = raw[i].partner;
    if (j < 0) continue;
    const int n = raw[i].pieces;
    for (int k = 0; k < n; ++k) {
      const int kk = raw[i].reversed ? n - 1 - k : k;
      segs[first_piece[i] + k].partner = first_piece[j] + kk;
      segs[first_piece[i] + k].reversed = raw[i].reversed;
    }
  }

  Refiner refiner(options.min_angle_deg, options.max_vertices, scale);
  refiner.build(pts, segs);
  refiner.refine();

  // Extract the interior triangles as quadratic elements.
  const auto& P = refiner.points();
  const auto& T = refiner.triangles();
  std::vector<int> remap(P.size(), -1);
  std::vector<std::array<int, 3>> corners;
  for (const auto& t : T)
    if (t.alive && t.inside) corners.push_back(t.v);
  std::vector<char> used(P.size(), 0);
  for (const auto& c : corners)
    for (int v : c) used[v] = 1;
  Mesh mesh;
  mesh.target_h = options.target_h;
  for (std::size_t v = 0; v < P.size(); ++v) {
    if (!used[v]) continue;
    remap[v] = static_cast<int>(mesh.nodes.size());
    mesh.nodes.push_back(P[v] * scale);
  }
  std::unordered_map<std::uint64_t, int> mid;
  auto midside = [&](int a, int b) {
    const auto key = edge_key(a, b);
    const auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(mesh.nodes.size());
    mesh.nodes.push_back((P[a] + P[b]) * (0.5 * scale));
    mid.emplace(key, id);
    return id;
  };
  for (const auto& c : corners) {
    Element el{};
    el[0] = remap[c[0]];
    el[1] = remap[c[1]];
    el[2] = remap[c[2]];
    el[3] = midside(c[0], c[1]);
    el[4] = midside(c[1], c[2]);
    el[5] = midside(c[2], c[0]);
    mesh.elements.push_back(el);
  }
  for (const auto& s : refiner.segments()) {
    if (!s.alive) continue;
    const auto it = mid.find(edge_key(s.a, s.b));
    if (it == mid.end() || remap[s.a] < 0 || remap[s.b] < 0) continue;
    BoundaryEdge be{remap[s.a], remap[s.b], it->second,
                    s.tag >= 0 ? tag_names[s.tag] : std::string()};
    mesh.boundary_edges.push_back(be);
    if (!be.tag.empty()) {
      auto& list = mesh.boundary_tags[be.tag];
      list.insert(list.end(), {be.n0, be.n1, be.mid});
    }
  }
  for (auto& [tag, list] : mesh.boundary_tags) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return mesh;
}

double Mesh::element_area(std::size_t e) const {
  const Vec2 a = nodes[elements[e][0]], b = nodes[elements[e][1]], c = nodes[elements[e][2]];
  return 0.5 * cross(b - a, c - a);
}

Vec2 Mesh::centroid(std::size_t e) const {
  return (nodes[elements[e][0]] + nodes[elements[e][1]] + nodes[elements[e][2]]) * (1.0 / 3.0);
}

double Mesh::total_area() const {
  double a = 0.0;
  for (std::size_t e = 0; e < elements.size(); ++e) a += element_area(e);
  return a;
}

const std::vector<int>& Mesh::tagged(const std::string& tag) const {
  const auto it = boundary_tags.find(tag);
  if (it == boundary_tags.end()) fail(ErrorKind::Pairing, "mesh has no boundary tagged " + tag);
  return it->second;
}

void Mesh::write(std::ostream& os) const {
  os << std::setprecision(15);
  os << "NODES " << nodes.size() << '\n';
  for (std::size_t i = 0; i < nodes.size(); ++i)
    os << i << ' ' << nodes[i].x / kMicron << ' ' << nodes[i].y / kMicron << '\n';
  os << "ELEMENTS " << elements.size() << '\n';
  for (std::size_t e = 0; e < elements.size(); ++e) {
    os << e;
    for (int n : elements[e]) os << ' ' << n;
    os << '\n';
  }
  for (const auto& [tag, list] : boundary_tags) {
    os << "TAG " << tag << ' ' << list.size() << '\n';
    for (std::size_t i = 0; i < list.size(); ++i) os << list[i] << (i + 1 == list.size() ? '\n' : ' ');
  }
}

PeriodicMap periodic_pair(const Mesh& mesh, const std::string& minus_tag,
                          const std::string& plus_tag, Vec2 translation) {
  const auto& minus = mesh.tagged(minus_tag);
  const auto& plus = mesh.tagged(plus_tag);
  const double tol = 1e-9 * norm(translation);
  PeriodicMap map;
  map.translation = translation;
  std::vector<char> taken(plus.size(), 0);
  std::vector<Vec2> unmatched;
  for (int m : minus) {
    const Vec2 target = mesh.nodes[m] + translation;
    int hit = -1;
    for (std::size_t j = 0; j < plus.size(); ++j) {
      if (!taken[j] && norm(mesh.nodes[plus[j]] - target) <= tol) {
        hit = static_cast<int>(j);
        break;
      }
    }
    if (hit < 0) {
      unmatched.push_back(mesh.nodes[m]);
      continue;
    }
    taken[hit] = 1;
    map.pairs.emplace_back(m, plus[hit]);
  }
  for (std::size_t j = 0; j < plus.size(); ++j)
    if (!taken[j]) unmatched.push_back(mesh.nodes[plus[j]]);
  if (!unmatched.empty() || minus.size() != plus.size()) {
    std::ostringstream os;
    os << "periodic pairing " << minus_tag << " -> " << plus_tag << " failed (" << minus.size()
       << " vs " << plus.size() << " nodes); unmatched:";
    for (std::size_t i = 0; i < std::min<std::size_t>(unmatched.size(), 8); ++i)
      os << " (" << unmatched[i].x / kMicron << ", " << unmatched[i].y / kMicron << ")";
    if (unmatched.size() > 8) os << " ...";
    fail(ErrorKind::Pairing, os.str());
  }
  return map;
}

QualityStats quality_report(const Mesh& mesh) {
  QualityStats q;
  q.element_count = mesh.elements.size();
  q.node_count = mesh.nodes.size();
  q.min_angle_deg = 180.0;
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Vec2 p[3] = {mesh.nodes[mesh.elements[e][0]], mesh.nodes[mesh.elements[e][1]],
                       mesh.nodes[mesh.elements[e][2]]};
    double smallest = 180.0, longest = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Vec2 u = p[(i + 1) % 3] - p[i], v = p[(i + 2) % 3] - p[i];
      const double ang = std::atan2(std::abs(cross(u, v)), dot(u, v)) * 180.0 / kPi;
      smallest = std::min(smallest, ang);
      longest = std::max(longest, norm(u));
    }
    const double area = mesh.element_area(e);
    const double min_alt = 2.0 * area / longest;
    q.min_angle_deg = std::min(q.min_angle_deg, smallest);
    q.max_aspect_ratio = std::max(q.max_aspect_ratio, longest / min_alt);
    q.max_edge = std::max(q.max_edge, longest);
    q.total_area += area;
    sum += smallest;
  }
  q.mean_angle_deg = mesh.elements.empty() ? 0.0 : sum / mesh.elements.size();
  if (mesh.elements.empty()) q.min_angle_deg = 0.0;
  return q;
}

namespace {

class NodeMerger {
 public:
  NodeMerger(double tol) : tol_(tol) {}

  int add(Mesh& mesh, Vec2 p) {
    const long long cx = std::llround(p.x / (4 * tol_)), cy = std::llround(p.y / (4 * tol_));
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (int n : it->second)
          if (norm(mesh.nodes[n] - p) <= tol_) return n;
      }
    const int id = static_cast<int>(mesh.nodes.size());
    mesh.nodes.push_back(p);
    cells_[key(cx, cy)].push_back(id);
    return id;
  }

 private:
  static std::uint64_t key(long long x, long long y) {
    return (static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ull) ^ static_cast<std::uint64_t>(y);
  }
  double tol_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace

Mesh replicate_rotational(const Mesh& sector, int copies, Vec2 centre,
                          const std::function<std::string(const std::string&, int)>& rename) {
  if (copies < 1) fail(ErrorKind::InvalidArgument, "copies must be >= 1");
  Mesh out;
  out.target_h = sector.target_h;
  NodeMerger merger(1e-9 * sector.target_h);
  for (int k = 0; k < copies; ++k) {
    const double angle = 2.0 * kPi * k / copies;
    std::vector<int> remap(sector.nodes.size());
    for (std::size_t n = 0; n < sector.nodes.size(); ++n) {
      const Vec2 p = k == 0 ? sector.nodes[n] : rotate(sector.nodes[n] - centre, angle) + centre;
      remap[n] = merger.add(out, p);
    }
    for (const auto& el : sector.elements) {
      Element e;
      for (int i = 0; i < 6; ++i) e[i] = remap[el[i]];
      out.elements.push_back(e);
    }
    for (const auto& be : sector.boundary_edges) {
      const std::string tag = be.tag.empty() ? std::string() : rename(be.tag, k);
      if (be.tag.empty() || tag.empty()) continue;
      BoundaryEdge nb{remap[be.n0], remap[be.n1], remap[be.mid], tag};
      out.boundary_edges.push_back(nb);
      auto& list = out.boundary_tags[tag];
      list.insert(list.end(), {nb.n0, nb.n1, nb.mid});
    }
  }
  for (auto& [tag, list] : out.boundary_tags) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return out;
}

Mesh mirror_x(const Mesh& mesh, double axis_x) {
  Mesh out = mesh;
  for (auto& p : out.nodes) p.x = 2.0 * axis_x - p.x;
  for (auto& e : out.elements) {
    const Element old = e;
    e = {old[0], old[2], old[1], old[5], old[4], old[3]};
  }
  return out;
}

Mesh structured_rectangle(double width, double height, int nx, int ny) {
  if (nx < 1 || ny < 1) fail(ErrorKind::InvalidArgument, "structured mesh needs nx, ny >= 1");
  Mesh m;
  m.target_h = std::max(width / nx, height / ny);
  const int cols = 2 * nx + 1, rows = 2 * ny + 1;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i)
      m.nodes.push_back({width * i / (2.0 * nx), height * j / (2.0 * ny)});
  auto id = [cols](int i, int j) { return j * cols + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int I = 2 * i, J = 2 * j;
      // lower-right and upper-left triangles sharing the diagonal
      m.elements.push_back({id(I, J), id(I + 2, J), id(I + 2, J + 2), id(I + 1, J), id(I + 2, J + 1),
                            id(I + 1, J + 1)});
      m.elements.push_back({id(I, J), id(I + 2, J + 2), id(I, J + 2), id(I + 1, J + 1), id(I + 1, J + 2),
                            id(I, J + 1)});
    }
  auto add_edge = [&](int a, int mid, int b, const std::string& tag) {
    m.boundary_edges.push_back({a, b, mid, tag});
    auto& l = m.boundary_tags[tag];
    l.insert(l.end(), {a, mid, b});
  };
  for (int i = 0; i < nx; ++i) {
    add_edge(id(2 * i, 0), id(2 * i + 1, 0), id(2 * i + 2, 0), "bottom");
    add_edge(id(2 * i + 2, rows - 1), id(2 * i + 1, rows - 1), id(2 * i, rows - 1), "top");
  }
  for (int j = 0; j < ny; ++j) {
    add_edge(id(cols - 1, 2 * j), id(cols - 1, 2 * j + 1), id(cols - 1, 2 * j + 2), "right");
    add_edge(id(0, 2 * j + 2), id(0, 2 * j + 1), id(0, 2 * j), "left");
  }
  for (auto& [tag, list] : m.boundary_tags) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return m;
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(mesh) {
  Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  Vec2 hi{-lo.x, -lo.y};
  for (const Vec2& p : mesh.nodes) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double n = std::max<double>(1.0, std::sqrt(static_cast<double>(mesh.elements.size())));
  nx_ = std::max(1, static_cast<int>(n));
  ny_ = std::max(1, static_cast<int>(n));
  lo_ = lo;
  cell_ = {std::max((hi.x - lo.x) / nx_, 1e-300), std::max((hi.y - lo.y) / ny_, 1e-300)};
  bins_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    Vec2 elo = mesh.nodes[mesh.elements[e][0]], ehi = elo;
    for (int i = 1; i < 3; ++i) {
      const Vec2 p = mesh.nodes[mesh.elements[e][i]];
      elo = {std::min(elo.x, p.x), std::min(elo.y, p.y)};
      ehi = {std::max(ehi.x, p.x), std::max(ehi.y, p.y)};
    }
    const int i0 = std::clamp(static_cast<int>((elo.x - lo_.x) / cell_.x), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((ehi.x - lo_.x) / cell_.x), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((elo.y - lo_.y) / cell_.y), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((ehi.y - lo_.y) / cell_.y), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) bins_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(e));
  }
}

int PointLocator::find(Vec2 p, std::array<double, 3>* bary, double tol) const {
  const int i = static_cast<int>(std::floor((p.x - lo_.x) / cell_.x));
  const int j = static_cast<int>(std::floor((p.y - lo_.y) / cell_.y));
  int best = -1;
  double best_min = -std::numeric_limits<double>::max();
  std::array<double, 3> best_bary{};
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
      for (int e : bins_[static_cast<std::size_t>(jj) * nx_ + ii]) {
        const Vec2 a = mesh_.nodes[mesh_.elements[e][0]], b = mesh_.nodes[mesh_.elements[e][1]],
                   c = mesh_.nodes[mesh_.elements[e][2]];
        const double area = cross(b - a, c - a);
        const std::array<double, 3> l{cross(b - p, c - p) / area, cross(c - p, a - p) / area,
                                      cross(a - p, b - p) / area};
        const double m = std::min({l[0], l[1], l[2]});
        if (m > best_min) {
          best_min = m;
          best = e;
          best_bary = l;
        }
      }
    }
  if (best < 0 || best_min < -tol) return -1;
  if (bary) *bary = best_bary;
  return best;
}

}  // namespace phononet
