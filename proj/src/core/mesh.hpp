#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace phononet {

/// Quadratic 6-node triangle: three corners (counterclockwise) followed by the
/// midside nodes of edges 0-1, 1-2 and 2-0.
using Element = std::array<int, 6>;

struct BoundaryEdge {
  int n0 = 0, n1 = 0, mid = 0;
  std::string tag;
};

struct Mesh {
  std::vector<Vec2> nodes;  // m
  std::vector<Element> elements;
  std::map<std::string, std::vector<int>> boundary_tags;
  std::vector<BoundaryEdge> boundary_edges;  // tagged edges only
  double target_h = 0.0;

  double element_area(std::size_t e) const;
  Vec2 centroid(std::size_t e) const;
  double total_area() const;
  const std::vector<int>& tagged(const std::string& tag) const;

  void write(std::ostream& os) const;
};

/// Rigid map used to pair boundary segments whose discretizations must match.
struct Isometry {
  double angle = 0.0;
  Vec2 centre;       // rotation centre
  Vec2 translation;  // applied after the rotation

  Vec2 apply(Vec2 p) const { return rotate(p - centre, angle) + centre + translation; }
  static Isometry shift(Vec2 t) { return {0.0, {0, 0}, t}; }
};

/// Segments tagged `source` are discretized first and their node placement is
/// copied onto the segments tagged `image` (their images under `map`).
struct MirroredBoundary {
  std::string source;
  std::string image;
  Isometry map;
};

struct MeshOptions {
  double target_h = 0.0;          // m
  double min_angle_deg = 25.0;
  std::vector<MirroredBoundary> mirrored;
  std::size_t max_vertices = 4'000'000;
};

Mesh triangulate(const PolyRegion& region, const MeshOptions& options);
inline Mesh triangulate(const PolyRegion& region, double target_h, double min_angle_deg) {
  return triangulate(region, MeshOptions{target_h, min_angle_deg, {}, 4'000'000});
}

struct PeriodicMap {
  std::vector<std::pair<int, int>> pairs;  // (minus node, plus node)
  Vec2 translation;
};

PeriodicMap periodic_pair(const Mesh& mesh, const std::string& minus_tag,
                          const std::string& plus_tag, Vec2 translation);

struct QualityStats {
  double min_angle_deg = 0.0;
  double mean_angle_deg = 0.0;  // mean of each element's smallest angle
  double max_aspect_ratio = 0.0;  // longest edge / shortest altitude
  double max_edge = 0.0;
  std::size_t element_count = 0;
  std::size_t node_count = 0;
  double total_area = 0.0;
};

QualityStats quality_report(const Mesh& mesh);

/// Copies a sector mesh `copies` times by successive rotations of 2*pi/copies
/// about `centre`, merging coincident nodes. `rename` maps (tag, copy index)
/// to the tag used in the result; returning an empty string drops the tag.
Mesh replicate_rotational(const Mesh& sector, int copies, Vec2 centre,
                          const std::function<std::string(const std::string&, int)>& rename);

/// Reflection x -> 2*axis_x - x, keeping elements counterclockwise.
Mesh mirror_x(const Mesh& mesh, double axis_x);

/// Structured right-triangle mesh of an axis-aligned rectangle (nx*ny*2 elements).
Mesh structured_rectangle(double width, double height, int nx, int ny);

/// Locates the element containing p (barycentric tolerance `tol`); -1 if none.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);
  int find(Vec2 p, std::array<double, 3>* bary = nullptr, double tol = 1e-9) const;

 private:
  const Mesh& mesh_;
  Vec2 lo_, cell_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> bins_;
};

}  // namespace phononet
