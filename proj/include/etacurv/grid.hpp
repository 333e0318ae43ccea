#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "etacurv/types.hpp"

// Convex level-set domains (disk, ellipse, superellipse), their boundary
// geometry, and masked finite-difference grids with Shortley-Weller shortened
// arms at the curved boundary. Mixed derivatives are assembled from second
// differences along the two diagonals of each coordinate plane, so every
// stencil degenerates to the standard central one away from the boundary and
// stays exact on quadratics next to it.
namespace etacurv::grid {

struct DomainSpec {
  enum class Kind { Disk, Ellipse, Superellipse };

  Kind kind = Kind::Disk;
  int n = 2;
  Vec center;
  Vec semi_axes;
  double exponent = 2.0;  // >= 2; used by Superellipse only

  static DomainSpec disk(int n, const Vec& center, double radius);
  static DomainSpec ellipse(const Vec& center, const Vec& semi_axes);
  static DomainSpec superellipse(const Vec& center, const Vec& semi_axes, double exponent);

  /// Level function sum_i |(x_i - c_i)/a_i|^m - 1, negative inside.
  double level(const Vec& x) const;
  Vec level_grad(const Vec& x) const;
  Mat level_hess(const Vec& x) const;
  bool inside(const Vec& x) const { return level(x) < 0.0; }

  double power() const;  // 2 for disk/ellipse, exponent for superellipse
  double diameter() const;
  double inradius() const;  // min semi-axis
  Vec bbox_min() const;
  Vec bbox_max() const;

  /// Boundary parametrization: n = 2 takes one angle, n = 3 two angles
  /// (polar, azimuthal). Signed-power warp of the circle/sphere.
  Vec boundary_point(const Vec& angles) const;

  /// Unit inner normal at a boundary point.
  Vec inner_normal(const Vec& x) const;

  /// Exact distance from an interior point to the boundary. Closed form for
  /// disks/balls, 1-d parameter search for the planar kinds.
  double boundary_distance(const Vec& x) const;
};

struct BoundaryPoint {
  Vec x;
  Vec inner_normal;
  Vec principal_curvatures;  // n-1 entries, positive for strictly convex
};

/// Samples the boundary with closed-form principal curvatures from the level
/// function. samples >= 8.
std::vector<BoundaryPoint> boundary_geometry(const DomainSpec& domain, int samples);

/// (kappa^b_1, ..., kappa^b_{n-1}, K) in Gamma at every sampled point; the
/// margin is the minimum over samples of the Gamma margin.
struct AdmissibilityResult {
  bool admissible = false;
  double margin = 0.0;
};
AdmissibilityResult admissible_domain_check(const DomainSpec& domain, double K,
                                            int samples = 256);

enum class NodeClass : std::uint8_t { Exterior = 0, Interior = 1, BoundaryAdjacent = 2 };

/// One finite-difference arm: either to another grid node (compact index) or
/// shortened to the exact boundary crossing.
struct Arm {
  double len = 0.0;
  int node = -1;      // compact node index, or -1 for a crossing
  int crossing = -1;  // index into the skeleton's crossing list when node < 0
};

struct LineStencil {
  Arm plus, minus;
};

/// A (node, weight) pair of a discrete linear functional; node < 0 encodes
/// boundary crossing -(node+1).
struct StencilEntry {
  int node;
  double w;
};

class GridSkeleton {
 public:
  static std::shared_ptr<const GridSkeleton> build(const DomainSpec& domain, double h);

  const DomainSpec& domain() const { return domain_; }
  double spacing() const { return h_; }
  int dim() const { return domain_.n; }

  int num_nodes() const { return static_cast<int>(node_flat_.size()); }  // non-exterior
  int num_crossings() const { return static_cast<int>(crossings_.size()); }
  Vec node_coord(int i) const;
  NodeClass node_class(int i) const { return klass_compact_[i]; }
  const Vec& crossing_point(int c) const { return crossings_[c]; }

  /// Lines through node i: axes first (d = 0..n-1), then for each pair p < q
  /// the two diagonals e_p + e_q and e_p - e_q.
  int num_lines() const { return dim() + dim() * (dim() - 1); }
  const LineStencil& line(int i, int l) const { return lines_[static_cast<size_t>(i) * num_lines() + l]; }
  int axis_line(int d) const { return d; }
  int diag_line(int p, int q, bool second) const;  // requires p < q

  /// Weights of the first/second difference along a line at node i (3 entries:
  /// plus arm, minus arm, center).
  void line_gradient_stencil(int i, int l, StencilEntry out[3]) const;
  void line_second_stencil(int i, int l, StencilEntry out[3]) const;

  std::uint64_t content_hash() const;  // domain, h, mask layout

 private:
  friend class GridField;
  DomainSpec domain_;
  double h_ = 0.0;
  std::vector<int> dims_;
  Vec origin_;
  std::vector<int> node_flat_;          // compact -> flat (ascending = lexicographic)
  std::vector<NodeClass> klass_compact_;
  std::vector<LineStencil> lines_;
  std::vector<Vec> crossings_;
};

/// Scalar field on a grid: one value per non-exterior node plus the trace at
/// each boundary crossing.
class GridField {
 public:
  GridField() = default;
  explicit GridField(std::shared_ptr<const GridSkeleton> skel);

  const GridSkeleton& skeleton() const { return *skel_; }
  std::shared_ptr<const GridSkeleton> skeleton_ptr() const { return skel_; }

  Vec& values() { return values_; }
  const Vec& values() const { return values_; }
  Vec& boundary_values() { return boundary_values_; }
  const Vec& boundary_values() const { return boundary_values_; }

  /// Fills node values (and the boundary trace) from a closed form.
  void fill(const std::function<double(const Vec&)>& f);
  void set_boundary(const std::function<double(const Vec&)>& f);

  double arm_value(const Arm& arm, int center) const;
  Vec gradient_at(int i) const;
  Mat hessian_at(int i) const;

  double max_abs() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

 private:
  std::shared_ptr<const GridSkeleton> skel_;
  Vec values_;
  Vec boundary_values_;
};

/// Per-node discrete gradient / Hessian over all non-exterior nodes.
std::vector<Vec> fd_gradient(const GridField& u);
std::vector<Mat> fd_hessian(const GridField& u);

/// CSV serialization: header x_1,..,x_n,value,mask; lexicographic node order;
/// exterior nodes omitted; 17 significant digits.
void write_csv(const GridField& u, const std::string& path);

/// Loads values into a field over `skel`; the file's nodes must match the
/// skeleton exactly (count, order, coordinates). Boundary trace is not stored
/// in the file and is left zero.
GridField read_csv(std::shared_ptr<const GridSkeleton> skel, const std::string& path);

}  // namespace etacurv::grid
