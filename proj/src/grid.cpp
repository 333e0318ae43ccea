#include "etacurv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "etacurv/symfun.hpp"

namespace etacurv::grid {

DomainSpec DomainSpec::disk(int n, const Vec& center, double radius) {
  DomainSpec d;
  d.kind = Kind::Disk;
  d.n = n;
  d.center = center;
  d.semi_axes = Vec::Constant(n, radius);
  return d;
}

DomainSpec DomainSpec::ellipse(const Vec& center, const Vec& semi_axes) {
  DomainSpec d;
  d.kind = Kind::Ellipse;
  d.n = static_cast<int>(center.size());
  d.center = center;
  d.semi_axes = semi_axes;
  return d;
}

DomainSpec DomainSpec::superellipse(const Vec& center, const Vec& semi_axes, double exponent) {
  if (exponent < 2.0) throw ConfigError("superellipse exponent must be >= 2 (convexity)");
  DomainSpec d;
  d.kind = Kind::Superellipse;
  d.n = static_cast<int>(center.size());
  d.center = center;
  d.semi_axes = semi_axes;
  d.exponent = exponent;
  return d;
}

double DomainSpec::power() const { return kind == Kind::Superellipse ? exponent : 2.0; }

double DomainSpec::level(const Vec& x) const {
  const double m = power();
  double acc = -1.0;
  for (int i = 0; i < n; ++i) {
    acc += std::pow(std::abs((x(i) - center(i)) / semi_axes(i)), m);
  }
  return acc;
}

Vec DomainSpec::level_grad(const Vec& x) const {
  const double m = power();
  Vec g(n);
  for (int i = 0; i < n; ++i) {
    const double t = (x(i) - center(i)) / semi_axes(i);
    g(i) = m * std::copysign(std::pow(std::abs(t), m - 1.0), t) / semi_axes(i);
  }
  return g;
}

Mat DomainSpec::level_hess(const Vec& x) const {
  const double m = power();
  Mat h = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double t = (x(i) - center(i)) / semi_axes(i);
    h(i, i) = m * (m - 1.0) * std::pow(std::abs(t), m - 2.0) / (semi_axes(i) * semi_axes(i));
  }
  return h;
}

double DomainSpec::diameter() const {
  if (kind == Kind::Disk) return 2.0 * semi_axes(0);
  if (kind == Kind::Ellipse) return 2.0 * semi_axes.maxCoeff();
  const double m = exponent;
  if (m == 2.0) return 2.0 * semi_axes.maxCoeff();
  // max |x - c| over the boundary: KKT picks the full coordinate set
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::pow(semi_axes(i), 2.0 * m / (m - 2.0));
  return 2.0 * std::pow(s, (m - 2.0) / (2.0 * m));
}

double DomainSpec::inradius() const { return semi_axes.minCoeff(); }

Vec DomainSpec::bbox_min() const { return center - semi_axes; }
Vec DomainSpec::bbox_max() const { return center + semi_axes; }

namespace {

double signed_power(double c, double e) { return std::copysign(std::pow(std::abs(c), e), c); }

}  // namespace

Vec DomainSpec::boundary_point(const Vec& angles) const {
  const double m = power();
  Vec x(n);
  if (n == 2) {
    const double c = std::cos(angles(0)), s = std::sin(angles(0));
    x(0) = center(0) + semi_axes(0) * signed_power(c, 2.0 / m);
    x(1) = center(1) + semi_axes(1) * signed_power(s, 2.0 / m);
    return x;
  }
  const double th = angles(0), ph = angles(1);
  const Vec c = (Vec(3) << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
                 std::cos(th))
                    .finished();
  for (int i = 0; i < 3; ++i) x(i) = center(i) + semi_axes(i) * signed_power(c(i), 2.0 / m);
  return x;
}

Vec DomainSpec::inner_normal(const Vec& x) const {
  const Vec g = level_grad(x);
  return -g / g.norm();
}

double DomainSpec::boundary_distance(const Vec& x) const {
  if (kind == Kind::Disk) return semi_axes(0) - (x - center).norm();
  if (n != 2) throw ConfigError("boundary_distance: only disks/balls supported for n = 3");
  // coarse scan over the angle parameter, then golden-section refinement
  auto d2 = [&](double psi) {
    return (boundary_point((Vec(1) << psi).finished()) - x).squaredNorm();
  };
  const int N = 256;
  double best = 0.0, bestv = d2(0.0);
  for (int k = 1; k < N; ++k) {
    const double psi = 2.0 * M_PI * k / N;
    const double v = d2(psi);
    if (v < bestv) {
      bestv = v;
      best = psi;
    }
  }
  double a = best - 2.0 * M_PI / N, b = best + 2.0 * M_PI / N;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = d2(c1), f2 = d2(c2);
  for (int it = 0; it < 90; ++it) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - gr * (b - a);
      f1 = d2(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + gr * (b - a);
      f2 = d2(c2);
    }
  }
  return std::sqrt(std::min(f1, f2));
}

std::vector<BoundaryPoint> boundary_geometry(const DomainSpec& domain, int samples) {
  if (samples < 8) throw ConfigError("boundary_geometry: samples must be >= 8");
  std::vector<BoundaryPoint> out;
  out.reserve(samples);
  auto curvatures_at = [&](const Vec& x) {
    BoundaryPoint bp;
    bp.x = x;
    const Vec g = domain.level_grad(x);
    const Mat h = domain.level_hess(x);
    const double gn = g.norm();
    bp.inner_normal = -g / gn;
    const int n = domain.n;
    // orthonormal tangent basis from the normal, deterministically seeded
    Mat basis(n, n - 1);
    {
      Mat q(n, n);
      q.col(0) = g / gn;
      int filled = 1;
      for (int axis = 0; axis < n && filled < n; ++axis) {
        Vec e = Vec::Zero(n);
        e(axis) = 1.0;
        for (int c = 0; c < filled; ++c) e -= q.col(c).dot(e) * q.col(c);
        if (e.norm() > 1e-8) {
          q.col(filled++) = e / e.norm();
        }
      }
      basis = q.rightCols(n - 1);
    }
    // shape operator of the level set w.r.t. the outward normal direction
    const Mat s = basis.transpose() * h * basis / gn;
    if (n == 2) {
      bp.principal_curvatures = (Vec(1) << s(0, 0)).finished();
    } else {
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()));
      bp.principal_curvatures = es.eigenvalues();
    }
    return bp;
  };

  if (domain.n == 2) {
    for (int k = 0; k < samples; ++k) {
      const double psi = 2.0 * M_PI * k / samples;
      out.push_back(curvatures_at(domain.boundary_point((Vec(1) << psi).finished())));
    }
  } else {
    // golden-angle spiral on the parameter sphere
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < samples; ++k) {
      const double zc = 1.0 - 2.0 * (k + 0.5) / samples;
      const double th = std::acos(zc);
      const double ph = ga * k;
      out.push_back(curvatures_at(domain.boundary_point((Vec(2) << th, ph).finished())));
    }
  }
  return out;
}

AdmissibilityResult admissible_domain_check(const DomainSpec& domain, double K, int samples) {
  if (K <= 0.0) throw ConfigError("admissible_domain_check: K must be positive");
  AdmissibilityResult res;
  res.margin = std::numeric_limits<double>::infinity();
  for (const auto& bp : boundary_geometry(domain, samples)) {
    Vec kk(domain.n);
    kk.head(domain.n - 1) = bp.principal_curvatures;
    kk(domain.n - 1) = K;
    res.margin = std::min(res.margin, symfun::gamma_margin(kk));
  }
  res.admissible = res.margin > 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// GridSkeleton

namespace {

constexpr int kPad = 2;  // exterior rings around the bounding box

struct IndexerND {
  std::vector<int> dims;
  std::vector<long> strides;  // last axis fastest -> flat ascending is lexicographic

  explicit IndexerND(const std::vector<int>& d) : dims(d), strides(d.size()) {
    long s = 1;
    for (int a = static_cast<int>(dims.size()) - 1; a >= 0; --a) {
      strides[a] = s;
      s *= dims[a];
    }
  }
  long total() const {
    long t = 1;
    for (int d : dims) t *= d;
    return t;
  }
  long flat(const std::vector<int>& idx) const {
    long f = 0;
    for (size_t a = 0; a < dims.size(); ++a) f += idx[a] * strides[a];
    return f;
  }
  std::vector<int> unflat(long f) const {
    std::vector<int> idx(dims.size());
    for (size_t a = 0; a < dims.size(); ++a) {
      idx[a] = static_cast<int>(f / strides[a]);
      f %= strides[a];
    }
    return idx;
  }
};

// direction table: axes, then per pair (p<q) the diagonals e_p+e_q, e_p-e_q
std::vector<std::vector<int>> make_directions(int n) {
  std::vector<std::vector<int>> dirs;
  for (int d = 0; d < n; ++d) {
    std::vector<int> v(n, 0);
    v[d] = 1;
    dirs.push_back(v);
  }
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      std::vector<int> v1(n, 0), v2(n, 0);
      v1[p] = 1;
      v1[q] = 1;
      v2[p] = 1;
      v2[q] = -1;
      dirs.push_back(v1);
      dirs.push_back(v2);
    }
  }
  return dirs;
}

}  // namespace

int GridSkeleton::diag_line(int p, int q, bool second) const {
  const int n = dim();
  int offset = n;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (a == p && b == q) return offset + (second ? 1 : 0);
      offset += 2;
    }
  }
  throw std::logic_error("diag_line: bad pair");
}

Vec GridSkeleton::node_coord(int i) const {
  IndexerND ix(dims_);
  const auto idx = ix.unflat(node_flat_[i]);
  Vec x(dim());
  for (int a = 0; a < dim(); ++a) x(a) = origin_(a) + idx[a] * h_;
  return x;
}

std::shared_ptr<const GridSkeleton> GridSkeleton::build(const DomainSpec& domain, double h) {
  if (h <= 0.0) throw ConfigError("grid spacing must be positive");
  auto skel = std::make_shared<GridSkeleton>();
  skel->domain_ = domain;
  skel->h_ = h;
  const int n = domain.n;

  const Vec lo = domain.bbox_min(), hi = domain.bbox_max();
  skel->origin_ = lo - Vec::Constant(n, kPad * h);
  skel->dims_.resize(n);
  for (int a = 0; a < n; ++a) {
    skel->dims_[a] = static_cast<int>(std::ceil((hi(a) - lo(a)) / h - 1e-12)) + 1 + 2 * kPad;
  }
  IndexerND ix(skel->dims_);
  const long total = ix.total();

  auto coord_of = [&](const std::vector<int>& idx) {
    Vec x(n);
    for (int a = 0; a < n; ++a) x(a) = skel->origin_(a) + idx[a] * h;
    return x;
  };

  std::vector<char> inside(total, 0);
  std::vector<int> compact(total, -1);
  for (long f = 0; f < total; ++f) {
    if (domain.inside(coord_of(ix.unflat(f)))) inside[f] = 1;
  }
  for (long f = 0; f < total; ++f) {
    if (inside[f]) {
      compact[f] = static_cast<int>(skel->node_flat_.size());
      skel->node_flat_.push_back(static_cast<int>(f));
    }
  }
  if (skel->node_flat_.empty()) throw ConfigError("grid resolution leaves no interior nodes");

  // resolution check: >= 3 distinct interior layers along every axis
  for (int a = 0; a < n; ++a) {
    std::set<int> layers;
    for (int fl : skel->node_flat_) layers.insert(ix.unflat(fl)[a]);
    if (static_cast<int>(layers.size()) < 3) {
      throw ConfigError("degenerate resolution: fewer than 3 interior layers along axis " +
                        std::to_string(a + 1));
    }
  }

  const auto dirs = make_directions(n);
  const int nlines = static_cast<int>(dirs.size());
  skel->lines_.resize(skel->node_flat_.size() * nlines);
  skel->klass_compact_.assign(skel->node_flat_.size(), NodeClass::Interior);

  auto find_crossing = [&](const Vec& x0, const Vec& step) {
    // level(x0) < 0, level(x0 + step) >= 0: bisect the segment
    double lo_s = 0.0, hi_s = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo_s + hi_s);
      (domain.level(x0 + mid * step) < 0.0 ? lo_s : hi_s) = mid;
    }
    return std::max(hi_s, 1e-9);
  };

  for (size_t ci = 0; ci < skel->node_flat_.size(); ++ci) {
    const auto idx = ix.unflat(skel->node_flat_[ci]);
    const Vec x0 = coord_of(idx);
    bool adjacent = false;
    for (int l = 0; l < nlines; ++l) {
      const auto& dvec = dirs[l];
      double step_len = 0.0;
      Vec step = Vec::Zero(n);
      for (int a = 0; a < n; ++a) {
        step(a) = dvec[a] * h;
        step_len += static_cast<double>(dvec[a]) * dvec[a];
      }
      step_len = std::sqrt(step_len) * h;

      auto make_arm = [&](int sgn) {
        Arm arm;
        std::vector<int> nb = idx;
        bool in_bounds = true;
        for (int a = 0; a < n; ++a) {
          nb[a] += sgn * dvec[a];
          in_bounds = in_bounds && nb[a] >= 0 && nb[a] < skel->dims_[a];
        }
        const Vec sstep = sgn * step;
        if (in_bounds && inside[ix.flat(nb)]) {
          arm.node = compact[ix.flat(nb)];
          arm.len = step_len;
        } else {
          const double s = find_crossing(x0, sstep);
          arm.node = -1;
          arm.crossing = static_cast<int>(skel->crossings_.size());
          skel->crossings_.push_back(x0 + s * sstep);
          arm.len = s * step_len;
          adjacent = true;
        }
        return arm;
      };

      LineStencil& ls = skel->lines_[ci * nlines + l];
      ls.plus = make_arm(+1);
      ls.minus = make_arm(-1);
    }
    if (adjacent) skel->klass_compact_[ci] = NodeClass::BoundaryAdjacent;
  }
  return skel;
}

void GridSkeleton::line_gradient_stencil(int i, int l, StencilEntry out[3]) const {
  const LineStencil& ls = line(i, l);
  const double ap = ls.plus.len, am = ls.minus.len;
  const double den = ap * am * (ap + am);
  out[0] = {ls.plus.node >= 0 ? ls.plus.node : -(ls.plus.crossing + 1), am * am / den};
  out[1] = {ls.minus.node >= 0 ? ls.minus.node : -(ls.minus.crossing + 1), -ap * ap / den};
  out[2] = {i, (ap * ap - am * am) / den};
}

void GridSkeleton::line_second_stencil(int i, int l, StencilEntry out[3]) const {
  const LineStencil& ls = line(i, l);
  const double ap = ls.plus.len, am = ls.minus.len;
  const double den = ap * am * (ap + am);
  out[0] = {ls.plus.node >= 0 ? ls.plus.node : -(ls.plus.crossing + 1), 2.0 * am / den};
  out[1] = {ls.minus.node >= 0 ? ls.minus.node : -(ls.minus.crossing + 1), 2.0 * ap / den};
  out[2] = {i, -2.0 * (ap + am) / den};
}

std::uint64_t GridSkeleton::content_hash() const {
  // FNV-1a over the construction-determining data
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const int kindv = static_cast<int>(domain_.kind);
  mix(&kindv, sizeof kindv);
  mix(&domain_.n, sizeof domain_.n);
  for (int i = 0; i < domain_.n; ++i) {
    const double c = domain_.center(i), a = domain_.semi_axes(i);
    mix(&c, sizeof c);
    mix(&a, sizeof a);
  }
  const double m = domain_.power();
  mix(&m, sizeof m);
  mix(&h_, sizeof h_);
  const int nn = num_nodes();
  mix(&nn, sizeof nn);
  for (int fl : node_flat_) mix(&fl, sizeof fl);
  return h;
}

// ---------------------------------------------------------------------------
// GridField

GridField::GridField(std::shared_ptr<const GridSkeleton> skel) : skel_(std::move(skel)) {
  values_ = Vec::Zero(skel_->num_nodes());
  boundary_values_ = Vec::Zero(skel_->num_crossings());
}

void GridField::fill(const std::function<double(const Vec&)>& f) {
  for (int i = 0; i < skel_->num_nodes(); ++i) values_(i) = f(skel_->node_coord(i));
  set_boundary(f);
}

void GridField::set_boundary(const std::function<double(const Vec&)>& f) {
  for (int c = 0; c < skel_->num_crossings(); ++c) {
    boundary_values_(c) = f(skel_->crossing_point(c));
  }
}

double GridField::arm_value(const Arm& arm, int /*center*/) const {
  return arm.node >= 0 ? values_(arm.node) : boundary_values_(arm.crossing);
}

namespace {

inline double line_gradient(const GridField& u, const LineStencil& ls, double u0) {
  const double ap = ls.plus.len, am = ls.minus.len;
  const double up = u.arm_value(ls.plus, 0), um = u.arm_value(ls.minus, 0);
  return (am * am * up - ap * ap * um + (ap * ap - am * am) * u0) / (ap * am * (ap + am));
}

inline double line_second(const GridField& u, const LineStencil& ls, double u0) {
  const double ap = ls.plus.len, am = ls.minus.len;
  const double up = u.arm_value(ls.plus, 0), um = u.arm_value(ls.minus, 0);
  return 2.0 * (am * up + ap * um - (ap + am) * u0) / (ap * am * (ap + am));
}

}  // namespace

Vec GridField::gradient_at(int i) const {
  const int n = skel_->dim();
  const double u0 = values_(i);
  Vec g(n);
  for (int d = 0; d < n; ++d) g(d) = line_gradient(*this, skel_->line(i, d), u0);
  return g;
}

Mat GridField::hessian_at(int i) const {
  const int n = skel_->dim();
  const double u0 = values_(i);
  Mat h(n, n);
  for (int d = 0; d < n; ++d) h(d, d) = line_second(*this, skel_->line(i, d), u0);
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      const double s1 = line_second(*this, skel_->line(i, skel_->diag_line(p, q, false)), u0);
      const double s2 = line_second(*this, skel_->line(i, skel_->diag_line(p, q, true)), u0);
      h(p, q) = h(q, p) = 0.5 * (s1 - s2);
    }
  }
  return h;
}

std::vector<Vec> fd_gradient(const GridField& u) {
  std::vector<Vec> out(u.skeleton().num_nodes());
  for (int i = 0; i < u.skeleton().num_nodes(); ++i) out[i] = u.gradient_at(i);
  return out;
}

std::vector<Mat> fd_hessian(const GridField& u) {
  std::vector<Mat> out(u.skeleton().num_nodes());
  for (int i = 0; i < u.skeleton().num_nodes(); ++i) out[i] = u.hessian_at(i);
  return out;
}

void write_csv(const GridField& u, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  const auto& sk = u.skeleton();
  const int n = sk.dim();
  for (int a = 0; a < n; ++a) std::fprintf(f, "x_%d,", a + 1);
  std::fprintf(f, "value,mask\n");
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const Vec x = sk.node_coord(i);
    for (int a = 0; a < n; ++a) std::fprintf(f, "%.17g,", x(a));
    std::fprintf(f, "%.17g,%s\n", u.values()(i),
                 sk.node_class(i) == NodeClass::Interior ? "interior" : "boundary-adjacent");
  }
  std::fclose(f);
}

GridField read_csv(std::shared_ptr<const GridSkeleton> skel, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  GridField u(skel);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError(path + ": empty file");
  const int n = skel->dim();
  int i = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (i >= skel->num_nodes()) throw ConfigError(path + ": more nodes than the grid");
    std::istringstream ss(line);
    std::string cell;
    Vec x(n);
    for (int a = 0; a < n; ++a) {
      if (!std::getline(ss, cell, ',')) throw ConfigError(path + ": short row");
      x(a) = std::stod(cell);
    }
    if (!std::getline(ss, cell, ',')) throw ConfigError(path + ": missing value");
    const double v = std::stod(cell);
    if ((x - skel->node_coord(i)).cwiseAbs().maxCoeff() > 1e-12) {
      throw ConfigError(path + ": node coordinates do not match the grid (row " +
                        std::to_string(i + 2) + ")");
    }
    u.values()(i) = v;
    ++i;
  }
  if (i != skel->num_nodes()) throw ConfigError(path + ": fewer nodes than the grid");
  return u;
}

}  // namespace etacurv::grid
