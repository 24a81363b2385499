#include "bcmlab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <bcm/error.hpp>
#include <bcm/format.hpp>

namespace bcmlab {
namespace {

using bcm::Point;

std::string real_text(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Reader {
 public:
  explicit Reader(std::string name) : name_(std::move(name)) {}

  [[noreturn]] void fail(const YAML::Mark& m, const std::string& key, const std::string& msg) const {
    bcm::fail_validation(bcm::format("%s:%d:%d: %s: %s", name_.c_str(), m.line + 1, m.column + 1, key.c_str(),
                                     msg.c_str()));
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    auto it = marks_.find(key);
    fail(it != marks_.end() ? it->second : YAML::Mark(), key, msg);
  }

  void remember(const std::string& key, const YAML::Node& n) { marks_[key] = n.Mark(); }

  // Rejects keys outside `allowed`.
  void keys(const YAML::Node& map, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!map.IsMap()) fail(map.Mark(), path, "expected a mapping");
    remember(path, map);
    for (auto it = map.begin(); it != map.end(); ++it) {
      const auto k = it->first.as<std::string>();
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
        fail(it->first.Mark(), join(path, k), "unknown key");
    }
  }

  YAML::Node child(const YAML::Node& map, const std::string& path, const char* key, bool required) {
    YAML::Node n = map[key];
    if (!n) {
      if (required) fail(map.Mark(), join(path, key), "missing required key");
      return n;
    }
    remember(join(path, key), n);
    return n;
  }

  double real(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(n.Mark(), key, "expected a real number");
    const auto s = n.Scalar();
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      fail(n.Mark(), key, "expected a real number, got '" + s + "'");
    return v;
  }

  long long integer(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(n.Mark(), key, "expected an integer");
    const auto s = n.Scalar();
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(n.Mark(), key, "expected an integer, got '" + s + "'");
    return v;
  }

  bool boolean(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar() || (n.Scalar() != "true" && n.Scalar() != "false"))
      fail(n.Mark(), key, "expected true or false");
    return n.Scalar() == "true";
  }

  std::string text(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar() || n.Scalar().empty()) fail(n.Mark(), key, "expected a non-empty string");
    return n.Scalar();
  }

  std::vector<double> reals(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence()) fail(n.Mark(), key, "expected a list of reals");
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(real(n[i], bcm::format("%s[%zu]", key.c_str(), i)));
    return out;
  }

  Point point(const YAML::Node& n, const std::string& key, int dim) {
    auto v = reals(n, key);
    if (static_cast<int>(v.size()) != dim) fail(n.Mark(), key, bcm::format("expected %d coordinates", dim));
    return {v[0], dim > 1 ? v[1] : 0.0};
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::string name_;
  std::map<std::string, YAML::Mark> marks_;
};

double box_point_distance(Point lo, Point hi, Point x) {
  const double dx = std::max({lo.x - x.x, 0.0, x.x - hi.x});
  const double dy = std::max({lo.y - x.y, 0.0, x.y - hi.y});
  return std::hypot(dx, dy);
}

double region_point_distance(const RegionSpec& r, Point x) {
  if (r.shape == RegionSpec::Shape::ball) return std::max(0.0, bcm::norm(x - r.center) - r.radius);
  return box_point_distance(r.lo, r.hi, x);
}

std::vector<Point> corners(const RegionSpec& k, int dim) {
  if (dim == 1) return {k.lo, k.hi};
  return {k.lo, k.hi, {k.lo.x, k.hi.y}, {k.hi.x, k.lo.y}};
}

// dist(K, omega): both sets convex, so the gap is the box gap (box omega) or
// the centre distance minus the radius (ball omega).
double region_gap(const RegionSpec& k, const RegionSpec& omega) {
  if (omega.shape == RegionSpec::Shape::ball)
    return std::max(0.0, box_point_distance(k.lo, k.hi, omega.center) - omega.radius);
  const double gx = std::max({omega.lo.x - k.hi.x, 0.0, k.lo.x - omega.hi.x});
  const double gy = std::max({omega.lo.y - k.hi.y, 0.0, k.lo.y - omega.hi.y});
  return std::hypot(gx, gy);
}

RegionSpec read_region(Reader& rd, const YAML::Node& n, const std::string& key, int dim, bool allow_ball) {
  RegionSpec r;
  if (!n.IsMap()) rd.fail(n.Mark(), key, "expected a mapping");
  if (n["ball"]) {
    if (!allow_ball) rd.fail(n.Mark(), key, "must be a box");
    rd.keys(n, key, {"ball"});
    const auto b = rd.child(n, key, "ball", true);
    const auto bk = key + ".ball";
    rd.keys(b, bk, {"center", "radius"});
    r.shape = RegionSpec::Shape::ball;
    r.center = rd.point(rd.child(b, bk, "center", true), bk + ".center", dim);
    r.radius = rd.real(rd.child(b, bk, "radius", true), bk + ".radius");
    if (!(r.radius > 0)) rd.fail(bk + ".radius", "must be positive");
    return r;
  }
  YAML::Node b = n;
  std::string bk = key;
  if (n["box"]) {
    rd.keys(n, key, {"box"});
    b = rd.child(n, key, "box", true);
    bk = key + ".box";
  }
  rd.keys(b, bk, {"lo", "hi"});
  r.lo = rd.point(rd.child(b, bk, "lo", true), bk + ".lo", dim);
  r.hi = rd.point(rd.child(b, bk, "hi", true), bk + ".hi", dim);
  if (!(r.lo.x < r.hi.x) || (dim > 1 && !(r.lo.y < r.hi.y))) rd.fail(bk + ".hi", "must exceed lo on every axis");
  return r;
}

void require_positive(Reader& rd, const std::vector<double>& v, const std::string& key) {
  if (v.empty()) rd.fail(key, "schedule must be nonempty");
  for (double x : v)
    if (!(x > 0)) rd.fail(key, "entries must be positive");
}

ExperimentConfig parse_root(const YAML::Node& root, const std::string& name) {
  Reader rd(name);
  ExperimentConfig c;
  c.path = name;
  if (!root.IsMap()) rd.fail(root.Mark(), "<root>", "expected a mapping of sections");
  rd.keys(root, "", {"seed", "geometry", "time", "solver", "potentials", "run", "control", "probe",
                     "reconstruction", "sweep"});

  if (auto n = rd.child(root, "", "seed", false)) {
    const auto v = rd.integer(n, "seed");
    if (v < 0) rd.fail("seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(v);
  }

  // geometry
  {
    const auto g = rd.child(root, "", "geometry", true);
    rd.keys(g, "geometry", {"dim", "omega", "k", "padding"});
    if (auto n = rd.child(g, "geometry", "dim", false)) c.dim = static_cast<int>(rd.integer(n, "geometry.dim"));
    if (c.dim != 1 && c.dim != 2) rd.fail("geometry.dim", "must be 1 or 2");
    c.omega = read_region(rd, rd.child(g, "geometry", "omega", true), "geometry.omega", c.dim, true);
    c.k = read_region(rd, rd.child(g, "geometry", "k", true), "geometry.k", c.dim, false);
    if (auto n = rd.child(g, "geometry", "padding", false)) {
      c.padding = rd.real(n, "geometry.padding");
      if (!(*c.padding >= 0)) rd.fail("geometry.padding", "must be non-negative");
    }
  }

  // time
  {
    const auto t = rd.child(root, "", "time", true);
    rd.keys(t, "time", {"T", "cfl", "steps"});
    c.T = rd.real(rd.child(t, "time", "T", true), "time.T");
    if (!(c.T > 0)) rd.fail("time.T", "must be positive");
    if (auto n = rd.child(t, "time", "cfl", false)) c.cfl = rd.real(n, "time.cfl");
    if (!(c.cfl > 0 && c.cfl <= 1)) rd.fail("time.cfl", "must lie in (0, 1]");
    if (auto n = rd.child(t, "time", "steps", false)) {
      const auto s = rd.integer(n, "time.steps");
      if (s <= 0) rd.fail("time.steps", "must be positive");
      if (s % 2 != 0) rd.fail("time.steps", bcm::format("must be even, got %lld", s));
      c.steps = static_cast<int>(s);
    }
  }

  // solver
  {
    const auto s = rd.child(root, "", "solver", true);
    rd.keys(s, "solver", {"h", "storage"});
    c.h = rd.real(rd.child(s, "solver", "h", true), "solver.h");
    if (!(c.h > 0)) rd.fail("solver.h", "must be positive");
    if (auto n = rd.child(s, "solver", "storage", false)) {
      const auto v = rd.text(n, "solver.storage");
      if (v == "none") c.storage = bcm::Storage::none;
      else if (v == "selected") c.storage = bcm::Storage::selected;
      else if (v == "all") c.storage = bcm::Storage::all;
      else rd.fail("solver.storage", "expected none, selected or all");
    }
    if (c.steps) {
      const double dt = c.T / *c.steps;
      if (dt > c.h / std::sqrt(static_cast<double>(c.dim)) * (1 + 1e-12))
        rd.fail("time.steps", "violates the CFL condition dt <= h / sqrt(dim)");
    }
  }

  // potentials
  {
    const auto p = rd.child(root, "", "potentials", true);
    if (!p.IsSequence() || p.size() == 0) rd.fail(p.Mark(), "potentials", "expected a nonempty list");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto key = bcm::format("potentials[%zu]", i);
      const auto e = p[i];
      rd.keys(e, key, {"id", "bumps", "bound", "smoothness"});
      PotentialSpec ps;
      ps.id = rd.text(rd.child(e, key, "id", true), key + ".id");
      if (!ids.insert(ps.id).second) rd.fail(key + ".id", "duplicate id '" + ps.id + "'");
      if (auto b = rd.child(e, key, "bumps", false)) {
        if (!b.IsSequence()) rd.fail(b.Mark(), key + ".bumps", "expected a list");
        for (std::size_t j = 0; j < b.size(); ++j) {
          const auto bk = bcm::format("%s.bumps[%zu]", key.c_str(), j);
          rd.keys(b[j], bk, {"center", "width", "amplitude"});
          bcm::GaussianBump g;
          g.center = rd.point(rd.child(b[j], bk, "center", true), bk + ".center", c.dim);
          g.width = rd.real(rd.child(b[j], bk, "width", true), bk + ".width");
          g.amplitude = rd.real(rd.child(b[j], bk, "amplitude", true), bk + ".amplitude");
          if (!(g.width > 0)) rd.fail(bk + ".width", "must be positive");
          ps.bumps.push_back(g);
        }
      }
      if (auto n = rd.child(e, key, "bound", false)) {
        ps.bound = rd.real(n, key + ".bound");
        if (!(*ps.bound > 0)) rd.fail(key + ".bound", "must be positive");
      }
      if (auto n = rd.child(e, key, "smoothness", false)) {
        ps.smoothness = static_cast<int>(rd.integer(n, key + ".smoothness"));
        if (ps.smoothness < 0) rd.fail(key + ".smoothness", "must be non-negative");
      }
      c.potentials.push_back(std::move(ps));
    }
  }

  auto has_id = [&](const std::string& id) {
    return std::any_of(c.potentials.begin(), c.potentials.end(), [&](const auto& p) { return p.id == id; });
  };

  // run
  c.reference = c.potentials.front().id;
  c.data = c.potentials.size() > 1 ? c.potentials[1].id : c.reference;
  c.source.center = c.omega.shape == RegionSpec::Shape::ball ? c.omega.center : 0.5 * (c.omega.lo + c.omega.hi);
  if (auto r = rd.child(root, "", "run", false)) {
    rd.keys(r, "run", {"reference", "data", "out", "source", "random_pairs", "power_iters", "power_tol"});
    if (auto n = rd.child(r, "run", "reference", false)) c.reference = rd.text(n, "run.reference");
    if (auto n = rd.child(r, "run", "data", false)) c.data = rd.text(n, "run.data");
    if (auto n = rd.child(r, "run", "out", false)) c.out = rd.text(n, "run.out");
    if (auto s = rd.child(r, "run", "source", false)) {
      rd.keys(s, "run.source", {"center", "radius", "t_center", "t_width"});
      if (auto n = rd.child(s, "run.source", "center", false)) c.source.center = rd.point(n, "run.source.center", c.dim);
      if (auto n = rd.child(s, "run.source", "radius", false)) c.source.radius = rd.real(n, "run.source.radius");
      if (auto n = rd.child(s, "run.source", "t_center", false)) c.source.t_center = rd.real(n, "run.source.t_center");
      if (auto n = rd.child(s, "run.source", "t_width", false)) c.source.t_width = rd.real(n, "run.source.t_width");
      if (!(c.source.radius > 0)) rd.fail("run.source.radius", "must be positive");
      if (!(c.source.t_width > 0)) rd.fail("run.source.t_width", "must be positive");
      if (!(c.source.t_center - c.source.t_width >= 0)) rd.fail("run.source.t_center", "pulse must start at t >= 0");
    }
    if (auto n = rd.child(r, "run", "random_pairs", false)) c.random_pairs = static_cast<int>(rd.integer(n, "run.random_pairs"));
    if (auto n = rd.child(r, "run", "power_iters", false)) c.power_iters = static_cast<int>(rd.integer(n, "run.power_iters"));
    if (auto n = rd.child(r, "run", "power_tol", false)) c.power_tol = rd.real(n, "run.power_tol");
    if (c.random_pairs < 1) rd.fail("run.random_pairs", "must be at least 1");
    if (c.power_iters < 1) rd.fail("run.power_iters", "must be at least 1");
    if (!(c.power_tol > 0)) rd.fail("run.power_tol", "must be positive");
  }
  if (!has_id(c.reference)) rd.fail("run.reference", "unknown potential id '" + c.reference + "'");
  if (!has_id(c.data)) rd.fail("run.data", "unknown potential id '" + c.data + "'");

  // control
  {
    const auto s = rd.child(root, "", "control", true);
    rd.keys(s, "control", {"alphas", "eps", "max_iters", "eval_time", "influence", "cap_eta", "ball_r"});
    c.alphas = rd.reals(rd.child(s, "control", "alphas", true), "control.alphas");
    require_positive(rd, c.alphas, "control.alphas");
    for (std::size_t i = 1; i < c.alphas.size(); ++i)
      if (!(c.alphas[i] < c.alphas[i - 1])) rd.fail("control.alphas", "must be strictly decreasing");
    c.eps = rd.reals(rd.child(s, "control", "eps", true), "control.eps");
    require_positive(rd, c.eps, "control.eps");
    for (double e : c.eps)
      if (!(e < 1)) rd.fail("control.eps", "entries must lie in (0, 1)");
    if (auto n = rd.child(s, "control", "max_iters", false)) c.max_iters = static_cast<int>(rd.integer(n, "control.max_iters"));
    if (c.max_iters < 1) rd.fail("control.max_iters", "must be at least 1");
    c.eval_time = rd.real(rd.child(s, "control", "eval_time", true), "control.eval_time");
    c.influence = rd.real(rd.child(s, "control", "influence", true), "control.influence");
    if (!(c.eval_time > 0 && c.eval_time <= c.T / 2)) rd.fail("control.eval_time", "must lie in (0, T/2]");
    if (!(c.influence > 0 && c.influence <= c.eval_time)) rd.fail("control.influence", "must lie in (0, eval_time]");
    if (auto n = rd.child(s, "control", "cap_eta", false)) c.cap_eta = rd.real(n, "control.cap_eta");
    if (auto n = rd.child(s, "control", "ball_r", false)) c.ball_r = rd.real(n, "control.ball_r");
    if (!(c.cap_eta > 0)) rd.fail("control.cap_eta", "must be positive");
    if (!(c.ball_r > 0)) rd.fail("control.ball_r", "must be positive");
  }

  // probe
  {
    const auto s = rd.child(root, "", "probe", true);
    rd.keys(s, "probe", {"sigmas", "order", "delta", "eta", "x0", "f_eta", "f_delta"});
    c.sigmas = rd.reals(rd.child(s, "probe", "sigmas", true), "probe.sigmas");
    require_positive(rd, c.sigmas, "probe.sigmas");
    if (auto n = rd.child(s, "probe", "order", false)) c.order = static_cast<int>(rd.integer(n, "probe.order"));
    if (c.order < 0 || c.order > 4) rd.fail("probe.order", "must lie in 0..4");
    if (auto n = rd.child(s, "probe", "delta", false)) c.delta = rd.real(n, "probe.delta");
    if (!(c.delta >= 0)) rd.fail("probe.delta", "must be non-negative (0 picks the default)");
    if (auto n = rd.child(s, "probe", "eta", false)) c.eta = rd.real(n, "probe.eta");
    if (!(c.eta >= 2 * c.h)) rd.fail("probe.eta", "must be at least 2 h");
    if (auto n = rd.child(s, "probe", "x0", false)) c.x0 = rd.point(n, "probe.x0", c.dim);
    if (auto n = rd.child(s, "probe", "f_eta", false)) c.f_eta = rd.real(n, "probe.f_eta");
    if (auto n = rd.child(s, "probe", "f_delta", false)) c.f_delta = rd.real(n, "probe.f_delta");
    if (!(c.f_eta >= 2 * c.h)) rd.fail("probe.f_eta", "must be at least 2 h");
    if (!(c.f_delta >= 0)) rd.fail("probe.f_delta", "must be non-negative");
    if (c.x0 && region_point_distance(c.omega, *c.x0) <= 0) rd.fail("probe.x0", "must lie outside omega");
  }

  // reconstruction
  if (auto s = rd.child(root, "", "reconstruction", false)) {
    rd.keys(s, "reconstruction", {"mode", "stride", "time_spacing", "alpha", "guard_tol", "max_reject"});
    if (auto n = rd.child(s, "reconstruction", "mode", false)) {
      const auto v = rd.text(n, "reconstruction.mode");
      if (v == "self_modulus") c.mode = bcm::RecoveryMode::self_modulus;
      else if (v == "go_probe") c.mode = bcm::RecoveryMode::go_probe;
      else rd.fail("reconstruction.mode", "expected self_modulus or go_probe");
    }
    if (auto n = rd.child(s, "reconstruction", "stride", false)) c.stride = static_cast<int>(rd.integer(n, "reconstruction.stride"));
    if (auto n = rd.child(s, "reconstruction", "time_spacing", false))
      c.time_spacing = static_cast<int>(rd.integer(n, "reconstruction.time_spacing"));
    if (auto n = rd.child(s, "reconstruction", "alpha", false)) c.recon_alpha = rd.real(n, "reconstruction.alpha");
    if (auto n = rd.child(s, "reconstruction", "guard_tol", false)) c.guard_tol = rd.real(n, "reconstruction.guard_tol");
    if (auto n = rd.child(s, "reconstruction", "max_reject", false)) c.max_reject = rd.real(n, "reconstruction.max_reject");
    if (c.stride < 1) rd.fail("reconstruction.stride", "must be at least 1");
    if (c.time_spacing < 1) rd.fail("reconstruction.time_spacing", "must be at least 1");
    if (!(c.recon_alpha > 0)) rd.fail("reconstruction.alpha", "must be positive");
    if (!(c.guard_tol >= 0 && c.guard_tol < 0.5)) rd.fail("reconstruction.guard_tol", "must lie in [0, 1/2)");
    if (!(c.max_reject >= 0 && c.max_reject <= 1)) rd.fail("reconstruction.max_reject", "must lie in [0, 1]");
  }

  // sweep
  if (auto s = rd.child(root, "", "sweep", false)) {
    rd.keys(s, "sweep", {"pairs", "reconstruct"});
    if (auto p = rd.child(s, "sweep", "pairs", false)) {
      if (!p.IsSequence()) rd.fail(p.Mark(), "sweep.pairs", "expected a list of [reference, data] id pairs");
      for (std::size_t i = 0; i < p.size(); ++i) {
        const auto key = bcm::format("sweep.pairs[%zu]", i);
        rd.remember(key, p[i]);
        if (!p[i].IsSequence() || p[i].size() != 2) rd.fail(key, "expected [reference, data]");
        auto a = rd.text(p[i][0], key), b = rd.text(p[i][1], key);
        if (!has_id(a) || !has_id(b)) rd.fail(key, "unknown potential id");
        c.pairs.emplace_back(std::move(a), std::move(b));
      }
      if (c.pairs.empty()) rd.fail("sweep.pairs", "schedule must be nonempty");
    }
    if (auto n = rd.child(s, "sweep", "reconstruct", false)) c.sweep_reconstruct = rd.boolean(n, "sweep.reconstruct");
  }
  if (c.pairs.empty()) {
    for (const auto& p : c.potentials)
      if (p.id != c.reference) c.pairs.emplace_back(c.reference, p.id);
  }

  // geometric invariants
  const double gap = region_gap(c.k, c.omega);
  if (!(gap > 0)) rd.fail("geometry.k", "must lie at positive distance from omega");
  double reach = 0;
  for (Point p : corners(c.k, c.dim)) reach = std::max(reach, region_point_distance(c.omega, p));
  if (!(c.T > 2 * reach))
    rd.fail("time.T", bcm::format("must exceed 2 L(K, omega) = %s", real_text(2 * reach).c_str()));
  return c;
}

void emit_point(YAML::Emitter& e, Point p, int dim) {
  e << YAML::Flow << YAML::BeginSeq << real_text(p.x);
  if (dim > 1) e << real_text(p.y);
  e << YAML::EndSeq;
}

void emit_reals(YAML::Emitter& e, const std::vector<double>& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << real_text(x);
  e << YAML::EndSeq;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& ex) {
    bcm::fail_validation(
        bcm::format("%s:%d:%d: syntax: %s", name.c_str(), ex.mark.line + 1, ex.mark.column + 1, ex.msg.c_str()));
  }
  try {
    return parse_root(root, name);
  } catch (const YAML::Exception& ex) {
    bcm::fail_validation(
        bcm::format("%s:%d:%d: schema: %s", name.c_str(), ex.mark.line + 1, ex.mark.column + 1, ex.msg.c_str()));
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bcm::fail_validation(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string emit_canonical(const ExperimentConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << c.seed;

  e << YAML::Key << "geometry" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dim" << YAML::Value << c.dim;
  e << YAML::Key << "omega" << YAML::Value << YAML::BeginMap;
  if (c.omega.shape == RegionSpec::Shape::ball) {
    e << YAML::Key << "ball" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "center" << YAML::Value;
    emit_point(e, c.omega.center, c.dim);
    e << YAML::Key << "radius" << YAML::Value << real_text(c.omega.radius) << YAML::EndMap;
  } else {
    e << YAML::Key << "box" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "lo" << YAML::Value;
    emit_point(e, c.omega.lo, c.dim);
    e << YAML::Key << "hi" << YAML::Value;
    emit_point(e, c.omega.hi, c.dim);
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  e << YAML::Key << "k" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "lo" << YAML::Value;
  emit_point(e, c.k.lo, c.dim);
  e << YAML::Key << "hi" << YAML::Value;
  emit_point(e, c.k.hi, c.dim);
  e << YAML::EndMap;
  if (c.padding) e << YAML::Key << "padding" << YAML::Value << real_text(*c.padding);
  e << YAML::EndMap;

  e << YAML::Key << "time" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "T" << YAML::Value << real_text(c.T);
  e << YAML::Key << "cfl" << YAML::Value << real_text(c.cfl);
  if (c.steps) e << YAML::Key << "steps" << YAML::Value << *c.steps;
  e << YAML::EndMap;

  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "h" << YAML::Value << real_text(c.h);
  e << YAML::Key << "storage" << YAML::Value
    << (c.storage == bcm::Storage::none ? "none" : c.storage == bcm::Storage::selected ? "selected" : "all");
  e << YAML::EndMap;

  e << YAML::Key << "potentials" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : c.potentials) {
    e << YAML::BeginMap;
    e << YAML::Key << "id" << YAML::Value << p.id;
    e << YAML::Key << "bumps" << YAML::Value << YAML::BeginSeq;
    for (const auto& b : p.bumps) {
      e << YAML::Flow << YAML::BeginMap;
      e << YAML::Key << "center" << YAML::Value;
      emit_point(e, b.center, c.dim);
      e << YAML::Key << "width" << YAML::Value << real_text(b.width);
      e << YAML::Key << "amplitude" << YAML::Value << real_text(b.amplitude);
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
    if (p.bound) e << YAML::Key << "bound" << YAML::Value << real_text(*p.bound);
    e << YAML::Key << "smoothness" << YAML::Value << p.smoothness;
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;

  e << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "reference" << YAML::Value << c.reference;
  e << YAML::Key << "data" << YAML::Value << c.data;
  e << YAML::Key << "out" << YAML::Value << c.out;
  e << YAML::Key << "source" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "center" << YAML::Value;
  emit_point(e, c.source.center, c.dim);
  e << YAML::Key << "radius" << YAML::Value << real_text(c.source.radius);
  e << YAML::Key << "t_center" << YAML::Value << real_text(c.source.t_center);
  e << YAML::Key << "t_width" << YAML::Value << real_text(c.source.t_width);
  e << YAML::EndMap;
  e << YAML::Key << "random_pairs" << YAML::Value << c.random_pairs;
  e << YAML::Key << "power_iters" << YAML::Value << c.power_iters;
  e << YAML::Key << "power_tol" << YAML::Value << real_text(c.power_tol);
  e << YAML::EndMap;

  e << YAML::Key << "control" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "alphas" << YAML::Value;
  emit_reals(e, c.alphas);
  e << YAML::Key << "eps" << YAML::Value;
  emit_reals(e, c.eps);
  e << YAML::Key << "max_iters" << YAML::Value << c.max_iters;
  e << YAML::Key << "eval_time" << YAML::Value << real_text(c.eval_time);
  e << YAML::Key << "influence" << YAML::Value << real_text(c.influence);
  e << YAML::Key << "cap_eta" << YAML::Value << real_text(c.cap_eta);
  e << YAML::Key << "ball_r" << YAML::Value << real_text(c.ball_r);
  e << YAML::EndMap;

  e << YAML::Key << "probe" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "sigmas" << YAML::Value;
  emit_reals(e, c.sigmas);
  e << YAML::Key << "order" << YAML::Value << c.order;
  e << YAML::Key << "delta" << YAML::Value << real_text(c.delta);
  e << YAML::Key << "eta" << YAML::Value << real_text(c.eta);
  if (c.x0) {
    e << YAML::Key << "x0" << YAML::Value;
    emit_point(e, *c.x0, c.dim);
  }
  e << YAML::Key << "f_eta" << YAML::Value << real_text(c.f_eta);
  e << YAML::Key << "f_delta" << YAML::Value << real_text(c.f_delta);
  e << YAML::EndMap;

  e << YAML::Key << "reconstruction" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "mode" << YAML::Value << (c.mode == bcm::RecoveryMode::self_modulus ? "self_modulus" : "go_probe");
  e << YAML::Key << "stride" << YAML::Value << c.stride;
  e << YAML::Key << "time_spacing" << YAML::Value << c.time_spacing;
  e << YAML::Key << "alpha" << YAML::Value << real_text(c.recon_alpha);
  e << YAML::Key << "guard_tol" << YAML::Value << real_text(c.guard_tol);
  e << YAML::Key << "max_reject" << YAML::Value << real_text(c.max_reject);
  e << YAML::EndMap;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "pairs" << YAML::Value << YAML::BeginSeq;
  for (const auto& [a, b] : c.pairs) e << YAML::Flow << YAML::BeginSeq << a << b << YAML::EndSeq;
  e << YAML::EndSeq;
  e << YAML::Key << "reconstruct" << YAML::Value << YAML::TrueFalseBool << c.sweep_reconstruct;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace bcmlab
