#pragma once

#include "hypolab/bridge.hpp"
#include "hypolab/config.hpp"
#include "hypolab/error.hpp"
#include "hypolab/kernel.hpp"
#include "hypolab/metric.hpp"
#include "hypolab/models.hpp"
#include "hypolab/sde.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace hypolab::harness {

using json = nlohmann::json;

enum ExitStatus : int { kOk = 0, kAssertionFailed = 1, kConfigInvalid = 2, kInfeasible = 3 };

// ---------------------------------------------------------------------------
// Output

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
  return a;
}

/// Finite doubles as numbers, the rest as strings ("inf", "nan").
inline json number(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

class Report {
 public:
  void record(json j) { records_.push_back(std::move(j)); }

  void csv_header(const std::string& file, std::vector<std::string> header) {
    auto& c = csv_[file];
    if (c.header.empty()) c.header = std::move(header);
  }
  void csv_row(const std::string& file, std::vector<std::string> row) { csv_[file].rows.push_back(std::move(row)); }

  void note(std::string line) { notes_.push_back(std::move(line)); }

  void check(std::string name, bool pass, std::string detail) {
    assertions_.push_back({std::move(name), pass, std::move(detail)});
  }

  bool all_pass() const {
    for (const auto& a : assertions_)
      if (!a.pass) return false;
    return true;
  }
  const std::vector<Assertion>& assertions() const { return assertions_; }
  const std::vector<json>& records() const { return records_; }

  std::string jsonl() const {
    std::string out;
    for (const auto& r : records_) out += r.dump() + "\n";
    return out;
  }

  void write(const std::filesystem::path& dir, const std::string& header) const {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "results.jsonl") << jsonl();
    for (const auto& [name, c] : csv_) {
      std::ofstream f(dir / name);
      write_csv_line(f, c.header);
      for (const auto& r : c.rows) write_csv_line(f, r);
    }
    std::ofstream s(dir / "summary.txt");
    s << header << "\n\n";
    for (const auto& n : notes_) s << n << "\n";
    if (!notes_.empty()) s << "\n";
    for (const auto& a : assertions_) s << (a.pass ? "PASS " : "FAIL ") << a.name << "  " << a.detail << "\n";
    s << "\nstatus: " << (all_pass() ? "all assertions passed" : "assertion failures") << "\n";
  }

 private:
  struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
  };
  static void write_csv_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << "\n";
  }
  std::vector<json> records_;
  std::map<std::string, Csv> csv_;
  std::vector<std::string> notes_;
  std::vector<Assertion> assertions_;
};

// ---------------------------------------------------------------------------
// Typed config access; every key read is marked, and finish() rejects the rest.

class Reader {
 public:
  explicit Reader(const Config& cfg) : cfg_(cfg) {}

  const Config& config() const { return cfg_; }

  bool has(const std::string& sect, const std::string& key) const {
    const auto* s = cfg_.section(sect);
    return s && s->find(key);
  }
  bool has_section(const std::string& sect) const { return cfg_.section(sect) != nullptr; }

  const ConfigValue* get(const std::string& sect, const std::string& key) {
    const auto* s = cfg_.section(sect);
    if (!s) return nullptr;
    const auto* e = s->find(key);
    if (!e) return nullptr;
    used_.insert(sect + "\n" + key);
    return &e->value;
  }

  [[noreturn]] static void fail(const ConfigValue* v, const std::string& sect, const std::string& key,
                                const std::string& msg) {
    throw ConfigError(v ? v->line : 0, field(sect, key), msg);
  }
  static std::string field(const std::string& sect, const std::string& key) {
    return sect.empty() ? key : "[" + sect + "] " + key;
  }

  std::optional<double> opt_real(const std::string& sect, const std::string& key) {
    const auto* v = get(sect, key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(v, sect, key, "expected a number");
    return v->number();
  }
  double real(const std::string& sect, const std::string& key, std::optional<double> def = std::nullopt) {
    if (auto v = opt_real(sect, key)) return *v;
    if (!def) fail(nullptr, sect, key, "required key is missing");
    return *def;
  }
  double positive(const std::string& sect, const std::string& key, std::optional<double> def = std::nullopt) {
    const double v = real(sect, key, def);
    if (!(v > 0)) fail(get(sect, key), sect, key, "must be positive");
    return v;
  }
  std::int64_t integer(const std::string& sect, const std::string& key, std::optional<std::int64_t> def = std::nullopt) {
    const auto* v = get(sect, key);
    if (!v) {
      if (!def) fail(nullptr, sect, key, "required key is missing");
      return *def;
    }
    if (!v->is_int()) fail(v, sect, key, "expected an integer");
    return std::get<std::int64_t>(v->data);
  }
  std::int64_t count(const std::string& sect, const std::string& key, std::optional<std::int64_t> def = std::nullopt) {
    const auto v = integer(sect, key, def);
    if (v <= 0) fail(get(sect, key), sect, key, "must be a positive integer");
    return v;
  }
  bool flag(const std::string& sect, const std::string& key, bool def) {
    const auto* v = get(sect, key);
    if (!v) return def;
    if (!v->is_bool()) fail(v, sect, key, "expected true or false");
    return std::get<bool>(v->data);
  }
  std::optional<std::string> opt_text(const std::string& sect, const std::string& key) {
    const auto* v = get(sect, key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(v, sect, key, "expected a string");
    return std::get<std::string>(v->data);
  }
  std::string text(const std::string& sect, const std::string& key, std::optional<std::string> def = std::nullopt) {
    if (auto v = opt_text(sect, key)) return *v;
    if (!def) fail(nullptr, sect, key, "required key is missing");
    return *def;
  }
  std::optional<std::vector<double>> opt_reals(const std::string& sect, const std::string& key) {
    const auto* v = get(sect, key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail(v, sect, key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v->array()) {
      if (!e.is_number()) fail(v, sect, key, "expected an array of numbers");
      out.push_back(e.number());
    }
    return out;
  }
  std::optional<Vec> opt_point(const std::string& sect, const std::string& key, int dim) {
    const auto r = opt_reals(sect, key);
    if (!r) return std::nullopt;
    if (static_cast<int>(r->size()) != dim)
      fail(get(sect, key), sect, key, "expected " + std::to_string(dim) + " coordinates");
    Vec p(dim);
    for (int i = 0; i < dim; ++i) p(i) = (*r)[static_cast<size_t>(i)];
    return p;
  }
  Vec point(const std::string& sect, const std::string& key, int dim) {
    if (auto p = opt_point(sect, key, dim)) return *p;
    fail(nullptr, sect, key, "required key is missing");
  }
  /// Positive, strictly decreasing, at least min_size entries.
  std::vector<double> t_grid(const std::string& sect, const std::string& key, std::vector<double> def,
                             std::size_t min_size = 3) {
    auto g = opt_reals(sect, key).value_or(std::move(def));
    const auto* v = get(sect, key);
    if (g.size() < min_size) fail(v, sect, key, "needs at least " + std::to_string(min_size) + " entries");
    for (size_t i = 0; i < g.size(); ++i) {
      if (!(g[i] > 0)) fail(v, sect, key, "entries must be positive");
      if (i && !(g[i] < g[i - 1])) fail(v, sect, key, "must be strictly decreasing");
    }
    return g;
  }

  /// Rejects keys and sections that no handler read.
  void finish() const {
    for (const auto& s : cfg_.sections) {
      for (const auto& e : s.entries)
        if (!used_.count(s.name + "\n" + e.key))
          throw ConfigError(e.value.line, field(s.name, e.key), "unknown key");
      if (s.entries.empty() && !s.name.empty()) throw ConfigError(s.line, "[" + s.name + "]", "empty or unknown section");
    }
  }

 private:
  const Config& cfg_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Models from config

/// "c x1^a x2^b + ..." with optional '*', variables x1..x8 (x, y, z alias
/// x1, x2, x3).
inline Polynomial parse_polynomial(const std::string& text, int dim) {
  Polynomial p;
  size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  auto bad = [&](const std::string& why) -> ArgumentError {
    return ArgumentError("polynomial '" + text + "': " + why);
  };
  skip();
  if (i == text.size()) throw bad("empty");
  bool first = true;
  while (i < text.size()) {
    double sign = 1;
    skip();
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      sign = text[i] == '-' ? -1 : 1;
      ++i;
    } else if (!first) {
      throw bad("expected '+' or '-'");
    }
    first = false;
    Polynomial::Term term;
    term.coefficient = sign;
    term.exponents.assign(static_cast<size_t>(dim), 0);
    bool any = false;
    for (;;) {
      skip();
      if (i >= text.size() || text[i] == '+' || text[i] == '-') break;
      if (text[i] == '*') {
        ++i;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.') {
        double c = 0;
        const auto r = std::from_chars(text.data() + i, text.data() + text.size(), c);
        if (r.ec != std::errc()) throw bad("bad number");
        i = static_cast<size_t>(r.ptr - text.data());
        term.coefficient *= c;
        any = true;
        continue;
      }
      int var = -1;
      if (text[i] == 'x' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
        ++i;
        int k = 0;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) k = 10 * k + (text[i++] - '0');
        var = k - 1;
      } else if (text[i] == 'x' || text[i] == 'y' || text[i] == 'z') {
        var = text[i] == 'x' ? 0 : (text[i] == 'y' ? 1 : 2);
        ++i;
      } else {
        throw bad(std::string("unexpected '") + text[i] + "'");
      }
      if (var < 0 || var >= dim) throw bad("variable out of range for dimension " + std::to_string(dim));
      int e = 1;
      skip();
      if (i < text.size() && text[i] == '^') {
        ++i;
        skip();
        const auto r = std::from_chars(text.data() + i, text.data() + text.size(), e);
        if (r.ec != std::errc() || e < 0) throw bad("bad exponent");
        i = static_cast<size_t>(r.ptr - text.data());
      }
      term.exponents[static_cast<size_t>(var)] += e;
      any = true;
    }
    if (!any) throw bad("dangling sign");
    p.terms.push_back(std::move(term));
  }
  return p;
}

inline std::vector<Polynomial> polynomial_list(Reader& r, const std::string& key, int dim) {
  const auto* v = r.get("model", key);
  if (!v->is_array() || static_cast<int>(v->array().size()) != dim)
    Reader::fail(v, "model", key, "expected " + std::to_string(dim) + " polynomial strings");
  std::vector<Polynomial> out;
  for (const auto& c : v->array()) {
    if (!c.is_string() && !c.is_number()) Reader::fail(v, "model", key, "components must be strings");
    const std::string text = c.is_string() ? std::get<std::string>(c.data) : format_number(c.number());
    try {
      out.push_back(parse_polynomial(text, dim));
    } catch (const ArgumentError& e) {
      Reader::fail(v, "model", key, e.what());
    }
  }
  return out;
}

/// Catalog model by name, or a polynomial model (dim + fields); beta and
/// nu_log_density may be added to either.
inline SubRiemannianStructure model_from_config(Reader& r) {
  if (!r.has_section("model")) Reader::fail(nullptr, "model", "name", "a [model] section is required");
  SubRiemannianStructure s;
  const auto name = r.opt_text("model", "name");
  if (r.has("model", "fields")) {
    const int dim = static_cast<int>(r.count("model", "dim"));
    if (dim > kMaxDim) Reader::fail(r.get("model", "dim"), "model", "dim", "at most 8");
    s.dim = dim;
    s.name = name.value_or("user");
    const auto* fv = r.get("model", "fields");
    if (!fv->is_array() || fv->array().empty()) Reader::fail(fv, "model", "fields", "expected a list of fields");
    for (const auto& f : fv->array()) {
      if (!f.is_array() || static_cast<int>(f.array().size()) != dim)
        Reader::fail(fv, "model", "fields", "each field needs " + std::to_string(dim) + " components");
      std::vector<Polynomial> comps;
      for (const auto& c : f.array()) {
        const std::string text = c.is_string() ? std::get<std::string>(c.data)
                                 : c.is_number() ? format_number(c.number())
                                                 : std::string();
        try {
          comps.push_back(parse_polynomial(text, dim));
        } catch (const ArgumentError& e) {
          Reader::fail(fv, "model", "fields", e.what());
        }
      }
      s.fields.push_back(polynomial_field(std::move(comps)));
    }
  } else {
    if (!name) Reader::fail(nullptr, "model", "name", "required key is missing");
    try {
      s = make_model(*name);
    } catch (const ArgumentError& e) {
      Reader::fail(r.get("model", "name"), "model", "name", e.what());
    }
  }
  if (r.has("model", "beta")) {
    auto comps = polynomial_list(r, "beta", s.dim);
    s.beta = [comps](const Vec& x) {
      Vec b(static_cast<int>(comps.size()));
      for (size_t i = 0; i < comps.size(); ++i) b(static_cast<Eigen::Index>(i)) = comps[i](x);
      return b;
    };
  }
  if (const auto* v = r.get("model", "nu_log_density")) {
    if (!v->is_string()) Reader::fail(v, "model", "nu_log_density", "expected a polynomial string");
    Polynomial p;
    try {
      p = parse_polynomial(std::get<std::string>(v->data), s.dim);
    } catch (const ArgumentError& e) {
      Reader::fail(v, "model", "nu_log_density", e.what());
    }
    s.nu_log_density = [p](const Vec& x) { return p(x); };
    s.nu_log_density_gradient = [p, d = s.dim](const Vec& x) {
      Vec g(d);
      for (int k = 0; k < d; ++k) g(k) = p.partial(x, k);
      return g;
    };
  }
  try {
    validate(s);
  } catch (const ArgumentError& e) {
    Reader::fail(nullptr, "model", "fields", e.what());
  }
  return s;
}

/// [set]: type = half_space (axis, at) | ball_complement (center, radius) |
/// box_complement (lo, hi). Axes count from 1.
inline std::optional<ClosedSet> set_from_config(Reader& r, int dim, json* description = nullptr) {
  if (!r.has_section("set")) return std::nullopt;
  const std::string type = r.text("set", "type");
  json d{{"type", type}};
  ClosedSet a;
  if (type == "half_space") {
    const auto axis = r.count("set", "axis");
    if (axis > dim) Reader::fail(r.get("set", "axis"), "set", "axis", "exceeds the model dimension");
    const double at = r.real("set", "at");
    a = half_space(dim, static_cast<int>(axis) - 1, at);
    d["axis"] = axis;
    d["at"] = at;
  } else if (type == "ball_complement") {
    const Vec c = r.point("set", "center", dim);
    const double radius = r.positive("set", "radius");
    a = ball_complement(c, radius);
    d["center"] = to_json(c);
    d["radius"] = radius;
  } else if (type == "box_complement") {
    const Vec lo = r.point("set", "lo", dim), hi = r.point("set", "hi", dim);
    if (!(lo.array() < hi.array()).all()) Reader::fail(r.get("set", "hi"), "set", "hi", "must exceed lo");
    a = box_complement(lo, hi);
    d["lo"] = to_json(lo);
    d["hi"] = to_json(hi);
  } else {
    Reader::fail(r.get("set", "type"), "set", "type", "unknown set type '" + type + "'");
  }
  if (description) *description = d;
  return a;
}

/// [region]: type = box (lo, hi) | ball (center, radius).
inline std::optional<OpenRegion> region_from_config(Reader& r, int dim, json* description = nullptr) {
  if (!r.has_section("region")) return std::nullopt;
  const std::string type = r.text("region", "type");
  json d{{"type", type}};
  OpenRegion u;
  if (type == "box") {
    const Vec lo = r.point("region", "lo", dim), hi = r.point("region", "hi", dim);
    if (!(lo.array() < hi.array()).all()) Reader::fail(r.get("region", "hi"), "region", "hi", "must exceed lo");
    u = open_box(lo, hi);
    d["lo"] = to_json(lo);
    d["hi"] = to_json(hi);
  } else if (type == "ball") {
    const Vec c = r.point("region", "center", dim);
    const double radius = r.positive("region", "radius");
    u = open_ball(c, radius);
    d["center"] = to_json(c);
    d["radius"] = radius;
  } else {
    Reader::fail(r.get("region", "type"), "region", "type", "unknown region type '" + type + "'");
  }
  if (description) *description = d;
  return u;
}

// ---------------------------------------------------------------------------
// Commands

struct RunSettings {
  std::uint64_t seed = 0xC0FFEE;
  int workers = 1;
  std::optional<std::string> suite;                   // audit-all, from the command line
  std::function<void(const std::string&)> progress;  // stderr chatter from long commands
};

struct Context {
  Reader& reader;
  const RunSettings& settings;
  Report& report;
};

namespace detail {

inline json base_record(const std::string& command, const SubRiemannianStructure& s, const RunSettings& rs) {
  return json{{"command", command}, {"model", s.name}, {"seed", rs.seed}};
}

/// [points] x, which must lie in the domain and satisfy the bracket condition.
inline Vec start_point(Reader& r, const SubRiemannianStructure& s) {
  const Vec x = r.point("points", "x", s.dim);
  if (!s.contains(x)) Reader::fail(r.get("points", "x"), "points", "x", "outside the domain of " + s.name);
  homogeneous_dimension(s, x);
  return x;
}

inline DistanceOptions distance_options(Reader& r, const std::string& sect, const RunSettings& rs) {
  DistanceOptions o;
  o.n_steps = static_cast<int>(r.count(sect, "n_steps", o.n_steps));
  o.restarts = static_cast<int>(r.count(sect, "restarts", o.restarts));
  o.max_iterations = static_cast<int>(r.count(sect, "max_iterations", o.max_iterations));
  o.refine = r.flag(sect, "refine", o.refine);
  o.seed = rs.seed;
  o.workers = rs.workers;
  return o;
}

/// Estimate-vs-expected check: |value - expected| <= 3 stderr + bias + tol.
inline void check_estimate(Report& rep, const std::string& name, const KernelEstimate& e, std::optional<double> expected,
                           double tol) {
  if (!expected) return;
  const double allowed = 3 * e.stderr + e.bias_bound + tol;
  const double diff = std::abs(e.value - *expected);
  rep.check(name, diff <= allowed,
            "estimate " + format_number(e.value) + " expected " + format_number(*expected) + " |diff| " +
                format_number(diff) + " allowed " + format_number(allowed));
}

inline json estimate_json(const KernelEstimate& e) {
  return json{{"kind", to_string(e.kind)}, {"t", e.t},          {"value", e.value},
              {"stderr", e.stderr},        {"r_kde", e.r_kde},  {"bias_bound", e.bias_bound},
              {"n_paths", e.n_paths},      {"hits", e.hits},    {"pre_clip_value", e.pre_clip_value}};
}

inline void audit_output(Context& c, const std::string& command, const SubRiemannianStructure& s, json base,
                         const BoundAudit& audit, const std::string& csv_name) {
  for (const auto& p : audit.points) {
    json rec = base;
    rec["audit"] = audit.kind;
    rec["t"] = p.t;
    rec["estimate"] = p.estimate;
    rec["stderr"] = p.stderr;
    rec["hits"] = p.hits;
    rec["lhs"] = p.lhs;
    rec["lhs_stderr"] = p.lhs_stderr;
    rec["rhs"] = p.rhs;
    rec["margin"] = p.margin;
    rec["r_kde"] = p.r_kde;
    rec["bias_bound"] = p.bias_bound;
    if (p.implied_constant) rec["implied_constant"] = number(*p.implied_constant);
    if (!p.binding_radius.empty()) rec["binding_radius"] = p.binding_radius;
    c.report.record(rec);
    c.report.csv_row(csv_name, {format_number(p.t), format_number(p.estimate), format_number(p.stderr),
                                format_number(p.lhs), format_number(p.lhs_stderr), format_number(p.rhs),
                                format_number(p.margin)});
  }
  c.report.csv_header(csv_name, {"t", "estimate", "stderr", "t_log_p", "t_log_p_stderr", "bound", "margin"});
  json sum = base;
  sum["audit"] = audit.kind;
  sum["summary"] = true;
  sum["t_grid"] = audit.t_grid;
  sum["dropped_t"] = audit.dropped_t;
  sum["rhs"] = audit.rhs;
  sum["distance"] = audit.distance;
  sum["lambda"] = audit.lambda;
  sum["extrapolated_limit"] = audit.extrapolated_limit;
  sum["limit_stderr"] = audit.fit.limit_stderr;
  sum["fit_a"] = audit.fit.a;
  sum["fit_b"] = audit.fit.b;
  sum["margin"] = audit.margin;
  if (audit.implied_constant) sum["implied_constant"] = number(*audit.implied_constant);
  if (audit.hsu)
    sum["hsu"] = json{{"in_S", audit.hsu->in_S},
                      {"d", number(audit.hsu->d)},
                      {"dx_inf", number(audit.hsu->dx_inf)},
                      {"dy_inf", number(audit.hsu->dy_inf)}};
  c.report.record(sum);
  (void)command;
  (void)s;
}

inline void audit_assertions(Context& c, const std::string& sect, const BoundAudit& audit,
                             std::optional<double> limit, double limit_tol, std::optional<double> min_margin) {
  if (limit) {
    const double diff = std::abs(audit.extrapolated_limit - *limit);
    c.report.check(sect + " limit", diff <= limit_tol,
                   "extrapolated " + format_number(audit.extrapolated_limit) + " expected " + format_number(*limit) +
                       " +- " + format_number(limit_tol));
  }
  if (min_margin) {
    double worst = kInf;
    for (const auto& p : audit.points) worst = std::min(worst, p.margin);
    c.report.check(sect + " margin", worst >= *min_margin,
                   "smallest pointwise margin " + format_number(worst) + " required >= " + format_number(*min_margin));
  }
}

inline AuditOptions audit_options(Reader& r, const std::string& sect, const RunSettings& rs, std::vector<double> grid,
                                  bool tilt_default) {
  AuditOptions o;
  o.t_grid = std::move(grid);
  o.kernel.n_paths = static_cast<std::size_t>(r.count(sect, "n_paths", 100000));
  o.kernel.seed = rs.seed;
  o.kernel.workers = rs.workers;
  o.kernel.n_steps = static_cast<int>(r.integer(sect, "n_steps", 0));
  o.kde_scale = r.positive(sect, "kde_scale", 0.4);
  o.tilt = r.flag(sect, "tilt", tilt_default);
  o.min_hits = static_cast<std::size_t>(r.count(sect, "min_hits", 1));
  o.implied_constants = r.flag(sect, "implied_constants", true);
  o.volume.seed = rs.seed;
  o.volume.n_samples = static_cast<int>(r.count(sect, "volume_samples", 400));
  o.distance.seed = rs.seed;
  o.distance.workers = rs.workers;
  return o;
}

inline KernelOptions kernel_options(Reader& r, const std::string& sect, const RunSettings& rs) {
  KernelOptions k;
  k.n_paths = static_cast<std::size_t>(r.count(sect, "n_paths", 100000));
  k.r_kde = r.real(sect, "r_kde", 0.0);
  if (k.r_kde < 0) Reader::fail(r.get(sect, "r_kde"), sect, "r_kde", "must be nonnegative");
  k.n_steps = static_cast<int>(r.integer(sect, "n_steps", 0));
  if (k.n_steps < 0) Reader::fail(r.get(sect, "n_steps"), sect, "n_steps", "must be nonnegative");
  k.seed = rs.seed;
  k.workers = rs.workers;
  return k;
}

// distance ------------------------------------------------------------------

inline void cmd_distance(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  const auto y = r.opt_point("points", "y", s.dim);
  json set_desc;
  const auto a = set_from_config(r, s.dim, &set_desc);
  const auto opts = distance_options(r, "distance", c.settings);
  const bool infinity = r.flag("distance", "infinity", false);
  const bool hsu = r.flag("distance", "hsu", false);
  const auto expected = r.opt_real("assert", "value");
  const auto tol = r.opt_real("assert", "tol");
  r.finish();
  if (!y && !a && !infinity) Reader::fail(nullptr, "points", "y", "need y, a [set], or infinity = true");

  json rec = base_record("distance", s, c.settings);
  rec["x"] = to_json(x);
  rec["cometric_x"] = to_json(cometric(s, x));
  double value = kInf;
  if (y && a) {
    const auto d = distance_through_set(s, x, *a, *y, opts);
    value = d.value;
    rec["kind"] = "through_set";
    rec["y"] = to_json(*y);
    rec["set"] = set_desc;
    rec["value"] = d.value;
    rec["converged"] = d.converged;
    if (d.via_point) rec["via_point"] = to_json(*d.via_point);
    if (d.set_lower_bound) rec["set_lower_bound"] = *d.set_lower_bound;
  } else if (y) {
    const auto d = distance(s, x, *y, opts);
    value = d.value;
    rec["kind"] = "point";
    rec["y"] = to_json(*y);
    rec["value"] = d.value;
    rec["converged"] = d.converged;
    rec["restarts_used"] = d.restarts_used;
    rec["terminal_gap"] = d.terminal_gap;
    rec["refined"] = d.refined;
    rec["refine_converged"] = d.refine_converged;
    rec["hamiltonian_drift"] = d.hamiltonian_drift;
    if (d.witness) {
      const auto traj = integrate_control(s, x, *d.witness);
      rec["witness_energy"] = energy(*d.witness);
      rec["witness_endpoint_error"] = (traj.points.back() - *y).norm();
    }
  } else if (a) {
    const auto d = distance_to_set(s, x, *a, opts);
    value = d.value;
    rec["kind"] = "set";
    rec["set"] = set_desc;
    rec["value"] = d.value;
    rec["converged"] = d.converged;
  }
  if (infinity) {
    const auto inf = distance_to_infinity(s, x, default_exhaustion(x), opts);
    rec["distance_to_infinity"] = number(inf.value);
    if (!y && !a) value = inf.value;
  }
  if (hsu && y) {
    const auto h = hsu_condition(s, x, *y, opts);
    rec["hsu"] = json{{"in_S", h.in_S}, {"d", number(h.d)}, {"dx_inf", number(h.dx_inf)}, {"dy_inf", number(h.dy_inf)}};
  }
  c.report.record(rec);
  c.report.note("distance value " + format_number(value));
  if (expected) {
    const double allowed = tol.value_or(tol_dist(*expected));
    c.report.check("distance value", std::abs(value - *expected) <= allowed,
                   "value " + format_number(value) + " expected " + format_number(*expected) + " +- " +
                       format_number(allowed));
  }
}

// dual ------------------------------------------------------------------------

inline void cmd_dual(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  const auto y = r.opt_point("points", "y", s.dim);
  json set_desc;
  const auto a = set_from_config(r, s.dim, &set_desc);
  const auto* wv = r.get("dual", "w");
  if (!wv || !wv->is_string()) Reader::fail(wv, "dual", "w", "a certificate polynomial is required");
  Polynomial w, w_plus;
  try {
    w = parse_polynomial(std::get<std::string>(wv->data), s.dim);
    w_plus = r.has("dual", "w_plus") ? parse_polynomial(r.text("dual", "w_plus"), s.dim) : w;
  } catch (const ArgumentError& e) {
    Reader::fail(wv, "dual", "w", e.what());
  }
  const Vec lo = r.point("dual", "grid_lo", s.dim), hi = r.point("dual", "grid_hi", s.dim);
  const int per_axis = static_cast<int>(r.count("dual", "per_axis", 9));
  std::vector<Vec> samples;
  if (const auto* sv = r.get("dual", "set_samples")) {
    if (!sv->is_array()) Reader::fail(sv, "dual", "set_samples", "expected a list of points");
    for (const auto& p : sv->array()) {
      if (!p.is_array() || static_cast<int>(p.array().size()) != s.dim)
        Reader::fail(sv, "dual", "set_samples", "points need " + std::to_string(s.dim) + " coordinates");
      Vec z(s.dim);
      for (int i = 0; i < s.dim; ++i) z(i) = p.array()[static_cast<size_t>(i)].number();
      samples.push_back(z);
    }
  }
  const bool compare = r.flag("dual", "compare_distance", true);
  const auto opts = distance_options(r, "distance", c.settings);
  const auto bound_min = r.opt_real("assert", "bound_min");
  const bool sandwich = r.flag("assert", "sandwich", false);
  r.finish();
  if (!y && !a) Reader::fail(nullptr, "points", "y", "need y or a [set]");

  DualCertificate cert;
  cert.w_minus = [w](const Vec& z) { return w(z); };
  cert.w_plus = [w_plus](const Vec& z) { return w_plus(z); };
  cert.grid = box_grid(lo, hi, per_axis);
  cert.set_samples = samples;
  json rec = base_record("dual", s, c.settings);
  rec["x"] = to_json(x);
  double bound = 0, primal = kInf;
  if (y) {
    bound = dual_certificate_check(s, cert, x, *y);
    rec["y"] = to_json(*y);
    if (compare) primal = distance(s, x, *y, opts).value;
  } else {
    if (samples.empty()) Reader::fail(nullptr, "dual", "set_samples", "required for set certificates");
    bound = dual_certificate_check_set(s, cert, x);
    rec["set"] = set_desc;
    if (compare) primal = distance_to_set(s, x, *a, opts).value;
  }
  rec["bound"] = bound;
  rec["admissible"] = cert.admissible;
  rec["max_gradient_norm2"] = cert.max_gradient_norm2;
  if (compare) {
    rec["distance"] = primal;
    rec["gap"] = primal - bound;
  }
  c.report.record(rec);
  if (bound_min)
    c.report.check("dual bound", bound >= *bound_min,
                   "bound " + format_number(bound) + " required >= " + format_number(*bound_min));
  if (sandwich && compare)
    c.report.check("dual sandwich", bound <= primal + tol_dist(primal),
                   "bound " + format_number(bound) + " <= distance " + format_number(primal));
}

// volume ----------------------------------------------------------------------

inline void cmd_volume(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  VolumeOptions vo;
  vo.n_samples = static_cast<int>(r.count("volume", "n_samples", vo.n_samples));
  vo.seed = c.settings.seed;
  vo.workers = c.settings.workers;
  const auto radii = r.opt_reals("volume", "radii");
  const auto radius = r.opt_real("volume", "radius");
  const auto doubling_radius = r.opt_real("volume", "doubling_radius");
  const auto direction = r.opt_point("volume", "chart_direction", s.dim);
  const auto h_grid = r.opt_reals("volume", "chart_steps");
  const auto slope = r.opt_real("assert", "slope");
  const double slope_tol = r.positive("assert", "slope_tol", 0.3);
  const auto doubling_rel = r.opt_real("assert", "doubling_rel_tol");
  r.finish();
  if (!radii && !radius && !doubling_radius && !direction)
    Reader::fail(nullptr, "volume", "radii", "need radii, radius, doubling_radius or chart_direction");

  json rec = base_record("volume", s, c.settings);
  rec["x"] = to_json(x);
  const auto hd = homogeneous_dimension(s, x);
  rec["homogeneous_dimension"] = hd.N;
  rec["growth"] = hd.growth;
  if (s.num_fields() >= 2) rec["bracket_12"] = to_json(lie_bracket(s, 0, 1, x));
  if (radius) {
    const auto v = ball_volume(s, x, *radius, vo);
    rec["radius"] = *radius;
    rec["volume"] = v.volume;
    rec["volume_stderr"] = v.stderr;
  }
  if (radii) {
    const auto est = dimension_estimate(s, x, *radii, vo);
    rec["radii"] = est.radii;
    json vols = json::array(), errs = json::array();
    for (const auto& v : est.volumes) {
      vols.push_back(v.volume);
      errs.push_back(v.stderr);
    }
    rec["volumes"] = vols;
    rec["volume_stderrs"] = errs;
    rec["slope"] = est.slope;
    c.report.csv_header("volume.csv", {"r", "volume", "stderr"});
    for (size_t i = 0; i < est.radii.size(); ++i)
      c.report.csv_row("volume.csv", {format_number(est.radii[i]), format_number(est.volumes[i].volume),
                                      format_number(est.volumes[i].stderr)});
    if (slope)
      c.report.check("volume slope", std::abs(est.slope - *slope) <= slope_tol,
                     "slope " + format_number(est.slope) + " expected " + format_number(*slope) + " +- " +
                         format_number(slope_tol));
  }
  if (doubling_radius) {
    const double q = doubling_ratio(s, x, *doubling_radius, vo);
    rec["doubling_radius"] = *doubling_radius;
    rec["doubling_ratio"] = q;
    if (doubling_rel) {
      const double target = std::pow(2.0, hd.N);
      c.report.check("doubling ratio", std::abs(q / target - 1) <= *doubling_rel,
                     "ratio " + format_number(q) + " vs 2^N = " + format_number(target));
    }
  }
  if (direction) {
    const auto grid = h_grid.value_or(std::vector<double>{0.2, 0.1, 0.05, 0.025});
    rec["chart_exponent"] = chart_exponent(s, x, *direction, grid);
  }
  c.report.record(rec);
}

// simulate --------------------------------------------------------------------

inline void cmd_simulate(Context& c) {
  auto& r = c.reader;
  auto s = model_from_config(r);
  const bool augment = r.flag("simulate", "augment_time", false);
  Vec x = start_point(r, s);
  json set_desc;
  const auto kill = set_from_config(r, s.dim, &set_desc);
  const double t = r.positive("simulate", "t");
  const int steps = static_cast<int>(r.count("simulate", "n_steps", default_sde_steps(t)));
  const auto n_paths = static_cast<std::size_t>(r.count("simulate", "n_paths", 1000));
  const auto export_paths = static_cast<std::size_t>(r.integer("simulate", "export_paths", 0));
  const auto box_lo = r.opt_point("simulate", "sector_lo", s.dim);
  const auto box_hi = r.opt_point("simulate", "sector_hi", s.dim);
  r.finish();

  json rec = base_record("simulate", s, c.settings);
  const auto drift = hormander_drift(s);
  rec["drift_vanishes"] = drift.vanishes;
  rec["drift_at_x"] = to_json(drift.drift_vector(x));
  if (box_lo && box_hi) rec["sector_bound"] = sector_bound(s, *box_lo, *box_hi, 4096);
  std::optional<ClosedSet> kill_set = kill;
  if (augment) {
    s = augment_with_time(s);
    Vec xt(s.dim);
    xt << x, 0.0;
    x = xt;
    if (kill_set) {
      const ClosedSet base = *kill_set;
      kill_set = ClosedSet{[base](const Vec& z) { return base.level(z.head(z.size() - 1)); }, {}, {}};
    }
    rec["augmented"] = true;
  }
  rec["x"] = to_json(x);
  rec["t"] = t;
  rec["n_steps"] = steps;
  rec["n_paths"] = n_paths;
  if (kill) rec["kill_set"] = set_desc;
  SimulateOptions so;
  so.kill_region = kill_set;
  so.record_states = false;
  const Simulator sim(s, t, steps, so);
  struct Tally {
    std::size_t n = 0, killed = 0;
    Eigen::VectorXd sum, sum2;
    void merge(const Tally& o) {
      if (o.n == 0) return;
      if (n == 0) {
        *this = o;
        return;
      }
      n += o.n;
      killed += o.killed;
      sum += o.sum;
      sum2 += o.sum2;
    }
  };
  const int d = s.dim;
  const auto tally = accumulate_paths<Tally>(n_paths, c.settings.workers, [&](std::uint64_t id, Tally& tl) {
    if (tl.n == 0 && tl.sum.size() == 0) {
      tl.sum = Eigen::VectorXd::Zero(d);
      tl.sum2 = Eigen::VectorXd::Zero(d);
    }
    ++tl.n;
    const auto p = sim.run(x, c.settings.seed, id);
    if (p.killed) {
      ++tl.killed;
      return;
    }
    tl.sum += p.final_state;
    tl.sum2 += p.final_state.cwiseProduct(p.final_state);
  });
  const double alive = static_cast<double>(tally.n - tally.killed);
  rec["killed_fraction"] = static_cast<double>(tally.killed) / static_cast<double>(tally.n);
  if (alive > 0) {
    const Vec mean = tally.sum / alive;
    rec["terminal_mean"] = to_json(mean);
    rec["terminal_variance"] = to_json(Vec(tally.sum2 / alive - mean.cwiseProduct(mean)));
  }
  c.report.record(rec);
  if (export_paths > 0) {
    SimulateOptions rs = so;
    rs.record_states = true;
    const Simulator rec_sim(s, t, steps, rs);
    std::vector<std::string> header{"path_id", "time"};
    for (int k = 1; k <= d; ++k) header.push_back("x" + std::to_string(k));
    c.report.csv_header("paths.csv", header);
    for (std::size_t id = 0; id < export_paths; ++id) {
      const auto p = rec_sim.run(x, c.settings.seed, id);
      for (size_t k = 0; k < p.states.size(); ++k) {
        std::vector<std::string> row{std::to_string(id), format_number(p.times[k])};
        for (int j = 0; j < d; ++j) row.push_back(format_number(p.states[k](j)));
        c.report.csv_row("paths.csv", row);
      }
    }
  }
}

// kernel ----------------------------------------------------------------------

inline void cmd_kernel(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  const Vec y = r.point("points", "y", s.dim);
  const double t = r.positive("kernel", "t");
  const auto k = kernel_options(r, "kernel", c.settings);
  json region_desc, set_desc;
  const auto u = region_from_config(r, s.dim, &region_desc);
  const auto a = set_from_config(r, s.dim, &set_desc);
  const int x_sign = static_cast<int>(r.integer("kernel", "x_sign", 1));
  const int y_sign = static_cast<int>(r.integer("kernel", "y_sign", 1));
  const auto expected = r.opt_real("assert", "value");
  const auto expected_dirichlet = r.opt_real("assert", "dirichlet_value");
  const auto expected_reflected = r.opt_real("assert", "reflected_value");
  const double tol = r.real("assert", "tol", 0.0);
  r.finish();

  json base = base_record("kernel", s, c.settings);
  base["x"] = to_json(x);
  base["y"] = to_json(y);
  const auto full = estimate_kernel(s, t, x, y, k);
  json rec = base;
  rec.update(estimate_json(full));
  c.report.record(rec);
  check_estimate(c.report, "kernel value", full, expected, tol);
  if (u) {
    const auto d = estimate_kernel_dirichlet(s, t, x, y, *u, k);
    json rd = base;
    rd.update(estimate_json(d));
    rd["region"] = region_desc;
    c.report.record(rd);
    check_estimate(c.report, "dirichlet value", d, expected_dirichlet, tol);
  }
  if (a) {
    const auto e = reflected_kernel(s, t, x_sign, y_sign, x, y, *a, k);
    json rr = base;
    rr.update(estimate_json(e));
    rr["reflected"] = true;
    rr["x_sign"] = x_sign;
    rr["y_sign"] = y_sign;
    rr["set"] = set_desc;
    c.report.record(rr);
    check_estimate(c.report, "reflected value", e, expected_reflected, tol);
  }
}

// hitprob ---------------------------------------------------------------------

inline void cmd_hitprob(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  json set_desc;
  const auto a = set_from_config(r, s.dim, &set_desc);
  if (!a) Reader::fail(nullptr, "set", "type", "a [set] section is required");
  const auto t = r.opt_real("hitprob", "t");
  const bool audit = r.has("hitprob", "t_grid");
  std::vector<double> grid;
  if (audit) grid = r.t_grid("hitprob", "t_grid", {});
  const auto k = kernel_options(r, "hitprob", c.settings);
  AuditOptions ao;
  if (audit) {
    ao = audit_options(r, "hitprob", c.settings, grid, false);
    ao.kernel.n_paths = k.n_paths;
  }
  const auto expected = r.opt_real("assert", "value");
  const double tol = r.real("assert", "tol", 0.0);
  const auto limit = r.opt_real("assert", "limit");
  const double limit_tol = r.positive("assert", "limit_tol", 0.1);
  const auto min_margin = r.opt_real("assert", "min_margin");
  r.finish();
  if (!t && !audit) Reader::fail(nullptr, "hitprob", "t", "need t or t_grid");

  json base = base_record("hitprob", s, c.settings);
  base["x"] = to_json(x);
  base["set"] = set_desc;
  if (t) {
    if (!(*t > 0)) Reader::fail(nullptr, "hitprob", "t", "must be positive");
    const auto e = hitting_probability(s, *t, x, *a, k);
    json rec = base;
    rec.update(estimate_json(e));
    c.report.record(rec);
    check_estimate(c.report, "hitting probability", e, expected, tol);
    const auto hs = hitting_time_samples(s, x, *a, *t, k.n_paths, k.seed, k.workers, k.n_steps);
    c.report.csv_header("hitting_cdf.csv", {"t", "cdf"});
    for (int i = 1; i <= 50; ++i) {
      const double ti = *t * i / 50;
      c.report.csv_row("hitting_cdf.csv", {format_number(ti), format_number(hs.cdf(ti))});
    }
  }
  if (audit) {
    const auto res = hitting_bound_audit(s, x, *a, ao);
    audit_output(c, "hitprob", s, base, res, "hitting_audit.csv");
    audit_assertions(c, "hitting audit", res, limit, limit_tol, min_margin);
  }
}

// through ---------------------------------------------------------------------

inline void cmd_through(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  const Vec y = r.point("points", "y", s.dim);
  json set_desc;
  const auto a = set_from_config(r, s.dim, &set_desc);
  if (!a) Reader::fail(nullptr, "set", "type", "a [set] section is required");
  const auto t = r.opt_real("through", "t");
  const auto k = kernel_options(r, "through", c.settings);
  const std::string restart = r.text("through", "restart", "none");
  if (restart != "none" && restart != "gaussian")
    Reader::fail(r.get("through", "restart"), "through", "restart", "expected none or gaussian");
  if (restart == "gaussian" && s.name.rfind("euclidean:", 0) != 0)
    Reader::fail(r.get("through", "restart"), "through", "restart", "the Gaussian restart kernel needs a euclidean model");
  const bool audit = r.has("through", "t_grid");
  const bool sector = r.flag("through", "sector", false);
  AuditOptions ao;
  if (audit) {
    ao = audit_options(r, "through", c.settings, r.t_grid("through", "t_grid", {}), true);
    ao.kernel.n_paths = k.n_paths;
  }
  const auto expected = r.opt_real("assert", "value");
  const double tol = r.real("assert", "tol", 0.0);
  const auto limit = r.opt_real("assert", "limit");
  const double limit_tol = r.positive("assert", "limit_tol", 0.15);
  const auto min_margin = r.opt_real("assert", "min_margin");
  r.finish();
  if (!t && !audit) Reader::fail(nullptr, "through", "t", "need t or t_grid");

  json base = base_record("through", s, c.settings);
  base["x"] = to_json(x);
  base["y"] = to_json(y);
  base["set"] = set_desc;
  if (t) {
    if (!(*t > 0)) Reader::fail(nullptr, "through", "t", "must be positive");
    if (a->contains(y)) throw ArgumentError("through: y lies in A");
    const auto trip = kernel_triplet(s, *t, x, *a, y, k);
    for (const auto* e : {&trip.full, &trip.dirichlet, &trip.through}) {
      json rec = base;
      rec.update(estimate_json(*e));
      c.report.record(rec);
    }
    c.report.check("coupling p_U <= p", trip.coupling_holds,
                   "p " + format_number(trip.full.value) + " p_U " + format_number(trip.dirichlet.value));
    check_estimate(c.report, "through value", trip.through, expected, tol);
    if (restart == "gaussian") {
      const auto rs = through_kernel_restart(
          s, *t, x, *a, y, [](double tau, const Vec& z, const Vec& w) { return gaussian_heat_kernel(tau, z, w); }, k);
      json rec = base;
      rec.update(estimate_json(rs));
      rec["estimator"] = "restart";
      c.report.record(rec);
      const double combined = std::hypot(rs.stderr, trip.through.stderr);
      const double diff = std::abs(rs.value - trip.through.value);
      c.report.check("restart identity", diff <= 3 * combined + trip.through.bias_bound,
                     "|difference| " + format_number(diff) + " allowed " +
                         format_number(3 * combined + trip.through.bias_bound));
    }
  }
  if (audit) {
    const auto res = through_bound_audit(s, x, *a, y, sector, ao);
    audit_output(c, "through", s, base, res, "through_audit.csv");
    audit_assertions(c, "through audit", res, limit, limit_tol, min_margin);
  }
}

// varadhan --------------------------------------------------------------------

inline void cmd_varadhan(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  const Vec y = r.point("points", "y", s.dim);
  auto ao = audit_options(r, "varadhan", c.settings,
                          r.t_grid("varadhan", "t_grid", {0.5, 0.35, 0.25, 0.175, 0.125}), true);
  ao.check_hsu = r.flag("varadhan", "hsu", true);
  const auto limit = r.opt_real("assert", "limit");
  const double limit_tol = r.positive("assert", "limit_tol", 0.1);
  r.finish();
  json base = base_record("varadhan", s, c.settings);
  base["x"] = to_json(x);
  base["y"] = to_json(y);
  const auto res = varadhan_audit(s, x, y, ao);
  audit_output(c, "varadhan", s, base, res, "varadhan.csv");
  audit_assertions(c, "varadhan", res, limit, limit_tol, std::nullopt);
  c.report.note("extrapolated limit " + format_number(res.extrapolated_limit) + " vs -d^2/2 = " +
                format_number(res.rhs));
}

// bridge ----------------------------------------------------------------------

inline void cmd_bridge(Context& c) {
  auto& r = c.reader;
  const auto s = model_from_config(r);
  const Vec x = start_point(r, s);
  const Vec y = r.point("points", "y", s.dim);
  std::vector<double> grid;
  if (r.has("bridge", "t_grid"))
    grid = r.t_grid("bridge", "t_grid", {}, 1);
  else
    grid = {r.positive("bridge", "t")};
  BridgeOptions bo;
  bo.n_target = static_cast<std::size_t>(r.count("bridge", "n_target", 2000));
  bo.terminal_tol = r.real("bridge", "terminal_tol", 0.0);
  bo.seed = c.settings.seed;
  bo.workers = c.settings.workers;
  bo.distance.seed = c.settings.seed;
  const double rho = r.positive("bridge", "rho", 0.3);
  const bool tilted = r.flag("bridge", "tilted", true);
  const auto export_paths = static_cast<std::size_t>(r.integer("bridge", "export_paths", 0));
  json region_desc;
  const auto u = region_from_config(r, s.dim, &region_desc);
  const double delta_probe = r.positive("region", "delta_probe", 1e-3);
  const auto min_fraction = r.opt_real("assert", "min_fraction");
  const bool monotone = r.flag("assert", "monotone", false);
  r.finish();

  json base = base_record("bridge", s, c.settings);
  base["x"] = to_json(x);
  base["y"] = to_json(y);
  base["rho"] = rho;
  std::optional<ControlPath> witness;
  if ((y - x).norm() > 0) witness = distance(s, x, y, bo.distance).witness;
  c.report.csv_header("bridge.csv", {"t", "fraction_inside", "stderr", "acceptance_rate", "q50", "q90", "q99"});
  double prev = -1, prev_se = 0, last = 0;
  bool mono = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    BridgeOptions o = bo;
    o.seed = derive_seed(bo.seed, i);
    const auto ens = tilted ? sample_bridge_tilted(s, grid[i], x, y, o, witness)
                            : sample_bridge_rejection(s, grid[i], x, y, o);
    const auto gamma = witness ? geodesic_on_grid(s, x, *witness, ens.n_steps)
                               : UnitPath(static_cast<size_t>(ens.n_steps) + 1, x);
    const auto diag = concentration_diagnostic(ens, gamma, rho);
    json rec = base;
    rec["t"] = grid[i];
    rec["fraction_inside"] = diag.fraction_inside;
    rec["stderr"] = diag.stderr;
    rec["sup_deviation_quantiles"] = diag.sup_deviation_quantiles;
    rec["acceptance_rate"] = ens.acceptance_rate;
    rec["terminal_tol"] = ens.terminal_tol;
    rec["n_paths"] = ens.size();
    rec["effective_size"] = ens.effective_size();
    rec["tilted"] = ens.tilted;
    c.report.record(rec);
    c.report.csv_row("bridge.csv", {format_number(grid[i]), format_number(diag.fraction_inside),
                                    format_number(diag.stderr), format_number(ens.acceptance_rate),
                                    format_number(diag.sup_deviation_quantiles[0]),
                                    format_number(diag.sup_deviation_quantiles[1]),
                                    format_number(diag.sup_deviation_quantiles[2])});
    if (prev >= 0 && diag.fraction_inside + 2 * std::hypot(diag.stderr, prev_se) < prev) mono = false;
    prev = diag.fraction_inside;
    prev_se = diag.stderr;
    last = diag.fraction_inside;
    if (i == grid.size() - 1 && export_paths > 0) {
      std::vector<std::string> header{"path", "s"};
      for (int k = 1; k <= s.dim; ++k) header.push_back("x" + std::to_string(k));
      c.report.csv_header("bridge_paths.csv", header);
      for (std::size_t p = 0; p < std::min(export_paths, ens.size()); ++p)
        for (size_t k = 0; k < ens.accepted[p].size(); ++k) {
          std::vector<std::string> row{std::to_string(p), format_number(static_cast<double>(k) / ens.n_steps)};
          for (int j = 0; j < s.dim; ++j) row.push_back(format_number(ens.accepted[p][k](j)));
          c.report.csv_row("bridge_paths.csv", row);
        }
    }
  }
  if (u) {
    const auto sm = strong_minimality_report(s, x, y, *u, delta_probe, bo.distance);
    json rec = base;
    rec["strong_minimality"] = json{{"is_strong", sm.is_strong},
                                    {"margin", sm.margin},
                                    {"energy_outside", sm.energy_outside},
                                    {"distance", sm.distance},
                                    {"region", region_desc}};
    c.report.record(rec);
    c.report.note("strong minimality margin " + format_number(sm.margin));
  }
  if (min_fraction)
    c.report.check("tube fraction", last >= *min_fraction,
                   "fraction " + format_number(last) + " at smallest t, required >= " + format_number(*min_fraction));
  if (monotone) c.report.check("tube monotonicity", mono, "fractions nondecreasing as t shrinks (2 stderr slack)");
}

}  // namespace detail

inline std::string summary_header(const std::string& command, std::uint64_t seed, int workers) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  std::ostringstream os;
  os << "hypolab " << command << "  seed " << seed << "  workers " << workers << "  generated " << stamp;
  return os.str();
}

}  // namespace hypolab::harness
