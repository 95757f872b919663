/*
 * jobs.hpp: batch jobs: JSON job configs in, deterministic CSV/JSON artifacts out
 *
 * Config (schema_version 1):
 *   {
 *     "schema_version": 1,
 *     "job": "resonances"   (optional when given on the command line) | "pressure" | "dimension" | "weyl-fit" | "gap" | "fup" | "orbits",
 *     "model": { ... } or { "file": "relative/or/absolute.json" },
 *     "params": { ... },
 *     "seed": 1,
 *     "out": "results/dir"    (optional, relative to the config; --out wins)
 *   }
 * Models:
 *   { "kind": "schottky", "generators": [[a, b, c, d], ...] }
 *   { "kind": "schottky", "builder": "symmetric_three_funnel", "ell": 6 }
 *   { "kind": "schottky", "builder": "three_funnel", "lengths": [l1, l2, l3] }
 *   { "kind": "schottky", "builder": "cylinder", "ell": 2 }
 *   { "kind": "billiard", "centers": [[x, y], ...], "radii": [...], "dirichlet": true }
 *   { "kind": "billiard", "builder": "two_disk" | "equilateral_three_disk", "R": 6, "a": 1 }
 *   { "kind": "cantor", "M": 5, "alphabet": [0, 4] }
 *
 * All outputs are staged in a temporary directory and renamed into place only
 * after every file has been written. manifest.json carries the only timestamp.
 */
#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reslab/billiard.hpp"
#include "reslab/core.hpp"
#include "reslab/fup.hpp"
#include "reslab/schottky.hpp"
#include "reslab/thermo.hpp"
#include "reslab/xfer.hpp"
#include "reslab/zeros.hpp"

namespace reslab::jobs {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int schema_version = 1;

// ── hashing ──────────────────────────────────────────────────────────────────

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::ConfigInvalid, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ── config access with field paths in diagnostics ────────────────────────────

[[noreturn]] inline void bad(const std::string& field, const std::string& msg) {
  fail(ErrorKind::ConfigInvalid, "field '" + field + "': " + msg);
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad(path + key, "missing");
  return j.at(key);
}

inline double num(const json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(field, "must be finite");
  return v;
}

inline int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) bad(field, "expected an integer");
  return j.get<int>();
}

inline double num_or(const json& p, const std::string& key, double def, const std::string& path) {
  return p.contains(key) ? num(p.at(key), path + key) : def;
}

inline int int_or(const json& p, const std::string& key, int def, const std::string& path) {
  return p.contains(key) ? integer(p.at(key), path + key) : def;
}

inline double positive(double v, const std::string& field) {
  if (!(v > 0)) bad(field, "must be positive");
  return v;
}

inline int at_least(int v, int lo, const std::string& field) {
  if (v < lo) bad(field, "must be >= " + std::to_string(lo));
  return v;
}

inline std::vector<double> numbers(const json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], field + "[" + std::to_string(i) + "]"));
  return v;
}

inline std::pair<double, double> interval(const json& j, const std::string& field, const char* what) {
  const auto v = numbers(j, field);
  if (v.size() != 2) bad(field, "expected [lo, hi]");
  if (!(v[1] > v[0])) bad(field, std::string("zero or negative ") + what);
  return {v[0], v[1]};
}

inline zeros::SearchRectangle rectangle(const json& j, const std::string& field) {
  const auto [a, b] = interval(need(j, "re", field + "."), field + ".re", "width");
  const auto [c, d] = interval(need(j, "im", field + "."), field + ".im", "height");
  return {cplx(a, c), cplx(b, d)};
}

// ── models ───────────────────────────────────────────────────────────────────

enum class ModelKind { schottky, billiard, cantor };

struct Model {
  ModelKind kind = ModelKind::schottky;
  json canonical;  // the resolved model description, used for cache keys
  std::optional<schottky::SchottkyGroup> group;
  std::optional<billiard::DiskSystem> disks;
  std::optional<fup::CantorSpec> cantor;
  bool dirichlet = true;
};

inline Model build_model(const json& m, const std::string& path) {
  Model out;
  out.canonical = m;
  const auto& kind = need(m, "kind", path);
  if (!kind.is_string()) bad(path + "kind", "expected a string");
  const std::string k = kind.get<std::string>();
  try {
    if (k == "schottky") {
      out.kind = ModelKind::schottky;
      if (m.contains("generators")) {
        const auto& g = m.at("generators");
        if (!g.is_array() || g.empty()) bad(path + "generators", "expected a nonempty array of [a, b, c, d]");
        std::vector<schottky::Mat2> mats;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const auto v = numbers(g[i], path + "generators[" + std::to_string(i) + "]");
          if (v.size() != 4) bad(path + "generators[" + std::to_string(i) + "]", "expected [a, b, c, d]");
          mats.push_back({v[0], v[1], v[2], v[3]});
        }
        out.group = schottky::build_group(mats);
      } else {
        const auto& b = need(m, "builder", path);
        if (!b.is_string()) bad(path + "builder", "expected a string");
        const std::string name = b.get<std::string>();
        if (name == "symmetric_three_funnel")
          out.group = schottky::symmetric_three_funnel(positive(num(need(m, "ell", path), path + "ell"), path + "ell"));
        else if (name == "cylinder")
          out.group = schottky::cylinder(positive(num(need(m, "ell", path), path + "ell"), path + "ell"));
        else if (name == "three_funnel") {
          const auto L = numbers(need(m, "lengths", path), path + "lengths");
          if (L.size() != 3) bad(path + "lengths", "expected three funnel lengths");
          for (double l : L) positive(l, path + "lengths");
          out.group = schottky::three_funnel(L[0], L[1], L[2]);
        } else
          bad(path + "builder", "unknown schottky builder '" + name + "'");
      }
    } else if (k == "billiard") {
      out.kind = ModelKind::billiard;
      if (m.contains("dirichlet")) {
        if (!m.at("dirichlet").is_boolean()) bad(path + "dirichlet", "expected true or false");
        out.dirichlet = m.at("dirichlet").get<bool>();
      }
      if (m.contains("centers")) {
        const auto& c = m.at("centers");
        if (!c.is_array()) bad(path + "centers", "expected an array of [x, y]");
        std::vector<billiard::Vec2> centers;
        for (std::size_t i = 0; i < c.size(); ++i) {
          const auto v = numbers(c[i], path + "centers[" + std::to_string(i) + "]");
          if (v.size() != 2) bad(path + "centers[" + std::to_string(i) + "]", "expected [x, y]");
          centers.emplace_back(v[0], v[1]);
        }
        const auto radii = numbers(need(m, "radii", path), path + "radii");
        if (radii.size() != centers.size()) bad(path + "radii", "one radius per center");
        out.disks = billiard::build_disk_system(centers, radii);
      } else {
        const auto& b = need(m, "builder", path);
        if (!b.is_string()) bad(path + "builder", "expected a string");
        const std::string name = b.get<std::string>();
        const double R = positive(num(need(m, "R", path), path + "R"), path + "R");
        const double a = positive(num_or(m, "a", 1.0, path), path + "a");
        if (name == "two_disk") out.disks = billiard::two_disk(R, a);
        else if (name == "equilateral_three_disk") out.disks = billiard::equilateral_three_disk(R, a);
        else bad(path + "builder", "unknown billiard builder '" + name + "'");
      }
    } else if (k == "cantor") {
      out.kind = ModelKind::cantor;
      fup::CantorSpec s;
      s.M = integer(need(m, "M", path), path + "M");
      for (double a : numbers(need(m, "alphabet", path), path + "alphabet")) s.alphabet.push_back(static_cast<int>(a));
      s.validate();
      out.cantor = s;
    } else {
      bad(path + "kind", "unknown model kind '" + k + "'");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    bad(path.empty() ? "model" : path.substr(0, path.size() - 1), e.what());
  }
  return out;
}

// ── job configs ──────────────────────────────────────────────────────────────

enum class JobKind { resonances, pressure, dimension, weyl_fit, gap, fup, orbits };

inline std::optional<JobKind> job_from_string(const std::string& s) {
  if (s == "resonances") return JobKind::resonances;
  if (s == "pressure") return JobKind::pressure;
  if (s == "dimension") return JobKind::dimension;
  if (s == "weyl-fit") return JobKind::weyl_fit;
  if (s == "gap") return JobKind::gap;
  if (s == "fup") return JobKind::fup;
  if (s == "orbits") return JobKind::orbits;
  return std::nullopt;
}

inline std::string to_string(JobKind k) {
  switch (k) {
    case JobKind::resonances: return "resonances";
    case JobKind::pressure: return "pressure";
    case JobKind::dimension: return "dimension";
    case JobKind::weyl_fit: return "weyl-fit";
    case JobKind::gap: return "gap";
    case JobKind::fup: return "fup";
    case JobKind::orbits: return "orbits";
  }
  return "unknown";
}

struct ResonanceParams {
  std::string method = "det";  // surfaces: det | cycle
  int M = 24;
  int max_word_length = 12;
  std::optional<int> m_max;  // default: per-s rule for surfaces, 2 for billiards
  zeros::SearchRectangle rect;
  double tol = 1e-8;
  double density = 16;
  struct Scan {
    double re0, re1, im0, im1;
    int n_re, n_im;
  };
  std::optional<Scan> scan;
};

struct JobConfig {
  JobKind kind = JobKind::orbits;
  Model model;
  json params;
  std::uint64_t seed = 1;
  std::optional<fs::path> out;
  std::vector<std::pair<std::string, std::string>> inputs;  // (path, sha256)
  std::string config_sha256;

  // typed parameters, validated at load time
  int max_word_length = 10;
  std::optional<ResonanceParams> resonance;
  std::vector<double> betas;
  std::vector<thermo::Method> methods;
  int M = 24;
  int box_depth = 12;
  int scale_lo = 4, scale_hi = 10;
  double strip_depth = 0, window_width = 0;
  std::vector<double> window_centers;
  int k_min = 2, k_max = 8;
};

inline ResonanceParams parse_resonance(const json& p, const std::string& path, ModelKind kind) {
  ResonanceParams r;
  if (p.contains("method")) {
    if (!p.at("method").is_string()) bad(path + "method", "expected \"det\" or \"cycle\"");
    r.method = p.at("method").get<std::string>();
    if (r.method != "det" && r.method != "cycle") bad(path + "method", "expected \"det\" or \"cycle\"");
  }
  r.M = at_least(int_or(p, "M", 24, path), 4, path + "M");
  r.max_word_length = at_least(int_or(p, "max_word_length", kind == ModelKind::billiard ? 6 : 12, path), 1,
                               path + "max_word_length");
  if (p.contains("m_max")) r.m_max = at_least(integer(p.at("m_max"), path + "m_max"), 0, path + "m_max");
  r.rect = rectangle(need(p, "rectangle", path), path + "rectangle");
  r.tol = positive(num_or(p, "tol", 1e-8, path), path + "tol");
  r.density = num_or(p, "density", 16, path);
  if (r.density < 16) bad(path + "density", "must be >= 16 points per unit perimeter");
  if (p.contains("scan")) {
    const auto& s = p.at("scan");
    const std::string sp = path + "scan.";
    const auto [a, b] = interval(need(s, "re", sp), sp + "re", "width");
    const auto [c, d] = interval(need(s, "im", sp), sp + "im", "height");
    r.scan = ResonanceParams::Scan{a, b, c, d, at_least(integer(need(s, "n_re", sp), sp + "n_re"), 1, sp + "n_re"),
                                   at_least(integer(need(s, "n_im", sp), sp + "n_im"), 1, sp + "n_im")};
  }
  return r;
}

inline void require_kind(const Model& m, std::initializer_list<ModelKind> ok, const std::string& job) {
  for (auto k : ok)
    if (m.kind == k) return;
  bad("model.kind", "not supported by the " + job + " job");
}

inline JobConfig parse_config(const json& root, const fs::path& base_dir, std::optional<JobKind> expected = std::nullopt) {
  JobConfig c;
  if (!root.is_object()) bad("", "config must be a JSON object");
  const auto& sv = need(root, "schema_version", "");
  if (!sv.is_number_integer() || sv.get<int>() != schema_version)
    bad("schema_version", "expected " + std::to_string(schema_version));
  if (root.contains("job")) {
    const auto& job = root.at("job");
    if (!job.is_string()) bad("job", "expected a string");
    const auto kind = job_from_string(job.get<std::string>());
    if (!kind) bad("job", "unknown job '" + job.get<std::string>() + "'");
    if (expected && *kind != *expected) bad("job", "config is for '" + to_string(*kind) + "', not '" + to_string(*expected) + "'");
    c.kind = *kind;
  } else if (expected) {
    c.kind = *expected;
  } else {
    bad("job", "missing");
  }
  if (root.contains("out")) {
    if (!root.at("out").is_string()) bad("out", "expected a directory path");
    c.out = base_dir / root.at("out").get<std::string>();
  }
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) bad("seed", "expected a non-negative integer");
    c.seed = root.at("seed").get<std::uint64_t>();
  }
  json model = need(root, "model", "");
  if (model.is_object() && model.contains("file")) {
    if (!model.at("file").is_string()) bad("model.file", "expected a path");
    fs::path p = model.at("file").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) bad("model.file", "file does not exist: " + p.string());
    const std::string text = read_file(p);
    c.inputs.emplace_back(p.string(), sha256_hex(text));
    try {
      model = json::parse(text);
    } catch (const json::parse_error& e) {
      bad("model.file", std::string("invalid JSON: ") + e.what());
    }
  }
  c.model = build_model(model, "model.");
  c.params = root.contains("params") ? root.at("params") : json::object();
  if (!c.params.is_object()) bad("params", "expected an object");
  const json& p = c.params;
  const std::string pp = "params.";
  const std::string name = to_string(c.kind);
  switch (c.kind) {
    case JobKind::orbits:
      require_kind(c.model, {ModelKind::schottky, ModelKind::billiard}, name);
      c.max_word_length = at_least(int_or(p, "max_word_length", 8, pp), c.model.kind == ModelKind::billiard ? 2 : 1,
                                   pp + "max_word_length");
      break;
    case JobKind::resonances:
      require_kind(c.model, {ModelKind::schottky, ModelKind::billiard}, name);
      c.resonance = parse_resonance(p, pp, c.model.kind);
      break;
    case JobKind::pressure: {
      require_kind(c.model, {ModelKind::schottky, ModelKind::billiard}, name);
      c.max_word_length = at_least(int_or(p, "max_word_length", 10, pp), 2, pp + "max_word_length");
      c.betas = p.contains("betas") ? numbers(p.at("betas"), pp + "betas") : std::vector<double>{0, 0.25, 0.5, 0.75, 1};
      if (c.betas.empty()) bad(pp + "betas", "must be nonempty");
      std::vector<std::string> ms{"zeta_root"};
      if (p.contains("methods")) {
        ms.clear();
        if (!p.at("methods").is_array()) bad(pp + "methods", "expected an array");
        for (const auto& m : p.at("methods")) {
          if (!m.is_string() || (m != "zeta_root" && m != "window")) bad(pp + "methods", "entries must be zeta_root or window");
          ms.push_back(m.get<std::string>());
        }
      }
      for (const auto& m : ms) c.methods.push_back(m == "window" ? thermo::Method::window : thermo::Method::zeta_root);
      break;
    }
    case JobKind::dimension:
      require_kind(c.model, {ModelKind::schottky, ModelKind::billiard}, name);
      c.max_word_length = at_least(int_or(p, "max_word_length", 12, pp), 2, pp + "max_word_length");
      c.M = at_least(int_or(p, "M", 24, pp), 8, pp + "M");
      c.box_depth = at_least(int_or(p, "depth", 12, pp), 2, pp + "depth");
      if (p.contains("scale_exponents")) {
        const auto v = numbers(p.at("scale_exponents"), pp + "scale_exponents");
        if (v.size() != 2 || !(v[1] > v[0])) bad(pp + "scale_exponents", "expected [lo, hi] with lo < hi");
        c.scale_lo = static_cast<int>(v[0]);
        c.scale_hi = static_cast<int>(v[1]);
      }
      break;
    case JobKind::weyl_fit: {
      require_kind(c.model, {ModelKind::schottky, ModelKind::billiard}, name);
      c.resonance = parse_resonance(p, pp, c.model.kind);
      c.strip_depth = positive(num(need(p, "strip_depth", pp), pp + "strip_depth"), pp + "strip_depth");
      c.window_width = positive(num(need(p, "window_width", pp), pp + "window_width"), pp + "window_width");
      c.window_centers = numbers(need(p, "window_centers", pp), pp + "window_centers");
      if (c.window_centers.size() < 4) bad(pp + "window_centers", "at least 4 windows");
      break;
    }
    case JobKind::gap:
      require_kind(c.model, {ModelKind::schottky, ModelKind::billiard}, name);
      c.max_word_length = at_least(int_or(p, "max_word_length", 10, pp), 2, pp + "max_word_length");
      if (p.contains("rectangle")) c.resonance = parse_resonance(p, pp, c.model.kind);
      break;
    case JobKind::fup:
      require_kind(c.model, {ModelKind::cantor}, name);
      c.k_min = at_least(int_or(p, "k_min", 2, pp), 1, pp + "k_min");
      c.k_max = int_or(p, "k_max", 8, pp);
      if (c.k_max < c.k_min + 2) bad(pp + "k_max", "need at least 3 depths (k_max >= k_min + 2)");
      break;
  }
  return c;
}

inline JobConfig load_config(const fs::path& path, std::optional<JobKind> expected = std::nullopt) {
  if (!fs::exists(path)) fail(ErrorKind::ConfigInvalid, "config file does not exist: " + path.string());
  const std::string text = read_file(path);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  JobConfig c = parse_config(root, path.parent_path(), expected);
  c.config_sha256 = sha256_hex(text);
  c.inputs.insert(c.inputs.begin(), {path.string(), c.config_sha256});
  return c;
}

// ── output formatting ────────────────────────────────────────────────────────

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) {
    bool first = true;
    for (const auto& h : header) {
      s_ += (first ? "" : ",") + h;
      first = false;
    }
    s_ += "\n";
  }
  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((s_ += (first ? "" : ","), s_ += cell(cells), first = false), ...);
    s_ += "\n";
  }
  const std::string& str() const { return s_; }

 private:
  static std::string cell(double x) { return fmt17(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(unsigned long x) { return std::to_string(x); }
  static std::string cell(unsigned long long x) { return std::to_string(x); }
  static std::string cell(const std::string& x) { return x; }
  static std::string cell(std::string_view x) { return std::string(x); }
  static std::string cell(const char* x) { return x; }
  std::string s_;
};

/// Numbers in JSON artifacts go through fmt17 so output is stable across library versions.
inline json jnum(double x) {
  if (!std::isfinite(x)) return nullptr;
  return json::parse(fmt17(x));
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ── orbit tables with optional content-addressed cache ───────────────────────

inline std::optional<fs::path> cache_dir() {
  const char* d = std::getenv("RESLAB_CACHE_DIR");
  if (!d || !*d) return std::nullopt;
  return fs::path(d);
}

inline void write_atomic(const fs::path& p, const std::string& data) {
  fs::path tmp = p;
  tmp += ".tmp" + std::to_string(std::hash<std::string>{}(data) & 0xffffff);
  {
    std::ofstream out(tmp, std::ios::binary);
    out << data;
    if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

inline std::string cache_key(const Model& m, const std::string& what, int max_word_length) {
  return sha256_hex(std::string(version) + "|" + what + "|" + std::to_string(max_word_length) + "|" + m.canonical.dump());
}

inline std::vector<schottky::GeodesicClass> geodesics(const Model& m, int N) {
  const auto dir = cache_dir();
  const std::string key = dir ? cache_key(m, "geodesics", N) : "";
  if (dir && fs::exists(*dir / (key + ".csv"))) {
    std::istringstream in(read_file(*dir / (key + ".csv")));
    std::vector<schottky::GeodesicClass> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string w, tr, len;
      std::getline(ls, w, ',');
      std::getline(ls, tr, ',');
      std::getline(ls, len, ',');
      out.push_back({parse_group_word(w, m.group->rank()), std::strtod(tr.c_str(), nullptr), std::strtod(len.c_str(), nullptr)});
    }
    return out;
  }
  auto classes = schottky::enumerate_primitives(*m.group, N);
  if (dir) {
    Csv c{"word", "trace", "length"};
    for (const auto& g : classes) c.row(group_word_string(g.word, m.group->rank()), g.trace, g.length);
    fs::create_directories(*dir);
    write_atomic(*dir / (key + ".csv"), c.str());
  }
  return classes;
}

inline std::vector<billiard::BounceOrbit> bounce_orbits(const Model& m, int N) {
  const auto dir = cache_dir();
  const std::string key = dir ? cache_key(m, "orbits", N) : "";
  if (dir && fs::exists(*dir / (key + ".csv"))) {
    std::istringstream in(read_file(*dir / (key + ".csv")));
    std::vector<billiard::BounceOrbit> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string w, len, lam;
      std::getline(ls, w, ',');
      std::getline(ls, len, ',');
      std::getline(ls, lam, ',');
      billiard::BounceOrbit o;
      o.word = parse_disk_word(w);
      o.length = std::strtod(len.c_str(), nullptr);
      o.lambda = std::strtod(lam.c_str(), nullptr);
      o.jacobian = std::abs(o.lambda);
      out.push_back(std::move(o));
    }
    return out;
  }
  auto orbits = billiard::enumerate_orbits(*m.disks, N);
  if (dir) {
    Csv c{"word", "length", "lambda"};
    for (const auto& o : orbits) c.row(disk_word_string(o.word), o.length, o.lambda);
    fs::create_directories(*dir);
    write_atomic(*dir / (key + ".csv"), c.str());
  }
  return orbits;
}

inline thermo::OrbitEnsemble ensemble(const Model& m, int N) {
  if (m.kind == ModelKind::schottky) return thermo::ensemble_from(geodesics(m, N), N);
  return thermo::ensemble_from(bounce_orbits(m, N), N);
}

// ── job bodies ───────────────────────────────────────────────────────────────

using Outputs = std::map<std::string, std::string>;

struct Logger {
  bool verbose = false;
  void operator()(const std::string& msg) const {
    if (verbose) std::fprintf(stderr, "[reslab] %s\n", msg.c_str());
  }
};

struct ResonanceRun {
  zeros::ResonanceSet set;
  zeros::Plane plane = zeros::Plane::selberg;
};

inline ResonanceRun compute_resonances(const JobConfig& c, Outputs& out, const Logger& log) {
  const auto& r = *c.resonance;
  ResonanceRun run;
  zeros::LocateOptions lo;
  lo.count.density = r.density;
  zeros::Function F;
  std::string truncation;
  std::shared_ptr<void> keep;
  if (c.model.kind == ModelKind::schottky) {
    run.plane = zeros::Plane::selberg;
    const auto& g = *c.model.group;
    if (r.method == "det") {
      truncation = "M=" + std::to_string(r.M);
      auto det = std::make_shared<xfer::FredholmDeterminant>(g, r.M);
      keep = det;
      F = [det](cplx s) { return (*det)(s); };
    } else {
      auto ce = std::make_shared<xfer::SelbergCycleExpansion>(geodesics(c.model, r.max_word_length), r.max_word_length);
      keep = ce;
      truncation = "max_word_length=" + std::to_string(r.max_word_length) +
                   (r.m_max ? ";m_max=" + std::to_string(*r.m_max) : ";m_max=rule");
      F = [ce, mm = r.m_max](cplx s) { return ce->evaluate(s, mm.value_or(xfer::default_m_max(s))).value; };
    }
  } else {
    run.plane = zeros::Plane::wavenumber;
    const auto orbits = bounce_orbits(c.model, r.max_word_length);
    // e^{ikT} turns T/2π times per unit of k: sample the longest term about six times per turn
    double longest = 0;
    for (const auto& o : orbits) longest = std::max(longest, o.length * (r.max_word_length / o.n_bounces()));
    lo.count.density = std::max(lo.count.density, std::ceil(longest));
    auto dz = std::make_shared<billiard::DynamicalZeta>(orbits, r.max_word_length, c.model.dirichlet);
    keep = dz;
    const int mm = r.m_max.value_or(2);
    truncation = "order=" + std::to_string(r.max_word_length) + ";m_max=" + std::to_string(mm);
    F = [dz, mm](cplx k) { return dz->evaluate(k, mm); };
  }
  log("locating zeros, truncation " + truncation);
  run.set = zeros::locate_zeros(F, r.rect, r.tol, lo);
  const std::string source = c.model.kind == ModelKind::schottky ? "selberg_" + r.method : "billiard_zeta";
  run.set.source = source;
  run.set.truncation = truncation;
  Csv csv{"re", "im", "multiplicity", "residual", "source", "truncation"};
  for (const auto& z : run.set.zeros)
    csv.row(z.location.real(), z.location.imag(), z.multiplicity, z.residual, source, truncation);
  out["resonances.csv"] = csv.str();
  if (c.model.kind == ModelKind::billiard) {
    Csv b{"re_k", "im_k", "order"};
    for (const auto& z : run.set.zeros) b.row(z.location.real(), z.location.imag(), r.max_word_length);
    out["billiard_resonances.csv"] = b.str();
  }
  if (r.scan && c.model.kind == ModelKind::schottky) {
    const auto& sc = *r.scan;
    std::vector<cplx> grid;
    for (int i = 0; i < sc.n_re; ++i)
      for (int j = 0; j < sc.n_im; ++j)
        grid.emplace_back(sc.n_re == 1 ? sc.re0 : sc.re0 + (sc.re1 - sc.re0) * i / (sc.n_re - 1),
                          sc.n_im == 1 ? sc.im0 : sc.im0 + (sc.im1 - sc.im0) * j / (sc.n_im - 1));
    std::shared_ptr<xfer::SelbergCycleExpansion> ce;
    if (r.method == "cycle")
      ce = std::make_shared<xfer::SelbergCycleExpansion>(geodesics(c.model, r.max_word_length), r.max_word_length);
    const auto vals = parallel_map(grid.size(), [&](std::size_t i) {
      if (ce) return ce->evaluate(grid[i], r.m_max.value_or(xfer::default_m_max(grid[i])));
      return xfer::zeta_det(*c.model.group, grid[i], r.M);
    });
    Csv z{"re_s", "im_s", "re_zeta", "im_zeta", "method", "truncation", "error_estimate"};
    for (std::size_t i = 0; i < grid.size(); ++i)
      z.row(grid[i].real(), grid[i].imag(), vals[i].value.real(), vals[i].value.imag(), xfer::to_string(vals[i].method),
            vals[i].truncation, vals[i].error_estimate);
    out["zeta_scan.csv"] = z.str();
  }
  return run;
}

inline json ensemble_meta(const thermo::OrbitEnsemble& e) {
  return {{"source", e.source}, {"max_word_length", e.max_word_length}, {"orbit_count", e.entries.size()}};
}

inline void job_orbits(const JobConfig& c, Outputs& out) {
  if (c.model.kind == ModelKind::schottky) {
    Csv csv{"word", "word_length", "trace", "ell_gamma"};
    for (const auto& g : geodesics(c.model, c.max_word_length))
      csv.row(group_word_string(g.word, c.model.group->rank()), g.word_length(), g.trace, g.length);
    out["geodesics.csv"] = csv.str();
  } else {
    Csv csv{"word", "n_bounces", "length", "log_Lambda", "Ju"};
    for (const auto& o : bounce_orbits(c.model, c.max_word_length))
      csv.row(disk_word_string(o.word), o.n_bounces(), o.length, std::log(o.jacobian), o.jacobian);
    out["orbits.csv"] = csv.str();
  }
}

inline void job_pressure(const JobConfig& c, Outputs& out) {
  const auto e = ensemble(c.model, c.max_word_length);
  Csv csv{"beta", "pressure", "method", "max_word_length"};
  json failures = json::array();
  for (auto m : c.methods) {
    const auto vals = parallel_map(c.betas.size(), [&](std::size_t i) -> std::optional<double> {
      try {
        return thermo::pressure(e, c.betas[i], m);
      } catch (const Error& err) {
        if (m == thermo::Method::window && err.kind() == ErrorKind::EmptyWindow) return std::nullopt;
        throw;
      }
    });
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (vals[i]) csv.row(c.betas[i], *vals[i], thermo::to_string(m), c.max_word_length);
      else failures.push_back({{"beta", jnum(c.betas[i])}, {"method", thermo::to_string(m)}, {"error", "EmptyWindow"}});
    }
  }
  out["pressure.csv"] = csv.str();
  out["pressure_report.json"] = dump({{"ensemble", ensemble_meta(e)}, {"failures", failures}});
}

inline void job_dimension(const JobConfig& c, Outputs& out) {
  const auto e = ensemble(c.model, c.max_word_length);
  std::vector<std::pair<std::string, double>> est;
  est.emplace_back("bowen", thermo::bowen_dimension(e));
  json extra = json::object();
  if (c.model.kind == ModelKind::schottky) {
    const auto& g = *c.model.group;
    est.emplace_back("transfer_eigenvalue", xfer::transfer_dimension(g, c.M));
    est.emplace_back("determinant_zero", xfer::largest_real_zero(g, c.M));
    const auto bc = schottky::limit_set_boxcount(g, c.box_depth, schottky::dyadic_scales(c.scale_lo, c.scale_hi));
    est.emplace_back("box_count", bc.dimension_estimate);
    extra["box_count"] = {{"depth", c.box_depth},
                          {"scales_used", bc.scales.size()},
                          {"residual", jnum(bc.residual)},
                          {"large_residual", bc.large_residual}};
  }
  json estimators = json::object(), table = json::array();
  for (const auto& [k, v] : est) estimators[k] = jnum(v);
  for (std::size_t i = 0; i < est.size(); ++i)
    for (std::size_t j = i + 1; j < est.size(); ++j)
      table.push_back({{"a", est[i].first}, {"b", est[j].first}, {"abs_difference", jnum(std::abs(est[i].second - est[j].second))}});
  out["dimension.json"] =
      dump({{"estimators", estimators}, {"agreement", table}, {"ensemble", ensemble_meta(e)}, {"details", extra}});
}

inline json gap_json(const zeros::GapReport& g) {
  json strips = json::array();
  for (const auto& s : g.strips) strips.push_back({{"depth_lo", jnum(s.depth_lo)}, {"depth_hi", jnum(s.depth_hi)}, {"count", s.count}});
  return {{"plane", g.plane == zeros::Plane::selberg ? "s" : "k"},
          {"extremal_zero", {jnum(g.extremal.real()), jnum(g.extremal.imag())}},
          {"max_coordinate", jnum(g.max_coordinate)},
          {"margin", jnum(g.margin)},
          {"observed_gap", jnum(g.observed_gap)},
          {"essential_gap", jnum(g.essential_gap)},
          {"conjecture_probe_line", jnum(g.conjecture_line)},
          {"essential_gap_beyond_conjecture_line", g.essential_gap_beyond_conjecture},
          {"strips", strips}};
}

inline void job_gap(const JobConfig& c, Outputs& out, const Logger& log) {
  const auto e = ensemble(c.model, c.max_word_length);
  const auto gp = thermo::gap_prediction(e);
  json report = {{"pressure_half", jnum(gp.pressure_half)},
                 {"gap_width", jnum(gp.gap_width)},
                 {"informative", gp.informative},
                 {"ensemble", ensemble_meta(e)}};
  if (c.resonance) {
    const auto run = compute_resonances(c, out, log);
    double delta = 0;
    try {
      delta = thermo::bowen_dimension(e);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::NoBracket) throw;
    }
    if (!run.set.zeros.empty()) report["resonances"] = gap_json(zeros::gap_report(run.set, run.plane, delta, gp.pressure_half));
    report["delta"] = jnum(delta);
  }
  out["gap.json"] = dump(report);
}

inline void job_weyl(const JobConfig& c, Outputs& out, const Logger& log) {
  const auto run = compute_resonances(c, out, log);
  const auto f = zeros::weyl_fit(run.set, run.plane, c.strip_depth, c.window_width, c.window_centers);
  json windows = json::array();
  for (std::size_t i = 0; i < f.window_centers.size(); ++i)
    windows.push_back({{"center", jnum(f.window_centers[i])}, {"count", f.counts[i]}});
  out["weyl_fit.json"] = dump({{"exponent", jnum(f.exponent)},
                               {"prefactor", jnum(f.prefactor)},
                               {"strip_depth", jnum(f.strip_depth)},
                               {"window_width", jnum(f.window_width)},
                               {"windows", windows},
                               {"residual", jnum(f.residual)},
                               {"point_count", f.point_count}});
}

inline void job_fup(const JobConfig& c, Outputs& out) {
  const auto& s = *c.model.cantor;
  fup::NormOptions opt;
  opt.seed = c.seed;
  const auto e = fup::fup_exponent(s, c.k_min, c.k_max, opt);
  Csv csv{"M", "alphabet", "k", "N", "set_size", "norm", "beta_k"};
  for (const auto& r : e.table) csv.row(s.M, s.alphabet_string(), r.k, r.N, r.set_size, r.norm, r.beta);
  out["fup.csv"] = csv.str();
  out["fup.json"] = dump({{"model", "discrete digit-set model"},
                          {"delta", jnum(s.delta())},
                          {"beta_estimate", jnum(e.beta_estimate)},
                          {"last_step_change", jnum(e.last_step_change)},
                          {"lower_bound", jnum(e.lower_bound)},
                          {"lower_bound_holds", e.lower_bound_holds}});
}

inline Outputs compute(const JobConfig& c, const Logger& log = {}) {
  Outputs out;
  log("job " + to_string(c.kind));
  switch (c.kind) {
    case JobKind::orbits: job_orbits(c, out); break;
    case JobKind::resonances: compute_resonances(c, out, log); break;
    case JobKind::pressure: job_pressure(c, out); break;
    case JobKind::dimension: job_dimension(c, out); break;
    case JobKind::gap: job_gap(c, out, log); break;
    case JobKind::weyl_fit: job_weyl(c, out, log); break;
    case JobKind::fup: job_fup(c, out); break;
  }
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Runs the job and commits its outputs plus manifest.json into out_dir.
/// Nothing appears in out_dir unless the whole job succeeds.
inline json run_job(const JobConfig& c, const fs::path& out_dir, const Logger& log = {}) {
  Outputs out = compute(c, log);
  json inputs = json::array(), files = json::array();
  for (const auto& [p, h] : c.inputs) inputs.push_back({{"path", p}, {"sha256", h}});
  for (const auto& [name, data] : out) files.push_back({{"file", name}, {"sha256", sha256_hex(data)}, {"bytes", data.size()}});
  json manifest = {{"tool", "reslab"},
                   {"version", std::string(version)},
                   {"schema_version", schema_version},
                   {"job", to_string(c.kind)},
                   {"config_sha256", c.config_sha256},
                   {"inputs", inputs},
                   {"outputs", files},
                   {"created_utc", utc_timestamp()}};

  fs::create_directories(out_dir.parent_path().empty() ? fs::path(".") : out_dir.parent_path());
  fs::path stage = out_dir;
  stage += ".staging-" + std::to_string(::getpid());
  fs::remove_all(stage);
  fs::create_directories(stage);
  try {
    for (const auto& [name, data] : out) {
      std::ofstream f(stage / name, std::ios::binary);
      f << data;
      if (!f) fail(ErrorKind::InvalidArgument, "cannot write " + (stage / name).string());
    }
    {
      std::ofstream f(stage / "manifest.json", std::ios::binary);
      f << dump(manifest);
    }
    if (!fs::exists(out_dir)) {
      fs::rename(stage, out_dir);
    } else {
      for (const auto& [name, data] : out) fs::rename(stage / name, out_dir / name);
      fs::rename(stage / "manifest.json", out_dir / "manifest.json");
      fs::remove_all(stage);
    }
  } catch (...) {
    std::error_code ec;
    fs::remove_all(stage, ec);
    throw;
  }
  log("wrote " + std::to_string(out.size() + 1) + " files to " + out_dir.string());
  return manifest;
}

}  // namespace reslab::jobs
