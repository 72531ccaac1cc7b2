#include "tmflow/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace tmflow {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Collects field-level issues instead of stopping at the first one.
class Reader {
 public:
  void fail(const std::string& path, const std::string& reason) { issues_.push_back(path + ": " + reason); }
  const std::vector<std::string>& issues() const { return issues_; }

  bool object(const json& j, const std::string& path) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    return true;
  }

  void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) return;
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
      if (!ok.contains(key)) fail(join(path, key), "unknown key '" + key + "'");
    }
  }

  const json* field(const json& j, const std::string& path, const char* key, bool required = true) {
    if (!j.is_object() || !j.contains(key)) {
      if (required) fail(join(path, key), "missing required field");
      return nullptr;
    }
    return &j.at(key);
  }

  std::optional<double> number(const json& j, const std::string& path, const char* key, bool required = true) {
    const json* v = field(j, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(join(path, key), "expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::size_t> count(const json& j, const std::string& path, const char* key, bool required = true) {
    const json* v = field(j, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned()) {
      fail(join(path, key), "expected a non-negative integer");
      return std::nullopt;
    }
    return v->get<std::size_t>();
  }

  std::optional<std::string> string(const json& j, const std::string& path, const char* key, bool required = true) {
    const json* v = field(j, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      fail(join(path, key), "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<Eigen::VectorXd> vector(const json& j, const std::string& path, const char* key) {
    const json* v = field(j, path, key);
    if (!v) return std::nullopt;
    return as_vector(*v, join(path, key));
  }

  std::optional<Eigen::VectorXd> as_vector(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) {
      fail(path, "expected a non-empty array of numbers");
      return std::nullopt;
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        fail(path + "[" + std::to_string(i) + "]", "expected a number");
        return std::nullopt;
      }
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::vector<std::string> issues_;
};

std::optional<FunctionalSpec> read_functional(Reader& r, const json& j, const std::string& path) {
  if (!r.object(j, path)) return std::nullopt;
  const auto kind = r.string(j, path, "kind");
  if (!kind) return std::nullopt;

  if (*kind == "shifted_sq") {
    r.only_keys(j, path, {"kind", "center"});
    auto c = r.vector(j, path, "center");
    if (!c) return std::nullopt;
    return shifted_square(*c);
  }
  if (*kind == "half_sq") {
    r.only_keys(j, path, {"kind"});
    return half_square();
  }
  if (*kind == "custom_quadratic") {
    r.only_keys(j, path, {"kind", "A", "b"});
    const json* a = r.field(j, path, "A");
    auto b = r.vector(j, path, "b");
    if (!a || !b) return std::nullopt;
    const auto d = b->size();
    if (!a->is_array() || static_cast<Eigen::Index>(a->size()) != d) {
      r.fail(Reader::join(path, "A"), "expected " + std::to_string(d) + " rows");
      return std::nullopt;
    }
    Eigen::MatrixXd A(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      auto row = r.as_vector((*a)[static_cast<std::size_t>(i)], Reader::join(path, "A") + "[" + std::to_string(i) + "]");
      if (!row || row->size() != d) {
        if (row) r.fail(Reader::join(path, "A"), "rows must have length " + std::to_string(d));
        return std::nullopt;
      }
      A.row(i) = row->transpose();
    }
    return custom_quadratic(A, *b);
  }
  if (*kind == "interaction") {
    r.only_keys(j, path, {"kind", "w"});
    auto w = r.string(j, path, "w", false);
    if (w && *w != "sq_distance") {
      r.fail(Reader::join(path, "w"), "only 'sq_distance' is supported");
      return std::nullopt;
    }
    return squared_distance_interaction();
  }
  if (*kind == "neg_entropy_knn") {
    r.only_keys(j, path, {"kind", "k"});
    auto k = r.count(j, path, "k", false);
    if (k && *k < 1) {
      r.fail(Reader::join(path, "k"), "must be at least 1");
      return std::nullopt;
    }
    return knn_neg_entropy(k.value_or(5));
  }
  if (*kind == "scaled") {
    r.only_keys(j, path, {"kind", "factor", "inner"});
    auto factor = r.number(j, path, "factor");
    const json* inner = r.field(j, path, "inner");
    std::optional<FunctionalSpec> in = inner ? read_functional(r, *inner, Reader::join(path, "inner")) : std::nullopt;
    if (factor && !(*factor > 0.0)) {
      r.fail(Reader::join(path, "factor"), "must be positive");
      return std::nullopt;
    }
    if (!factor || !in) return std::nullopt;
    return scaled(*factor, std::move(*in));
  }
  if (*kind == "sum") {
    r.only_keys(j, path, {"kind", "terms"});
    const json* terms = r.field(j, path, "terms");
    if (!terms) return std::nullopt;
    if (!terms->is_array() || terms->empty()) {
      r.fail(Reader::join(path, "terms"), "expected a non-empty array");
      return std::nullopt;
    }
    std::vector<FunctionalSpec> out;
    bool ok = true;
    for (std::size_t i = 0; i < terms->size(); ++i) {
      auto t = read_functional(r, (*terms)[i], Reader::join(path, "terms") + "[" + std::to_string(i) + "]");
      if (t) {
        out.push_back(std::move(*t));
      } else {
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    return sum(std::move(out));
  }
  r.fail(Reader::join(path, "kind"), "unknown functional kind '" + *kind + "'");
  return std::nullopt;
}

std::optional<SamplerSpec> read_sampler(Reader& r, const json& j, const std::string& path) {
  if (!r.object(j, path)) return std::nullopt;
  const auto kind = r.string(j, path, "kind");
  const auto seed = r.count(j, path, "seed");
  if (!kind) return std::nullopt;
  SamplerSpec spec;
  if (*kind == "uniform_box") {
    r.only_keys(j, path, {"kind", "seed", "lo", "hi"});
    auto lo = r.vector(j, path, "lo");
    auto hi = r.vector(j, path, "hi");
    if (!lo || !hi) return std::nullopt;
    spec.kind = UniformBox{*lo, *hi};
  } else if (*kind == "gaussian") {
    r.only_keys(j, path, {"kind", "seed", "mean", "cov_diag"});
    auto m = r.vector(j, path, "mean");
    auto c = r.vector(j, path, "cov_diag");
    if (!m || !c) return std::nullopt;
    spec.kind = Gaussian{*m, *c};
  } else if (*kind == "grid") {
    r.only_keys(j, path, {"kind", "seed", "lo", "hi", "counts"});
    auto lo = r.vector(j, path, "lo");
    auto hi = r.vector(j, path, "hi");
    const json* counts = r.field(j, path, "counts");
    if (!lo || !hi || !counts) return std::nullopt;
    Grid g{*lo, *hi, {}};
    if (!counts->is_array()) {
      r.fail(Reader::join(path, "counts"), "expected an array of positive integers");
      return std::nullopt;
    }
    for (const auto& c : *counts) {
      if (!c.is_number_unsigned()) {
        r.fail(Reader::join(path, "counts"), "expected an array of positive integers");
        return std::nullopt;
      }
      g.counts.push_back(c.get<std::size_t>());
    }
    spec.kind = std::move(g);
  } else {
    r.fail(Reader::join(path, "kind"), "unknown sampler kind '" + *kind + "'");
    return std::nullopt;
  }
  if (!seed) return std::nullopt;
  spec.seed = *seed;
  return spec;
}

std::optional<Method> method_from(const std::string& s) {
  if (s == "gd") return Method::gd;
  if (s == "accelerated") return Method::accelerated;
  if (s == "both") return Method::both;
  if (s == "ode") return Method::ode;
  if (s == "accelerated_ode") return Method::accelerated_ode;
  return std::nullopt;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

FunctionalSpec with_k(const FunctionalSpec& spec, std::size_t k) {
  return std::visit(overloaded{
                        [&](const KnnNegEntropy&) { return knn_neg_entropy(k); },
                        [&](const Scaled& s) { return scaled(s.factor, with_k(*s.inner, k)); },
                        [&](const Sum& s) {
                          std::vector<FunctionalSpec> terms;
                          for (const auto& t : s.terms) terms.push_back(with_k(t, k));
                          return sum(std::move(terms));
                        },
                        [&](const auto&) { return spec; },
                    },
                    spec.kind);
}

}  // namespace

ConfigParseError::ConfigParseError(std::vector<std::string> issues)
    : ConfigError([&] {
        std::string msg = "invalid experiment config:";
        for (const auto& i : issues) msg += "\n  " + i;
        return msg;
      }()),
      issues_(std::move(issues)) {}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigParseError({std::string("document: ") + e.what()});
  }
  Reader r;
  ExperimentConfig cfg;
  if (!r.object(doc, "config")) throw ConfigParseError(r.issues());
  r.only_keys(doc, "", {"name", "functional", "sampler", "n_particles", "dim", "tau", "method", "steps", "reference",
                        "knn_k", "ode", "output_dir"});

  if (auto name = r.string(doc, "", "name")) cfg.name = *name;
  std::optional<FunctionalSpec> functional;
  if (const json* f = r.field(doc, "", "functional")) functional = read_functional(r, *f, "functional");
  std::optional<SamplerSpec> sampler;
  if (const json* s = r.field(doc, "", "sampler")) sampler = read_sampler(r, *s, "sampler");

  auto n = r.count(doc, "", "n_particles");
  if (n && *n < 1) r.fail("n_particles", "must be at least 1");
  auto dim = r.count(doc, "", "dim");
  if (dim && *dim < 1) r.fail("dim", "must be at least 1");
  auto steps = r.count(doc, "", "steps");
  if (steps && *steps < 1) r.fail("steps", "must be at least 1");

  if (const json* tau = r.field(doc, "", "tau")) {
    if (!tau->is_array() || tau->empty()) {
      r.fail("tau", "expected a non-empty array of positive numbers");
    } else {
      for (std::size_t i = 0; i < tau->size(); ++i) {
        const json& t = (*tau)[i];
        if (!t.is_number() || !(t.get<double>() > 0.0)) {
          r.fail("tau[" + std::to_string(i) + "]", "tau entries must be positive numbers");
        } else {
          cfg.tau.push_back(t.get<double>());
        }
      }
    }
  }

  if (auto m = r.string(doc, "", "method")) {
    if (auto parsed = method_from(*m)) {
      cfg.method = *parsed;
    } else {
      r.fail("method", "expected one of gd, accelerated, both, ode, accelerated_ode");
    }
  }

  if (const json* ref = r.field(doc, "", "reference", false)) {
    if (r.object(*ref, "reference")) {
      auto kind = r.string(*ref, "reference", "kind");
      if (kind && *kind == "constant_map") {
        r.only_keys(*ref, "reference", {"kind", "center"});
        if (auto c = r.vector(*ref, "reference", "center")) cfg.reference = ConstantMapReference{*c};
      } else if (kind && *kind == "analytic_fstar") {
        r.only_keys(*ref, "reference", {"kind", "value"});
        if (auto v = r.number(*ref, "reference", "value")) cfg.reference = AnalyticFStar{*v};
      } else if (kind) {
        r.fail("reference.kind", "expected constant_map or analytic_fstar");
      }
    }
  }

  if (auto k = r.count(doc, "", "knn_k", false)) {
    if (*k < 1) r.fail("knn_k", "must be at least 1");
    cfg.knn_k = *k;
  }

  if (const json* ode = r.field(doc, "", "ode", false)) {
    if (r.object(*ode, "ode")) {
      r.only_keys(*ode, "ode", {"t0", "t_end", "r"});
      OdeSettings s;
      if (auto t0 = r.number(*ode, "ode", "t0", false)) s.t0 = *t0;
      if (auto te = r.number(*ode, "ode", "t_end")) s.t_end = *te;
      s.r = r.number(*ode, "ode", "r", false);
      if (!(s.t0 > 0.0)) r.fail("ode.t0", "must be positive");
      if (!(s.t_end > s.t0)) r.fail("ode.t_end", "must exceed t0");
      if (s.r && !(*s.r >= 2.0)) r.fail("ode.r", "must be at least 2");
      cfg.ode = s;
    }
  }
  if ((cfg.method == Method::ode || cfg.method == Method::accelerated_ode) && !doc.contains("ode")) {
    r.fail("ode", "required for method " + to_string(cfg.method));
  }
  if (cfg.method == Method::accelerated_ode && cfg.ode && !cfg.ode->r) r.fail("ode.r", "required for accelerated_ode");
  if (cfg.method == Method::ode && cfg.ode && cfg.ode->r) r.fail("ode.r", "only valid for accelerated_ode");

  if (auto out = r.string(doc, "", "output_dir", false)) cfg.output_dir = *out;

  // Cross-field checks once the pieces exist.
  if (functional && dim) {
    try {
      validate(*functional, *dim);
    } catch (const ConfigError& e) {
      r.fail("functional", e.what());
    }
  }
  if (sampler && dim) {
    try {
      validate(*sampler, *dim);
      if (const auto* g = std::get_if<Grid>(&sampler->kind); g && n) {
        std::size_t total = 1;
        for (std::size_t c : g->counts) total *= c;
        if (total != *n) r.fail("n_particles", "grid sampler has " + std::to_string(total) + " nodes");
      }
    } catch (const ConfigError& e) {
      r.fail("sampler", e.what());
    }
  }
  if (cfg.reference && dim) {
    if (const auto* c = std::get_if<ConstantMapReference>(&*cfg.reference);
        c && static_cast<std::size_t>(c->center.size()) != *dim) {
      r.fail("reference.center", "must have length dim");
    }
  }
  if (functional && cfg.reference && std::holds_alternative<ConstantMapReference>(*cfg.reference) &&
      has_entropy_term(*functional)) {
    r.fail("reference", "constant_map collapses all particles; not usable with an entropy term");
  }

  if (!r.issues().empty()) throw ConfigParseError(r.issues());
  cfg.functional = std::move(*functional);
  cfg.sampler = std::move(*sampler);
  cfg.n_particles = *n;
  cfg.dim = *dim;
  cfg.steps = *steps;
  if (cfg.output_dir.empty()) cfg.output_dir = "out/" + cfg.name;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_string(Method m) {
  switch (m) {
    case Method::gd: return "gd";
    case Method::accelerated: return "accelerated";
    case Method::both: return "both";
    case Method::ode: return "ode";
    case Method::accelerated_ode: return "accelerated_ode";
  }
  return "unknown";
}

json to_json(const FunctionalSpec& spec) {
  return std::visit(overloaded{
                        [](const ShiftedSquare& s) { return json{{"kind", "shifted_sq"}, {"center", vec_json(s.center)}}; },
                        [](const HalfSquare&) { return json{{"kind", "half_sq"}}; },
                        [](const CustomQuadratic& q) {
                          json rows = json::array();
                          for (Eigen::Index i = 0; i < q.A.rows(); ++i) rows.push_back(vec_json(q.A.row(i).transpose()));
                          return json{{"kind", "custom_quadratic"}, {"A", rows}, {"b", vec_json(q.b)}};
                        },
                        [](const SquaredDistanceInteraction&) { return json{{"kind", "interaction"}, {"w", "sq_distance"}}; },
                        [](const KnnNegEntropy& e) { return json{{"kind", "neg_entropy_knn"}, {"k", e.k}}; },
                        [](const Scaled& s) { return json{{"kind", "scaled"}, {"factor", s.factor}, {"inner", to_json(*s.inner)}}; },
                        [](const Sum& s) {
                          json terms = json::array();
                          for (const auto& t : s.terms) terms.push_back(to_json(t));
                          return json{{"kind", "sum"}, {"terms", terms}};
                        },
                    },
                    spec.kind);
}

json to_json(const SamplerSpec& spec) {
  json j = std::visit(overloaded{
                          [](const UniformBox& b) { return json{{"kind", "uniform_box"}, {"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}}; },
                          [](const Gaussian& g) {
                            return json{{"kind", "gaussian"}, {"mean", vec_json(g.mean)}, {"cov_diag", vec_json(g.cov_diag)}};
                          },
                          [](const Grid& g) {
                            return json{{"kind", "grid"}, {"lo", vec_json(g.lo)}, {"hi", vec_json(g.hi)}, {"counts", g.counts}};
                          },
                      },
                      spec.kind);
  j["seed"] = spec.seed;
  return j;
}

json to_json(const ExperimentConfig& cfg) {
  json j{{"name", cfg.name},
         {"functional", to_json(cfg.functional)},
         {"sampler", to_json(cfg.sampler)},
         {"n_particles", cfg.n_particles},
         {"dim", cfg.dim},
         {"tau", cfg.tau},
         {"method", to_string(cfg.method)},
         {"steps", cfg.steps},
         {"output_dir", cfg.output_dir}};
  if (cfg.reference) {
    j["reference"] = std::visit(overloaded{
                                    [](const ConstantMapReference& c) { return json{{"kind", "constant_map"}, {"center", vec_json(c.center)}}; },
                                    [](const AnalyticFStar& a) { return json{{"kind", "analytic_fstar"}, {"value", a.value}}; },
                                },
                                *cfg.reference);
  }
  if (cfg.knn_k) j["knn_k"] = *cfg.knn_k;
  if (cfg.ode) {
    json o{{"t0", cfg.ode->t0}, {"t_end", cfg.ode->t_end}};
    if (cfg.ode->r) o["r"] = *cfg.ode->r;
    j["ode"] = o;
  }
  return j;
}

FunctionalSpec effective_functional(const ExperimentConfig& cfg) {
  return cfg.knn_k ? with_k(cfg.functional, *cfg.knn_k) : cfg.functional;
}

}  // namespace tmflow
