#include "openstab/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace openstab {

ConfigError::ConfigError(ConfigErrorKind kind, std::string where, const std::string& what, std::size_t line)
    : std::runtime_error(where + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
      kind_(kind),
      where_(std::move(where)),
      line_(line) {}

namespace {

constexpr std::array<std::pair<AnalysisKind, std::string_view>, 6> kKinds{{
    {AnalysisKind::simulate, "simulate"},
    {AnalysisKind::distance, "distance"},
    {AnalysisKind::stability, "stability"},
    {AnalysisKind::morphism, "morphism"},
    {AnalysisKind::transfer, "transfer"},
    {AnalysisKind::sweep, "sweep"},
}};

[[noreturn]] void fail(ConfigErrorKind kind, const std::string& where, const std::string& what) {
  throw ConfigError(kind, where, what);
}

const Json& need(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(ConfigErrorKind::invalid, where, std::string("missing \"") + key + "\"");
  return obj.at(key);
}

std::string need_string(const Json& obj, const char* key, const std::string& where) {
  const Json& v = need(obj, key, where);
  if (!v.is_string() || v.get<std::string>().empty())
    fail(ConfigErrorKind::invalid, where + "." + key, "expected a non-empty string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(ConfigErrorKind::invalid, where, "expected a non-empty array of strings");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) fail(ConfigErrorKind::invalid, where, "expected expression strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

DomainSpec domain_at(const Json& obj, std::size_t dim, const std::string& where) {
  try {
    return domain_from_json(obj.contains("domain") ? obj.at("domain") : Json(nullptr), dim);
  } catch (const std::invalid_argument& e) {
    const bool size_issue = obj.at("domain").is_array() && obj.at("domain").size() != dim;
    fail(size_issue ? ConfigErrorKind::dimension_mismatch : ConfigErrorKind::invalid, where + ".domain", e.what());
  }
}

template <class T>
void check_unique(const std::vector<T>& items, const char* section) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!seen.insert(items[i].name).second)
      fail(ConfigErrorKind::invalid, std::string(section) + "[" + std::to_string(i) + "]",
           "duplicate name '" + items[i].name + "'");
}

template <class T>
const T* find_named(const std::vector<T>& items, const std::string& name) {
  for (const auto& it : items)
    if (it.name == name) return &it;
  return nullptr;
}

void apply_integrator(IntegratorConfig& c, const Json& j, const std::string& where) {
  static const std::set<std::string> keys{"rtol",    "atol",         "horizon",      "max_step",
                                          "initial_step", "blowup_norm", "domain_margin"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) continue;
    try {
      const double v = parse_number(it.value());
      if (it.key() == "rtol") c.rtol = v;
      if (it.key() == "atol") c.atol = v;
      if (it.key() == "horizon") c.horizon = v;
      if (it.key() == "max_step") c.max_step = v;
      if (it.key() == "initial_step") c.initial_step = v;
      if (it.key() == "blowup_norm") c.blowup_norm = v;
      if (it.key() == "domain_margin") c.domain_margin = v;
    } catch (const std::exception& e) {
      fail(ConfigErrorKind::invalid, where + "." + it.key(), e.what());
    }
  }
  try {
    c.validate();
  } catch (const std::exception& e) {
    fail(ConfigErrorKind::invalid, where, e.what());
  }
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::string_view to_string(AnalysisKind k) {
  for (const auto& [kind, name] : kKinds)
    if (kind == k) return name;
  return "?";
}

std::optional<AnalysisKind> analysis_kind(std::string_view name) {
  for (const auto& [kind, n] : kKinds)
    if (n == name) return kind;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

const VectorFieldSpec& ProjectConfig::system(const std::string& name) const {
  for (const auto& s : resolved_systems_)
    if (s.name() == name) return s;
  throw ConfigError(ConfigErrorKind::dangling_reference, "systems", "unknown system '" + name + "'");
}

const SmoothMapSpec& ProjectConfig::map(const std::string& name) const {
  for (const auto& m : resolved_maps_)
    if (m.name() == name) return m;
  throw ConfigError(ConfigErrorKind::dangling_reference, "maps", "unknown map '" + name + "'");
}

MorphismDecl ProjectConfig::morphism(const std::string& name) const {
  const MorphismDef* d = find_named(morphisms, name);
  if (!d) throw ConfigError(ConfigErrorKind::dangling_reference, "morphisms", "unknown morphism '" + name + "'");
  return MorphismDecl(map(d->map), system(d->source), system(d->target));
}

IntegratorConfig ProjectConfig::integrator_for(const Json& local, IntegratorConfig base) const {
  apply_integrator(base, integrator, "integrator");
  if (local.is_object()) {
    if (local.contains("integrator")) apply_integrator(base, local.at("integrator"), "integrator");
    if (local.contains("horizon")) {
      Json h{{"horizon", local.at("horizon")}};
      apply_integrator(base, h, "horizon");
    }
  }
  return base;
}

bool ProjectConfig::same_as(const ProjectConfig& o) const {
  if (!(systems == o.systems && maps == o.maps && morphisms == o.morphisms && analyses == o.analyses &&
        output == o.output && integrator == o.integrator && seed == o.seed))
    return false;
  if (resolved_systems_.size() != o.resolved_systems_.size() || resolved_maps_.size() != o.resolved_maps_.size())
    return false;
  for (std::size_t i = 0; i < resolved_systems_.size(); ++i) {
    const auto &a = resolved_systems_[i], &b = o.resolved_systems_[i];
    if (a.name() != b.name() || !(a.domain() == b.domain()) || a.components().size() != b.components().size())
      return false;
    for (std::size_t k = 0; k < a.components().size(); ++k)
      if (a.components()[k].to_string() != b.components()[k].to_string()) return false;
  }
  for (std::size_t i = 0; i < resolved_maps_.size(); ++i) {
    const auto &a = resolved_maps_[i], &b = o.resolved_maps_[i];
    if (a.name() != b.name() || !(a.source_domain() == b.source_domain()) ||
        a.components().size() != b.components().size())
      return false;
    for (std::size_t k = 0; k < a.components().size(); ++k)
      if (a.components()[k].to_string() != b.components()[k].to_string()) return false;
  }
  return true;
}

void ProjectConfig::resolve() {
  resolved_systems_.clear();
  resolved_maps_.clear();
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const auto& s = systems[i];
    try {
      resolved_systems_.emplace_back(s.name, s.components, s.domain);
    } catch (const std::exception& e) {
      fail(ConfigErrorKind::invalid, "systems[" + std::to_string(i) + "].components", e.what());
    }
  }
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& m = maps[i];
    try {
      resolved_maps_.emplace_back(m.name, m.dim, m.components, m.domain);
    } catch (const std::exception& e) {
      fail(ConfigErrorKind::invalid, "maps[" + std::to_string(i) + "].components", e.what());
    }
  }
}

ProjectConfig parse_config(const std::string& text, const std::string& origin) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(ConfigErrorKind::parse, origin, e.what(), line_of(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  if (!root.is_object()) fail(ConfigErrorKind::invalid, origin, "top level must be a JSON object");

  static const std::set<std::string> top{"systems", "maps", "morphisms", "analyses", "output", "integrator", "seed"};
  for (auto it = root.begin(); it != root.end(); ++it)
    if (!top.count(it.key())) fail(ConfigErrorKind::invalid, it.key(), "unknown top-level key");

  ProjectConfig cfg;
  const Json& systems = need(root, "systems", "<root>");
  if (!systems.is_array() || systems.empty()) fail(ConfigErrorKind::invalid, "systems", "expected a non-empty array");
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const std::string where = "systems[" + std::to_string(i) + "]";
    const Json& s = systems[i];
    SystemDef d;
    d.name = need_string(s, "name", where);
    d.components = string_list(need(s, "components", where), where + ".components");
    const Json& dim = need(s, "dim", where);
    if (!dim.is_number_unsigned() || dim.get<std::size_t>() == 0)
      fail(ConfigErrorKind::invalid, where + ".dim", "expected a positive integer");
    d.dim = dim.get<std::size_t>();
    if (d.components.size() != d.dim)
      fail(ConfigErrorKind::dimension_mismatch, where + ".components",
           std::to_string(d.components.size()) + " component(s) for dimension " + std::to_string(d.dim));
    d.domain = domain_at(s, d.dim, where);
    cfg.systems.push_back(std::move(d));
  }
  check_unique(cfg.systems, "systems");

  if (root.contains("maps")) {
    const Json& maps = root.at("maps");
    if (!maps.is_array()) fail(ConfigErrorKind::invalid, "maps", "expected an array");
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const std::string where = "maps[" + std::to_string(i) + "]";
      const Json& m = maps[i];
      MapDef d;
      d.name = need_string(m, "name", where);
      d.components = string_list(need(m, "components", where), where + ".components");
      if (m.contains("source")) {
        d.source = need_string(m, "source", where);
        const SystemDef* src = find_named(cfg.systems, *d.source);
        if (!src) fail(ConfigErrorKind::dangling_reference, where + ".source", "unknown system '" + *d.source + "'");
        d.dim = src->dim;
        if (m.contains("dim") && m.at("dim") != Json(d.dim))
          fail(ConfigErrorKind::dimension_mismatch, where + ".dim", "does not match the source system");
        d.domain = m.contains("domain") ? domain_at(m, d.dim, where) : src->domain;
      } else {
        const Json& dim = need(m, "dim", where);
        if (!dim.is_number_unsigned() || dim.get<std::size_t>() == 0)
          fail(ConfigErrorKind::invalid, where + ".dim", "expected a positive integer");
        d.dim = dim.get<std::size_t>();
        d.domain = domain_at(m, d.dim, where);
      }
      cfg.maps.push_back(std::move(d));
    }
    check_unique(cfg.maps, "maps");
  }

  if (root.contains("morphisms")) {
    const Json& ms = root.at("morphisms");
    if (!ms.is_array()) fail(ConfigErrorKind::invalid, "morphisms", "expected an array");
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string where = "morphisms[" + std::to_string(i) + "]";
      MorphismDef d{need_string(ms[i], "name", where), need_string(ms[i], "map", where),
                    need_string(ms[i], "source", where), need_string(ms[i], "target", where)};
      const MapDef* map = find_named(cfg.maps, d.map);
      const SystemDef* src = find_named(cfg.systems, d.source);
      const SystemDef* tgt = find_named(cfg.systems, d.target);
      if (!map) fail(ConfigErrorKind::dangling_reference, where + ".map", "unknown map '" + d.map + "'");
      if (!src) fail(ConfigErrorKind::dangling_reference, where + ".source", "unknown system '" + d.source + "'");
      if (!tgt) fail(ConfigErrorKind::dangling_reference, where + ".target", "unknown system '" + d.target + "'");
      if (map->dim != src->dim)
        fail(ConfigErrorKind::dimension_mismatch, where, "map source dimension differs from the source system");
      if (map->components.size() != tgt->dim)
        fail(ConfigErrorKind::dimension_mismatch, where, "map target dimension differs from the target system");
      cfg.morphisms.push_back(std::move(d));
    }
    check_unique(cfg.morphisms, "morphisms");
  }

  const Json& analyses = need(root, "analyses", "<root>");
  if (!analyses.is_array()) fail(ConfigErrorKind::invalid, "analyses", "expected an array");
  if (analyses.empty()) fail(ConfigErrorKind::invalid, "analyses", "at least one analysis is required");
  for (std::size_t i = 0; i < analyses.size(); ++i) {
    const std::string where = "analyses[" + std::to_string(i) + "]";
    const Json& a = analyses[i];
    AnalysisDef d;
    const std::string kind = need_string(a, "kind", where);
    auto k = analysis_kind(kind);
    if (!k) fail(ConfigErrorKind::invalid, where + ".kind", "unknown analysis kind '" + kind + "'");
    d.kind = *k;
    d.name = a.contains("name") ? need_string(a, "name", where) : kind + "_" + std::to_string(i);
    d.params = a;
    d.params.erase("kind");
    d.params.erase("name");

    std::size_t dim = 0;
    if (d.kind == AnalysisKind::morphism || d.kind == AnalysisKind::transfer) {
      const std::string m = need_string(a, "morphism", where);
      const MorphismDef* md = find_named(cfg.morphisms, m);
      if (!md) fail(ConfigErrorKind::dangling_reference, where + ".morphism", "unknown morphism '" + m + "'");
      dim = find_named(cfg.systems, md->source)->dim;
    } else {
      const std::string s = need_string(a, "system", where);
      const SystemDef* sd = find_named(cfg.systems, s);
      if (!sd) fail(ConfigErrorKind::dangling_reference, where + ".system", "unknown system '" + s + "'");
      dim = sd->dim;
    }
    for (const char* key : {"x0", "y0"})
      if (a.contains(key) && (!a.at(key).is_array() || a.at(key).size() != dim))
        fail(ConfigErrorKind::dimension_mismatch, where + "." + key, "expected " + std::to_string(dim) + " coordinates");
    if (a.contains("region") && (!a.at("region").is_array() || a.at("region").size() != dim))
      fail(ConfigErrorKind::dimension_mismatch, where + ".region", "expected " + std::to_string(dim) + " intervals");
    cfg.analyses.push_back(std::move(d));
  }
  check_unique(cfg.analyses, "analyses");

  if (root.contains("output")) {
    if (!root.at("output").is_string()) fail(ConfigErrorKind::invalid, "output", "expected a string");
    cfg.output = root.at("output").get<std::string>();
  }
  if (root.contains("integrator")) {
    if (!root.at("integrator").is_object()) fail(ConfigErrorKind::invalid, "integrator", "expected an object");
    cfg.integrator = root.at("integrator");
    IntegratorConfig probe;
    apply_integrator(probe, cfg.integrator, "integrator");
  }
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) fail(ConfigErrorKind::invalid, "seed", "expected an unsigned integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();
  }

  cfg.resolve();
  return cfg;
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ConfigErrorKind::io, path.string(), "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

Json serialize_config(const ProjectConfig& c) {
  Json root;
  Json systems = Json::array();
  for (const auto& s : c.systems)
    systems.push_back({{"name", s.name}, {"dim", s.dim}, {"components", s.components}, {"domain", to_json(s.domain)}});
  root["systems"] = systems;
  Json maps = Json::array();
  for (const auto& m : c.maps) {
    Json j{{"name", m.name}, {"dim", m.dim}, {"components", m.components}, {"domain", to_json(m.domain)}};
    if (m.source) j["source"] = *m.source;
    maps.push_back(j);
  }
  root["maps"] = maps;
  Json morphisms = Json::array();
  for (const auto& m : c.morphisms)
    morphisms.push_back({{"name", m.name}, {"map", m.map}, {"source", m.source}, {"target", m.target}});
  root["morphisms"] = morphisms;
  Json analyses = Json::array();
  for (const auto& a : c.analyses) {
    Json j = a.params;
    j["kind"] = to_string(a.kind);
    j["name"] = a.name;
    analyses.push_back(j);
  }
  root["analyses"] = analyses;
  root["output"] = c.output;
  if (!c.integrator.empty()) root["integrator"] = c.integrator;
  if (c.seed) root["seed"] = *c.seed;
  return root;
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace openstab
