#include "config.hpp"

#include <map>
#include <set>

#include "cfs/common.hpp"

namespace cfs::cli {

namespace {

[[noreturn]] void schema_fail(const std::string& msg) { throw Error(ErrorCode::schema_error, msg); }

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::integer: return "an integer";
    case Kind::real: return "a number";
    case Kind::boolean: return "a boolean";
    case Kind::string: return "a string";
    case Kind::int_list: return "a list of integers";
    case Kind::real_list: return "a list of numbers";
    case Kind::object: return "an object";
  }
  return "?";
}

bool matches(const Json& v, Kind k) {
  switch (k) {
    case Kind::integer: return v.is_number_integer();
    case Kind::real: return v.is_number();
    case Kind::boolean: return v.is_boolean();
    case Kind::string: return v.is_string();
    case Kind::int_list:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number_integer()) return false;
      return true;
    case Kind::real_list:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number()) return false;
      return true;
    case Kind::object: return v.is_object();
  }
  return false;
}

Field req(std::string key, Kind kind) { return Field{std::move(key), kind, true, Json(), {}}; }
Field opt(std::string key, Kind kind, Json fallback) { return Field{std::move(key), kind, false, std::move(fallback), {}}; }

std::map<std::string, Schema> build_schemas() {
  std::map<std::string, Schema> s;
  s["eigencheck"] = with_common_fields({
      req("pairs", Kind::integer),
      req("dims", Kind::int_list),
      req("spin_dims", Kind::int_list),
      opt("tolerance", Kind::real, 1e-9),
  });
  Field lattice = req("lattice", Kind::object);
  lattice.children = {req("points", Kind::integer), req("length", Kind::real), req("mass", Kind::real)};
  s["vacuum-sweep"] = with_common_fields({
      lattice,
      req("epsilons", Kind::real_list),
      req("pairs", Kind::integer),
      req("extent", Kind::real),
      opt("margin", Kind::real, 0.02),
      opt("grid_snap", Kind::boolean, true),
  });
  s["minimize"] = with_common_fields({
      req("atoms", Kind::integer),
      req("dim", Kind::integer),
      req("spin_dim", Kind::integer),
      opt("mu", Kind::real, Json()),
      opt("max_iters", Kind::integer, 500),
      opt("volume_target", Kind::real, 1.0),
      opt("trace_target", Kind::real, 1.0),
      opt("restarts", Kind::integer, 0),
  });
  s["discrete-vp"] = with_common_fields({
      req("blocks", Kind::int_list),
      req("rank", Kind::integer),
      opt("mu", Kind::real, 0.25),
      opt("max_iters", Kind::integer, 2000),
      opt("step_init", Kind::real, 1e-2),
      opt("residual_reduction", Kind::real, 0.0),
      opt("preserve_constraint", Kind::boolean, false),
  });
  Field contour = opt("contour", Kind::object, Json::object());
  contour.children = {opt("center_re", Kind::real, -1.0), opt("center_im", Kind::real, 0.0),
                      opt("radius", Kind::real, 0.5), opt("nodes", Kind::integer, 64)};
  s["sea-contour"] = with_common_fields({
      req("dim", Kind::integer),
      req("dk_norm", Kind::real),
      req("max_order", Kind::integer),
      contour,
  });
  s["pexp-test"] = with_common_fields({
      req("dim", Kind::integer),
      req("scale", Kind::real),
      opt("harmonics", Kind::integer, 2),
      req("interval", Kind::real_list),
      req("max_order", Kind::integer),
  });
  return s;
}

const std::map<std::string, Schema>& schemas() {
  static const auto s = build_schemas();
  return s;
}

}  // namespace

Schema with_common_fields(Schema schema) {
  schema.insert(schema.begin(), {req("units", Kind::string), opt("seed", Kind::integer, 1),
                                 opt("threads", Kind::integer, 1)});
  return schema;
}

Json apply_schema(const Json& config, const Schema& schema, const std::string& path) {
  if (!config.is_object()) schema_fail("configuration " + (path.empty() ? std::string("root") : "'" + path + "'") + " must be an object");
  std::set<std::string> known;
  for (const auto& f : schema) known.insert(f.key);
  for (const auto& [k, v] : config.items())
    if (!known.count(k)) schema_fail("unknown key '" + path + k + "'");

  Json out = Json::object();
  for (const auto& f : schema) {
    const std::string name = path + f.key;
    if (!config.contains(f.key)) {
      if (f.required) schema_fail("missing required key '" + name + "'");
      if (f.kind == Kind::object)
        out[f.key] = apply_schema(f.fallback.is_null() ? Json::object() : f.fallback, f.children, name + ".");
      else
        out[f.key] = f.fallback;
      continue;
    }
    const Json& v = config.at(f.key);
    if (!matches(v, f.kind)) schema_fail("key '" + name + "' must be " + kind_name(f.kind));
    out[f.key] = f.kind == Kind::object ? apply_schema(v, f.children, name + ".") : v;
  }
  if (out.contains("units") && out["units"] != "natural")
    schema_fail("key '" + path + "units' must be \"natural\"");
  return out;
}

const Schema& command_schema(const std::string& command) {
  const auto it = schemas().find(command);
  if (it == schemas().end()) throw Error(ErrorCode::invalid_argument, "unknown command '" + command + "'");
  return it->second;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, s] : schemas()) v.push_back(k);
    return v;
  }();
  return names;
}

}  // namespace cfs::cli
