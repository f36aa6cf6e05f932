#pragma once
// JSON map documents:
//
//   { "areas":      [ {"id", "name"?, "polygon": [[x,y],...], "parent"?, "speed_limit"?} ],
//     "boundaries": [ {"id", "segments": [[[x,y],[x,y]], ...], "owners": [area ids]} ],
//     "interfaces": [ {"id", "name"?, "segment": [[x,y],[x,y]], "connects": [area ids]} ],
//     "name"? }
//
// Lengths in meters, world frame. In strict mode unknown keys are rejected.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "claimnav/semantic_map.hpp"

namespace claimnav {

/// Raised when a document cannot be read or does not follow the schema.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where,
                       bool strict) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  if (!strict) return;
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

inline double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

inline int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ParseError(where + ": expected an integer id");
  return j.get<int>();
}

inline Vec2 as_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ParseError(where + ": expected [x, y]");
  return {as_number(j[0], where), as_number(j[1], where)};
}

inline Segment as_segment(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ParseError(where + ": expected [[x, y], [x, y]]");
  return {as_point(j[0], where), as_point(j[1], where)};
}

inline json point_json(Vec2 p) { return json::array({p.x, p.y}); }
inline json segment_json(const Segment& s) { return json::array({point_json(s.a), point_json(s.b)}); }

}  // namespace detail

inline SemanticMap map_from_json(const nlohmann::json& doc, bool strict = true) {
  using detail::as_int;
  using detail::check_keys;
  using detail::require;
  check_keys(doc, {"areas", "boundaries", "interfaces", "name"}, "map", strict);

  std::vector<Area> areas;
  const auto& jareas = require(doc, "areas", "map");
  if (!jareas.is_array()) throw ParseError("map.areas: expected an array");
  for (std::size_t i = 0; i < jareas.size(); ++i) {
    const auto& ja = jareas[i];
    const std::string where = "areas[" + std::to_string(i) + "]";
    check_keys(ja, {"id", "name", "polygon", "parent", "speed_limit"}, where, strict);
    Area a;
    a.id = AreaId{as_int(require(ja, "id", where), where + ".id")};
    if (ja.contains("name")) a.name = ja["name"].get<std::string>();
    const auto& poly = require(ja, "polygon", where);
    if (!poly.is_array()) throw ParseError(where + ".polygon: expected an array");
    for (const auto& p : poly) a.polygon.push_back(detail::as_point(p, where + ".polygon"));
    if (ja.contains("parent") && !ja["parent"].is_null()) a.parent = AreaId{as_int(ja["parent"], where + ".parent")};
    if (ja.contains("speed_limit") && !ja["speed_limit"].is_null()) {
      a.speed_limit = detail::as_number(ja["speed_limit"], where + ".speed_limit");
    }
    areas.push_back(std::move(a));
  }

  std::vector<Boundary> boundaries;
  if (doc.contains("boundaries")) {
    const auto& jb = doc["boundaries"];
    if (!jb.is_array()) throw ParseError("map.boundaries: expected an array");
    for (std::size_t i = 0; i < jb.size(); ++i) {
      const std::string where = "boundaries[" + std::to_string(i) + "]";
      check_keys(jb[i], {"id", "segments", "owners"}, where, strict);
      Boundary b;
      b.id = BoundaryId{as_int(require(jb[i], "id", where), where + ".id")};
      for (const auto& s : require(jb[i], "segments", where)) b.segments.push_back(detail::as_segment(s, where));
      for (const auto& o : require(jb[i], "owners", where)) b.owners.push_back(AreaId{as_int(o, where + ".owners")});
      boundaries.push_back(std::move(b));
    }
  }

  std::vector<Interface> interfaces;
  if (doc.contains("interfaces")) {
    const auto& ji = doc["interfaces"];
    if (!ji.is_array()) throw ParseError("map.interfaces: expected an array");
    for (std::size_t i = 0; i < ji.size(); ++i) {
      const std::string where = "interfaces[" + std::to_string(i) + "]";
      check_keys(ji[i], {"id", "name", "segment", "connects"}, where, strict);
      Interface itf;
      itf.id = InterfaceId{as_int(require(ji[i], "id", where), where + ".id")};
      if (ji[i].contains("name")) itf.name = ji[i]["name"].get<std::string>();
      itf.segment = detail::as_segment(require(ji[i], "segment", where), where + ".segment");
      for (const auto& a : require(ji[i], "connects", where)) {
        itf.connects.push_back(AreaId{as_int(a, where + ".connects")});
      }
      interfaces.push_back(std::move(itf));
    }
  }
  return SemanticMap(std::move(areas), std::move(boundaries), std::move(interfaces));
}

inline nlohmann::json map_to_json(const SemanticMap& map, const std::string& name = {}) {
  using nlohmann::json;
  json doc;
  if (!name.empty()) doc["name"] = name;
  doc["areas"] = json::array();
  for (const auto& a : map.areas()) {
    json ja;
    ja["id"] = a.id.value;
    if (!a.name.empty()) ja["name"] = a.name;
    ja["polygon"] = json::array();
    for (Vec2 v : a.polygon) ja["polygon"].push_back(detail::point_json(v));
    if (a.parent) ja["parent"] = a.parent->value;
    if (a.speed_limit) ja["speed_limit"] = *a.speed_limit;
    doc["areas"].push_back(ja);
  }
  doc["boundaries"] = json::array();
  for (const auto& b : map.boundaries()) {
    json jb;
    jb["id"] = b.id.value;
    jb["segments"] = json::array();
    for (const auto& s : b.segments) jb["segments"].push_back(detail::segment_json(s));
    jb["owners"] = json::array();
    for (AreaId o : b.owners) jb["owners"].push_back(o.value);
    doc["boundaries"].push_back(jb);
  }
  doc["interfaces"] = json::array();
  for (const auto& i : map.interfaces()) {
    json ji;
    ji["id"] = i.id.value;
    if (!i.name.empty()) ji["name"] = i.name;
    ji["segment"] = detail::segment_json(i.segment);
    ji["connects"] = json::array();
    for (AreaId a : i.connects) ji["connects"].push_back(a.value);
    doc["interfaces"].push_back(ji);
  }
  return doc;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline SemanticMap load_map(const std::filesystem::path& path, bool strict = true) {
  const auto doc = read_json_file(path);
  try {
    return map_from_json(doc, strict);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void save_map(const SemanticMap& map, const std::filesystem::path& path, const std::string& name = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << map_to_json(map, name).dump(1) << '\n';
}

}  // namespace claimnav
