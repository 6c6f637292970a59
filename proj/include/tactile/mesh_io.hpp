#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tactile/mesh.hpp"
#include "tactile/point_cloud.hpp"

namespace tactile {

namespace io_detail {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

inline double parse_double(const std::string& tok, const std::string& src, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(src, line, "expected a number, got '" + tok + "'");
  }
}

inline long parse_long(const std::string& tok, const std::string& src, std::size_t line) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(src, line, "expected an integer, got '" + tok + "'");
  }
}

// OBJ face indices are 1-based; negative values count back from the end.
inline std::uint32_t obj_index(const std::string& tok, std::size_t nverts, const std::string& src, std::size_t line) {
  const long raw = parse_long(tok.substr(0, tok.find('/')), src, line);
  if (raw == 0) throw ParseError(src, line, "face index 0 is invalid (OBJ indices are 1-based)");
  const long idx = raw > 0 ? raw - 1 : static_cast<long>(nverts) + raw;
  if (idx < 0 || idx >= static_cast<long>(nverts)) throw ParseError(src, line, "face index out of range");
  return static_cast<std::uint32_t>(idx);
}

struct PlyHeader {
  std::size_t vertex_count = 0;
  std::size_t face_count = 0;
  std::vector<std::string> vertex_props;
  std::size_t lines = 0;
};

inline PlyHeader read_ply_header(std::istream& in, const std::string& src) {
  PlyHeader h;
  std::string line, current;
  std::getline(in, line);
  ++h.lines;
  if (line.rfind("ply", 0) != 0) throw ParseError(src, h.lines, "missing 'ply' magic");
  while (std::getline(in, line)) {
    ++h.lines;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw ParseError(src, h.lines, "only ASCII PLY is supported");
    } else if (kw == "element") {
      std::string count;
      ls >> current >> count;
      const long n = parse_long(count, src, h.lines);
      if (n < 0) throw ParseError(src, h.lines, "negative element count");
      if (current == "vertex") h.vertex_count = static_cast<std::size_t>(n);
      else if (current == "face") h.face_count = static_cast<std::size_t>(n);
      else throw ParseError(src, h.lines, "unsupported element '" + current + "'");
    } else if (kw == "property") {
      std::string type, name;
      ls >> type;
      if (type == "list") continue;
      ls >> name;
      if (current == "vertex") h.vertex_props.push_back(name);
    } else if (kw == "end_header") {
      return h;
    } else if (kw != "comment" && kw != "obj_info" && !kw.empty()) {
      throw ParseError(src, h.lines, "unexpected header keyword '" + kw + "'");
    }
  }
  throw ParseError(src, h.lines, "missing end_header");
}

inline std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ls(line);
  std::vector<std::string> out;
  for (std::string t; ls >> t;) out.push_back(t);
  return out;
}

}  // namespace io_detail

inline TriMesh parse_obj(std::istream& in, const std::string& src = "<obj>") {
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const auto tok = io_detail::tokens(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError(src, ln, "vertex needs three coordinates");
      verts.emplace_back(io_detail::parse_double(tok[1], src, ln), io_detail::parse_double(tok[2], src, ln),
                         io_detail::parse_double(tok[3], src, ln));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError(src, ln, "face needs at least three indices");
      std::vector<std::uint32_t> idx;
      for (std::size_t i = 1; i < tok.size(); ++i) idx.push_back(io_detail::obj_index(tok[i], verts.size(), src, ln));
      for (std::size_t i = 1; i + 1 < idx.size(); ++i) faces.push_back({idx[0], idx[i], idx[i + 1]});
    }
    // vn, vt, o, g, s, usemtl, mtllib: ignored
  }
  return TriMesh(std::move(verts), std::move(faces));
}

inline TriMesh parse_ply_mesh(std::istream& in, const std::string& src = "<ply>") {
  auto h = io_detail::read_ply_header(in, src);
  std::size_t ln = h.lines;
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  std::string line;
  auto col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < h.vertex_props.size(); ++i)
      if (h.vertex_props[i] == name) return i;
    throw ParseError(src, ln, "vertex property '" + name + "' missing");
  };
  const std::size_t cx = col("x"), cy = col("y"), cz = col("z");
  for (std::size_t i = 0; i < h.vertex_count; ++i) {
    if (!std::getline(in, line)) throw ParseError(src, ln, "unexpected end of vertex data");
    ++ln;
    const auto tok = io_detail::tokens(line);
    if (tok.size() != h.vertex_props.size()) throw ParseError(src, ln, "wrong number of vertex properties");
    verts.emplace_back(io_detail::parse_double(tok[cx], src, ln), io_detail::parse_double(tok[cy], src, ln),
                       io_detail::parse_double(tok[cz], src, ln));
  }
  for (std::size_t i = 0; i < h.face_count; ++i) {
    if (!std::getline(in, line)) throw ParseError(src, ln, "unexpected end of face data");
    ++ln;
    const auto tok = io_detail::tokens(line);
    if (tok.empty()) throw ParseError(src, ln, "empty face record");
    const long n = io_detail::parse_long(tok[0], src, ln);
    if (n < 3 || tok.size() != static_cast<std::size_t>(n) + 1) throw ParseError(src, ln, "malformed face record");
    std::vector<std::uint32_t> idx;
    for (long k = 1; k <= n; ++k) {
      const long v = io_detail::parse_long(tok[k], src, ln);
      if (v < 0 || v >= static_cast<long>(verts.size())) throw ParseError(src, ln, "face index out of range");
      idx.push_back(static_cast<std::uint32_t>(v));
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) faces.push_back({idx[0], idx[k], idx[k + 1]});
  }
  return TriMesh(std::move(verts), std::move(faces));
}

/// Loads OBJ or ASCII PLY by extension. Face normals always come from winding.
inline TriMesh load_mesh(const std::filesystem::path& path) {
  auto in = io_detail::open_in(path);
  const auto ext = io_detail::lower_ext(path);
  if (ext == ".obj") return parse_obj(in, path.string());
  if (ext == ".ply") return parse_ply_mesh(in, path.string());
  throw ParseError(path.string(), 0, "unsupported mesh extension '" + ext + "'");
}

inline void write_obj(std::ostream& out, const TriMesh& mesh) {
  for (const auto& v : mesh.vertices())
    out << "v " << io_detail::fmt9(v.x()) << ' ' << io_detail::fmt9(v.y()) << ' ' << io_detail::fmt9(v.z()) << '\n';
  for (const auto& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  write_obj(out, mesh);
}

/// ASCII PLY with x y z nx ny nz and an integer step column.
inline void write_cloud_ply(std::ostream& out, const ContactCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
         "property double nx\nproperty double ny\nproperty double nz\nproperty int step\nend_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points()[i];
    const auto& n = cloud.normals()[i];
    using io_detail::fmt9;
    out << fmt9(p.x()) << ' ' << fmt9(p.y()) << ' ' << fmt9(p.z()) << ' ' << fmt9(n.x()) << ' ' << fmt9(n.y()) << ' '
        << fmt9(n.z()) << ' ' << cloud.timestamps()[i] << '\n';
  }
}

inline ContactCloud parse_cloud_ply(std::istream& in, const std::string& src = "<ply>") {
  auto h = io_detail::read_ply_header(in, src);
  std::size_t ln = h.lines;
  auto find = [&](const std::string& name) -> long {
    for (std::size_t i = 0; i < h.vertex_props.size(); ++i)
      if (h.vertex_props[i] == name) return static_cast<long>(i);
    return -1;
  };
  const long cx = find("x"), cy = find("y"), cz = find("z"), nx = find("nx"), ny = find("ny"), nz = find("nz"),
             cs = find("step");
  if (cx < 0 || cy < 0 || cz < 0 || nx < 0 || ny < 0 || nz < 0)
    throw ParseError(src, ln, "cloud PLY needs x y z nx ny nz properties");
  ContactCloud cloud;
  cloud.reserve(h.vertex_count);
  std::string line;
  for (std::size_t i = 0; i < h.vertex_count; ++i) {
    if (!std::getline(in, line)) throw ParseError(src, ln, "unexpected end of vertex data");
    ++ln;
    const auto tok = io_detail::tokens(line);
    if (tok.size() != h.vertex_props.size()) throw ParseError(src, ln, "wrong number of vertex properties");
    auto d = [&](long c) { return io_detail::parse_double(tok[static_cast<std::size_t>(c)], src, ln); };
    const Vec3 n(d(nx), d(ny), d(nz));
    if (!(n.norm() > 1e-12)) throw ParseError(src, ln, "zero normal");
    cloud.push_back({d(cx), d(cy), d(cz)}, UnitVec3(n),
                    cs >= 0 ? io_detail::parse_long(tok[static_cast<std::size_t>(cs)], src, ln) : 0);
  }
  return cloud;
}

inline void save_cloud(const ContactCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  write_cloud_ply(out, cloud);
}

inline ContactCloud load_cloud(const std::filesystem::path& path) {
  auto in = io_detail::open_in(path);
  return parse_cloud_ply(in, path.string());
}

}  // namespace tactile
