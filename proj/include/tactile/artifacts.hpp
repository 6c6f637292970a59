#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tactile/evaluation.hpp"
#include "tactile/pose_estimation.hpp"
#include "tactile/training.hpp"

namespace tactile {

inline constexpr std::string_view kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// JSONL step logs

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json breakdown_json(const RewardBreakdown& r) {
  Json j;
  j["total"] = r.total;
  j["per_finger"] = std::vector<double>(r.per_finger.begin(), r.per_finger.end());
  j["touch"] = std::vector<double>(r.touch.begin(), r.touch.end());
  // Only terms the variant produced appear.
  if (std::any_of(r.bonus.begin(), r.bonus.end(), [](double b) { return b != 0.0; }))
    j["curiosity"] = std::vector<double>(r.bonus.begin(), r.bonus.end());
  j["repeated"] = r.repeated;
  j["pose"] = r.pose;
  return j;
}

inline Json rollout_step_json(const RolloutStep& s) {
  Json j;
  j["t"] = s.t;
  j["action"] = action_name(s.action);
  const Mat3& R = s.wrist.rotation();
  j["wrist"] = {{"translation", to_json(s.wrist.translation())},
                {"rotation", {{R(0, 0), R(0, 1), R(0, 2)}, {R(1, 0), R(1, 1), R(1, 2)}, {R(2, 0), R(2, 1), R(2, 2)}}}};
  j["q"] = std::vector<double>(s.q.begin(), s.q.end());
  j["touch"] = std::vector<int>(s.touch.begin(), s.touch.end());
  Json touches = Json::array();
  for (const auto& c : s.touches)
    touches.push_back({{"finger", c.finger}, {"patch", c.patch}, {"point", to_json(c.point)}, {"normal", to_json(c.normal.vec())}});
  j["new_contacts"] = std::move(touches);
  const auto f = s.state.flatten();
  j["state"] = std::vector<double>(f.begin(), f.end());
  if (s.reward) j["reward"] = breakdown_json(*s.reward);
  j["terminated"] = s.terminated;
  j["reason"] = to_string(s.reason);
  return j;
}

inline Json step_record_json(const StepRecord& r) {
  Json j;
  j["env"] = r.env;
  j["episode"] = r.episode;
  j["t"] = r.t;
  j["action"] = action_name(r.action);
  j["reward"] = breakdown_json(r.reward);
  j["terminated"] = r.terminated;
  j["reason"] = to_string(r.reason);
  return j;
}

/// One JSON object per line, flushed after each record.
class JsonlWriter {
 public:
  explicit JsonlWriter(std::ostream& out) : out_(&out) {}
  void write(const Json& j) {
    *out_ << j.dump() << '\n';
    out_->flush();
  }

 private:
  std::ostream* out_;
};

// ---------------------------------------------------------------------------
// Depth maps

/// Binary 16-bit PGM in millimetres (big-endian samples); empty pixels are 0
/// and depths beyond 65.535 m saturate.
inline void write_pgm16(std::ostream& o, const DepthImage& img) {
  o << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      const double mm = std::round(img.at(u, v) * 1000.0);
      const auto s = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
      const char b[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xff)};
      o.write(b, 2);
    }
}

inline void save_pgm16(const std::string& path, const DepthImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write " + path);
  write_pgm16(f, img);
}

/// Reads a P5 16-bit PGM back into metres.
inline DepthImage read_pgm16(std::istream& in) {
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P5" || w <= 0 || h <= 0 || maxv != 65535) throw ParseError("pgm", 1, "expected a 16-bit P5 header");
  in.get();
  DepthImage img(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      unsigned char b[2];
      in.read(reinterpret_cast<char*>(b), 2);
      if (!in) throw ParseError("pgm", 1, "truncated pixel data");
      img.at(u, v) = ((b[0] << 8) | b[1]) / 1000.0;
    }
  return img;
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
  std::string command;
  std::uint64_t config_digest = 0;
  std::string config_text;
  std::vector<std::uint64_t> seeds;
  int workers = 1;
  std::vector<std::string> outputs;
};

inline Json manifest_json(const Manifest& m) {
  Json j;
  j["tool"] = "tactile";
  j["version"] = kVersion;
  j["checkpoint_version"] = kCheckpointVersion;
  j["command"] = m.command;
  j["config_digest"] = hex64(m.config_digest);
  j["seeds"] = m.seeds;
  j["workers"] = m.workers;
  j["outputs"] = m.outputs;
  j["config"] = m.config_text;
  return j;
}

inline void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  f << manifest_json(m).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Curves and plots

/// Parses a curve CSV. Columns are looked up by name; extra columns are
/// ignored. Returns the header names of the metric columns too.
struct CurveTable {
  std::vector<std::string> metrics;  // e.g. mean_reward, mean_IoU, mean_AUC
  std::vector<double> x;             // update index
  std::vector<std::vector<double>> values;  // [metric][row]
};

inline CurveTable read_curves(std::istream& in, const std::string& source = "curves") {
  std::string line;
  std::size_t n = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
    break;
  }
  if (header.empty()) throw ParseError(source, n, "empty curve file");
  const auto col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int xcol = col("update");
  if (xcol < 0) throw ParseError(source, n, "missing 'update' column");
  CurveTable t;
  std::vector<int> cols;
  for (const char* m : {"mean_reward", "mean_IoU", "mean_AUC"})
    if (int c = col(m); c >= 0) {
      t.metrics.emplace_back(m);
      cols.push_back(c);
    }
  if (cols.empty()) throw ParseError(source, n, "no metric columns");
  t.values.resize(cols.size());
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw ParseError(source, n, "wrong number of fields");
    auto num = [&](const std::string& s) {
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
      try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw ParseError(source, n, "not a number: '" + s + "'");
      }
    };
    t.x.push_back(num(cells[xcol]));
    for (std::size_t k = 0; k < cols.size(); ++k) t.values[k].push_back(num(cells[cols[k]]));
  }
  if (t.x.empty()) throw ParseError(source, n, "curve file has no rows");
  return t;
}

inline CurveTable load_curves(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read " + path);
  return read_curves(f, path);
}

/// Seed-aggregated series: mean with min/max band at each x where at least
/// one seed has a finite value.
struct SeriesBand {
  std::string label;
  std::vector<double> x, mean, lo, hi;
};

inline SeriesBand aggregate_series(const std::string& label, const std::vector<CurveTable>& runs, const std::string& metric) {
  SeriesBand s;
  s.label = label;
  std::map<double, std::vector<double>> at;
  for (const auto& r : runs) {
    auto it = std::find(r.metrics.begin(), r.metrics.end(), metric);
    if (it == r.metrics.end()) continue;
    const auto& v = r.values[static_cast<std::size_t>(it - r.metrics.begin())];
    for (std::size_t i = 0; i < r.x.size(); ++i)
      if (std::isfinite(v[i])) at[r.x[i]].push_back(v[i]);
  }
  for (const auto& [x, vs] : at) {
    s.x.push_back(x);
    double sum = 0.0;
    for (double v : vs) sum += v;
    s.mean.push_back(sum / static_cast<double>(vs.size()));
    s.lo.push_back(*std::min_element(vs.begin(), vs.end()));
    s.hi.push_back(*std::max_element(vs.begin(), vs.end()));
  }
  return s;
}

/// Line chart of mean lines over translucent min/max bands.
inline std::string render_svg(const std::vector<SeriesBand>& series, const std::string& xlabel, const std::string& ylabel) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 30, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.lo[i]);
      y1 = std::max(y1, s.hi[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream o;
  char buf[128];
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
    std::snprintf(buf, sizeof buf, "%.3g", yv);
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", xv);
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << buf << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\">" << ylabel << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % 8];
    if (s.x.empty()) continue;
    o << "<polygon fill=\"" << c << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << ',' << py(s.hi[i]) << ' ';
    for (std::size_t i = s.x.size(); i-- > 0;) o << px(s.x[i]) << ',' << py(s.lo[i]) << ' ';
    o << "\"/>\n<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << ',' << py(s.mean[i]) << ' ';
    o << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(k);
    o << "<rect x=\"" << W - R + 10 << "\" y=\"" << ly << "\" width=\"12\" height=\"4\" fill=\"" << c << "\"/>";
    o << "<text x=\"" << W - R + 28 << "\" y=\"" << ly + 6 << "\">" << s.label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// One SVG per metric column, one band per label. Returns written paths.
inline std::vector<std::string> emit_plots(const std::map<std::string, std::vector<std::string>>& curve_files,
                                           const std::string& out_dir) {
  std::map<std::string, std::vector<CurveTable>> runs;
  std::vector<std::string> metrics;
  for (const auto& [label, files] : curve_files)
    for (const auto& f : files) {
      runs[label].push_back(load_curves(f));
      for (const auto& m : runs[label].back().metrics)
        if (std::find(metrics.begin(), metrics.end(), m) == metrics.end()) metrics.push_back(m);
    }
  std::vector<std::string> written;
  for (const auto& m : metrics) {
    std::vector<SeriesBand> series;
    for (const auto& [label, tables] : runs) series.push_back(aggregate_series(label, tables, m));
    const auto path = (std::filesystem::path(out_dir) / ("curve_" + m + ".svg")).string();
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot write " + path);
    f << render_svg(series, "update", m);
    written.push_back(path);
  }
  return written;
}

}  // namespace tactile
