#pragma once

#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spherot/alpha.hpp"
#include "spherot/sampler.hpp"

namespace spherot::io {

inline void write_table(std::ostream& out, const std::vector<std::string>& columns,
                        const Mat& rows) {
  for (std::size_t c = 0; c < columns.size(); ++c)
    out << (c ? "\t" : "") << columns[c];
  out << "\n";
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c)
      out << (c ? "\t" : "") << rows(r, c);
    out << "\n";
  }
}

// Whitespace-delimited numeric table; leading '#' lines are skipped and one
// optional non-numeric header row is tolerated.
inline Mat read_table(std::istream& in, std::vector<std::string>* columns = nullptr) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header_checked = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    bool numeric = true;
    std::vector<std::string> toks;
    while (ls >> tok) toks.push_back(tok);
    for (const std::string& t : toks) {
      if (!numeric) break;
      try {
        std::size_t used = 0;
        row.push_back(std::stod(t, &used));
        if (used != t.size()) numeric = false;
      } catch (...) {
        numeric = false;
      }
    }
    if (!header_checked) {
      header_checked = true;
      if (!numeric) {
        if (columns) *columns = toks;
        continue;
      }
    }
    if (!numeric)
      fail(ErrorKind::ParseError, "non-numeric value in table row");
    if (toks.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorKind::ParseError, "ragged table row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::ParseError, "table has no data rows");
  Mat m(static_cast<Eigen::Index>(rows.size()),
        static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.front().size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

inline void write_points(std::ostream& out, const std::vector<UnitPoint>& pts) {
  if (pts.empty()) fail(ErrorKind::DomainError, "no points to write");
  std::vector<std::string> cols;
  for (int k = 0; k < pts[0].dim(); ++k) cols.push_back("x" + std::to_string(k));
  Mat m(static_cast<Eigen::Index>(pts.size()), pts[0].dim());
  for (std::size_t i = 0; i < pts.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = pts[i].coords().transpose();
  write_table(out, cols, m);
}

inline std::vector<UnitPoint> read_points(std::istream& in) {
  Mat m = read_table(in);
  std::vector<UnitPoint> pts;
  pts.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    pts.push_back(UnitPoint(m.row(r).transpose()));
  return pts;
}

inline Mat samples_matrix(const std::vector<TransportedSample>& samples) {
  if (samples.empty()) fail(ErrorKind::DomainError, "no samples to write");
  int d = samples[0].source.dim();
  Mat m(static_cast<Eigen::Index>(samples.size()), 2 * d + 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)).head(d) = samples[i].source.coords().transpose();
    m.row(static_cast<Eigen::Index>(i)).segment(d, d) = samples[i].image.coords().transpose();
    m(static_cast<Eigen::Index>(i), 2 * d) = samples[i].conjugate_value;
  }
  return m;
}

inline std::vector<TransportedSample> samples_from_matrix(const Mat& m) {
  if (m.cols() < 3 || (m.cols() - 1) % 2 != 0)
    fail(ErrorKind::ParseError, "sample table needs src, img and conjugate columns");
  int d = static_cast<int>((m.cols() - 1) / 2);
  std::vector<TransportedSample> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    UnitPoint src(m.row(r).head(d).transpose());
    UnitPoint img(m.row(r).segment(d, d).transpose());
    out.emplace_back(src, img, m(r, 2 * d));
  }
  return out;
}

inline std::vector<std::string> sample_columns(int d) {
  std::vector<std::string> cols;
  for (int k = 0; k < d; ++k) cols.push_back("src" + std::to_string(k));
  for (int k = 0; k < d; ++k) cols.push_back("img" + std::to_string(k));
  cols.push_back("conjugate");
  return cols;
}

inline void write_samples(std::ostream& out,
                          const std::vector<TransportedSample>& samples) {
  Mat m = samples_matrix(samples);
  write_table(out, sample_columns(samples[0].source.dim()), m);
}

inline void write_landmarks(std::ostream& out, const LandmarkSet& set) {
  out << std::setprecision(17);
  out << "# threshold_a: " << set.threshold_a << "\n";
  out << "# separation_s: " << set.separation_s << "\n";
  out << "# radius_r: " << set.radius_r << "\n";
  write_samples(out, set.landmarks);
}

struct LandmarkFile {
  std::vector<TransportedSample> landmarks;
  double threshold_a = std::numeric_limits<double>::quiet_NaN();
  double separation_s = std::numeric_limits<double>::quiet_NaN();
  double radius_r = std::numeric_limits<double>::quiet_NaN();
};

inline LandmarkFile read_landmarks(std::istream& in) {
  LandmarkFile file;
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key;
      double value;
      if (ls >> key >> value) {
        if (key == "threshold_a:") file.threshold_a = value;
        else if (key == "separation_s:") file.separation_s = value;
        else if (key == "radius_r:") file.radius_r = value;
      }
      continue;
    }
    body << line << "\n";
  }
  file.landmarks = samples_from_matrix(read_table(body));
  return file;
}

// --- packed binary matrix ----------------------------------------------------
// 16-byte header: ASCII magic "SPHMAT01", uint32 T, uint32 N (little endian),
// then T*N float64 entries in row-major order.

inline constexpr char kMatrixMagic[9] = "SPHMAT01";

inline void write_matrix_binary(std::ostream& out, const Mat& m) {
  out.write(kMatrixMagic, 8);
  std::uint32_t T = static_cast<std::uint32_t>(m.rows());
  std::uint32_t N = static_cast<std::uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&T), 4);
  out.write(reinterpret_cast<const char*>(&N), 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
}

// Peeks the stream for the binary magic without consuming it.
inline bool looks_binary(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  std::streamsize got = in.gcount();
  in.clear();
  in.seekg(-got, std::ios::cur);
  return got == 8 && std::memcmp(magic, kMatrixMagic, 8) == 0;
}

inline Mat read_matrix_binary(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMatrixMagic, 8) != 0)
    fail(ErrorKind::ParseError, "bad binary matrix magic");
  std::uint32_t T = 0, N = 0;
  in.read(reinterpret_cast<char*>(&T), 4);
  in.read(reinterpret_cast<char*>(&N), 4);
  if (!in || T == 0 || N == 0)
    fail(ErrorKind::ParseError, "bad binary matrix header");
  Mat m(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(N));
  for (std::uint32_t r = 0; r < T; ++r)
    for (std::uint32_t c = 0; c < N; ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), 8);
      if (!in) fail(ErrorKind::ParseError, "binary matrix truncated");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  return m;
}

// --- simplicial complex JSON -------------------------------------------------
// {"dimension": d, "vertices": [[...], ...], "simplices": {"0": [[i], ...], ...}}

inline void write_complex_json(std::ostream& out, const SimplicialComplex& c) {
  nlohmann::json j;
  j["dimension"] = c.vertices.empty() ? 0 : c.vertices[0].dim();
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (const auto& v : c.vertices) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < v.dim(); ++k) row.push_back(v[k]);
    verts.push_back(std::move(row));
  }
  auto& simp = j["simplices"] = nlohmann::json::object();
  for (int k = 0; k <= c.maxdim(); ++k)
    simp[std::to_string(k)] = c.simplices_by_dim[static_cast<std::size_t>(k)];
  out << j.dump(1) << "\n";
}

inline SimplicialComplex read_complex_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("complex json: ") + e.what());
  }
  SimplicialComplex c;
  try {
    for (const auto& row : j.at("vertices")) {
      Vec v(static_cast<Eigen::Index>(row.size()));
      for (std::size_t k = 0; k < row.size(); ++k)
        v[static_cast<Eigen::Index>(k)] = row[k].get<double>();
      c.vertices.push_back(UnitPoint(std::move(v)));
    }
    const auto& simp = j.at("simplices");
    int maxdim = -1;
    for (auto it = simp.begin(); it != simp.end(); ++it)
      maxdim = std::max(maxdim, std::stoi(it.key()));
    c.simplices_by_dim.assign(static_cast<std::size_t>(maxdim + 1), {});
    for (auto it = simp.begin(); it != simp.end(); ++it) {
      int k = std::stoi(it.key());
      for (const auto& tup : it.value())
        c.simplices_by_dim[static_cast<std::size_t>(k)].push_back(
            tup.get<std::vector<int>>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("complex json: ") + e.what());
  }
  validate_complex(c);
  return c;
}

}  // namespace spherot::io
