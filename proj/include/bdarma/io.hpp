#pragma once

// Panel CSV with a JSON meta sidecar, and JSON forms of specs and parameters.

#include <Eigen/Dense>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "bdarma/csv.hpp"
#include "bdarma/darma.hpp"
#include "bdarma/error.hpp"
#include "bdarma/panel.hpp"
#include "json.hpp"

namespace bdarma {

using nlohmann::json;

inline json to_json(const DarmaSpec& s) {
  return {{"P", s.P}, {"Q", s.Q}, {"J", s.J}, {"ref", s.ref}, {"variant", to_string(s.variant)}, {"M", s.M}, {"R", s.R}};
}

/// Missing keys keep the defaults of `base`.
inline DarmaSpec spec_from_json(const json& j, DarmaSpec base = {}) {
  if (!j.is_object()) throw InvalidInput("spec: expected a JSON object");
  try {
    if (j.contains("P")) base.P = j.at("P").get<std::size_t>();
    if (j.contains("Q")) base.Q = j.at("Q").get<std::size_t>();
    if (j.contains("J")) base.J = j.at("J").get<std::size_t>();
    if (j.contains("ref")) base.ref = j.at("ref").get<std::size_t>();
    if (j.contains("variant")) base.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("M")) base.M = j.at("M").get<std::size_t>();
    if (j.contains("R")) base.R = j.at("R").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("spec: ") + e.what());
  }
  base.validate();
  return base;
}

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) throw InvalidInput("params: " + what + " must have " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw InvalidInput("params: " + what + " row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw InvalidInput("params: " + what + " has a non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline json to_json(const DarmaParams& p) {
  json A = json::array(), B = json::array(), g = json::array();
  for (const auto& m : p.A) A.push_back(detail::matrix_to_json(m));
  for (const auto& m : p.B) B.push_back(detail::matrix_to_json(m));
  for (Eigen::Index r = 0; r < p.gamma.size(); ++r) g.push_back(p.gamma[r]);
  return {{"A", A}, {"B", B}, {"beta", detail::matrix_to_json(p.beta)}, {"gamma", g}};
}

/// A and B are lists of K x K matrices (rows), beta is K x M, gamma has R entries.
inline DarmaParams params_from_json(const json& j, const DarmaSpec& spec) {
  if (!j.is_object()) throw InvalidInput("params: expected a JSON object");
  for (const char* key : {"A", "B", "beta", "gamma"})
    if (!j.contains(key)) throw InvalidInput(std::string("params: missing key '") + key + "'");
  const std::size_t K = spec.K();
  DarmaParams p;
  const json& A = j.at("A");
  const json& B = j.at("B");
  if (!A.is_array() || A.size() != spec.P) throw InvalidInput("params: A must hold P = " + std::to_string(spec.P) + " matrices");
  if (!B.is_array() || B.size() != spec.Q) throw InvalidInput("params: B must hold Q = " + std::to_string(spec.Q) + " matrices");
  for (std::size_t l = 0; l < spec.P; ++l) p.A.push_back(detail::matrix_from_json(A[l], K, K, "A" + std::to_string(l + 1)));
  for (std::size_t l = 0; l < spec.Q; ++l) p.B.push_back(detail::matrix_from_json(B[l], K, K, "B" + std::to_string(l + 1)));
  p.beta = detail::matrix_from_json(j.at("beta"), K, spec.M, "beta");
  const json& g = j.at("gamma");
  if (!g.is_array() || g.size() != spec.R) throw InvalidInput("params: gamma must have R = " + std::to_string(spec.R) + " entries");
  p.gamma.resize(static_cast<Eigen::Index>(spec.R));
  for (std::size_t r = 0; r < spec.R; ++r) {
    if (!g[r].is_number()) throw InvalidInput("params: gamma has a non-numeric entry");
    p.gamma[static_cast<Eigen::Index>(r)] = g[r].get<double>();
  }
  p.check(spec);
  return p;
}

inline json to_json(const PanelMeta& m) {
  return {{"components", m.components},     {"source_ids", m.source_ids},
          {"seasonal_mode", m.seasonal_mode}, {"eps_prob", m.eps_prob},
          {"z_train_len", m.z_train_len},   {"negative_other_fraction", m.negative_other_fraction},
          {"trim_cutoff", m.trim_cutoff}};
}

inline PanelMeta meta_from_json(const json& j) {
  PanelMeta m;
  try {
    m.components = j.value("components", std::vector<std::string>{});
    m.source_ids = j.value("source_ids", std::vector<std::string>{});
    m.seasonal_mode = j.value("seasonal_mode", std::string{});
    m.eps_prob = j.value("eps_prob", kProbFloor);
    m.z_train_len = j.value("z_train_len", std::size_t{0});
    m.negative_other_fraction = j.value("negative_other_fraction", 0.0);
    m.trim_cutoff = j.value("trim_cutoff", std::string{});
  } catch (const json::exception& e) {
    throw FormatError(std::string("panel meta: ") + e.what());
  }
  return m;
}

inline json read_json(const std::string& path) {
  const std::string text = csv::read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { csv::write_text(path, j.dump(2) + "\n"); }

/// "panel.csv" -> "panel.meta.json".
inline std::string meta_path(const std::string& panel_path) {
  std::filesystem::path p(panel_path);
  p.replace_extension(".meta.json");
  return p.string();
}

namespace detail {

inline bool intercept_only(const Eigen::MatrixXd& X) { return X.cols() == 1 && (X.array() == 1.0).all(); }

inline bool canonical_precision(const Eigen::MatrixXd& Z) {
  return (Z.cols() == 1 || Z.cols() == 2) && (Z.col(0).array() == 1.0).all();
}

}  // namespace detail

/// Panel as CSV. Intercept-only X with Z = (1) or (1, z) uses the columns
/// date, y_<component>..., z_raw, z_std; other designs add x_<m> and z_<r>
/// columns instead.
inline std::string panel_to_csv(const SeriesPanel& p) {
  const auto T = static_cast<Eigen::Index>(p.rows());
  const bool canonical = detail::intercept_only(p.X) && detail::canonical_precision(p.Z);
  std::vector<std::string> header{"date"};
  for (std::size_t j = 0; j < p.parts(); ++j)
    header.push_back("y_" + (j < p.meta.components.size() ? p.meta.components[j] : "c" + std::to_string(j + 1)));
  if (canonical) {
    if (p.Z.cols() == 2) {
      header.push_back("z_raw");
      header.push_back("z_std");
    }
  } else {
    for (Eigen::Index m = 0; m < p.X.cols(); ++m) header.push_back("x_" + std::to_string(m + 1));
    for (Eigen::Index r = 0; r < p.Z.cols(); ++r) header.push_back("z_" + std::to_string(r + 1));
  }
  std::ostringstream out;
  out << csv::join(header) << '\n';
  for (Eigen::Index t = 0; t < T; ++t) {
    out << (p.dates.empty() ? std::to_string(t + 1) : p.dates[static_cast<std::size_t>(t)]);
    for (Eigen::Index j = 0; j < p.Y.cols(); ++j) out << ',' << csv::format(p.Y(t, j));
    if (canonical) {
      if (p.Z.cols() == 2) out << ',' << csv::format(p.z_raw.size() == T ? p.z_raw[t] : p.Z(t, 1)) << ',' << csv::format(p.Z(t, 1));
    } else {
      for (Eigen::Index m = 0; m < p.X.cols(); ++m) out << ',' << csv::format(p.X(t, m));
      for (Eigen::Index r = 0; r < p.Z.cols(); ++r) out << ',' << csv::format(p.Z(t, r));
    }
    out << '\n';
  }
  return out.str();
}

inline SeriesPanel panel_from_csv(const csv::Table& t) {
  SeriesPanel p;
  std::vector<std::size_t> ycols, xcols, zcols;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    const std::string& h = t.header[i];
    if (h.rfind("y_", 0) == 0) {
      ycols.push_back(i);
      p.meta.components.push_back(h.substr(2));
    } else if (h.rfind("x_", 0) == 0) {
      xcols.push_back(i);
    } else if (h.rfind("z_", 0) == 0 && h != "z_raw" && h != "z_std") {
      zcols.push_back(i);
    }
  }
  if (t.find("date") < 0) throw FormatError("panel csv: missing 'date' column");
  if (ycols.size() < 2) throw FormatError("panel csv: need at least two y_ columns");
  const auto T = static_cast<Eigen::Index>(t.rows.size());
  const std::size_t date_col = t.column("date");
  const long zraw = t.find("z_raw"), zstd = t.find("z_std");
  if ((zraw < 0) != (zstd < 0)) throw FormatError("panel csv: z_raw and z_std must appear together");
  p.Y.resize(T, static_cast<Eigen::Index>(ycols.size()));
  for (Eigen::Index r = 0; r < T; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    p.dates.push_back(row[date_col]);
    for (std::size_t j = 0; j < ycols.size(); ++j) p.Y(r, static_cast<Eigen::Index>(j)) = csv::parse_double(row[ycols[j]]);
  }
  if (xcols.empty()) {
    p.X = intercept_design(static_cast<std::size_t>(T));
  } else {
    p.X.resize(T, static_cast<Eigen::Index>(xcols.size()));
    for (Eigen::Index r = 0; r < T; ++r)
      for (std::size_t m = 0; m < xcols.size(); ++m)
        p.X(r, static_cast<Eigen::Index>(m)) = csv::parse_double(t.rows[static_cast<std::size_t>(r)][xcols[m]]);
  }
  if (!zcols.empty()) {
    p.Z.resize(T, static_cast<Eigen::Index>(zcols.size()));
    for (Eigen::Index r = 0; r < T; ++r)
      for (std::size_t c = 0; c < zcols.size(); ++c)
        p.Z(r, static_cast<Eigen::Index>(c)) = csv::parse_double(t.rows[static_cast<std::size_t>(r)][zcols[c]]);
  } else if (zstd >= 0) {
    p.Z.resize(T, 2);
    p.z_raw.resize(T);
    for (Eigen::Index r = 0; r < T; ++r) {
      const auto& row = t.rows[static_cast<std::size_t>(r)];
      p.Z(r, 0) = 1.0;
      p.Z(r, 1) = csv::parse_double(row[static_cast<std::size_t>(zstd)]);
      p.z_raw[r] = csv::parse_double(row[static_cast<std::size_t>(zraw)]);
    }
  } else {
    p.Z = Eigen::MatrixXd::Ones(T, 1);
  }
  p.validate();
  return p;
}

/// Writes `path` and its meta sidecar.
inline void write_panel(const SeriesPanel& p, const std::string& path) {
  csv::write_text(path, panel_to_csv(p));
  write_json(meta_path(path), to_json(p.meta));
}

/// Reads a panel; the meta sidecar is optional.
inline SeriesPanel read_panel(const std::string& path) {
  SeriesPanel p = panel_from_csv(csv::read_file(path));
  const std::string mp = meta_path(path);
  if (std::filesystem::exists(mp)) {
    const std::vector<std::string> names = p.meta.components;
    p.meta = meta_from_json(read_json(mp));
    p.meta.components = names;
  }
  return p;
}

}  // namespace bdarma
