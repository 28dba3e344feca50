#pragma once

// JSON and CSV serialization for brackets, curvature reports, stratum labels
// and flow trajectories. JSON uses insertion-ordered objects so output is
// byte-stable across runs.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bracketflow/bracket.hpp"
#include "bracketflow/catalog.hpp"
#include "bracketflow/curvature.hpp"
#include "bracketflow/errors.hpp"
#include "bracketflow/flows.hpp"
#include "bracketflow/stratum_label.hpp"

namespace bracketflow {

using Json = nlohmann::ordered_json;

inline Json matrix_to_json(const Matrix& a) {
  Json rows = Json::array();
  for (int i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty())
    throw BadConfig("matrix must be a nonempty array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const Json& row = j.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw BadConfig("matrix rows have inconsistent lengths");
    for (int k = 0; k < cols; ++k) a(i, k) = row.at(k).get<double>();
  }
  return a;
}

// {"dim_h": int, "dim_m": int, "entries": [[i, j, k, value], ...]}
// Indices 1-based, only i < j stored.
inline Json bracket_to_json(const Bracket& b) {
  Json j;
  j["dim_h"] = b.dim_h();
  j["dim_m"] = b.dim_m();
  Json entries = Json::array();
  for (int i = 0; i < b.n(); ++i)
    for (int jj = i + 1; jj < b.n(); ++jj)
      for (int k = 0; k < b.n(); ++k) {
        const double v = b.at(i, jj, k);
        if (v != 0.0) entries.push_back(Json::array({i + 1, jj + 1, k + 1, v}));
      }
  j["entries"] = std::move(entries);
  return j;
}

inline Bracket bracket_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim_h") || !j.contains("dim_m") ||
      !j.contains("entries"))
    throw BadConfig("bracket JSON needs dim_h, dim_m and entries");
  const int dim_h = j.at("dim_h").get<int>();
  const int dim_m = j.at("dim_m").get<int>();
  std::vector<BracketEntry> entries;
  for (const Json& e : j.at("entries")) {
    if (!e.is_array() || e.size() != 4)
      throw BadConfig("bracket entry must be [i, j, k, value]");
    entries.push_back({e.at(0).get<int>(), e.at(1).get<int>(),
                       e.at(2).get<int>(), e.at(3).get<double>()});
  }
  return make_bracket(dim_h, dim_m, entries, dim_h > 0);
}

inline Json curvature_report_to_json(const CurvatureReport& r) {
  Json j;
  j["killing"] = matrix_to_json(r.killing);
  j["moment"] = matrix_to_json(r.moment);
  j["M_m"] = matrix_to_json(r.M_m);
  j["P_h"] = matrix_to_json(r.P_h);
  j["mean_curv"] = vector_to_json(r.mean_curv);
  j["ric"] = matrix_to_json(r.ric);
  j["ric_mod"] = matrix_to_json(r.ric_mod);
  j["scal"] = r.scal;
  j["scal_mod"] = r.scal_mod;
  return j;
}

// The beta matrix is written in its diagonalized (label) basis, matching the
// eigenvalue list; the conjugating frame is basis-dependent and not exported.
inline Json stratum_label_to_json(const StratumLabel& label) {
  Json j;
  j["beta"] = matrix_to_json(label.beta);
  Json eig = Json::array();
  for (double v : label.eigenvalues) eig.push_back(v);
  j["eigenvalues"] = std::move(eig);
  Json mult = Json::array();
  for (int m : label.multiplicities) mult.push_back(m);
  j["multiplicities"] = std::move(mult);
  if (!label.rationalized) {
    j["rationalized"] = nullptr;
  } else {
    Json rat = Json::array();
    for (const Rational& r : *label.rationalized)
      rat.push_back(Json::array({r.num, r.den}));
    j["rationalized"] = std::move(rat);
  }
  j["norm_sq"] = label.beta.squaredNorm();
  return j;
}

inline Json classification_to_json(const Classification& c) {
  Json j;
  j["kind"] = to_string(c.kind);
  j["c"] = c.c;
  j["D"] = matrix_to_json(c.D);
  j["soliton_residual"] = c.soliton_residual;
  j["derivation_residual"] = c.derivation_res;
  return j;
}

namespace detail {

inline std::string format_sci(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17e", x);
  return buf;
}

}  // namespace detail

// CSV trajectory dump, one row per recorded sample, full-precision floats.
inline void write_trajectory_csv(std::ostream& os, const FlowTrajectory& traj) {
  os << "t,scal,scal_mod,ric_mod_norm,jacobi,F_beta,v_beta,norm_mu_m,"
        "norm_mu_h,ratio_ric_scal\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << detail::format_sci(traj.times[i]) << ','
       << detail::format_sci(traj.scal[i]) << ','
       << detail::format_sci(traj.scal_mod[i]) << ','
       << detail::format_sci(traj.ric_mod_norm[i]) << ','
       << detail::format_sci(traj.jacobi[i]) << ','
       << detail::format_sci(traj.f_beta[i]) << ','
       << detail::format_sci(traj.v_beta[i]) << ','
       << detail::format_sci(traj.norm_mu_m[i]) << ','
       << detail::format_sci(traj.norm_mu_h[i]) << ','
       << detail::format_sci(traj.ratio_ric_scal[i]) << '\n';
  }
}

inline std::string trajectory_csv_string(const FlowTrajectory& traj) {
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Catalog entries are loadable from JSON: the bracket fields above plus
// "name" and optional "tags" / "expected" blocks.
inline CatalogEntry catalog_entry_from_json(const Json& j) {
  CatalogEntry e;
  e.name = j.value("name", std::string("unnamed"));
  e.dim_h = j.at("dim_h").get<int>();
  e.dim_m = j.at("dim_m").get<int>();
  for (const Json& raw : j.at("entries")) {
    if (!raw.is_array() || raw.size() != 4)
      throw BadConfig("bracket entry must be [i, j, k, value]");
    e.entries.push_back({raw.at(0).get<int>(), raw.at(1).get<int>(),
                         raw.at(2).get<int>(), raw.at(3).get<double>()});
  }
  if (j.contains("tags"))
    for (const Json& t : j.at("tags")) e.tags.push_back(t.get<std::string>());
  if (j.contains("expected")) {
    const Json& x = j.at("expected");
    if (x.contains("beta_diagonal")) {
      Vector bd(static_cast<int>(x.at("beta_diagonal").size()));
      for (int i = 0; i < bd.size(); ++i)
        bd(i) = x.at("beta_diagonal").at(i).get<double>();
      e.expected.beta_diagonal = bd;
    }
    if (x.contains("ric_mod")) e.expected.ric_mod = matrix_from_json(x.at("ric_mod"));
    if (x.contains("scal_mod")) e.expected.scal_mod = x.at("scal_mod").get<double>();
    if (x.contains("classification")) {
      const std::string kind = x.at("classification").get<std::string>();
      if (kind == "Flat") e.expected.classification = MetricClass::Flat;
      else if (kind == "Soliton") e.expected.classification = MetricClass::Soliton;
      else if (kind == "Generic") e.expected.classification = MetricClass::Generic;
      else throw BadConfig("unknown classification: " + kind);
    }
    if (x.contains("notes")) e.expected.notes = x.at("notes").get<std::string>();
  }
  // Validate eagerly so a bad file fails at load, not first use.
  (void)e.bracket();
  return e;
}

inline Json catalog_entry_to_json(const CatalogEntry& e) {
  Json j = bracket_to_json(e.bracket());
  Json out;
  out["name"] = e.name;
  out["dim_h"] = j["dim_h"];
  out["dim_m"] = j["dim_m"];
  out["entries"] = j["entries"];
  Json tags = Json::array();
  for (const std::string& t : e.tags) tags.push_back(t);
  out["tags"] = std::move(tags);
  Json x = Json::object();
  if (e.expected.beta_diagonal) {
    Json bd = Json::array();
    for (int i = 0; i < e.expected.beta_diagonal->size(); ++i)
      bd.push_back((*e.expected.beta_diagonal)(i));
    x["beta_diagonal"] = std::move(bd);
  }
  if (e.expected.ric_mod) x["ric_mod"] = matrix_to_json(*e.expected.ric_mod);
  if (e.expected.scal_mod) x["scal_mod"] = *e.expected.scal_mod;
  if (e.expected.classification) x["classification"] = to_string(*e.expected.classification);
  if (!e.expected.notes.empty()) x["notes"] = e.expected.notes;
  if (!x.empty()) out["expected"] = std::move(x);
  return out;
}

}  // namespace bracketflow
