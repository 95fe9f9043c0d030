#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "odin/design.hpp"
#include "odin/error.hpp"
#include "odin/mm.hpp"

namespace odin {

/// A fit together with the identifiers needed to match it to a dataset.
struct StoredFit {
  ModelFit fit;
  std::vector<std::string> subject_ids;
  std::vector<std::string> design_columns;
  ReferenceCoding coding = ReferenceCoding::minimal;
};

inline std::string to_string(ReferenceCoding c) { return c == ReferenceCoding::minimal ? "minimal" : "per_block"; }

inline ReferenceCoding parse_reference_coding(const std::string& s) {
  if (s == "minimal") return ReferenceCoding::minimal;
  if (s == "per_block") return ReferenceCoding::per_block;
  fail(Errc::invalid_config, "unknown reference coding '" + s + "' (expected minimal or per_block)");
}

inline nlohmann::json fit_to_json(const StoredFit& stored) {
  const ModelFit& f = stored.fit;
  nlohmann::json j;
  j["format"] = "odin-fit";
  j["version"] = 1;
  j["lambda"] = f.lambda;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["subject_ids"] = stored.subject_ids;
  j["design_columns"] = stored.design_columns;
  j["reference_coding"] = to_string(stored.coding);
  j["Z"] = std::vector<double>(f.Z.data(), f.Z.data() + f.Z.size());
  nlohmann::json betas = nlohmann::json::array();
  for (Eigen::Index i = 0; i < f.betas.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(f.betas.cols()));
    for (Eigen::Index c = 0; c < f.betas.cols(); ++c) row[static_cast<std::size_t>(c)] = f.betas(i, c);
    betas.push_back(row);
  }
  j["betas"] = std::move(betas);
  j["trace"] = f.trace;
  return j;
}

inline StoredFit fit_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "odin-fit", Errc::malformed, "not an odin fit document");
    StoredFit s;
    s.fit.lambda = j.at("lambda").get<double>();
    s.fit.converged = j.at("converged").get<bool>();
    s.fit.iterations = j.at("iterations").get<int>();
    s.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
    s.design_columns = j.at("design_columns").get<std::vector<std::string>>();
    if (j.contains("reference_coding")) s.coding = parse_reference_coding(j.at("reference_coding").get<std::string>());
    const auto z = j.at("Z").get<std::vector<double>>();
    s.fit.Z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    const auto& betas = j.at("betas");
    const auto n = static_cast<Eigen::Index>(betas.size());
    const auto p = static_cast<Eigen::Index>(s.design_columns.size());
    s.fit.betas.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = betas.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
      require(static_cast<Eigen::Index>(row.size()) == p, Errc::malformed, "fit document: beta row has wrong length");
      for (Eigen::Index c = 0; c < p; ++c) s.fit.betas(i, c) = row[static_cast<std::size_t>(c)];
    }
    require(static_cast<std::size_t>(n) == s.subject_ids.size(), Errc::malformed,
            "fit document: beta rows do not match subject ids");
    s.fit.trace = j.at("trace").get<std::vector<double>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::malformed, std::string("fit document: ") + e.what());
  }
}

inline void write_fit(const StoredFit& stored, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write fit file '" + path + "'");
  out << fit_to_json(stored).dump(1) << '\n';
}

inline StoredFit read_fit(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open fit file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::malformed, "fit file '" + path + "' is not valid JSON: " + e.what());
  }
  return fit_from_json(j);
}

}  // namespace odin
