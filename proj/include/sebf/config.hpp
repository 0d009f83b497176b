#pragma once

#include <string>

#include "json.hpp"  // vendored nlohmann single header

#include "sebf/engine.hpp"
#include "sebf/mcmc.hpp"

namespace sebf::io {

/// Column names of the observation CSV. Defaults match the canonical
/// schema: site, day, count, exposure plus one or two coordinate columns.
struct ColumnMap {
  std::string site = "site";
  std::string time = "day";
  std::string count = "count";
  std::string exposure = "exposure";  // optional column; missing means 1
  std::vector<std::string> coords = {"x"};
};

/// Everything a run needs: the engine block, the offline MCMC block and the
/// data column mapping. Parsed from a single JSON file; every key has the
/// documented default, and validation failures carry actionable messages.
struct RunConfig {
  engine::EngineConfig engine;
  mcmc::McmcConfig mcmc;
  ColumnMap columns;
  bool simplified_estimator = false;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
};

}  // namespace sebf::io
