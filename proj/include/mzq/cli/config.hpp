#pragma once

// JSON run configuration with strict key checking.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mzq/components.hpp"
#include "mzq/estimate.hpp"
#include "mzq/physics.hpp"

namespace mzq::cli {

// View of one JSON object that remembers which keys were read; finish()
// rejects the rest.
class ConfigObject {
 public:
  ConfigObject(const nlohmann::json& j, std::string where);

  // A null value counts as absent.
  bool has(const std::string& key) const;
  double number(const std::string& key);
  double number(const std::string& key, double fallback);
  long long integer(const std::string& key, long long fallback);
  std::string text(const std::string& key);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<std::string> texts(const std::string& key);
  ConfigObject child(const std::string& key);
  const nlohmann::json& raw(const std::string& key);
  const std::string& where() const { return where_; }

  void finish() const;

 private:
  const nlohmann::json& at(const std::string& key);

  const nlohmann::json& j_;
  std::string where_;
  mutable std::set<std::string> used_;
};

nlohmann::json load_config(const std::filesystem::path& file);

CircuitSpec parse_circuit(ConfigObject c);
QubitScatterer parse_qubit(ConfigObject q);
physics::TransmonParams parse_transmon(ConfigObject t);
physics::BathModel parse_bath(ConfigObject b);
DrivePort parse_drive(const std::string& s);
std::vector<double> parse_grid(ConfigObject g);  // Hz
QualityThresholds parse_thresholds(ConfigObject t);

}  // namespace mzq::cli
