#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>

#include "config.hpp"
#include "errors.hpp"

namespace hbr {

inline constexpr int kEnvelopeSchemaVersion = 1;

inline nlohmann::json envelope(const ExperimentConfig& cfg, const std::string& subcommand, nlohmann::json result) {
  return {{"schema_version", kEnvelopeSchemaVersion},
          {"module_version", kModuleVersion},
          {"config_hash", cfg.hash},
          {"subcommand", subcommand},
          {"result", std::move(result)}};
}

enum class OutputFormat { json, csv, both };

inline OutputFormat output_format_from_string(const std::string& s) {
  if (s == "json") return OutputFormat::json;
  if (s == "csv") return OutputFormat::csv;
  if (s == "both") return OutputFormat::both;
  throw ConfigError("--format must be json, csv or both (got '" + s + "')");
}

inline OutputFormat output_format_from_config(const ExperimentConfig& cfg) {
  bool j = false, c = false;
  for (auto& f : cfg.output.formats) (f == "json" ? j : c) = true;
  if (j && c) return OutputFormat::both;
  return c ? OutputFormat::csv : OutputFormat::json;
}

// CSV files carry the hash and version as leading comment lines.
class ReportWriter {
public:
  ReportWriter(std::string dir, OutputFormat fmt) : dir_(std::move(dir)), fmt_(fmt) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
  }

  const std::string& dir() const { return dir_; }
  bool wants_json() const { return fmt_ != OutputFormat::csv; }
  bool wants_csv() const { return fmt_ != OutputFormat::json; }

  std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

  void write(const ExperimentConfig& cfg, const std::string& subcommand, const nlohmann::json& result,
             const std::string& csv) {
    std::lock_guard<std::mutex> lock(mu_);
    if (wants_json()) put(path(subcommand + ".json"), envelope(cfg, subcommand, result).dump(2) + "\n");
    if (wants_csv() && !csv.empty())
      put(path(subcommand + ".csv"),
          "# schema_version=" + std::to_string(kEnvelopeSchemaVersion) + " module_version=" + kModuleVersion +
              " config_hash=" + cfg.hash + "\n" + csv);
  }

  void put(const std::string& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + file + "'");
    out << text;
  }

private:
  std::string dir_;
  OutputFormat fmt_;
  std::mutex mu_;
};

}  // namespace hbr
