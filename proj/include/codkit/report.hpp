#pragma once

#include "codkit/config.hpp"
#include "codkit/learning.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace codkit {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchemaVersion = "1.0";
inline constexpr const char* kCheckpointFormat = "codkit-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Short deterministic identifier of a command invocation: the first 12 hex
/// digits of fnv1a_hex over the command name and the canonical config echo.
std::string make_run_id(const std::string& command, const Json& config_echo);

struct Summary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

/// Median and quartiles with linear interpolation between order statistics.
Summary summarize(std::vector<double> values);

Json to_json(const Summary& s);
Json to_json(const MetricValue& v);
Json to_json(const MaeReport& m);
Json to_json(const EpochRecord& r);
Json config_json(const ExperimentConfig& cfg);

/// Throws NumericalError if any number in `j` is not finite.
void require_finite_json(const Json& j, const std::string& path = "$");

/// Pretty-printed with a trailing newline; the parent directory is created.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

/// Self-describing JSON tensor dump of a trained model. Layout is documented
/// in docs/checkpoint.md.
Json checkpoint_json(const TrainResult& result, const ExperimentConfig& cfg, std::uint64_t seed);
TrainedModel model_from_checkpoint(const Json& j);

/// Rows of (domain, y_1..y_m, z_1..z_d) for both domains.
void write_embeddings(const std::filesystem::path& path, const TrainedModel& model, const Dataset& source,
                      const Dataset& target);

}  // namespace codkit
