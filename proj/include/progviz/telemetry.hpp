#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "progviz/prompts.hpp"

namespace progviz {

struct EmissionsConfig {
  // kg CO2eq per kWh. 0.90 kg / 2.37 kWh from the reference measurements.
  double carbon_intensity_kg_per_kwh = 0.380;
  // Software meters under-read by 20-30 %; 1.0 keeps raw figures.
  double underestimation_correction = 1.0;

  /// Throws Error(InvalidConfig).
  void validate() const;
};

struct EnergyRecord {
  std::optional<StageKind> stage;  // absent for the aggregate row
  std::string label;
  double duration_min = 0.0;
  std::optional<double> avg_power_w;
  double energy_kwh = 0.0;
  double emissions_kg = 0.0;
};

/// avg_power_w * duration_min / 60 / 1000. Throws Error(NegativeInput).
double energy_from_power_duration(double avg_power_w, double duration_min);
/// energy_kwh * intensity * correction. Throws Error(NegativeInput).
double emissions_from_energy(double energy_kwh, const EmissionsConfig& cfg);

/// Round half away from zero at `decimals` places, tolerant of binary
/// representation error (0.125 -> 0.13).
double round_half_up(double value, int decimals = 2);

// Append-only, internally serialized.
class EnergyLedger {
 public:
  EnergyRecord record_stage(StageKind stage, double duration_min, double avg_power_w,
                            const EmissionsConfig& cfg);
  std::vector<EnergyRecord> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<EnergyRecord> records_;
};

struct EmissionsReport {
  std::vector<EnergyRecord> rows;  // one per stage present, in stage order
  EnergyRecord total;
};

/// Aggregates records by stage; emissions are recomputed from energy with
/// `cfg` so a report can be re-rendered under another correction.
/// Throws Error(EmptyLedger).
EmissionsReport build_report(std::span<const EnergyRecord> records, const EmissionsConfig& cfg);

/// Fixed-width table: step, duration (min), energy (kWh), power (W), emissions (kg).
std::string format_report(const EmissionsReport& report);

struct RenderedReport {
  EmissionsReport report;
  std::string text;
};

RenderedReport render_report(const EnergyLedger& ledger, const EmissionsConfig& cfg);

}  // namespace progviz
