#include "progviz/telemetry.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "progviz/error.hpp"

namespace progviz {

void EmissionsConfig::validate() const {
  if (!(carbon_intensity_kg_per_kwh > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "carbon intensity must be positive");
  }
  if (underestimation_correction < 1.0 || underestimation_correction > 1.3) {
    throw Error(ErrorCode::InvalidConfig, "underestimation correction must be in [1.0, 1.3]");
  }
}

double energy_from_power_duration(double avg_power_w, double duration_min) {
  if (avg_power_w < 0.0 || duration_min < 0.0) {
    throw Error(ErrorCode::NegativeInput, "power and duration must be non-negative");
  }
  return avg_power_w * duration_min / 60.0 / 1000.0;
}

double emissions_from_energy(double energy_kwh, const EmissionsConfig& cfg) {
  if (energy_kwh < 0.0) throw Error(ErrorCode::NegativeInput, "energy must be non-negative");
  return energy_kwh * cfg.carbon_intensity_kg_per_kwh * cfg.underestimation_correction;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = std::abs(value) * scale;
  const double rounded = std::floor(scaled + 0.5 + 1e-9) / scale;
  return std::copysign(rounded, value);
}

EnergyRecord EnergyLedger::record_stage(StageKind stage, double duration_min, double avg_power_w,
                                        const EmissionsConfig& cfg) {
  EnergyRecord rec;
  rec.stage = stage;
  rec.label = std::string(stage_label(stage));
  rec.duration_min = duration_min;
  rec.avg_power_w = avg_power_w;
  rec.energy_kwh = energy_from_power_duration(avg_power_w, duration_min);
  rec.emissions_kg = emissions_from_energy(rec.energy_kwh, cfg);
  std::lock_guard lock(mutex_);
  records_.push_back(rec);
  return rec;
}

std::vector<EnergyRecord> EnergyLedger::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t EnergyLedger::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

EmissionsReport build_report(std::span<const EnergyRecord> records, const EmissionsConfig& cfg) {
  if (records.empty()) throw Error(ErrorCode::EmptyLedger, "no energy records to report");
  cfg.validate();

  struct Acc {
    double duration_min = 0.0;
    double energy_kwh = 0.0;
    std::optional<double> power;
  };
  std::map<StageKind, Acc> by_stage;
  for (const auto& r : records) {
    if (!r.stage) continue;
    auto& acc = by_stage[*r.stage];
    acc.duration_min += r.duration_min;
    acc.energy_kwh += r.energy_kwh;
    if (!acc.power) acc.power = r.avg_power_w;
  }

  EmissionsReport report;
  report.total.label = "Total";
  for (const auto& [stage, acc] : by_stage) {
    EnergyRecord row;
    row.stage = stage;
    row.label = std::string(stage_label(stage));
    row.duration_min = acc.duration_min;
    row.energy_kwh = acc.energy_kwh;
    // Energy-weighted mean power; falls back to the configured draw for
    // zero-length stages.
    row.avg_power_w = acc.duration_min > 0.0 ? acc.energy_kwh * 60.0 * 1000.0 / acc.duration_min
                                             : acc.power.value_or(0.0);
    row.emissions_kg = emissions_from_energy(acc.energy_kwh, cfg);
    report.total.duration_min += row.duration_min;
    report.total.energy_kwh += row.energy_kwh;
    report.total.emissions_kg += row.emissions_kg;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_report(const EmissionsReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto line = [&](const std::string& step, const std::string& duration, const std::string& energy,
                  const std::string& power, const std::string& emissions) {
    out << std::left << std::setw(22) << step << std::right << std::setw(12) << duration
        << std::setw(12) << energy << std::setw(12) << power << std::setw(16) << emissions << '\n';
  };
  auto num = [](double v, const char* unit) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << round_half_up(v) << ' ' << unit;
    return s.str();
  };
  line("Processing Step", "Duration", "Energy Use", "Power", "Emissions");
  out << std::string(74, '-') << '\n';
  for (const auto& row : report.rows) {
    line(row.label, num(row.duration_min, "min"), num(row.energy_kwh, "kWh"),
         row.avg_power_w ? num(*row.avg_power_w, "W") : "--", num(row.emissions_kg, "kg CO2eq"));
  }
  out << std::string(74, '-') << '\n';
  line("Total", num(report.total.duration_min, "min"), num(report.total.energy_kwh, "kWh"), "--",
       num(report.total.emissions_kg, "kg CO2eq"));
  return out.str();
}

RenderedReport render_report(const EnergyLedger& ledger, const EmissionsConfig& cfg) {
  const auto records = ledger.snapshot();
  RenderedReport out{build_report(records, cfg), {}};
  out.text = format_report(out.report);
  return out;
}

}  // namespace progviz
