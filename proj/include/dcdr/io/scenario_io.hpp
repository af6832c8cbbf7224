#pragma once

/**
 * @file
 * @brief Scenario files: a JSON config plus long-format CSV traces.
 *
 * Layout of a scenario directory:
 *
 *   scenario.json            metadata, units, data centers, trace file names
 *   <trace>.csv              header `slot,location,value`; slot-level series
 *                            (workload, avg_cap) leave the location empty
 *
 * Units declared in the config are normalized on load to MWh, MW and
 * currency/MWh. Files are written in those units with 17 significant digits,
 * so save followed by load reproduces every value exactly.
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcdr/errors.hpp"
#include "dcdr/model.hpp"

namespace dcdr::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ParseError(where + ": '" + s + "' is not a number");
  return v;
}

inline long parse_index(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ParseError(where + ": '" + s + "' is not an index");
  return v;
}

struct Units {
  double energy = 1.0;  ///< to MWh
  double power = 1.0;   ///< to MW
  double price = 1.0;   ///< currency per declared energy unit -> currency per MWh
};

inline Units parse_units(const json& u) {
  static const std::map<std::string, double> energy{{"MWh", 1.0}, {"kWh", 1e-3}, {"GWh", 1e3}, {"Wh", 1e-6}};
  static const std::map<std::string, double> power{{"MW", 1.0}, {"kW", 1e-3}, {"GW", 1e3}, {"W", 1e-6}};
  auto pick = [](const std::map<std::string, double>& m, const json& j, const char* key, const char* def) {
    const std::string v = j.value(key, def);
    const auto it = m.find(v);
    if (it == m.end()) throw ParseError(std::string("units.") + key + ": unknown unit '" + v + "'");
    return it->second;
  };
  Units out;
  out.energy = pick(energy, u, "energy", "MWh");
  out.power = pick(power, u, "power", "MW");
  out.price = 1.0 / pick(energy, u, "price_per", "MWh");
  return out;
}

/// Entries of one `slot,location,value` file.
struct TraceTable {
  std::map<std::pair<long, long>, double> cells;  ///< location -1 for slot-level rows
};

inline TraceTable read_trace(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "slot,location,value") throw ParseError(path.string() + ": expected header 'slot,location,value'");
  TraceTable t;
  for (long row = 2; std::getline(in, line); ++row) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(row);
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 3) throw ParseError(where + ": expected 3 fields");
    const long slot = parse_index(f[0], where);
    const long loc = f[1].empty() ? -1 : parse_index(f[1], where);
    if (!t.cells.emplace(std::make_pair(slot, loc), parse_double(f[2], where)).second)
      throw ParseError(where + ": duplicate entry");
  }
  return t;
}

/// T x N table; every missing or out-of-range cell is reported.
inline Table trace_matrix(const TraceTable& t, long T, long N, double factor, const std::string& name,
                          std::vector<std::string>& problems) {
  Table m = Table::Zero(T, N);
  for (long s = 0; s < T; ++s)
    for (long i = 0; i < N; ++i) {
      const auto it = t.cells.find({s, i});
      if (it == t.cells.end())
        problems.push_back(name + ": missing (slot " + std::to_string(s) + ", location " + std::to_string(i) + ")");
      else
        m(s, i) = it->second * factor;
    }
  for (const auto& [key, v] : t.cells)
    if (key.first < 0 || key.first >= T || key.second < 0 || key.second >= N)
      problems.push_back(name + ": entry outside the table (slot " + std::to_string(key.first) + ", location " +
                         std::to_string(key.second) + ")");
  return m;
}

inline Vec trace_series(const TraceTable& t, long T, double factor, const std::string& name,
                        std::vector<std::string>& problems) {
  Vec v = Vec::Zero(T);
  for (long s = 0; s < T; ++s) {
    const auto it = t.cells.find({s, -1});
    if (it == t.cells.end())
      problems.push_back(name + ": missing (slot " + std::to_string(s) + ")");
    else
      v[s] = it->second * factor;
  }
  for (const auto& [key, val] : t.cells)
    if (key.second != -1 || key.first < 0 || key.first >= T)
      problems.push_back(name + ": unexpected entry (slot " + std::to_string(key.first) + ")");
  return v;
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/**
 * Reads and validates a scenario directory (or its scenario.json). Throws
 * ParseError for unreadable input and ValidationError listing every problem.
 */
inline Scenario load_scenario(const fs::path& where) {
  const fs::path cfg_path = fs::is_directory(where) ? where / "scenario.json" : where;
  const fs::path dir = cfg_path.parent_path();
  const json cfg = read_json(cfg_path);
  Scenario sc;
  std::vector<std::string> problems;
  try {
    const Units u = parse_units(cfg.value("units", json::object()));
    sc.name = cfg.value("name", cfg_path.parent_path().filename().string());
    sc.currency = cfg.value("units", json::object()).value("currency", "USD");
    sc.slot_length = cfg.value("slot_length_hours", 1.0);
    sc.delay_bound = cfg.at("delay_bound_s").get<double>();
    const long T = cfg.at("slots").get<long>();
    const auto& dcs = cfg.at("data_centers");
    const long N = static_cast<long>(dcs.size());
    sc.grid.capacity.resize(N);
    sc.pricing.sensitivity.resize(N);
    for (long i = 0; i < N; ++i) {
      const auto& d = dcs[static_cast<std::size_t>(i)];
      DataCenterSpec spec;
      spec.id = static_cast<std::size_t>(i);
      spec.servers = d.at("servers").get<double>();
      spec.service_rate = d.at("service_rate").get<double>();
      spec.p_idle = d.at("p_idle_w").get<double>();
      spec.p_peak = d.at("p_peak_w").get<double>();
      spec.pue = d.at("pue").get<double>();
      spec.base_overhead = d.value("base_overhead", 0.0) * u.energy;
      sc.data_centers.push_back(spec);
      sc.grid.capacity[i] = d.at("capacity").get<double>() * u.power;
      // currency per energy^2
      sc.pricing.sensitivity[i] = d.at("sensitivity").get<double>() * u.price / u.energy;
    }

    const auto& tr = cfg.at("traces");
    auto table = [&](const char* key, double factor) {
      return trace_matrix(read_trace(dir / tr.at(key).get<std::string>()), T, N, factor, key, problems);
    };
    auto series = [&](const char* key, double factor) {
      return trace_series(read_trace(dir / tr.at(key).get<std::string>()), T, factor, key, problems);
    };
    sc.pricing.base_price = table("base_price", u.price);
    sc.grid.background = table("background", u.energy);
    sc.transmission_delay = table("transmission_delay", 1.0);
    sc.workload = series("workload", 1.0);

    // Price band and mean cap: explicit traces, or ratios to the base price.
    const json band = cfg.value("pricing", json::object());
    if (tr.contains("price_floor"))
      sc.pricing.price_floor = table("price_floor", u.price);
    else
      sc.pricing.price_floor = band.value("floor_ratio", 0.0) * sc.pricing.base_price;
    if (tr.contains("price_ceiling"))
      sc.pricing.price_ceiling = table("price_ceiling", u.price);
    else
      sc.pricing.price_ceiling = band.value("ceiling_ratio", 2.0) * sc.pricing.base_price;
    if (tr.contains("avg_cap"))
      sc.pricing.avg_cap = series("avg_cap", u.price);
    else
      sc.pricing.avg_cap = band.value("avg_cap_ratio", 1.0) * sc.pricing.base_price.rowwise().mean();
  } catch (const json::exception& e) {
    throw ParseError(cfg_path.string() + ": " + e.what());
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  require_valid(sc);
  return sc;
}

inline void write_trace(const fs::path& path, const Table& m) {
  std::ofstream out(path);
  out << "slot,location,value\n";
  for (Eigen::Index s = 0; s < m.rows(); ++s)
    for (Eigen::Index i = 0; i < m.cols(); ++i) out << s << ',' << i << ',' << format_double(m(s, i)) << '\n';
  if (!out) throw Error(path.string() + ": write failed");
}

inline void write_series(const fs::path& path, const Vec& v) {
  std::ofstream out(path);
  out << "slot,location,value\n";
  for (Eigen::Index s = 0; s < v.size(); ++s) out << s << ",," << format_double(v[s]) << '\n';
  if (!out) throw Error(path.string() + ": write failed");
}

/// Writes `sc` in canonical units; `notes` lands in the config for provenance.
inline void save_scenario(const Scenario& sc, const fs::path& dir, const json& notes = nullptr) {
  fs::create_directories(dir);
  json cfg;
  cfg["name"] = sc.name;
  cfg["units"] = {{"energy", "MWh"}, {"power", "MW"}, {"price_per", "MWh"}, {"currency", sc.currency}};
  cfg["slots"] = sc.slots();
  cfg["slot_length_hours"] = sc.slot_length;
  cfg["delay_bound_s"] = sc.delay_bound;
  cfg["data_centers"] = json::array();
  for (std::size_t i = 0; i < sc.locations(); ++i) {
    const auto& d = sc.data_centers[i];
    const auto k = static_cast<Eigen::Index>(i);
    cfg["data_centers"].push_back({{"servers", d.servers},
                                   {"service_rate", d.service_rate},
                                   {"p_idle_w", d.p_idle},
                                   {"p_peak_w", d.p_peak},
                                   {"pue", d.pue},
                                   {"base_overhead", d.base_overhead},
                                   {"capacity", sc.grid.capacity[k]},
                                   {"sensitivity", sc.pricing.sensitivity[k]}});
  }
  cfg["traces"] = {{"base_price", "base_price.csv"},       {"background", "background.csv"},
                   {"transmission_delay", "transmission_delay.csv"}, {"workload", "workload.csv"},
                   {"price_floor", "price_floor.csv"},     {"price_ceiling", "price_ceiling.csv"},
                   {"avg_cap", "avg_cap.csv"}};
  if (!notes.is_null()) cfg["notes"] = notes;
  write_trace(dir / "base_price.csv", sc.pricing.base_price);
  write_trace(dir / "background.csv", sc.grid.background);
  write_trace(dir / "transmission_delay.csv", sc.transmission_delay);
  write_trace(dir / "price_floor.csv", sc.pricing.price_floor);
  write_trace(dir / "price_ceiling.csv", sc.pricing.price_ceiling);
  write_series(dir / "workload.csv", sc.workload);
  write_series(dir / "avg_cap.csv", sc.pricing.avg_cap);
  std::ofstream out(dir / "scenario.json");
  out << cfg.dump(2) << '\n';
  if (!out) throw Error((dir / "scenario.json").string() + ": write failed");
}

}  // namespace dcdr::io
