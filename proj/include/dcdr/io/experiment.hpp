#pragma once

/**
 * @file
 * @brief Runs a set of methods over every slot of a scenario and writes the
 *        per-slot table, per-method series, a summary and the workload sweep.
 *
 * Output directory:
 *
 *   slots.csv                    one row per (slot, method)
 *   series/<quantity>_<method>.csv   two-column plot series (slot, value)
 *   robust_realized.csv          sampled realized index per slot (robust runs)
 *   summary.json                 averages and reductions against base price
 *   sweep.csv, series/sweep_reduction_<method>.csv   (sweep only)
 */

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dcdr/io/scenario_io.hpp"
#include "dcdr/model.hpp"
#include "dcdr/robust.hpp"
#include "dcdr/solve.hpp"

namespace dcdr::io {

struct RunManifest {
  fs::path scenario;
  std::vector<Method> methods;
  double workload_scale = 1.0;
  /// +-fraction of the background load
  std::optional<double> uncertainty;
  std::uint64_t seed = 1;
  fs::path out;
  /// 0 picks the hardware concurrency
  unsigned threads = 0;
  bool deterministic = false;
  Method robust_inner = Method::exact;
  bool freeze_box = false;
  int realized_samples = 1000;
  SolveOptions solver;
};

inline std::vector<std::string> validate_manifest(const RunManifest& m) {
  std::vector<std::string> v;
  if (m.methods.empty()) v.push_back("manifest: methods must be nonempty");
  if (!(m.workload_scale > 0)) v.push_back("manifest: workload_scale must be > 0");
  const bool robust = std::find(m.methods.begin(), m.methods.end(), Method::robust) != m.methods.end();
  if (robust && !m.uncertainty) v.push_back("manifest: method robust needs an uncertainty fraction");
  if (m.uncertainty && !(*m.uncertainty >= 0)) v.push_back("manifest: uncertainty must be >= 0");
  if (robust && m.robust_inner != Method::exact && m.robust_inner != Method::heuristic)
    v.push_back("manifest: robust inner method must be exact or heuristic");
  if (m.realized_samples < 0) v.push_back("manifest: realized_samples must be >= 0");
  return v;
}

inline std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_method(item));
  return out;
}

inline RunManifest parse_manifest(const fs::path& path) {
  const json j = read_json(path);
  RunManifest m;
  try {
    const fs::path base = path.parent_path();
    auto rel = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    m.scenario = rel(j.at("scenario").get<std::string>());
    for (const auto& s : j.at("methods")) m.methods.push_back(parse_method(s.get<std::string>()));
    m.workload_scale = j.value("workload_scale", 1.0);
    if (j.contains("uncertainty") && !j["uncertainty"].is_null()) m.uncertainty = j["uncertainty"].get<double>();
    m.seed = j.value("seed", std::uint64_t{1});
    m.out = rel(j.value("out", std::string("out")));
    m.threads = j.value("threads", 0u);
    m.deterministic = j.value("deterministic", false);
    m.robust_inner = parse_method(j.value("robust_inner", std::string("exact")));
    m.freeze_box = j.value("freeze_box", false);
    m.realized_samples = j.value("realized_samples", 1000);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return m;
}

enum class CellStatus { ok, infeasible, failed };

inline const char* to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok: return "ok";
    case CellStatus::infeasible: return "infeasible";
    case CellStatus::failed: return "error";
  }
  return "?";
}

struct RealizedStats {
  double worst_case = 0.0;
  double max = 0.0;
  double mean = 0.0;
  int samples = 0;
};

struct Cell {
  Method method = Method::exact;
  CellStatus status = CellStatus::ok;
  SolveReport report;
  std::string error;
  std::optional<RealizedStats> realized;
};

struct SlotRun {
  std::size_t slot = 0;
  std::vector<Cell> cells;

  const Cell* find(Method m) const {
    for (const auto& c : cells)
      if (c.method == m) return &c;
    return nullptr;
  }
};

struct RunResult {
  std::string scenario;
  double workload_scale = 1.0;
  std::vector<Method> methods;
  std::vector<SlotRun> slots;

  /// 0 ok, 3 an infeasible cell, 4 an internal solver error (takes precedence)
  int exit_code() const {
    int code = 0;
    for (const auto& s : slots)
      for (const auto& c : s.cells) {
        if (c.status == CellStatus::failed) return 4;
        if (c.status == CellStatus::infeasible) code = 3;
      }
    return code;
  }
};

inline Scenario scale_workload(Scenario sc, double scale) {
  sc.workload *= scale;
  return sc;
}

/// All requested methods on one slot; every error is attached to its cell.
inline SlotRun run_slot(const Scenario& sc, std::size_t t, const RunManifest& m) {
  SlotRun out;
  out.slot = t;
  std::optional<SlotProblem> sp;
  std::string slot_error;
  try {
    sp = reduce_to_energy_space(sc, t);
  } catch (const Error& e) {
    slot_error = e.what();
  }
  for (Method method : m.methods) {
    Cell c;
    c.method = method;
    if (!sp) {
      c.status = CellStatus::infeasible;
      c.error = slot_error;
      out.cells.push_back(std::move(c));
      continue;
    }
    try {
      if (method == Method::robust) {
        RobustConfig rc;
        rc.inner = m.robust_inner;
        rc.freeze_box = m.freeze_box;
        rc.solver = m.solver;
        const UncertaintySet u = relative_uncertainty(*sp, *m.uncertainty);
        const WcpResult w = solve_wcp(*sp, u, rc);
        c.report = w.report;
        if (m.realized_samples > 0) {
          // Seeded per slot so the draw is independent of execution order.
          std::seed_seq seq{static_cast<std::uint64_t>(m.seed), static_cast<std::uint64_t>(t)};
          std::mt19937_64 rng(seq);
          std::uniform_real_distribution<double> u01(0.0, 1.0);
          const Vec e = best_response(*sp, w.report.reference).e;
          RealizedStats st;
          st.worst_case = w.report.eli;
          st.samples = m.realized_samples;
          st.max = -std::numeric_limits<double>::infinity();
          double sum = 0.0;
          Vec d(sp->size());
          for (int k = 0; k < m.realized_samples; ++k) {
            for (Eigen::Index i = 0; i < d.size(); ++i)
              d[i] = u.delta_min[i] + u01(rng) * (u.delta_max[i] - u.delta_min[i]);
            const double v = eli_shifted(*sp, e, d);
            st.max = std::max(st.max, v);
            sum += v;
          }
          st.mean = sum / m.realized_samples;
          c.realized = st;
        }
      } else {
        c.report = solve_nominal(*sp, method, m.solver);
      }
    } catch (const InfeasibleSlot& e) {
      c.status = CellStatus::infeasible;
      c.error = e.what();
    } catch (const RestrictedInfeasible& e) {
      c.status = CellStatus::infeasible;
      c.error = e.what();
    } catch (const ExactInfeasible& e) {
      c.status = CellStatus::infeasible;
      c.error = e.what();
    } catch (const std::exception& e) {
      c.status = CellStatus::failed;
      c.error = e.what();
    }
    out.cells.push_back(std::move(c));
  }
  return out;
}

inline unsigned worker_count(const RunManifest& m, std::size_t jobs) {
  if (m.deterministic) return 1;
  unsigned n = m.threads ? m.threads : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(1, jobs)));
}

/// Runs every slot; slots are independent, so results do not depend on the schedule.
inline RunResult run_scenario(const Scenario& nominal, const RunManifest& m) {
  auto v = validate_manifest(m);
  if (!v.empty()) throw ValidationError(std::move(v));
  const Scenario sc = scale_workload(nominal, m.workload_scale);
  RunResult r;
  r.scenario = sc.name;
  r.workload_scale = m.workload_scale;
  r.methods = m.methods;
  r.slots.resize(sc.slots());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < sc.slots();) r.slots[t] = run_slot(sc, t, m);
  };
  const unsigned n = worker_count(m, sc.slots());
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Summary

struct MethodSummary {
  int ok = 0;
  int failed = 0;
  double mean_eli = 0.0;
  double total_cost = 0.0;
  /// mean over slots of 100 (eli_base - eli) / eli_base
  std::optional<double> eli_reduction_pct;
  /// 100 (cost_base - cost) / cost_base over the slots where both succeeded
  std::optional<double> cost_reduction_pct;
  /// mean over slots of 100 (eli - eli_integrated) / eli_integrated
  std::optional<double> gap_to_lower_pct;
};

inline MethodSummary summarize(const RunResult& r, Method m) {
  MethodSummary s;
  double red = 0.0, gap = 0.0, cost = 0.0, base_cost = 0.0;
  int nred = 0, ngap = 0;
  for (const auto& slot : r.slots) {
    const Cell* c = slot.find(m);
    if (!c) continue;
    if (c->status != CellStatus::ok) {
      ++s.failed;
      continue;
    }
    ++s.ok;
    s.mean_eli += c->report.eli;
    s.total_cost += c->report.total_cost;
    const Cell* b = slot.find(Method::base_price);
    if (b && b->status == CellStatus::ok && m != Method::base_price) {
      red += 100.0 * (b->report.eli - c->report.eli) / b->report.eli;
      cost += c->report.total_cost;
      base_cost += b->report.total_cost;
      ++nred;
    }
    const Cell* pi = slot.find(Method::integrated);
    if (pi && pi->status == CellStatus::ok && m != Method::integrated) {
      gap += 100.0 * (c->report.eli - pi->report.eli) / pi->report.eli;
      ++ngap;
    }
  }
  if (s.ok) s.mean_eli /= s.ok;
  if (nred) {
    s.eli_reduction_pct = red / nred;
    s.cost_reduction_pct = 100.0 * (base_cost - cost) / base_cost;
  }
  if (ngap) s.gap_to_lower_pct = gap / ngap;
  return s;
}

inline json summary_json(const RunResult& r) {
  json j;
  j["scenario"] = r.scenario;
  j["workload_scale"] = r.workload_scale;
  j["slots"] = r.slots.size();
  j["exit_code"] = r.exit_code();
  j["methods"] = json::object();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (Method m : r.methods) {
    const MethodSummary s = summarize(r, m);
    j["methods"][to_string(m)] = {{"cells_ok", s.ok},
                                  {"cells_failed", s.failed},
                                  {"mean_eli", s.mean_eli},
                                  {"total_cost", s.total_cost},
                                  {"eli_reduction_vs_base_pct", opt(s.eli_reduction_pct)},
                                  {"cost_reduction_vs_base_pct", opt(s.cost_reduction_pct)},
                                  {"gap_to_integrated_pct", opt(s.gap_to_lower_pct)}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Emission

inline constexpr const char* kSlotHeader =
    "slot,method,status,eli,total_cost,lower_bound,upper_bound,nodes,iterations,max_kkt_residual,"
    "k_escalations,flags,error";

inline std::string csv_text(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ch == ',' ? ';' : ' ';
  return s;
}

inline void write_slot_table(const RunResult& r, const fs::path& path) {
  std::ofstream out(path);
  out << kSlotHeader << '\n';
  for (const auto& slot : r.slots)
    for (const auto& c : slot.cells) {
      const auto& d = c.report.diagnostics;
      std::string flags;
      for (const auto& f : d.flags) flags += (flags.empty() ? "" : "|") + f;
      out << slot.slot << ',' << to_string(c.method) << ',' << to_string(c.status) << ',';
      if (c.status == CellStatus::ok)
        out << format_double(c.report.eli) << ',' << format_double(c.report.total_cost) << ','
            << format_double(c.report.lower_bound) << ',' << format_double(c.report.upper_bound) << ',' << d.nodes
            << ',' << d.iterations << ',' << format_double(d.max_kkt_residual) << ',' << d.k_escalations << ',';
      else
        out << ",,,,,,,,";
      out << csv_text(flags) << ',' << csv_text(c.error) << '\n';
    }
  if (!out) throw Error(path.string() + ": write failed");
}

/// One parsed row of slots.csv.
struct SlotRow {
  long slot = 0;
  std::string method;
  std::string status;
  std::optional<double> eli, total_cost, lower_bound, upper_bound;
};

inline std::vector<SlotRow> read_slot_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::string line;
  std::getline(in, line);
  if (line != kSlotHeader) throw ParseError(path.string() + ": unexpected header");
  std::vector<SlotRow> rows;
  for (long n = 2; std::getline(in, line); ++n) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    while (f.size() < 13) f.emplace_back();
    const std::string where = path.filename().string() + ":" + std::to_string(n);
    auto num = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return parse_double(s, where);
    };
    rows.push_back({parse_index(f[0], where), f[1], f[2], num(f[3]), num(f[4]), num(f[5]), num(f[6])});
  }
  return rows;
}

inline void write_two_column(const fs::path& path, const std::string& x, const std::string& y,
                             const std::vector<std::pair<double, double>>& pts) {
  std::ofstream out(path);
  out << x << ',' << y << '\n';
  for (const auto& [a, b] : pts) out << format_double(a) << ',' << format_double(b) << '\n';
  if (!out) throw Error(path.string() + ": write failed");
}

inline void write_series(const RunResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  for (Method m : r.methods) {
    std::vector<std::pair<double, double>> e, c;
    for (const auto& slot : r.slots) {
      const Cell* cell = slot.find(m);
      if (!cell || cell->status != CellStatus::ok) continue;
      e.emplace_back(static_cast<double>(slot.slot), cell->report.eli);
      c.emplace_back(static_cast<double>(slot.slot), cell->report.total_cost);
    }
    write_two_column(dir / (std::string("eli_") + to_string(m) + ".csv"), "slot", "eli", e);
    write_two_column(dir / (std::string("cost_") + to_string(m) + ".csv"), "slot", "total_cost", c);
  }
}

inline void write_realized(const RunResult& r, const fs::path& path) {
  std::ofstream out(path);
  out << "slot,worst_case_eli,realized_max,realized_mean,samples\n";
  for (const auto& slot : r.slots) {
    const Cell* c = slot.find(Method::robust);
    if (!c || !c->realized) continue;
    out << slot.slot << ',' << format_double(c->realized->worst_case) << ',' << format_double(c->realized->max) << ','
        << format_double(c->realized->mean) << ',' << c->realized->samples << '\n';
  }
}

inline void write_run(const RunResult& r, const fs::path& out) {
  fs::create_directories(out);
  write_slot_table(r, out / "slots.csv");
  write_series(r, out / "series");
  if (std::find(r.methods.begin(), r.methods.end(), Method::robust) != r.methods.end())
    write_realized(r, out / "robust_realized.csv");
  std::ofstream js(out / "summary.json");
  js << summary_json(r).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Workload sweep

/// workload: scale the workload trace; band: set the price band to (1 -+ w) times the base price
enum class SweepAxis { workload, band };

inline const char* to_string(SweepAxis a) { return a == SweepAxis::workload ? "scale" : "band"; }

struct SweepPoint {
  double scale = 1.0;
  RunResult run;
};

inline Scenario with_band(Scenario sc, double half_width) {
  if (!(half_width >= 0)) throw PreconditionError("band half-width must be >= 0");
  sc.pricing.price_floor = (1.0 - half_width) * sc.pricing.base_price;
  sc.pricing.price_ceiling = (1.0 + half_width) * sc.pricing.base_price;
  require_valid(sc);
  return sc;
}

inline std::vector<double> parse_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(parse_double(item, "range"));
  if (parts.size() != 3 || !(parts[2] > 0) || parts[1] < parts[0])
    throw PreconditionError("range must be lo:hi:step with step > 0 and lo <= hi");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(parts[0] + static_cast<double>(k) * parts[2]);
  return out;
}

/// Base price is always included so that reductions can be reported.
inline std::vector<SweepPoint> run_sweep(const Scenario& sc, RunManifest m, const std::vector<double>& points,
                                         SweepAxis axis = SweepAxis::workload) {
  if (std::find(m.methods.begin(), m.methods.end(), Method::base_price) == m.methods.end())
    m.methods.insert(m.methods.begin(), Method::base_price);
  std::vector<SweepPoint> out;
  for (double p : points) {
    if (axis == SweepAxis::workload) {
      m.workload_scale = p;
      out.push_back({p, run_scenario(sc, m)});
    } else {
      out.push_back({p, run_scenario(with_band(sc, p), m)});
    }
  }
  return out;
}

inline void write_sweep(const std::vector<SweepPoint>& pts, const fs::path& out,
                        SweepAxis axis = SweepAxis::workload) {
  if (pts.empty()) return;
  const std::string x = to_string(axis);
  fs::create_directories(out / "series");
  const auto& methods = pts.front().run.methods;
  std::ofstream csv(out / "sweep.csv");
  csv << x;
  for (Method m : methods) csv << ",mean_eli_" << to_string(m);
  for (Method m : methods)
    if (m != Method::base_price) csv << ",eli_reduction_pct_" << to_string(m) << ",cost_reduction_pct_" << to_string(m);
  csv << '\n';
  for (const auto& p : pts) {
    csv << format_double(p.scale);
    for (Method m : methods) csv << ',' << format_double(summarize(p.run, m).mean_eli);
    for (Method m : methods) {
      if (m == Method::base_price) continue;
      const auto s = summarize(p.run, m);
      csv << ',' << (s.eli_reduction_pct ? format_double(*s.eli_reduction_pct) : "")
          << ',' << (s.cost_reduction_pct ? format_double(*s.cost_reduction_pct) : "");
    }
    csv << '\n';
  }
  for (Method m : methods) {
    if (m == Method::base_price) continue;
    std::vector<std::pair<double, double>> series;
    for (const auto& p : pts)
      if (const auto s = summarize(p.run, m); s.eli_reduction_pct) series.emplace_back(p.scale, *s.eli_reduction_pct);
    write_two_column(out / "series" / (std::string("sweep_reduction_") + to_string(m) + ".csv"), x,
                     "eli_reduction_pct", series);
  }
}

}  // namespace dcdr::io
