// Command-line front end: validate, synth, run, sweep.
//
// Exit codes: 0 success, 2 parse or validation failure, 3 an infeasible
// (slot, method) cell, 4 an internal solver error.
//
// DCDR_QP_TOL overrides the default QP tolerance (1e-6).

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <string>

#include "dcdr/io/experiment.hpp"
#include "dcdr/io/scenario_io.hpp"
#include "dcdr/io/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kValidation = 2;
constexpr int kInternal = 4;

int cmd_validate(const fs::path& path) {
  const auto sc = dcdr::io::load_scenario(path);
  int bad = 0;
  for (std::size_t t = 0; t < sc.slots(); ++t) {
    try {
      dcdr::check_slot_feasible(dcdr::reduce_to_energy_space(sc, t));
    } catch (const dcdr::InfeasibleSlot& e) {
      std::cerr << "slot " << t << ": " << e.what() << '\n';
      ++bad;
    }
  }
  if (bad) {
    std::cerr << bad << " of " << sc.slots() << " slots cannot host their workload\n";
    return kValidation;
  }
  std::cout << sc.name << ": " << sc.locations() << " locations, " << sc.slots() << " slots, valid\n";
  return 0;
}

int cmd_synth(dcdr::io::SynthConfig cfg, const fs::path& out) {
  const auto sc = dcdr::io::synth_scenario(cfg);
  json notes;
  notes["generator"] = "dcdr synth";
  notes["seed"] = cfg.seed;
  notes["locations"] = cfg.locations;
  notes["slots"] = cfg.slots;
  notes["price_band"] = {{"floor_ratio", cfg.floor_ratio},
                         {"ceiling_ratio", cfg.ceiling_ratio},
                         {"avg_cap_ratio", cfg.avg_cap_ratio}};
  notes["comment"] =
      "Synthetic substitute for measured traces. Server counts, service rates, server power and PUE follow the "
      "reference setup; capacities, background load, price levels, the price band and delays are chosen so that "
      "every slot is feasible and the price constraints are active in some slots.";
  dcdr::io::save_scenario(sc, out, notes);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

void print_summary(const dcdr::io::RunResult& r) {
  for (dcdr::Method m : r.methods) {
    const auto s = dcdr::io::summarize(r, m);
    std::printf("%-11s ok %2d failed %2d  mean eli %.6g", dcdr::to_string(m), s.ok, s.failed, s.mean_eli);
    if (s.eli_reduction_pct) std::printf("  eli reduction %.3f%%", *s.eli_reduction_pct);
    if (s.cost_reduction_pct) std::printf("  cost reduction %.3f%%", *s.cost_reduction_pct);
    std::printf("\n");
  }
  for (const auto& slot : r.slots)
    for (const auto& c : slot.cells)
      if (c.status != dcdr::io::CellStatus::ok)
        std::cerr << "slot " << slot.slot << " " << dcdr::to_string(c.method) << ": " << c.error << '\n';
}

struct RunArgs {
  std::string manifest;
  std::string scenario;
  std::string methods = "base-price,integrated,restricted,exact,heuristic";
  double workload_scale = 1.0;
  std::optional<double> uncertainty;
  std::string out = "out";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool deterministic = false;
  std::string robust_inner = "exact";
  bool freeze_box = false;
  int samples = 1000;
};

dcdr::io::RunManifest manifest_from(const RunArgs& a) {
  dcdr::io::RunManifest m;
  if (!a.manifest.empty()) {
    m = dcdr::io::parse_manifest(a.manifest);
  } else {
    if (a.scenario.empty()) throw dcdr::ParseError("--scenario or --manifest is required");
    m.scenario = a.scenario;
    m.methods = dcdr::io::parse_methods(a.methods);
    m.workload_scale = a.workload_scale;
    m.uncertainty = a.uncertainty;
    m.out = a.out;
    m.seed = a.seed;
    m.robust_inner = dcdr::parse_method(a.robust_inner);
    m.freeze_box = a.freeze_box;
    m.realized_samples = a.samples;
  }
  if (a.threads) m.threads = a.threads;
  if (a.deterministic) m.deterministic = true;
  auto v = dcdr::io::validate_manifest(m);
  if (!v.empty()) throw dcdr::ValidationError(std::move(v));
  return m;
}

int cmd_run(const RunArgs& a) {
  const auto m = manifest_from(a);
  const auto sc = dcdr::io::load_scenario(m.scenario);
  const auto r = dcdr::io::run_scenario(sc, m);
  dcdr::io::write_run(r, m.out);
  print_summary(r);
  return r.exit_code();
}

int cmd_sweep(const RunArgs& a, const std::string& range, bool band) {
  const auto m = manifest_from(a);
  const auto sc = dcdr::io::load_scenario(m.scenario);
  const auto axis = band ? dcdr::io::SweepAxis::band : dcdr::io::SweepAxis::workload;
  const auto points = dcdr::io::run_sweep(sc, m, dcdr::io::parse_range(range), axis);
  dcdr::io::write_sweep(points, m.out, axis);
  int code = 0;
  for (const auto& p : points) {
    std::printf("%s %.6g:", dcdr::io::to_string(axis), p.scale);
    for (dcdr::Method meth : p.run.methods) {
      if (meth == dcdr::Method::base_price) continue;
      const auto s = dcdr::io::summarize(p.run, meth);
      if (s.eli_reduction_pct) std::printf("  %s %.3f%%", dcdr::to_string(meth), *s.eli_reduction_pct);
    }
    std::printf("\n");
    code = std::max(code, p.run.exit_code());
  }
  return code;
}

void add_run_options(CLI::App* c, RunArgs& a, bool sweep) {
  c->add_option("--manifest", a.manifest, "run manifest (JSON); other options then override threads only");
  c->add_option("--scenario", a.scenario, "scenario directory or config file");
  c->add_option("--methods", a.methods, "comma-separated subset of base-price,integrated,restricted,exact,heuristic,robust")
      ->capture_default_str();
  if (!sweep) c->add_option("--workload-scale", a.workload_scale, "workload multiplier")->capture_default_str();
  c->add_option("--uncertainty", a.uncertainty, "+-fraction of the background load for method robust");
  c->add_option("--out", a.out, "output directory")->capture_default_str();
  c->add_option("--seed", a.seed, "seed for sampled realizations")->capture_default_str();
  c->add_option("--threads", a.threads, "worker threads (0: hardware concurrency)");
  c->add_flag("--deterministic", a.deterministic, "single-threaded execution");
  c->add_option("--robust-inner", a.robust_inner, "inner solver of method robust: exact or heuristic")
      ->capture_default_str();
  c->add_flag("--wcp-freeze-box", a.freeze_box, "keep the nominal energy box under the worst-case shift");
  c->add_option("--samples", a.samples, "sampled realizations per slot for method robust")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Load-index pricing for geographically distributed data centers"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "load and check a scenario");
  validate->add_option("scenario", validate_path, "scenario directory or config file")->required();

  dcdr::io::SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic scenario");
  synth->add_option("--seed", synth_cfg.seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--locations", synth_cfg.locations, "number of data centers")->capture_default_str();
  synth->add_option("--slots", synth_cfg.slots, "number of slots")->capture_default_str();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "solve every slot with the requested methods");
  add_run_options(run, run_args, false);

  RunArgs sweep_args;
  sweep_args.methods = "exact";
  std::string range = "0.6:1.4:0.1";
  bool band = false;
  auto* sweep = app.add_subcommand("sweep", "repeat a run over workload scales or price-band widths");
  add_run_options(sweep, sweep_args, true);
  sweep->add_option("--range", range, "lo:hi:step")->capture_default_str();
  sweep->add_flag("--band", band, "sweep the price-band half-width (fraction of the base price) instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  try {
    if (*validate) return cmd_validate(validate_path);
    if (*synth) return cmd_synth(synth_cfg, synth_out);
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(sweep_args, range, band);
  } catch (const dcdr::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kValidation;
  } catch (const dcdr::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kValidation;
  } catch (const dcdr::PreconditionError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return 0;
}
