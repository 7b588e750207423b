// chiralrate CLI: time-domain simulation, stochastic ensemble comparison,
// detailed-balance reports, and the entropy-production zero-crossing scan.
//
// Exit codes: 0 success, 2 configuration, 3 integration/convergence,
// 4 I/O, 5 statistical disagreement between jump ensemble and rate equations.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chiralrate/chiralrate.hpp"

namespace cr = chiralrate;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::string model;
  std::string output;
  std::string format;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config_path,
                  "key=value configuration file");
  cmd->add_option("-p,--preset", o.preset,
                  "scenario preset (fig2..fig7, blackbody-equilibration, "
                  "embedded-equilibrium)");
  cmd->add_option("-m,--model", o.model,
                  "model shorthand: loads that model's default scenario "
                  "(blackbody, open-chiral, closed-chiral, embedded-cavity)");
  cmd->add_option("-o,--output", o.output, "output path ('-' = stdout)");
  cmd->add_option("-f,--format", o.format, "output format (csv or json)");
  cmd->add_option("-s,--set", o.sets,
                  "override one config key, e.g. --set gamma_t1=10MHz "
                  "(applied last, repeatable)")
      ->take_all();
}

std::string default_preset_for_model(const std::string& model) {
  switch (cr::model_kind_from_string(model)) {
    case cr::ModelKind::BlackBody: return "blackbody-equilibration";
    case cr::ModelKind::OpenChiral: return "fig2";
    case cr::ModelKind::ClosedChiral: return "fig6";
    case cr::ModelKind::EmbeddedCavity: return "embedded-equilibrium";
  }
  throw cr::domain_error("UnknownModel", "unknown model '" + model + "'");
}

cr::RunConfig build_config(const CommonOpts& o) {
  if (!o.preset.empty() && !o.model.empty())
    throw cr::domain_error("ConfigParse",
                           "--preset and --model are mutually exclusive");
  cr::RunConfig cfg;
  if (!o.preset.empty()) {
    cfg = cr::preset(o.preset);
    if (!o.config_path.empty())
      std::cerr << "note: --preset replaces the scenario; '" << o.config_path
                << "' is not loaded (use --set for overrides)\n";
  } else if (!o.model.empty()) {
    cfg = cr::preset(default_preset_for_model(o.model));
  } else if (!o.config_path.empty()) {
    cr::apply_config_file(cfg, o.config_path);
  }
  for (const std::string& kv : o.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw cr::domain_error("ConfigParse",
                             "--set expects key=value, got '" + kv + "'");
    cr::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.output.empty()) cfg.output_path = o.output == "-" ? "" : o.output;
  if (!o.format.empty()) cfg.output_format = o.format;
  return cfg;
}

// Writes through a stream that is stdout for an empty path.
class OutputFile {
 public:
  explicit OutputFile(const std::string& path) : path_(path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_)
        throw cr::error("Io", "cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return path_.empty() ? std::cout : file_; }
  // summaries go to stdout unless the data itself does
  std::ostream& summary() { return path_.empty() ? std::cerr : std::cout; }
  void finish() {
    stream().flush();
    if (!path_.empty() && !file_)
      throw cr::error("Io", "write failed for '" + path_ + "'");
    if (path_.empty() && !std::cout)
      throw cr::error("Io", "write to stdout failed");
  }

 private:
  std::string path_;
  std::ofstream file_;
};

json params_to_json(const cr::ModelParams& p) {
  return json{{"gamma_dec", p.gamma_dec},
              {"gamma_dec_prime", p.gamma_dec_prime},
              {"gamma_0", p.gamma_0},
              {"gamma_3", p.gamma_3},
              {"gamma_t1", p.gamma_t1},
              {"gamma_t2", p.gamma_t2},
              {"gamma_t11", p.gamma_t11},
              {"gamma_t12", p.gamma_t12},
              {"gamma_4", p.gamma_4},
              {"gamma_4_prime", p.gamma_4_prime},
              {"gamma_5", p.gamma_5},
              {"gamma_6", p.gamma_6},
              {"M", p.M},
              {"N_modes", p.N_modes},
              {"N_modes_wg", p.N_modes_wg},
              {"x0", p.x0}};
}

json state_to_json(const cr::State& s, cr::ModelKind k) {
  json j;
  for (const cr::StateField f : cr::active_fields(k))
    j[cr::to_string(f)] = cr::get(s, f);
  return j;
}

void print_warnings(const cr::ModelParams& p, cr::ModelKind k) {
  const cr::ValidationReport rep = cr::validate_params(p, k);
  for (const std::string& w : rep.warnings)
    std::cerr << "warning: " << w << '\n';
}

int cmd_simulate(const cr::RunConfig& cfg, bool emit_relative_T) {
  print_warnings(cfg.params, cfg.kind);
  const cr::VectorField field = cr::make_field(cfg.kind, cfg.params);
  const cr::State s0 = cr::initial_state(cfg);
  const cr::Trajectory traj = cr::integrate(field, s0, cr::integrator_config(cfg));

  OutputFile out(cfg.output_path);
  const std::string fmt = cfg.output_format.empty() ? "csv" : cfg.output_format;

  // steady-state residual at the final sample, relative to the rate scale
  const cr::State& fin = traj.samples.back().state;
  const cr::StateVec rhs_end =
      cr::pack(cfg.kind, cr::eval_rhs(cfg.kind, fin, cfg.params));
  double residual = 0;
  for (std::size_t i = 0; i < rhs_end.size(); ++i)
    residual = std::max(residual, std::abs(rhs_end[i]));
  const double scale = cr::rate_scale(cfg.params, cfg.kind);

  double drift = 0;
  const bool conservative = cfg.kind != cr::ModelKind::OpenChiral;
  if (conservative) {
    const double e0 = cr::conserved_excitation(s0, cfg.params, cfg.kind);
    for (const cr::TrajectorySample& smp : traj.samples) {
      const double e = cr::conserved_excitation(smp.state, cfg.params, cfg.kind);
      drift = std::max(drift, std::abs(e - e0) / std::max(1.0, std::abs(e0)));
    }
  }

  if (fmt == "csv") {
    cr::CsvOptions opt;
    opt.relative_T = emit_relative_T;
    cr::write_simulation_csv(out.stream(), traj, opt);
  } else if (fmt == "json") {
    json j;
    j["model"] = cr::to_string(cfg.kind);
    if (!cfg.preset_name.empty()) j["preset"] = cfg.preset_name;
    j["params"] = params_to_json(cfg.params);
    j["t_end_s"] = cfg.t_end;
    json samples = json::array();
    for (const cr::TrajectorySample& smp : traj.samples) {
      json row;
      row["t_s"] = smp.t;
      row["state"] = state_to_json(smp.state, cfg.kind);
      samples.push_back(std::move(row));
    }
    j["samples"] = std::move(samples);
    j["summary"] = {{"accepted_steps", traj.accepted_steps},
                    {"rejected_steps", traj.rejected_steps},
                    {"rhs_evaluations", traj.rhs_evaluations},
                    {"steady_state_residual", residual},
                    {"excitation_drift", conservative ? json(drift) : json()}};
    out.stream() << j.dump(2) << '\n';
  } else {
    throw cr::domain_error("ConfigParse", "unknown format '" + fmt + "'");
  }
  out.finish();

  std::ostream& sum = out.summary();
  sum << "model: " << cr::to_string(cfg.kind);
  if (!cfg.preset_name.empty()) sum << " (preset " << cfg.preset_name << ")";
  sum << "\nt_end: " << cfg.t_end << " s (" << cfg.t_end * 1e6 << " us), "
      << traj.samples.size() << " samples\n"
      << "steps: accepted=" << traj.accepted_steps
      << " rejected=" << traj.rejected_steps
      << " rhs_evals=" << traj.rhs_evaluations << "\n"
      << "final state:";
  for (const cr::StateField f : cr::active_fields(cfg.kind))
    sum << ' ' << cr::to_string(f) << '=' << cr::format_double(cr::get(fin, f));
  sum << "\nsteady-state residual: |rhs|_inf = " << residual << " 1/s";
  if (scale > 0) sum << " (" << residual / scale << " of rate scale)";
  sum << '\n';
  if (conservative)
    sum << "excitation drift: max|E - E0|/max(1,|E0|) = " << drift << '\n';
  return 0;
}

int cmd_stochastic(const cr::RunConfig& cfg) {
  print_warnings(cfg.params, cfg.kind);
  if (cfg.n_traj < 2)
    throw cr::domain_error("ConfigParse",
                           "stochastic.n_traj must be >= 2 for standard errors");
  // round to the integer microstate first so ODE and ensemble share x(0)
  const cr::JumpMicrostate ms0 =
      cr::microstate_from_state(cr::initial_state(cfg), cfg.params, cfg.kind);
  const cr::State s0 = cr::state_from_microstate(ms0, cfg.params, cfg.kind);

  cr::IntegratorConfig ic = cr::integrator_config(cfg);
  const std::vector<double> grid = cr::make_sample_times(ic);
  const cr::VectorField field = cr::make_field(cfg.kind, cfg.params);
  const cr::Trajectory traj = cr::integrate(field, s0, ic);

  const cr::EnsembleStats st = cr::ensemble_mean(
      cfg.kind, cfg.params, ms0, grid, cfg.n_traj, cfg.seed, cfg.threads);

  const auto fields = cr::active_fields(cfg.kind);
  OutputFile out(cfg.output_path);
  std::ostream& os = out.stream();
  std::string header = "t_s";
  for (const cr::StateField f : fields) {
    const std::string n = cr::to_string(f);
    header += ',' + n + "_ode," + n + "_mc," + n + "_se," + n + "_z";
  }
  header += ",corr_m_";
  header += cr::to_string(fields[0]);
  os << header << '\n';

  double max_z = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const cr::StateVec ode = cr::pack(cfg.kind, traj.samples[g].state);
    std::string row = cr::format_double(grid[g]);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double mc = st.mean[g][c];
      const double se = st.std_err[g][c];
      const double diff = mc - ode[c];
      // floor the SE at roundoff scale: identical samples (e.g. the shared
      // initial state) give a zero variance up to accumulation error, and
      // a roundoff-by-roundoff quotient is not a z-score
      const double z = diff / std::max(se, 1e-12 * std::max(1.0, std::abs(ode[c])));
      if (std::isfinite(z)) max_z = std::max(max_z, std::abs(z));
      else if (diff != 0) max_z = std::numeric_limits<double>::infinity();
      row += ',' + cr::format_double(ode[c]) + ',' + cr::format_double(mc) +
             ',' + cr::format_double(se) + ',' + cr::format_double(z);
    }
    row += ',' + cr::format_double(st.corr_m_photon[g]);
    os << row << '\n';
  }
  out.finish();

  std::ostream& sum = out.summary();
  sum << "model: " << cr::to_string(cfg.kind) << ", trajectories: "
      << cfg.n_traj << ", seed: " << cfg.seed << '\n'
      << "max |z| over " << grid.size() << " checkpoints: " << max_z << '\n';
  if (max_z > 5) {
    sum << "ensemble mean disagrees with the rate equations (|z| > 5)\n";
    return 5;
  }
  return 0;
}

const char* verdict_name(cr::BalanceVerdict v) { return cr::to_string(v); }

int cmd_balance(const cr::RunConfig& cfg, const std::string& state_choice) {
  print_warnings(cfg.params, cfg.kind);
  cr::State s;
  if (state_choice == "steady") {
    const cr::VectorField field = cr::make_field(cfg.kind, cfg.params);
    s = cr::find_steady_state(field, cr::initial_state(cfg));
  } else if (state_choice == "thermal") {
    s = cr::thermal_state(cfg.params, cfg.kind, cfg.params.x0);
  } else if (state_choice == "init") {
    s = cr::initial_state(cfg);
  } else {
    throw cr::domain_error("ConfigParse",
                           "--state must be steady, thermal or init");
  }

  const cr::ChannelPairing pairing =
      cr::pair_channels(cr::build_channels(cfg.kind, cfg.params));
  cr::BalanceReport rep;
  bool not_steady = false;
  try {
    rep = cr::check_balance(s, pairing, cfg.params, cfg.kind);
  } catch (const cr::error& e) {
    // fluxes are still reported; there is just no verdict for this state
    if (std::string(e.tag()) != "NotSteady") throw;
    rep = cr::evaluate_fluxes(s, pairing, cfg.params, cfg.kind);
    not_steady = true;
  }
  const std::string verdict_str =
      rep.classified ? verdict_name(rep.verdict) : "none (state not steady)";

  const std::string fmt = cfg.output_format.empty() ? "text" : cfg.output_format;
  OutputFile out(cfg.output_path);
  std::ostream& os = out.stream();
  if (fmt == "json") {
    json j;
    j["model"] = cr::to_string(rep.kind);
    j["state"] = state_to_json(s, rep.kind);
    j["verdict"] = verdict_str;
    j["steady"] = rep.steady;
    j["has_bath"] = rep.has_bath;
    j["field_norm"] = rep.field_norm;
    j["max_residual"] = rep.max_residual;
    json pairs = json::array();
    for (const cr::BalancePairFlux& pf : rep.pairs)
      pairs.push_back({{"forward", pf.forward},
                       {"reverse", pf.reverse},
                       {"forward_flux", pf.forward_flux},
                       {"reverse_flux", pf.reverse_flux},
                       {"residual", pf.residual}});
    j["pairs"] = std::move(pairs);
    json unpaired = json::array();
    for (const cr::BalanceUnpairedFlux& uf : rep.unpaired)
      unpaired.push_back({{"name", uf.name}, {"flux", uf.flux},
                          {"bath", uf.bath}});
    j["unpaired"] = std::move(unpaired);
    if (rep.kind == cr::ModelKind::BlackBody) {
      j["p_excited"] = rep.p_excited;
      j["p_ground"] = rep.p_ground;
      j["rate_up"] = rep.rate_up;
      j["rate_down"] = rep.rate_down;
    }
    os << j.dump(2) << '\n';
  } else if (fmt == "text") {
    os << "model: " << cr::to_string(rep.kind) << '\n' << "state ("
       << state_choice << "):";
    for (const cr::StateField f : cr::active_fields(rep.kind))
      os << ' ' << cr::to_string(f) << '=' << cr::format_double(cr::get(s, f));
    os << '\n'
       << "verdict: " << verdict_str << '\n'
       << "steady: " << (rep.steady ? "yes" : "no")
       << " (|rhs|_inf = " << rep.field_norm << " 1/s)\n"
       << "max residual: " << rep.max_residual << '\n';
    if (!rep.pairs.empty()) {
      os << "pairs:\n";
      for (const cr::BalancePairFlux& pf : rep.pairs)
        os << "  " << pf.forward << " <-> " << pf.reverse
           << ": forward=" << cr::format_double(pf.forward_flux)
           << " reverse=" << cr::format_double(pf.reverse_flux)
           << " residual=" << cr::format_double(pf.residual) << '\n';
    }
    if (!rep.unpaired.empty()) {
      os << "unpaired:\n";
      for (const cr::BalanceUnpairedFlux& uf : rep.unpaired)
        os << "  " << uf.name << (uf.bath ? " (bath)" : "")
           << ": flux=" << cr::format_double(uf.flux) << '\n';
    }
    if (rep.kind == cr::ModelKind::BlackBody && std::isfinite(rep.p_excited))
      os << "two-level view: p_excited=" << cr::format_double(rep.p_excited)
         << " p_ground=" << cr::format_double(rep.p_ground)
         << " rate_up=" << cr::format_double(rep.rate_up)
         << " rate_down=" << cr::format_double(rep.rate_down) << '\n';
  } else {
    throw cr::domain_error("ConfigParse", "unknown format '" + fmt + "'");
  }
  out.finish();
  return not_steady ? 2 : 0;
}

std::vector<int> parse_m_values(const std::string& list,
                                const std::string& range) {
  std::vector<int> ms;
  if (!list.empty() && !range.empty())
    throw cr::domain_error("ConfigParse",
                           "--m-list and --m-range are mutually exclusive");
  if (!range.empty()) {
    int a = 0, b = 0, step = 1;
    const int got = std::sscanf(range.c_str(), "%d:%d:%d", &a, &b, &step);
    if (got < 2 || step < 1 || b < a)
      throw cr::domain_error("ConfigParse",
                             "--m-range expects first:last[:step], got '" +
                                 range + "'");
    for (int m = a; m <= b; m += step) ms.push_back(m);
  } else {
    const std::string src = list.empty() ? "1,5,10,50,100" : list;
    std::istringstream in(src);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (item.empty()) continue;
      ms.push_back(std::stoi(item));
    }
  }
  if (ms.empty())
    throw cr::domain_error("ConfigParse", "empty M list");
  for (const int m : ms)
    if (m < 1)
      throw cr::domain_error("ConfigParse", "M values must be >= 1");
  return ms;
}

// Entropy production along the run, from dense output; locates the zero
// upcrossing after the initial negative interval by bisection.
struct ScanRow {
  int M;
  std::optional<double> t_prime;
  double sigma_initial;
  double sigma_min;
  double t_sigma_min;
  int crossings;
};

ScanRow scan_one(cr::RunConfig cfg, int M) {
  cfg.params.M = M;
  const cr::VectorField field = cr::make_field(cfg.kind, cfg.params);
  cr::IntegratorConfig ic = cr::integrator_config(cfg);
  ic.store_dense = true;
  const cr::Trajectory traj = cr::integrate(field, cr::initial_state(cfg), ic);

  auto sigma_at = [&](double t) {
    return cr::entropy_production(traj.eval_dense(t), cfg.params).total;
  };
  const std::size_t kProbe = 4001;
  std::vector<double> ts(kProbe), sg(kProbe);
  double sigma_scale = 0;
  for (std::size_t i = 0; i < kProbe; ++i) {
    ts[i] = cfg.t_end * static_cast<double>(i) / (kProbe - 1);
    sg[i] = sigma_at(ts[i]);
    sigma_scale = std::max(sigma_scale, std::abs(sg[i]));
  }
  ScanRow row{M, std::nullopt, sg[0], 0, 0, 0};
  std::size_t i_min = 0;
  for (std::size_t i = 0; i < kProbe; ++i)
    if (sg[i] < sg[i_min]) i_min = i;
  row.sigma_min = sg[i_min];
  row.t_sigma_min = ts[i_min];

  const double tol = 1e-9 * sigma_scale;
  int sign = 0;
  for (std::size_t i = 0; i < kProbe; ++i) {
    const int s = sg[i] > tol ? 1 : (sg[i] < -tol ? -1 : 0);
    if (s != 0 && sign != 0 && s != sign) ++row.crossings;
    if (s != 0) sign = s;
  }
  if (row.sigma_min < -tol) {
    // bisect the upcrossing after the minimum
    for (std::size_t i = i_min + 1; i < kProbe; ++i) {
      if (sg[i] >= 0) {
        double lo = ts[i - 1], hi = ts[i];
        for (int it = 0; it < 200 && hi - lo > 1e-18 + 1e-14 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          (sigma_at(mid) < 0 ? lo : hi) = mid;
        }
        row.t_prime = 0.5 * (lo + hi);
        break;
      }
    }
  }
  return row;
}

int cmd_scan_m(const cr::RunConfig& cfg, const std::vector<int>& ms) {
  if (cfg.kind != cr::ModelKind::OpenChiral)
    throw cr::domain_error("ConfigParse",
                           "scan-m requires the open-chiral model");
  print_warnings(cfg.params, cfg.kind);
  OutputFile out(cfg.output_path);
  std::ostream& os = out.stream();
  os << "M,t_prime_s,sigma_initial,sigma_min,t_sigma_min_s,sign_changes\n";
  std::ostream& sum = out.summary();
  for (const int m : ms) {
    const ScanRow row = scan_one(cfg, m);
    os << row.M << ','
       << (row.t_prime ? cr::format_double(*row.t_prime) : std::string("none"))
       << ',' << cr::format_double(row.sigma_initial) << ','
       << cr::format_double(row.sigma_min) << ','
       << cr::format_double(row.t_sigma_min) << ',' << row.crossings << '\n';
    sum << "M=" << row.M << ": t'="
        << (row.t_prime ? cr::format_double(*row.t_prime) + " s (" +
                              cr::format_double(*row.t_prime * 1e6) + " us)"
                        : std::string("none"))
        << ", sigma_min=" << row.sigma_min << " kB/s, sign changes="
        << row.crossings << '\n';
  }
  out.finish();
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{
      "rate-equation models of photon reservoirs coupled through chiral "
      "waveguides and two-level systems"};
  app.require_subcommand(1);

  CommonOpts sim_o, sto_o, bal_o, scan_o;
  bool emit_relative_T = false;
  std::string state_choice = "steady";
  std::string m_list, m_range;

  CLI::App* sim = app.add_subcommand(
      "simulate", "integrate the rate equations and emit a time series");
  add_common(sim, sim_o);
  sim->add_flag("--emit-relative-T", emit_relative_T,
                "append T/T(0) = x0/x columns");

  CLI::App* sto = app.add_subcommand(
      "stochastic",
      "compare the exact jump-process ensemble against the rate equations");
  add_common(sto, sto_o);

  CLI::App* bal = app.add_subcommand(
      "balance", "pair event channels and audit detailed balance");
  add_common(bal, bal_o);
  bal->add_option("--state", state_choice,
                  "state to audit: steady (default), thermal, init");

  CLI::App* scan = app.add_subcommand(
      "scan-m",
      "scan the TLS count M for the entropy-production zero crossing t'");
  add_common(scan, scan_o);
  scan->add_option("--m-list", m_list, "comma-separated M values");
  scan->add_option("--m-range", m_range, "first:last[:step]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (sim->parsed()) return cmd_simulate(build_config(sim_o), emit_relative_T);
  if (sto->parsed()) return cmd_stochastic(build_config(sto_o));
  if (bal->parsed()) return cmd_balance(build_config(bal_o), state_choice);
  if (scan->parsed())
    return cmd_scan_m(build_config(scan_o), parse_m_values(m_list, m_range));
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const cr::integration_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const cr::convergence_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const cr::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return std::string(e.tag()) == "Io" ? 4 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
