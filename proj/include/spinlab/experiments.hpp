#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spinlab/config.hpp"
#include "spinlab/csv.hpp"
#include "spinlab/defect.hpp"
#include "spinlab/montecarlo.hpp"
#include "spinlab/scaling.hpp"
#include "spinlab/version.hpp"

// The experiment runners behind the CLI subcommands.  Exit codes: 0 success,
// 1 property violation, 2 configuration error (mapped by the caller).

namespace spinlab {

struct RunOptions {
  std::string out_dir = ".";
  int threads = 1;
};

inline void parallel_for(long count, int threads, const std::function<void(long)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (long i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  long k = std::min<long>(threads, count);
  std::vector<std::thread> pool;
  for (long t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::vector<long> parse_long_list(const std::string& text) {
  std::vector<long> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim_ws(item);
    if (item.empty()) continue;
    char* end = nullptr;
    long v = std::strtol(item.c_str(), &end, 10);
    if (end == item.c_str() || *end != '\0')
      throw ConfigError("bad integer in list: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

inline void echo_provenance(CsvWriter& w, const KeyValueConfig& cfg) {
  w.comment(std::string("version: ") + kVersion);
  for (const auto& [k, v] : cfg.entries()) w.comment(k + " = " + v);
}

inline std::ofstream open_output(const RunOptions& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  std::filesystem::path p = std::filesystem::path(opt.out_dir) / name;
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

inline ModelSpec model_from_config(KeyValueConfig& cfg) {
  ModelSpec spec;
  spec.d = static_cast<int>(cfg.get_long("d", 1));
  spec.n = static_cast<int>(cfg.get_long("n", 3));
  spec.lambda = cfg.get_double("lambda", 0.0);
  spec.beta = cfg.get_double("beta", 1.0);
  double J = cfg.get_double("J", 0.0);
  spec.pot = J != 0.0 ? nn_potential(J, spec.d) : zero_potential();
  double s = cfg.get_double("s", spec.d + 0.5);
  spec.ker = power_law_kernel(s);
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------- bound-suite

inline int run_bound_suite(KeyValueConfig& cfg, const RunOptions& opt) {
  ModelSpec spec = model_from_config(cfg);
  long L = cfg.get_long("L");
  long a = cfg.get_long("a");
  long box_half = cfg.get_long("box", L + std::max(spec.pot.r, 1));
  long samples = cfg.get_long("samples", 100);
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
  std::string window_mode = cfg.get_string("window", "box");
  cfg.reject_unknown();

  Box box(spec.d, box_half);
  DeformationProfile prof(spec.d, L, a);
  long window = window_mode == "extended" ? -1 : box_half;
  if (window_mode != "extended" && window_mode != "box")
    throw ConfigError("window must be 'box' or 'extended'");

  UniformBound ub = uniform_bound(prof, spec, window);
  double slack = ub.err + 1e-9 * std::max(1.0, std::abs(ub.value));

  // one engine per worker thread: the transform path has scratch buffers
  std::vector<double> deltas(static_cast<std::size_t>(samples));
  std::mutex pool_mu;
  std::map<std::thread::id, std::unique_ptr<DefectEngine>> pool;
  auto engine_here = [&]() -> DefectEngine& {
    std::lock_guard<std::mutex> lock(pool_mu);
    auto& slot = pool[std::this_thread::get_id()];
    if (!slot) slot = std::make_unique<DefectEngine>(box, prof, spec);
    return *slot;
  };
  parallel_for(samples, opt.threads, [&](long i) {
    DefectEngine& engine = engine_here();
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    SpinConfig config = random_config(box, spec.n, rng);
    deltas[static_cast<std::size_t>(i)] = engine.energy_defect(config);
  });

  std::ofstream os = open_output(opt, "bound_suite.csv");
  CsvWriter w(os);
  echo_provenance(w, cfg);
  w.comment("u_bound: " + fmt_g17(ub.value));
  w.comment("q_plus: " + fmt_g17(ub.q_plus));
  w.comment("q_minus: " + fmt_g17(ub.parts.value()));
  w.comment("q_minus_parts: " + fmt_g17(ub.parts.part[0]) + " " +
            fmt_g17(ub.parts.part[1]) + " " + fmt_g17(ub.parts.part[2]) + " " +
            fmt_g17(ub.parts.part[3]));
  w.comment("tail_cert: " + fmt_g17(ub.err));
  w.comment("slack: " + fmt_g17(slack));
  w.columns({"sample", "delta", "u_bound", "margin"});
  long violations = 0;
  for (long i = 0; i < samples; ++i) {
    double delta = deltas[static_cast<std::size_t>(i)];
    double margin = ub.value - std::abs(delta);
    if (margin < -slack) ++violations;
    w.row({CsvWriter::cell(i), CsvWriter::cell(delta), CsvWriter::cell(ub.value),
           CsvWriter::cell(margin)});
  }
  w.comment("violations: " + std::to_string(violations));
  return violations ? 1 : 0;
}

// --------------------------------------------------------------- scaling-grid

inline long a_from_rule(const std::string& rule, long L) {
  if (rule == "sqrt")
    return static_cast<long>(std::ceil(std::sqrt(static_cast<double>(L))));
  if (rule.rfind("L/", 0) == 0) {
    long div = std::strtol(rule.c_str() + 2, nullptr, 10);
    if (div <= 0) throw ConfigError("bad a_rule divisor: '" + rule + "'");
    return L / div;
  }
  char* end = nullptr;
  long v = std::strtol(rule.c_str(), &end, 10);
  if (end == rule.c_str() || *end != '\0')
    throw ConfigError("a_rule must be 'sqrt', 'L/<k>' or an integer");
  return v;
}

struct ScalingRow {
  ScalingPoint point;
  UniformBound bound;
};

inline int run_scaling_grid(KeyValueConfig& cfg, const RunOptions& opt) {
  ModelSpec spec = model_from_config(cfg);
  double s = spec.ker.s;
  std::vector<long> L_list = parse_long_list(cfg.get_string("L_list"));
  std::string a_rule = cfg.get_string("a_rule");
  std::string window_mode = cfg.get_string("window", "extended");
  cfg.reject_unknown();
  if (L_list.empty()) throw ConfigError("L_list is empty");
  std::sort(L_list.begin(), L_list.end());
  long window = window_mode == "extended" ? -1 : std::strtol(window_mode.c_str(), nullptr, 10);
  if (window == 0) throw ConfigError("window must be 'extended' or a positive integer");

  std::vector<ScalingRow> rows(L_list.size());
  parallel_for(static_cast<long>(L_list.size()), opt.threads, [&](long i) {
    long L = L_list[static_cast<std::size_t>(i)];
    long a = a_from_rule(a_rule, L);
    if (a < 2 || a >= L) throw ConfigError("a_rule gives a outside [2, L)");
    ScalingRow& r = rows[static_cast<std::size_t>(i)];
    r.point = scaling_point(spec.d, s, L, a);
    DeformationProfile prof(spec.d, L, a);
    r.bound = uniform_bound(prof, spec, window);
  });

  std::ofstream os = open_output(opt, "scaling_grid.csv");
  CsvWriter w(os);
  echo_provenance(w, cfg);
  w.columns({"d", "s", "L", "a", "regime", "i_value", "q1", "q2_L", "q2_inf", "q3_L",
             "q3_inf", "q4", "q_err_max", "q_plus", "q_minus", "q_minus_err",
             "u_bound", "u_over_i", "qplus_a_over_surf"});
  for (const ScalingRow& r : rows) {
    const ScalingPoint& p = r.point;
    double qerr = std::max({p.q1.err, p.q2_L.err, p.q2_inf.err, p.q3_L.err,
                            p.q3_inf.err, p.q4.err});
    double surf = std::pow(static_cast<double>(p.L), p.d - 1.0);
    w.row({CsvWriter::cell(p.d), CsvWriter::cell(p.s), CsvWriter::cell(p.L),
           CsvWriter::cell(p.a), regime_name(p.regime), CsvWriter::cell(p.i_value),
           CsvWriter::cell(p.q1.value), CsvWriter::cell(p.q2_L.value),
           CsvWriter::cell(p.q2_inf.value), CsvWriter::cell(p.q3_L.value),
           CsvWriter::cell(p.q3_inf.value), CsvWriter::cell(p.q4.value),
           CsvWriter::cell(qerr), CsvWriter::cell(r.bound.q_plus),
           CsvWriter::cell(r.bound.parts.value()), CsvWriter::cell(r.bound.parts.err),
           CsvWriter::cell(r.bound.value),
           CsvWriter::cell(r.bound.value / p.i_value),
           CsvWriter::cell(r.bound.q_plus * static_cast<double>(p.a) / surf)});
  }

  auto fit_line = [&](const std::string& name, const std::function<double(const ScalingRow&)>& get) {
    std::vector<std::pair<double, double>> pts;
    for (const ScalingRow& r : rows) {
      double v = get(r);
      if (v > 0.0) pts.emplace_back(static_cast<double>(r.point.L), v);
    }
    if (pts.size() < 3) return;
    FitResult f = fit_loglog_slope(pts);
    w.comment("fit_vs_L " + name + ": slope=" + fmt_g17(f.slope) +
              " intercept=" + fmt_g17(f.intercept) + " residual=" + fmt_g17(f.residual));
  };
  fit_line("q1", [](const ScalingRow& r) { return r.point.q1.value; });
  fit_line("q2_inf", [](const ScalingRow& r) { return r.point.q2_inf.value; });
  fit_line("q3_inf", [](const ScalingRow& r) { return r.point.q3_inf.value; });
  fit_line("q4", [](const ScalingRow& r) { return r.point.q4.value; });
  fit_line("q_minus", [](const ScalingRow& r) { return r.bound.parts.value(); });
  fit_line("u_bound", [](const ScalingRow& r) { return r.bound.value; });
  double ratio_lo = 0.0, ratio_hi = 0.0, qp_max = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double ratio = rows[i].bound.parts.value() / rows[i].point.i_value;
    if (i == 0 || ratio < ratio_lo) ratio_lo = ratio;
    if (i == 0 || ratio > ratio_hi) ratio_hi = ratio;
    double qp = rows[i].bound.q_plus * static_cast<double>(rows[i].point.a) /
                std::pow(static_cast<double>(rows[i].point.L), rows[i].point.d - 1.0);
    qp_max = std::max(qp_max, qp);
  }
  w.comment("qminus_over_i: min=" + fmt_g17(ratio_lo) + " max=" + fmt_g17(ratio_hi));
  w.comment("qplus_a_over_surf_max: " + fmt_g17(qp_max));
  return 0;
}

// ------------------------------------------------------------------ mc-study

inline int run_mc_study(KeyValueConfig& cfg, const RunOptions& opt) {
  ModelSpec spec = model_from_config(cfg);
  long box_half = cfg.get_long("box");
  long L = cfg.get_long("L", 0);
  long a = cfg.get_long("a", 0);
  long burn_in = cfg.get_long("burn_in", 1000);
  long cadence = cfg.get_long("cadence", 10);
  long measurements = cfg.get_long("measurements");
  long block_ell = cfg.get_long("block_ell", 0);
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
  std::uint64_t stream0 = static_cast<std::uint64_t>(cfg.get_long("stream", 0));
  long chains = cfg.get_long("chains", 1);
  std::string start = cfg.get_string("start", "random");
  std::string resume = cfg.get_string("resume", "");
  bool snapshot_final = cfg.get_bool("snapshot_final", false);
  double t_factor = cfg.get_double("t_factor", 0.0);
  double zeta = cfg.get_double("zeta", 0.0);
  double c_inv_lambda = cfg.get_double("c_inv_lambda", 0.0);
  cfg.reject_unknown();
  if (start != "random" && start != "aligned")
    throw ConfigError("start must be 'random' or 'aligned'");
  if (!resume.empty() && chains != 1)
    throw ConfigError("resume requires chains = 1");

  Box box(spec.d, box_half);
  bool with_defect = L > 0;
  std::optional<DeformationProfile> prof;
  UniformBound ub;
  double slack = 0.0;
  if (with_defect) {
    prof.emplace(spec.d, L, a);
    ub = uniform_bound(*prof, spec, box_half);
    slack = ub.err + 1e-9 * std::max(1.0, std::abs(ub.value));
  }

  struct ChainOutcome {
    double acceptance = 0.0;
    double drift = 0.0;
    long pathwise_violations = 0;
    MagnetizationEstimate mag;
    BatchStats energy;
    std::vector<double> deltas;
  };
  std::vector<ChainOutcome> outcomes(static_cast<std::size_t>(chains));

  parallel_for(chains, opt.threads, [&](long k) {
    Chain chain = resume.empty()
                      ? Chain(box, spec, seed, stream0 + static_cast<std::uint64_t>(k))
                      : Chain::load_snapshot_file(resume, spec);
    if (resume.empty()) {
      if (start == "random") chain.randomize();
    }
    std::unique_ptr<DefectEngine> engine;
    if (with_defect) engine = std::make_unique<DefectEngine>(box, *prof, spec);
    ObservableSeries series =
        run_chain(chain, engine.get(), burn_in, cadence, measurements, block_ell);

    ChainOutcome& oc = outcomes[static_cast<std::size_t>(k)];
    oc.acceptance = chain.acceptance_rate();
    oc.drift = chain.resync_energy();
    oc.mag = estimate_magnetization(series);
    oc.energy = batch_means(series.energy);
    oc.deltas = series.defect;
    for (double dlt : series.defect)
      if (std::abs(dlt) > ub.value + slack) ++oc.pathwise_violations;

    std::ofstream os = open_output(opt, "chain" + std::to_string(k) + ".csv");
    CsvWriter w(os);
    echo_provenance(w, cfg);
    w.comment("chain: " + std::to_string(k));
    w.comment("stream: " + std::to_string(stream0 + static_cast<std::uint64_t>(k)));
    if (with_defect) {
      w.comment("u_bound: " + fmt_g17(ub.value));
      w.comment("tail_cert: " + fmt_g17(ub.err));
    }
    std::vector<std::string> cols = {"sweep", "energy"};
    for (int c = 0; c < spec.n; ++c) cols.push_back("m" + std::to_string(c));
    cols.push_back("p12_norm");
    if (with_defect) cols.push_back("delta");
    if (block_ell > 0) cols.push_back("block_abs");
    w.columns(cols);
    for (std::size_t i = 0; i < series.energy.size(); ++i) {
      std::vector<std::string> cells = {CsvWriter::cell(series.sweep_index[i]),
                                        CsvWriter::cell(series.energy[i])};
      for (int c = 0; c < spec.n; ++c)
        cells.push_back(CsvWriter::cell(series.magnetization[i][static_cast<std::size_t>(c)]));
      cells.push_back(CsvWriter::cell(std::sqrt(series.p12[i][0] * series.p12[i][0] +
                                                series.p12[i][1] * series.p12[i][1])));
      if (with_defect) cells.push_back(CsvWriter::cell(series.defect[i]));
      if (block_ell > 0) cells.push_back(CsvWriter::cell(series.block_abs[i]));
      w.row(cells);
    }
    if (snapshot_final) {
      std::filesystem::path p = std::filesystem::path(opt.out_dir) /
                                ("chain" + std::to_string(k) + "_final.snap");
      chain.save_snapshot_file(p.string());
    }
  });

  long violations = 0;
  JsonWriter js;
  js.add_string("version", kVersion);
  js.add_integer("chains", chains);
  js.add_integer("seed", static_cast<long long>(seed));
  js.add_integer("measurements", measurements);
  js.add_integer("burn_in", burn_in);
  js.add_integer("cadence", cadence);
  if (with_defect) {
    js.add_number("u_bound", ub.value);
    js.add_number("tail_cert", ub.err);
  }
  for (long k = 0; k < chains; ++k) {
    const ChainOutcome& oc = outcomes[static_cast<std::size_t>(k)];
    std::string p = "chain" + std::to_string(k) + "_";
    js.add_number(p + "acceptance", oc.acceptance);
    js.add_number(p + "energy_mean", oc.energy.mean);
    js.add_number(p + "energy_se", oc.energy.se);
    double mnorm = 0.0;
    for (double v : oc.mag.mean) mnorm += v * v;
    js.add_number(p + "mag_norm", std::sqrt(mnorm));
    js.add_number(p + "mag_se", oc.mag.se);
    js.add_number(p + "bookkeeping_drift", oc.drift);
    js.add_integer(p + "pathwise_violations", oc.pathwise_violations);
    violations += oc.pathwise_violations;
    if (oc.drift > 1e-8) ++violations;
  }
  if (with_defect && t_factor > 0.0) {
    Lemma35Result lr = lemma35_test(outcomes[0].deltas, spec.beta, t_factor * ub.value);
    js.add_number("lemma35_t", t_factor * ub.value);
    js.add_number("lemma35_lhs", lr.lhs);
    js.add_number("lemma35_rhs", lr.rhs);
    js.add_number("lemma35_se", lr.se);
    js.add_bool("lemma35_pass", lr.pass);
    if (!lr.pass) ++violations;
  }
  if (with_defect && zeta > 0.0) {
    double I = benchmark_scale(spec.d, spec.ker.s, L, a);
    double cil = c_inv_lambda > 0.0 ? c_inv_lambda : ub.value / I;
    Lemma34Result lr = lemma34_diagnostic(outcomes[0].deltas, zeta, I, cil);
    js.add_number("lemma34_zeta", zeta);
    js.add_number("lemma34_lhs", lr.lhs);
    js.add_number("lemma34_rhs", lr.rhs);
    js.add_number("lemma34_se_lhs", lr.se_lhs);
    js.add_number("lemma34_se_rhs", lr.se_rhs);
    js.add_bool("lemma34_pass", lr.pass);
    if (!lr.pass) ++violations;
  }
  js.add_integer("violations", violations);
  std::ofstream os = open_output(opt, "summary.json");
  js.write(os);
  return violations ? 1 : 0;
}

// --------------------------------------------------------------- wedge-check

inline int run_wedge_check(KeyValueConfig& cfg, const RunOptions& opt) {
  std::vector<long> dims = parse_long_list(cfg.get_string("dims", "1,2,3"));
  long R = cfg.get_long("R", 10);
  cfg.reject_unknown();
  if (dims.empty()) throw ConfigError("dims is empty");

  std::ofstream os = open_output(opt, "wedge_check.csv");
  CsvWriter w(os);
  echo_provenance(w, cfg);
  w.columns({"d", "R", "pairs", "violations", "max_preimages", "preimage_bound"});
  long total_violations = 0;
  for (long d : dims) {
    if (d < 1 || d > 3) throw ConfigError("dims entries must be 1, 2 or 3");
    Box box(static_cast<int>(d), R);
    const long long V = box.site_count();
    long long pairs = 0, violations = 0;
    long max_pre = 0;
    std::vector<long> count(static_cast<std::size_t>(V));
    for (long long xi = 0; xi < V; ++xi) {
      Site x = box.site_at(xi);
      if (linf_norm(x) == 0) continue;
      std::fill(count.begin(), count.end(), 0L);
      int i = argmax_abs(x);
      long sx = sign_pos(x.c[i]);
      for (long long yi = 0; yi < V; ++yi) {
        Site y = box.site_at(yi);
        if (linf_norm(y) == 0) continue;
        ++pairs;
        Site t = wedge_map(x, y);
        bool ok = linf_norm(t) == linf_norm(y);
        long tmax = 0;
        for (int k = 0; k < t.d; ++k) tmax = std::max(tmax, std::labs(t.c[k]));
        ok = ok && std::labs(t.c[i]) == tmax && sign_pos(t.c[i]) == sx;
        long long d2y = 0, d2t = 0;
        for (int k = 0; k < t.d; ++k) {
          long long uy = static_cast<long long>(y.c[k]) - x.c[k];
          long long ut = static_cast<long long>(t.c[k]) - x.c[k];
          d2y += uy * uy;
          d2t += ut * ut;
        }
        ok = ok && d2t <= d2y;
        if (!ok) ++violations;
        if (box.contains(t)) ++count[static_cast<std::size_t>(box.index_of(t))];
      }
      for (long long ti = 0; ti < V; ++ti)
        max_pre = std::max(max_pre, count[static_cast<std::size_t>(ti)]);
    }
    long bound = wedge_preimage_bound(static_cast<int>(d));
    if (max_pre > bound) ++violations;
    total_violations += violations;
    w.row({CsvWriter::cell(d), CsvWriter::cell(R), CsvWriter::cell(pairs),
           CsvWriter::cell(violations), CsvWriter::cell(max_pre),
           CsvWriter::cell(bound)});
  }
  w.comment("violations: " + std::to_string(total_violations));
  return total_violations ? 1 : 0;
}

// ------------------------------------------------------------ smoothing-scan

inline int run_smoothing_scan(KeyValueConfig& cfg, const RunOptions& opt) {
  ModelSpec spec = model_from_config(cfg);
  long box_half = cfg.get_long("box");
  long L = cfg.get_long("L");
  long a = cfg.get_long("a");
  long ell = cfg.get_long("ell");
  long samples = cfg.get_long("samples", 20);
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
  double m_star = cfg.get_double("m_star", -1.0);
  cfg.reject_unknown();

  Box box(spec.d, box_half);
  DeformationProfile prof(spec.d, L, a);
  long c = box_half - ell;
  if (c <= ell) throw ConfigError("box too small for two separated blocks");
  Site c1 = zero_site(box.d), c2 = zero_site(box.d);
  c1.c[0] = -c;
  c2.c[0] = c;

  std::ofstream os = open_output(opt, "smoothing_scan.csv");
  CsvWriter w(os);
  echo_provenance(w, cfg);
  w.columns({"sample", "lhs", "rhs_scale", "ratio"});
  CompensatedSum ratio_acc;
  for (long i = 0; i < samples; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    SpinConfig config =
        m_star >= 0.0
            ? sample_biased_product(ProductMeasureSpec{m_star}, box, spec.n, rng)
            : random_config(box, spec.n, rng);
    SmoothingCheck sc = smoothing_check(config, prof, spec.ker, c1, c2, ell);
    double ratio = sc.rhs_scale != 0.0 ? sc.lhs / sc.rhs_scale : 0.0;
    ratio_acc.add(ratio);
    w.row({CsvWriter::cell(i), CsvWriter::cell(sc.lhs), CsvWriter::cell(sc.rhs_scale),
           CsvWriter::cell(ratio)});
  }
  w.comment("mean_ratio: " + fmt_g17(ratio_acc.value() / static_cast<double>(samples)));
  return 0;
}

}  // namespace spinlab
