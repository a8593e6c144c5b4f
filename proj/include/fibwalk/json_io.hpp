#ifndef FIBWALK_JSON_IO_HPP
#define FIBWALK_JSON_IO_HPP

#include <json.hpp>

#include <string>
#include <vector>

#include "fibwalk/induced.hpp"
#include "fibwalk/nest.hpp"
#include "fibwalk/scaling.hpp"
#include "fibwalk/walk.hpp"

namespace fibwalk {

using json = nlohmann::json;

// Reals travel as decimal strings so outputs round-trip exactly at the
// declared precision and serialize byte-identically across runs.
inline json real_json(const Real& x, int digits = 0) { return x.str(digits); }

inline json solve_json(const SolveResult& res) {
  json j;
  j["ell"] = real_json(res.ell, 20);
  j["K"] = res.K;
  j["lambda_star"] = real_json(res.lambda_star);
  j["precision_bits"] = res.precision_bits;
  j["bracket_width"] = real_json(res.bracket_width, 8);
  j["verdict"] = {{"ok", res.verdict.ok},
                  {"depth_reached", res.verdict.depth_reached}};
  return j;
}

inline json verdict_json(const CombinatoricsVerdict& v) {
  json j;
  j["ok"] = v.ok;
  j["depth_reached"] = v.depth_reached;
  if (v.first_violation)
    j["first_violation"] = {{"expected", v.first_violation->first},
                            {"observed", v.first_violation->second}};
  return j;
}

inline json rows_json(const std::vector<IneqRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"name", r.name},
                   {"level", r.level},
                   {"lhs", real_json(r.lhs, 18)},
                   {"rhs", real_json(r.rhs, 18)},
                   {"margin", real_json(r.margin, 12)},
                   {"pass", r.pass}});
  return arr;
}

inline json scaling_report_json(const ScalingReport& r) {
  json j;
  j["K"] = r.K;
  j["rho_inf"] = real_json(r.rho_inf, 12);
  j["n0_lambda"] = r.n0_lambda;
  j["realb_C1"] = real_json(r.realb_C1, 12);
  j["realb_C2"] = real_json(r.realb_C2, 12);
  json lv = json::array();
  for (const auto& L : r.levels) {
    json e;
    e["n"] = L.n;
    e["S_n"] = L.S_n;
    e["side"] = L.side;
    e["dist_d"] = real_json(L.dist_d);
    e["dist_d_f"] = real_json(L.dist_d_f);
    e["dist_u"] = real_json(L.dist_u);
    e["dist_u_f"] = real_json(L.dist_u_f);
    e["dist_z"] = real_json(L.dist_z);
    e["dist_z_f"] = real_json(L.dist_z_f);
    if (L.dist_t_f) e["dist_t_f"] = real_json(*L.dist_t_f);
    if (L.dist_y_f) e["dist_y_f"] = real_json(*L.dist_y_f);
    if (r.lambda_f[static_cast<size_t>(L.n)])
      e["lambda_f"] = real_json(*r.lambda_f[static_cast<size_t>(L.n)], 12);
    lv.push_back(e);
  }
  j["levels"] = lv;
  j["rows"] = rows_json(r.rows);
  return j;
}

inline std::string scaling_report_csv(const ScalingReport& r) {
  std::string out =
      "n,S_n,side,dist_d,dist_d_f,dist_u,dist_u_f,dist_z,dist_z_f,dist_t_f,"
      "dist_y_f,lambda_f,lambda_pass,ln4_pass\n";
  for (const auto& L : r.levels) {
    out += std::to_string(L.n) + "," + std::to_string(L.S_n) + "," +
           std::to_string(L.side) + "," + L.dist_d.str(24) + "," +
           L.dist_d_f.str(24) + "," + L.dist_u.str(24) + "," +
           L.dist_u_f.str(24) + "," + L.dist_z.str(24) + "," +
           L.dist_z_f.str(24) + ",";
    out += (L.dist_t_f ? L.dist_t_f->str(24) : "") + ",";
    out += (L.dist_y_f ? L.dist_y_f->str(24) : "") + ",";
    if (L.n >= 2) {
      auto lc = lambda_check(r, L.n);
      out += lc.value.str(18) + "," + (lc.pass ? "1" : "0") + "," +
             (lc.ln_pass ? "1" : "0");
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

inline json validation_json(const ScalingValidation& v) {
  auto one = [](const InequalityFinding& f) {
    json j;
    j["ok"] = f.ok;
    if (f.first_violation)
      j["first_violation"] = {f.first_violation->first,
                              f.first_violation->second};
    return j;
  };
  return {{"tfirst", one(v.tfirst)},
          {"tsecond", one(v.tsecond)},
          {"tthird", one(v.tthird)},
          {"ok", v.ok()}};
}

inline json walk_json(const WalkEnsembleResult& r) {
  json j;
  j["n_walkers"] = r.n_walkers;
  j["escape_fraction"] = r.escape_fraction;
  j["slope_quantiles"] = {{"mean", r.slope_mean},
                          {"q10", r.slope_q10},
                          {"q50", r.slope_q50},
                          {"q90", r.slope_q90}};
  j["hr_statistic"] = r.hr_statistic;
  j["hr_exceed_fraction"] = r.hr_exceed_fraction;
  j["doob_exact"] = r.doob_exact;
  j["drift_warning"] = r.drift_warning;
  j["m1"] = real_json(r.m1, 18);
  j["m2"] = real_json(r.m2, 18);
  return j;
}

inline json transitions_json(const EmpiricalTransitions& t) {
  json j;
  j["r"] = t.r;
  j["samples"] = t.samples;
  j["absorbed"] = t.absorbed;
  j["boundary_resamples"] = t.boundary_resamples;
  json counts = json::object();
  for (const auto& [k, c] : t.counts) counts[std::to_string(k)] = c;
  j["counts"] = counts;
  json nu = json::array();
  for (const auto& x : t.nu_hat) nu.push_back(real_json(x, 12));
  j["nu_hat"] = nu;
  j["k0"] = t.k0;
  return j;
}

inline json basin_json(const BasinReport& r) {
  json j;
  j["samples"] = r.samples;
  j["horizon"] = r.horizon;
  j["start_level"] = r.start_level;
  j["r0"] = r.r0;
  j["drift_mean"] = r.drift_mean;
  j["escape_fraction"] = r.escape_fraction;
  j["recurrence_fraction"] = r.recurrence_fraction;
  j["absorbed_fraction"] = r.absorbed_fraction;
  j["total_steps"] = r.total_steps;
  json jc = json::object();
  for (const auto& [dk, c] : r.jump_counts) jc[std::to_string(dk)] = c;
  j["jump_counts"] = jc;
  return j;
}

}  // namespace fibwalk

#endif  // FIBWALK_JSON_IO_HPP
