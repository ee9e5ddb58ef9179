#include "defect_cascade/sweep_engine.hpp"

#include "defect_cascade/error.hpp"
#include "defect_cascade/units.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

namespace defect_cascade {

const char* parameter_key(SweepParameter p) {
  switch (p) {
    case SweepParameter::d_x: return "d_x_eA";
    case SweepParameter::omega_xS_offset: return "omega_xS_offset_ueV";
    case SweepParameter::separation: return "separation_nm";
    case SweepParameter::gamma_ref: return "gamma_ref_ueV";
  }
  return "?";
}

std::optional<SweepParameter> parameter_from_key(const std::string& key) {
  for (auto p : {SweepParameter::d_x, SweepParameter::omega_xS_offset, SweepParameter::separation,
                 SweepParameter::gamma_ref})
    if (key == parameter_key(p)) return p;
  return std::nullopt;
}

PhysicalParams with_parameter(const PhysicalParams& base, SweepParameter p, double value) {
  PhysicalParams q = base;
  switch (p) {
    case SweepParameter::d_x: q.d_x_eA = value; break;
    case SweepParameter::separation: q.separation_nm = value; break;
    case SweepParameter::gamma_ref: q.gamma_ref_ueV = value; break;
    case SweepParameter::omega_xS_offset:
      q = base.to_symmetric();
      q.anchor.omega_xS_offset_ueV = value;
      break;
  }
  return q;
}

double d_x_for_splitting(const PhysicalParams& base, double splitting_ueV) {
  // splitting = -(J_xx + J_yy) with J_xx proportional to d_x^2 (exact when J_xy = 0).
  PhysicalParams unit = base;
  unit.d_x_eA = 1.0;
  const DefectPairConfig c = unit.resolve();
  const CouplingEnergies J = dipole_coupling(c);
  if (J.J_xx == 0) throw DomainError("splitting does not depend on d_x for this geometry");
  const double d2 = (-splitting_ueV - J.J_yy) / J.J_xx;
  if (!(d2 >= 0)) throw DomainError("splitting " + std::to_string(splitting_ueV) + " ueV is unreachable with d_x >= 0");
  return std::sqrt(d2);
}

SweepRow evaluate_point(const PhysicalParams& p, const GridPolicy& policy,
                        const std::optional<FrequencyGrid>& fixed_grid) {
  SweepRow row;
  try {
    const CoupledSystem sys = build_system(p.resolve());
    row.splitting_ueV = units::to_ueV(sys.cascade.omega_Y2 - sys.cascade.omega_Y1);
    row.splitting_x_ueV = units::to_ueV(sys.cascade.omega_X2 - sys.cascade.omega_X1);
    const FrequencyGrid grid = fixed_grid ? *fixed_grid : auto_grid(sys, policy);
    const AmplitudeGrid amps = amplitude_grid(sys, grid, true, 1.0, policy.margin_gamma);
    row.coverage_ok = amps.coverage.ok;
    const EntanglementMetrics m = entanglement_metrics(schmidt_decompose(amps.c));
    row.S_bits = m.S_bits;
    row.eta = m.eta;
    row.fidelity = m.fidelity;
    row.lambda_head = m.lambda_head;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
    row.lambda_head.assign(kLambdaHead, 0.0);
  }
  return row;
}

unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DEFECT_CASCADE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

namespace {

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  threads = std::max(1u, std::min<unsigned>(threads ? threads : sweep_threads(), unsigned(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, unsigned threads) {
  if (spec.values.empty()) throw DomainError("sweep needs at least one value");
  for (double v : spec.values)
    if (!std::isfinite(v)) throw DomainError("sweep values must be finite");
  std::optional<FrequencyGrid> fixed;
  if (!spec.auto_center) fixed = auto_grid(build_system(spec.base.resolve()), spec.grid);

  SweepResult res;
  res.parameter = spec.parameter;
  res.grid = spec.grid;
  res.auto_center = spec.auto_center;
  res.rows.resize(spec.values.size());
  parallel_for(spec.values.size(), threads, [&](std::size_t i) {
    res.rows[i] = evaluate_point(with_parameter(spec.base, spec.parameter, spec.values[i]), spec.grid, fixed);
    res.rows[i].value = spec.values[i];
  });
  return res;
}

OperatingPoint find_operating_point(const PhysicalParams& base, double eta_min, double f_min, double d_x_lo,
                                    double d_x_hi, const GridPolicy& grid, int scan_points, unsigned threads) {
  if (!(d_x_lo > 0) || !(d_x_hi > d_x_lo)) throw DomainError("operating-point search needs 0 < d_x_lo < d_x_hi");
  if (scan_points < 3) throw DomainError("operating-point scan needs at least 3 points");

  auto eval = [&](double dx) {
    SweepRow r = evaluate_point(with_parameter(base, SweepParameter::d_x, dx), grid);
    r.value = dx;
    return r;
  };
  auto meets_eta = [&](const SweepRow& r) { return r.ok && r.eta >= eta_min; };

  SweepSpec spec;
  spec.parameter = SweepParameter::d_x;
  spec.base = base;
  spec.grid = grid;
  for (int i = 0; i < scan_points; ++i) spec.values.push_back(d_x_lo + (d_x_hi - d_x_lo) * i / (scan_points - 1));
  // The exact degeneracy point, where the eta maximum sits.
  try {
    const double dx0 = d_x_for_splitting(base, 0.0);
    if (dx0 > d_x_lo && dx0 < d_x_hi) spec.values.push_back(dx0);
  } catch (const DomainError&) {
  }
  std::sort(spec.values.begin(), spec.values.end());
  OperatingPoint op;
  op.scan = run_sweep(spec, threads).rows;

  std::vector<SweepRow> extra;
  // Refine every eta = eta_min crossing by bisection, keeping the eta-feasible end.
  for (std::size_t i = 0; i + 1 < op.scan.size(); ++i) {
    const SweepRow &a = op.scan[i], &b = op.scan[i + 1];
    if (!a.ok || !b.ok || meets_eta(a) == meets_eta(b)) continue;
    SweepRow in = meets_eta(a) ? a : b, out = meets_eta(a) ? b : a;
    for (int it = 0; it < 60 && std::abs(in.value - out.value) > 1e-6; ++it) {
      SweepRow mid = eval(0.5 * (in.value + out.value));
      if (!mid.ok) break;
      (meets_eta(mid) ? in : out) = mid;
    }
    extra.push_back(in);
  }

  auto better = [&](const SweepRow& a, const SweepRow& b) {  // a strictly preferred over b
    if (meets_eta(a) != meets_eta(b)) return meets_eta(a);
    return a.fidelity > b.fidelity;
  };
  std::vector<SweepRow> all = op.scan;
  all.insert(all.end(), extra.begin(), extra.end());
  std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.value < b.value; });

  // Golden-section search on the penalized objective around the best point so far.
  std::size_t ib = 0;
  for (std::size_t i = 1; i < all.size(); ++i)
    if (better(all[i], all[ib])) ib = i;
  auto objective = [&](const SweepRow& r) {
    return r.ok ? r.fidelity - 10.0 * std::max(0.0, eta_min - r.eta) : -1e9;
  };
  {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = all[ib > 0 ? ib - 1 : 0].value, hi = all[std::min(ib + 1, all.size() - 1)].value;
    if (hi > lo) {
      double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
      SweepRow r1 = eval(x1), r2 = eval(x2);
      for (int it = 0; it < 24 && hi - lo > 1e-7; ++it) {
        if (objective(r1) >= objective(r2)) {
          hi = x2, x2 = x1, r2 = r1;
          x1 = hi - phi * (hi - lo);
          r1 = eval(x1);
        } else {
          lo = x1, x1 = x2, r1 = r2;
          x2 = lo + phi * (hi - lo);
          r2 = eval(x2);
        }
      }
      all.push_back(r1);
      all.push_back(r2);
    }
  }
  std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.value < b.value; });
  op.scan = all;

  const SweepRow* best = nullptr;
  for (const auto& r : all)
    if (meets_eta(r) && (!best || r.fidelity > best->fidelity)) best = &r;
  if (!best) {
    op.message = "no feasible point: eta >= eta_min is never met on the scanned range";
    for (const auto& r : all)
      if (r.ok && (!best || r.eta > best->eta)) best = &r;
    if (best) op.best = *best;
    return op;
  }
  op.best = *best;
  op.feasible = best->fidelity >= f_min;
  op.message = op.feasible ? "ok" : "no feasible point: best fidelity with eta >= eta_min is below f_min";
  return op;
}

}  // namespace defect_cascade
