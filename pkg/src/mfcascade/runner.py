"""Pipeline orchestration behind the CLI subcommands.

Every artifact is plain CSV/JSON with '.' decimals and '\n' newlines; float
cells use repr-faithful %.17g so identical configs reproduce identical bytes
regardless of thread count.  The manifest lists each emitted file with its
content hash (the manifest itself carries timings and is excluded from the
byte-reproducibility contract).
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import tau_prime
from .config import RunConfig, default_h_grid
from .dyadic import deinterleave
from .errors import ComparisonError, ConfigError
from .operators import coarsen_field, leaders, mrho_field, truncation_unsafe_fraction
from .sampling import SamplingConfig, SurvivorCache, check_covering, check_crowding
from .spectra import empirical_tau, ld_histogram, legendre
from .theory import (
    formalism_set,
    oracle_curve,
    predicted_sigma,
    predicted_tau,
    solve_phase_params,
)

TRUNCATION_WARN_FRACTION = 0.01


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data[None, :] if data.size else data.reshape(0, len(header))
    return header, data


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    def __init__(self, cfg: RunConfig, command: str):
        self.t0 = time.perf_counter()
        self.data = {
            "tool_version": __version__,
            "command": command,
            "config_sha256": cfg.config_sha256,
            "files": {},
            "warnings": [],
        }

    def add(self, path: Path, root: Path) -> None:
        self.data["files"][str(path.relative_to(root))] = _sha256(path)

    def warn(self, msg: str) -> None:
        self.data["warnings"].append(msg)

    def write(self, root: Path, extra: dict | None = None) -> None:
        self.data["elapsed_seconds"] = round(time.perf_counter() - self.t0, 3)
        if extra:
            self.data.update(extra)
        with open(root / "manifest.json", "w", newline="\n") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------

def run_theory(cfg: RunConfig, out_dir: str | Path) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(cfg, "theory")
    try:
        params = solve_phase_params(cfg.model, cfg.rho, cfg.eta)
    except ValueError as exc:  # e.g. monofractal weights away from rho = 1/eta
        raise ConfigError(str(exc)) from exc

    q = cfg.q_grid.values()
    tau_c = predicted_tau(cfg.model, cfg.rho, cfg.eta, params, q)
    sig_probe = predicted_sigma(cfg.model, cfg.rho, cfg.eta, params,
                                np.array([0.0, 1.0]))
    domain = sig_probe.meta["domain"]
    H = default_h_grid(cfg, domain)
    sig = predicted_sigma(cfg.model, cfg.rho, cfg.eta, params, H)

    dense_q = np.arange(cfg.conj_q_min, cfg.conj_q_max + cfg.conj_q_step / 2,
                        cfg.conj_q_step)
    star = legendre(predicted_tau(cfg.model, cfg.rho, cfg.eta, params, dense_q),
                    sig.abscissae)

    fs = formalism_set(cfg.model, params)
    _write_json(out / "params.json", {
        "params": params.to_dict(),
        "formalism_set": fs.to_dict(),
        "sigma_domain": list(domain),
        "breakpoints": [[name, val] for name, val in sig.meta["breakpoints"]],
    })
    man.add(out / "params.json", out)

    write_csv(out / "tau_theory.csv", ["q", "tau"],
              zip(tau_c.abscissae, tau_c.values))
    man.add(out / "tau_theory.csv", out)
    write_csv(out / "sigma_theory.csv", ["H", "sigma"],
              zip(sig.abscissae, sig.values))
    man.add(out / "sigma_theory.csv", out)
    write_csv(out / "tau_star.csv", ["H", "tau_star"],
              zip(star.abscissae, star.values))
    man.add(out / "tau_star.csv", out)

    if cfg.rho < 1.0 and not params.uniform:
        cap = cfg.rho * float(tau_prime(cfg.model, 0.0))
        lo = cfg.rho * cfg.eta * cfg.model.H_min
        Hw = sig.abscissae[(sig.abscissae >= lo - 1e-12) & (sig.abscissae <= cap + 1e-12)]
        orc = oracle_curve(cfg.model, cfg.rho, cfg.eta, Hw, cfg.oracle_density)
        write_csv(out / "oracle.csv", ["H", "d_tilde"],
                  zip(orc.abscissae, orc.values))
        man.add(out / "oracle.csv", out)

    man.write(out, {"case_tag": params.case_tag})
    print(f"theory: case {params.case_tag}, outputs in {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_seed(cfg: RunConfig, seed: int, dump_survivors: bool,
                   dump_levels: bool):
    params = cfg.operator_params()
    cache = SurvivorCache(SamplingConfig(eta=cfg.eta, seed=seed, d=cfg.model.d))
    q = cfg.q_grid.values()
    deepest = max(cfg.tau_levels)
    field = mrho_field(cfg.model, params, cache, deepest)
    fields = {deepest: field}
    for j in sorted(set(cfg.tau_levels) | set(cfg.ld_levels), reverse=True):
        if j not in fields:
            fields[j] = coarsen_field(field, cfg.model, params, cache, j)

    tau_rows, diag = [], {}
    for j in sorted(cfg.tau_levels):
        led = leaders(fields[j])
        emp = empirical_tau(led, q, use_leaders=True)
        tau_rows.extend((j, qq, vv) for qq, vv in zip(emp.abscissae, emp.values))
        diag[j] = truncation_unsafe_fraction(fields[j], cfg.model, params)

    ld_rows = []
    for j in sorted(cfg.ld_levels):
        for eps in cfg.ld_epsilons:
            est = ld_histogram(fields[j], eps, use_leaders=False)
            ld_rows.extend((j, eps, c, v, n) for c, v, n in
                           zip(est.centers, est.values, est.counts))

    dumps = {}
    if dump_survivors:
        for j in sorted(set(cfg.tau_levels)):
            s = cache.level(j)
            dumps[f"survivors_seed{seed}_j{j}.csv"] = (
                ["j"] + [f"k{i}" for i in range(cfg.model.d)],
                [(j, *row) for row in s.coords])
    if dump_levels:
        for j in sorted(set(cfg.tau_levels)):
            f = fields[j]
            coords = deinterleave(np.arange(f.size, dtype=np.int64), j, f.d)
            dumps[f"levels_seed{seed}_j{j}.csv"] = (
                ["j"] + [f"k{i}" for i in range(cfg.model.d)] + ["log2_value"],
                [(j, *coords[i], f.values[i]) for i in range(f.size)
                 if np.isfinite(f.values[i])])
    return tau_rows, ld_rows, diag, dumps


def run_simulate(cfg: RunConfig, out_dir: str | Path, threads: int = 1,
                 dump_survivors: bool = False, dump_levels: bool = False) -> int:
    if not cfg.seeds:
        raise ConfigError("simulate needs run.seeds")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(cfg, "simulate")

    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {seed: pool.submit(_simulate_seed, cfg, seed,
                                      dump_survivors, dump_levels)
                    for seed in cfg.seeds}
            results = {seed: fut.result() for seed, fut in futs.items()}
    else:
        for seed in cfg.seeds:
            results[seed] = _simulate_seed(cfg, seed, dump_survivors, dump_levels)

    # per-seed files in seed order, then aggregates: output never depends on
    # completion order
    diag_all = {}
    for seed in sorted(cfg.seeds):
        tau_rows, ld_rows, diag, dumps = results[seed]
        write_csv(out / f"tau_emp_seed{seed}.csv", ["j", "q", "tau"], tau_rows)
        man.add(out / f"tau_emp_seed{seed}.csv", out)
        write_csv(out / f"ld_seed{seed}.csv", ["j", "eps", "H", "value", "count"],
                  ld_rows)
        man.add(out / f"ld_seed{seed}.csv", out)
        for name, (header, rows) in sorted(dumps.items()):
            write_csv(out / name, header, rows)
            man.add(out / name, out)
        diag_all[seed] = diag

    # aggregate tau: median + quartiles per (j, q)
    q = cfg.q_grid.values()
    agg_rows = []
    for j in sorted(cfg.tau_levels):
        per_seed = np.array([[v for (jj, qq, v) in results[seed][0] if jj == j]
                             for seed in sorted(cfg.seeds)])
        med = np.median(per_seed, axis=0)
        q25 = np.percentile(per_seed, 25, axis=0)
        q75 = np.percentile(per_seed, 75, axis=0)
        agg_rows.extend(zip([j] * len(q), q, med, q25, q75))
    write_csv(out / "tau_emp_median.csv", ["j", "q", "median", "q25", "q75"],
              agg_rows)
    man.add(out / "tau_emp_median.csv", out)

    # aggregate LD over the union of occupied bins
    keys = sorted({(j, eps, round(c / (2 * eps)))
                   for seed in cfg.seeds
                   for (j, eps, c, v, n) in results[seed][1]})
    ld_agg = []
    for (j, eps, k) in keys:
        vals, cnts = [], []
        for seed in sorted(cfg.seeds):
            found = [(v, n) for (jj, ee, c, v, n) in results[seed][1]
                     if jj == j and ee == eps and round(c / (2 * ee)) == k]
            v, n = found[0] if found else (-np.inf, 0)
            vals.append(v)
            cnts.append(n)
        ld_agg.append((j, eps, (k + 0.5) * 2 * eps,
                       np.median(vals), np.median(cnts)))
    write_csv(out / "ld_median.csv", ["j", "eps", "H", "median", "count_median"],
              ld_agg)
    man.add(out / "ld_median.csv", out)

    worst = {j: float(np.median([diag_all[s][j] for s in cfg.seeds]))
             for j in sorted(cfg.tau_levels)}
    flagged = any(v > TRUNCATION_WARN_FRACTION for v in worst.values())
    if flagged:
        man.warn(f"truncation diagnostic above {TRUNCATION_WARN_FRACTION:.0%}")
    man.write(out, {"truncation_unsafe_median": worst,
                    "truncation_flagged": flagged,
                    "seeds": list(cfg.seeds)})
    print(f"simulate: {len(cfg.seeds)} seeds, levels {sorted(cfg.tau_levels)}, "
          f"outputs in {out}" + (" [truncation warning]" if flagged else ""))
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _load_map(path: Path, key_cols: int = 1):
    header, data = read_csv(path)
    out = {}
    for row in data:
        key = tuple(round(float(x), 12) for x in row[:key_cols])
        out[key if key_cols > 1 else key[0]] = row[key_cols:]
    return out


def run_compare(cfg: RunConfig, out_dir: str | Path) -> int:
    out = Path(out_dir)
    for name in ("tau_theory.csv", "tau_emp_median.csv", "tau_star.csv",
                 "ld_median.csv"):
        if not (out / name).exists():
            raise ComparisonError(f"missing {name}; run theory and simulate first")

    report = {"tolerances": {"tau": cfg.tau_tol, "ld": cfg.ld_tol,
                             "oracle": cfg.oracle_tol}}
    ok = True

    # (a) median empirical tau at the deepest level vs predicted tau
    theory = _load_map(out / "tau_theory.csv")
    _, emp = read_csv(out / "tau_emp_median.csv")
    levels = sorted(set(int(r[0]) for r in emp))
    deepest = max(levels)
    gaps_by_level = {}
    for j in levels:
        rows = [r for r in emp if int(r[0]) == j]
        gaps = {}
        for r in rows:
            qv = round(float(r[1]), 12)
            if qv not in theory:
                raise ComparisonError(f"q = {qv} missing from tau_theory.csv")
            gaps[qv] = abs(float(r[2]) - float(theory[qv][0]))
        gaps_by_level[j] = gaps
    sup_tau = max(gaps_by_level[deepest].values())
    tau_ok = sup_tau <= cfg.tau_tol
    improved = None
    if cfg.improve_from_level is not None and cfg.improve_from_level in gaps_by_level:
        ref = gaps_by_level[cfg.improve_from_level]
        improved = all(gaps_by_level[deepest][qv] <= ref[qv] + 1e-12 for qv in ref)
        tau_ok = tau_ok and improved
    report["tau"] = {"level": deepest, "sup_gap": sup_tau,
                     "per_q": {str(k): v for k, v in gaps_by_level[deepest].items()},
                     "improved_from": cfg.improve_from_level,
                     "improved": improved, "pass": tau_ok}
    ok = ok and tau_ok

    # (b) LD median vs numeric conjugate of predicted tau.  Only populated
    # bins inside the spectrum domain count: outside it the truncated
    # conjugate reflects the q-grid cutoff, not a prediction.
    _, star = read_csv(out / "tau_star.csv")
    _, ld = read_csv(out / "ld_median.csv")
    dom_lo, dom_hi = -np.inf, np.inf
    if (out / "params.json").exists():
        dom_lo, dom_hi = json.loads((out / "params.json").read_text())["sigma_domain"]
    ld_gaps, ld_skipped = [], 0
    for row in ld:
        j, eps, H, med, cnt = row
        if cnt < cfg.ld_min_count or not np.isfinite(med):
            continue
        if not dom_lo - 1e-9 <= H <= dom_hi + 1e-9:
            ld_skipped += 1
            continue
        ts = float(np.interp(H, star[:, 0], star[:, 1]))
        ld_gaps.append({"j": int(j), "eps": float(eps), "H": float(H),
                        "gap": abs(float(med) - ts)})
    sup_ld = max((g["gap"] for g in ld_gaps), default=0.0)
    ld_ok = sup_ld <= cfg.ld_tol
    report["ld"] = {"sup_gap": sup_ld, "n_bins": len(ld_gaps),
                    "n_skipped_out_of_domain": ld_skipped, "pass": ld_ok}
    ok = ok and ld_ok

    # (c) oracle vs closed-form spectrum (rho < 1 only)
    if (out / "oracle.csv").exists():
        sig_map = _load_map(out / "sigma_theory.csv")
        _, orc = read_csv(out / "oracle.csv")
        gaps = [abs(float(r[1]) - float(sig_map[round(float(r[0]), 12)][0]))
                for r in orc if round(float(r[0]), 12) in sig_map]
        sup_orc = max(gaps) if gaps else 0.0
        orc_ok = sup_orc <= cfg.oracle_tol
        report["oracle"] = {"sup_gap": sup_orc, "n_points": len(gaps),
                            "pass": orc_ok}
        ok = ok and orc_ok

    report["pass"] = ok
    report["exit_code"] = 0 if ok else 2
    _write_json(out / "compare.json", report)
    print(f"compare: tau sup gap {sup_tau:.4f} "
          f"(tol {cfg.tau_tol}), ld sup gap {sup_ld:.4f} (tol {cfg.ld_tol})"
          + (" -> PASS" if ok else " -> FAIL"))
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# lemma checks
# ---------------------------------------------------------------------------

def run_check_lemmas(cfg: RunConfig, out_dir: str | Path) -> int:
    if not cfg.seeds:
        raise ConfigError("check-lemmas needs run.seeds")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = sorted(set(cfg.tau_levels))
    per = []
    for j in levels:
        cov_ok = crw_ok = 0
        for seed in cfg.seeds:
            sc = SamplingConfig(eta=cfg.eta, seed=seed, d=cfg.model.d)
            cov = check_covering(sc, j)
            crw = check_crowding(sc, j)
            cov_ok += cov.complete
            crw_ok += crw.ok
        per.append({"j": j,
                    "covering_complete_fraction": cov_ok / len(cfg.seeds),
                    "crowding_ok_fraction": crw_ok / len(cfg.seeds)})
    _write_json(out / "lemmas.json", {"eta": cfg.eta, "d": cfg.model.d,
                                      "n_seeds": len(cfg.seeds), "levels": per})
    for row in per:
        print(f"check-lemmas j={row['j']}: covering {row['covering_complete_fraction']:.2f}, "
              f"crowding {row['crowding_ok_fraction']:.2f}")
    return 0


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

def _write_svg(path: Path, series: list[tuple[str, np.ndarray, np.ndarray]],
               title: str) -> None:
    """Minimal line chart: fixed viewport, one polyline per series."""
    W, Hpx, pad = 640, 420, 50
    pts = np.concatenate([np.column_stack([x[np.isfinite(y)], y[np.isfinite(y)]])
                          for _, x, y in series])
    x0, x1 = pts[:, 0].min(), pts[:, 0].max()
    y0, y1 = pts[:, 1].min(), pts[:, 1].max()
    sx = (W - 2 * pad) / max(x1 - x0, 1e-12)
    sy = (Hpx - 2 * pad) / max(y1 - y0, 1e-12)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hpx}">',
             f'<text x="{W//2}" y="20" text-anchor="middle">{title}</text>',
             f'<rect x="{pad}" y="{pad}" width="{W-2*pad}" height="{Hpx-2*pad}" '
             'fill="none" stroke="#888"/>']
    for k, (label, x, y) in enumerate(series):
        m = np.isfinite(y)
        pt = " ".join(f"{pad + (a - x0) * sx:.1f},{Hpx - pad - (b - y0) * sy:.1f}"
                      for a, b in zip(x[m], y[m]))
        c = colors[k % len(colors)]
        lines.append(f'<polyline points="{pt}" fill="none" stroke="{c}"/>')
        lines.append(f'<text x="{pad + 5}" y="{pad + 15 * (k + 1)}" fill="{c}">'
                     f'{label}</text>')
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n", newline="\n")


def run_plotdata(cfg: RunConfig, out_dir: str | Path) -> int:
    out = Path(out_dir)
    if not (out / "sigma_theory.csv").exists():
        raise ComparisonError("missing sigma_theory.csv; run theory first")
    _, sig = read_csv(out / "sigma_theory.csv")
    _, star = read_csv(out / "tau_star.csv")
    rows = [(H, s, float(np.interp(H, star[:, 0], star[:, 1])))
            for H, s in sig]
    write_csv(out / "plot_sigma.csv", ["H", "sigma_pred", "tau_star"], rows)
    series = [("sigma", sig[:, 0], sig[:, 1]),
              ("tau_star", star[:, 0], star[:, 1])]
    if (out / "oracle.csv").exists():
        _, orc = read_csv(out / "oracle.csv")
        series.append(("oracle", orc[:, 0], orc[:, 1]))

    made = ["plot_sigma.csv"]
    if (out / "tau_emp_median.csv").exists():
        theory = _load_map(out / "tau_theory.csv")
        _, emp = read_csv(out / "tau_emp_median.csv")
        deepest = max(int(r[0]) for r in emp)
        rows = [(r[1], float(theory[round(float(r[1]), 12)][0]), r[2])
                for r in emp if int(r[0]) == deepest
                and round(float(r[1]), 12) in theory]
        write_csv(out / "plot_tau.csv", ["q", "tau_pred", "tau_emp_median"], rows)
        made.append("plot_tau.csv")
    if cfg.emit_svg:
        _write_svg(out / "plot_sigma.svg", series, "predicted spectrum")
        made.append("plot_sigma.svg")
    print(f"plotdata: wrote {', '.join(made)} in {out}")
    return 0
