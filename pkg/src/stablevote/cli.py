"""Command-line driver: experiment configuration, statistical suites,
oracle runs, and the acceptance suite.

Configs are plain key = value text files; every command writes a JSON
manifest (tool version, full config, config hash, seed) next to its
outputs, and re-running a command from its manifest reproduces the
outputs bit-identically for any worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, estimator, geometry, levy, oracle, voting
from .params import DomainError, ModelParams, ScalingPreset
from .tree import MotionKind, MotionSpec


class RunConfig:
    """Ordered string-to-string mapping with exact render/parse round-trip."""

    def __init__(self, items: dict | None = None):
        self.items: dict[str, str] = {}
        for k, v in (items or {}).items():
            self.set(k, v)

    def set(self, key: str, value) -> None:
        key = key.strip()
        if not key or "=" in key or "\n" in key:
            raise ValueError(f"bad config key {key!r}")
        self.items[key] = self._canon(value)

    @staticmethod
    def _canon(value) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        return str(value).strip()

    def get(self, key: str, default=None) -> str:
        if key in self.items:
            return self.items[key]
        if default is None:
            raise KeyError(f"missing config key {key!r}")
        return self._canon(default)

    def get_float(self, key: str, default=None) -> float:
        return float(self.get(key, default))

    def get_int(self, key: str, default=None) -> int:
        return int(self.get(key, default))

    def get_floats(self, key: str, default=None) -> list[float]:
        return [float(tok) for tok in self.get(key, default).split(",") if tok]

    def render(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.items.items()))

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cfg = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"bad config line {line!r}")
            cfg.set(key, value)
        return cfg

    def sha256(self) -> str:
        return hashlib.sha256(self.render().encode()).hexdigest()

    def copy(self) -> "RunConfig":
        return RunConfig(dict(self.items))


def params_from_config(cfg: RunConfig) -> ModelParams:
    alpha = cfg.get_float("alpha", 1.5)
    eps = cfg.get_float("epsilon", 0.1)
    preset = cfg.get("preset", "log")
    if preset == "log":
        scaling = ScalingPreset.log_example()
    elif preset == "power_example":
        scaling = ScalingPreset.power_example(alpha)
    elif preset == "power":
        scaling = ScalingPreset.power(cfg.get_float("delta"), alpha)
    else:
        scaling = ScalingPreset.from_label(preset)
    return ModelParams(alpha, eps, scaling)


def motion_from_config(cfg: RunConfig) -> MotionSpec:
    kind = MotionKind(cfg.get("motion", "stable_1d"))
    return MotionSpec(kind, dim=cfg.get_int("dim", 1))


def scheme_from_config(cfg: RunConfig, params: ModelParams) -> voting.VoteScheme:
    name = cfg.get("scheme", "majority")
    if name == "majority":
        return voting.majority_scheme()
    if name == "marked":
        return voting.marked_scheme(params)
    if name == "exp_marked":
        return voting.exp_marked_scheme(params)
    if name == "biased_plus":
        return voting.biased_scheme(+1)
    if name == "biased_minus":
        return voting.biased_scheme(-1)
    raise ValueError(f"unknown scheme {name!r}")


def write_manifest(out: Path, command: str, cfg: RunConfig) -> None:
    manifest = {
        "tool": "stablevote",
        "version": __version__,
        "command": command,
        "config": dict(sorted(cfg.items.items())),
        "config_sha256": cfg.sha256(),
        "seed": int(cfg.get_int("seed", 0)),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True) + "\n")


class CheckList:
    def __init__(self):
        self.rows = []

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.rows.append({"name": name, "passed": bool(passed),
                          "detail": detail})
        mark = "PASS" if passed else "FAIL"
        print(f"[{mark}] {name}" + (f": {detail}" if detail else ""))

    @property
    def all_passed(self) -> bool:
        return all(r["passed"] for r in self.rows)

    def write(self, out: Path, name: str) -> None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(json.dumps(self.rows, indent=2) + "\n")


def cmd_subordinator_stats(cfg: RunConfig, out: Path) -> int:
    params = params_from_config(cfg)
    if params.b_eps >= 1.0 / 3.0:
        print(f"config rejected: b_eps = {params.b_eps:.4f} >= 1/3 "
              "(outside the fixed-point domain)", file=sys.stderr)
        return 2
    n = cfg.get_int("n", 100_000)
    seed = cfg.get_int("seed", 1)
    s = cfg.get_float("s", 0.1)
    checks = CheckList()

    # analytic rate identity: mean jump mass per unit time equals one
    c = levy.levy_density_prefactor(params)
    rho = params.alpha / 2.0
    mean_rate = c * params.trunc_level ** (1.0 - rho) / (1.0 - rho)
    checks.check("mean-rate identity", abs(mean_rate - 1.0) < 1e-12,
                 f"integral = {mean_rate:.15f}")

    vals = levy.bulk_truncated_increments(params, s, n, seed=seed)
    se = vals.std() / math.sqrt(n)
    checks.check("E[R_s] = s", abs(vals.mean() - s) <= 3 * se,
                 f"mean {vals.mean():.6f} vs {s} (3se {3 * se:.2g})")
    for lam in (0.5, 1.0, 5.0):
        phi = levy.laplace_transform(params, s, lam)
        w = np.exp(-lam * vals)
        z = abs(w.mean() - phi) / (w.std() / math.sqrt(n))
        checks.check(f"laplace lam={lam}", z <= 3.0,
                     f"emp {w.mean():.6f} closed {phi:.6f} z={z:.2f}")
    for q in (0.5, 1.5):
        emp = (vals ** -q).mean()
        emp_se = (vals ** -q).std() / math.sqrt(n)
        bound = levy.neg_moment_bound(params, s, q)
        checks.check(f"negative moment q={q}", emp <= bound + 3 * emp_se,
                     f"emp {emp:.4f} bound {bound:.4f}")

    st = s if s <= params.epsilon ** 2 * abs(math.log(params.epsilon)) else \
        params.epsilon ** 2 * abs(math.log(params.epsilon))
    tail_vals = levy.bulk_truncated_increments(params, st, n, seed=seed + 1)
    for k in (1, 2):
        lvl = (k + 1) * params.I_val ** 2 * abs(math.log(params.epsilon))
        rate = float((np.abs(tail_vals - st) >= lvl).mean())
        bound = params.epsilon ** k
        sig = math.sqrt(max(rate * (1 - rate), 1e-12) / n)
        checks.check(f"tail bound k={k}", rate <= bound + 3 * sig,
                     f"rate {rate:.5f} vs eps^k {bound:.5f}")

    # Arrival counts of jumps above the (optionally mis-scaled) truncation
    # level, tested against the paper rate T/I^2; a wrong truncation level
    # shifts the rate and fails this check.
    T = cfg.get_float("large_jump_horizon", 2.0)
    trunc_scale = cfg.get_float("trunc_level_scale", 1.0)
    eff_rate = c * (2.0 / params.alpha) * (trunc_scale * params.trunc_level) ** -rho
    from .rng import Stream, derive_key

    stream = Stream(derive_key(seed, 0xA11))
    m = min(n, 20_000)
    counts = np.empty(m)
    for i in range(m):
        t = stream.exponential(1.0 / eff_rate)
        cnt = 0
        while t < T:
            cnt += 1
            t += stream.exponential(1.0 / eff_rate)
        counts[i] = cnt
    target = T / params.I_val ** 2
    mean_se = counts.std() / math.sqrt(m)
    checks.check("large-jump Poisson mean",
                 abs(counts.mean() - target) <= 3 * mean_se,
                 f"mean {counts.mean():.3f} vs T/I^2 {target:.3f}")
    var_se = math.sqrt(max(((counts - counts.mean()) ** 4).mean()
                           - counts.var() ** 2, 1e-12) / m)
    checks.check("large-jump Poisson variance",
                 abs(counts.var() - target) <= 3 * var_se,
                 f"var {counts.var():.3f}")

    checks.write(out, "subordinator_stats.json")
    write_manifest(out, "subordinator-stats", cfg)
    return 0 if checks.all_passed else 1


def cmd_vote_math(cfg: RunConfig, out: Path) -> int:
    tol = 1e-12
    checks = CheckList()
    b_grid = cfg.get_floats("b_grid", "0.0,0.02,0.1,0.2,0.3,0.33")
    qs = np.linspace(0.0, 1.0, 1001)
    worst_sym = max(abs(voting.g_times(q, b=b) - (1 - voting.g_times(1 - q, b=b)))
                    for b in b_grid for q in qs[::10])
    checks.check("g_x symmetry", worst_sym <= tol, f"max dev {worst_sym:.2e}")
    worst_fix = 0.0
    for b in b_grid:
        if b >= 1 / 3:
            continue
        um, half, up = voting.fixed_points(b)
        worst_fix = max(worst_fix, abs(voting.g_times(up, b=b) - up),
                        abs(voting.g_times(um, b=b) - um),
                        abs(um + up - 1.0))
    checks.check("fixed points", worst_fix <= tol, f"max dev {worst_fix:.2e}")
    worst_cubic = max(abs(voting.cubic_identity_residual(p, b))
                      for b in b_grid if b < 1 / 3 for p in qs)
    checks.check("cubic identity", worst_cubic <= tol,
                 f"max residual {worst_cubic:.2e}")
    res = {}
    for b in (1e-2, 1e-3):
        um = voting.fixed_points(b)[0]
        res[b] = um - 0.75 * b * b
    ratio = res[1e-2] / res[1e-3]
    checks.check("small-b expansion cubic order", 500 <= ratio <= 2000,
                 f"residual ratio {ratio:.1f}")
    worst_low = 0.0
    ok = True
    for b in b_grid:
        if b >= 1 / 3:
            continue
        up = voting.fixed_points(b)[2]
        grid = np.linspace(0.5, 1.0, 9)
        for p1 in grid:
            for p2 in grid:
                for p3 in grid:
                    lhs = voting.g_times(p1, p2, p3, b=b)
                    ok &= lhs >= min(p1, p2, p3, up) - tol
                    lo = voting.g_times(1 - p1, 1 - p2, 1 - p3, b=b)
                    ok &= lo <= max(1 - p1, 1 - p2, 1 - p3, 1 - up) + tol
    checks.check("three-voter floor/ceiling bounds", ok, "grid 9^3 per b")
    # iterate convergence (reported)
    for eps in (1e-2, 1e-3):
        b = 1.0 / (1.0 + math.log(eps) ** 2)
        r = voting.iterate_g_times(0.5 + eps, 400, b, target_tol=eps * eps)
        checks.check(f"iterate hits u+ (eps={eps})", r.first_hit is not None,
                     f"n* = {r.first_hit}")
    checks.write(out, "vote_math.json")
    write_manifest(out, "vote-math", cfg)
    return 0 if checks.all_passed else 1


def cmd_estimate(cfg: RunConfig, out: Path) -> int:
    n = cfg.get_int("n", 10_000)
    if n <= 0:
        print("usage error: n must be positive", file=sys.stderr)
        return 2
    params = params_from_config(cfg)
    motion = motion_from_config(cfg)
    scheme = scheme_from_config(cfg, params)
    x = cfg.get_float("x", 0.0)
    t = cfg.get_float("t", params.epsilon ** 2)
    seed = cfg.get_int("seed", 1)
    workers = cfg.get_int("workers", 1)
    est = estimator.estimate_u(params, x, t, motion, scheme, n, seed,
                               workers=workers)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "estimate.csv", "w") as fh:
        fh.write("x,t,p_hat,stderr,lo,hi,n\n")
        fh.write(f"{x:.17g},{t:.17g},{est.p_hat:.17g},{est.stderr:.17g},"
                 f"{est.ci95[0]:.17g},{est.ci95[1]:.17g},{est.n}\n")
    write_manifest(out, "estimate", cfg)
    print(f"p_hat = {est.p_hat:.6f} +- {est.stderr:.6f} (n={est.n})")
    return 0


def cmd_assumption_report(cfg: RunConfig, out: Path) -> int:
    params_alpha = cfg.get_float("alpha", 1.5)
    preset_name = cfg.get("preset", "log")
    if preset_name == "log":
        preset = ScalingPreset.log_example()
    elif preset_name == "power_example":
        preset = ScalingPreset.power_example(params_alpha)
    else:
        preset = ScalingPreset.power(cfg.get_float("delta"), params_alpha)
    grid = cfg.get_floats("eps_grid", "1e-2,1e-3,1e-4,1e-5,1e-6")
    rows = estimator.assumption_report(preset, params_alpha, grid)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "assumptions.csv", "w") as fh:
        fh.write("expression,decreasing_tail," +
                 ",".join(f"eps_{i}" for i in range(len(grid))) + "\n")
        for r in rows:
            fh.write(f"\"{r.expression}\",{r.decreasing_tail}," +
                     ",".join(f"{v:.8g}" for v in r.values) + "\n")
    write_manifest(out, "assumption-report", cfg)
    ok = all(r.decreasing_tail for r in rows)
    for r in rows:
        print(f"{'PASS' if r.decreasing_tail else 'FAIL'}  {r.expression}")
    return 0 if ok else 1


def cmd_oracle_run(cfg: RunConfig, out: Path) -> int:
    params = params_from_config(cfg)
    dim = cfg.get_int("dim", 1)
    L = cfg.get_float("L", 24.0)
    N = cfg.get_int("N", 1024)
    T = cfg.get_float("T", params.epsilon ** 2)
    dt = cfg.get_float("dt", 0.1 * params.epsilon ** 2)
    if dim == 1:
        init = oracle.smoothed_step_1d(L, N)
    else:
        init = oracle.radial_step_2d(L, N, cfg.get_float("r0", 1.0))
    res = oracle.solve(params, init, T, dt)
    snap = res.snapshots[-1]
    out.mkdir(parents=True, exist_ok=True)
    (out / "field.bin").write_bytes(snap.to_bytes())
    ax = snap.axis()
    cut = snap.center_cut()
    with open(out / "cut.csv", "w") as fh:
        fh.write("x,u\n")
        for xv, uv in zip(ax, cut):
            fh.write(f"{xv:.17g},{uv:.17g}\n")
    write_manifest(out, "oracle-run", cfg)
    print(f"solved to t={snap.time:.6g}; max overshoot {res.max_overshoot:.2e}")
    return 0


def cmd_mcf_track(cfg: RunConfig, out: Path) -> int:
    params = params_from_config(cfg)
    L = cfg.get_float("L", 2.5)
    N = cfg.get_int("N", 256)
    r0 = cfg.get_float("r0", 1.0)
    times = cfg.get_floats("times", "0.05,0.1,0.15,0.2,0.25,0.3")
    dt = cfg.get_float("dt", 0.1 * params.epsilon ** 2)
    init = oracle.radial_step_2d(L, N, r0)
    res = oracle.solve(params, init, times[-1], dt, snapshot_times=times)
    band = params.I_val * abs(math.log(params.epsilon)) \
        if not params.is_brownian else \
        params.epsilon * abs(math.log(params.epsilon))
    rows = []
    worst_c = 0.0
    for snap in res.snapshots:
        r = geometry.level_set_radius(snap)
        exact = math.sqrt(max(r0 * r0 - 2.0 * snap.time, 0.0))
        c = abs(r - exact) / band
        worst_c = max(worst_c, c)
        rows.append((snap.time, r, exact, c))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "radius.csv", "w") as fh:
        fh.write("t,radius,exact,c_fitted\n")
        for row in rows:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
    write_manifest(out, "mcf-track", cfg)
    print(f"fitted c = {worst_c:.3f} (band = {band:.4f})")
    return 0 if worst_c <= cfg.get_float("c_max", 5.0) else 1


def cmd_coupling_check(cfg: RunConfig, out: Path) -> int:
    from . import acceptance

    seed = cfg.get_int("seed", 2)
    n = cfg.get_int("n", 20_000)
    workers = cfg.get_int("workers", 1)
    checks = CheckList()
    acceptance.run_coupling_battery(checks, n=n, seed=seed, workers=workers)
    checks.write(out, "coupling_check.json")
    write_manifest(out, "coupling-check", cfg)
    return 0 if checks.all_passed else 1


def cmd_acceptance(cfg: RunConfig, out: Path) -> int:
    from . import acceptance

    workers = cfg.get_int("workers", 1)
    results = acceptance.run_all(workers=workers)
    out.mkdir(parents=True, exist_ok=True)
    payload = [{"criterion": r.number, "name": r.name, "passed": r.passed,
                "lines": r.lines} for r in results]
    (out / "acceptance.json").write_text(json.dumps(payload, indent=2) + "\n")
    write_manifest(out, "acceptance", cfg)
    ok = all(r.passed for r in results)
    print("acceptance:", "ALL PASS" if ok else "FAILURES PRESENT")
    return 0 if ok else 1


_COMMANDS = {
    "subordinator-stats": cmd_subordinator_stats,
    "vote-math": cmd_vote_math,
    "estimate": cmd_estimate,
    "coupling-check": cmd_coupling_check,
    "oracle-run": cmd_oracle_run,
    "mcf-track": cmd_mcf_track,
    "assumption-report": cmd_assumption_report,
    "acceptance": cmd_acceptance,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stablevote",
        description="Branching stable motion voting duals and their checks")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    args = parser.parse_args(argv)

    cfg = RunConfig()
    if args.config is not None:
        cfg = RunConfig.parse(Path(args.config).read_text())
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            parser.error(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(key, value)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.workers is not None:
        cfg.set("workers", args.workers)

    try:
        return _COMMANDS[args.command](cfg, args.out)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
