"""Batch front end: scenario file in, one CSV per (scheme, power) and a JSON summary out."""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import sdp
from .model import ChannelSet, SystemConfig, db_to_linear
from .perfect_region import RegionResult, region_sweep
from .robust_region import RobustSettings, robust_region_sweep
from .suboptimal import lower_bound_region, no_an_region, nonrobust_eval, power_split_region, tdma_region

SCHEMES = ("optimal", "robust", "power-split", "lower-bound", "no-an", "tdma", "nonrobust")
CSV_COLUMNS = ("tau_ms", "secrecy_rate", "multicast_rate_achieved", "qoms_slack", "rank_ratio_Qc",
               "rank_ratio_Q0", "rank_ratio_Qa", "solver_calls", "status")
# pointwise orderings checked in the summary: (higher, lower)
DOMINANCE = (("optimal", "power-split"), ("power-split", "no-an"), ("no-an", "tdma"),
             ("optimal", "no-an"), ("optimal", "robust"), ("robust", "no-an"),
             ("robust", "lower-bound"))
DOMINANCE_SLACK = 1e-4

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class ScenarioError(ValueError):
    def __init__(self, path: str, line: int | None, message: str):
        where = f"{path}:{line}" if line else path
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    name: str
    channels: np.ndarray
    radii: np.ndarray
    power_db: list
    grid_points: int
    schemes: list


@dataclass
class RunSpec:
    scenario: Scenario
    schemes: list
    power_db: list
    grid_points: int
    eps: float
    eps_b: float | None
    seed: int
    out: Path
    dump_covariances: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown scheme(s): {', '.join(unknown)}")
        if not self.power_db or not all(np.isfinite(p) for p in self.power_db):
            raise ValueError("powers must be finite")


# ---------------------------------------------------------------- scenario files

def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*\[?\s*{re.escape(key)}\b", line):
            return i
    return None


def resolve_scenario(name: str) -> tuple[str, str]:
    """Return (label, text) for a path or a bundled scenario name."""
    p = Path(name)
    if p.is_file():
        return str(p), p.read_text(encoding="utf-8")
    bundled = resources.files("secrecy_region") / "scenarios" / f"{name}.toml"
    if bundled.is_file():
        return f"<bundled:{name}>", bundled.read_text(encoding="utf-8")
    raise ScenarioError(name, None, "no such scenario file or bundled scenario")


def parse_scenario(text: str, label: str = "<scenario>") -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(label, int(m.group(1)) if m else None, str(exc)) from None

    def fail(key, msg):
        raise ScenarioError(label, _line_of(text, key), msg)

    ch = data.get("channels")
    if not isinstance(ch, dict) or "re" not in ch or "im" not in ch:
        fail("channels", "a [channels] table with 're' and 'im' arrays is required")
    try:
        re_part = np.asarray(ch["re"], dtype=float)
        im_part = np.asarray(ch["im"], dtype=float)
    except (TypeError, ValueError):
        fail("channels", "channel entries must be numeric")
    if re_part.ndim != 2 or re_part.shape != im_part.shape:
        fail("channels", f"'re' and 'im' must be matrices of equal shape, got {re_part.shape} "
                         f"and {im_part.shape}")
    H = re_part + 1j * im_part
    K = H.shape[0]
    if "radii" in data:
        radii = np.asarray(data["radii"], dtype=float)
        if radii.shape != (K,):
            fail("radii", f"expected {K} radii, got {radii.size}")
    else:
        radii = np.full(K, float(data.get("radius", 0.0)))
    power = data.get("power_db", [20.0])
    power = [power] if isinstance(power, (int, float)) else list(power)
    if not power or not all(isinstance(p, (int, float)) and np.isfinite(p) for p in power):
        fail("power_db", "power_db must be a finite number or a list of them")
    schemes = list(data.get("schemes", []))
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        fail("schemes", f"unknown scheme(s): {', '.join(map(str, bad))}")
    grid = data.get("grid_points", 25)
    if not isinstance(grid, int) or grid < 1:
        fail("grid_points", "grid_points must be a positive integer")
    try:
        ChannelSet(H, radii)
    except sdp.ValidationError as exc:
        fail("channels", str(exc))
    return Scenario(str(data.get("name", Path(label).stem)), H, radii, [float(p) for p in power],
                    grid, schemes)


# ---------------------------------------------------------------- running

def _config(spec: RunSpec, power_db: float) -> SystemConfig:
    sc = spec.scenario
    return SystemConfig(ChannelSet(sc.channels, sc.radii), db_to_linear(power_db), spec.eps,
                        spec.eps_b, spec.grid_points)


def run_scheme(scheme: str, config: SystemConfig, seed: int = 0) -> RegionResult:
    robust = not config.channel_set.is_perfect
    settings = RobustSettings.from_config(config)
    nominal = replace(config, channel_set=config.channel_set.with_radii(0.0))
    if scheme == "optimal":
        return region_sweep(nominal)
    if scheme == "robust":
        return robust_region_sweep(config, settings)
    if scheme == "power-split":
        return power_split_region(config, robust, settings=settings)
    if scheme == "lower-bound":
        return lower_bound_region(config, settings)
    if scheme == "no-an":
        return no_an_region(config, robust, settings)
    if scheme == "tdma":
        return tdma_region(config, robust, settings)
    if scheme == "nonrobust":
        return nonrobust_eval(config, settings, seed=seed)
    raise ValueError(f"unknown scheme {scheme!r}")


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def _status_cell(status: str) -> str:
    return re.sub(r"[,\r\n]+", ";", status)


def region_csv(result: RegionResult) -> str:
    rows = [",".join(CSV_COLUMNS)]
    for p in result.points:
        r = p.ranks
        rows.append(",".join([
            _fmt(p.tau_ms), _fmt(p.secrecy_rate), _fmt(p.multicast_rate_achieved), _fmt(p.qoms_slack),
            _fmt(r.rank_ratio_Qc if r else None), _fmt(r.rank_ratio_Q0 if r else None),
            _fmt(r.rank_ratio_Qa if r else None), _fmt(int(p.solver_calls)), _status_cell(p.status),
        ]))
    return "\n".join(rows) + "\n"


def covariance_json(result: RegionResult) -> str:
    def mat(M):
        M = np.asarray(M)
        return {"re": np.real(M).tolist(), "im": np.imag(M).tolist()}

    out = []
    for p in result.points:
        entry = {"tau_ms": p.tau_ms, "status": p.status}
        if p.triple is not None:
            entry.update(Q0=mat(p.triple.Q0), Qc=mat(p.triple.Qc), Qa=mat(p.triple.Qa))
        out.append(entry)
    return json.dumps(out, indent=1) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def _stem(scheme: str, power_db: float) -> str:
    return f"{scheme}_{power_db:g}dB"


def _job(spec: RunSpec, scheme: str, power_db: float) -> dict:
    """Run one combination, write its files, return its summary entry."""
    entry = {"scheme": scheme, "power_db": power_db}
    try:
        result = run_scheme(scheme, _config(spec, power_db), spec.seed)
    except Exception as exc:  # a failed combination must not take down the others
        entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
        return entry
    stem = _stem(scheme, power_db)
    _write_atomic(spec.out / f"{stem}.csv", region_csv(result))
    if spec.dump_covariances:
        _write_atomic(spec.out / f"{stem}_covariances.json", covariance_json(result))
    failures = [p.tau_ms for p in result.points if p.status.startswith("error")]
    budget = {k: v for k, v in result.budget.items()
              if k in ("per_point_bound", "per_point_max", "corner_secrecy", "corner_multicast",
                       "tau_max_split")}
    entry.update(status="partial" if failures else "ok", csv=f"{stem}.csv", tau_max=result.tau_max,
                 total_solver_calls=int(result.total_solver_calls), budget=budget,
                 failed_points=failures,
                 tau=[float(t) for t in result.tau],
                 secrecy=[None if not np.isfinite(s) else float(s) for s in result.secrecy])
    if "per_point_bound" in budget:
        entry["within_budget"] = bool(budget["per_point_max"] <= budget["per_point_bound"])
    return entry


def dominance_checks(entries: list) -> list:
    checks = []
    by_key = {(e["scheme"], e["power_db"]): e for e in entries if "secrecy" in e}
    powers = sorted({e["power_db"] for e in entries})
    for pw in powers:
        for hi, lo in DOMINANCE:
            a, b = by_key.get((hi, pw)), by_key.get((lo, pw))
            if a is None or b is None:
                continue
            worst, compared = np.inf, 0
            for t, s in zip(b["tau"], b["secrecy"]):
                if s is None:
                    continue
                match = [sa for ta, sa in zip(a["tau"], a["secrecy"])
                         if sa is not None and abs(ta - t) <= 1e-9 * max(1.0, abs(t))]
                if match:
                    worst = min(worst, match[0] - s)
                    compared += 1
            checks.append({"power_db": pw, "higher": hi, "lower": lo, "points_compared": compared,
                           "min_margin": None if compared == 0 else float(worst),
                           "holds": bool(compared == 0 or worst >= -DOMINANCE_SLACK)})
    return checks


def run(spec: RunSpec) -> int:
    spec.out.mkdir(parents=True, exist_ok=True)
    jobs = [(s, p) for p in spec.power_db for s in spec.schemes]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            entries = list(pool.map(_job, [spec] * len(jobs), *zip(*jobs)))
    else:
        entries = [_job(spec, s, p) for s, p in jobs]
    sc = spec.scenario
    summary = {
        "config": {
            "scenario": sc.name,
            "channels": {"re": np.real(sc.channels).tolist(), "im": np.imag(sc.channels).tolist()},
            "radii": sc.radii.tolist(), "schemes": spec.schemes, "power_db": spec.power_db,
            "grid_points": spec.grid_points, "eps": spec.eps,
            "eps_b": RobustSettings(spec.eps, spec.eps_b).eps_b, "seed": spec.seed,
        },
        "runs": entries,
        "dominance": dominance_checks(entries),
    }
    _write_atomic(spec.out / "summary.json", json.dumps(summary, indent=1) + "\n")
    if any(e["status"] != "ok" for e in entries):
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="secrecy-region", description=__doc__)
    ap.add_argument("--scenario", required=True, help="TOML scenario file or bundled name "
                    "(five_user, five_user_robust)")
    ap.add_argument("--schemes", help=f"comma-separated subset of {','.join(SCHEMES)}")
    ap.add_argument("--power-db", help="comma-separated transmit powers in dB")
    ap.add_argument("--grid", type=int, help="number of tau_ms grid points")
    ap.add_argument("--eps", type=float, default=0.01, help="outer search accuracy in bits")
    ap.add_argument("--eps-b", type=float, default=None, help="bisection tolerance")
    ap.add_argument("--radius", type=float, default=None, help="override every CSI error radius")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out")
    ap.add_argument("--dump-covariances", action="store_true")
    ap.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        label, text = resolve_scenario(args.scenario)
        sc = parse_scenario(text, label)
        if args.radius is not None:
            sc.radii = np.full(sc.channels.shape[0], args.radius)
            ChannelSet(sc.channels, sc.radii)
        schemes = sc.schemes if args.schemes is None else \
            [s.strip() for s in args.schemes.split(",") if s.strip()]
        powers = sc.power_db if args.power_db is None else \
            [float(p) for p in args.power_db.split(",") if p.strip()]
        spec = RunSpec(sc, schemes, powers, args.grid or sc.grid_points, args.eps, args.eps_b,
                       args.seed, Path(args.out), args.dump_covariances, max(1, args.workers))
        RobustSettings(spec.eps, spec.eps_b)
    except (ScenarioError, ValueError, sdp.ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        return run(spec)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
