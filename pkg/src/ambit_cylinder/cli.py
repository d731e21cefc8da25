"""Command-line front end.

    ambit-cylinder simulate     --config cfg.json [--seed S] [--out DIR] [--paths N] [--threads T]
    ambit-cylinder price        --config cfg.json [...]
    ambit-cylinder panel-stats  --input field.csv [--day-length-years D] [--out DIR]
    ambit-cylinder kernel-diag  --config cfg.json [--out DIR]

Exit codes: 0 success, 2 configuration or parse error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import __version__
from .geometry import AngularSet
from .kernels import (
    Kernel,
    KernelError,
    SemiParametricKernel,
    fourier_roundtrip_residual,
    kernel_from_dict,
    l2_kernel_distance,
    laplace_roundtrip_residual,
    project_kernel,
)
from .levy import CharacteristicQuadruplet, DomainError, EsscherTilt, seed_from_dict
from .pricing import (
    ConfigurationError,
    FuturesSpec,
    InversionError,
    PricingModel,
    SpreadSpec,
    futures_price_mc,
    mc_mean,
    option_chain,
    spread_payoffs,
)
from .simulate import FieldPath, FieldSimulator, SimulationGrid, VolatilityFieldSpec, truncation_error_bound
from .tables import ParseError, read_numeric_csv, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DAY_YEARS = 1.0 / 365.0


class ConfigError(ValueError):
    """Invalid scenario; ``errors`` lists every violation found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# --- configuration ------------------------------------------------------------------


@dataclass
class ScenarioConfig:
    kernel: Kernel
    quad: CharacteristicQuadruplet
    vol: VolatilityFieldSpec
    grid: SimulationGrid
    pricing: list = field(default_factory=list)
    output_dir: str = "out"
    paths: int = 1
    threads: int = 1
    tilt_q: float = 0.0
    seasonal_level: float = 0.0
    day_length_years: float = DAY_YEARS
    projection_orders: tuple = tuple(range(7))
    truncation_orders: tuple = tuple(range(5))
    raw: dict = field(default_factory=dict)

    def model(self) -> PricingModel:
        tilt = EsscherTilt(self.tilt_q) if self.tilt_q else None
        grid = self.grid if self.grid.burn_in is not None else replace(self.grid, burn_in=0.0)
        return PricingModel(self.kernel, self.quad, grid, self.vol, self.seasonal_level, tilt)


_TOP_KEYS = {
    "kernel", "levy_seed", "volatility", "grid", "pricing", "output_dir", "paths", "threads",
    "rng_seed", "esscher_q", "seasonal_level", "day_length_years", "diagnostics",
}


def _angular(value, label, errors, other: AngularSet | None = None):
    if value == "complement":
        if other is None:
            errors.append(f"{label}: 'complement' needs H1_radians to be valid")
            return None
        return other.complement()
    try:
        return AngularSet.from_pairs(value)
    except (TypeError, ValueError) as exc:
        errors.append(f"{label}: {exc}")
        return None


def _pricing_item(i: int, d: dict, errors: list) -> dict | None:
    label = f"pricing[{i}]"
    if not isinstance(d, dict):
        errors.append(f"{label}: must be an object")
        return None
    prod = d.get("product")
    if prod not in ("futures", "spread", "spread_option"):
        errors.append(f"{label}.product: must be one of futures, spread, spread_option")
        return None
    out = {"product": prod}
    try:
        t1, t2 = float(d["tau1_years"]), float(d["tau2_years"])
    except (KeyError, TypeError, ValueError):
        errors.append(f"{label}: tau1_years and tau2_years are required numbers")
        return None
    if prod == "futures":
        try:
            out["spec"] = FuturesSpec(t1, t2, float(d.get("strike", 0.0)))
        except ConfigurationError as exc:
            errors.append(f"{label}: {exc}")
            return None
    else:
        H1 = _angular(d.get("H1_radians", [[2 * math.pi / 3, 5 * math.pi / 3]]), f"{label}.H1_radians", errors)
        H2 = _angular(d.get("H2_radians", "complement"), f"{label}.H2_radians", errors, H1)
        if H1 is None or H2 is None:
            return None
        try:
            out["spec"] = SpreadSpec(t1, t2, H1, H2)
        except ConfigurationError as exc:
            errors.append(f"{label}: {exc}")
            return None
    if prod == "spread_option":
        strikes = d.get("strikes", [round(-0.05 + 0.01 * k, 10) for k in range(11)])
        try:
            out["strikes"] = [float(s) for s in strikes]
        except (TypeError, ValueError):
            errors.append(f"{label}.strikes: must be numbers")
            return None
    if "paths" in d:
        out["paths"] = d["paths"]
    return out


def parse_config(raw: dict, overrides: dict | None = None) -> ScenarioConfig:
    """Validate a config mapping; collects all problems before raising :class:`ConfigError`."""
    overrides = overrides or {}
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    data = {k: v for k, v in raw.items() if not k.startswith("_")}
    for k in sorted(set(data) - _TOP_KEYS):
        errors.append(f"{k}: unknown field")

    kernel = quad = vol = grid = None
    kd = data.get("kernel")
    if not isinstance(kd, dict):
        errors.append("kernel: required object")
    elif "family" not in kd:
        errors.append("kernel.family: required")
    else:
        try:
            kernel = kernel_from_dict(kd)
        except (TypeError, ValueError, KeyError) as exc:
            errors.append(f"kernel: {exc}")

    sd = data.get("levy_seed")
    if not isinstance(sd, dict) or "family" not in sd:
        errors.append("levy_seed.family: required")
    else:
        try:
            quad = CharacteristicQuadruplet(seed_from_dict(sd))
        except (TypeError, ValueError, KeyError) as exc:
            errors.append(f"levy_seed: {exc}")

    try:
        vol = VolatilityFieldSpec.from_dict(data.get("volatility", {"kind": "constant", "value": 1.0}))
    except (TypeError, ValueError) as exc:
        errors.append(f"volatility: {exc}")

    gd = dict(data.get("grid", {}))
    seed = overrides.get("seed", data.get("rng_seed", gd.get("seed", 0)))
    gd["seed"] = seed
    try:
        if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        grid = SimulationGrid.from_dict(gd)
        if kernel is not None:
            # burn-in stays unresolved here: its default depends on the command
            grid = replace(grid, z_r=grid.resolve(kernel).z_r)
            grid.contour()
    except (TypeError, ValueError, KeyError) as exc:
        errors.append(f"grid: {exc}")

    paths = overrides.get("paths", data.get("paths", 1))
    threads = overrides.get("threads", data.get("threads", 1))
    if not isinstance(paths, int) or paths < 1:
        errors.append("paths: must be an integer >= 1")
    if not isinstance(threads, int) or threads < 1:
        errors.append("threads: must be an integer >= 1")

    pricing = []
    for i, item in enumerate(data.get("pricing", [])):
        p = _pricing_item(i, item, errors)
        if p is None:
            continue
        if "paths" in overrides:
            p["paths"] = overrides["paths"]
        p.setdefault("paths", paths)
        if not isinstance(p["paths"], int) or p["paths"] < 1:
            errors.append(f"pricing[{i}].paths: must be an integer >= 1")
        pricing.append(p)

    q = data.get("esscher_q", 0.0)
    diag = data.get("diagnostics", {})
    day = data.get("day_length_years", DAY_YEARS)
    if not (isinstance(day, (int, float)) and day > 0):
        errors.append("day_length_years: must be > 0")
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        kernel, quad, vol, grid, pricing,
        output_dir=overrides.get("out", data.get("output_dir", "out")),
        paths=paths, threads=threads, tilt_q=float(q),
        seasonal_level=float(data.get("seasonal_level", 0.0)),
        day_length_years=float(day),
        projection_orders=tuple(diag.get("projection_orders", range(7))),
        truncation_orders=tuple(diag.get("truncation_orders", range(5))),
        raw=data,
    )


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"{path}: file not found"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno}: {exc.msg}"]) from None
    return parse_config(raw, overrides)


def resolved_manifest(cfg: ScenarioConfig, command: str, grid: SimulationGrid | None = None) -> dict:
    """Config with every default filled in; loading it reproduces the run."""
    grid = grid or cfg.grid
    m = {
        "kernel": cfg.kernel.to_dict(),
        "levy_seed": cfg.quad.seed.to_dict(),
        "volatility": cfg.vol.to_dict(),
        "grid": grid.to_dict(),
        "rng_seed": grid.seed,
        "paths": cfg.paths,
        "threads": cfg.threads,
        "output_dir": cfg.output_dir,
        "esscher_q": cfg.tilt_q,
        "seasonal_level": cfg.seasonal_level,
        "day_length_years": cfg.day_length_years,
        "diagnostics": {
            "projection_orders": list(cfg.projection_orders),
            "truncation_orders": list(cfg.truncation_orders),
        },
        "pricing": [_pricing_to_dict(p) for p in cfg.pricing],
        "_meta": {"command": command, "package_version": __version__},
    }
    return m


def _pricing_to_dict(p: dict) -> dict:
    spec = p["spec"]
    d = {"product": p["product"], "tau1_years": spec.tau1, "tau2_years": spec.tau2, "paths": p["paths"]}
    if isinstance(spec, FuturesSpec):
        d["strike"] = spec.strike
    else:
        d["H1_radians"] = [list(iv) for iv in spec.H1.intervals]
        d["H2_radians"] = [list(iv) for iv in spec.H2.intervals]
    if "strikes" in p:
        d["strikes"] = list(p["strikes"])
    return d


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- commands -------------------------------------------------------------------------


def cmd_simulate(cfg: ScenarioConfig) -> list[str]:
    os.makedirs(cfg.output_dir, exist_ok=True)
    centred, m = cfg.quad.seed.centered()
    sim = FieldSimulator(cfg.kernel, centred, cfg.vol, cfg.grid, drift=m)
    g = sim.grid
    header = ["t"] + [f"theta_{l}" for l in range(1, g.H + 1)]
    times = g.record_times()
    written = []
    k = 0
    for ch in sim.chunks(cfg.paths, cfg.threads):
        for p in range(ch.fields.shape[0]):
            fp = FieldPath(ch.fields[p], g, None, ch.max_imag_residual)
            stem = os.path.join(cfg.output_dir, "field" if cfg.paths == 1 else f"field_{k:05d}")
            written.append(write_csv(stem + ".csv", header, ([t, *row] for t, row in zip(times, fp.values))))
            if cfg.vol.kind != "constant":
                vol = np.repeat(ch.volatility[p][:, None], g.H, axis=1)
                written.append(write_csv(stem + "_volatility.csv", header,
                                         ([t, *row] for t, row in zip(times, vol))))
            k += 1
    _write_json(os.path.join(cfg.output_dir, "manifest.json"), resolved_manifest(cfg, "simulate", g))
    return written


def cmd_price(cfg: ScenarioConfig) -> list[str]:
    if not cfg.pricing:
        raise ConfigError(["pricing: at least one product is required for the price command"])
    os.makedirs(cfg.output_dir, exist_ok=True)
    model = cfg.model()
    written = []
    header = ["strike", "price", "stderr", "implied_vol"]
    for i, p in enumerate(cfg.pricing):
        spec, prod, n = p["spec"], p["product"], p["paths"]
        stem = os.path.join(cfg.output_dir, f"price_{i:02d}_{prod}")
        meta = {"product": prod, "paths": n, "seed": cfg.grid.seed, "grid": model.grid.to_dict(),
                "tau1_years": spec.tau1, "tau2_years": spec.tau2}
        if prod == "futures":
            price, se = futures_price_mc(model, spec, n, cfg.threads)
            rows = [[spec.strike, price, se, None]]
            meta["expectation"] = price + spec.strike
            meta["price_definition"] = "time-space average expectation minus strike"
        else:
            X = spread_payoffs(model, spec, n, cfg.threads)
            if prod == "spread":
                m, se = mc_mean(X)
                rows = [[None, m, se, None]]
            else:
                quotes = option_chain(X, p["strikes"], maturity=spec.tau1)
                rows = [[q.strike, q.price, q.stderr, q.implied_vol] for q in quotes]
                fwd, fse = mc_mean(X)
                meta.update(forward=fwd, forward_stderr=fse, maturity_years=spec.tau1,
                            iv_stderr=[q.iv_stderr for q in quotes])
        written.append(write_csv(stem + ".csv", header, rows))
        _write_json(stem + ".json", meta)
    _write_json(os.path.join(cfg.output_dir, "manifest.json"), resolved_manifest(cfg, "price", model.grid))
    return written


@dataclass
class PanelStats:
    corr: np.ndarray
    adjacency: float
    cyclicality: float
    antipodal: float
    autocorr: np.ndarray
    days: int


def daily_sample(times: np.ndarray, values: np.ndarray, day_length: float = DAY_YEARS) -> np.ndarray:
    """Rows at the last grid time of each day (day ``d`` covers ``(d * len, (d + 1) * len]``)."""
    day = np.ceil(np.asarray(times) / day_length - 1e-9).astype(np.int64)
    last = np.flatnonzero(np.r_[day[1:] != day[:-1], True])
    return values[last]


def panel_stats(panel: np.ndarray) -> PanelStats:
    """Stylised dependence scores for a (days x H) panel."""
    D, H = panel.shape
    if D < 2:
        raise ParseError("panel statistics need at least 2 days")
    corr = np.corrcoef(panel, rowvar=False).reshape(H, H)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    adj = float(np.mean([corr[l, l + 1] for l in range(H - 1)])) if H > 1 else float("nan")
    anti = float(np.mean([corr[l, (l + H // 2) % H] for l in range(H)])) if H > 1 else float("nan")
    cyc = float(np.corrcoef(panel[:-1, -1], panel[1:, 0])[0, 1])
    ac = np.array([np.corrcoef(panel[:-1, l], panel[1:, l])[0, 1] for l in range(H)])
    return PanelStats(corr, adj, cyc, anti, ac, D)


def cmd_panel_stats(input_path, out_dir: str, day_length: float = DAY_YEARS) -> list[str]:
    header, data = read_numeric_csv(input_path)
    if len(header) < 2 or header[0] != "t":
        raise ParseError(f"{input_path}: line 1: header must be t,theta_1..theta_H")
    if np.isnan(data).any():
        raise ParseError(f"{input_path}: empty cells are not allowed in a panel")
    panel = daily_sample(data[:, 0], data[:, 1:], day_length)
    st = panel_stats(panel)
    os.makedirs(out_dir, exist_ok=True)
    H = panel.shape[1]
    cols = header[1:]
    w1 = write_csv(os.path.join(out_dir, "panel_corr.csv"), ["slot", *cols],
                   ([cols[i], *st.corr[i]] for i in range(H)))
    rows = [["days", "", st.days], ["adjacency", "", st.adjacency], ["cyclicality", "", st.cyclicality],
            ["antipodal", "", st.antipodal]]
    rows += [["lag1_autocorrelation", cols[l], st.autocorr[l]] for l in range(H)]
    w2 = write_csv(os.path.join(out_dir, "panel_scores.csv"), ["statistic", "slot", "value"], rows)
    return [w1, w2]


def kernel_diagnostics(cfg: ScenarioConfig) -> list[tuple[str, str, float]]:
    k, g = cfg.kernel, cfg.grid
    rows = [("certificate_M", "", k.M), ("certificate_gamma_decay", "", k.gamma_decay)]
    for N in cfg.truncation_orders:
        b = truncation_error_bound(k, cfg.quad, cfg.vol.second_moment, g.z_r, int(N), g)
        rows.append(("truncation_bound", f"N={int(N)}", b))
    for n in cfg.projection_orders:
        rows.append(("projection_error", f"order={int(n)}", l2_kernel_distance(k, project_kernel(k, int(n)))))
    n_max = max(abs(n) for n in k.fourier_support) if k.fourier_support else 8
    xi = np.linspace(0.0, 2 * math.pi, 37)
    fr = max(fourier_roundtrip_residual(k, t, h, xi, n_max) for t in (0.1, 0.5, 1.0, 2.0) for h in g.angles[:4])
    rows.append(("fourier_roundtrip_max_abs", f"n_max={n_max}", fr))
    for n in range(0, n_max + 1):
        lr = max(laplace_roundtrip_residual(k, h, n) for h in g.angles[:4])
        rows.append(("laplace_roundtrip_max_abs", f"n={n}", lr))
    return rows


def cmd_kernel_diag(cfg: ScenarioConfig) -> list[str]:
    os.makedirs(cfg.output_dir, exist_ok=True)
    rows = kernel_diagnostics(cfg)
    w = write_csv(os.path.join(cfg.output_dir, "kernel_diag.csv"), ["diagnostic", "parameter", "value"], rows)
    _write_json(os.path.join(cfg.output_dir, "manifest.json"), resolved_manifest(cfg, "kernel-diag", cfg.grid.resolve(cfg.kernel)))
    return [w]


# --- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ambit-cylinder", description="Ambit fields on a cylinder")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "price", "kernel-diag"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--paths", type=int)
        sp.add_argument("--threads", type=int)
    sp = sub.add_parser("panel-stats")
    sp.add_argument("--input", required=True, help="field CSV with header t,theta_1..theta_H")
    sp.add_argument("--out", default=".")
    sp.add_argument("--day-length-years", type=float, default=DAY_YEARS)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "panel-stats":
            files = cmd_panel_stats(args.input, args.out, args.day_length_years)
        else:
            ov = {k: v for k, v in (("seed", args.seed), ("out", args.out), ("paths", args.paths),
                                    ("threads", args.threads)) if v is not None}
            cfg = load_config(args.config, ov)
            run = {"simulate": cmd_simulate, "price": cmd_price, "kernel-diag": cmd_kernel_diag}
            files = run[args.command](cfg)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ConfigurationError, DomainError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KernelError, InversionError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
