"""Command-line front end: factorize, filter, minimax, simulate, verify.

Every run is driven by a flat ``key = value`` problem file; flags only
override tolerances, seeds and output options.  Artifacts go to the output
directory and the report is echoed to stdout.

Exit status: 0 success, 1 domain error (non-PD density, infeasible class,
no convergence), 2 verification failure, 3 I/O, parse or parameter error.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import minimax, oracle, textio
from .blocking import BlockedSequence, SampledPath, block_weights
from .errors import ConvergenceError, DomainError, NumericalInconsistencyError, PCFilterError
from .filtering import ROUTES, FilterFactors, _factor_or_zero, choose_inverse_order, invert_factor, solve_filter
from .spectral import (
    DEFAULT_GRID_SIZE,
    MatrixMAPolynomial,
    SpectralDensityGrid,
    density_from_ma,
    factorize,
    inverse_defect,
)
from .textio import FormatError

EXIT_OK, EXIT_DOMAIN, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("factorize", "filter", "minimax", "simulate", "verify")


class ConfigError(FormatError):
    """A configuration value is missing or invalid; the message names the key."""


# ---------------------------------------------------------------------------
# configuration

_SOURCE_RE = re.compile(r"^\s*(white|ma|file|zero)\s*(?:\(\s*(.*?)\s*\))?\s*$")


@dataclass(frozen=True)
class Source:
    """A density given as ``white(s2)``, ``ma(c0, c1, ...)``, ``zero`` or ``file(path)``."""

    kind: str
    values: tuple = ()
    path: Optional[Path] = None


@dataclass(frozen=True)
class ProblemConfig:
    K: Optional[int] = None
    F: int = DEFAULT_GRID_SIZE
    L: Optional[int] = None
    Lb: Optional[int] = None
    signal: Optional[Source] = None
    noise: Optional[Source] = None
    weights: Optional[np.ndarray] = None
    route: str = "via_g"
    factor_tol: float = 1e-10
    seed: int = 0
    out_dir: Path = Path("out")
    # minimax
    p: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    order: int = 2
    restarts: int = 8
    search_grid: int = 256
    stationarity_tol: float = 1e-6
    probes: int = 1000
    # simulate / verify
    paths: Optional[int] = None  # verify: 100000, simulate: 1
    horizon: Optional[int] = None
    oracle_horizon: int = 200
    oracle_tol: float = 1e-4
    route_tol: float = 1e-8
    mc_band: float = oracle.MC_SIGMA_BAND


_INT_KEYS = {"K", "F", "L", "Lb", "seed", "order", "restarts", "search_grid", "probes", "paths", "horizon",
             "oracle_horizon"}
_FLOAT_KEYS = {"factor_tol", "stationarity_tol", "oracle_tol", "route_tol", "mc_band"}
_KNOWN = _INT_KEYS | _FLOAT_KEYS | {
    "signal", "noise", "weights", "weights_file", "weights_samples", "weights_period", "route", "out_dir",
    "p", "q", "class_file",
}


def _int(key, value, minimum=0) -> int:
    try:
        out = int(value)
    except ValueError:
        raise ConfigError(f"parameter {key}: expected an integer, got {value!r}") from None
    if out < minimum:
        raise ConfigError(f"parameter {key}: must be >= {minimum}, got {out}")
    return out


def _float(key, value, positive=True) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ConfigError(f"parameter {key}: expected a number, got {value!r}") from None
    if positive and not out > 0:
        raise ConfigError(f"parameter {key}: must be positive, got {out}")
    return out


def _number_list(key, text) -> list[complex]:
    out = []
    for tok in re.split(r"[,\s]+", text.strip()):
        if not tok:
            continue
        try:
            out.append(complex(tok.replace("i", "j")) if ("j" in tok or "i" in tok) else float(tok))
        except ValueError:
            raise ConfigError(f"parameter {key}: cannot parse number {tok!r}") from None
    if not out:
        raise ConfigError(f"parameter {key}: empty list")
    return out


def _parse_source(key, text, base: Path) -> Source:
    m = _SOURCE_RE.match(text)
    if not m:
        raise ConfigError(f"parameter {key}: expected white(s2), ma(c0, c1, ...), zero or file(path), got {text!r}")
    kind, arg = m.group(1), m.group(2)
    if kind == "zero":
        return Source("zero")
    if arg is None or arg == "":
        raise ConfigError(f"parameter {key}: {kind}(...) needs an argument")
    if kind == "file":
        path = Path(arg)
        return Source("file", path=path if path.is_absolute() else base / path)
    values = tuple(_number_list(key, arg))
    if kind == "white" and (len(values) != 1 or not np.isreal(values[0]) or values[0].real < 0):
        raise ConfigError(f"parameter {key}: white(s2) needs one nonnegative variance")
    return Source(kind, values)


def _parse_weights(key, text) -> np.ndarray:
    # "1, 0.5" for K = 1; "1 0; 0.5 0.2" for vectors, one per lag
    rows = [_number_list(key, part) for part in text.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"parameter {key}: all weight vectors must have the same length")
    arr = np.asarray(rows, dtype=complex)
    return arr.T if len(rows) == 1 else arr


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: Path, overrides: Optional[dict] = None) -> ProblemConfig:
    """Parse a problem file; ``overrides`` (string values) win over the file."""
    raw = textio.read_key_values(path)
    raw.update(overrides or {})
    base = Path(path).parent
    unknown = sorted(set(raw) - _KNOWN)
    if unknown:
        raise ConfigError(f"{path}: unknown parameter(s) {', '.join(unknown)}")
    kw: dict = {}
    for key in _INT_KEYS & raw.keys():
        kw[key] = _int(key, raw[key], minimum=1 if key in {"K", "F", "paths", "horizon", "oracle_horizon",
                                                          "restarts", "search_grid"} else 0)
    for key in _FLOAT_KEYS & raw.keys():
        kw[key] = _float(key, raw[key])
    for key in ("signal", "noise"):
        if key in raw:
            kw[key] = _parse_source(key, raw[key], base)
    if "route" in raw:
        if raw["route"] not in ROUTES:
            raise ConfigError(f"parameter route: expected one of {', '.join(ROUTES)}, got {raw['route']!r}")
        kw["route"] = raw["route"]
    if "out_dir" in raw:
        kw["out_dir"] = _resolve(base, raw["out_dir"])
    if "weights" in raw and "weights_file" in raw:
        raise ConfigError("parameters weights and weights_file are mutually exclusive")
    if "weights" in raw:
        kw["weights"] = _parse_weights("weights", raw["weights"])
    elif "weights_file" in raw:
        kw["weights"] = _load_weights(_resolve(base, raw["weights_file"]), raw, kw.get("K"))
    if "class_file" in raw:
        cls = textio.read_key_values(_resolve(base, raw["class_file"]))
        for key in ("p", "q"):
            if key not in cls:
                raise ConfigError(f"{raw['class_file']}: missing {key}")
            raw.setdefault(key, cls[key])
        if "K" in cls:
            kw.setdefault("K", _int("K", cls["K"], 1))
    for key in ("p", "q"):
        if key in raw:
            vals = np.asarray(_number_list(key, raw[key]), dtype=complex)
            if np.any(vals.imag != 0) or np.any(vals.real < 0):
                raise ConfigError(f"parameter {key}: moments must be nonnegative reals")
            kw[key] = vals.real
    return ProblemConfig(**kw)


def _load_weights(path: Path, raw: dict, K: Optional[int]) -> np.ndarray:
    if not path.exists():
        raise FormatError(f"weights file {path} not found")
    first = next((line for _, line in textio._read_lines(path)), "")
    if first.split()[:1] == ["weights"]:
        return textio.read_vector_series(path, "weights")
    # sampled weight function: needs samples per period and the block count K
    missing = [k for k in ("weights_samples", "weights_period") if k not in raw]
    if missing or K is None:
        need = ", ".join(missing + (["K"] if K is None else []))
        raise ConfigError(f"sampled weights in {path} need parameter(s) {need}")
    N = _int("weights_samples", raw["weights_samples"], 1)
    T = _float("weights_period", raw["weights_period"])
    samples = textio.read_complex_column(path)
    try:
        return block_weights(SampledPath(T, N, samples), T, N, K).coeffs
    except DomainError as exc:
        raise ConfigError(f"weights file {path}: {exc}") from None


# ---------------------------------------------------------------------------
# problem assembly


@dataclass
class _Density:
    grid: SpectralDensityGrid
    factor: Optional[MatrixMAPolynomial]  # a causal factor when known exactly


def _source_density(name: str, src: Optional[Source], K: int, F: int) -> _Density:
    if src is None:
        raise ConfigError(f"parameter {name} is required")
    if src.kind == "zero":
        return _Density(SpectralDensityGrid.zeros(K, F), MatrixMAPolynomial.zeros(K))
    if src.kind == "white":
        s2 = float(np.real(src.values[0]))
        poly = MatrixMAPolynomial(math.sqrt(s2) * np.eye(K)[None])
        return _Density(density_from_ma(poly, F), poly)
    if src.kind == "ma":
        c = np.asarray(src.values, dtype=complex)
        poly = MatrixMAPolynomial(c[:, None, None] * np.eye(K)[None])
        return _Density(density_from_ma(poly, F), poly)
    if not src.path.exists():
        raise FormatError(f"{name} file {src.path} not found")
    kind, arr = textio.read_matrix_series(src.path)
    if arr.shape[1] != K:
        raise ConfigError(f"{name} file {src.path} has K={arr.shape[1]}, problem has K={K}")
    if kind == "ma":
        poly = MatrixMAPolynomial(arr)
        return _Density(density_from_ma(poly, F), poly)
    if arr.shape[0] != F:
        raise ConfigError(f"{name} file {src.path} is sampled on F={arr.shape[0]} points, parameter F={F}")
    return _Density(SpectralDensityGrid(arr), None)


def _infer_K(cfg: ProblemConfig) -> int:
    candidates = {}
    if cfg.K is not None:
        candidates["K"] = cfg.K
    if cfg.weights is not None:
        candidates["weights"] = cfg.weights.shape[1]
    for name in ("p", "q"):
        if getattr(cfg, name) is not None:
            candidates[name] = getattr(cfg, name).size
    for name in ("signal", "noise"):
        src = getattr(cfg, name)
        if src is not None and src.kind == "file" and src.path.exists():
            candidates[name] = textio.read_matrix_series(src.path)[1].shape[1]
    if not candidates:
        return 1
    if len(set(candidates.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in candidates.items())
        raise ConfigError(f"inconsistent dimension K across parameters: {detail}")
    return next(iter(candidates.values()))


def _order(cfg: ProblemConfig, *dens: _Density) -> int:
    if cfg.L is not None:
        return cfg.L
    orders = [d.factor.L for d in dens if d.factor is not None]
    if len(orders) < len(dens):
        raise ConfigError("parameter L is required when a density is given on a grid")
    return max(orders + [0])


@dataclass
class _Problem:
    K: int
    f: _Density
    g: _Density
    a: np.ndarray
    L: int


def _problem(cfg: ProblemConfig) -> _Problem:
    K = _infer_K(cfg)
    if cfg.weights is None:
        raise ConfigError("parameter weights (or weights_file) is required")
    f = _source_density("signal", cfg.signal, K, cfg.F)
    g = _source_density("noise", cfg.noise, K, cfg.F)
    return _Problem(K, f, g, cfg.weights, _order(cfg, f, g))


def _factors(cfg: ProblemConfig, prob: _Problem) -> FilterFactors:
    d = factorize(prob.f.grid + prob.g.grid, prob.L, tol=cfg.factor_tol)
    Lb = cfg.Lb if cfg.Lb is not None else choose_inverse_order(d, prob.a.shape[0] - 1)
    b = invert_factor(d, Lb)
    phi = prob.f.factor if prob.f.factor is not None else _factor_or_zero(prob.f.grid, prob.L, cfg.factor_tol)
    psi = prob.g.factor if prob.g.factor is not None else _factor_or_zero(prob.g.grid, prob.L, cfg.factor_tol)
    return FilterFactors(d, b, phi, psi)


# ---------------------------------------------------------------------------
# commands


def _ma_residual(S: SpectralDensityGrid, c: Optional[MatrixMAPolynomial]) -> Optional[float]:
    return None if c is None else minimax._factor_residual(S, c)


def cmd_factorize(cfg: ProblemConfig, out: Path) -> tuple[dict, int]:
    prob = _problem(cfg)
    fac = _factors(cfg, prob)
    textio.write_matrix_series(out / "d.txt", "ma", fac.d.coeffs)
    textio.write_matrix_series(out / "b.txt", "ma", fac.b.coeffs)
    report = {
        "command": "factorize",
        "K": prob.K,
        "F": cfg.F,
        "L": prob.L,
        "Lb": fac.b.L,
        "residual_d": minimax._factor_residual(prob.f.grid + prob.g.grid, fac.d),
        "inverse_defect": inverse_defect(fac.d, fac.b),
    }
    for name, c, S in (("phi", fac.phi, prob.f.grid), ("psi", fac.psi, prob.g.grid)):
        if c is not None:
            textio.write_matrix_series(out / f"{name}.txt", "ma", c.coeffs)
        report[f"residual_{name}"] = _ma_residual(S, c)
    return report, EXIT_OK


def cmd_filter(cfg: ProblemConfig, out: Path) -> tuple[dict, int]:
    prob = _problem(cfg)
    sol = solve_filter(prob.f.grid, prob.g.grid, prob.a, prob.L, route=cfg.route, factors=_factors(cfg, prob))
    textio.write_vector_series(out / "h.txt", "filter", sol.h.h_coeffs)
    report = {"command": "filter", "K": prob.K, "J": prob.a.shape[0] - 1, "Jh": sol.h.Jh}
    report.update(sol.report.as_dict())
    return report, EXIT_OK


def cmd_minimax(cfg: ProblemConfig, out: Path) -> tuple[dict, int]:
    if cfg.p is None or cfg.q is None:
        raise ConfigError("parameters p and q (or class_file) are required")
    if cfg.weights is None:
        raise ConfigError("parameter weights (or weights_file) is required")
    _infer_K(cfg)
    cls = minimax.DensityClassD00(cfg.p, cfg.q)
    opts = minimax.SolverOptions(
        order=cfg.order if cfg.L is None else cfg.L,
        grid_size=cfg.search_grid,
        final_grid_size=cfg.F,
        stationarity_tol=cfg.stationarity_tol,
        restarts=cfg.restarts,
        factor_tol=cfg.factor_tol,
        seed=cfg.seed,
    )
    cand = minimax.solve_least_favorable(cls, cfg.weights, route=cfg.route, opts=opts)
    saddle = minimax.saddle_check(cand, cls, cfg.probes, rng_seed=cfg.seed)
    textio.write_matrix_series(out / "f0.txt", "density", cand.f0.values)
    textio.write_matrix_series(out / "g0.txt", "density", cand.g0.values)
    for name in ("d0", "phi0", "psi0", "b0"):
        poly = getattr(cand, name)
        if poly is not None:
            textio.write_matrix_series(out / f"{name}.txt", "ma", poly.coeffs)
    textio.write_vector_series(out / "h0.txt", "filter", cand.h0.h_coeffs)
    res_g, res_f = cand.diagnostics["lagrange_residual_g"], cand.diagnostics["lagrange_residual_f"]
    report = {
        "command": "minimax",
        "K": cls.K,
        "delta0": cand.delta0,
        "route": cand.route,
        "alpha2": cand.alpha2,
        "beta2": cand.beta2,
        "lagrange_residual_g": res_g,
        "lagrange_residual_f": res_f,
        "certified": cand.certified,
    }
    report.update({k: v for k, v in cand.diagnostics.items() if k not in report})
    report.update({f"saddle_{k}": v for k, v in saddle.as_dict().items()})
    ok = cand.certified and saddle.passed
    report["status"] = "pass" if ok else "fail"
    return report, EXIT_OK if ok else EXIT_VERIFY


def _simulation_spec(cfg: ProblemConfig, prob: _Problem, horizon: int, n_paths: int) -> oracle.SimulationSpec:
    phi = prob.f.factor if prob.f.factor is not None else factorize(prob.f.grid, prob.L, tol=cfg.factor_tol)
    psi = prob.g.factor if prob.g.factor is not None else factorize(prob.g.grid, prob.L, tol=cfg.factor_tol)
    return oracle.SimulationSpec(phi, psi, horizon, n_paths, cfg.seed)


def cmd_simulate(cfg: ProblemConfig, out: Path) -> tuple[dict, int]:
    K = _infer_K(cfg)
    f = _source_density("signal", cfg.signal, K, cfg.F)
    g = _source_density("noise", cfg.noise, K, cfg.F)
    prob = _Problem(K, f, g, np.zeros((1, K)), _order(cfg, f, g))
    horizon = cfg.horizon or 100
    n_paths = cfg.paths or 1
    sim = oracle.simulate_ma(_simulation_spec(cfg, prob, horizon, n_paths))
    textio.write_blocked(out / "signal.txt", [BlockedSequence(s) for s in sim.signal])
    textio.write_blocked(out / "noise.txt", [BlockedSequence(s) for s in sim.noise])
    textio.write_blocked(out / "observations.txt", [BlockedSequence(s) for s in sim.observations])
    report = {"command": "simulate", "K": K, "horizon": horizon, "paths": n_paths, "seed": cfg.seed}
    return report, EXIT_OK


def cmd_verify(cfg: ProblemConfig, out: Path) -> tuple[dict, int]:
    prob = _problem(cfg)
    fac = _factors(cfg, prob)
    routes = [r for r, c in (("via_f", fac.phi), ("via_g", fac.psi)) if c is not None]
    sols = {r: solve_filter(prob.f.grid, prob.g.grid, prob.a, prob.L, route=r, factors=fac) for r in routes}
    main = sols[cfg.route] if cfg.route in sols else sols[routes[0]]
    delta = main.report.delta
    report: dict = {"command": "verify", "K": prob.K, "delta": delta, "routes": " ".join(routes)}
    checks = []

    if len(sols) == 2:
        gap = abs(sols["via_f"].report.delta - sols["via_g"].report.delta)
        n = max(sols["via_f"].h.Jh, sols["via_g"].h.Jh) + 1
        h_gap = float(np.abs(sols["via_f"].h.padded(n) - sols["via_g"].h.padded(n)).max())
        report.update(route_gap=gap, route_h_gap=h_gap, route_tol=cfg.route_tol)
        checks.append(("routes", max(gap, h_gap) <= cfg.route_tol))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        oracle_val = oracle.finite_horizon_mmse(prob.f.grid, prob.g.grid, prob.a, cfg.oracle_horizon)
    report.update(oracle_horizon=cfg.oracle_horizon, oracle_delta=oracle_val,
                  oracle_gap=abs(oracle_val - delta), oracle_tol=cfg.oracle_tol)
    checks.append(("oracle", abs(oracle_val - delta) <= cfg.oracle_tol))

    horizon = max(cfg.horizon or 0, main.h.Jh + 1, prob.a.shape[0])
    n_paths = cfg.paths or 100_000
    spec = _simulation_spec(cfg, prob, horizon, n_paths)
    mc_mean, mc_se = oracle.empirical_mse(main.h, spec, prob.a)
    band = cfg.mc_band * mc_se
    report.update(mc_paths=n_paths, mc_mean=mc_mean, mc_se=mc_se, mc_gap=abs(mc_mean - delta), mc_band=band)
    checks.append(("monte_carlo", abs(mc_mean - delta) <= band))

    for name, ok in checks:
        report[f"check_{name}"] = "pass" if ok else "fail"
    passed = all(ok for _, ok in checks)
    report["status"] = "pass" if passed else "fail"
    return report, EXIT_OK if passed else EXIT_VERIFY


_HANDLERS = {
    "factorize": cmd_factorize,
    "filter": cmd_filter,
    "minimax": cmd_minimax,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcfilter", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} step on a problem file")
        p.add_argument("config", type=Path, help="problem file (key = value lines)")
        p.add_argument("--out-dir", type=Path, help="artifact directory (default: out_dir from the config, else ./out)")
        p.add_argument("--json-like", action="store_true", help="print the report as one JSON object")
        p.add_argument("--seed", type=int, help="random seed (default 0)")
        p.add_argument("--route", choices=ROUTES, help="filter route (default via_g)")
        p.add_argument("--factor-tol", type=float, help="factorization residual tolerance (default 1e-10)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any problem-file parameter")
        if name == "minimax":
            p.add_argument("--stationarity-tol", type=float, help="multiplier residual tolerance (default 1e-6)")
            p.add_argument("--restarts", type=int, help="number of starts (default 8)")
            p.add_argument("--probes", type=int, help="saddle-point probes (default 1000)")
        if name in ("verify", "simulate"):
            p.add_argument("--paths", type=int, help="Monte Carlo paths (verify default 100000, simulate 1)")
        if name == "verify":
            p.add_argument("--oracle-tol", type=float, help="formula vs normal equations (default 1e-4)")
            p.add_argument("--route-tol", type=float, help="route agreement (default 1e-8)")
            p.add_argument("--oracle-horizon", type=int, help="normal-equation horizon (default 200)")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for flag, key in (("seed", "seed"), ("route", "route"), ("factor_tol", "factor_tol"),
                      ("stationarity_tol", "stationarity_tol"), ("restarts", "restarts"), ("probes", "probes"),
                      ("paths", "paths"), ("oracle_tol", "oracle_tol"), ("route_tol", "route_tol"),
                      ("oracle_horizon", "oracle_horizon")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = str(value)
    return out


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if not args.config.exists():
            raise FormatError(f"problem file {args.config} not found")
        overrides = _overrides(args)
        cfg = load_config(args.config, overrides)
        out = args.out_dir or cfg.out_dir
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise FormatError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report, status = _HANDLERS[args.command](cfg, out)
        text = textio.format_json_like(report) if args.json_like else textio.format_key_values(report)
        (out / "report.txt").write_text(textio.format_key_values(report))
        sys.stdout.write(text)
        return status
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, ConvergenceError, NumericalInconsistencyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except PCFilterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
