"""Command-line front end: one scenario per run, one CSV plus a ``.meta`` sidecar.

Example::

    python -m tunnelshift figure1 --beta 20 --p0 0 --out fig1.csv
"""

from __future__ import annotations

import argparse
import math
import platform
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    delay_times,
    delta_p0,
    peak_trajectory,
    superosc_band,
    unwrapped_phase,
)
from .barrier import Barrier, log_transmission, wide_barrier_params
from .dad import (
    REFERENCE_N,
    REFERENCE_PMAX_FACTOR,
    CancellationWarning,
    TailWarning,
    Window,
    barrier_xi,
    causality_residual,
    dad_from_xi,
    default_x_guard,
    moments_derivative,
    moments_direct,
    normalization_check,
    reference_grid,
)
from .grids import MomentumGrid, UniformGrid
from .packet import GaussianPacket
from .transmit import (
    high_barrier_pulse,
    spread_width,
    transmitted_envelope,
    wide_barrier_pulse,
)

SCENARIOS = ("dad", "transmission", "pulse", "moments", "trajectory",
             "figure1", "figure2", "figure3", "hartman")

# per-scenario defaults: which barrier parameter beta leaves fixed, p0 as a
# fraction of sqrt(2W), and sigma as a multiple of d
_FAMILY = {
    "figure2": {"fixed": ("d", 1.0), "p0_factor": 0.4, "gamma": 5.0},
    "figure3": {"fixed": ("W", 0.5), "p0_factor": 0.5, "gamma": 1.0},
    "hartman": {"fixed": ("W", 0.5), "p0_factor": 0.5, "gamma": 1.0},
}
_GENERIC = {"fixed": ("d", 1.0), "p0_factor": 0.5, "gamma": 5.0}
_DEFAULT_BETA = 20.0
# barrier offset and free-peak position that fix the default time
_OFFSET_SIGMAS = 8.0
_PAST_BARRIER_SIGMAS = 10.0
_CONFIG_KEYS = ("beta", "W", "d", "sigma", "gamma", "p0", "t", "times", "pmax", "n",
                "mode", "out", "beta_list", "workers", "K", "panel", "xmin", "xmax")


class ConfigError(ValueError):
    """Inconsistent or incomplete run configuration."""


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    barrier: Barrier
    packet: GaussianPacket
    t: float
    times: tuple[float, ...]
    pmax: float | None
    n: int | None
    mode: str
    out: Path
    beta_list: tuple[float, ...]
    workers: int
    K: int
    panel: str
    xmin: float | None
    xmax: float | None
    defaults: tuple[str, ...]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tunnelshift",
        description="Tunnelling of wavepackets through a rectangular barrier: "
                    "deterministic CSV datasets.")
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--beta", type=float, help="opacity sqrt(2W) d")
    ap.add_argument("--W", type=float, help="barrier height")
    ap.add_argument("--d", type=float, help="barrier width")
    ap.add_argument("--sigma", type=float, help="packet width")
    ap.add_argument("--gamma", type=float, help="packet width in units of d")
    ap.add_argument("--p0", type=float, help="mean momentum")
    ap.add_argument("--t", type=float, help="time of the pulse snapshot")
    ap.add_argument("--times", type=str, help="comma-separated times (trajectory)")
    ap.add_argument("--pmax", type=float, help="momentum grid half-width")
    ap.add_argument("--n", type=int, help="number of grid points")
    ap.add_argument("--mode", choices=("ratio", "absolute"), help="pulse normalization")
    ap.add_argument("--out", type=str, help="output CSV path")
    ap.add_argument("--config", type=str, help="key = value file; flags win")
    ap.add_argument("--beta-list", dest="beta_list", type=str,
                    help="comma-separated opacities (hartman)")
    ap.add_argument("--workers", type=int, help="threads; output does not depend on it")
    ap.add_argument("--K", type=int, help="highest moment order")
    ap.add_argument("--panel", choices=("pulse", "band"), help="figure2/figure3 panel")
    ap.add_argument("--xmin", type=float, help="lower end of the output x range")
    ap.add_argument("--xmax", type=float, help="upper end of the output x range")
    return ap


def read_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _merge(args: argparse.Namespace) -> dict:
    raw = {k: getattr(args, k) for k in _CONFIG_KEYS}
    if args.config:
        converters = {"mode": str, "out": str, "times": str, "beta_list": str,
                      "panel": str, "n": int, "workers": int, "K": int}
        for key, value in read_config_file(args.config).items():
            if raw[key] is None:
                raw[key] = converters.get(key, float)(value)
    return raw


def resolve_barrier(beta, W, d, fixed: tuple[str, float], defaults: list[str]) -> Barrier:
    """Barrier from (W, d), or from beta plus one of them; rejects inconsistent triples."""
    if beta is not None and W is not None and d is not None:
        if not math.isclose(math.sqrt(2.0 * W) * d, beta, rel_tol=1e-12):
            raise ConfigError(f"beta={beta} is inconsistent with W={W}, d={d}")
        return Barrier(W, d)
    if W is not None and d is not None:
        return Barrier(W, d)
    if beta is None:
        if W is not None or d is not None:
            raise ConfigError("give beta together with W or d, or both W and d")
        beta = _DEFAULT_BETA
        defaults.append(f"beta={beta:g}")
    if W is not None:
        return Barrier.from_beta(beta, height=W)
    if d is not None:
        return Barrier.from_beta(beta, width=d)
    key, value = fixed
    defaults.append(f"{key}={value:g}")
    return Barrier.from_beta(beta, **({"height": value} if key == "W" else {"width": value}))


def make_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    raw = _merge(args)
    scenario = args.scenario
    fam = _FAMILY.get(scenario, _GENERIC)
    defaults: list[str] = []

    barrier = resolve_barrier(raw["beta"], raw["W"], raw["d"], fam["fixed"], defaults)
    if raw["sigma"] is not None and raw["gamma"] is not None:
        raise ConfigError("give at most one of sigma and gamma")
    if raw["sigma"] is not None:
        sigma = raw["sigma"]
    else:
        gamma = raw["gamma"]
        if gamma is None:
            gamma = fam["gamma"]
            defaults.append(f"gamma={gamma:g}")
        sigma = gamma * barrier.width
    if raw["p0"] is not None:
        p0 = raw["p0"]
    elif scenario == "figure1":
        p0 = 0.0
        defaults.append("p0=0")
    else:
        p0 = fam["p0_factor"] * barrier.threshold
        defaults.append(f"p0={fam['p0_factor']:g}*sqrt(2W)")
    packet = GaussianPacket(sigma, p0)

    if raw["t"] is not None:
        t = raw["t"]
    elif p0 > 0.0:
        # free peak 10 sigma past a barrier placed 8 sigma ahead of the packet
        t = ((_OFFSET_SIGMAS + _PAST_BARRIER_SIGMAS) * sigma + barrier.width) / p0
        defaults.append("t=(8 sigma + d + 10 sigma)/p0")
    else:
        t = 0.0
    if raw["times"] is not None:
        times = _floats(raw["times"])
    else:
        times = tuple(float(v) for v in t * np.linspace(1.0, 2.0, 6))
        if scenario == "trajectory":
            defaults.append("times=6 points on [t, 2t]")

    if raw["beta_list"] is not None:
        beta_list = _floats(raw["beta_list"])
    else:
        beta_list = (20.0, 40.0, 80.0)
        if scenario == "hartman":
            defaults.append("beta_list=20,40,80")
    mode = raw["mode"] or "ratio"
    if raw["mode"] is None and scenario in ("pulse", "trajectory", "figure2", "figure3"):
        defaults.append("mode=ratio")
    out = Path(raw["out"] or f"{scenario}.csv")
    workers = int(raw["workers"] or 1)
    if workers < 1:
        raise ConfigError("--workers must be >= 1")
    K = int(raw["K"] if raw["K"] is not None else 3)
    if not 0 <= K <= 6:
        raise ConfigError("--K must be in 0..6")
    n = raw["n"]
    if n is not None and n < 2:
        raise ConfigError("--n must be >= 2")
    return RunConfig(scenario, barrier, packet, float(t), times, raw["pmax"], n, mode, out,
                     beta_list, workers, K, raw["panel"] or "pulse", raw["xmin"], raw["xmax"],
                     tuple(defaults))


# output ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.16e}"


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _meta_value(v) -> str:
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+.17g}j"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_meta_value(x) for x in v)
    return str(v)


def write_meta(path: Path, entries: dict) -> None:
    lines = [f"{k} = {_meta_value(entries[k])}" for k in sorted(entries)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _base_meta(cfg: RunConfig) -> dict:
    b, pk = cfg.barrier, cfg.packet
    return {
        "scenario": cfg.scenario,
        "W": float(b.height),
        "d": float(b.width),
        "beta": float(b.beta),
        "sigma": float(pk.sigma),
        "p0": float(pk.p0),
        "units": "hbar = mu = 1",
        "defaults_applied": ";".join(cfg.defaults) if cfg.defaults else "none",
        "version_tunnelshift": __version__,
        "version_numpy": np.__version__,
        "version_scipy": scipy.__version__,
        "version_python": platform.python_version(),
        "csv_format": "comma-separated, %.16e, LF, UTF-8",
        "output_csv": cfg.out.name,
    }


# scenarios ---------------------------------------------------------------

def _momentum_grid(cfg: RunConfig, p0: float | None) -> MomentumGrid:
    if cfg.pmax is None and cfg.n is None:
        return reference_grid(cfg.barrier, p0 if p0 else None)
    s = cfg.barrier.threshold
    p_max = cfg.pmax if cfg.pmax is not None else REFERENCE_PMAX_FACTOR * s
    n = cfg.n if cfg.n is not None else REFERENCE_N
    return MomentumGrid.symmetric(p_max, n)


def _x_window(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return (x >= lo) & (x <= hi)


def _pulse_grid(cfg: RunConfig, t: float, shift: float) -> UniformGrid:
    pk = cfg.packet
    w = spread_width(pk, t)
    centre = pk.p0 * t + shift
    lo = cfg.xmin if cfg.xmin is not None else centre - 5.0 * w
    hi = cfg.xmax if cfg.xmax is not None else centre + 5.0 * w
    return UniformGrid.from_bounds(lo, hi, cfg.n or 1001)


def _grid_meta(meta: dict, grid: MomentumGrid, xi) -> None:
    meta.update({
        "p_grid_min": float(grid.p_min),
        "p_grid_max": float(grid.p_max),
        "p_grid_n": grid.n,
        "window": xi.meta["window"],
        "x_guard": default_x_guard(xi),
        "causality_residual": causality_residual(xi),
    })


def run_figure1(cfg: RunConfig, meta: dict):
    b, p0 = cfg.barrier, cfg.packet.p0
    grid = _momentum_grid(cfg, p0)
    xi = barrier_xi(b, grid)
    _grid_meta(meta, grid, xi)
    values = xi.values * np.exp(-1j * p0 * xi.x) if p0 else xi.values
    sel = _x_window(xi.x, cfg.xmin if cfg.xmin is not None else -10.0 * b.width,
                    cfg.xmax if cfg.xmax is not None else 2.0 * b.width)
    meta["quantity"] = "exp(-i p0 x) xi_smooth(x) = T(p0) times the regular part of the DAD"
    peak = np.max(np.abs(xi.values))
    meta["max_abs_imag_over_peak"] = float(np.max(np.abs(values.imag)) / peak)
    return (["x [length]", "re_T_eta_smooth [1/length]", "im_T_eta_smooth [1/length]"],
            [xi.x[sel], values.real[sel], values.imag[sel]])


def run_dad(cfg: RunConfig, meta: dict):
    b, p0 = cfg.barrier, cfg.packet.p0
    grid = _momentum_grid(cfg, p0)
    xi = barrier_xi(b, grid)
    _grid_meta(meta, grid, xi)
    dad = dad_from_xi(xi, p0, log_T_p0=complex(log_transmission(p0, b)))
    meta["log_T_p0"] = dad.log_T_p0
    meta["singular_weight_log"] = -dad.log_T_p0
    meta["normalization_check"] = normalization_check(dad)
    meta["quantity"] = "kernel = T(p0) * smooth part of eta(x, p0)"
    x = dad.kernel.x
    sel = _x_window(x, cfg.xmin if cfg.xmin is not None else x[0],
                    cfg.xmax if cfg.xmax is not None else x[-1])
    k = dad.kernel.values
    return (["x [length]", "re_kernel [1/length]", "im_kernel [1/length]"],
            [x[sel], k.real[sel], k.imag[sel]])


def run_transmission(cfg: RunConfig, meta: dict):
    b = cfg.barrier
    p_max = cfg.pmax if cfg.pmax is not None else 3.0 * b.threshold
    n = cfg.n or 2001
    p = np.linspace(-p_max, p_max, n)
    logt = log_transmission(p, b)
    with np.errstate(under="ignore"):
        t = np.exp(logt)
    meta.update({"p_min": -p_max, "p_max": p_max, "n": n})
    return (["p [1/length]", "re_T [1]", "im_T [1]", "log_abs_T [1]", "arg_T_unwrapped [rad]"],
            [p, t.real, t.imag, logt.real, unwrapped_phase(p, b)])


def _exact_and_forms(cfg: RunConfig, xgrid):
    b, pk = cfg.barrier, cfg.packet
    exact = transmitted_envelope(b, pk, cfg.t, xgrid, mode=cfg.mode, workers=cfg.workers)
    high = high_barrier_pulse(b, pk, cfg.t, xgrid, mode=cfg.mode)
    if 0.0 < pk.p0 ** 2 < 2.0 * b.height:
        wide = wide_barrier_pulse(b, pk, cfg.t, xgrid, mode=cfg.mode).values
    else:
        wide = np.full(xgrid.n, np.nan + 1j * np.nan)
    return exact, high.values, wide


def run_pulse(cfg: RunConfig, meta: dict):
    xgrid = _pulse_grid(cfg, cfg.t, cfg.barrier.width)
    exact, high, wide = _exact_and_forms(cfg, xgrid)
    meta.update({"t": cfg.t, "mode": cfg.mode, "dq": exact.meta["dq"],
                 "q_min": exact.meta["q_min"], "q_max": exact.meta["q_max"],
                 "log_reference": exact.log_reference})
    g = exact.values
    return (["x [length]", "re_G_exact [length^-1/2]", "im_G_exact [length^-1/2]",
             "re_G_high_barrier [length^-1/2]", "im_G_high_barrier [length^-1/2]",
             "re_G_wide_barrier [length^-1/2]", "im_G_wide_barrier [length^-1/2]"],
            [xgrid.points, g.real, g.imag, high.real, high.imag, wide.real, wide.imag])


def run_moments(cfg: RunConfig, meta: dict):
    b, p0 = cfg.barrier, cfg.packet.p0
    deriv = moments_derivative(b, p0, cfg.K)
    grid = _momentum_grid(cfg, p0)
    xi = barrier_xi(b, grid)
    _grid_meta(meta, grid, xi)
    dad = dad_from_xi(xi, p0, log_T_p0=complex(log_transmission(p0, b)))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailWarning)
        warnings.simplefilter("always", CancellationWarning)
        direct = moments_direct(dad, cfg.K)
    kinds = {w.category for w in caught}
    meta["direct_tail_warning"] = "yes" if TailWarning in kinds else "no"
    meta["direct_cancellation_warning"] = "yes" if CancellationWarning in kinds else "no"
    meta["derivative_base_step"] = 1e-3 * max(1.0, abs(p0))
    meta["richardson_levels"] = 4
    n = np.arange(cfg.K + 1)
    return (["n [1]", "re_xbar_derivative [length^n]", "im_xbar_derivative [length^n]",
             "derivative_error [length^n]", "re_xbar_direct [length^n]",
             "im_xbar_direct [length^n]", "direct_roundoff_floor [length^n]"],
            [n, deriv.values.real, deriv.values.imag, deriv.errors,
             direct.values.real, direct.values.imag, direct.errors])


def run_trajectory(cfg: RunConfig, meta: dict):
    b, pk = cfg.barrier, cfg.packet
    pulses = []
    for t in cfg.times:
        xgrid = _pulse_grid(cfg, t, b.width)
        pulses.append(transmitted_envelope(b, pk, t, xgrid, mode=cfg.mode, workers=cfg.workers))
    fit = peak_trajectory(pulses)
    meta.update({"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual,
                 "slope_stderr": fit.slope_stderr, "intercept_stderr": fit.intercept_stderr,
                 "times": cfg.times, "mode": cfg.mode})
    if 0.0 < pk.p0 ** 2 < 2.0 * b.height:
        meta["predicted_slope"] = pk.p0 + delta_p0(b, pk)
    return (["t [time]", "x_peak [length]", "multimodal [1]"],
            [fit.times, fit.peaks, np.array(fit.multimodal, dtype=int)])


def _band(cfg: RunConfig, meta: dict, key: str, label: str):
    b, pk = cfg.barrier, cfg.packet
    half = 8.0 / pk.sigma
    lo = cfg.xmin if cfg.xmin is not None else pk.p0 - half
    hi = cfg.xmax if cfg.xmax is not None else pk.p0 + half
    p = np.linspace(lo, hi, cfg.n or 1001)
    band = superosc_band(b, pk, p)
    meta["p_range"] = (float(lo), float(hi))
    r = band[key]
    return (["p [1/length]", "re_T_over_p_norm [1]", "sin_minus_pd [1]", "abs_A_scaled [1]",
             f"re_{label} [1]", f"im_{label} [1]"],
            [p, band["re_T_over_p"], band["sin_minus_pd"], band["abs_A"], r.real, r.imag])


def run_figure(cfg: RunConfig, meta: dict, which: str):
    b = cfg.barrier
    meta["panel"] = cfg.panel
    if cfg.panel == "band":
        if which == "figure2":
            return _band(cfg, meta, "T_over_T4", "T_over_T_high")
        return _band(cfg, meta, "T_over_Tq4", "T_over_T_wide")
    shift = b.width
    if which == "figure3":
        shift = wide_barrier_params(cfg.packet.p0, b).alpha.real
    xgrid = _pulse_grid(cfg, cfg.t, shift)
    exact, high, wide = _exact_and_forms(cfg, xgrid)
    approx = high if which == "figure2" else wide
    name = "high_barrier" if which == "figure2" else "wide_barrier"
    meta.update({"t": cfg.t, "mode": cfg.mode, "dq": exact.meta["dq"],
                 "log_reference": exact.log_reference,
                 "barrier_offset_for_t": _OFFSET_SIGMAS * cfg.packet.sigma})
    g = exact.values
    return (["x [length]", "abs_G_exact [length^-1/2]", f"abs_G_{name} [length^-1/2]",
             "re_G_exact [length^-1/2]", "im_G_exact [length^-1/2]",
             f"re_G_{name} [length^-1/2]", f"im_G_{name} [length^-1/2]"],
            [xgrid.points, np.abs(g), np.abs(approx), g.real, g.imag,
             approx.real, approx.imag])


def run_hartman(cfg: RunConfig, meta: dict):
    b0, p0 = cfg.barrier, cfg.packet.p0
    rows = []
    for beta in cfg.beta_list:
        b = Barrier.from_beta(beta, height=b0.height)
        dt = delay_times(b, p0)
        rows.append((beta, b.width, dt.tau_phase, dt.tau.real, dt.tau.imag, dt.phase_Phi))
    cols = [np.array(c) for c in zip(*rows)]
    meta["beta_list"] = cfg.beta_list
    meta["held_fixed"] = "W"
    return (["beta [1]", "d [length]", "tau_phase [time]", "re_tau [time]", "im_tau [time]",
             "phase_Phi [rad]"], cols)


_RUNNERS = {
    "figure1": run_figure1,
    "dad": run_dad,
    "transmission": run_transmission,
    "pulse": run_pulse,
    "moments": run_moments,
    "trajectory": run_trajectory,
    "figure2": lambda c, m: run_figure(c, m, "figure2"),
    "figure3": lambda c, m: run_figure(c, m, "figure3"),
    "hartman": run_hartman,
}


def run(cfg: RunConfig) -> int:
    meta = _base_meta(cfg)
    header, columns = _RUNNERS[cfg.scenario](cfg, meta)
    write_csv(cfg.out, header, columns)
    meta["rows"] = len(columns[0])
    write_meta(cfg.out.with_suffix(".meta"), meta)
    return 0


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
