"""``sim``: batch command-line front end.

    sim <command> --config FILE [--seed N] [--out DIR] [--threads N]

Each command writes ``<command>.csv`` (``#`` metadata lines, then a header
row) and ``<command>.json`` (scalars, fit results, provenance) into the
output directory. Exit status: 0 success, 1 numerical failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .coupling import effective_lamb_dicke
from .crystal import chain_transverse_frequencies, critical_anisotropy, find_equilibrium
from .dynamics.coherence import CoherenceFitError, NoiseModel, coherence_scan, fit_coherence
from .dynamics.distributions import PhononDistribution
from .dynamics.fitting import FlopFitter
from .dynamics.rabi import DriveParams, flop_signal
from .dynamics.spectrum import spectrum_scan
from .field import FieldZeroNotFound, field_at, magnitude_gradient, quadrupole_center, zeeman_frequency
from .modes import InstabilityError, classify_modes, normal_modes, soft_mode_curve
from .units import ConfigError

TWO_PI = 2 * math.pi


@dataclass
class Output:
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)


class NumericFailure(RuntimeError):
    """Numerical failure that still has a summary (and maybe curves) worth writing."""

    def __init__(self, message, summary, output=None):
        super().__init__(message)
        self.summary, self.output = summary, output


def _hz(omega):
    return omega / TWO_PI


def _distribution(section):
    kind, nbar = section["phonons"], section["nbar"]
    if kind == "fock":
        if nbar != int(nbar):
            raise ValueError("a Fock state needs an integer nbar")
        return PhononDistribution.fock(int(nbar))
    return PhononDistribution(kind, nbar)


def _crystal(cfg: ExperimentConfig, seed):
    trap = cfg.trap()
    return find_equilibrium(trap, cfg.section("crystal")["n"], seed=seed)


# -- commands ------------------------------------------------------------------

def cmd_equilibrium(cfg: ExperimentConfig, seed: int, threads: int) -> Output:
    state = _crystal(cfg, seed)
    trap = state.trap
    alpha_crit = None
    if state.n >= 3 and trap.omega_x < trap.omega_y:
        alpha_crit = critical_anisotropy(trap, state.n).alpha_crit
    rows = [[i, *(state.positions[i] * 1e6)] for i in range(state.n)]
    summary = {
        "configuration": state.configuration.value,
        "alpha": trap.alpha,
        "alpha_crit": alpha_crit,
        "near_critical": state.near_critical,
        "converged": state.converged,
        "residual": state.residual,
        "energy_J": state.energy,
        "length_um": trap.length * 1e6,
    }
    return Output(["ion", "x_um", "y_um", "z_um"], rows, summary)


def cmd_modes(cfg: ExperimentConfig, seed: int, threads: int) -> Output:
    state = _crystal(cfg, seed)
    try:
        spectrum = normal_modes(state)
    except InstabilityError as exc:
        raise NumericFailure(f"unstable crystal: {exc}", {
            "configuration": state.configuration.value, "alpha": state.trap.alpha})
    direction = cfg.gradient_direction() if "field" in cfg.sections else np.array([1.0, 0.0, 0.0])
    roi = cfg.roi(state.n)
    labels = classify_modes(spectrum, roi, direction)
    columns = ["index", "freq_Hz", "axis_label", "rank", "name"]
    columns += [f"proj_ion{i}" for i in range(state.n)] + ["visible_roi"]
    rows = []
    for k, label in enumerate(labels):
        proj = spectrum.vectors(k) @ direction
        rows.append([k, _hz(spectrum.frequencies[k]), label.axis, label.rank, label.name,
                     *proj, int(any(label.visible))])
    summary = {"configuration": state.configuration.value, "alpha": state.trap.alpha,
               "roi": roi, "gradient_direction": direction.tolist()}
    if "field" in cfg.sections:
        couplings = effective_lamb_dicke(spectrum, cfg.field_model(), state)
        summary["eta"] = couplings.eta.tolist()
    return Output(columns, rows, summary)


def cmd_spectrum(cfg: ExperimentConfig, seed: int, threads: int) -> Output:
    state = _crystal(cfg, seed)
    spectrum = normal_modes(state)
    model = cfg.field_model()
    couplings = effective_lamb_dicke(spectrum, model, state)
    roi = cfg.roi(state.n)
    s = cfg.section("spectrum")
    b = np.linalg.norm(field_at(model, state.positions), axis=-1)
    carriers = np.atleast_1d(zeeman_frequency(state.trap.species, b))
    offsets = np.linspace(s["start"], s["stop"], s["points"])
    grid = carriers.mean() + offsets
    drive = DriveParams(s["rabi_frequency"], pulse_time=s["pulse_time"])
    scan = spectrum_scan(spectrum, couplings, carriers, drive, _distribution(s), grid, roi,
                         workers=threads)
    rows = [[_hz(grid[j]), ion, scan.p_up[r, j], int(scan.overlap[r, j])]
            for r, ion in enumerate(roi) for j in range(len(grid))]
    summary = {
        "carrier_Hz": _hz(carriers).tolist(),
        "mode_Hz": _hz(spectrum.frequencies).tolist(),
        "eta": couplings.eta.tolist(),
        "lines": [{"ion": ln.ion, "kind": ln.kind, "mode": ln.mode, "center_Hz": _hz(ln.center)}
                  for ln in scan.lines],
        "overlapping_pairs": [[f"{a.kind}:{a.mode}@{a.ion}", f"{b.kind}:{b.mode}@{b.ion}"]
                              for a, b in scan.overlapping_pairs],
    }
    return Output(["freq_Hz", "ion_index", "P_up", "overlap_flag"], rows, summary)


def cmd_rabi(cfg: ExperimentConfig, seed: int, threads: int) -> Output:
    s = cfg.section("rabi")
    eta = s["eta"]
    if eta is None:
        state = _crystal(cfg, seed)
        spectrum = normal_modes(state)
        couplings = effective_lamb_dicke(spectrum, cfg.field_model(), state)
        if not (0 <= s["mode"] < spectrum.n_modes and 0 <= s["ion"] < state.n):
            raise cfg.error("rabi.mode or rabi.ion out of range", "rabi", "mode")
        eta = abs(float(couplings.eta[s["mode"], s["ion"]]))
    dist = _distribution(s)
    drive = DriveParams(s["rabi_frequency"], s["detuning"], decay_time=s["decay_time"])
    t = np.linspace(0.0, s["stop"], s["points"])
    p = flop_signal(dist, eta, drive, s["transition"], t)
    columns, cols = ["time_us", "P_up"], [t * 1e6, p]
    observed = p
    if s["readout_noise"] > 0:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        observed = np.clip(p + s["readout_noise"] * rng.standard_normal(len(t)), 0.0, 1.0)
        columns.append("P_observed")
        cols.append(observed)
    summary = {"eta": eta, "transition": s["transition"], "distribution": dist.kind,
               "nbar": dist.mean}
    if s["fit"]:
        fitter = FlopFitter(family=dist.kind, eta=eta, rabi_frequency=s["rabi_frequency"],
                            transition=s["transition"], detuning=s["detuning"],
                            fit_decay=math.isfinite(s["decay_time"]))
        fitter.fit(t, observed)
        columns.append("P_fit")
        cols.append(fitter.predict(t))
        summary["fit"] = {"nbar": fitter.nbar_, "decay_time_us": fitter.decay_time_ * 1e6,
                          "stderr": {k: float(v) for k, v in fitter.stderr_.items()}}
    return Output(columns, [list(r) for r in zip(*cols)], summary)


def cmd_coherence(cfg: ExperimentConfig, seed: int, threads: int) -> Output:
    s, n = cfg.section("coherence"), cfg.section("noise")
    try:
        noise = NoiseModel(n["kind"], n["sigma"], n["tau_c"], seed)
    except ValueError as exc:
        raise cfg.error(str(exc), "noise") from None
    pulses = s["pulses"]
    if any(l < 0 for l in pulses) or not pulses:
        raise cfg.error("coherence.pulses must be non-negative pulse counts", "coherence", "pulses")
    times = np.linspace(0.0, s["stop"], s["points"])
    result = coherence_scan(noise, pulses, times, s["trajectories"], s["steps"],
                            workers=threads, fit=False)
    columns = ["time_us"] + [f"contrast_l{l}" for l in pulses]
    rows = [[times[j] * 1e6, *(result.contrast[l][j] for l in pulses)] for j in range(len(times))]
    summary = {"pulses": pulses, "trajectories": s["trajectories"], "sigma_rad_s": noise.sigma,
               "tau_c_s": noise.tau_c}
    if noise.kind != "none" and noise.sigma > 0:
        try:
            fit_coherence(result)
        except CoherenceFitError as exc:
            raise NumericFailure(f"coherence fit failed: {exc}", summary,
                                 Output(columns, rows, summary)) from exc
        summary["T2_us"] = {str(l): t2 * 1e6 for l, t2 in result.t2.items()}
        summary["gamma"] = result.gamma
        summary["gamma_stderr"] = result.gamma_stderr
    return Output(columns, rows, summary)


def cmd_field(cfg: ExperimentConfig, seed: int, threads: int) -> Output:
    model = cfg.field_model()
    m = cfg.section("field_map")
    a, b = np.asarray(m["start"]), np.asarray(m["stop"])
    pts = a + np.linspace(0.0, 1.0, m["points"])[:, None] * (b - a)
    bvec = field_at(model, pts)
    grad = magnitude_gradient(model, pts)
    rows = [[*(pts[i] * 1e6), *bvec[i], np.linalg.norm(bvec[i]), *grad[i]] for i in range(len(pts))]
    centre = None
    if model.wires:
        # the zero lies between the wires and the mapped region
        corners = np.vstack([pts, [w.anchor for w in model.wires]])
        lo, hi = corners.min(axis=0), corners.max(axis=0)
        pad = 0.25 * np.max(hi - lo)
        lo, hi = lo - pad, hi + pad
        try:
            centre = (quadrupole_center(model, (lo, hi)) * 1e6).tolist()
        except FieldZeroNotFound:
            centre = None
    summary = {"wires": len(model.wires), "bias_T": model.bias.tolist(),
               "quadrupole_center_um": centre}
    columns = ["x_um", "y_um", "z_um", "Bx_T", "By_T", "Bz_T", "B_T",
               "dBdx_T_per_m", "dBdy_T_per_m", "dBdz_T_per_m"]
    return Output(columns, rows, summary)


def cmd_alpha_scan(cfg: ExperimentConfig, seed: int, threads: int) -> Output:
    s = cfg.section("alpha_scan")
    n = cfg.section("crystal")["n"]
    trap = cfg.trap(need_axial=False)
    grid = np.linspace(s["start"], s["stop"], s["points"])
    if np.any(grid <= 0) or np.any(grid >= 1):
        raise cfg.error("alpha_scan range must lie inside (0, 1)", "alpha_scan")

    def point(alpha):
        return soft_mode_curve(trap, n, [alpha], seed=seed)[0]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            curve = list(pool.map(point, grid))
    else:
        curve = [point(alpha) for alpha in grid]
    chain = np.array([chain_transverse_frequencies(n, al)[0] if n > 1 else 1.0 for al in grid])
    chain = chain * trap.omega_x
    rows = [[p.alpha, _hz(p.omega_soft), _hz(c), p.configuration.value if p.configuration else "",
             p.flag] for p, c in zip(curve, chain)]
    crossing = None
    sq = np.sign(chain) * chain**2  # linear in alpha for the chain
    sign = np.flatnonzero(np.diff(np.sign(sq)) != 0)
    if sign.size:
        i = sign[0]
        crossing = float(grid[i] - sq[i] * (grid[i + 1] - grid[i]) / (sq[i + 1] - sq[i]))
    summary = {"n": n, "omega_x_Hz": _hz(trap.omega_x), "chain_zero_crossing": crossing,
               "alpha_crit": critical_anisotropy(trap, n).alpha_crit if n >= 3 else None}
    return Output(["alpha", "soft_mode_Hz", "chain_soft_mode_Hz", "configuration", "flag"],
                  rows, summary)


COMMANDS = {
    "equilibrium": (cmd_equilibrium, "equilibrium positions, configuration and critical anisotropy"),
    "modes": (cmd_modes, "normal-mode table with labels and gradient projections"),
    "spectrum": (cmd_spectrum, "per-ion spin-flip spectrum"),
    "rabi": (cmd_rabi, "Rabi flopping trace, optionally fitted"),
    "coherence": (cmd_coherence, "Ramsey/echo contrast under colored noise"),
    "field": (cmd_field, "field and |B|-gradient along a line"),
    "alpha-scan": (cmd_alpha_scan, "soft-mode frequency versus anisotropy"),
}


# -- output --------------------------------------------------------------------

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def write_outputs(out_dir: Path, command, cfg: ExperimentConfig, seed, output: Output | None,
                  status="ok", error=None, summary=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"tool": "zigzag", "version": __version__, "command": command,
            "config": cfg.path.name if cfg.path else None, "config_sha256": cfg.sha256,
            "seed": seed}
    if output is not None:
        with open(out_dir / f"{command}.csv", "w", newline="", encoding="utf-8") as fh:
            for key, value in meta.items():
                fh.write(f"# {key}: {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(output.columns)
            writer.writerows([_cell(v) for v in row] for row in output.rows)
    doc = dict(meta, status=status)
    if error:
        doc["error"] = error
    if summary is None:
        summary = output.summary if output is not None else {}
    doc["results"] = _jsonable(summary)
    (out_dir / f"{command}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="experiment config (TOML)")
        p.add_argument("--seed", type=int, help="overrides [crystal] seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("sim: --threads must be at least 1", file=sys.stderr)
        return 2
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"sim: config error: {exc}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else cfg.sections.get("crystal", {}).get("seed", 0)
    try:
        output = func(cfg, seed, args.threads)
    except ConfigError as exc:
        print(f"sim: config error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        write_outputs(args.out, args.command, cfg, seed, exc.output, "error", str(exc), exc.summary)
        print(f"sim: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, LookupError, np.linalg.LinAlgError) as exc:
        write_outputs(args.out, args.command, cfg, seed, None, "error", f"{type(exc).__name__}: {exc}")
        print(f"sim: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"sim: invalid input: {exc}", file=sys.stderr)
        return 2
    write_outputs(args.out, args.command, cfg, seed, output)
    return 0


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
