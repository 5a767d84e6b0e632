"""Run configuration, figure presets, time sweeps and the command-line entry point."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import __version__
from .dynamics import (amplitudes_at, assemble_state, default_ode_step,
                       ode_oracle_trajectory, prepare_blocks)
from .entanglement import (hermitian3_eigs_bisection, hermitian3_eigs_cardano,
                           reduced_atom_dm, von_neumann_entropy)
from .errors import (ComplexRootsError, ConfigError, DegenerateRootsError, DomainError,
                     LambdaJCError, MissingFrequenciesError, NonHermitianError, StepSizeError,
                     UnknownPresetError, ValidationFailure)
from .model import (DEFAULT_TAIL_TOL, NMAX_CAP, CoherentModeSpec, FockGrid,
                    NonlinearitySpec, SystemParams)
from .squeezing import (DEFAULT_PANELS, DIST_MODES, MOMENTUM_CONVENTION, SCHRODINGER,
                        TRACED, QuadratureGrid, eigenfunction_table, squeezing_sample)

CSV_HEADER = ("tau", "dem", "EX", "EP", "norm_error")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4

# acceptance thresholds checked by validate()
MAX_ODE_DEVIATION = 1e-6
MAX_CUBIC_RESIDUAL = 1e-9
MAX_BLOCK_NORM_ERROR = 1e-8
MAX_GLOBAL_NORM_ERROR = 1e-6


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    modes: Tuple[CoherentModeSpec, CoherentModeSpec]
    grid: FockGrid
    tau_max: float = 25.0
    d_tau_entropy: float = 0.01
    d_tau_squeezing: float = 0.05
    dist_mode: str = TRACED
    dem: bool = True
    squeezing: bool = True
    norm: bool = True
    oracle_check: bool = False
    panels: int = DEFAULT_PANELS
    workers: int = 1
    name: str = ""

    def __post_init__(self):
        if not (self.tau_max > 0 and self.d_tau_entropy > 0 and self.d_tau_squeezing > 0):
            raise ConfigError("tau_max and time steps must be positive")
        if self.dist_mode not in DIST_MODES:
            raise ConfigError(f"dist_mode must be one of {', '.join(DIST_MODES)}")
        if self.panels < 1 or self.workers < 1:
            raise ConfigError("panels and workers must be at least 1")
        if len(self.modes) != 2:
            raise ConfigError("need exactly two field modes")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_nmax(self, n_max: int) -> "RunConfig":
        return self.replace(grid=FockGrid((n_max, n_max), self.grid.tail_tol))

    # --- flat key = value text format ---------------------------------------

    def to_text(self) -> str:
        p = self.params
        lines = ["# lambdajc run configuration"]
        kv = [
            ("name", self.name),
            ("omega", _floats_text(p.omega)),
            ("Omega", _floats_text(p.Omega)),
            ("delta", _floats_text(p.delta_override)),
            ("lambda", _floats_text(p.lam)),
            ("chi", repr(p.chi)),
            ("f1", p.f_spec[0].to_text()),
            ("f2", p.f_spec[1].to_text()),
            ("g1", p.g_spec[0].to_text()),
            ("g2", p.g_spec[1].to_text()),
            ("alpha1", repr(self.modes[0].alpha)),
            ("alpha2", repr(self.modes[1].alpha)),
            ("nmax", f"{self.grid.n_max[0]},{self.grid.n_max[1]}"),
            ("tail_tol", repr(self.grid.tail_tol)),
            ("tau_max", repr(self.tau_max)),
            ("dtau", repr(self.d_tau_entropy)),
            ("dtau_squeezing", repr(self.d_tau_squeezing)),
            ("dist_mode", self.dist_mode),
            ("dem", _bool_text(self.dem)),
            ("squeezing", _bool_text(self.squeezing)),
            ("norm", _bool_text(self.norm)),
            ("oracle_check", _bool_text(self.oracle_check)),
            ("panels", str(self.panels)),
            ("workers", str(self.workers)),
        ]
        lines += [f"{k} = {v}" for k, v in kv]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = value
        try:
            return _config_from_mapping(raw)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


_CONFIG_KEYS = {"name", "omega", "Omega", "delta", "lambda", "chi", "f1", "f2", "g1", "g2",
                "alpha1", "alpha2", "nmax", "tail_tol", "tau_max", "dtau", "dtau_squeezing",
                "dist_mode", "dem", "squeezing", "norm", "oracle_check", "panels", "workers"}


def _floats_text(values) -> str:
    return "none" if values is None else ",".join(repr(float(v)) for v in values)


def _bool_text(flag: bool) -> str:
    return "true" if flag else "false"


def _parse_floats(text: Optional[str]):
    if text is None or text.lower() == "none":
        return None
    return tuple(float(v) for v in text.split(","))


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _config_from_mapping(raw) -> RunConfig:
    spec = NonlinearitySpec.from_text
    params = SystemParams(
        omega=_parse_floats(raw.get("omega")),
        Omega=_parse_floats(raw.get("Omega")),
        delta_override=_parse_floats(raw.get("delta")),
        lam=_parse_floats(raw.get("lambda", "1.0,1.0")),
        chi=float(raw.get("chi", "0.0")),
        f_spec=(spec(raw.get("f1", "constant")), spec(raw.get("f2", "constant"))),
        g_spec=(spec(raw.get("g1", "constant")), spec(raw.get("g2", "constant"))))
    modes = (CoherentModeSpec(complex(raw.get("alpha1", "0j"))),
             CoherentModeSpec(complex(raw.get("alpha2", "0j"))))
    tail_tol = float(raw.get("tail_tol", repr(DEFAULT_TAIL_TOL)))
    if "nmax" in raw:
        parts = [int(v) for v in raw["nmax"].split(",")]
        grid = FockGrid(tuple(parts * 2 if len(parts) == 1 else parts), tail_tol)
    else:
        grid = FockGrid.for_modes(modes, tail_tol)
    return RunConfig(
        params=params, modes=modes, grid=grid,
        tau_max=float(raw.get("tau_max", "25.0")),
        d_tau_entropy=float(raw.get("dtau", "0.01")),
        d_tau_squeezing=float(raw.get("dtau_squeezing", "0.05")),
        dist_mode=raw.get("dist_mode", TRACED),
        dem=_parse_bool(raw.get("dem", "true")),
        squeezing=_parse_bool(raw.get("squeezing", "true")),
        norm=_parse_bool(raw.get("norm", "true")),
        oracle_check=_parse_bool(raw.get("oracle_check", "false")),
        panels=int(raw.get("panels", str(DEFAULT_PANELS))),
        workers=int(raw.get("workers", "1")),
        name=raw.get("name", ""))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_text(text)


# --- presets ------------------------------------------------------------------

MEAN_PHOTON = 10.0
RESONANT = (0.0, 0.0)
DETUNED = (7.0, 15.0)
KERR = 0.4

# panel -> (chi, Kerr deformation g, detunings)
_PANELS = {
    "a": (0.0, "constant", RESONANT),
    "b": (KERR, "constant", RESONANT),
    "c": (KERR, "inverse_sqrt_n", RESONANT),
    "d": (0.0, "constant", DETUNED),
    "e": (KERR, "constant", DETUNED),
    "f": (KERR, "inverse_sqrt_n", DETUNED),
}
_COUPLINGS = {"const": "constant", "intensity": "sqrt_n"}

PRESET_NAMES = tuple(f"fig{fig}{panel}-{coupling}"
                     for fig in (2, 3) for panel in _PANELS for coupling in _COUPLINGS)


def preset(name: str) -> RunConfig:
    """Parameters of one figure panel; fig2 presets trace entropy, fig3 add squeezing."""
    if name not in PRESET_NAMES:
        raise UnknownPresetError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    fig, panel, coupling = name[3], name[4], name.split("-", 1)[1]
    chi, g_kind, delta = _PANELS[panel]
    f = NonlinearitySpec(_COUPLINGS[coupling])
    g = NonlinearitySpec(g_kind)
    params = SystemParams(lam=(1.0, 1.0), chi=chi, f_spec=(f, f), g_spec=(g, g),
                          delta_override=delta)
    mode = CoherentModeSpec.from_mean_photon(MEAN_PHOTON)
    modes = (mode, mode)
    return RunConfig(params=params, modes=modes,
                     grid=FockGrid.for_modes(modes, DEFAULT_TAIL_TOL, NMAX_CAP),
                     squeezing=(fig == "3"), name=name)


# --- sweep --------------------------------------------------------------------

@dataclass(frozen=True)
class OutputRow:
    tau: float
    dem: Optional[float] = None
    EX: Optional[float] = None
    EP: Optional[float] = None
    norm_error: Optional[float] = None

    def fields(self) -> List[str]:
        return [_fmt(self.tau), _fmt(self.dem), _fmt(self.EX), _fmt(self.EP),
                _fmt(self.norm_error)]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.12g}"


@dataclass
class SweepResult:
    rows: List[OutputRow]
    report: dict = field(default_factory=dict)


def _time_grid(tau_max: float, step: float) -> List[float]:
    count = int(math.floor(tau_max / step + 1e-9))
    return [k * step for k in range(count + 1)]


def sample_times(config: RunConfig):
    """Merged, strictly increasing sample times with (entropy, squeezing) flags."""
    slots = {}
    if config.dem or config.norm:
        for t in _time_grid(config.tau_max, config.d_tau_entropy):
            slots.setdefault(round(t, 9), [t, False, False])[1] = True
    if config.squeezing:
        for t in _time_grid(config.tau_max, config.d_tau_squeezing):
            slots.setdefault(round(t, 9), [t, False, False])[2] = True
    return [tuple(slots[k]) for k in sorted(slots)]


def _check_config(config: RunConfig):
    if (config.squeezing and config.dist_mode == SCHRODINGER
            and not config.params.has_frequencies):
        raise MissingFrequenciesError(
            "schrodinger distribution mode needs omega and Omega in the configuration")


def run_sweep(config: RunConfig, workers: Optional[int] = None) -> SweepResult:
    """Evaluate entropy, squeezing and norm drift over the time grid.

    Each time sample is computed independently with fixed array shapes, so
    the rows do not depend on how many worker threads are used.
    """
    _check_config(config)
    workers = config.workers if workers is None else workers
    blocks = prepare_blocks(config.params, config.modes, config.grid)
    qgrid = table = None
    if config.squeezing:
        qgrid = QuadratureGrid.for_nmax(config.grid.n_max[0], config.panels)
        table = eigenfunction_table(config.grid.n_max[0] + 1, qgrid.points)

    def evaluate(slot):
        t, on_entropy, on_squeezing = slot
        snap = assemble_state(blocks, t)
        out = {"tau": t, "block_norm_error": float(np.max(np.abs(snap.block_norms() - 1.0)))}
        norm_error = abs(snap.global_norm() - 1.0)
        out["norm_error"] = norm_error
        if on_entropy and config.dem:
            dm = reduced_atom_dm(snap)
            eig = hermitian3_eigs_cardano(dm)
            out["dem"] = von_neumann_entropy(eig)
            out["rho"] = dm.rho
            out["trace_error"] = abs(dm.trace - 1.0)
            out["eig_clamped"] = eig.clamped + eig.arg_clamped
        if on_squeezing:
            out["squeezing"] = squeezing_sample(snap, qgrid, config.dist_mode, table)
        return out

    slots = sample_times(config)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, slots))
    else:
        results = [evaluate(s) for s in slots]

    rows = []
    for r in results:
        sq = r.get("squeezing")
        rows.append(OutputRow(
            tau=r["tau"], dem=r.get("dem"),
            EX=sq.EX if sq else None, EP=sq.EP if sq else None,
            norm_error=r["norm_error"] if config.norm else None))

    report = {
        "preset": config.name,
        "n_max": list(config.grid.n_max),
        "blocks": blocks.n_blocks,
        "degenerate_blocks": len(blocks.degenerate_blocks),
        "cubic_clamped": blocks.cubic.clamped,
        "max_cubic_residual": float(blocks.cubic.residual.max()),
        "max_block_norm_error": max(r["block_norm_error"] for r in results),
        "max_norm_error": max(r["norm_error"] for r in results),
        "dist_mode": config.dist_mode,
        "momentum_convention": MOMENTUM_CONVENTION,
    }
    dems = [r["dem"] for r in results if "dem" in r]
    if dems:
        report.update(dem_min=min(dems), dem_max=max(dems),
                      max_trace_error=max(r["trace_error"] for r in results if "dem" in r),
                      eigen_clamped=sum(r["eig_clamped"] for r in results if "dem" in r))
        if config.oracle_check:
            rhos = np.array([r["rho"] for r in results if "dem" in r])
            oracle = [von_neumann_entropy(np.clip(e, 0.0, 1.0))
                      for e in hermitian3_eigs_bisection(rhos)]
            report["max_entropy_oracle_deviation"] = float(
                np.max(np.abs(np.array(dems) - np.array(oracle))))
    sqs = [r["squeezing"] for r in results if "squeezing" in r]
    if sqs:
        report["min_uncertainty_product"] = min(s.uncertainty_product for s in sqs)
    return SweepResult(rows, report)


# --- oracle validation --------------------------------------------------------

VALIDATION_TIME_FRACTIONS = (0.02, 0.2, 0.5, 1.0)


def stratified_blocks(grid: FockGrid, per_axis: int = 7, mean_block=None):
    """Deterministic spread of (n1, n2) over the grid: a per_axis^2 lattice plus one block."""
    axes = [sorted({int(round(v)) for v in np.linspace(0, n, per_axis)}) for n in grid.n_max]
    picks = [(i, j) for i in axes[0] for j in axes[1]]
    if mean_block is not None and tuple(mean_block) not in picks:
        picks.append(tuple(mean_block))
    return picks


def validate(config: RunConfig) -> dict:
    """Cross-check the closed form against the RK4 oracle and audit the solver."""
    blocks = prepare_blocks(config.params, config.modes, config.grid)
    times = [f * config.tau_max for f in VALIDATION_TIME_FRACTIONS]
    mean = tuple(min(int(round(m.mean_photon)), n)
                 for m, n in zip(config.modes, config.grid.n_max))
    picks = stratified_blocks(config.grid, mean_block=mean)

    max_dev = 0.0
    checked = 0
    for ij in picks:
        if blocks.degenerate[ij]:
            continue
        c = blocks.couplings[ij]
        ode = ode_oracle_trajectory(c, times, default_ode_step(c))
        sol = blocks.block(*ij)
        closed = np.array([amplitudes_at(sol, t) for t in times])
        max_dev = max(max_dev, float(np.max(np.abs(ode - closed))))
        checked += 1

    block_norm = global_norm = 0.0
    for t in times:
        snap = assemble_state(blocks, t)
        block_norm = max(block_norm, float(np.max(np.abs(snap.block_norms() - 1.0))))
        global_norm = max(global_norm, abs(snap.global_norm() - 1.0))

    report = {
        "preset": config.name,
        "blocks_checked": checked,
        "times": times,
        "max_amplitude_deviation": max_dev,
        "max_cubic_residual": float(blocks.cubic.residual.max()),
        "cubic_clamped": blocks.cubic.clamped,
        "degenerate_blocks": len(blocks.degenerate_blocks),
        "max_block_norm_error": block_norm,
        "max_norm_error": global_norm,
    }
    failures = []
    if max_dev >= MAX_ODE_DEVIATION:
        failures.append(f"closed form vs RK4 deviation {max_dev:.3g}")
    if report["max_cubic_residual"] >= MAX_CUBIC_RESIDUAL:
        failures.append(f"cubic residual {report['max_cubic_residual']:.3g}")
    if block_norm >= MAX_BLOCK_NORM_ERROR:
        failures.append(f"block norm error {block_norm:.3g}")
    if global_norm >= MAX_GLOBAL_NORM_ERROR:
        failures.append(f"global norm error {global_norm:.3g}")
    report["passed"] = not failures
    if failures:
        raise ValidationFailure("validation failed: " + "; ".join(failures), report)
    return report


# --- output -------------------------------------------------------------------

def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.fields())
    return buf.getvalue()


def write_csv(rows, path) -> None:
    """Write atomically: the file only appears once it is complete."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".part",
                               dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(rows))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def plot_script(csv_path, config: RunConfig) -> str:
    title = config.name or "lambdajc"
    lines = [
        f"# gnuplot script for {Path(csv_path).name}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'tau'",
        f"set title '{title}'",
    ]
    plots = []
    if config.dem:
        plots.append(f"'{csv_path}' using 1:2 with lines title 'DEM'")
    if config.squeezing:
        plots.append(f"'{csv_path}' using 1:3 with lines title 'E_X'")
        plots.append(f"'{csv_path}' using 1:4 with lines title 'E_P'")
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


# --- command line -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lambdajc",
        description="Entanglement and entropy squeezing of a Lambda atom in a two-mode "
                    "Kerr cavity, from closed-form amplitudes.")
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--preset", metavar="NAME", help="figure preset, e.g. fig2a-const")
    src.add_argument("--config", metavar="PATH", help="key = value configuration file")
    ap.add_argument("--out", metavar="PATH", help="CSV output (default: stdout)")
    ap.add_argument("--tau-max", type=float)
    ap.add_argument("--dtau", type=float, help="entropy time step")
    ap.add_argument("--dtau-squeezing", type=float)
    ap.add_argument("--nmax", type=int, help="Fock cutoff for both modes")
    ap.add_argument("--dist-mode", choices=DIST_MODES)
    ap.add_argument("--squeezing", action="store_true", default=None,
                    help="compute entropy squeezing (fig3 presets do by default)")
    ap.add_argument("--no-squeezing", dest="squeezing", action="store_false")
    ap.add_argument("--oracle-check", action="store_true",
                    help="validate against the RK4 and bisection oracles")
    ap.add_argument("--emit-plot-script", action="store_true",
                    help="write a gnuplot script next to the CSV")
    ap.add_argument("--workers", type=int, help="worker threads (output is identical)")
    ap.add_argument("--write-config", metavar="PATH",
                    help="write the effective configuration and exit")
    ap.add_argument("--list-presets", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def config_from_args(args) -> RunConfig:
    if args.config:
        config = load_config(args.config)
    elif args.preset:
        config = preset(args.preset)
    else:
        raise ConfigError("one of --preset or --config is required")
    changes = {}
    if args.tau_max is not None:
        changes["tau_max"] = args.tau_max
    if args.dtau is not None:
        changes["d_tau_entropy"] = args.dtau
    if args.dtau_squeezing is not None:
        changes["d_tau_squeezing"] = args.dtau_squeezing
    if args.dist_mode is not None:
        changes["dist_mode"] = args.dist_mode
    if args.squeezing is not None:
        changes["squeezing"] = args.squeezing
    if args.oracle_check:
        changes["oracle_check"] = True
    if args.workers is not None:
        changes["workers"] = args.workers
    config = config.replace(**changes)
    if args.nmax is not None:
        if args.nmax < 0:
            raise ConfigError("--nmax must be nonnegative")
        config = config.with_nmax(args.nmax)
    return config


def _report(obj) -> None:
    print(json.dumps(obj, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(PRESET_NAMES))
        return EXIT_OK
    try:
        config = config_from_args(args)
        if args.write_config:
            Path(args.write_config).write_text(config.to_text(), encoding="utf-8")
            return EXIT_OK
        _check_config(config)
        if config.oracle_check:
            _report({"validation": validate(config)})
        result = run_sweep(config)
        if config.oracle_check:
            dev = result.report.get("max_entropy_oracle_deviation", 0.0)
            if dev >= 1e-8:
                raise ValidationFailure(f"entropy oracle deviation {dev:.3g}", result.report)
        if args.out:
            write_csv(result.rows, args.out)
            if args.emit_plot_script:
                Path(args.out).with_suffix(".gp").write_text(
                    plot_script(args.out, config), encoding="utf-8")
        else:
            sys.stdout.write(format_csv(result.rows))
        _report({"summary": result.report})
        return EXIT_OK
    except ValidationFailure as exc:
        print(f"lambdajc: {exc}", file=sys.stderr)
        if exc.report:
            _report({"validation": exc.report})
        return EXIT_VALIDATION
    except (ConfigError, UnknownPresetError, DomainError, MissingFrequenciesError) as exc:
        print(f"lambdajc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ComplexRootsError, DegenerateRootsError, StepSizeError, NonHermitianError,
            LambdaJCError, FloatingPointError) as exc:
        print(f"lambdajc: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
