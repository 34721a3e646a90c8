"""Parameter sweeps over scenarios and CSV emission.

A sweep takes a base scenario and up to two named parameter axes, runs the
analytic solver and/or the Monte-Carlo simulator on every grid point, and
writes one CSV row per point in grid order (axis1 outer, axis2 inner).
Metadata goes into ``#``-prefixed comment lines above the fixed header.

The ``wall_time_s`` column is emitted empty unless timing is explicitly
requested: filled timings would break the guarantee that a sweep with a fixed
seed and trial count reproduces byte-identical CSV output.
"""

from __future__ import annotations

import configparser
import sys
import time
from dataclasses import dataclass, field

from .analytic import ConvergenceError, analyze
from .model import (
    ScenarioConfig,
    ScenarioValidationError,
    parse_scenario,
    validate_scenario,
    with_axis_value,
)
from .simulate import run_trials

__all__ = [
    "SweepAxis",
    "SweepSpec",
    "ResultRow",
    "CSV_HEADER",
    "run_sweep",
    "emit_csv",
    "load_sweep",
    "preset_sweep",
    "PRESET_NAMES",
]

CSV_HEADER = (
    "axis1,axis2,pe_analytic,rho,es_analytic,"
    "pe_sim,pe_sim_se,es_sim,es_sim_se,trials,wall_time_s"
)

MODES = ("analytic", "simulate", "both")


@dataclass(frozen=True)
class SweepAxis:
    path: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    axes: tuple
    trials: int = 200
    mode: str = "both"
    label: str = "sweep"

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep needs one or two axes")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class ResultRow:
    axis1: float
    axis2: float | None
    pe_analytic: float | None = None
    rho: float | None = None
    es_analytic: float | None = None
    pe_sim: float | None = None
    pe_sim_se: float | None = None
    es_sim: float | None = None
    es_sim_se: float | None = None
    trials: int | None = None
    wall_time_s: float | None = None
    error: str | None = None  # in-memory only; the CSV schema is fixed


def _grid(spec: SweepSpec):
    first = spec.axes[0].values
    second = spec.axes[1].values if len(spec.axes) == 2 else (None,)
    for v1 in first:
        for v2 in second:
            yield v1, v2


def _point_config(spec: SweepSpec, v1, v2) -> ScenarioConfig:
    cfg = with_axis_value(spec.base, spec.axes[0].path, v1)
    if v2 is not None:
        cfg = with_axis_value(cfg, spec.axes[1].path, v2)
    return validate_scenario(cfg)


def run_sweep(spec: SweepSpec, master_seed: int, workers: int = 1, timing: bool = False):
    """Evaluate every grid point; failures are recorded in the row and the
    sweep continues.  Analytic columns never depend on the seed; simulation
    columns are bit-reproducible for any worker count."""
    rows = []
    for point_index, (v1, v2) in enumerate(_grid(spec)):
        row = ResultRow(axis1=v1, axis2=v2)
        started = time.perf_counter()
        try:
            cfg = _point_config(spec, v1, v2)
            if spec.mode in ("analytic", "both"):
                rep = analyze(cfg)
                row.pe_analytic = rep.pe_avg
                row.rho = rep.rho
                row.es_analytic = rep.es_total
            if spec.mode in ("simulate", "both"):
                summary = run_trials(
                    cfg, spec.trials, (master_seed, point_index), workers=workers
                )
                row.pe_sim = summary.pe_hat
                row.pe_sim_se = summary.pe_se
                row.es_sim = summary.es_hat
                row.es_sim_se = summary.es_se
                row.trials = spec.trials
        except (ScenarioValidationError, ConvergenceError, ValueError) as exc:
            row.error = str(exc)
            print(f"sweep point ({v1}, {v2}) failed: {exc}", file=sys.stderr)
        if timing:
            row.wall_time_s = time.perf_counter() - started
        rows.append(row)
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".10g")


def emit_csv(rows, destination, metadata=()):
    """Write rows under the fixed header; floats carry 10 significant digits,
    missing values are empty fields, UTF-8 with LF endings."""
    if not rows:
        raise ValueError("no rows to write")
    lines = [f"# {entry}" for entry in metadata]
    lines.append(CSV_HEADER)
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.axis1,
                    r.axis2,
                    r.pe_analytic,
                    r.rho,
                    r.es_analytic,
                    r.pe_sim,
                    r.pe_sim_se,
                    r.es_sim,
                    r.es_sim_se,
                    r.trials,
                    r.wall_time_s,
                )
            )
        )
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def sweep_metadata(spec: SweepSpec, master_seed: int) -> list[str]:
    """Deterministic comment lines describing a sweep (no timestamps)."""
    meta = [f"scenario: {spec.label}"]
    for i, ax in enumerate(spec.axes, start=1):
        meta.append(f"axis{i}: {ax.path} = [{', '.join(_fmt(v) for v in ax.values)}]")
    if len(spec.axes) == 1:
        meta.append("axis2: (none)")
    meta.append(f"seed: {master_seed} trials: {spec.trials} mode: {spec.mode}")
    base = spec.base
    meta.append(
        f"base: n={base.n} alpha={_fmt(base.alpha)} tc={_fmt(base.tc)} ts={_fmt(base.ts)}"
    )
    return meta


# ---------------------------------------------------------------------------
# Sweep files: a scenario file plus a [sweep] section


def _parse_axis(text: str) -> SweepAxis:
    path, _, values = text.partition(":")
    if not values.strip():
        raise ValueError(f"axis needs 'path: v1,v2,...', got {text!r}")
    return SweepAxis(path=path.strip(), values=[float(t) for t in values.split(",")])


def load_sweep(path) -> SweepSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path, "r", encoding="utf-8") as fh:
        cp.read_file(fh)
    base = validate_scenario(parse_scenario(cp))
    if not cp.has_section("sweep"):
        raise ValueError(f"{path}: missing [sweep] section")
    sw = cp["sweep"]
    axes = [_parse_axis(sw["axis1"])]
    if "axis2" in sw:
        axes.append(_parse_axis(sw["axis2"]))
    return SweepSpec(
        base=base,
        axes=axes,
        trials=int(sw.get("trials", 200)),
        mode=sw.get("mode", "both").strip(),
        label=sw.get("label", "sweep").strip(),
    )


# ---------------------------------------------------------------------------
# Presets: the three stock experiments


PRESET_NAMES = ("figA", "figB", "figC")


def preset_sweep(name: str, trials: int = 200, mode: str = "both") -> SweepSpec:
    """Stock sweeps.

    figA: two mask types (mask / no mask), grid over both layers' mean
          degrees.  tc/ts are explicit inputs of this preset (defaults 0.6
          and 0.5) and alpha defaults to 0.25; both are recorded in the CSV
          metadata.
    figB: surgical vs cloth mask types, grid over school membership alpha
          and the surgical fraction m[0].
    figC: inward-good / outward-good / no-mask types with the no-mask
          fraction pinned at 0.1; sweeps the outward-good fraction, the
          inward-good fraction taking the remainder.
    """
    from .model import DegreePMF, MaskSet  # local import keeps module load light

    if name == "figA":
        base = ScenarioConfig(
            n=10_000,
            alpha=0.25,
            dist_c=DegreePMF.poisson(6.0),
            dist_s=DegreePMF.poisson(8.0),
            tc=0.6,
            ts=0.5,
            masks=MaskSet(m=[0.2, 0.8], eps_in=[0.5, 0.0], eps_out=[0.6, 0.0]),
        )
        axes = (
            SweepAxis("md_c", (1, 2, 3, 4, 5, 6, 7, 8)),
            SweepAxis("md_s", (2, 4, 6, 8)),
        )
    elif name == "figB":
        base = ScenarioConfig(
            n=10_000,
            alpha=0.5,
            dist_c=DegreePMF.poisson(6.0),
            dist_s=DegreePMF.poisson(8.0),
            tc=0.6,
            ts=0.5,
            masks=MaskSet(m=[0.5, 0.5], eps_in=[0.7, 0.5], eps_out=[0.8, 0.5]),
        )
        axes = (
            SweepAxis("alpha", (0.1, 0.3, 0.5, 0.7, 0.9)),
            SweepAxis("m[0]", (0.1, 0.3, 0.5, 0.7, 0.9)),
        )
    elif name == "figC":
        base = ScenarioConfig(
            n=10_000,
            alpha=0.5,
            dist_c=DegreePMF.poisson(6.0),
            dist_s=DegreePMF.poisson(8.0),
            tc=0.6,
            ts=0.5,
            masks=MaskSet(
                m=[0.8, 0.1, 0.1],
                eps_in=[0.7, 0.3, 0.0],
                eps_out=[0.3, 0.7, 0.0],
            ),
        )
        axes = (SweepAxis("m[1]/m[0]", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)),)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return SweepSpec(base=base, axes=axes, trials=trials, mode=mode, label=name)
