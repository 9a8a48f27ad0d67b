"""Command-line front end.

    laser-mpemba <stationary|spectrum|evolve|mpemba|scan> [--config PATH] [overrides]

Configuration is an INI file::

    [laser]
    gain = 1.2
    kappa = 1
    n_sat = 1600
    # n_max = 800            (optional; auto-sized otherwise)

    [integrator]
    t_end = 60               (default 10 / gap)
    samples = 201

    [run]
    modes = 64               (or "all")
    method = auto            (auto | spectral | ode)
    out = results
    alphas = 0, 1, 2
    grid = 1.2, 1.5, 2.0

    [state b]
    kind = fock
    n = nbar

State parameters accept numbers or products with the symbols ``nbar``
(n_s(G/kappa - 1)) and ``sigma2`` (nbar + n_s), e.g. ``mean = 0.9*nbar``.
Numbers are written with 12 significant digits so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import itertools
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import generator, mpemba, spectral, states
from .dynamics import IntegratorConfig
from .errors import LaserMpembaError, NumericalError
from .model import LaserParams, derived_scalars, stationary_distribution

log = logging.getLogger("laser_mpemba")

COMMANDS = ("stationary", "spectrum", "evolve", "mpemba", "scan")
DEFAULT_SAMPLES = 201
DEFAULT_GRID = (1.2, 1.5, 2.0)


class ConfigError(ValueError):
    pass


@dataclass
class StateEntry:
    label: str
    kind: str
    values: dict[str, str]


@dataclass
class ScenarioConfig:
    params: LaserParams
    states: list[StateEntry]
    t_end: float | None = None
    samples: int = DEFAULT_SAMPLES
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    modes: int | None = spectral.DEFAULT_MODES  # None: all modes
    method: str = "auto"
    output_dir: Path = Path("results")
    alphas: tuple[int, ...] = (0, 1, 2)
    grid: tuple[float, ...] = DEFAULT_GRID
    n_max_override: int | None = None

    def integrator(self, params: LaserParams | None = None) -> IntegratorConfig:
        t_end = self.t_end if self.t_end is not None else default_t_end(params or self.params)
        return IntegratorConfig(t_end, self.samples, self.rel_tol, self.abs_tol)

    def n_modes(self, params: LaserParams) -> int:
        return params.size if self.modes is None else min(self.modes, params.size)


def default_t_end(params: LaserParams) -> float:
    gap = derived_scalars(params).gap
    # at threshold the linear gap vanishes; fall back to the cavity time scale
    return 10.0 / gap if gap > 0 else 100.0 / params.kappa


# ---------------------------------------------------------------- config


def _symbolic(text: str, params: LaserParams) -> float:
    d = derived_scalars(params)
    symbols = {"nbar": d.n_bar, "sigma2": d.n_bar + params.n_sat, "n_sat": params.n_sat}
    value = 1.0
    for factor in text.replace(" ", "").split("*"):
        if factor in symbols:
            value *= symbols[factor]
        else:
            try:
                value *= float(factor)
            except ValueError:
                raise ConfigError(f"cannot evaluate {text!r}") from None
    return value


_PARAM_KEYS = {
    "vacuum": (),
    "fock": ("n",),
    "poisson": ("mean",),
    "thermal": ("mean",),
    "two_fock": ("mean", "variance"),
    "uniform_window": ("low", "high"),
    "custom": ("path",),
}


def state_spec(entry: StateEntry, params: LaserParams) -> states.InitialStateSpec:
    keys = _PARAM_KEYS.get(entry.kind)
    if keys is None:
        raise ConfigError(f"state {entry.label!r}: unknown kind {entry.kind!r}")
    if entry.kind == "custom":
        path = entry.values.get("path") or entry.values.get("param1")
        if not path:
            raise ConfigError(f"state {entry.label!r}: custom state needs path")
        return states.InitialStateSpec.custom(path)
    args = []
    for i, key in enumerate(keys, 1):
        raw = entry.values.get(key, entry.values.get(f"param{i}"))
        if raw is None:
            raise ConfigError(f"state {entry.label!r}: missing {key}")
        args.append(_symbolic(raw, params))
    try:
        return states.InitialStateSpec(entry.kind, *args)
    except ValueError as exc:
        raise ConfigError(f"state {entry.label!r}: {exc}") from exc


def default_states() -> list[StateEntry]:
    """Vacuum, Fock at n_bar and Poisson at 0.9 n_bar."""
    return [
        StateEntry("a", "vacuum", {}),
        StateEntry("b", "fock", {"n": "nbar"}),
        StateEntry("c", "poisson", {"mean": "0.9*nbar"}),
    ]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def load_config(path: str | None, overrides: dict[str, str]) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc

    def get(section: str, key: str, default=None):
        if key in overrides and overrides[key] is not None:
            return overrides[key]
        return cp.get(section, key, fallback=default)

    try:
        gain = float(get("laser", "gain", 1.2))
        kappa = float(get("laser", "kappa", 1.0))
        n_sat = float(get("laser", "n_sat", 1600.0))
        n_max_raw = get("laser", "n_max")
        n_max = int(n_max_raw) if n_max_raw not in (None, "", "auto") else None
        params = LaserParams(gain, kappa, n_sat, n_max)

        t_end_raw = get("integrator", "t_end")
        t_end = float(t_end_raw) if t_end_raw not in (None, "", "auto") else None
        samples = int(get("integrator", "samples", DEFAULT_SAMPLES))
        rel_tol = float(get("integrator", "rel_tol", 1e-8))
        abs_tol = float(get("integrator", "abs_tol", 1e-12))

        modes_raw = str(get("run", "modes", spectral.DEFAULT_MODES)).strip()
        modes = None if modes_raw == "all" else int(modes_raw)
        if modes is not None and modes < 1:
            raise ConfigError("modes must be >= 1 or 'all'")
        method = str(get("run", "method", "auto")).strip()
        if method not in ("auto", "spectral", "ode"):
            raise ConfigError(f"method must be auto, spectral or ode, not {method!r}")
        out = Path(get("run", "out", "results"))
        alphas = tuple(int(a) for a in _floats(get("run", "alphas", "0, 1, 2")))
        grid = _floats(get("run", "grid", ", ".join(map(str, DEFAULT_GRID))))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    entries = []
    for section in cp.sections():
        if not section.startswith("state"):
            continue
        label = section[len("state") :].strip().strip(":").strip()
        if not label:
            raise ConfigError(f"section [{section}] needs a label, e.g. [state b]")
        values = dict(cp.items(section))
        kind = values.pop("kind", None)
        if kind is None:
            raise ConfigError(f"state {label!r} has no kind")
        entries.append(StateEntry(label, kind.strip(), values))
    labels = [e.label for e in entries]
    if len(set(labels)) != len(labels):
        raise ConfigError("state labels must be unique")

    cfg = ScenarioConfig(
        params=params,
        states=entries or default_states(),
        t_end=t_end,
        samples=samples,
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        modes=modes,
        method=method,
        output_dir=out,
        alphas=alphas,
        grid=grid,
        n_max_override=n_max,
    )
    try:
        cfg.integrator()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for entry in cfg.states:
        state_spec(entry, params)
    return cfg


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_meta(out: Path, meta: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run_meta", "w", encoding="ascii") as fh:
        for key, value in meta.items():
            fh.write(f"{key} = {value}\n")


# ---------------------------------------------------------------- commands


def cmd_stationary(cfg: ScenarioConfig) -> int:
    params = cfg.params
    ps = stationary_distribution(params)
    d = derived_scalars(params)
    n = np.arange(params.size)
    mean, var = ps.mean(), ps.variance()
    poisson_ref = stats.poisson.pmf(n, mean)
    write_csv(
        cfg.output_dir / "stationary.csv",
        ["n", "p_stationary", "p_poisson_reference"],
        zip(n, ps.probs, poisson_ref),
    )
    print(f"mean = {fmt(mean)}")
    print(f"variance = {fmt(var)}")
    print(f"n_p = {fmt(d.n_peak)}")
    print(f"gap = {fmt(d.gap)}")
    return 0


def cmd_spectrum(cfg: ScenarioConfig) -> int:
    params = cfg.params
    d = derived_scalars(params)
    dec = spectral.decompose_model(params, cfg.n_modes(params))
    weights = spectral.bulk_weights(dec)
    low = spectral.vacuum_weights(dec)
    ladder = spectral.ladder_modes(dec)
    ladder_order = np.full(dec.n_modes, -1)
    ladder_order[ladder] = np.arange(ladder.size)
    lam = dec.eigenvalues
    lam1 = lam[1] if lam.size > 1 else math.nan
    rows = []
    for a, la in enumerate(lam):
        asym = -a * d.gap
        rel = abs(la - asym) / max(abs(asym), abs(d.gap)) if d.gap else math.nan
        rows.append([a, la, asym, rel, la / lam1, weights[a], low[a], ladder_order[a]])
    write_csv(
        cfg.output_dir / "eigenvalues.csv",
        ["alpha", "lambda_exact", "lambda_asymptotic", "rel_error", "ratio",
         "bulk_weight", "vacuum_weight", "ladder_order"],
        rows,
    )

    n = np.arange(params.size)
    win = spectral.bulk_window(params)
    header, columns = ["n"], [n]
    for alpha in cfg.alphas:
        if alpha >= ladder.size:
            log.warning("ladder order %d not among the computed modes; skipped", alpha)
            continue
        idx = ladder[alpha]
        mode = spectral.AsymptoticMode.from_params(alpha, params)
        asym = spectral.asymptotic_left(mode, params, n)
        exact = dec.left_eigs[:, idx]
        if params.above_threshold:
            scale, _ = spectral._scale_match(exact[win], asym[win])
            exact = scale * exact
        header += [f"phi_exact_{alpha}", f"phi_asymptotic_{alpha}"]
        columns += [exact, asym]
    write_csv(cfg.output_dir / "eigenfunctions.csv", header, zip(*columns))
    print(f"modes = {dec.n_modes}")
    if lam.size > 1:
        print(f"lambda_1 = {fmt(lam[1])}")
    print(f"gap_asymptotic = {fmt(d.gap)}")
    return 0


def _trajectories(cfg: ScenarioConfig, params: LaserParams, entries, meta: dict, prefix: str = ""):
    """Propagate each labeled state; returns {label: Trajectory}."""
    gen = generator.build(params)
    icfg = cfg.integrator(params)
    dec = None
    if cfg.method != "ode":
        dec = spectral.decompose_model(params, cfg.n_modes(params))
    out = {}
    for entry in entries:
        p0 = states.make(state_spec(entry, params), params.n_max)
        traj = spectral.propagate(gen, p0, icfg, dec, cfg.method)
        meta[f"{prefix}method.{entry.label}"] = traj.method
        out[entry.label] = traj
    return out


def _base_meta(cfg: ScenarioConfig, command: str, params: LaserParams | None = None) -> dict:
    params = params or cfg.params
    return {
        "command": command,
        "gain": fmt(params.gain),
        "kappa": fmt(params.kappa),
        "n_sat": fmt(params.n_sat),
        "n_max": fmt(params.n_max),
        "method_requested": cfg.method,
        "modes": "all" if cfg.modes is None else str(cfg.modes),
    }


def cmd_evolve(cfg: ScenarioConfig) -> int:
    params = cfg.params
    meta = _base_meta(cfg, "evolve")
    meta["t_end"] = fmt(cfg.integrator().t_end)
    meta["samples"] = str(cfg.samples)
    trajs = _trajectories(cfg, params, cfg.states, meta)
    n = np.arange(params.size)
    for label, traj in trajs.items():
        header = ["n"] + [f"t={fmt(t)}" for t in traj.times]
        write_csv(cfg.output_dir / f"evolve_{label}.csv", header, np.column_stack([n, traj.states.T]))
        print(f"{label}: method = {traj.method}")
    write_meta(cfg.output_dir, meta)
    return 0


def mpemba_pair(dist_a, dist_b):
    """Orient a pair so state I starts closer to equilibrium, then compare."""
    if dist_b.distances[0] < dist_a.distances[0]:
        return True, mpemba.compare(dist_b, dist_a)
    return False, mpemba.compare(dist_a, dist_b)


def cmd_mpemba(cfg: ScenarioConfig) -> int:
    params = cfg.params
    ps = stationary_distribution(params)
    gap = derived_scalars(params).gap
    meta = _base_meta(cfg, "mpemba")
    meta["t_end"] = fmt(cfg.integrator().t_end)
    meta["samples"] = str(cfg.samples)
    trajs = _trajectories(cfg, params, cfg.states, meta)
    dists = {label: mpemba.distance_trajectory(t, ps, fit=False) for label, t in trajs.items()}
    labels = list(dists)
    times = next(iter(dists.values())).times
    write_csv(
        cfg.output_dir / "distance.csv",
        ["t"] + [f"D_{lab}" for lab in labels],
        np.column_stack([times] + [dists[lab].distances for lab in labels]),
    )
    rate_rows = []
    for lab in labels:
        dt = dists[lab]
        start, end = dt.fit_window if dt.fit_window else (math.nan, math.nan)
        rate_rows.append([lab, dt.distances[0], dt.fitted_rate, dt.fitted_rate / gap if gap else math.nan, start, end])
    write_csv(
        cfg.output_dir / "rates.csv",
        ["label", "D0", "fitted_rate", "rate_over_gap", "fit_start", "fit_end"],
        rate_rows,
    )
    rows = []
    for la, lb in itertools.combinations(labels, 2):
        swapped, v = mpemba_pair(dists[la], dists[lb])
        state_i, state_ii = (lb, la) if swapped else (la, lb)
        rows.append(
            [
                state_i,
                state_ii,
                dists[state_i].distances[0],
                dists[state_ii].distances[0],
                v.initial_order,
                len(v.crossing_times),
                ";".join(fmt(t) for t in v.crossing_times),
                v.rates[0],
                v.rates[1],
                v.mpemba_detected,
            ]
        )
        print(f"I={state_i} II={state_ii}: mpemba_detected = {fmt(v.mpemba_detected)}")
    write_csv(
        cfg.output_dir / "verdicts.csv",
        ["state_I", "state_II", "D_I0", "D_II0", "initial_order", "n_crossings",
         "crossing_times", "rate_I", "rate_II", "mpemba_detected"],
        rows,
    )
    write_meta(cfg.output_dir, meta)
    return 0


def scan_point(cfg: ScenarioConfig, ratio: float, meta: dict) -> list:
    """Moments, gap and the (c, b) verdict at one G/kappa.

    A failed verdict (e.g. no Fock state at n_bar = 0 below threshold) is
    logged and reported as NaN; the moments are still written.
    """
    kappa = cfg.params.kappa
    params = LaserParams(ratio * kappa, kappa, cfg.params.n_sat, cfg.n_max_override)
    ps = stationary_distribution(params)
    d = derived_scalars(params)
    mean, var = ps.mean(), ps.variance()
    dec = spectral.decompose_model(params, 2)
    gap_exact = -dec.eigenvalues[1]
    meta[f"g{fmt(ratio)}.n_max"] = fmt(params.n_max)
    row = [ratio, mean, var, var / mean if mean > 0 else math.nan, gap_exact, d.gap]
    try:
        pair = [StateEntry("c", "poisson", {"mean": "0.9*nbar"}), StateEntry("b", "fock", {"n": "nbar"})]
        # the canonical pair needs every mode; propagate falls back to ODE when short
        point_cfg = replace(cfg, modes=None, t_end=None)
        trajs = _trajectories(point_cfg, params, pair, meta, prefix=f"g{fmt(ratio)}.")
        dist_i = mpemba.distance_trajectory(trajs["c"], ps, fit=False)
        dist_ii = mpemba.distance_trajectory(trajs["b"], ps, fit=False)
        detected = mpemba.compare(dist_i, dist_ii).mpemba_detected
    except (NumericalError, ValueError) as exc:
        log.warning("G/kappa = %s: no verdict (%s)", fmt(ratio), exc)
        detected = math.nan
    return row + [detected]


def cmd_scan(cfg: ScenarioConfig) -> int:
    meta = _base_meta(cfg, "scan")
    meta["grid"] = ", ".join(fmt(g) for g in cfg.grid)
    rows, failures = [], 0
    for ratio in cfg.grid:
        try:
            rows.append(scan_point(cfg, ratio, meta))
        except (NumericalError, ValueError) as exc:
            failures += 1
            log.warning("scan point G/kappa = %s failed: %s", fmt(ratio), exc)
            rows.append([ratio] + [math.nan] * 6)
    write_csv(
        cfg.output_dir / "scan.csv",
        ["g_over_kappa", "mean", "variance", "fano", "gap_exact", "gap_asymptotic", "mpemba_detected"],
        rows,
    )
    write_meta(cfg.output_dir, meta)
    for row in rows:
        print(f"G/kappa = {fmt(row[0])}: mpemba_detected = {fmt(row[-1])}")
    return 2 if rows and failures == len(rows) else 0


HANDLERS = {
    "stationary": cmd_stationary,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "mpemba": cmd_mpemba,
    "scan": cmd_scan,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="laser-mpemba", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config")
    for flag in ("gain", "kappa", "n-sat", "n-max", "t-end", "samples", "rel-tol",
                 "abs-tol", "modes", "method", "out", "alphas", "grid"):
        ap.add_argument(f"--{flag}", dest=flag.replace("-", "_"))
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return HANDLERS[args.command](cfg)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (LaserMpembaError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
