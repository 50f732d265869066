"""Config-driven command line front end.

Every subcommand reads one strict JSON config (unknown or malformed keys
are rejected by name), writes its outputs into a target directory, and
finishes with a manifest.json naming every emitted file next to the fully
resolved config echo.  Identical config and seed produce byte-identical
outputs; no timestamps or machine state leak into any file.

Exit codes: 0 success, 1 config error, 2 numeric failure, 3 verdict
failure under --strict.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    CascadeSystem,
    IntegratorSpec,
    check_goy_correspondence,
    drift_report,
    integrate,
    time_avg_spectrum,
)
from .errors import CascadeError, ConfigurationError, NumericError
from .invariants import (
    WeightMatrix,
    audit_conservation,
    solve_invariant_weights,
)
from .models import (
    CouplingTable,
    DissipationSpec,
    ForcingSpec,
    HMatrix,
    ModelFamily,
    _pow,
    build_general,
    build_goy,
    build_s2_diag,
    build_s2_offdiag,
    build_s3_diag,
    h_diag,
    h_offdiag,
)
from .stationary import (
    bulk_residual,
    gamma_scan,
    spectrum_exponent,
    stationary_profile,
)

_SUBCOMMANDS = ("build", "audit", "scan", "simulate", "goy-check", "stationary")
_GAMMA_FAMILIES = (ModelFamily.S2_DIAG, ModelFamily.S3_DIAG, ModelFamily.S2_OFFDIAG)

_MISSING = object()


class _Section:
    """One config object with strict key accounting."""

    def __init__(self, data: object, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path} must be a JSON object")
        self._data = dict(data)
        self._path = path

    def _label(self, key: str) -> str:
        return f"{self._path}.{key}" if self._path else key

    def take(self, key: str, default: object = _MISSING) -> object:
        if key in self._data:
            return self._data.pop(key)
        if default is _MISSING:
            raise ConfigurationError(f"missing required key {self._label(key)}")
        return default

    def take_number(self, key: str, default: object = _MISSING) -> float | None:
        value = self.take(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{self._label(key)} must be a number")
        return float(value)

    def take_int(self, key: str, default: object = _MISSING) -> int | None:
        value = self.take(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{self._label(key)} must be an integer")
        return int(value)

    def take_bool(self, key: str, default: object = _MISSING) -> bool:
        value = self.take(key, default)
        if not isinstance(value, bool):
            raise ConfigurationError(f"{self._label(key)} must be true or false")
        return value

    def take_str(self, key: str, default: object = _MISSING) -> str | None:
        value = self.take(key, default)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ConfigurationError(f"{self._label(key)} must be a string")
        return value

    def subsection(self, key: str) -> "_Section":
        return _Section(self.take(key, None), self._label(key))

    def finish(self) -> None:
        if self._data:
            key = sorted(self._data)[0]
            raise ConfigurationError(f"unknown key {self._label(key)}")


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Fully resolved run configuration with defaults applied."""

    family: ModelFamily
    p: float
    r: int
    gamma: float | None
    h0: float
    eps: float
    a: float
    alpha: float
    s: int
    h_kind: str | None
    h_gamma: float
    h_h0: float
    dissipation: DissipationSpec
    forcing_kind: str
    forcing_values: tuple[float, ...] | None
    forcing_c: float
    forcing_width: int | None
    initial_kind: str
    initial_c: float
    initial_amplitude: float
    initial_shell: int
    initial_envelope: bool
    integrator: IntegratorSpec
    scan_interval: tuple[float, float]
    scan_step: float
    scan_tol: float
    audit_samples: int
    audit_tol: float
    audit_bandwidth: int | None
    seed: int
    output_dir: str | None
    echo: dict

    def require_gamma(self) -> float:
        if self.gamma is None:
            raise ConfigurationError(
                f"model.gamma is required for family {self.family.value}"
            )
        return self.gamma

    def h_matrix(self) -> HMatrix:
        if self.h_kind == "diag":
            return h_diag(self.p, self.r, self.h_gamma, self.h_h0)
        if self.h_kind == "offdiag":
            return h_offdiag(self.p, self.r, self.h_gamma, self.h_h0)
        raise ConfigurationError("model.h is required for family general")

    def build_table(self) -> CouplingTable:
        if self.family is ModelFamily.S2_DIAG:
            return build_s2_diag(self.p, self.r, self.require_gamma(), self.h0)
        if self.family is ModelFamily.S3_DIAG:
            return build_s3_diag(self.p, self.r, self.require_gamma(), self.h0)
        if self.family is ModelFamily.S2_OFFDIAG:
            return build_s2_offdiag(self.p, self.r, self.require_gamma(), self.h0)
        if self.family is ModelFamily.GOY:
            return build_goy(self.p, self.eps, self.a, self.r)
        return build_general(self.p, self.r, alpha=self.alpha, s=self.s, h=self.h_matrix())

    def initial_state(self, table: CouplingTable) -> np.ndarray:
        r = table.r
        if self.initial_kind == "stationary":
            return stationary_profile(self.p, r, self.initial_c).v.copy()
        if self.initial_kind == "single_shell":
            v = np.zeros(r + 1)
            if not 0 <= self.initial_shell <= r:
                raise ConfigurationError(
                    f"initial.shell must lie in 0..{r}, got {self.initial_shell}"
                )
            v[self.initial_shell] = self.initial_amplitude
            return v
        rng = np.random.default_rng(self.seed)
        v = self.initial_amplitude * rng.uniform(-1.0, 1.0, r + 1)
        if self.initial_envelope:
            v *= np.array([_pow(self.p, -5.0 * i / 6.0) for i in range(r + 1)])
        return v

    def forcing(self, table: CouplingTable) -> ForcingSpec:
        if self.forcing_kind == "none":
            return ForcingSpec.zero()
        if self.forcing_kind == "constant":
            values = np.asarray(self.forcing_values, dtype=float)
            return ForcingSpec.constant(values)
        profile = stationary_profile(self.p, table.r, self.forcing_c)
        return ForcingSpec.boundary_balance(table, profile, width=self.forcing_width)

    def solver_bandwidth(self) -> int:
        if self.audit_bandwidth is not None:
            return self.audit_bandwidth
        if self.family is ModelFamily.S2_OFFDIAG or self.h_kind == "offdiag":
            return 1
        return 0

    def audit_quantities(self, table: CouplingTable) -> dict[str, WeightMatrix]:
        r, p = table.r, self.p
        if self.family in (ModelFamily.S2_DIAG, ModelFamily.S3_DIAG):
            g = self.require_gamma()
            return {
                "energy": WeightMatrix.energy_weights(p, r),
                "helicity": WeightMatrix.from_hmatrix(h_diag(p, r, g, self.h0), p),
                "second_invariant": WeightMatrix.diagonal_power(p, r, g + 1.0),
            }
        if self.family is ModelFamily.S2_OFFDIAG:
            g = self.require_gamma()
            return {
                "energy": WeightMatrix.energy_weights(p, r),
                "helicity": WeightMatrix.from_hmatrix(h_offdiag(p, r, g, self.h0), p),
            }
        if self.family is ModelFamily.GOY:
            if self.eps == 1.0:
                raise ConfigurationError(
                    "eps = 1 makes the geometric second invariant degenerate"
                )
            geometric = [(self.eps - 1.0) ** (-i) for i in range(r + 1)]
            return {
                "energy": WeightMatrix.diagonal(np.ones(r + 1)),
                "second_invariant": WeightMatrix.diagonal(geometric),
            }
        return {
            "energy": WeightMatrix.energy_weights(p, r),
            "helicity": WeightMatrix.from_hmatrix(self.h_matrix(), p),
        }


def parse_config(path: "str | Path") -> RunConfig:
    """Load and strictly validate a JSON run config."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None

    top = _Section(raw, "")
    model = top.subsection("model")
    family = ModelFamily.from_name(model.take_str("family"))
    r = model.take_int("r")
    if r is None:
        raise ConfigurationError("model.r must be an integer")

    gamma = None
    h0 = 1.0
    eps = 0.0
    a = 1.0
    alpha = 0.0
    s = 2
    h_kind = None
    h_gamma = 0.0
    h_h0 = 1.0
    if family is ModelFamily.GOY:
        p = model.take_number("lambda")
        eps = model.take_number("eps")
        a = model.take_number("a", 1.0)
    else:
        p = model.take_number("p")
        if family is ModelFamily.GENERAL:
            alpha = model.take_number("alpha", 0.0)
            s = model.take_int("s", 2)
            h_section = _Section(model.take("h"), "model.h")
            h_kind = h_section.take_str("kind")
            if h_kind not in ("diag", "offdiag"):
                raise ConfigurationError("model.h.kind must be 'diag' or 'offdiag'")
            h_gamma = h_section.take_number("gamma")
            h_h0 = h_section.take_number("h0", 1.0)
            h_section.finish()
        else:
            gamma = model.take_number("gamma", None)
            h0 = model.take_number("h0", 1.0)
    model.finish()

    diss = top.subsection("dissipation")
    nu0 = diss.take_number("nu0", 0.0)
    nu0 = 0.0 if nu0 is None else nu0
    matrix = diss.take("matrix", None)
    diss.finish()
    if matrix is not None:
        if nu0:
            raise ConfigurationError("dissipation: give either nu0 or matrix, not both")
        try:
            matrix_arr = np.asarray(matrix, dtype=float)
        except (TypeError, ValueError):
            raise ConfigurationError("dissipation.matrix must be a numeric matrix") from None
        dissipation = DissipationSpec.from_matrix(matrix_arr)
    else:
        dissipation = DissipationSpec(nu0=nu0)

    forcing = top.subsection("forcing")
    forcing_kind = forcing.take_str("kind", "none")
    if forcing_kind not in ("none", "constant", "boundary_balance"):
        raise ConfigurationError(
            "forcing.kind must be 'none', 'constant', or 'boundary_balance'"
        )
    forcing_values = None
    forcing_c = 1.0
    forcing_width = None
    if forcing_kind == "constant":
        values = forcing.take("values")
        if not isinstance(values, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in values
        ):
            raise ConfigurationError("forcing.values must be an array of numbers")
        forcing_values = tuple(float(x) for x in values)
    elif forcing_kind == "boundary_balance":
        forcing_c = forcing.take_number("c", 1.0)
        forcing_width = forcing.take_int("width", None)
    forcing.finish()

    initial = top.subsection("initial")
    initial_kind = initial.take_str("kind", "stationary")
    if initial_kind not in ("stationary", "random", "single_shell"):
        raise ConfigurationError(
            "initial.kind must be 'stationary', 'random', or 'single_shell'"
        )
    initial_c = 1.0
    initial_amplitude = 1.0
    initial_shell = 0
    initial_envelope = False
    if initial_kind == "stationary":
        initial_c = initial.take_number("c", 1.0)
    elif initial_kind == "random":
        initial_amplitude = initial.take_number("amplitude", 1.0)
        initial_envelope = initial.take_bool("envelope", False)
    else:
        initial_amplitude = initial.take_number("amplitude", 1.0)
        shell = initial.take_int("shell", 0)
        initial_shell = 0 if shell is None else shell
    initial.finish()

    integ = top.subsection("integrator")
    stride = integ.take_int("sample_stride", 1)
    integrator = IntegratorSpec(
        method=integ.take_str("method", "rk4"),
        dt=integ.take_number("dt", 1e-3),
        duration=integ.take_number("duration", 1.0),
        sample_stride=stride if stride is not None else 1,
        rel_tol=integ.take_number("rel_tol", 1e-9),
        abs_tol=integ.take_number("abs_tol", 1e-12),
        dt_min=integ.take_number("dt_min", 1e-12),
        dt_max=integ.take_number("dt_max", 1.0),
    )
    integ.finish()

    scan = top.subsection("scan")
    interval = scan.take("interval", [-3.0, 3.0])
    if (
        not isinstance(interval, list)
        or len(interval) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in interval)
    ):
        raise ConfigurationError("scan.interval must be an array of two numbers")
    scan_interval = (float(interval[0]), float(interval[1]))
    scan_step = scan.take_number("grid_step", 1e-3)
    scan_tol = scan.take_number("tol", 1e-9)
    scan.finish()

    audit = top.subsection("audit")
    audit_samples = audit.take_int("n_samples", 100)
    audit_tol = audit.take_number("tol", 1e-12)
    audit_bandwidth = audit.take_int("bandwidth", None)
    if audit_bandwidth is not None and audit_bandwidth not in (0, 1):
        raise ConfigurationError("audit.bandwidth must be 0 or 1")
    audit.finish()

    seed = top.take_int("seed", 0)
    output_dir = top.take_str("output_dir", None)
    top.finish()

    model_echo: dict = {"family": family.value, "r": r}
    if family is ModelFamily.GOY:
        model_echo.update({"lambda": p, "eps": eps, "a": a})
    elif family is ModelFamily.GENERAL:
        model_echo.update(
            {"p": p, "alpha": alpha, "s": s, "h": {"kind": h_kind, "gamma": h_gamma, "h0": h_h0}}
        )
    else:
        model_echo.update({"p": p, "gamma": gamma, "h0": h0})
    echo = {
        "model": model_echo,
        "dissipation": (
            {"matrix": [[float(x) for x in row] for row in dissipation.matrix]}
            if dissipation.matrix is not None
            else {"nu0": nu0}
        ),
        "forcing": {
            "kind": forcing_kind,
            **({"values": list(forcing_values)} if forcing_values is not None else {}),
            **(
                {"c": forcing_c, "width": forcing_width}
                if forcing_kind == "boundary_balance"
                else {}
            ),
        },
        "initial": {
            "kind": initial_kind,
            **({"c": initial_c} if initial_kind == "stationary" else {}),
            **(
                {"amplitude": initial_amplitude, "envelope": initial_envelope}
                if initial_kind == "random"
                else {}
            ),
            **(
                {"amplitude": initial_amplitude, "shell": initial_shell}
                if initial_kind == "single_shell"
                else {}
            ),
        },
        "integrator": {
            "method": integrator.method,
            "dt": integrator.dt,
            "duration": integrator.duration,
            "sample_stride": integrator.sample_stride,
            "rel_tol": integrator.rel_tol,
            "abs_tol": integrator.abs_tol,
            "dt_min": integrator.dt_min,
            "dt_max": integrator.dt_max,
        },
        "scan": {"interval": list(scan_interval), "grid_step": scan_step, "tol": scan_tol},
        "audit": {"n_samples": audit_samples, "tol": audit_tol, "bandwidth": audit_bandwidth},
        "seed": seed,
        "output_dir": output_dir,
    }

    return RunConfig(
        family=family,
        p=p,
        r=r,
        gamma=gamma,
        h0=h0,
        eps=eps,
        a=a,
        alpha=alpha,
        s=s if s is not None else 2,
        h_kind=h_kind,
        h_gamma=h_gamma,
        h_h0=h_h0,
        dissipation=dissipation,
        forcing_kind=forcing_kind,
        forcing_values=forcing_values,
        forcing_c=forcing_c,
        forcing_width=forcing_width,
        initial_kind=initial_kind,
        initial_c=initial_c,
        initial_amplitude=initial_amplitude,
        initial_shell=initial_shell,
        initial_envelope=initial_envelope,
        integrator=integrator,
        scan_interval=scan_interval,
        scan_step=scan_step,
        scan_tol=scan_tol,
        audit_samples=audit_samples if audit_samples is not None else 100,
        audit_tol=audit_tol,
        audit_bandwidth=audit_bandwidth,
        seed=seed if seed is not None else 0,
        output_dir=output_dir,
        echo=echo,
    )


def _json_text(obj: object) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _OutputDir:
    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []
        root.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        (self.root / name).write_text(text)
        self.files.append(name)

    def manifest(self, subcommand: str, cfg: RunConfig, fmt: str) -> None:
        manifest = {
            "version": __version__,
            "subcommand": subcommand,
            "seed": cfg.seed,
            "format": fmt,
            "files": sorted(self.files),
            "config": cfg.echo,
        }
        (self.root / "manifest.json").write_text(_json_text(manifest))


def _table_text(fmt: str, columns: dict[str, list]) -> str:
    if fmt == "json":
        return _json_text(columns)
    names = list(columns)
    rows = zip(*(columns[n] for n in names))
    lines = [",".join(names)]
    for row in rows:
        lines.append(
            ",".join(str(x) if isinstance(x, int) else f"{x:.17g}" for x in row)
        )
    return "\n".join(lines) + "\n"


def _run_build(cfg: RunConfig, out: _OutputDir, fmt: str, strict: bool) -> int:
    table = cfg.build_table()
    out.write("coupling.tsv", table.to_tsv())
    return 0


def _run_audit(cfg: RunConfig, out: _OutputDir, fmt: str, strict: bool) -> int:
    table = cfg.build_table()
    reports = []
    violated = False
    for name, weights in cfg.audit_quantities(table).items():
        report = audit_conservation(
            table,
            weights,
            n_samples=cfg.audit_samples,
            seed=cfg.seed,
            tol=cfg.audit_tol,
            quantity=name,
        )
        violated = violated or not report.conserved
        reports.append(report.to_json_dict())
    basis = solve_invariant_weights(table, bandwidth=cfg.solver_bandwidth())
    payload = {
        "reports": reports,
        "weight_basis": {
            "bandwidth": basis.bandwidth,
            "dimension": basis.dimension,
            "degenerate": basis.degenerate,
            "cutoff": basis.cutoff,
            "max_verification_residual": basis.max_verification_residual,
            "weights": [
                {
                    "diag": [float(x) for x in w.diag],
                    "off": [float(x) for x in w.off] if w.off is not None else None,
                }
                for w in basis.weights
            ],
        },
    }
    out.write("audit.json", _json_text(payload))
    return 3 if strict and violated else 0


def _run_scan(cfg: RunConfig, out: _OutputDir, fmt: str, strict: bool) -> int:
    report = gamma_scan(
        cfg.family,
        cfg.p,
        r=cfg.r,
        interval=cfg.scan_interval,
        grid_step=cfg.scan_step,
        tol=cfg.scan_tol,
        h0=cfg.h0,
    )
    out.write("scan.json", _json_text(report.to_json_dict()))
    return 3 if strict and not all(report.matches) else 0


def _run_stationary(cfg: RunConfig, out: _OutputDir, fmt: str, strict: bool) -> int:
    table = cfg.build_table()
    profile = stationary_profile(cfg.p, cfg.r, cfg.initial_c)
    residual = bulk_residual(table, profile)
    exponent = spectrum_exponent(profile, cfg.p)
    out.write(
        "residuals.csv" if fmt == "csv" else "residuals.json",
        _table_text(
            fmt,
            {
                "shell": [int(i) for i in residual.shells],
                "residual": [float(x) for x in residual.values],
            },
        ),
    )
    summary = {
        "family": cfg.family.value,
        "p": cfg.p,
        "gamma": cfg.gamma,
        "r": cfg.r,
        "c": cfg.initial_c,
        "interior": [int(residual.shells[0]), int(residual.shells[-1])],
        "max_abs_residual": residual.max_abs,
        "spectrum_exponent": exponent,
        "tol": cfg.scan_tol,
    }
    out.write("stationary.json", _json_text(summary))
    return 3 if strict and residual.max_abs > cfg.scan_tol else 0


def _run_simulate(cfg: RunConfig, out: _OutputDir, fmt: str, strict: bool) -> int:
    table = cfg.build_table()
    system = CascadeSystem(
        table=table, dissipation=cfg.dissipation, forcing=cfg.forcing(table), p=cfg.p
    )
    if not cfg.dissipation.is_zero and cfg.integrator.method == "rk4":
        nu_top = (
            float(np.max(np.abs(np.diagonal(cfg.dissipation.matrix))))
            if cfg.dissipation.matrix is not None
            else cfg.dissipation.nu0 * _pow(cfg.p, 2 * cfg.r)
        )
        if nu_top * cfg.integrator.dt > 0.1:
            print(
                f"warning: nu_r * dt = {nu_top * cfg.integrator.dt:.3g} > 0.1; "
                "the dissipative scale is under-resolved at this step size",
                file=sys.stderr,
            )
    v0 = cfg.initial_state(table)
    traj = integrate(system, v0, cfg.integrator)
    columns: dict[str, list] = {"t": [float(t) for t in traj.times]}
    for i in range(traj.states.shape[1]):
        columns[f"V{i}"] = [float(x) for x in traj.states[:, i]]
    out.write(
        "trajectory.csv" if fmt == "csv" else "trajectory.json",
        traj.to_csv() if fmt == "csv" else _json_text(columns),
    )

    drifts = drift_report(traj, cfg.audit_quantities(table))
    try:
        spectrum = time_avg_spectrum(traj)
        shell_energy = spectrum.shell_energy
        spectrum_info = {
            "slope": spectrum.slope,
            "window": list(spectrum.window),
            "n_samples": spectrum.n_samples,
        }
    except NumericError:
        w = (1.0 - 1.0 / cfg.p) * np.array([_pow(cfg.p, i) for i in range(table.r + 1)])
        shell_energy = w * np.mean(traj.states**2, axis=0)
        spectrum_info = {
            "slope": None,
            "window": [float(traj.times[0]), float(traj.times[-1])],
            "n_samples": int(traj.times.size),
        }
    out.write(
        "spectrum.csv" if fmt == "csv" else "spectrum.json",
        _table_text(
            fmt,
            {
                "shell": list(range(table.r + 1)),
                "E_i": [float(e) for e in shell_energy],
            },
        ),
    )
    meta = {k: v for k, v in traj.meta.items()}
    out.write(
        "drift.json",
        _json_text({"invariants": drifts, "integrator": meta, "spectrum": spectrum_info}),
    )
    return 0


def _run_goy_check(cfg: RunConfig, out: _OutputDir, fmt: str, strict: bool) -> int:
    if cfg.family is not ModelFamily.S2_DIAG or cfg.require_gamma() != -0.5:
        raise ConfigurationError(
            "goy-check requires model.family = s2_diag with gamma = -0.5; "
            "the correspondence is defined exactly there"
        )
    report = check_goy_correspondence(
        cfg.p,
        r=cfg.r,
        h0=cfg.h0,
        n_states=cfg.audit_samples,
        seed=cfg.seed,
        tol=cfg.audit_tol,
    )
    out.write("goy_check.json", _json_text(report.to_json_dict()))
    return 3 if strict and not report.passes else 0


_RUNNERS = {
    "build": _run_build,
    "audit": _run_audit,
    "scan": _run_scan,
    "simulate": _run_simulate,
    "goy-check": _run_goy_check,
    "stationary": _run_stationary,
}


class _Parser(argparse.ArgumentParser):
    # Usage mistakes are config errors (exit 1), not argparse's default 2.
    def error(self, message: str):
        raise ConfigurationError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cascade", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--strict",
            action="store_true",
            help="exit 3 when a verdict or claim check fails",
        )
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def run_subcommand(
    name: str,
    cfg: RunConfig,
    out_dir: "str | Path",
    strict: bool = False,
    fmt: str = "csv",
) -> int:
    runner = _RUNNERS.get(name)
    if runner is None:
        raise ConfigurationError(f"unknown subcommand {name!r}")
    out = _OutputDir(Path(out_dir))
    code = runner(cfg, out, fmt, strict)
    out.manifest(name, cfg, fmt)
    return code


def main(argv: "list[str] | None" = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigurationError("a subcommand is required; see cascade --help")
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = _override_seed(cfg, args.seed)
        out_dir = args.out or cfg.output_dir or "cascade-out"
        return run_subcommand(args.command, cfg, out_dir, strict=args.strict, fmt=args.format)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except CascadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _override_seed(cfg: RunConfig, seed: int) -> RunConfig:
    echo = dict(cfg.echo)
    echo["seed"] = seed
    from dataclasses import replace

    return replace(cfg, seed=seed, echo=echo)


if __name__ == "__main__":
    sys.exit(main())
