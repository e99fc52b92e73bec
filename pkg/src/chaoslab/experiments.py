"""Experiment configuration and the four runners behind the command line.

Config files are flat ``key = value`` text; ``#`` starts a comment.  Integer
lists accept ``a..b`` ranges and comma lists (``4..10``, ``16,64,256``).
Keys may be prefixed by a model tag (``cube.N``) to override the plain key
for that model in the verification battery.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

from .families import FAMILIES, FamilyError, build_member
from .gamma import (
    build_gamma_tower,
    fourth_moment_form,
    integral_Qk,
    is_chaos,
    verify_all_lemma3,
    verify_bound_cor7,
    verify_consistency,
    verify_reduction,
    verify_theorem6,
)
from .models.chaos import materialize_chaos, random_chaos
from .rational import Surd, format_rational, parse_rational
from .reports import FAIL, VerificationReport, inequality_report, predicate_report, write_csv
from .spectrum import Spectrum, SpectrumError, check_spectral_condition, parse_spectrum
from .stein import verify_eq22, verify_theorem10

KINDS = ("verify", "normal-convergence", "gamma-convergence", "spectral-check")
KNOWN_KEYS = {
    "experiment", "model", "models", "spectrum", "k", "N", "m", "family", "family_seed", "seeds",
    "samples", "p", "n_max", "out", "threads", "seed", "theta", "lemma3_max",
}
DEFAULT_SEED = 0


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def parse_int_list(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "verify"
    models: tuple[str, ...] = ("cube", "ou")
    spectrum: Spectrum = field(default_factory=Spectrum.nat)
    degrees: dict = field(default_factory=lambda: {"cube": tuple(range(1, 5)), "ou": (1, 2, 3)})
    schedules: dict = field(default_factory=lambda: {"cube": tuple(range(4, 11)), "ou": (1, 2, 3)})
    family: str = "paired-product"
    family_seed: int = 0
    seeds: int = 50
    samples: int = 10**6
    p: Fraction | None = None
    n_max: int | None = None
    out: str | None = None
    threads: int = 1
    seed: int = DEFAULT_SEED
    theta: Fraction = Fraction(1)
    lemma3_max: int = 5

    @property
    def model(self) -> str:
        return self.models[0]

    def schedule(self, model: str | None = None) -> tuple[int, ...]:
        return self.schedules[model or self.model]

    def degree_list(self, model: str | None = None) -> tuple[int, ...]:
        return self.degrees[model or self.model]


_DEFAULT_SCHEDULES = {
    "verify": ({"cube": tuple(range(4, 11)), "ou": (1, 2, 3)}, {"cube": (1, 2, 3, 4), "ou": (1, 2, 3)}),
    "normal-convergence": ({"ou": (8, 32, 128, 512), "cube": (8, 32, 128, 512)}, {"ou": (2,), "cube": (2,)}),
    "gamma-convergence": ({"ou": (1, 2, 4, 8)}, {"ou": (2,)}),
    "spectral-check": ({}, {"cube": tuple(range(1, 11)), "ou": tuple(range(1, 11))}),
}


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse flat ``key = value`` text; ``kind`` (the subcommand) overrides a missing ``experiment`` key."""
    raw: dict[str, tuple[str, int]] = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {line.strip()!r}", n)
        base = key.split(".", 1)[1] if "." in key else key
        if base not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", n)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", n)
        raw[key] = (value, n)

    def get(key, conv, default=None):
        if key not in raw:
            return default
        value, n = raw[key]
        try:
            return conv(value)
        except (ValueError, SpectrumError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", n) from None

    exp = get("experiment", str)
    if exp is not None and exp not in KINDS:
        raise ConfigError(f"unknown experiment {exp!r}", raw["experiment"][1])
    if kind is not None and exp is not None and exp != kind:
        raise ConfigError(f"config is for {exp!r}, not {kind!r}", raw["experiment"][1])
    kind = kind or exp or "verify"

    default_sched, default_deg = _DEFAULT_SCHEDULES[kind]
    models_text = get("models", str) or get("model", str)
    if models_text:
        models = tuple(t.strip() for t in models_text.split(",") if t.strip())
    elif kind == "verify":
        models = ("cube", "ou")
    elif kind == "spectral-check":
        models = ("ou",)
    else:
        models = ("ou",)
    line_of_model = (raw.get("models") or raw.get("model") or (None, None))[1]
    for mt in models:
        if mt not in ("cube", "ou", "poisson"):
            raise ConfigError(f"unknown model {mt!r}", line_of_model)
    if kind == "verify" and "poisson" in models:
        raise ConfigError("the identity battery needs chaos; Poisson eigenfunctions are not chaos", line_of_model)
    if kind == "gamma-convergence" and models != ("ou",):
        raise ConfigError("gamma convergence runs on the OU model only", line_of_model)

    family = get("family", str, "paired-product")
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}", raw["family"][1])
    if kind == "gamma-convergence" and "family" not in raw:
        family = "chi-square"

    schedules, degrees = {}, {}
    for mt in models:
        sched = get(f"{mt}.N", parse_int_list) or get("N", parse_int_list)
        if sched is None:
            pairs = get(f"{mt}.m", parse_int_list) or get("m", parse_int_list)
            sched = tuple(2 * m for m in pairs) if pairs else default_sched.get(mt, (1,))
        deg = get(f"{mt}.k", parse_int_list) or get("k", parse_int_list) or default_deg.get(mt, (2,))
        key_line = (raw.get(f"{mt}.N") or raw.get("N") or raw.get("m") or (None, None))[1]
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError("dimension schedule must be strictly increasing", key_line)
        if min(sched) < 1:
            raise ConfigError("dimensions must be positive", key_line)
        if min(deg) < 1:
            raise ConfigError("degrees must be >= 1", (raw.get("k") or (None, None))[1])
        if mt == "cube" and kind == "verify" and max(deg) > min(sched):
            raise ConfigError(f"degree {max(deg)} exceeds smallest cube dimension {min(sched)}", key_line)
        schedules[mt], degrees[mt] = sched, deg

    if kind == "gamma-convergence" and any(k % 2 for k in degrees["ou"]):
        raise ConfigError("gamma convergence needs an even degree", (raw.get("k") or (None, None))[1])

    cfg = ExperimentConfig(
        kind=kind,
        models=models,
        spectrum=get("spectrum", parse_spectrum, Spectrum.nat()),
        degrees=degrees,
        schedules=schedules,
        family=family,
        family_seed=get("family_seed", int, 0),
        seeds=get("seeds", int, 50),
        samples=get("samples", int, 10**6),
        p=get("p", parse_rational),
        n_max=get("n_max", int),
        out=get("out", str),
        threads=get("threads", int, 1),
        seed=get("seed", int, DEFAULT_SEED),
        theta=get("theta", parse_rational, Fraction(1)),
        lemma3_max=get("lemma3_max", int, 5),
    )
    if cfg.samples <= 0:
        raise ConfigError("samples must be positive", raw["samples"][1])
    if cfg.seeds <= 0:
        raise ConfigError("seeds must be positive", raw["seeds"][1])
    if cfg.p is not None and cfg.p <= 0:
        raise ConfigError("p must be positive", raw["p"][1])
    return cfg


def load_config(path: str, kind: str | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), kind)


def resolve_seed(cli_seed: int | None, config_seed: int = DEFAULT_SEED) -> int:
    """``--seed`` beats ``CHAOSLAB_SEED``, which beats the config value."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("CHAOSLAB_SEED")
    if env is not None and env.strip():
        return int(env)
    return config_seed


# -- verification battery ----------------------------------------------------------


def _strip(reports: Iterable[VerificationReport], seed: int | None) -> list[VerificationReport]:
    return [replace(r, seed=seed, details={}) for r in reports]


def battery(model_tag: str, N: int, k: int, seed: int, lemma3_max: int = 5) -> list[VerificationReport]:
    """All exact checks for one seeded random chaos."""
    spectrum = Spectrum.nat()
    form = "hermite" if model_tag == "ou" else "product"
    try:
        spec = random_chaos(model_tag, N, k, seed, form=form)
        ch = materialize_chaos(spec)
        model, F = ch.model, ch.F
        rep = is_chaos(spectrum, model, F, k)
        out = [rep]
        if not rep.passed:
            return _strip(out, seed)
        tower = build_gamma_tower(model, F, max(k + 1, lemma3_max))
        out.extend(verify_all_lemma3(model, F, tower, lemma3_max))
        out.append(verify_theorem6(spectrum, model, F, k, tower))
        if k <= 2:
            out.append(verify_reduction(spectrum, model, F, k, tower))
        out.append(integral_Qk(spectrum, model, F, k, tower))
        out.append(verify_bound_cor7(spectrum, model, F, k, tower=tower))
        out.append(verify_theorem10(spectrum, model, F, k))
        if model.is_diffusion:
            eq20 = fourth_moment_form(model, F, k, tower)
            out.extend(eq20.details["identities"])
            out.append(eq20)
            if k % 2 == 0:
                out.append(verify_eq22(model, F, k))
    except Exception as exc:  # a crash is a failed row, never a silent pass
        out = [predicate_report("battery_error", model_tag, N, k, False, reason=repr(exc))]
    return _strip(out, seed)


def _battery_job(args):
    return battery(*args)


def spectral_rows(spectrum: Spectrum, degrees: Iterable[int], n_max: int | None) -> list[VerificationReport]:
    rows = []
    for k in degrees:
        if not spectrum.has(k):
            continue
        nm = n_max
        if nm is None:
            nm = 200 if spectrum.natural else spectrum.size - 1
        if not spectrum.natural:
            nm = min(nm, spectrum.size - 1)
        rep = check_spectral_condition(spectrum, k, nm)
        for n, v in enumerate(rep.values):
            rows.append(inequality_report(f"spectral[n={n}]", "spectrum", 0, k, v, Fraction(0)))
        rows.extend(verify_consistency(spectrum, k))
    return rows


def run_verify(cfg: ExperimentConfig, seed: int | None = None) -> tuple[int, list[VerificationReport]]:
    """Exit code 0 iff no row fails (boundary skips are not failures)."""
    base = cfg.seed if seed is None else seed
    jobs = [
        (mt, N, k, base + i, cfg.lemma3_max)
        for mt in cfg.models
        for N in cfg.schedule(mt)
        for k in cfg.degree_list(mt)
        if not (mt == "cube" and k > N)
        for i in range(cfg.seeds)
    ]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(_battery_job, jobs, chunksize=8))
    else:
        parts = [_battery_job(j) for j in jobs]
    reports = [r for part in parts for r in part]
    degrees = sorted({k for mt in cfg.models for k in cfg.degree_list(mt)})
    reports.extend(spectral_rows(cfg.spectrum, degrees, cfg.n_max))
    code = 1 if any(r.status == FAIL for r in reports) else 0
    return code, reports


# -- convergence tables --------------------------------------------------------------


def fmt_exact(value) -> str:
    if isinstance(value, Surd):
        return str(value)
    return format_rational(value)


def fmt_float(value) -> str:
    return format(float(value), ".17g")


NORMAL_COLUMNS = ("N", "fourth_moment", "var_gamma", "stein_bound", "emp_distance", "mc_error")
GAMMA_COLUMNS = ("N", "p", "criterion", "var_discrepancy", "eq22_slack", "emp_distance", "mc_error")
SPECTRAL_COLUMNS = ("k", "n", "lambda_n", "value", "holds")


def run_normal_convergence(cfg: ExperimentConfig, seed: int | None = None) -> list[tuple[str, ...]]:
    base = cfg.seed if seed is None else seed
    rows = []
    k = cfg.degree_list()[0]
    for i, N in enumerate(cfg.schedule()):
        try:
            mem = build_member(cfg.family, cfg.model, N, k, cfg.family_seed)
        except FamilyError as exc:
            raise ConfigError(str(exc)) from None
        dist = mem.distance("normal", cfg.samples, base + i, threads=cfg.threads)
        rows.append((
            str(N),
            fmt_exact(mem.fourth_moment),
            fmt_exact(mem.var_gamma),
            fmt_exact(mem.stein_bound),
            fmt_float(dist.estimate),
            fmt_float(dist.error_proxy),
        ))
    return rows


def run_gamma_convergence(cfg: ExperimentConfig, seed: int | None = None) -> list[tuple[str, ...]]:
    base = cfg.seed if seed is None else seed
    rows = []
    k = cfg.degree_list()[0]
    for i, N in enumerate(cfg.schedule()):
        try:
            mem = build_member(cfg.family, "ou", N, k, cfg.family_seed)
        except FamilyError as exc:
            raise ConfigError(str(exc)) from None
        p = cfg.p if cfg.p is not None else mem.norm_sq
        dist = mem.distance("gamma", cfg.samples, base + i, p=p, threads=cfg.threads)
        rows.append((
            str(N),
            fmt_exact(p),
            fmt_exact(mem.gamma_criterion(p)),
            fmt_exact(mem.gamma_variance()),
            fmt_exact(mem.eq22_slack(p)),
            fmt_float(dist.estimate),
            fmt_float(dist.error_proxy),
        ))
    return rows


def run_spectral_check(cfg: ExperimentConfig) -> tuple[int, list[tuple[str, ...]]]:
    rows = []
    ok = True
    for k in cfg.degree_list():
        if not cfg.spectrum.has(k):
            raise ConfigError(f"spectrum has no eigenvalue lambda_{k}")
        nm = cfg.n_max if cfg.n_max is not None else (200 if cfg.spectrum.natural else cfg.spectrum.size - 1)
        if not cfg.spectrum.natural:
            nm = min(nm, cfg.spectrum.size - 1)
        rep = check_spectral_condition(cfg.spectrum, k, nm)
        ok = ok and rep.holds
        for n, v in enumerate(rep.values):
            rows.append((str(k), str(n), fmt_exact(cfg.spectrum[n]), fmt_exact(v), "true" if v <= 0 else "false"))
    return (0 if ok else 1), rows


def table_csv(columns: tuple[str, ...], rows: list[tuple[str, ...]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def reports_csv(reports: list[VerificationReport]) -> str:
    return write_csv(reports)


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "GAMMA_COLUMNS",
    "KINDS",
    "NORMAL_COLUMNS",
    "SPECTRAL_COLUMNS",
    "battery",
    "load_config",
    "parse_config",
    "parse_int_list",
    "reports_csv",
    "resolve_seed",
    "run_gamma_convergence",
    "run_normal_convergence",
    "run_spectral_check",
    "run_verify",
    "spectral_rows",
    "table_csv",
]
