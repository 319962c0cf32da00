"""Experiment configuration files.

Configs are TOML with the sections ``run``, ``environment``, ``algorithm``,
``output``, ``audit`` and ``sweep``.  Every key is validated and unknown keys
are rejected, so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from roibandit.baselines import second_price_bids
from roibandit.core import BidGrid, RunConfig
from roibandit.engine import ALGORITHMS, FRAMEWORK, SECOND_PRICE_CLOSED_FORM
from roibandit.environments import GENERATORS, MECHANISMS, SECOND_PRICE, InputModel, read_script

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

AUDIT_KEYS = (
    "interval_regret",
    "mu_growth",
    "mu_bound",
    "budget_lemma",
    "dual_replay",
    "safe_policy",
    "optimal_policy",
    "second_price_optimality",
)

SCHEMA = {
    "run": {"T", "B", "rho", "delta", "roi_target", "omega", "seeds"},
    "environment": {"mechanism", "model", "valuations", "support", "table", "path", "generator", "params"},
    "algorithm": {"name", "bids"},
    "output": {"dir"},
    "audit": set(AUDIT_KEYS),
    "sweep": {"T"},
}
ENV_MODELS = ("table", "script", "generator")
U64 = 2**64


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def _fail(key: str, msg: str):
    raise ConfigError(f"config key '{key}': {msg}")


def _num(sec: dict, name: str, key: str, default=None, *, integer=False):
    if name not in sec:
        if default is None:
            _fail(key, "missing")
        return default
    val = sec[name]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(key, f"expected a number, got {val!r}")
    if integer and int(val) != val:
        _fail(key, f"expected an integer, got {val!r}")
    if not math.isfinite(val):
        _fail(key, "must be finite")
    return int(val) if integer else float(val)


def _floats(val, key: str) -> tuple[float, ...]:
    if not isinstance(val, list) or not val or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in val):
        _fail(key, "expected a nonempty list of numbers")
    return tuple(float(x) for x in val)


@dataclass(frozen=True)
class ExperimentConfig:
    T: int
    B: float | None
    rho: float | None
    delta: float
    roi_target: float
    omega: float
    seeds: tuple[int, ...]
    mechanism: str
    env_model: str
    env: dict
    algorithm: str
    bids: tuple[float, ...] | None
    out_dir: Path
    audits: dict
    sweep_T: tuple[int, ...]
    base_dir: Path = field(default=Path("."))

    # -- derived --------------------------------------------------------

    def run_config(self, T: int | None = None) -> RunConfig:
        T = self.T if T is None else T
        B = self.rho * T if self.rho is not None else self.B
        return RunConfig(T=T, B=B, delta=self.delta, roi_target=self.roi_target, omega=self.omega)

    def canonical(self, T: int | None = None) -> dict:
        """Everything that determines a run's output besides the seed."""
        rc = self.run_config(T)
        env = dict(self.env)
        if self.env_model == "script":
            env["script_sha256"] = hashlib.sha256(self.script_path.read_bytes()).hexdigest()
            env.pop("path", None)
        return {
            "T": rc.T, "B": rc.B, "delta": rc.delta, "roi_target": rc.roi_target, "omega": rc.omega,
            "mechanism": self.mechanism, "environment": self.env_model, "env": env,
            "algorithm": self.algorithm, "bids": list(self.bids) if self.bids else None,
        }

    def config_hash(self, T: int | None = None) -> str:
        blob = json.dumps(self.canonical(T), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def script_path(self) -> Path:
        p = Path(self.env["path"])
        return p if p.is_absolute() else self.base_dir / p

    def build(self, T: int | None = None):
        """Environment, run config, algorithm bid grid and the generator certificate (if any)."""
        rc = self.run_config(T)
        cert = None
        header_bids = None
        if self.env_model == "table":
            e = self.env
            model = InputModel.stochastic(self.mechanism, e["valuations"], e["support"], e["table"],
                                          omega=self.omega, roi_target=self.roi_target)
        elif self.env_model == "script":
            model, header_bids = read_script(self.script_path, roi_target=self.roi_target)
            if model.mechanism != self.mechanism:
                _fail("environment.mechanism", f"script file says {model.mechanism}")
            if model.omega != self.omega:
                _fail("run.omega", f"script file says omega={model.omega}")
            if model.horizon != rc.T:
                _fail("run.T", f"script has {model.horizon} rounds")
        else:
            name = self.env["generator"]
            params = dict(self.env.get("params", {}))
            gen = GENERATORS[name]
            try:
                if name == "k-safe":
                    model, cert = gen(rc.T, rho=rc.rho, omega=self.omega, **params)
                else:
                    model = gen(rc.T, mechanism=self.mechanism, omega=self.omega, **params)
            except TypeError as exc:
                _fail("environment.params", str(exc))
            if self.roi_target != 1.0:
                model = InputModel.scripted(model.mechanism, model.valuations, model.script,
                                            omega=model.omega, roi_target=self.roi_target)
        bids = self.bids if self.bids is not None else header_bids
        if isinstance(bids, BidGrid):
            bids = bids.bids
        if self.algorithm == FRAMEWORK:
            if bids is None:
                _fail("algorithm.bids", "the framework needs a bid grid")
            grid = BidGrid(tuple(bids))
        else:
            grid = BidGrid(tuple(bids)) if bids is not None else second_price_bids(model)
        return model, rc, grid, cert

    def with_T(self, T: int) -> "ExperimentConfig":
        return _replace(self, T=T)


def _replace(cfg, **kw):
    d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    d.update(kw)
    return ExperimentConfig(**d)


def parse_config(data: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    data = copy.deepcopy(data)
    for sec, val in data.items():
        if sec not in SCHEMA:
            _fail(sec, "unknown section")
        if not isinstance(val, dict):
            _fail(sec, "expected a section")
        for k in val:
            if k not in SCHEMA[sec]:
                _fail(f"{sec}.{k}", "unknown key")
    run = data.get("run")
    if run is None:
        _fail("run", "missing section")
    T = _num(run, "T", "run.T", integer=True)
    if T < 1:
        _fail("run.T", "must be >= 1")
    if ("B" in run) == ("rho" in run):
        _fail("run.B", "give exactly one of run.B and run.rho")
    B = _num(run, "B", "run.B") if "B" in run else None
    rho = _num(run, "rho", "run.rho") if "rho" in run else None
    if B is not None and B < 1:
        _fail("run.B", f"budget must be >= 1, got {B}")
    if rho is not None and not 0 < rho <= 1:
        _fail("run.rho", f"must be in (0, 1], got {rho}")
    if rho is not None and rho * T < 1:
        _fail("run.rho", f"rho*T = {rho * T} < 1")
    delta = _num(run, "delta", "run.delta", 0.05)
    if not 0 < delta <= 1:
        _fail("run.delta", "must be in (0, 1]")
    roi_target = _num(run, "roi_target", "run.roi_target", 1.0)
    if roi_target <= 0:
        _fail("run.roi_target", "must be positive")
    omega = _num(run, "omega", "run.omega", 0.0)
    if not 0 <= omega <= 1:
        _fail("run.omega", "must be in [0, 1]")
    seeds = run.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or any(
            isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < U64 for s in seeds):
        _fail("run.seeds", "expected a nonempty list of 64-bit unsigned integers")

    env = data.get("environment")
    if env is None:
        _fail("environment", "missing section")
    mechanism = env.get("mechanism")
    if mechanism not in MECHANISMS:
        _fail("environment.mechanism", f"expected one of {MECHANISMS}, got {mechanism!r}")
    model = env.get("model")
    if model not in ENV_MODELS:
        _fail("environment.model", f"expected one of {ENV_MODELS}, got {model!r}")
    allowed = {"table": {"valuations", "support", "table"}, "script": {"path"},
               "generator": {"generator", "params"}}[model]
    for k in set(env) - {"mechanism", "model"}:
        if k not in allowed:
            _fail(f"environment.{k}", f"not used by model '{model}'")
    env_spec: dict = {}
    if model == "table":
        for k in ("valuations", "support", "table"):
            if k not in env:
                _fail(f"environment.{k}", "missing")
        env_spec["valuations"] = _floats(env["valuations"], "environment.valuations")
        env_spec["support"] = _floats(env["support"], "environment.support")
        tab = env["table"]
        if not isinstance(tab, list) or len(tab) != len(env_spec["valuations"]):
            _fail("environment.table", "expected one row per valuation")
        env_spec["table"] = tuple(_floats(r, "environment.table") for r in tab)
        if any(len(r) != len(env_spec["support"]) for r in env_spec["table"]):
            _fail("environment.table", "each row needs one probability per competing bid")
    elif model == "script":
        if not isinstance(env.get("path"), str):
            _fail("environment.path", "expected a file path")
        env_spec["path"] = env["path"]
        p = Path(env_spec["path"])
        if not (p if p.is_absolute() else base_dir / p).is_file():
            _fail("environment.path", f"script file {env_spec['path']} does not exist")
    else:
        if env.get("generator") not in GENERATORS:
            _fail("environment.generator", f"expected one of {tuple(GENERATORS)}")
        env_spec["generator"] = env["generator"]
        params = env.get("params", {})
        if not isinstance(params, dict):
            _fail("environment.params", "expected a table")
        if "T" in params or "rho" in params:
            _fail("environment.params", "T and rho come from the run section")
        env_spec["params"] = {k: (tuple(v) if isinstance(v, list) else v) for k, v in sorted(params.items())}
        if mechanism != "first-price" and env_spec["generator"] == "k-safe":
            _fail("environment.mechanism", "the k-safe generator is first-price only")

    alg = data.get("algorithm", {})
    name = alg.get("name", FRAMEWORK)
    if name not in ALGORITHMS:
        _fail("algorithm.name", f"expected one of {ALGORITHMS}")
    if name == SECOND_PRICE_CLOSED_FORM and mechanism != SECOND_PRICE:
        _fail("algorithm.name", "closed-form bidding needs environment.mechanism = 'second-price'")
    bids = _floats(alg["bids"], "algorithm.bids") if "bids" in alg else None
    if bids is not None:
        try:
            BidGrid(bids)
        except ValueError as exc:
            _fail("algorithm.bids", str(exc))

    out_dir = Path(data.get("output", {}).get("dir", "out"))
    audits = {k: True for k in AUDIT_KEYS}
    for k, v in data.get("audit", {}).items():
        if not isinstance(v, bool):
            _fail(f"audit.{k}", "expected true or false")
        audits[k] = v
    sweep = data.get("sweep", {})
    sweep_T = ()
    if "T" in sweep:
        vals = sweep["T"]
        if not isinstance(vals, list) or not vals or any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in vals):
            _fail("sweep.T", "expected a nonempty list of positive integers")
        if rho is None:
            _fail("sweep.T", "a horizon sweep needs run.rho so that B scales with T")
        if model == "script":
            _fail("sweep.T", "a script file has a fixed horizon")
        sweep_T = tuple(vals)

    return ExperimentConfig(
        T=T, B=B, rho=rho, delta=delta, roi_target=roi_target, omega=omega, seeds=tuple(seeds),
        mechanism=mechanism, env_model=model, env=env_spec, algorithm=name, bids=bids,
        out_dir=out_dir if out_dir.is_absolute() else base_dir / out_dir, audits=audits,
        sweep_T=sweep_T, base_dir=base_dir,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, base_dir=path.parent)
