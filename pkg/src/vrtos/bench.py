"""Benchmark configuration and the experiment driver behind ``vrtos run``.

A configuration is a YAML mapping, for example::

    seed: 0
    out: results
    data:
      synthetic: {n: 200, p: 100, density: 0.1, task: logistic}
    model: {loss: logistic, l2: null}       # null means 1/n
    penalty:
      kind: lasso                          # see PENALTY_KINDS
      l1: 0.001
    defaults: {max_epochs: 20, tol: 1.0e-10}
    solvers: [vrtos-saga, saga]
    reference: {tol: 1.0e-12, max_iter: 100000}

Roster entries are solver names, optionally suffixed with the memory scheme
(``vrtos-svrg``), or mappings with a ``kind`` plus per-solver overrides.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any

import yaml

from .data import LabeledDataset, generate_synthetic, load_libsvm
from .model import SmoothModel
from .penalties import (
    L1,
    GroupLasso,
    OverlappingGroupLasso,
    Penalty,
    fused_lasso_split,
    load_group_spec,
    overlapping_groups,
)
from .solvers import SOLVERS, DivergenceError, Problem, SolverConfig, reference_solution, run

log = logging.getLogger(__name__)

PENALTY_KINDS = (
    "none",
    "lasso",
    "group_lasso",
    "sparse_group_lasso",
    "overlapping_group_lasso",
    "fused_lasso",
)
SCHEME_SUFFIXES = ("saga", "svrg")
# solvers that accept more than two penalties
CONSENSUS_SOLVERS = ("vrtos-k", "tos")
_SOLVER_FIELDS = {f.name for f in dataclasses.fields(SolverConfig)} - {"seed", "x0", "u0"}


class ConfigError(ValueError):
    """Invalid benchmark configuration (exit status 2)."""


@dataclass
class SolverSpec:
    name: str
    kind: str
    overrides: dict[str, Any] = field(default_factory=dict)


@dataclass
class BenchConfig:
    data: dict[str, Any]
    penalty: dict[str, Any]
    solvers: list[SolverSpec]
    model: dict[str, Any] = field(default_factory=dict)
    defaults: dict[str, Any] = field(default_factory=dict)
    reference: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out: str = "results"

    @classmethod
    def from_dict(cls, raw: Any) -> "BenchConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("data", "penalty", "solvers"):
            if key not in raw:
                raise ConfigError(f"missing config section {key!r}")
        roster = raw["solvers"]
        if not isinstance(roster, list) or not roster:
            raise ConfigError("'solvers' must be a nonempty list")
        specs = [parse_solver_entry(e) for e in roster]
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate solver names in {names}")
        cfg = cls(
            data=_mapping(raw, "data"),
            penalty=_mapping(raw, "penalty"),
            solvers=specs,
            model=_mapping(raw, "model", {}),
            defaults=_mapping(raw, "defaults", {}),
            reference=_mapping(raw, "reference", {}),
            seed=_int(raw.get("seed", 0), "seed"),
            out=str(raw.get("out", "results")),
        )
        _check_solver_fields(cfg.defaults, "defaults")
        if cfg.penalty.get("kind", "none") not in PENALTY_KINDS:
            raise ConfigError(
                f"unknown penalty kind {cfg.penalty.get('kind')!r}; choose from {PENALTY_KINDS}"
            )
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "BenchConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        return cls.from_dict(raw)


def _mapping(raw, key, default=None) -> dict:
    value = raw.get(key, default)
    if value is None:
        value = {}
    if not isinstance(value, dict):
        raise ConfigError(f"{key!r} must be a mapping")
    return dict(value)


def _int(value, what) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{what} must be an integer")
    return value


def _check_solver_fields(mapping: dict, where: str) -> None:
    unknown = set(mapping) - _SOLVER_FIELDS
    if unknown:
        raise ConfigError(f"unknown solver settings in {where}: {sorted(unknown)}")


def parse_solver_entry(entry: Any) -> SolverSpec:
    """``"vrtos-svrg"`` -> kind ``vrtos`` with ``scheme: svrg``; mappings pass through."""
    if isinstance(entry, str):
        name, overrides = entry, {}
        kind = entry
    elif isinstance(entry, dict):
        overrides = dict(entry)
        kind = overrides.pop("kind", None) or overrides.get("name")
        name = overrides.pop("name", None) or kind
        if not isinstance(kind, str):
            raise ConfigError(f"solver entry needs a 'kind': {entry!r}")
    else:
        raise ConfigError(f"bad solver entry {entry!r}")
    if kind not in SOLVERS:
        base, _, suffix = kind.rpartition("-")
        if base in SOLVERS and suffix in SCHEME_SUFFIXES:
            kind = base
            overrides.setdefault("scheme", suffix)
        else:
            raise ConfigError(f"unknown solver {kind!r}; choose from {sorted(SOLVERS)}")
    _check_solver_fields(overrides, f"solver {name!r}")
    return SolverSpec(name, kind, overrides)


# -- materialization ---------------------------------------------------------------


def load_dataset(data: dict, seed: int) -> LabeledDataset:
    if "path" in data:
        return load_libsvm(data["path"], data.get("n_cols"))
    syn = data.get("synthetic")
    if not isinstance(syn, dict):
        raise ConfigError("data needs either 'path' or a 'synthetic' mapping")
    try:
        return generate_synthetic(
            int(syn["n"]),
            int(syn["p"]),
            float(syn.get("density", 0.1)),
            syn.get("task", "logistic"),
            int(syn.get("seed", seed)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic data settings: {exc}") from None


def _groups(spec: dict, p: int, overlap_default: int):
    if "file" in spec:
        return load_group_spec(spec["file"])[0]
    size = int(spec.get("size", 10))
    overlap = int(spec.get("overlap", overlap_default))
    return overlapping_groups(p, size, overlap)


def build_problem(dataset: LabeledDataset, model_cfg: dict, penalty: dict) -> Problem:
    """Turn the penalty description into an ordered list of block-separable terms."""
    l2 = model_cfg.get("l2")
    loss = model_cfg.get("loss", "logistic" if dataset.is_binary() else "squared")
    try:
        model = SmoothModel(dataset, loss, 1.0 / dataset.n_samples if l2 is None else float(l2))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    p = model.p
    kind = penalty.get("kind", "none")
    lam1 = float(penalty.get("l1", 0.0))
    lam_g = float(penalty.get("group", 0.0))
    groups_spec = penalty.get("groups", {}) or {}
    pens: list[Penalty]
    objective_terms = None
    if kind == "none":
        pens = []
    elif kind == "lasso":
        pens = [L1(p, lam1)]
    elif kind == "group_lasso":
        pens = [GroupLasso(_groups(groups_spec, p, 0), p, lam_g)]
    elif kind == "sparse_group_lasso":
        # group term first: the sparse solver needs h's blocks to be singletons
        pens = [GroupLasso(_groups(groups_spec, p, 0), p, lam_g), L1(p, lam1)]
    elif kind == "overlapping_group_lasso":
        ogl = OverlappingGroupLasso(_groups(groups_spec, p, 2), p, lam_g)
        try:
            pens = list(ogl.split())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        objective_terms = [ogl]
        if lam1 > 0:
            pens.append(L1(p, lam1))
            objective_terms.append(pens[-1])
    elif kind == "fused_lasso":
        pens = list(fused_lasso_split(p, float(penalty.get("fused", lam1))))
    else:
        raise ConfigError(f"unknown penalty kind {kind!r}")
    return Problem(model, pens, objective_terms)


def solver_config(cfg: BenchConfig, spec: SolverSpec, seed: int) -> SolverConfig:
    settings = {**cfg.defaults, **spec.overrides}
    try:
        return SolverConfig(seed=seed, **settings)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver {spec.name!r}: {exc}") from None


def resolve_kind(spec: SolverSpec, problem: Problem, penalty_kind: str) -> str:
    kind = spec.kind
    if penalty_kind == "overlapping_group_lasso" and kind in ("vrtos", "vrtos-sparse"):
        # overlapping groups always go through the consensus formulation
        log.info("solver %s: running %s as vrtos-k", spec.name, kind)
        kind = "vrtos-k"
    if problem.k > 2 and kind not in CONSENSUS_SOLVERS:
        raise ConfigError(
            f"solver {spec.name!r} ({kind}) handles at most two penalties, problem has {problem.k}"
        )
    return kind


# -- driver -------------------------------------------------------------------------


@dataclass
class BenchOutcome:
    summary: dict
    failed: str | None = None  # solver that diverged


def run_benchmark(cfg: BenchConfig, out_dir: str) -> BenchOutcome:
    """Run every solver, writing ``<name>.csv`` traces and ``summary.json`` to ``out_dir``.

    Raises ``OSError`` for I/O problems and ``ConfigError`` for invalid settings.
    On divergence the partial trace is written and the outcome names the solver.
    """
    dataset = load_dataset(cfg.data, cfg.seed)
    problem = build_problem(dataset, cfg.model, cfg.penalty)
    penalty_kind = cfg.penalty.get("kind", "none")
    plan = [(spec, resolve_kind(spec, problem, penalty_kind), solver_config(cfg, spec, cfg.seed))
            for spec in cfg.solvers]
    os.makedirs(out_dir, exist_ok=True)

    ref_tol = float(cfg.reference.get("tol", 1e-12))
    ref = reference_solution(problem, tol=ref_tol, max_iter=int(cfg.reference.get("max_iter", 100_000)))
    p_star = ref.objective
    summary: dict[str, Any] = {
        "n": problem.model.n,
        "p": problem.p,
        "penalty": penalty_kind,
        "reference": {
            "objective": p_star,
            "reason": ref.reason,
            "residual": ref.trace[-1].residual,
            "iterations": ref.trace[-1].epoch,
        },
        "solvers": {},
    }
    failed = None
    for spec, kind, scfg in plan:
        path = os.path.join(out_dir, f"{spec.name}.csv")
        try:
            result = run(problem, kind, scfg)
        except DivergenceError as err:
            _write(path, err.trace.to_csv() if err.trace is not None else "")
            summary["solvers"][spec.name] = {"kind": kind, "status": "diverged", "step": err.step}
            failed = spec.name
            break
        _write(path, result.trace.to_csv())
        last = result.trace[-1]
        summary["solvers"][spec.name] = {
            "kind": kind,
            "status": result.reason,
            "step_size": result.step_size,
            "epochs": last.epoch,
            "grad_evals": last.grad_evals,
            "prox_evals": last.prox_evals,
            "final_objective": last.objective,
            "suboptimality": last.objective - p_star,
            "residual": last.residual,
        }
    _write(os.path.join(out_dir, "summary.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return BenchOutcome(summary, failed)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
