"""Experiment configuration: TOML in, validated dataclasses and a canonical echo out.

Every table and key is optional; anything not listed in ``DEFAULTS`` (or, for the
coefficient tables, not understood by the corresponding parser) is rejected.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import tomli

from .coefficients import (cutoff_from_dict, mobility_from_dict, mobility_to_dict, potential_from_dict,
                           potential_to_dict)
from .maxreg import WeightSpec
from .noise import noise_from_dict, noise_to_dict
from .solver import ConfigError, InitialDatum, SimConfig

DEFAULTS = {
    "grid": {"n": 128, "u0_mean": 1.0, "u0_amplitude": 0.1, "u0_mode": 1, "u0_kind": "sin", "u0_file": ""},
    "time": {"T": 0.05, "dt0": 1e-4, "dt_min": 1e-12, "stability_cap": True},
    "mobility": {"kind": "power", "n": 2.0},
    "potential": {"kind": "lennard-jones", "theta": 8.0, "c_theta": 1.0},
    "cutoff": {},
    "noise": {"K": 4, "decay": 3.0, "c": 0.5, "seed": 0, "drop": []},
    "scheme": {"kind": "ito", "ito_shift": 0.0},
    "diagnostics": {"beta": 0.0, "gamma": 1.0, "output_stride": 10},
    "adaptivity": {"pos_floor": 1e-7, "drop_ratio": 0.5, "h1_max": 1e6},
    "output": {"paths": 1},
    "converge": {"levels": 4, "paths": 50, "heun_ref_offset": 1, "grids": [32, 64, 128, 256],
                 "spatial_dt": 1e-6, "spatial_T": 1e-3},
    "inequalities": {"corpus_size": 1000, "n": 256, "betas": [-0.4, 0.0, 0.5], "thetas": [3.0, 8.0],
                     "refine": True},
    "maxreg": {"lambda": 2.0, "trials": 100, "p": 4.0, "q": 2.0, "kappa": 0.0, "T": 1.0, "K_modes": 32,
               "pieces": 16, "n_t": 1024, "grading": 3.0, "forcing_decay": 1.0,
               "cacc_trials": 50, "cacc_scales": [1e-4, 4e-4, 1.6e-3], "cacc_K_modes": 64,
               "cacc_t_factor": 4.0},
}

_FREEFORM = ("mobility", "potential", "cutoff")


@dataclass(frozen=True)
class ConvergeConfig:
    levels: int
    paths: int
    heun_ref_offset: int
    grids: tuple
    spatial_dt: float
    spatial_T: float


@dataclass(frozen=True)
class InequalityConfig:
    corpus_size: int
    n: int
    betas: tuple
    thetas: tuple
    refine: bool


@dataclass(frozen=True)
class MaxregConfig:
    lam: float
    trials: int
    weight: WeightSpec
    T: float
    K_modes: int
    pieces: int
    n_t: int
    grading: float
    forcing_decay: float
    cacc_trials: int
    cacc_scales: tuple
    cacc_K_modes: int
    cacc_t_factor: float


@dataclass
class ExperimentConfig:
    doc: dict
    sim: SimConfig
    converge: ConvergeConfig
    inequalities: InequalityConfig
    maxreg_table: dict
    seed: int

    def maxreg(self) -> MaxregConfig:
        """Parsed lazily so that simulation commands do not trip over the weight range."""
        m = self.maxreg_table
        try:
            weight = WeightSpec(float(m["kappa"]), float(m["p"]), float(m["q"]))
        except ValueError as exc:
            raise ConfigError(f"[maxreg] {exc}") from exc
        return MaxregConfig(float(m["lambda"]), int(m["trials"]), weight, float(m["T"]), int(m["K_modes"]),
                            int(m["pieces"]), int(m["n_t"]), float(m["grading"]), float(m["forcing_decay"]),
                            int(m["cacc_trials"]), tuple(float(r) for r in m["cacc_scales"]),
                            int(m["cacc_K_modes"]), float(m["cacc_t_factor"]))

    def canonical_json(self) -> str:
        return canonical_json(self.doc)

    def content_hash(self) -> str:
        return blob_hash(self.canonical_json().encode())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def blob_hash(data: bytes) -> str:
    """Git-style object id: ``sha1(b"blob <len>\\0" + data)``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc


def _merge(user: dict) -> dict:
    doc = copy.deepcopy(DEFAULTS)
    for table, values in user.items():
        if table not in DEFAULTS:
            raise ConfigError(f"unknown table [{table}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{table}] must be a table")
        if table in _FREEFORM:
            doc[table] = dict(values)
            continue
        unknown = sorted(set(values) - set(DEFAULTS[table]))
        if unknown:
            raise ConfigError(f"unknown keys in [{table}]: {unknown}")
        doc[table].update(values)
    return doc


def parse(user: Optional[dict] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Resolve defaults, validate, and build the typed configs.  ``seed`` overrides ``[noise].seed``."""
    doc = _merge(user or {})
    try:
        mob = mobility_from_dict(doc["mobility"])
        pot = potential_from_dict(doc["potential"])
        cutoff = cutoff_from_dict(doc["cutoff"]) if doc["cutoff"] else None
        basis, noise_seed = noise_from_dict(doc["noise"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid coefficient or noise table: {exc}") from exc
    if seed is not None:
        noise_seed = int(seed)
    if not 0 <= noise_seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    # canonical echo of the coefficient tables
    doc["mobility"] = mobility_to_dict(mob)
    doc["potential"] = potential_to_dict(pot)
    doc["noise"] = noise_to_dict(basis, noise_seed)
    g, t, s, d, a = doc["grid"], doc["time"], doc["scheme"], doc["diagnostics"], doc["adaptivity"]
    try:
        u0 = InitialDatum(float(g["u0_mean"]), float(g["u0_amplitude"]), int(g["u0_mode"]), str(g["u0_kind"]),
                          str(g["u0_file"]) or None)
        if u0.kind not in ("sin", "cos"):
            raise ConfigError("u0_kind must be 'sin' or 'cos'")
        sim = SimConfig(n=int(g["n"]), dt0=float(t["dt0"]), dt_min=float(t["dt_min"]), T=float(t["T"]),
                        scheme=str(s["kind"]), mobility=mob, potential=pot, noise=basis, cutoff=cutoff,
                        pos_floor=float(a["pos_floor"]), drop_ratio=float(a["drop_ratio"]),
                        h1_max=float(a["h1_max"]), output_stride=int(d["output_stride"]), seed=noise_seed,
                        paths=int(doc["output"]["paths"]), beta_diag=float(d["beta"]),
                        gamma_diag=float(d["gamma"]), u0=u0, stability_cap=bool(t["stability_cap"]),
                        ito_shift=float(s["ito_shift"]))
        sim.validate(intensity=False)
        c = doc["converge"]
        conv = ConvergeConfig(int(c["levels"]), int(c["paths"]), int(c["heun_ref_offset"]),
                              tuple(int(n) for n in c["grids"]), float(c["spatial_dt"]), float(c["spatial_T"]))
        q = doc["inequalities"]
        ineq = InequalityConfig(int(q["corpus_size"]), int(q["n"]), tuple(float(b) for b in q["betas"]),
                                tuple(float(x) for x in q["thetas"]), bool(q["refine"]))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(doc, sim, conv, ineq, doc["maxreg"], noise_seed)


def load(path=None, seed: Optional[int] = None) -> ExperimentConfig:
    user = read_toml(path) if path is not None else {}
    if path is not None and user.get("grid", {}).get("u0_file"):
        # snapshot paths are relative to the config file
        f = Path(user["grid"]["u0_file"])
        if not f.is_absolute():
            user["grid"]["u0_file"] = str(Path(path).parent / f)
    return parse(user, seed)
