"""Batch execution of named checks from a JSON configuration.

A configuration document looks like::

    {
      "seed": 24301,
      "output": {"path": "report.json", "format": "json"},
      "parallelism": 1,
      "suite": [
        {"check": "kernel_identity", "trials": 100, "params": {"shape": [2, 2]}},
        {"check": "nc_axioms", "map": {...}, "domain": {...}, "tolerance": 1e-9}
      ]
    }

``map`` and ``domain`` use the JSON encodings of :mod:`ncauto.maps` and
:mod:`ncauto.domains`.  Every check runs with the suite seed.
"""

import csv
import inspect
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import verify
from .domains import DomainSpec, nc_closure_check
from .maps import (
    HA,
    Compose,
    CounterexampleMap,
    Identity,
    LinearIsometry,
    MobiusTuple,
    TransposeAmplification,
    map_from_json,
)
from .matcore import NcPoint, decode_matrix, random_contraction, random_unitary

log = logging.getLogger(__name__)

DEFAULT_SEED = verify.DEFAULT_SEED
FORMATS = ("json", "csv")
CSV_COLUMNS = ("check", "seed", "trials", "max_residual", "tolerance", "passed", "runtime_ms")


class ConfigError(ValueError):
    def __init__(self, where, message):
        super().__init__(f"{where}: {message}")
        self.where = where


# name -> (function, takes map, takes domain, keyword receiving the trial count)
CHECKS = {
    "nc_axioms": (verify.check_nc_axioms, True, True, "trials"),
    "kernel_identity": (verify.check_kernel_identity, False, False, "trials"),
    "cb_transpose": (verify.check_cb_transpose, False, False, "samples"),
    "rigidity": (verify.check_rigidity, True, True, "samples"),
    "derivative_similarity_invariance": (verify.check_derivative_similarity_invariance, True, True, "trials"),
    "linear_structure": (verify.check_linear_structure, True, True, "trials"),
    "von_neumann": (verify.check_von_neumann, False, False, "trials"),
    "range_preservation": (verify.check_range_preservation, True, True, "trials"),
    "inverse_law": (verify.check_inverse_law, True, True, "trials"),
    "derivative_scheme": (verify.check_derivative_scheme, False, False, "trials"),
    "spectral_disk": (verify.check_spectral_disk, False, False, "trials"),
    "level_restriction": (verify.check_level_restriction, False, False, "trials"),
    "nc_closure": (nc_closure_check, False, True, "samples"),
}

_RESERVED = {"expr", "spec", "seed", "tolerance", "trials", "samples"}


def _decode_param(name, value):
    if name == "A" and value is not None:
        return decode_matrix(value)
    if name == "a":
        return complex(*value) if isinstance(value, list) else complex(value)
    if name == "points":
        return [NcPoint.from_json(p) for p in value]
    if isinstance(value, list):
        return tuple(value)
    return value


def _validate_entry(entry, where):
    if not isinstance(entry, dict):
        raise ConfigError(where, "check descriptor must be an object")
    name = entry.get("check")
    if name not in CHECKS:
        raise ConfigError(f"{where}.check", f"unknown check {name!r}; expected one of {sorted(CHECKS)}")
    func, takes_map, takes_domain, trials_kw = CHECKS[name]
    allowed = set(inspect.signature(func).parameters) - _RESERVED
    extra = set(entry) - {"check", "map", "domain", "trials", "tolerance", "params"}
    if extra:
        raise ConfigError(f"{where}.{sorted(extra)[0]}", "unknown field")
    for key in entry.get("params", {}):
        if key not in allowed:
            raise ConfigError(f"{where}.params.{key}", f"not a parameter of {name}; allowed: {sorted(allowed)}")
    if takes_map:
        if "map" not in entry:
            raise ConfigError(f"{where}.map", f"{name} needs a map")
        try:
            map_from_json(entry["map"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.map", str(exc)) from exc
    if takes_domain:
        if "domain" not in entry:
            raise ConfigError(f"{where}.domain", f"{name} needs a domain")
        try:
            DomainSpec.from_json(entry["domain"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.domain", str(exc)) from exc
    trials = entry.get("trials", 1)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 0:
        raise ConfigError(f"{where}.trials", "must be a non-negative integer")


@dataclass
class SuiteConfig:
    suite: List[dict] = field(default_factory=list)
    seed: int = DEFAULT_SEED
    output_path: Optional[str] = None
    output_format: str = "json"
    parallelism: int = 1

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict):
            raise ConfigError("config", "top level must be an object")
        suite = obj.get("suite", [])
        if not isinstance(suite, list):
            raise ConfigError("suite", "must be a list of check descriptors")
        for i, entry in enumerate(suite):
            _validate_entry(entry, f"suite[{i}]")
        seed = obj.get("seed", DEFAULT_SEED)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit non-negative integer")
        output = obj.get("output", {})
        fmt = output.get("format", "json")
        if fmt not in FORMATS:
            raise ConfigError("output.format", f"must be one of {FORMATS}")
        jobs = obj.get("parallelism", 1)
        if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
            raise ConfigError("parallelism", "must be a positive integer")
        return cls(suite, seed, output.get("path"), fmt, jobs)

    def to_json(self):
        output = {"format": self.output_format}
        if self.output_path is not None:
            output["path"] = self.output_path
        return {"seed": self.seed, "output": output, "parallelism": self.parallelism, "suite": self.suite}


def run_check(entry, seed):
    """Run one check descriptor; errors become a failed report rather than an exception."""
    name = entry["check"]
    func, takes_map, takes_domain, trials_kw = CHECKS[name]
    kwargs = {k: _decode_param(k, v) for k, v in entry.get("params", {}).items()}
    if takes_map:
        kwargs["expr"] = map_from_json(entry["map"])
    if takes_domain:
        kwargs["spec"] = DomainSpec.from_json(entry["domain"])
    if "trials" in entry:
        kwargs[trials_kw] = entry["trials"]
    if "tolerance" in entry:
        kwargs["tolerance"] = entry["tolerance"]
    try:
        return func(seed=seed, **kwargs)
    except Exception as exc:  # reported, not raised: a runtime error fails the check
        log.exception("check %s failed with an error", name)
        return verify.CheckReport(name, seed, entry.get("trials", 0), float("nan"), entry.get("tolerance", 0.0),
                                  False, [{"error": f"{type(exc).__name__}: {exc}"}], 0.0)


def _run_indexed(args):
    entry, seed = args
    return run_check(entry, seed)


def execute(config):
    """Run every check; returns the list of reports in configuration order."""
    jobs = [(entry, config.seed) for entry in config.suite]
    if config.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            return list(pool.map(_run_indexed, jobs))
    return [_run_indexed(j) for j in jobs]


def reports_to_json(reports):
    return json.dumps([r.to_json() for r in reports], indent=2) + "\n"


def reports_to_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        d = r.to_json()
        writer.writerow(["" if d[c] is None else repr(d[c]) if isinstance(d[c], float) else d[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def write_reports(reports, path, fmt):
    text = reports_to_json(reports) if fmt == "json" else reports_to_csv(reports)
    with open(path, "w") as fh:
        fh.write(text)


def summary(reports):
    lines = []
    for r in reports:
        tag = "PASS" if r.passed else "FAIL"
        note = " (expected failure)" if r.expect_failure else ""
        lines.append(f"{tag}  {r.check_name:<34} max_residual={r.max_residual:.3e}  tol={r.tolerance:.1e}{note}")
    lines.append(f"{sum(r.passed for r in reports)}/{len(reports)} checks passed")
    return "\n".join(lines)


def run_suite(config):
    """Execute, write the report file if configured, return ``(exit_status, reports)``."""
    reports = execute(config)
    if config.output_path:
        write_reports(reports, config.output_path, config.output_format)
    return (0 if all(r.passed for r in reports) else 1), reports


# -- the built-in suite

def _entry(check, trials=None, tolerance=None, expr=None, domain=None, **params):
    out = {"check": check}
    if expr is not None:
        out["map"] = expr.to_json()
    if domain is not None:
        out["domain"] = domain.to_json()
    if trials is not None:
        out["trials"] = trials
    if tolerance is not None:
        out["tolerance"] = tolerance
    if params:
        out["params"] = params
    return out


def builtin_paper_suite(seed=DEFAULT_SEED):
    """Canonical configuration exercising every identity and example."""
    rng = np.random.default_rng(seed)
    A22 = random_contraction(rng, 2, 2, 0.6)
    A23 = random_contraction(rng, 2, 3, 0.7)
    U2, V2, V3 = random_unitary(rng, 2), random_unitary(rng, 2), random_unitary(rng, 3)
    r22, r23 = DomainSpec.rpq_ball(2, 2), DomainSpec.rpq_ball(2, 3)
    disk2, disk1 = DomainSpec.polydisk(2), DomainSpec.polydisk(1)
    comm = DomainSpec.commutator()
    mobius = MobiusTuple([0.4, -1.1], [0.5 + 0.2j, -0.3j], [1, 0])
    rotation = MobiusTuple([np.pi / 3], [0.0])
    swap_rot = MobiusTuple([0.0, 0.7], [0.0, 0.0], [1, 0])
    morita = LinearIsometry(U2, V2)
    ce = CounterexampleMap((0.0, 1.0))
    witness = NcPoint([[[0, 0.9], [0, 0]], [[0, 0], [0.9, 0]], [[0, 0], [0, 0]]])
    suite = [
        _entry("kernel_identity", 100, 1e-10, shape=[1, 2], levels=[1, 2, 4]),
        _entry("kernel_identity", 100, 1e-10, shape=[2, 2], levels=[1, 2, 4]),
        _entry("kernel_identity", 100, 1e-10, shape=[3, 2], levels=[1, 2, 4]),
        _entry("inverse_law", 100, 1e-9, HA(A22), r22),
        _entry("inverse_law", 100, 1e-9, HA(A23), r23),
        _entry("inverse_law", 100, 1e-9, mobius, disk2),
        _entry("nc_axioms", 50, 1e-9, HA(A22), r22),
        _entry("nc_axioms", 50, 1e-9, mobius, disk2),
        _entry("nc_axioms", 50, 1e-9, LinearIsometry(U2, V3), r23),
        _entry("nc_axioms", 50, 1e-9, ce, comm),
        _entry("nc_axioms", 20, 1e-9, TransposeAmplification(2), disk1, levels=[2, 4], expect_failure=True),
        _entry("nc_closure", 50, None, domain=r23),
        _entry("nc_closure", 50, None, domain=disk2),
        _entry("nc_closure", 50, None, domain=comm),
        _entry("cb_transpose", 1000, 1e-9, p=1, n=3),
        _entry("cb_transpose", 1000, 1e-9, p=2, n=2),
        _entry("cb_transpose", 1000, 1e-9, p=3, n=3),
        _entry("von_neumann", 100, None, theta=0.3, a=[0.7, 0.0], level=4),
        _entry("range_preservation", 100, None, HA(A23), r23),
        _entry("range_preservation", 100, None, mobius, disk2),
        _entry("rigidity", 5, 1e-8, Identity(4), r22),
        _entry("rigidity", 5, 1e-8, Compose((HA(-A22), morita.inverse(), morita, HA(A22))), r22),
        _entry("rigidity", 5, 1e-8, rotation, disk1, expect="hypothesis_fails"),
        _entry("rigidity", 0, 1e-8, ce, comm, probe_levels=[2], expect="implication_fails",
               points=[witness.to_json()], expected_deviation=0.81),
        _entry("derivative_similarity_invariance", 10, 1e-6, morita, r22),
        _entry("derivative_similarity_invariance", 10, 1e-6, MobiusTuple([0.5, 2.0], [0, 0]), disk2),
        _entry("derivative_similarity_invariance", 10, 1e-6, HA(A22), r22, expect_failure=True),
        _entry("linear_structure", 10, 1e-10, morita, r22, levels=[1, 2, 3]),
        _entry("linear_structure", 10, 1e-10, swap_rot, disk2, levels=[1, 2, 3]),
        _entry("derivative_scheme", 50, 1e-6, shape=[2, 2], level=2),
        _entry("spectral_disk", 20, 0.0, radii=[1.0, 2.0, 2.0, 3.0], levels=[1, 2, 3, 4]),
        _entry("level_restriction", 20, 0.0, shape=[2, 2], generators=[2, 3], levels=[1, 2, 3, 4, 5]),
    ]
    return SuiteConfig(suite=suite, seed=seed)

