"""Experiment configuration: a TOML file validated into dataclasses.

Schema (all counts are plain integers; errors are fractions in [0, 1]):

    name = "gaussian-shallow"      # artifact directory name
    seed = 1                        # root seed for every RNG stream
    workers = 1                     # process count; never changes results
    record_wall_time = false        # fill trials.csv wall_time_ms (breaks byte-determinism)

    [problem]
    kind = "gaussian"               # or "mnist"
    dim = 10                        # gaussian: input dimension
    center_offset = 1.0             # gaussian: class means at +-offset on axis 0
    class_std = 0.5                 # gaussian: per-coordinate standard deviation
    test_size = 10000               # gaussian: balanced test-set size (samples)
    random_labels = false           # replace all labels by fair coin flips
    # mnist: train_images, train_labels, test_images, test_labels (IDX paths),
    #        digits = [1, 2], train_per_class = 6000, test_per_class = 900

    [arch]
    hidden = [10]                   # hidden widths; input dim and output 2 are implied
    leakiness = 0.1

    [doc]
    samples = 100000                # sphere draws
    bins = 100

    [qn]
    n_values = [2, 6, 10]           # training-set sizes, ascending
    trials_per_n = 500              # training sets (one solution each) per n
    max_trials_each = 10000000      # weight-draw budget per training set

    [volumes]                       # optional
    n_values = [10]
    training_sets = 200
    probes = 100000                 # sphere draws per training set
    epsilons = [0.2]

    [bounds]
    epsilons = [0.05, 0.1, 0.2, 0.4]
    a_values = [2.0]
    gammas = [0.5]
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import GaussianProblem
from .nn import Arch


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class GaussianSpec:
    dim: int = 10
    center_offset: float = 1.0
    class_std: float = 0.5
    test_size: int = 10_000
    random_labels: bool = False
    kind: str = "gaussian"

    @property
    def problem(self) -> GaussianProblem:
        return GaussianProblem(self.dim, self.center_offset, self.class_std)

    @property
    def input_dim(self) -> int:
        return self.dim


@dataclass
class MnistSpec:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    digits: tuple[int, int] = (1, 2)
    train_per_class: int = 6000
    test_per_class: int = 900
    random_labels: bool = False
    kind: str = "mnist"

    @property
    def input_dim(self) -> int:
        return 784


@dataclass
class DocSpec:
    samples: int = 100_000
    bins: int = 100


@dataclass
class QnSpec:
    n_values: list[int] = field(default_factory=lambda: [2, 6, 10])
    trials_per_n: int = 500
    max_trials_each: int = 10_000_000


@dataclass
class VolumeSpec:
    n_values: list[int] = field(default_factory=lambda: [10])
    training_sets: int = 200
    probes: int = 100_000
    epsilons: list[float] = field(default_factory=lambda: [0.2])


@dataclass
class BoundSpec:
    epsilons: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])
    a_values: list[float] = field(default_factory=lambda: [2.0])
    gammas: list[float] = field(default_factory=lambda: [0.5])


@dataclass
class ExperimentConfig:
    name: str
    problem: GaussianSpec | MnistSpec
    arch: Arch
    doc: DocSpec
    qn: QnSpec
    bounds: BoundSpec
    volumes: VolumeSpec | None = None
    seed: int = 0
    workers: int = 1
    record_wall_time: bool = False

    def to_dict(self) -> dict:
        from dataclasses import asdict
        # workers is left out: it never changes results and must not change emitted bytes
        d = {"name": self.name, "seed": self.seed,
             "record_wall_time": self.record_wall_time,
             "problem": asdict(self.problem),
             "arch": {"layer_widths": list(self.arch.layer_widths), "leakiness": self.arch.leakiness},
             "doc": asdict(self.doc), "qn": asdict(self.qn), "bounds": asdict(self.bounds),
             "volumes": asdict(self.volumes) if self.volumes else None}
        if "digits" in d["problem"]:
            d["problem"]["digits"] = list(d["problem"]["digits"])
        return d


_KNOWN = {
    "": {"name", "seed", "workers", "record_wall_time", "problem", "arch", "doc", "qn", "volumes", "bounds"},
    "problem": {"kind", "dim", "center_offset", "class_std", "test_size", "random_labels", "train_images",
                "train_labels", "test_images", "test_labels", "digits", "train_per_class", "test_per_class"},
    "arch": {"hidden", "leakiness"},
    "doc": {"samples", "bins"},
    "qn": {"n_values", "trials_per_n", "max_trials_each"},
    "volumes": {"n_values", "training_sets", "probes", "epsilons"},
    "bounds": {"epsilons", "a_values", "gammas"},
}


class _Checker:
    def __init__(self):
        self.violations: list[str] = []

    def fail(self, msg: str):
        self.violations.append(msg)

    def get(self, table: dict, section: str, key: str, kind, default=None, *, minimum=None, positive=False):
        where = f"{section}.{key}" if section else key
        if key not in table:
            if default is None:
                self.fail(f"{where} is required")
            return default
        val = table[key]
        if kind is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if kind is int and isinstance(val, bool) or not isinstance(val, kind):
            self.fail(f"{where} must be {kind.__name__}, got {val!r}")
            return default
        if positive and val <= 0:
            self.fail(f"{where} must be >= 1" if kind is int else f"{where} must be > 0")
        if minimum is not None and val < minimum:
            self.fail(f"{where} must be >= {minimum}")
        return val

    def get_list(self, table, section, key, kind, default=None, *, ascending=False, nonempty=True):
        where = f"{section}.{key}"
        vals = table.get(key, default)
        if vals is None:
            self.fail(f"{where} is required")
            return []
        if not isinstance(vals, list) or not all(
                isinstance(v, kind) or (kind is float and isinstance(v, int)) for v in vals):
            self.fail(f"{where} must be a list of {kind.__name__}")
            return []
        vals = [kind(v) for v in vals]
        if nonempty and not vals:
            self.fail(f"{where} must be non-empty")
        if ascending and any(b <= a for a, b in zip(vals, vals[1:])):
            self.fail(f"{where} must be strictly ascending")
        return vals


def parse_config(raw: dict, base_dir: Path | None = None, check_files: bool = True) -> ExperimentConfig:
    ck = _Checker()
    for section, allowed in _KNOWN.items():
        table = raw if section == "" else raw.get(section, {})
        if not isinstance(table, dict):
            ck.fail(f"[{section}] must be a table")
            continue
        for key in table:
            if key not in allowed:
                ck.fail(f"unknown key {section + '.' if section else ''}{key}")

    name = ck.get(raw, "", "name", str)
    if name is not None and not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        ck.fail("name may only contain letters, digits, '_', '.', '-'")
    seed = ck.get(raw, "", "seed", int, 0, minimum=0)
    workers = ck.get(raw, "", "workers", int, 1, positive=True)
    record_wall_time = ck.get(raw, "", "record_wall_time", bool, False)

    pt = raw.get("problem", {}) if isinstance(raw.get("problem", {}), dict) else {}
    kind = pt.get("kind", "gaussian")
    problem = None
    if kind == "gaussian":
        problem = GaussianSpec(
            ck.get(pt, "problem", "dim", int, 10, positive=True),
            ck.get(pt, "problem", "center_offset", float, 1.0),
            ck.get(pt, "problem", "class_std", float, 0.5, positive=True),
            ck.get(pt, "problem", "test_size", int, 10_000, positive=True),
            ck.get(pt, "problem", "random_labels", bool, False))
    elif kind == "mnist":
        paths = {}
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            p = ck.get(pt, "problem", key, str)
            if p is not None:
                path = Path(p) if base_dir is None or Path(p).is_absolute() else base_dir / p
                if check_files and not path.exists():
                    ck.fail(f"problem.{key}: file not found: {path}")
                paths[key] = str(path)
        digits = ck.get_list(pt, "problem", "digits", int, [1, 2])
        if len(digits) != 2 or len(set(digits)) != 2 or not all(0 <= d <= 9 for d in digits):
            ck.fail("problem.digits must be two distinct digits 0-9")
            digits = [1, 2]
        train_cap = ck.get(pt, "problem", "train_per_class", int, 6000, positive=True)
        test_cap = ck.get(pt, "problem", "test_per_class", int, 900, positive=True)
        rl = ck.get(pt, "problem", "random_labels", bool, False)
        if len(paths) == 4:
            problem = MnistSpec(**paths, digits=tuple(digits), train_per_class=train_cap,
                                test_per_class=test_cap, random_labels=rl)
    else:
        ck.fail(f"problem.kind must be 'gaussian' or 'mnist', got {kind!r}")

    at = raw.get("arch", {}) if isinstance(raw.get("arch", {}), dict) else {}
    hidden = ck.get_list(at, "arch", "hidden", int, [], nonempty=False)
    if any(h < 1 for h in hidden):
        ck.fail("arch.hidden widths must be >= 1")
    leak = ck.get(at, "arch", "leakiness", float, 0.1)
    arch = None
    if problem is not None and not any(h < 1 for h in hidden) and leak is not None:
        try:
            arch = Arch.from_hidden(problem.input_dim, hidden, leak)
        except ValueError as exc:
            ck.fail(f"arch: {exc}")

    dt = raw.get("doc", {}) if isinstance(raw.get("doc", {}), dict) else {}
    doc = DocSpec(ck.get(dt, "doc", "samples", int, 100_000, positive=True),
                  ck.get(dt, "doc", "bins", int, 100, minimum=2))

    qt = raw.get("qn", {}) if isinstance(raw.get("qn", {}), dict) else {}
    qn = QnSpec(ck.get_list(qt, "qn", "n_values", int, ascending=True),
                ck.get(qt, "qn", "trials_per_n", int, 500, positive=True),
                ck.get(qt, "qn", "max_trials_each", int, 10_000_000, positive=True))
    if any(n < 0 for n in qn.n_values):
        ck.fail("qn.n_values must be >= 0")

    volumes = None
    if "volumes" in raw and isinstance(raw["volumes"], dict):
        vt = raw["volumes"]
        volumes = VolumeSpec(ck.get_list(vt, "volumes", "n_values", int, ascending=True),
                             ck.get(vt, "volumes", "training_sets", int, 200, positive=True),
                             ck.get(vt, "volumes", "probes", int, 100_000, positive=True),
                             ck.get_list(vt, "volumes", "epsilons", float, [0.2]))

    bt = raw.get("bounds", {}) if isinstance(raw.get("bounds", {}), dict) else {}
    bounds = BoundSpec(ck.get_list(bt, "bounds", "epsilons", float, [0.05, 0.1, 0.2, 0.4]),
                       ck.get_list(bt, "bounds", "a_values", float, [2.0]),
                       ck.get_list(bt, "bounds", "gammas", float, [0.5], nonempty=False))
    for e in bounds.epsilons + (volumes.epsilons if volumes else []):
        if not 0 <= e < 1:
            ck.fail(f"epsilon {e} must lie in [0, 1)")
    if any(a <= 1 for a in bounds.a_values):
        ck.fail("bounds.a_values must all exceed 1")
    if any(g <= 0 for g in bounds.gammas):
        ck.fail("bounds.gammas must all be > 0")

    if ck.violations:
        raise ConfigError(ck.violations)
    return ExperimentConfig(name, problem, arch, doc, qn, bounds, volumes, seed, workers, record_wall_time)


def validate_config(path, check_files: bool = True) -> ExperimentConfig:
    """Read and validate a TOML experiment file, reporting all violations at once."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: TOML parse error: {exc}"]) from exc
    return parse_config(raw, path.parent, check_files)
