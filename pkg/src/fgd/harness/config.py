"""Run configuration: flat ``key = value`` text files with ``#`` comments."""
from dataclasses import dataclass, fields, replace
from typing import Tuple

from ..errors import ConfigError
from ..geometry import INVERSE_MODES, LyapunovParams
from ..optim import FgdConfig

EXPERIMENTS = ("toy", "decay", "invariance", "bench", "mlp", "verify")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "toy"
    seed: int = 0
    output_dir: str = ""
    # optimiser / field
    eta: float = 0.1
    gamma: float = 0.1
    alpha: float = 12.0
    inverse_mode: str = "neumann"
    k1: float = 1.0
    k2: float = 1.0
    drift_abort: float = 0.5
    order: str = "semi_implicit"
    # problem sizes and run length
    n: int = 5
    p: int = 3
    seeds: int = 5
    epochs: int = 60
    # continuous-time runs
    h: float = 1e-3
    t_end: float = 1.0
    v0: float = 1e-3
    phi_scale: float = 1.0
    # mlp
    train_size: int = 400
    test_size: int = 400
    hidden: int = 8
    noise: float = 0.1
    schedule_epochs: Tuple[int, ...] = ()
    schedule_factor: float = 0.1
    baseline: bool = True
    # bench
    bench_n: Tuple[int, ...] = (256, 512, 1024, 2048)
    bench_p: Tuple[int, ...] = (16, 32, 64, 128)
    bench_fixed_n: int = 2048
    bench_fixed_p: int = 64
    bench_repeats: int = 21
    # verify
    states: int = 1000
    corrupt_feedback_sign: bool = False
    # output
    record_wall_time: bool = True
    workers: int = 1
    stride: int = 1
    plot: bool = False

    def fgd(self):
        return FgdConfig(eta=self.eta, gamma=self.gamma, alpha=self.alpha,
                         inverse_mode=self.inverse_mode, k=LyapunovParams(self.k1, self.k2),
                         drift_abort=self.drift_abort, order=self.order)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.inverse_mode not in INVERSE_MODES:
            raise ConfigError(f"inverse_mode must be one of {INVERSE_MODES}")
        if self.order not in ("semi_implicit", "explicit"):
            raise ConfigError("order must be semi_implicit or explicit")
        checks = [
            (self.seed >= 0, "seed >= 0"),
            (self.eta > 0, "eta > 0"),
            (self.gamma >= 0, "gamma >= 0"),
            (self.alpha >= 0, "alpha >= 0"),
            (self.k1 > 0 and self.k2 > 0, "k1, k2 > 0"),
            (0 < self.drift_abort < 1, "0 < drift_abort < 1"),
            (self.n >= self.p >= 1, "n >= p >= 1"),
            (self.seeds >= 1, "seeds >= 1"),
            (self.epochs >= 1, "epochs >= 1"),
            (self.h > 0 and self.t_end > 0, "h, t_end > 0"),
            (self.v0 >= 0, "v0 >= 0"),
            (self.train_size >= 2 and self.test_size >= 2, "train_size, test_size >= 2"),
            (1 <= self.hidden <= 9, "1 <= hidden <= 9 (feature dimension is 9)"),
            (self.noise >= 0, "noise >= 0"),
            (self.schedule_factor > 0, "schedule_factor > 0"),
            (all(e >= 1 for e in self.schedule_epochs), "schedule_epochs >= 1"),
            (all(v >= 1 for v in self.bench_n + self.bench_p), "bench sizes >= 1"),
            (self.bench_repeats >= 1, "bench_repeats >= 1"),
            (self.states >= 1, "states >= 1"),
            (self.workers >= 1, "workers >= 1"),
            (self.stride >= 1, "stride >= 1"),
        ]
        for ok, what in checks:
            if not ok:
                raise ConfigError(f"invalid configuration: need {what}")
        return self


# Experiment-specific defaults layered under the file and command line.
EXPERIMENT_DEFAULTS = {
    "toy": {},
    "decay": {"alpha": 5.0, "inverse_mode": "exact", "gamma": 0.1, "eta": 0.1},
    "invariance": {"inverse_mode": "exact"},
    "bench": {"eta": 0.01, "drift_abort": 0.9},
    "mlp": {"epochs": 200, "schedule_epochs": (150,), "schedule_factor": 0.2},
    "verify": {"inverse_mode": "exact"},
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key, text):
    kind = _FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind in (bool, "bool"):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        if kind in (str, "str"):
            return text
        # Tuple[int, ...]
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from None


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict; unknown or repeated keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def build_config(experiment, file_values=None, **overrides):
    """Defaults < experiment defaults < file values < explicit overrides."""
    file_values = dict(file_values or {})
    if "experiment" in file_values and file_values["experiment"] != experiment:
        raise ConfigError(f"config file is for experiment {file_values['experiment']!r}, "
                          f"not {experiment!r}")
    values = dict(EXPERIMENT_DEFAULTS.get(experiment, {}))
    values.update(file_values)
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["experiment"] = experiment
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    return replace(RunConfig(), **values).validate()


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def config_to_text(cfg):
    lines = ["# fully resolved run configuration"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
