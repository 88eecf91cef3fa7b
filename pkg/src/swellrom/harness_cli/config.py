"""Study configuration from plain key=value files plus CLI overrides."""

import dataclasses
from dataclasses import dataclass

from swellrom.errors import ConfigError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class StudyConfig:
    """Knobs shared by every command; unused fields are ignored.

    ``eps_rb``, ``eps_ei`` and ``variance_times`` are comma-separated
    lists, kept as strings so the config file round-trips verbatim into
    output metadata.
    """

    mesh_h: float = 0.1
    dt: float = 0.01
    t_final: float = 1.0
    train_grid: str = "3x3"
    test_count: int = 10
    seed: int = 0
    eps_rb: str = "1e-3"
    eps_ei: str = "1e-3"
    alpha: float = 0.1
    beta: float = 0.1
    delta1: float = 1.0
    delta2: float = 1.0
    out: str = "swellrom_out"
    conservative: bool = True
    workers: int = 1
    with_variance: bool = True
    variance_grid: int = 5
    variance_times: str = "0,0.25,0.5,0.75"
    model: str = ""
    pod_rank: int = 0
    eim_modes: int = 0
    bg_spacing: float = 0.0

    def n_steps(self):
        """Step count; the horizon must be a whole number of steps."""
        if self.dt <= 0.0 or self.t_final <= 0.0:
            raise ConfigError("dt and t_final must be positive")
        n = int(round(self.t_final / self.dt))
        if n < 1 or abs(n * self.dt - self.t_final) > 1e-9 * max(1.0, self.t_final):
            raise ConfigError(
                f"t_final={self.t_final!r} is not a multiple of dt={self.dt!r}"
            )
        return n

    def eps_rb_list(self):
        return _parse_floats("eps_rb", self.eps_rb, positive=True)

    def eps_ei_list(self):
        return _parse_floats("eps_ei", self.eps_ei, positive=True)

    def times_list(self):
        """Output times, each snapped onto the time grid."""
        times = _parse_floats("variance_times", self.variance_times)
        for t in times:
            k = int(round(t / self.dt))
            if t < 0.0 or t > self.t_final + 1e-12 or abs(k * self.dt - t) > 1e-9:
                raise ConfigError(
                    f"variance time {t!r} is not a step multiple within the horizon"
                )
        return times

    def parameters(self):
        # local import so config parsing stays dependency-light
        from swellrom.fom_solver import ParameterVector

        return ParameterVector(self.alpha, self.beta, self.delta1, self.delta2)

    def echo(self):
        """Config as sorted strings for output metadata."""
        out = {}
        for f in dataclasses.fields(self):
            out[f.name] = repr(getattr(self, f.name))
        return out


def _parse_floats(key, text, positive=False):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{key} must list at least one value")
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    if positive and any(v <= 0.0 for v in values):
        raise ConfigError(f"{key} entries must be positive")
    return values


def _coerce(field, raw):
    if field.type is bool or isinstance(field.default, bool):
        low = raw.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{field.name}: expected a boolean, got {raw!r}")
    try:
        return type(field.default)(raw)
    except ValueError as exc:
        raise ConfigError(f"{field.name}: {exc}") from None


def parse_config_file(path):
    """Read key=value lines; '#' starts a comment, blank lines skipped."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for ln, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {body!r}")
        key, val = body.split("=", 1)
        values[key.strip()] = val.strip()
    return values


def load_config(path=None, overrides=None):
    """Build a StudyConfig from an optional file and override mapping."""
    fields = {f.name: f for f in dataclasses.fields(StudyConfig)}
    values = {}
    if path is not None:
        for key, raw in parse_config_file(path).items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(fields[key], raw)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    return StudyConfig(**values)
