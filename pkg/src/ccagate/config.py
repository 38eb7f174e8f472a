"""INI run configurations with a strict schema.

Physical rates are given in units of delta and have no defaults; numerical
controls do.  Example::

    [params]
    g = 0.1
    nu = 10
    omega_drive = 50
    omega_mw = 10
    fiber_phase = 0

    [numerics]
    mode = analytic

    [sweep]
    g_grid = 0.1, 0.2, 0.3
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass

from .analysis import FieldEnsemble, FieldState, fock, thermal
from .model import SystemParams
from .protocol import MODES


class ConfigError(ValueError):
    pass


PHYSICAL_KEYS = ("g", "nu", "omega_drive", "omega_mw", "fiber_phase")
NUMERIC_KEYS = {
    "mode": str, "cutoff_c": int, "cutoff_full_c": int, "cutoff_pm": int,
    "td_steps": int, "leak_threshold": float, "n_periods": int, "full_method": str,
    "threads": int,
}
SCHEMA = {
    "params": set(PHYSICAL_KEYS),
    "numerics": set(NUMERIC_KEYS),
    "sweep": {"g_grid"},
    "robustness": {"fields"},
    "verify": {"include_full"},
}
FULL_METHODS = ("corotating", "stepped")


def parse_field(label: str, default_nmax: int = 4) -> FieldState:
    """'vacuum', 'fock:N', 'thermal:NBAR' or 'thermal:NBAR:NMAX'."""
    parts = label.strip().split(":")
    try:
        if parts == ["vacuum"]:
            return fock(0)
        if parts[0] == "fock" and len(parts) == 2:
            n = int(parts[1])
            if n < 0:
                raise ValueError
            return fock(n)
        if parts[0] == "thermal" and len(parts) in (2, 3):
            nmax = int(parts[2]) if len(parts) == 3 else default_nmax
            return thermal(float(parts[1]), nmax)
    except ValueError:
        pass
    raise ConfigError(f"unknown field state {label!r}")


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    mode: str = "analytic"
    n_periods: int = 1
    full_method: str = "corotating"
    threads: int | None = None
    g_grid: tuple[float, ...] | None = None
    fields: tuple[str, ...] | None = None
    include_full: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.full_method not in FULL_METHODS:
            raise ConfigError(f"full_method must be one of {FULL_METHODS}")
        if self.n_periods < 1:
            raise ConfigError("n_periods must be >= 1")
        if self.g_grid is not None and not self.g_grid:
            raise ConfigError("g_grid is empty")
        if self.fields is not None:
            if not self.fields:
                raise ConfigError("fields is empty")
            for f in self.fields:
                parse_field(f)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def ensemble(self) -> FieldEnsemble:
        if self.fields is None:
            raise ConfigError("missing [robustness] fields")
        return FieldEnsemble([parse_field(f) for f in self.fields])

    def to_dict(self) -> dict:
        p = self.params
        return {
            "params": {k: getattr(p, k) for k in PHYSICAL_KEYS},
            "numerics": {"mode": self.mode, "cutoff_c": p.cutoff_c,
                         "cutoff_full_c": p.cutoff_full_c, "cutoff_pm": p.cutoff_pm,
                         "td_steps": p.td_steps, "leak_threshold": p.leak_threshold,
                         "n_periods": self.n_periods, "full_method": self.full_method,
                         "threads": self.threads},
            "sweep": {"g_grid": list(self.g_grid) if self.g_grid is not None else None},
            "robustness": {"fields": list(self.fields) if self.fields is not None else None},
            "verify": {"include_full": self.include_full},
        }

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for section, values in self.to_dict().items():
            items = {}
            for k, v in values.items():
                if v is None:
                    continue
                if isinstance(v, list):
                    items[k] = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
                elif isinstance(v, float):
                    items[k] = repr(v)
                else:
                    items[k] = str(v).lower() if isinstance(v, bool) else str(v)
            if items:
                cp[section] = items
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(cp[section]) - SCHEMA[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(extra)}")
    if "params" not in cp:
        raise ConfigError("missing [params] section")
    missing = [k for k in PHYSICAL_KEYS if k not in cp["params"]]
    if missing:
        raise ConfigError(f"missing physical parameters: {missing}")

    phys = {k: _float("params", k, cp["params"][k]) for k in PHYSICAL_KEYS}
    num = {}
    if "numerics" in cp:
        for k, raw in cp["numerics"].items():
            typ = NUMERIC_KEYS[k]
            if k in ("td_steps", "threads") and raw.strip().lower() in ("", "auto", "none"):
                num[k] = None
                continue
            try:
                num[k] = typ(raw.strip())
            except ValueError:
                raise ConfigError(f"[numerics] {k}: cannot parse {raw!r}") from None

    param_fields = {"cutoff_c", "cutoff_full_c", "cutoff_pm", "td_steps", "leak_threshold"}
    try:
        params = SystemParams(**phys, **{k: v for k, v in num.items() if k in param_fields})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from None

    g_grid = None
    if "sweep" in cp and "g_grid" in cp["sweep"]:
        raw = [x for x in cp["sweep"]["g_grid"].replace("\n", ",").split(",") if x.strip()]
        g_grid = tuple(_float("sweep", "g_grid", x) for x in raw)
    fields = None
    if "robustness" in cp and "fields" in cp["robustness"]:
        fields = tuple(x.strip() for x in cp["robustness"]["fields"].replace("\n", ",").split(",")
                       if x.strip())
    include_full = False
    if "verify" in cp and "include_full" in cp["verify"]:
        try:
            include_full = cp["verify"].getboolean("include_full")
        except ValueError:
            raise ConfigError("[verify] include_full must be a boolean") from None

    return RunConfig(
        params=params,
        mode=num.get("mode", "analytic"),
        n_periods=num.get("n_periods", 1),
        full_method=num.get("full_method", "corotating"),
        threads=num.get("threads"),
        g_grid=g_grid,
        fields=fields,
        include_full=include_full,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)
