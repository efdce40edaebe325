"""INI experiment configuration with schema validation and line diagnostics."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "SCHEMA", "KINDS", "MODES"]

KINDS = ("design", "contour", "k-sweep", "robustness", "detect", "convergence")
MODES = ("MM", "WS", "SYNC", "HYBRID_RX")


class ConfigError(ValueError):
    """Schema violation; ``diagnostics`` holds one ``file:line: message`` per problem."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(self.diagnostics))


def _int(s):
    return int(s.strip())


def _float(s):
    x = float(s.strip())
    if not math.isfinite(x):
        raise ValueError("must be finite")
    return x


def _floats(s):
    return tuple(_float(p) for p in s.split(",") if p.strip())


def _ints(s):
    return tuple(_int(p) for p in s.split(",") if p.strip())


def _choice(*options):
    def parse(s):
        v = s.strip()
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return parse


def _check(parse, cond, msg):
    def wrapped(s):
        v = parse(s)
        if not cond(v):
            raise ValueError(msg)
        return v
    return wrapped


_pos_int = _check(_int, lambda v: v >= 1, "must be a positive integer")
_nonneg_int = _check(_int, lambda v: v >= 0, "must be a nonnegative integer")
_pos = _check(_float, lambda v: v > 0, "must be positive")

# section -> key -> (parser, default)
SCHEMA = {
    "scenario": {
        "N": (_pos_int, 16),
        "L": (_pos_int, 10),
        "P": (_pos_int, 8),
        "I": (_pos_int, 2),
        "rolloff": (_check(_float, lambda v: 0 <= v <= 1, "must lie in [0, 1]"), 0.22),
        "gamma_r_db": (_float, 25.0),
        "gamma_c_db": (_float, 25.0),
        "sigma2": (_pos, 1.0),
        "K": (_nonneg_int, 0),
        "P_r": (_pos, 1.0),
        "weights": (_check(_floats, lambda v: all(x >= 0 for x in v) and any(x > 0 for x in v),
                           "must be nonnegative with one positive entry"), None),
        "comm_energy": (_choice("unit", "raw"), "unit"),
    },
    "algorithm": {
        "mode": (_choice(*MODES), "MM"),
        "rx_mode": (_choice("MM", "WS"), "MM"),
        "eps": (_pos, 0.01),
        "Q": (_pos_int, 200),
        "max_outer": (_pos_int, 50),
        "max_inner": (_pos_int, 100),
        "seed": (_nonneg_int, 42),
        "convergence": (_choice("absolute", "relative", "db"), "absolute"),
        "solver": (_choice("barrier", "frank_wolfe"), "barrier"),
        "rel_tol": (_pos, 1e-5),
        "workers": (_pos_int, 1),
    },
    "experiment": {
        "kind": (_choice(*KINDS), None),
        "out": (str.strip, None),
        "grid_min_db": (_float, 0.0),
        "grid_max_db": (_float, 40.0),
        "grid_step_db": (_pos, 2.5),
        "K_values": (_check(_ints, lambda v: v and min(v) >= 0, "must be nonnegative integers"),
                     (0, 1, 2, 3, 4, 5, 6)),
        "design_K": (_check(_ints, lambda v: v and min(v) >= 0, "must be nonnegative integers"),
                     None),
        "k_min": (_int, -6),
        "k_max": (_int, 6),
        "P_f": (_check(_float, lambda v: 0 < v < 1, "must lie in (0, 1)"), 1e-4),
        "trials_h0": (_pos_int, 1_000_000),
        "trials_h1": (_pos_int, 100_000),
        "snr_grid_db": (_floats, (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)),
    },
}


@dataclass
class ExperimentConfig:
    scenario: dict
    algorithm: dict
    experiment: dict
    source: str = "<defaults>"
    explicit: set = field(default_factory=set)

    def flat(self) -> dict:
        out = {}
        for sec in ("scenario", "algorithm", "experiment"):
            for k, v in getattr(self, sec).items():
                out[f"{sec}.{k}"] = v
        return out


def _line_numbers(text):
    """Map (section, key) and section headers to 1-based line numbers."""
    where = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), i)
    return where


def defaults() -> ExperimentConfig:
    return ExperimentConfig(*({k: d for k, (_, d) in SCHEMA[s].items()} for s in SCHEMA))


def load_config(path=None, text=None) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every problem."""
    cfg = defaults()
    if path is None and text is None:
        return cfg
    name = str(path) if path is not None else "<string>"
    if text is None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError([f"{name}: cannot read: {exc.strerror}"]) from None
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        loc = f"{name}:{lineno}" if lineno else name
        raise ConfigError([f"{loc}: {exc.message.splitlines()[0] if hasattr(exc, 'message') else exc}"]) from None
    where = _line_numbers(text)
    errors = []
    for section in cp.sections():
        if section not in SCHEMA:
            errors.append(f"{name}:{where.get((section, None), '?')}: unknown section [{section}]")
            continue
        for key, raw in cp.items(section):
            line = where.get((section, key), "?")
            if key not in SCHEMA[section]:
                errors.append(f"{name}:{line}: [{section}] unknown key '{key}'")
                continue
            parse, _ = SCHEMA[section][key]
            try:
                getattr(cfg, section)[key] = parse(raw)
                cfg.explicit.add(f"{section}.{key}")
            except ValueError as exc:
                errors.append(f"{name}:{line}: [{section}] {key} = {raw!r}: {exc}")
    sc = cfg.scenario
    M = (sc["L"] + sc["I"] - 1) * sc["P"]
    if not errors:
        loc = f"{name}:{where.get(('scenario', 'N'), where.get(('scenario', None), '?'))}"
        if sc["N"] > M or (M - sc["N"]) % 2:
            errors.append(f"{loc}: [scenario] N: M - N must be even and nonnegative (M={M})")
        elif sc["K"] > (M - sc["N"]) // 2:
            errors.append(f"{name}:{where.get(('scenario', 'K'), '?')}: [scenario] K: exceeds (M-N)/2")
        w = sc["weights"]
        if w is not None and len(w) != 2 * sc["K"] + 1:
            errors.append(f"{name}:{where.get(('scenario', 'weights'), '?')}: [scenario] weights: "
                          f"need {2 * sc['K'] + 1} entries, got {len(w)}")
        ex = cfg.experiment
        if ex["grid_max_db"] < ex["grid_min_db"]:
            errors.append(f"{name}:{where.get(('experiment', 'grid_max_db'), '?')}: "
                          "[experiment] grid_max_db: below grid_min_db")
        if ex["k_max"] < ex["k_min"]:
            errors.append(f"{name}:{where.get(('experiment', 'k_max'), '?')}: [experiment] k_max: below k_min")
        if ex["trials_h0"] * ex["P_f"] < 10:
            errors.append(f"{name}:{where.get(('experiment', 'trials_h0'), '?')}: "
                          "[experiment] trials_h0: need trials_h0 * P_f >= 10")
    if errors:
        raise ConfigError(errors)
    cfg.source = name
    return cfg
