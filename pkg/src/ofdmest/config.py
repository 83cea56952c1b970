"""
Sweep configuration: dataclasses, the sectioned key=value parser and a
dict round trip used by the structured result format.

Document layout::

    methods = ls, mmse          # keys before any section belong to [sweep]

    [ofdm]
    n_subcarriers = 64
    ...
    [channel]
    ...
    [sweep]
    ...
    [methods.lmmse]
    beta = auto

Unknown sections or keys are rejected.  Overrides (``section.key=value``)
are applied on top of the parsed document before validation.
"""

import configparser
from dataclasses import dataclass, field

import numpy as np

from .channel import FadingSpec, PowerDelayProfile
from .errors import ConfigError
from .modem import Constellation, OfdmConfig, PilotScheme

_ROOT = "__root__"


@dataclass(frozen=True)
class MethodSpec:
    """Estimator tag plus its parameters as sorted ``(key, value)`` pairs."""

    name: str
    params: tuple = ()

    @property
    def options(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class SweepConfig:
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    pdp: PowerDelayProfile = field(default_factory=PowerDelayProfile.exponential)
    fading: FadingSpec = field(default_factory=FadingSpec)
    methods: tuple = ()
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    n_trials: int = 500
    n_symbols_per_trial: int = 100
    master_seed: int = 0
    metrics: tuple = ("ber", "mse", "rmse")
    channel_model: str = "rayleigh"
    fixed_taps: tuple = (1 + 0j,)
    noiseless: bool = False
    interpolation: str = "linear"
    probe_symbols: int = 100_000
    probe_lags: int = 20

    @property
    def method_names(self) -> list:
        return [m.name for m in self.methods]

    def method(self, name: str) -> MethodSpec:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)


# ---------------------------------------------------------------------------
# value parsers

def _int(key, text):
    try:
        return int(text, 0)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {text!r}") from None


def _float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {text!r}") from None


def _bool(key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def _list(text):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
    return [t.strip() for t in text.split(",") if t.strip()]


def _float_list(key, text):
    return [_float(key, t) for t in _list(text)]


def _complex_list(key, text):
    try:
        return [complex(t.replace(" ", "")) for t in _list(text)]
    except ValueError:
        raise ConfigError(key, f"expected complex numbers, got {text!r}") from None


def _snr_grid(key, text):
    text = text.strip()
    if ":" in text and "," not in text:
        parts = [_float(key, p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(key, "range must be start:stop:step with step > 0")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(n, 0))]
    return _float_list(key, text)


def _str(key, text):
    return text.strip()


_SCHEMA = {
    "ofdm": {
        "n_subcarriers": (_int, "64"),
        "cp_length": (_int, "16"),
        "constellation": (_str, "qam16"),
        "pilot_kind": (_str, "comb"),
        "pilot_spacing": (_int, "4"),
        "pilot_period": (_int, "5"),
        "interpolation": (_str, "linear"),
    },
    "channel": {
        "model": (_str, "rayleigh"),
        "pdp": (_str, "exponential"),
        "pdp_taps": (_int, "4"),
        "pdp_decay": (_float, "2.0"),
        "pdp_delays": (_str, ""),
        "pdp_powers": (_str, ""),
        "doppler_rate": (_float, "0.01"),
        "n_oscillators": (_int, "32"),
        "fixed_taps": (_str, "1"),
        "probe_symbols": (_int, "100000"),
        "probe_lags": (_int, "20"),
    },
    "sweep": {
        "methods": (_str, ""),
        "snr_db": (_str, "0:30:5"),
        "n_trials": (_int, "500"),
        "n_symbols": (_int, "100"),
        "master_seed": (_int, "0"),
        "metrics": (_str, "ber, mse, rmse"),
        "noiseless": (_bool, "false"),
    },
}

#: per-method parameters: name -> (parser, default, description)
METHOD_PARAMS = {
    "perfect": {},
    "ls": {},
    "lms": {"step": (_float, "0.1", "adaptation step mu, 0 < mu < 2")},
    "mmse": {},
    "lmmse": {
        "beta": (_str, "auto", "constellation constant; 'auto' = E|x|^2 E|1/x|^2"),
        "correlation": (_str, "genie", "genie (from the delay profile) or empirical"),
        "training_symbols": (_int, "64", "prelude length for empirical correlation"),
    },
    "lowrank": {
        "rank": (_int, "0", "retained singular directions; 0 = number of channel taps"),
        "beta": (_str, "auto", "as for lmmse"),
    },
    "ml": {"n_taps": (_int, "0", "signal-subspace dimension; 0 = cp_length")},
    "kalman": {
        "variant": (_str, "scalar", "scalar (per subcarrier) or vector (joint)"),
        "order": (_int, "0", "AR order; 0 = 2 for scalar, 1 for vector"),
        "mode": (_str, "training",
                 "training (pilot cells only) or decision (hard decisions on data cells)"),
    },
}

METRICS = ("ber", "mse", "rmse")


def _read_document(text: str) -> dict:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"),
        default_section="__defaults_unused__")
    parser.optionxform = str
    try:
        parser.read_string(f"[{_ROOT}]\n" + text)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        first = str(exc).splitlines()[0]
        if isinstance(exc, configparser.ParsingError) and exc.errors:
            lineno, bad = exc.errors[0]
            first = f"cannot parse {bad}"
        # the document is read behind a synthetic root-section header
        where = f" at line {lineno - 1}" if lineno else ""
        raise ConfigError("<document>", f"parse error{where}: {first}") from None
    doc = {}
    for section in parser.sections():
        name = "sweep" if section == _ROOT else section
        doc.setdefault(name, {}).update(parser[section])
    return doc


def _apply_overrides(doc: dict, overrides) -> dict:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        lhs, value = item.split("=", 1)
        lhs = lhs.strip()
        if "." not in lhs:
            section, key = "sweep", lhs
        else:
            section, key = lhs.rsplit(".", 1)
        doc.setdefault(section, {})[key] = value.strip()
    return doc


def _section_values(doc: dict, section: str) -> dict:
    raw = doc.get(section, {})
    schema = _SCHEMA[section]
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{section}.{key}", "unknown key")
    out = {}
    for key, (parse, default) in schema.items():
        out[key] = parse(f"{section}.{key}", raw.get(key, default))
    return out


def _method_values(name: str, raw: dict) -> MethodSpec:
    schema = METHOD_PARAMS[name]
    for key in raw:
        if key not in schema:
            raise ConfigError(f"methods.{name}.{key}", "unknown key")
    params = {}
    for key, (parse, default, _) in schema.items():
        params[key] = parse(f"methods.{name}.{key}", raw.get(key, default))
    return MethodSpec(name, tuple(sorted(params.items())))


def parse_config(text: str, overrides=(), require_methods: bool = True) -> SweepConfig:
    """Parse and validate a configuration document.

    With ``require_methods=False`` an empty ``sweep.methods`` is accepted
    (channel probing needs no estimator).

    Raises
    ------
    ConfigError
        On syntax errors (with line number), unknown keys, or any violated
        constraint (naming the key and the rule).
    """
    doc = _apply_overrides(_read_document(text), overrides)
    for section in doc:
        if section not in _SCHEMA and not section.startswith("methods."):
            raise ConfigError(section, "unknown section")

    ofdm = _section_values(doc, "ofdm")
    chan = _section_values(doc, "channel")
    sweep = _section_values(doc, "sweep")

    method_names = _list(sweep["methods"])
    if not method_names and require_methods:
        raise ConfigError("sweep.methods", "at least one method is required")
    for section in doc:
        if section.startswith("methods."):
            name = section.split(".", 1)[1]
            if name not in METHOD_PARAMS:
                raise ConfigError(section, f"unknown method {name!r}")
            if name not in method_names:
                raise ConfigError(section, f"method {name!r} is configured but not listed in sweep.methods")
    seen = set()
    methods = []
    for name in method_names:
        if name not in METHOD_PARAMS:
            raise ConfigError("sweep.methods",
                              f"unknown method {name!r}; choose from {', '.join(METHOD_PARAMS)}")
        if name in seen:
            raise ConfigError("sweep.methods", f"method {name!r} listed twice")
        seen.add(name)
        methods.append(_method_values(name, doc.get(f"methods.{name}", {})))

    return build_config(ofdm, chan, sweep, methods)


def build_config(ofdm: dict, chan: dict, sweep: dict, methods: list) -> SweepConfig:
    n = ofdm["n_subcarriers"]
    if n < 2 or n & (n - 1):
        raise ConfigError("ofdm.n_subcarriers", f"must be a power of two >= 2, got {n}")
    if ofdm["cp_length"] <= 0:
        raise ConfigError("ofdm.cp_length", "must be positive")
    if ofdm["cp_length"] >= n:
        raise ConfigError("ofdm.cp_length / ofdm.n_subcarriers",
                          f"cp_length ({ofdm['cp_length']}) must be smaller than n_subcarriers ({n})")
    try:
        constellation = Constellation.from_name(ofdm["constellation"])
    except ValueError as exc:
        raise ConfigError("ofdm.constellation", str(exc)) from None
    kind = ofdm["pilot_kind"]
    if kind not in ("comb", "block", "none"):
        raise ConfigError("ofdm.pilot_kind", "must be comb, block or none")
    spacing, period = ofdm["pilot_spacing"], ofdm["pilot_period"]
    if kind == "comb":
        if spacing < 2:
            raise ConfigError("ofdm.pilot_spacing", "must be >= 2")
        if n % spacing:
            raise ConfigError("ofdm.pilot_spacing",
                              f"spacing must divide N (spacing={spacing}, N={n})")
    if kind == "block" and period < 1:
        raise ConfigError("ofdm.pilot_period", "must be >= 1")
    if ofdm["interpolation"] not in ("linear", "transform"):
        raise ConfigError("ofdm.interpolation", "must be linear or transform")
    pilots = PilotScheme(kind, period=max(period, 1), spacing=max(spacing, 2))
    ofdm_cfg = OfdmConfig(n, ofdm["cp_length"], constellation, pilots)

    model = chan["model"]
    fixed_taps = (1 + 0j,)
    if model == "rayleigh":
        if chan["pdp"] == "exponential":
            if chan["pdp_taps"] < 1:
                raise ConfigError("channel.pdp_taps", "must be >= 1")
            if chan["pdp_decay"] <= 0:
                raise ConfigError("channel.pdp_decay", "must be positive")
            pdp = PowerDelayProfile.exponential(chan["pdp_taps"], chan["pdp_decay"])
        elif chan["pdp"] == "custom":
            delays = [int(d) for d in _float_list("channel.pdp_delays", chan["pdp_delays"])]
            powers = _float_list("channel.pdp_powers", chan["pdp_powers"])
            try:
                pdp = PowerDelayProfile.normalized(delays, powers)
            except ValueError as exc:
                raise ConfigError("channel.pdp_delays / channel.pdp_powers", str(exc)) from None
        else:
            raise ConfigError("channel.pdp", "must be exponential or custom")
    elif model == "fixed":
        fixed_taps = tuple(_complex_list("channel.fixed_taps", chan["fixed_taps"]))
        if not fixed_taps or not any(fixed_taps):
            raise ConfigError("channel.fixed_taps", "need at least one non-zero tap")
        pdp = fixed_pdp(fixed_taps)
    else:
        raise ConfigError("channel.model", "must be rayleigh or fixed")
    if pdp.max_delay >= ofdm_cfg.cp_length:
        raise ConfigError("channel / ofdm.cp_length",
                          f"largest channel delay {pdp.max_delay} must be below cp_length")
    if chan["doppler_rate"] < 0:
        raise ConfigError("channel.doppler_rate", "must be >= 0")
    if chan["n_oscillators"] < 8:
        raise ConfigError("channel.n_oscillators", "must be >= 8")
    if chan["probe_symbols"] < 2:
        raise ConfigError("channel.probe_symbols", "must be >= 2")
    if not 0 <= chan["probe_lags"] < chan["probe_symbols"]:
        raise ConfigError("channel.probe_lags", "must be in [0, probe_symbols)")
    fading = FadingSpec(chan["doppler_rate"], chan["n_oscillators"], 0)

    snr = _snr_grid("sweep.snr_db", sweep["snr_db"])
    if not snr:
        raise ConfigError("sweep.snr_db", "SNR grid must not be empty")
    if sweep["n_trials"] < 1:
        raise ConfigError("sweep.n_trials", "must be >= 1")
    if sweep["n_symbols"] < 1:
        raise ConfigError("sweep.n_symbols", "must be >= 1")
    if not 0 <= sweep["master_seed"] < 2 ** 64:
        raise ConfigError("sweep.master_seed", "must be an unsigned 64-bit integer")
    metrics = _list(sweep["metrics"])
    bad = [m for m in metrics if m not in METRICS]
    if bad or not metrics:
        raise ConfigError("sweep.metrics", f"must be a non-empty subset of {', '.join(METRICS)}")

    cfg = SweepConfig(
        ofdm=ofdm_cfg, pdp=pdp, fading=fading, methods=tuple(methods),
        snr_grid_db=tuple(snr), n_trials=sweep["n_trials"],
        n_symbols_per_trial=sweep["n_symbols"], master_seed=sweep["master_seed"],
        metrics=tuple(metrics), channel_model=model, fixed_taps=fixed_taps,
        noiseless=sweep["noiseless"], interpolation=ofdm["interpolation"],
        probe_symbols=chan["probe_symbols"], probe_lags=chan["probe_lags"])
    validate_methods(cfg)
    return cfg


def fixed_pdp(taps) -> PowerDelayProfile:
    """Delay profile matching a fixed tap vector (zero taps dropped)."""
    taps = np.asarray(taps, dtype=complex)
    delays = np.flatnonzero(taps)
    return PowerDelayProfile.normalized(delays, np.abs(taps[delays]) ** 2)


def validate_methods(cfg: SweepConfig):
    """Check every method's parameters against the frame geometry."""
    pilots = cfg.ofdm.pilots
    n = cfg.ofdm.n_subcarriers
    n_obs = n // pilots.spacing if pilots.kind == "comb" else n
    for spec in cfg.methods:
        opts = spec.options
        key = f"methods.{spec.name}"
        if pilots.kind == "none" and spec.name != "perfect":
            raise ConfigError("ofdm.pilot_kind",
                              f"method {spec.name!r} needs pilots (pilot_kind=none)")
        if spec.name == "lms" and not 0 < opts["step"] < 2:
            raise ConfigError(f"{key}.step", "step must satisfy 0 < step < 2")
        if spec.name in ("lmmse", "lowrank"):
            beta = opts["beta"]
            if beta != "auto":
                try:
                    value = float(beta)
                except ValueError:
                    raise ConfigError(f"{key}.beta", "must be 'auto' or a number >= 1") from None
                if value < 1:
                    raise ConfigError(f"{key}.beta", "must be >= 1")
        if spec.name == "lmmse":
            if opts["correlation"] not in ("genie", "empirical"):
                raise ConfigError(f"{key}.correlation", "must be genie or empirical")
            if opts["training_symbols"] < 1:
                raise ConfigError(f"{key}.training_symbols", "must be >= 1")
        if spec.name == "lowrank" and not 0 <= opts["rank"] <= n_obs:
            raise ConfigError(f"{key}.rank", f"must be in [1, {n_obs}] (0 = channel taps)")
        if spec.name == "ml":
            n_taps = opts["n_taps"] or cfg.ofdm.cp_length
            if not 1 <= n_taps <= cfg.ofdm.cp_length:
                raise ConfigError(f"{key}.n_taps", "must be in [1, cp_length]")
            if n_taps > n_obs:
                raise ConfigError(f"{key}.n_taps",
                                  f"must not exceed the {n_obs} observed subcarriers")
        if spec.name == "kalman":
            if opts["variant"] not in ("scalar", "vector"):
                raise ConfigError(f"{key}.variant", "must be scalar or vector")
            if opts["mode"] not in ("training", "decision"):
                raise ConfigError(f"{key}.mode", "must be training or decision")
            if opts["order"] < 0:
                raise ConfigError(f"{key}.order", "must be >= 1 (0 = default)")


# ---------------------------------------------------------------------------
# dict round trip

def _complex_out(z):
    return [float(np.real(z)), float(np.imag(z))]


def config_to_dict(cfg: SweepConfig) -> dict:
    p = cfg.ofdm.pilots
    return {
        "ofdm": {
            "n_subcarriers": cfg.ofdm.n_subcarriers,
            "cp_length": cfg.ofdm.cp_length,
            "constellation": cfg.ofdm.constellation.kind,
            "pilot_kind": p.kind,
            "pilot_spacing": p.spacing,
            "pilot_period": p.period,
            "pilot_value": _complex_out(p.value),
            "interpolation": cfg.interpolation,
        },
        "channel": {
            "model": cfg.channel_model,
            "pdp_delays": list(cfg.pdp.delays),
            "pdp_powers": list(cfg.pdp.powers),
            "doppler_rate": cfg.fading.doppler_rate,
            "n_oscillators": cfg.fading.n_oscillators,
            "fixed_taps": [_complex_out(t) for t in cfg.fixed_taps],
            "probe_symbols": cfg.probe_symbols,
            "probe_lags": cfg.probe_lags,
        },
        "sweep": {
            "snr_db": list(cfg.snr_grid_db),
            "n_trials": cfg.n_trials,
            "n_symbols": cfg.n_symbols_per_trial,
            "master_seed": cfg.master_seed,
            "metrics": list(cfg.metrics),
            "noiseless": cfg.noiseless,
        },
        "methods": [{"name": m.name, "params": dict(m.params)} for m in cfg.methods],
    }


def config_from_dict(d: dict) -> SweepConfig:
    o, c, s = d["ofdm"], d["channel"], d["sweep"]
    pilots = PilotScheme(o["pilot_kind"], o["pilot_period"], o["pilot_spacing"],
                         complex(*o["pilot_value"]))
    ofdm = OfdmConfig(o["n_subcarriers"], o["cp_length"],
                      Constellation.from_name(o["constellation"]), pilots)
    return SweepConfig(
        ofdm=ofdm,
        pdp=PowerDelayProfile(tuple(c["pdp_delays"]), tuple(c["pdp_powers"])),
        fading=FadingSpec(c["doppler_rate"], c["n_oscillators"], 0),
        methods=tuple(MethodSpec(m["name"], tuple(sorted(m["params"].items())))
                      for m in d["methods"]),
        snr_grid_db=tuple(s["snr_db"]), n_trials=s["n_trials"],
        n_symbols_per_trial=s["n_symbols"], master_seed=s["master_seed"],
        metrics=tuple(s["metrics"]), channel_model=c["model"],
        fixed_taps=tuple(complex(*t) for t in c["fixed_taps"]),
        noiseless=s["noiseless"], interpolation=o["interpolation"],
        probe_symbols=c["probe_symbols"], probe_lags=c["probe_lags"])
