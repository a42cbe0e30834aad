"""YAML experiment configuration: parsing, validation, canonical hashing."""

import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .channel import ThreePathModel
from .constellation import build_qam, load_pmf_csv, uniform_pmf, validate_pmf
from .pcs import mb_pmf
from .waveform import WaveformConfig


class ConfigError(Exception):
    """Raised for malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """Parsed experiment file: waveform, alphabet, PMF, channel, blocks.

    experiment blocks (af, ber, pcs, ...) are kept as plain dicts; each CLI
    experiment validates the keys it consumes.
    """

    waveform: WaveformConfig
    order: int
    pmf_spec: dict
    channel: ThreePathModel
    seed: int
    blocks: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def constellation(self):
        return build_qam(self.order)

    def pmf(self, c=None):
        if c is None:
            c = self.constellation()
        src = self.pmf_spec.get("source", "uniform")
        if src == "uniform":
            return uniform_pmf(c)
        if src == "mb":
            return mb_pmf(c, float(self.pmf_spec["lam1"]), float(self.pmf_spec["lam2"]))
        if src == "file":
            return validate_pmf(c, load_pmf_csv(self.pmf_spec["path"], c))
        raise ConfigError(f"unknown pmf source {src!r}")

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _require(d: dict, key, ctx: str):
    if key not in d:
        raise ConfigError(f"missing key {key!r} in {ctx}")
    return d[key]


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be a mapping")
    wf = _require(data, "waveform", "config")
    try:
        waveform = WaveformConfig(
            n=int(_require(wf, "n", "waveform")),
            m=int(_require(wf, "m", "waveform")),
            s=int(wf.get("s", 1)),
            c1=float(wf.get("c1", 0.0)),
            c2=float(wf.get("c2", 0.0)),
            l1=float(wf.get("l1", 0.0)),
            l2=float(wf.get("l2", 0.0)),
            spread=bool(wf.get("spread", True)),
            prefix=str(wf.get("prefix", "cp")),
            prefix_len=int(wf.get("prefix_len", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad waveform block: {exc}") from exc

    con = data.get("constellation", {})
    order = int(con.get("order", 64))
    try:
        build_qam(order)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    pmf_spec = data.get("pmf", {"source": "uniform"})
    if pmf_spec.get("source", "uniform") not in ("uniform", "mb", "file"):
        raise ConfigError(f"unknown pmf source {pmf_spec.get('source')!r}")

    ch = data.get("channel", {})
    channel = ThreePathModel(
        delays=tuple(ch.get("delays", (0, 1, 2))),
        max_doppler=int(ch.get("max_doppler", 1)),
    )

    seed = int(data.get("seed", 0))
    known = {"waveform", "constellation", "pmf", "channel", "seed"}
    blocks = {k: v for k, v in data.items() if k not in known}
    return ExperimentConfig(
        waveform=waveform, order=order, pmf_spec=pmf_spec,
        channel=channel, seed=seed, blocks=blocks, raw=data,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return parse_config(data or {})
