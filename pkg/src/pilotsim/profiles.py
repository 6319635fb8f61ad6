"""Bundled charger / EV profiles and the profiles JSON format.

A profiles file looks like::

    {"chargers": {"name": {"v_ab": 10.6, "v_bc": 7.8, "v_cf": 4.4, ...}},
     "evs": {"name": {"r_state_b": 2740, "diode": {"forward_drop": 0.7}, ...}}}

Keys are the dataclass field names of ``ChargerProfile`` / ``EvProfile``;
omitted keys take the defaults.
"""

from __future__ import annotations

import dataclasses
import json
from importlib import resources
from pathlib import Path

from .circuit import DiodeModel
from .states import ChargerProfile, EvProfile


class UnknownProfile(KeyError):
    def __init__(self, kind: str, name: str, known):
        self.kind, self.name, self.known = kind, name, sorted(known)
        super().__init__(f"unknown {kind} profile {name!r}; known: {', '.join(self.known)}")

    def __str__(self) -> str:
        return self.args[0]


def charger_from_dict(name: str, d: dict) -> ChargerProfile:
    d = dict(d)
    d.setdefault("name", name)
    _reject_unknown(ChargerProfile, d)
    return ChargerProfile(**d)


def ev_from_dict(name: str, d: dict) -> EvProfile:
    d = dict(d)
    d.setdefault("name", name)
    if isinstance(d.get("diode"), dict):
        d["diode"] = DiodeModel(**d["diode"])
    _reject_unknown(EvProfile, d)
    return EvProfile(**d)


def charger_to_dict(p: ChargerProfile) -> dict:
    return dataclasses.asdict(p)


def ev_to_dict(p: EvProfile) -> dict:
    return dataclasses.asdict(p)


def _reject_unknown(cls, d: dict) -> None:
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(d) - names
    if extra:
        raise ValueError(f"unknown {cls.__name__} fields: {', '.join(sorted(extra))}")


class ProfileSet:
    def __init__(self, chargers: dict, evs: dict):
        self.chargers = chargers
        self.evs = evs

    def charger(self, name: str) -> ChargerProfile:
        try:
            return self.chargers[name]
        except KeyError:
            raise UnknownProfile("charger", name, self.chargers) from None

    def ev(self, name: str) -> EvProfile:
        try:
            return self.evs[name]
        except KeyError:
            raise UnknownProfile("ev", name, self.evs) from None

    def merged(self, other: "ProfileSet") -> "ProfileSet":
        return ProfileSet({**self.chargers, **other.chargers}, {**self.evs, **other.evs})

    @classmethod
    def from_dict(cls, raw: dict) -> "ProfileSet":
        return cls(
            {k: charger_from_dict(k, v) for k, v in raw.get("chargers", {}).items()},
            {k: ev_from_dict(k, v) for k, v in raw.get("evs", {}).items()},
        )


def bundled() -> ProfileSet:
    text = resources.files("pilotsim.data").joinpath("profiles.json").read_text()
    return ProfileSet.from_dict(json.loads(text))


def load(path: str | Path | None = None) -> ProfileSet:
    """Bundled profiles, overlaid with those from ``path`` when given."""
    base = bundled()
    if path is None:
        return base
    with open(path) as fh:
        return base.merged(ProfileSet.from_dict(json.load(fh)))


_BUNDLED = bundled()
CHARGER_1 = _BUNDLED.charger("charger1")
CHARGER_2 = _BUNDLED.charger("charger2")
PUBLIC_CHARGER = _BUNDLED.charger("public_charger")
NOMINAL_J1772 = _BUNDLED.charger("nominal_j1772")
DEFAULT_EV = _BUNDLED.ev("default")
