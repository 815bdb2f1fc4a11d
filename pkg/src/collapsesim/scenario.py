"""Line-oriented scenario files: `[section]` headers, `key = value` lines,
repeated keys (`row = ...`) accumulating in order.

Values are typed generically: every whitespace token becomes an int, float,
or string; multi-token values become tuples.  Rendering writes the typed
values back out, so parse(render(parse(text))) == parse(text).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .constants import Constants, DEFAULT_CONSTANTS
from .errors import ParseError, ValidationError

_SECTION_RE = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_-]*)\]\s*$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

KNOWN_KINDS = ("collection", "stern_gerlach", "sg_repeat", "epr",
               "repeated_projection", "asymmetric_projection", "bhabha")


def _type_token(tok: str):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        return tok


def _render_value(v) -> str:
    if isinstance(v, tuple):
        return " ".join(_render_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class ScenarioFile:
    """Parsed, validated scenario: ordered sections of typed entries."""

    name: str
    kind: str
    sections: tuple[tuple[str, tuple[tuple[str, object], ...]], ...]
    positions: tuple = field(compare=False, repr=False, default=())

    def section(self, name: str) -> dict:
        """First value per key (repeated keys: use `rows`)."""
        for sec, entries in self.sections:
            if sec == name:
                out = {}
                for k, v in entries:
                    out.setdefault(k, v)
                return out
        return {}

    def rows(self, name: str, key: str = "row") -> list:
        for sec, entries in self.sections:
            if sec == name:
                return [v for k, v in entries if k == key]
        return []

    def has_section(self, name: str) -> bool:
        return any(sec == name for sec, _ in self.sections)

    def entry_position(self, section: str, key: str, occurrence: int = 0):
        """(line, column) of the value, for error reporting."""
        i = 0
        seen = 0
        for sec, entries in self.sections:
            for k, _ in entries:
                if sec == section and k == key:
                    if seen == occurrence:
                        return self.positions[i]
                    seen += 1
                i += 1
        return (0, 0)


def parse_scenario(text: str) -> ScenarioFile:
    """Parse and validate; raises ParseError (with position) or
    ValidationError (named constraint)."""
    sections: list[tuple[str, list[tuple[str, object]]]] = []
    positions: list[tuple[int, int]] = []
    current: Optional[str] = None
    seen_sections: set[str] = set()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            name = m.group(1)
            if name in seen_sections:
                raise ParseError(ln, line.index("[") + 1, f"duplicate section [{name}]")
            seen_sections.add(name)
            sections.append((name, []))
            current = name
            continue
        if current is None:
            raise ParseError(ln, 1, "content before the first [section] header")
        if "=" not in line:
            raise ParseError(ln, len(line) + 1, "expected 'key = value'")
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        if not _KEY_RE.match(key):
            raise ParseError(ln, line.index(key_part.lstrip()[:1] or "=") + 1,
                             f"invalid key {key!r}")
        value_col = line.index("=") + 2
        tokens = value_part.split()
        if not tokens:
            raise ParseError(ln, value_col, f"empty value for {key!r}")
        typed = tuple(_type_token(t) for t in tokens)
        value = typed[0] if len(typed) == 1 else typed
        sections[-1][1].append((key, value))
        positions.append((ln, value_col))

    scn = dict()
    for sec, entries in sections:
        if sec == "scenario":
            scn = dict(entries)
    if "name" not in scn or "kind" not in scn:
        raise ValidationError("scenario-header", "[scenario] must declare name and kind")
    kind = str(scn["kind"])
    if kind not in KNOWN_KINDS:
        raise ValidationError("unknown-kind", f"kind {kind!r}; known: {list(KNOWN_KINDS)}")
    sf = ScenarioFile(
        name=str(scn["name"]),
        kind=kind,
        sections=tuple((s, tuple(e)) for s, e in sections),
        positions=tuple(positions),
    )
    _validate(sf)
    return sf


def render_scenario(sf: ScenarioFile) -> str:
    """Canonical text form; stable under parse/render cycles."""
    out = []
    for sec, entries in sf.sections:
        out.append(f"[{sec}]")
        for k, v in entries:
            out.append(f"{k} = {_render_value(v)}")
        out.append("")
    return "\n".join(out)


def _require_numeric_row(sf: ScenarioFile, section: str, arity: int, what: str) -> list[tuple]:
    rows = sf.rows(section)
    out = []
    for i, r in enumerate(rows):
        r = r if isinstance(r, tuple) else (r,)
        line, col = sf.entry_position(section, "row", i)
        if len(r) != arity:
            raise ParseError(line, col, f"{what} row needs {arity} numbers, got {len(r)}")
        for x in r:
            if isinstance(x, str):
                raise ParseError(line, col, f"non-numeric token {x!r} in {what} row")
        out.append(tuple(float(x) for x in r))
    return out


def _check_norm(rows_amp: list[complex], constraint: str):
    if sum(abs(a) ** 2 for a in rows_amp) == 0.0:
        raise ValidationError(constraint, "all amplitudes zero")


def _validate(sf: ScenarioFile):
    kind = sf.kind
    if kind == "collection":
        rows = _require_numeric_row(sf, "particle", 2, "amplitude")
        if not rows:
            raise ValidationError("collection-rows", "[particle] needs amplitude rows")
        _check_norm([complex(re, im) for re, im in rows], "all-amplitudes-zero")
    elif kind in ("stern_gerlach", "sg_repeat", "repeated_projection",
                  "asymmetric_projection"):
        rows = _require_numeric_row(sf, "particle", 3, "spin amplitude")
        if rows:
            for s, _, _ in rows:
                if s not in (0.5, -0.5):
                    raise ValidationError("spin-label", f"spin projection {s} not +/-0.5")
            _check_norm([complex(re, im) for _, re, im in rows], "all-amplitudes-zero")
        peak = sf.section("apparatus").get("stage_peak", 1.0)
        if not (0.0 < float(peak) <= 1.0):
            raise ValidationError("stage-peak", f"stage_peak {peak} outside (0, 1]")
    elif kind == "epr":
        rows = _require_numeric_row(sf, "pair", 4, "joint spin amplitude")
        if not rows:
            raise ValidationError("epr-rows", "[pair] needs joint rows")
        for sa, sb, _, _ in rows:
            if sa not in (0.5, -0.5) or sb not in (0.5, -0.5):
                raise ValidationError("spin-label", "joint spins must be +/-0.5")
        _check_norm([complex(re, im) for _, _, re, im in rows], "all-amplitudes-zero")
    elif kind == "bhabha":
        beam = sf.section("beam")
        if "sqrt_s" not in beam:
            raise ValidationError("beam-energy", "[beam] must declare sqrt_s")
        if float(beam["sqrt_s"]) <= 0:
            raise ValidationError("beam-energy", "sqrt_s must be positive")
    for key in ("trials", "seed"):
        v = sf.section("harness").get(key)
        if v is not None and not isinstance(v, int):
            raise ValidationError("harness-config", f"{key} must be an integer, got {v!r}")
    for label_prob in sf.rows("expected", "bin"):
        if not (isinstance(label_prob, tuple) and len(label_prob) == 2
                and isinstance(label_prob[0], str)
                and isinstance(label_prob[1], (int, float))):
            raise ValidationError("expected-bins", "expected bins are 'bin = LABEL PROB'")


def harness_params(sf: ScenarioFile) -> dict:
    """Scenario-kind parameters for the trial-runner registry."""
    kind = sf.kind
    if kind == "collection":
        return {"amplitudes": [complex(re, im)
                               for re, im in _require_numeric_row(sf, "particle", 2, "amplitude")]}
    if kind in ("stern_gerlach", "sg_repeat"):
        rows = _require_numeric_row(sf, "particle", 3, "spin amplitude")
        up = sum(complex(re, im) for s, re, im in rows if s > 0)
        down = sum(complex(re, im) for s, re, im in rows if s < 0)
        app = sf.section("apparatus")
        return {
            "amplitudes": (up, down),
            "axis": tuple(float(x) for x in app.get("gradient_axis", (0, 0, 1))),
            "strength": float(app.get("gradient_strength", 1.0)),
            "stage_peak": float(app.get("stage_peak", 1.0)),
        }
    if kind in ("repeated_projection", "asymmetric_projection"):
        app = sf.section("apparatus")
        rows = _require_numeric_row(sf, "particle", 3, "spin amplitude")
        spin = rows[0][0] if rows else 0.5
        params = {
            "repetitions": int(app.get("repetitions", 1)),
            "stage_peak": float(app.get("stage_peak", 0.8)),
            "axis": tuple(float(x) for x in app.get("gradient_axis", (0, 0, 1))),
            "input_spin": float(spin),
        }
        for ratio_key in ("mass_ratio", "energy_ratio"):
            if ratio_key in app:
                params[ratio_key] = float(app[ratio_key])
        return params
    if kind == "epr":
        app = sf.section("apparatus")
        rows = _require_numeric_row(sf, "pair", 4, "joint spin amplitude")
        return {
            "rows": tuple((sa, sb, complex(re, im)) for sa, sb, re, im in rows),
            "axis": tuple(float(x) for x in app.get("axis_a", (0, 0, 1))),
            "order": str(app.get("order", "AB")),
        }
    if kind == "bhabha":
        beam = sf.section("beam")
        eng = sf.section("engine")
        spins = beam.get("entry_spins", (0.5, -0.5))
        return {
            "sqrt_s": float(beam["sqrt_s"]),
            "entry_spins": tuple(float(s) for s in spins),
            "angular_bins": int(eng.get("angular_bins", 64)),
            "cos_cutoff": float(eng.get("cos_cutoff", 0.999)),
            "channel_policy": str(eng.get("channel_policy", "dynamic")),
        }
    raise ValidationError("unknown-kind", kind)


def constants_of(sf: ScenarioFile) -> Constants:
    sec = sf.section("constants")
    kwargs = {}
    for key in ("alpha_em", "m_e", "m_mu", "m_tau"):
        if key in sec:
            v = float(sec[key])
            if not math.isfinite(v) or v < 0:
                raise ValidationError("constants", f"{key} must be a finite nonnegative real")
            kwargs[key] = v
    return Constants(**kwargs) if kwargs else DEFAULT_CONSTANTS


def expected_of(sf: ScenarioFile) -> Optional[dict]:
    bins = sf.rows("expected", "bin")
    if not bins:
        return None
    return {str(label): float(prob) for label, prob in bins}


def harness_config(sf: ScenarioFile) -> dict:
    sec = sf.section("harness")
    out = {}
    if "trials" in sec:
        out["trials"] = int(sec["trials"])
    if "seed" in sec:
        out["seed"] = int(sec["seed"])
    out["alpha"] = float(sec.get("alpha", 0.01))
    return out
