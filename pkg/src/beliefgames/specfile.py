"""Flat text format for game specifications.

The format is line-oriented and diff-friendly: `[section]` headers, `key =
values` entries, `#` comments.  Kernel tables are written row-major, one row
per line, probabilities as decimal literals; floats round-trip bit-exactly
because the writer uses repr().  Sections:

    [game]            players, horizon, static_states
    [player.i]        states, observations, actions, prior
    [transition.i]    row_k = next-own-state distribution, k = x * A_joint + a
    [observation.i]   row_k = observation distribution, same row indexing
    [reward.i]        row_k = per-joint-action rewards, k = flat joint state
    [root.i]          optional public belief: atom_k = weight then belief entries
    [investment]      shorthand: players, horizon, lambda, p0, p1 (optional)

An [investment] section expands to the full investment-game spec; any [root.i]
sections then override the default point-mass root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beliefs import JointPublicBelief, PublicBelief, point_mass
from .game import GameSpec
from .investment import InvestmentParams, build_spec


class SpecFileError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class ParsedSpec:
    spec: GameSpec
    root: JointPublicBelief = None
    investment: InvestmentParams = None

    def root_or_default(self):
        if self.root is not None:
            return self.root
        return JointPublicBelief(tuple(point_mass(self.spec.prior[i])
                                       for i in range(self.spec.num_players)))


def _tokenize(text):
    """Yield (line_no, section, key, values) entries."""
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise SpecFileError(f"malformed section header {raw.strip()!r}", no)
            section = line[1:-1].strip()
            if not section:
                raise SpecFileError("empty section name", no)
            yield no, section, None, None
            continue
        if section is None:
            raise SpecFileError(f"entry before any section: {raw.strip()!r}", no)
        if "=" not in line:
            raise SpecFileError(f"expected 'key = values', got {raw.strip()!r}", no)
        key, _, rest = line.partition("=")
        yield no, section, key.strip(), rest.split()


def _floats(values, no):
    try:
        return [float(v) for v in values]
    except ValueError as exc:
        raise SpecFileError(str(exc), no)


def _int(values, no):
    if len(values) != 1:
        raise SpecFileError(f"expected one integer, got {values}", no)
    try:
        return int(values[0])
    except ValueError as exc:
        raise SpecFileError(str(exc), no)


def _float1(values, no):
    if len(values) != 1:
        raise SpecFileError(f"expected one number, got {values}", no)
    return _floats(values, no)[0]


def _bool(values, no):
    if len(values) == 1 and values[0].lower() in ("true", "false"):
        return values[0].lower() == "true"
    raise SpecFileError(f"expected true or false, got {values}", no)


def _section_index(section, prefix, no):
    tail = section[len(prefix):]
    try:
        return int(tail)
    except ValueError:
        raise SpecFileError(f"bad player index in section [{section}]", no)


def parse_spec_text(text):
    sections = {}
    lines = {}
    for no, section, key, values in _tokenize(text):
        if key is None:
            if section in sections:
                raise SpecFileError(f"duplicate section [{section}]", no)
            sections[section] = {}
            lines[section] = no
            continue
        if key in sections[section]:
            raise SpecFileError(f"duplicate key {key!r} in [{section}]", no)
        sections[section][key] = (no, values)

    if "investment" in sections:
        params = _parse_investment(sections["investment"])
        spec = build_spec(params)
        root = _parse_roots(sections, spec)
        return ParsedSpec(spec, root, params)
    if "game" not in sections:
        raise SpecFileError("missing [game] or [investment] section")
    spec = _parse_game(sections, lines)
    root = _parse_roots(sections, spec)
    return ParsedSpec(spec, root, None)


def parse_spec_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec_text(fh.read())


def _get(section, key, no_default=None):
    if key not in section:
        raise SpecFileError(f"missing key {key!r}", no_default)
    return section[key]


def _parse_investment(section):
    no, v = _get(section, "players")
    players = _int(v, no)
    no, v = _get(section, "horizon")
    horizon = _int(v, no)
    no, v = _get(section, "lambda")
    lam = _float1(v, no)
    no, v = _get(section, "p0")
    p0 = _float1(v, no)
    p1 = None
    if "p1" in section:
        no, v = section["p1"]
        p1 = _float1(v, no)
    try:
        return InvestmentParams(players, horizon, lam, p0, p1)
    except ValueError as exc:
        raise SpecFileError(str(exc))


def _parse_game(sections, lines):
    game = sections["game"]
    no, v = _get(game, "players", lines["game"])
    n = _int(v, no)
    no, v = _get(game, "horizon", lines["game"])
    horizon = _int(v, no)
    static = False
    if "static_states" in game:
        no, v = game["static_states"]
        static = _bool(v, no)

    state_sizes, obs_sizes, action_sizes, priors = [], [], [], []
    for i in range(n):
        name = f"player.{i}"
        if name not in sections:
            raise SpecFileError(f"missing section [{name}]")
        sec = sections[name]
        hdr = lines[name]
        no, v = _get(sec, "states", hdr)
        state_sizes.append(_int(v, no))
        no, v = _get(sec, "observations", hdr)
        obs_sizes.append(_int(v, no))
        no, v = _get(sec, "actions", hdr)
        action_sizes.append(_int(v, no))
        no, v = _get(sec, "prior", hdr)
        prior = _floats(v, no)
        if len(prior) != state_sizes[i]:
            raise SpecFileError(
                f"prior has {len(prior)} entries for {state_sizes[i]} states", no)
        priors.append(np.array(prior))

    num_aj = 1
    for a in action_sizes:
        num_aj *= a
    num_xj = 1
    for s in state_sizes:
        num_xj *= s

    def read_table(kind, i, num_rows, num_cols):
        name = f"{kind}.{i}"
        if name not in sections:
            raise SpecFileError(f"missing section [{name}]")
        sec = sections[name]
        hdr = lines[name]
        rows = []
        for r in range(num_rows):
            key = f"row_{r}"
            if key not in sec:
                raise SpecFileError(f"[{name}] missing {key}", hdr)
            no, v = sec[key]
            row = _floats(v, no)
            if len(row) != num_cols:
                raise SpecFileError(
                    f"[{name}] {key} has {len(row)} entries, expected {num_cols}", no)
            rows.append(row)
        extra = [k for k in sec if k.startswith("row_") and int(k[4:]) >= num_rows]
        if extra:
            raise SpecFileError(f"[{name}] has unexpected {extra[0]}", lines[name])
        return np.array(rows)

    transition, observation, reward = [], [], []
    for i in range(n):
        s, w, _ = state_sizes[i], obs_sizes[i], action_sizes[i]
        transition.append(read_table("transition", i, s * num_aj, s).reshape(s, num_aj, s))
        observation.append(read_table("observation", i, s * num_aj, w).reshape(s, num_aj, w))
        reward.append(read_table("reward", i, num_xj, num_aj))

    return GameSpec(
        num_players=n,
        horizon=horizon,
        state_sizes=tuple(state_sizes),
        obs_sizes=tuple(obs_sizes),
        action_sizes=tuple(action_sizes),
        transition=tuple(transition),
        observation=tuple(observation),
        reward=tuple(reward),
        prior=tuple(priors),
        static_states=static,
    )


def _parse_roots(sections, spec):
    names = [s for s in sections if s.startswith("root.")]
    if not names:
        return None
    comps = []
    for i in range(spec.num_players):
        name = f"root.{i}"
        if name not in sections:
            raise SpecFileError(f"[root.*] sections must cover every player; missing [{name}]")
        sec = sections[name]
        pairs = []
        k = 0
        while f"atom_{k}" in sec:
            no, v = sec[f"atom_{k}"]
            vals = _floats(v, no)
            if len(vals) != spec.state_sizes[i] + 1:
                raise SpecFileError(
                    f"atom_{k} needs weight plus {spec.state_sizes[i]} belief entries", no)
            pairs.append((tuple(vals[1:]), vals[0]))
            k += 1
        if not pairs:
            raise SpecFileError(f"[{name}] has no atoms")
        comps.append(PublicBelief.from_pairs(pairs))
    return JointPublicBelief(tuple(comps))


def format_spec(parsed_or_spec, root=None):
    """Render a spec (and optional root belief) in the file format; floats are
    written with repr() so parsing reproduces every table bit-exactly."""
    if isinstance(parsed_or_spec, ParsedSpec):
        spec = parsed_or_spec.spec
        root = parsed_or_spec.root if root is None else root
    else:
        spec = parsed_or_spec
    out = []
    out.append("[game]")
    out.append(f"players = {spec.num_players}")
    out.append(f"horizon = {spec.horizon}")
    out.append(f"static_states = {'true' if spec.static_states else 'false'}")
    for i in range(spec.num_players):
        out.append("")
        out.append(f"[player.{i}]")
        out.append(f"states = {spec.state_sizes[i]}")
        out.append(f"observations = {spec.obs_sizes[i]}")
        out.append(f"actions = {spec.action_sizes[i]}")
        out.append("prior = " + " ".join(repr(float(p)) for p in spec.prior[i]))
    for kind, tables in (("transition", spec.transition), ("observation", spec.observation)):
        for i in range(spec.num_players):
            out.append("")
            out.append(f"[{kind}.{i}]")
            flat = tables[i].reshape(-1, tables[i].shape[-1])
            for r, row in enumerate(flat):
                out.append(f"row_{r} = " + " ".join(repr(float(v)) for v in row))
    for i in range(spec.num_players):
        out.append("")
        out.append(f"[reward.{i}]")
        for r, row in enumerate(spec.reward[i]):
            out.append(f"row_{r} = " + " ".join(repr(float(v)) for v in row))
    if root is not None:
        for i, comp in enumerate(root.players):
            out.append("")
            out.append(f"[root.{i}]")
            for k, (atom, w) in enumerate(zip(comp.atoms, comp.weights)):
                vals = [w] + list(atom)
                out.append(f"atom_{k} = " + " ".join(repr(float(v)) for v in vals))
    return "\n".join(out) + "\n"


def write_spec_file(path, parsed_or_spec, root=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_spec(parsed_or_spec, root))
