"""Reading and writing game files.

Game files are YAML documents; the grammar is described in ``docs/format.md``.
A file either lists every agent's action set or gives a routing block whose
routes become one shared action set.
"""

from __future__ import annotations

import re
from importlib import resources as _res
from pathlib import Path

import numpy as np
import yaml

from .game import BasisSet, Game, GameError

SCHEMA = "robusttoll-game/1"
BUNDLED = {
    "sioux_falls_simplified": "sioux_falls_simplified.yaml",
    "sioux": "sioux_falls_simplified.yaml",
}

_POLY = re.compile(r"^poly:(\d+)$")


class GameFileError(GameError):
    """A game file that cannot be turned into a valid game."""


def _fail(where, msg):
    raise GameFileError(f"{where}: {msg}")


def _basis_row(entry, n, where):
    if isinstance(entry, str):
        if entry == "const":
            return "const", np.r_[0.0, np.ones(n)]
        m = _POLY.match(entry)
        if m:
            d = int(m.group(1))
            return entry, np.arange(n + 1, dtype=float) ** d
        _fail(where, f"unknown basis tag {entry!r} (expected 'const' or 'poly:<d>')")
    if isinstance(entry, dict):
        vals = entry.get("values")
        if not isinstance(vals, list) or len(vals) < n:
            _fail(where, f"'values' must list b(1)..b({n})")
        try:
            row = np.r_[0.0, np.array(vals[:n], dtype=float)]
        except (TypeError, ValueError):
            _fail(where, "'values' must be numbers")
        return str(entry.get("name", where)), row
    _fail(where, "basis entries are tags or mappings with 'values'")


def _resource_index(ref, names, where):
    if isinstance(ref, bool):
        _fail(where, f"bad resource reference {ref!r}")
    if isinstance(ref, int):
        if not 0 <= ref < len(names):
            _fail(where, f"resource index {ref} out of range 0..{len(names) - 1}")
        return ref
    if isinstance(ref, str):
        if ref not in names:
            _fail(where, f"unknown resource {ref!r}")
        return names.index(ref)
    _fail(where, f"bad resource reference {ref!r}")


def _routes(block, names, where):
    """Expand a routing block into bundles, checking each route is a path."""
    for key in ("nodes", "edges", "origin", "destination", "routes"):
        if key not in block:
            _fail(where, f"missing '{key}'")
    nodes = set(block["nodes"])
    edges = {}
    for k, edge in enumerate(block["edges"]):
        w = f"{where}.edges[{k}]"
        if not isinstance(edge, dict):
            _fail(w, "edges are mappings with resource/from/to")
        r = _resource_index(edge.get("resource"), names, w)
        for end in ("from", "to"):
            if edge.get(end) not in nodes:
                _fail(w, f"'{end}' node {edge.get(end)!r} is not listed in nodes")
        if names[r] in edges:
            _fail(w, f"resource {names[r]!r} mapped to two edges")
        edges[names[r]] = (edge["from"], edge["to"], r)
    origin, dest = block["origin"], block["destination"]
    for label, v in (("origin", origin), ("destination", dest)):
        if v not in nodes:
            _fail(where, f"{label} {v!r} is not listed in nodes")
    bundles = []
    for k, route in enumerate(block["routes"]):
        w = f"{where}.routes[{k}]"
        if not route:
            _fail(w, "empty route")
        at = origin
        used = []
        for ref in route:
            name = names[_resource_index(ref, names, w)]
            if name not in edges:
                _fail(w, f"resource {name!r} is not an edge")
            u, v, r = edges[name]
            if u != at:
                _fail(w, f"route {route} is disconnected: edge {name!r} leaves {u!r} but the path is at {at!r}")
            used.append(r)
            at = v
        if at != dest:
            _fail(w, f"route {route} ends at {at!r}, not at destination {dest!r}")
        if len(set(used)) != len(used):
            _fail(w, f"route {route} repeats an edge")
        bundles.append(sorted(used))
    return bundles


def game_from_dict(doc: dict, where: str = "game") -> Game:
    if not isinstance(doc, dict):
        _fail(where, "document must be a mapping")
    if doc.get("schema") != SCHEMA:
        _fail(f"{where}.schema", f"unrecognised schema {doc.get('schema')!r} (expected {SCHEMA!r})")
    n_agents = doc.get("n_agents")
    if not isinstance(n_agents, int) or n_agents < 1:
        _fail(f"{where}.n_agents", "must be a positive integer")
    n = doc.get("n_max", n_agents)
    if not isinstance(n, int) or n < n_agents:
        _fail(f"{where}.n_max", "must be an integer >= n_agents")
    basis_doc = doc.get("basis")
    if not isinstance(basis_doc, list) or not basis_doc:
        _fail(f"{where}.basis", "must be a non-empty list")
    rows = [_basis_row(b, n, f"{where}.basis[{j}]") for j, b in enumerate(basis_doc)]
    try:
        basis = BasisSet(np.array([r for _, r in rows]), tuple(nm for nm, _ in rows))
    except GameError as exc:
        _fail(f"{where}.basis", str(exc))

    res_doc = doc.get("resources")
    if not isinstance(res_doc, list) or not res_doc:
        _fail(f"{where}.resources", "must be a non-empty list")
    names, gamma = [], []
    for e, r in enumerate(res_doc):
        w = f"{where}.resources[{e}]"
        if not isinstance(r, dict) or "gamma" not in r:
            _fail(w, "resources are mappings with a 'gamma' row")
        g = r["gamma"]
        if not isinstance(g, list) or len(g) != basis.m:
            _fail(f"{w}.gamma", f"needs {basis.m} coefficients")
        names.append(str(r.get("name", f"e{e + 1}")))
        gamma.append(g)
    if len(set(names)) != len(names):
        _fail(f"{where}.resources", "resource names must be unique")

    has_sets = "action_sets" in doc
    has_routing = "routing" in doc
    if has_sets == has_routing:
        _fail(where, "give exactly one of 'action_sets' or 'routing'")
    if has_routing:
        bundles = _routes(doc["routing"], names, f"{where}.routing")
        action_sets = [bundles] * n_agents
    else:
        sets = doc["action_sets"]
        if not isinstance(sets, list) or len(sets) != n_agents:
            _fail(f"{where}.action_sets", f"needs one entry per agent ({n_agents})")
        action_sets = []
        for i, A in enumerate(sets):
            w = f"{where}.action_sets[{i}]"
            if not isinstance(A, list) or not A:
                _fail(w, "must be a non-empty list of bundles")
            action_sets.append([
                [_resource_index(ref, names, f"{w}[{q}]") for ref in bundle]
                for q, bundle in enumerate(A)])
    try:
        return Game(action_sets, np.array(gamma, dtype=float), basis)
    except (GameError, ValueError, TypeError) as exc:
        _fail(where, str(exc))


def load_game(path) -> Game:
    """Load a game file, or a bundled instance by name (e.g. ``sioux_falls_simplified``)."""
    path = str(path)
    if path in BUNDLED:
        text = _res.files("robusttoll.data").joinpath(BUNDLED[path]).read_text()
    else:
        text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise GameFileError(f"{path}: not valid YAML ({exc})") from exc
    try:
        return game_from_dict(doc)
    except GameFileError as exc:
        raise GameFileError(f"{path}: {exc}") from None


def _basis_entry(name, row, n):
    k = np.arange(n + 1, dtype=float)
    if name == "const" and np.array_equal(row[1:], np.ones(n)):
        return "const"
    m = _POLY.match(name)
    if m and np.array_equal(row, k ** int(m.group(1))):
        return name
    return {"name": name, "values": [float(v) for v in row[1:]]}


def game_to_dict(game: Game) -> dict:
    b = game.basis
    names = [f"e{e + 1}" for e in range(game.n_resources)]
    doc = {"schema": SCHEMA, "n_agents": game.n_agents}
    if b.n != game.n_agents:
        doc["n_max"] = b.n
    doc["basis"] = [_basis_entry(nm, row, b.n) for nm, row in zip(b.names, b.values)]
    doc["resources"] = [{"name": nm, "gamma": [float(g) for g in row]}
                        for nm, row in zip(names, game.gamma)]
    doc["action_sets"] = [[sorted(int(e) for e in bundle) for bundle in A] for A in game.action_sets]
    return doc


def save_game(game: Game, path):
    Path(path).write_text(yaml.safe_dump(game_to_dict(game), sort_keys=False, default_flow_style=None))


def games_equal(a: Game, b: Game) -> bool:
    return (a.action_sets == b.action_sets
            and np.array_equal(a.gamma, b.gamma)
            and np.array_equal(a.basis.values, b.basis.values))
