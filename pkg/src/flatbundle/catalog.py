"""Built-in surfaces and group presets, shipped as JSON data files."""

from __future__ import annotations

import json
from importlib import resources

from .errors import NotFound
from .surface import TranslationSurface, load_surface

_SURFACES = ("octagon", "double_pentagon", "lshape")


def _data(name: str) -> dict:
    path = resources.files("flatbundle") / "data" / f"{name}.json"
    with path.open() as f:
        return json.load(f)


def surface_names() -> tuple[str, ...]:
    return _SURFACES


def load_catalog_surface(name: str) -> TranslationSurface:
    if name not in _SURFACES:
        raise NotFound(f"unknown surface {name!r}; try one of {_SURFACES}")
    d = _data(name)
    polygons = [[complex(x, y) for x, y in poly] for poly in d["polygons"]]
    gluings = {}
    for (p, e), (q, f) in (tuple(map(tuple, pair)) for pair in d["gluings"]):
        gluings[(p, e)] = (q, f)
        gluings[(q, f)] = (p, e)
    return load_surface(polygons, gluings, name=name)


def group_names() -> tuple[str, ...]:
    return tuple(sorted(_data("groups")))


def load_group_preset(name: str) -> dict:
    """A group preset: base surface name, kind, and generator matrices."""
    groups = _data("groups")
    if name not in groups:
        raise NotFound(f"unknown group {name!r}; try one of {tuple(sorted(groups))}")
    g = dict(groups[name])
    g["generators"] = [tuple(tuple(row) for row in m) for m in g["generators"]]
    g["name"] = name
    return g


def describe() -> dict:
    """Catalog listing used by the command line interface."""
    out = {"surfaces": {}, "groups": {}}
    for s in _SURFACES:
        d = _data(s)
        surf = load_catalog_surface(s)
        out["surfaces"][s] = {
            "description": d["description"],
            "genus": surf.genus,
            "area": surf.area,
            "cone_angles": [cc.angle for cc in surf.cone_classes],
        }
    for gname, g in _data("groups").items():
        out["groups"][gname] = {
            "description": g["description"],
            "surface": g["surface"],
            "kind": g["kind"],
            "generators": g["generators"],
        }
    return out
