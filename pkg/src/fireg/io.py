"""Presentation files and report serialization.

A presentation file is JSON::

    {"ring": "Z",
     "generators": [0],
     "relations": [{"degree": 1,
                    "entries": [{"gen": 0, "terms": [{"coeff": 2, "injection": []}]}]}]}

``ring`` is ``"Z"`` or ``{"mod": l}``.  Injections are 1-based image
tuples.  Semantic errors carry the line and column of the offending
object.
"""

from __future__ import annotations

import json
import json.decoder
import json.scanner

from fireg import __version__
from fireg.fi import (CatAlgebraElement, Presentation, PresentationError, injection_problem,
                      presentation, validate)
from fireg.functors import FBModule
from fireg.linalg import FGAbelianGroup, LinalgError, Ring, ZZ


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class _Obj(dict):
    pos = 0


class _Arr(list):
    pos = 0


def _decoder(text: str) -> json.JSONDecoder:
    """A decoder whose objects and arrays remember their offset in ``text``."""
    dec = json.JSONDecoder()

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None):
        start = s_and_end[1] - 1
        pairs, end = json.decoder.JSONObject(s_and_end, strict, scan_once, None, list, memo)
        obj = _Obj()
        for k, v in pairs:
            if k in obj:
                raise ParseError(f"duplicate field {k!r}", *_linecol(text, start))
            obj[k] = v
        obj.pos = start
        return obj, end

    def parse_array(s_and_end, scan_once):
        start = s_and_end[1] - 1
        vals, end = json.decoder.JSONArray(s_and_end, scan_once)
        arr = _Arr(vals)
        arr.pos = start
        return arr, end

    dec.parse_object = parse_object
    dec.parse_array = parse_array
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


def _linecol(text: str, pos: int):
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _load(text: str):
    try:
        return _decoder(text).decode(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def _fields(obj, allowed, required, text, what):
    if not isinstance(obj, dict):
        raise ParseError(f"{what} must be an object", *_where(obj, text))
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ParseError(f"unknown field(s) {unknown} in {what}", *_where(obj, text))
    missing = [k for k in required if k not in obj]
    if missing:
        raise ParseError(f"missing field(s) {missing} in {what}", *_where(obj, text))


def _where(node, text):
    pos = getattr(node, "pos", None)
    return _linecol(text, pos) if pos is not None else (0, 0)


def _int(x, ctx, text, what, lo=None):
    if not isinstance(x, int) or isinstance(x, bool):
        raise ParseError(f"{what} must be an integer", *_where(ctx, text))
    if lo is not None and x < lo:
        raise ParseError(f"{what} must be >= {lo}", *_where(ctx, text))
    return x


def _list(x, ctx, text, what):
    if not isinstance(x, list):
        raise ParseError(f"{what} must be a list", *_where(ctx, text))
    return x


def parse_ring(value, ctx=None, text: str = "") -> Ring:
    if value == "Z":
        return ZZ
    if isinstance(value, dict):
        _fields(value, ("mod",), ("mod",), text, "ring")
        ell = _int(value["mod"], value, text, "ring modulus", 2)
        try:
            return Ring(ell)
        except LinalgError as exc:
            raise ParseError(str(exc), *_where(value, text)) from None
    raise ParseError('ring must be "Z" or {"mod": l}', *_where(ctx, text))


def parse_presentation(text: str) -> Presentation:
    doc = _load(text)
    _fields(doc, ("ring", "generators", "relations"), ("generators",), text, "presentation")
    ring = parse_ring(doc.get("ring", "Z"), doc, text)
    gens = [_int(a, doc, text, "generator degree", 0)
            for a in _list(doc["generators"], doc, text, "generators")]
    rels, entries = [], {}
    for i, rel in enumerate(_list(doc.get("relations", []), doc, text, "relations")):
        _fields(rel, ("degree", "entries"), ("degree",), text, f"relation {i}")
        b = _int(rel["degree"], rel, text, f"relation {i} degree", 0)
        rels.append(b)
        for ent in _list(rel.get("entries", []), rel, text, f"relation {i} entries"):
            _fields(ent, ("gen", "terms"), ("gen", "terms"), text, "entry")
            j = _int(ent["gen"], ent, text, "generator index", 0)
            if j >= len(gens):
                raise ParseError(f"generator index {j} out of range (have {len(gens)})",
                                 *_where(ent, text))
            if (i, j) in entries:
                raise ParseError(f"duplicate entry for generator {j} in relation {i}",
                                 *_where(ent, text))
            a = gens[j]
            terms = []
            for t in _list(ent["terms"], ent, text, "terms"):
                _fields(t, ("coeff", "injection"), ("coeff", "injection"), text, "term")
                c = _int(t["coeff"], t, text, "coeff")
                img = _list(t["injection"], t, text, "injection")
                for v in img:
                    _int(v, img, text, "injection value")
                if len(img) != a:
                    raise ParseError(f"injection {list(img)} must have length {a} "
                                     f"(degree of generator {j})", *_where(img, text))
                prob = injection_problem(tuple(img), b)
                if prob:
                    raise ParseError(prob, *_where(img, text))
                terms.append((c, tuple(img)))
            entries[(i, j)] = CatAlgebraElement.make(a, b, terms)
    P = presentation(gens, rels, entries, ring)
    problems = validate(P)
    if problems:
        raise ParseError("; ".join(problems))
    return P


def load_presentation(path: str) -> Presentation:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_presentation(text)


def ring_to_json(ring: Ring):
    return "Z" if ring.modulus is None else {"mod": ring.modulus}


def presentation_to_json(P: Presentation) -> dict:
    rels = []
    for i, b in enumerate(P.f1.degrees):
        ents = []
        for j in range(len(P.f0.degrees)):
            e = P.phi.entries.get((i, j))
            if e is None or e.is_zero():
                continue
            ents.append({"gen": j, "terms": [{"coeff": c, "injection": list(g)} for c, g in e.terms]})
        rels.append({"degree": b, "entries": ents})
    return {"ring": ring_to_json(P.ring), "generators": list(P.f0.degrees), "relations": rels}


def format_presentation(P: Presentation) -> str:
    """Stable, hand-editable text: one relation per line."""
    doc = presentation_to_json(P)
    compact = dict(separators=(", ", ": "))
    lines = ["{",
             f'  "ring": {json.dumps(doc["ring"], **compact)},',
             f'  "generators": {json.dumps(doc["generators"], **compact)},']
    if not doc["relations"]:
        lines.append('  "relations": []')
    else:
        lines.append('  "relations": [')
        body = [f"    {json.dumps(r, **compact)}" for r in doc["relations"]]
        lines.append(",\n".join(body))
        lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# reports

def group_to_json(g: FGAbelianGroup, ring: Ring) -> dict:
    return {"group": g.format(ring), "free_rank": g.free_rank,
            "invariant_factors": list(g.invariant_factors)}


def fb_to_json(V: FBModule) -> list:
    return [dict(degree=n, **group_to_json(g, V.ring)) for n, g in enumerate(V.groups)]


def fb_table(V: FBModule, label: str = "") -> list:
    """Text rows; zero groups print as ``0`` and degrees past the window as ``?``."""
    head = f"{label}: " if label else ""
    rows = [f"  {head}n={n}: {g.format(V.ring)}" for n, g in enumerate(V.groups)]
    rows.append(f"  {head}n>{V.window}: ?")
    return rows


def report_document(command: str, body: dict, timestamp: bool = True) -> dict:
    doc = {"tool": "fireg", "version": __version__, "command": command}
    if timestamp:
        import datetime
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    doc.update(body)
    return doc


def dump_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


__all__ = ["ParseError", "parse_presentation", "load_presentation", "format_presentation",
           "presentation_to_json", "parse_ring", "ring_to_json", "fb_to_json", "fb_table",
           "group_to_json", "report_document", "dump_report", "PresentationError"]
