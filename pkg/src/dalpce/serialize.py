"""JSON persistence of decompositions and learner states.

Document layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "kind": "decomposition" | "state",
      "dim": M,
      "pces": [{"lower": [...], "upper": [...], "exponents": [[...], ...],
                "coefficients": [...], "q2": r, "n_train": n, "y_var": r}, ...],
      "subdomains": [{"lower": [...], "upper": [...], "pce": k,
                      "members": [...], "inherited": b, "frozen": b}, ...],
      "tree": {"axis": [...], "cut": [...], "left": [...], "right": [...],
               "leaf": [...]}
    }

Every real ``r`` is written as the shortest decimal string that parses back
to the same double (``repr``), so a round trip is bit exact. Sub-domains that
share an expansion object (inheritance) point at the same ``pces`` entry.
A ``"state"`` document adds ``config``, ``ed``, ``rng``, ``screening``,
``counters`` and ``events``.
"""

import json

import numpy as np

from .domain import Decomposition, SubDomain
from .errors import DalPceError
from .polybasis import BasisSet, Box
from .surrogate import LocalPCE

SCHEMA_VERSION = 1


class SchemaError(DalPceError, ValueError):
    """Document does not follow the expected schema."""


def _r(x):
    return repr(float(x))


def _rs(a):
    return [repr(float(v)) for v in np.asarray(a, dtype=np.float64).reshape(-1)]


def _f(s):
    return float(s)


def _fs(seq):
    return np.array([float(v) for v in seq], dtype=np.float64)


def _opt_r(x):
    return None if x is None else _r(x)


def _opt_f(s):
    return None if s is None else float(s)


def _pce_to_dict(pce):
    return {
        "lower": _rs(pce.box.lower),
        "upper": _rs(pce.box.upper),
        "exponents": pce.basis.indices.tolist(),
        "coefficients": _rs(pce.coefficients),
        "q2": _r(pce.q2),
        "n_train": int(pce.n_train),
        "y_var": _r(pce.y_var),
    }


def _pce_from_dict(d):
    box = Box(_fs(d["lower"]), _fs(d["upper"]))
    basis = BasisSet(np.array(d["exponents"], dtype=np.int64).reshape(-1, box.dim))
    return LocalPCE(box, basis, _fs(d["coefficients"]), _f(d["q2"]),
                    int(d.get("n_train", 0)), _f(d.get("y_var", "0.0")))


def decomposition_to_dict(decomp):
    """Plain-JSON representation of a ``Decomposition``."""
    pce_index = {}
    pces = []
    subs = []
    for s in decomp:
        k = None
        if s.pce is not None:
            k = pce_index.get(id(s.pce))
            if k is None:
                k = pce_index[id(s.pce)] = len(pces)
                pces.append(_pce_to_dict(s.pce))
        subs.append({
            "lower": _rs(s.box.lower),
            "upper": _rs(s.box.upper),
            "pce": k,
            "members": s.member_ids.tolist(),
            "inherited": bool(s.inherited),
            "frozen": bool(s.frozen),
        })
    axis, cut, left, right, leaf = decomp.tree_arrays()
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "decomposition",
        "dim": decomp.dim,
        "pces": pces,
        "subdomains": subs,
        "tree": {"axis": axis.tolist(), "cut": _rs(cut), "left": left.tolist(),
                 "right": right.tolist(), "leaf": leaf.tolist()},
    }


def _check_version(doc):
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise SchemaError("missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {doc['schema_version']!r}")


def decomposition_from_dict(doc):
    """Inverse of :func:`decomposition_to_dict`."""
    _check_version(doc)
    try:
        dim = int(doc["dim"])
        pces = [_pce_from_dict(d) for d in doc["pces"]]
        decomp = Decomposition(dim)
        subs = []
        for d in doc["subdomains"]:
            k = d["pce"]
            subs.append(SubDomain(Box(_fs(d["lower"]), _fs(d["upper"])),
                                  None if k is None else pces[k],
                                  np.array(d["members"], dtype=np.int64),
                                  bool(d["inherited"]), bool(d["frozen"])))
        tree = doc["tree"]
        decomp.subdomains = subs
        decomp._axis = [int(v) for v in tree["axis"]]
        decomp._cut = [float(v) for v in tree["cut"]]
        decomp._left = [int(v) for v in tree["left"]]
        decomp._right = [int(v) for v in tree["right"]]
        decomp._leaf = [int(v) for v in tree["leaf"]]
    except (KeyError, TypeError, IndexError) as exc:
        raise SchemaError(f"malformed decomposition document: {exc!r}") from exc
    leaf_node = [-1] * len(subs)
    for node, sid in enumerate(decomp._leaf):
        if sid >= 0:
            if sid >= len(subs) or leaf_node[sid] != -1:
                raise SchemaError("tree leaves do not match the sub-domain list")
            leaf_node[sid] = node
    if -1 in leaf_node:
        raise SchemaError("sub-domain missing from the tree")
    decomp._leaf_node = leaf_node
    decomp._invalidate()
    return decomp


def _rng_state_to_dict(state):
    # PCG64 state integers exceed 64 bits; keep them as decimal strings
    out = {}
    for name, st in state.items():
        out[name] = {
            "bit_generator": st["bit_generator"],
            "state": {k: str(v) for k, v in st["state"].items()},
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }
    return out


def _rng_state_from_dict(d):
    return {name: {"bit_generator": st["bit_generator"],
                   "state": {k: int(v) for k, v in st["state"].items()},
                   "has_uint32": int(st["has_uint32"]),
                   "uinteger": int(st["uinteger"])}
            for name, st in d.items()}


def _event_to_dict(ev, timing):
    d = {"iteration": ev.iteration, "evaluations": ev.evaluations, "n_domains": ev.n_domains,
         "selected_domain_id": ev.selected_domain_id, "action": ev.action,
         "q2_local": _r(ev.q2_local), "q2_global": _opt_r(ev.q2_global)}
    if timing:
        d["wall_ms"] = _r(ev.wall_ms)
    return d


def state_to_dict(state, timing=False):
    """Plain-JSON representation of a learner state.

    Wall-clock timings are left out unless ``timing`` is set, so that equal
    seeds give byte-identical documents.
    """
    doc = decomposition_to_dict(state.decomposition)
    doc["kind"] = "state"
    doc["config"] = {k: (_r(v) if isinstance(v, float) else v)
                     for k, v in state.config.to_dict().items()}
    doc["ed"] = {"points": [_rs(row) for row in state.ed_points], "values": _rs(state.ed_values)}
    doc["rng"] = {"seed": state.rng.seed, "streams": _rng_state_to_dict(state.rng.get_state())}
    doc["screening"] = [_rs(row) for row in state.screening.points]
    doc["counters"] = {"iteration": state.iteration, "restarts": state.restarts,
                       "restart_evaluations": state.restart_evaluations,
                       "stop_reason": state.stop_reason}
    doc["events"] = [_event_to_dict(e, timing) for e in state.events]
    return doc


def state_from_dict(doc):
    """Inverse of :func:`state_to_dict`; the screening cache is rebuilt."""
    from .learner import DalPceState, EventRecord, LearnerConfig
    from .sampling import RngStreams, ScreeningPool

    _check_version(doc)
    if doc.get("kind") != "state":
        raise SchemaError("document does not hold a learner state")
    decomp = decomposition_from_dict(doc)
    try:
        cfg_raw = dict(doc["config"])
        floats = {"n_sim_factor", "q2_stop", "min_edge"}
        cfg = LearnerConfig.from_dict({k: (_opt_f(v) if k in floats else v)
                                       for k, v in cfg_raw.items()})
        dim = decomp.dim
        points = np.array([_fs(r) for r in doc["ed"]["points"]], dtype=np.float64).reshape(-1, dim)
        values = _fs(doc["ed"]["values"])
        rng = RngStreams(doc["rng"]["seed"])
        rng.set_state(_rng_state_from_dict(doc["rng"]["streams"]))
        screening = ScreeningPool(np.array([_fs(r) for r in doc["screening"]]).reshape(-1, dim))
        counters = doc["counters"]
        events = [EventRecord(e["iteration"], e["evaluations"], e["n_domains"],
                              e["selected_domain_id"], e["action"], _f(e["q2_local"]),
                              _opt_f(e["q2_global"]), _f(e.get("wall_ms", "0.0")))
                  for e in doc["events"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed state document: {exc!r}") from exc
    screening.sync(points)
    return DalPceState(cfg, decomp, points, values, rng, screening,
                       iteration=int(counters["iteration"]), restarts=int(counters["restarts"]),
                       restart_evaluations=int(counters["restart_evaluations"]),
                       events=events, stop_reason=counters["stop_reason"])


def dumps(doc):
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_decomposition(decomp, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(decomposition_to_dict(decomp)))


def load_decomposition(path):
    """Read a decomposition; a ``"state"`` document yields its decomposition."""
    with open(path, encoding="utf-8") as fh:
        return decomposition_from_dict(json.load(fh))


def save_state(state, path, timing=False):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(state_to_dict(state, timing)))


def load_state(path):
    with open(path, encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))
