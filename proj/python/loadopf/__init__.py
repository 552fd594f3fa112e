"""AC power flow and optimal power flow under aggregated load models.

Cases and segmented cases may be given as a path, a JSON string or a dict.
Functions return the parsed JSON report.
"""

import json
import os

from . import _core
from ._core import Error, classify, eval_load, parameter_names

__all__ = ["Error", "classify", "eval_load", "parameter_names", "pf", "opf", "fit", "sweep", "gap"]


def _text(doc):
    if isinstance(doc, dict):
        return json.dumps(doc)
    if isinstance(doc, os.PathLike) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        with open(doc, encoding="utf-8") as f:
            return f.read()
    return doc


def pf(case, **options):
    return json.loads(_core.pf(_text(case), **options))


def opf(case, **options):
    return json.loads(_core.opf(_text(case), **options))


def fit(measurements, bus, **options):
    """measurements: path of a CSV file with columns t,v_r,v_i,i_r,i_i."""
    with open(measurements, encoding="utf-8") as f:
        return json.loads(_core.fit(f.read(), bus, **options))


def sweep(segmented, kinds=("pq", "zip", "big"), **options):
    return json.loads(_core.sweep(_text(segmented), list(kinds), **options))


def gap(segmented, from_kind="pq", to_kind="zip", **options):
    return json.loads(_core.gap(_text(segmented), from_kind, to_kind, **options))
