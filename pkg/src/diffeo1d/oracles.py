"""Regeneration of the committed gallery records.

Closed-form values are written directly; the rest are computed once by the
library and frozen, so tests compare against the file and never against a
live rerun.
"""

from __future__ import annotations

import math
from pathlib import Path

from .core import var_log_D_estimate
from .distortion import asymptotic_distortion
from .gallery import gallery
from .mather import mather_diffeo, mather_homomorphism

LOG2 = math.log(2.0)

# fixtures whose values follow from closed forms
CLOSED_FORM = {
    "identity": {"var": 0.0, "dist": 0.0, "var_DM": 0.0, "phi_M": 0.0,
                 "mather_trivial": True, "multipliers": [0.0, 0.0]},
    "mobius": {"var": 2.0, "dist": 2.0, "var_DM": 0.0, "phi_M": -2.0,
               "mather_trivial": True, "multipliers": [1.0, -1.0]},
    "plx": {"var": 2 * LOG2, "dist": 2 * LOG2, "var_DM": 4 * LOG2, "phi_M": 0.0,
            "mather_trivial": False, "multipliers": [LOG2, -LOG2]},
}

COMPUTED = ("linearized-mobius", "parabolic", "parabolic-witness", "sternberg")


def _computed(name: str) -> dict:
    f = gallery(name)
    var, var_err = var_log_D_estimate(f)
    dist = asymptotic_distortion(f)
    lam, mu = f.log_multipliers()
    M = mather_diffeo(f)
    return {"var": var, "var_error": var_err, "dist": dist.value,
            "dist_error": dist.error, "dist_method": dist.method,
            "var_DM": M.var, "phi_M": mather_homomorphism(f),
            "mather_trivial": bool(M.trivial), "multipliers": [lam, mu]}


def _circle() -> dict:
    from .circle import rotation_number
    F = gallery("circle-sine")
    var, _ = var_log_D_estimate(F)
    return {"var": var, "rotation_number": rotation_number(F), "dist_lower": 0.0}


def build_records() -> dict:
    recs = {k: dict(v) for k, v in CLOSED_FORM.items()}
    for name in COMPUTED:
        recs[name] = _computed(name)
    recs["circle-sine"] = _circle()
    recs["mobius-pair"] = {"dist": [2.0, 1.0], "commuting": True}
    recs["plx-pair"] = {"dist": [2 * LOG2, 4 * LOG2], "commuting": True}
    for name, rec in recs.items():
        rec["source"] = "closed form" if name in CLOSED_FORM or name.endswith("pair") \
            else "computed"
    return dict(sorted(recs.items()))


def records_path() -> Path:
    return Path(__file__).resolve().parent / "data" / "gallery_records.json"


def regenerate(path=None) -> Path:
    from .reports import write_json
    path = records_path() if path is None else Path(path)
    write_json(path, build_records())
    return path
