#!/usr/bin/env python3
"""Regenerate the dispatch fixtures under data/fixtures/.

For every case this solves two AC OPF problems with PYPOWER's interior point
solver:

  start      the case with its cost replaced by a uniform linear cost
             (sum of generator active power), used as the initial point
  reference  the case with its own cost, used as the target / optimum

and, for selected cases, a power flow from the file dispatch.

Requires: pip install pypower numpy
"""
import copy
import json
import os
import re
import sys

import numpy as np
from pypower.api import ppoption, runopf, runpf

HERE = os.path.dirname(os.path.abspath(__file__))
CASES = os.path.join(HERE, "..", "data", "cases")
OUT = os.path.join(HERE, "..", "data", "fixtures")


def load_m(path):
    s = open(path).read()
    ppc = {"version": "2"}
    ppc["baseMVA"] = float(re.search(r"mpc\.baseMVA\s*=\s*([\d.eE+-]+)", s).group(1))
    for name in ["bus", "gen", "branch", "gencost"]:
        m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, s, re.S)
        if not m:
            continue
        rows = []
        for line in m.group(1).split("\n"):
            line = line.split("%")[0].strip().rstrip(";").strip()
            if line:
                rows.append([float(x) for x in line.replace(";", " ").split()])
        w = max(len(r) for r in rows)
        ppc[name] = np.array([r + [0.0] * (w - len(r)) for r in rows])
    return ppc


def cost(ppc, pg):
    total = 0.0
    for i, row in enumerate(ppc["gencost"]):
        n = int(row[3])
        total += np.polyval(row[4 : 4 + n], pg[i])
    return float(total)


def opf(ppc):
    # tight tolerances first; some cases only converge at the defaults
    for tol in (1e-10, 1e-8, 1e-6):
        opt = ppoption(
            VERBOSE=0, OUT_ALL=0, OPF_VIOLATION=tol * 100,
            PDIPM_GRADTOL=tol, PDIPM_COMPTOL=tol, PDIPM_COSTTOL=tol / 100,
        )
        r = runopf(copy.deepcopy(ppc), opt)
        if r["success"]:
            return r
    raise RuntimeError("opf failed")


def setpoint(ppc, r):
    gen = r["gen"]
    return {
        "pg_mw": [round(float(x), 9) for x in gen[:, 1]],
        "vg_pu": [round(float(x), 9) for x in gen[:, 5]],
        "cost": round(cost(ppc, gen[:, 1]), 6),
    }


def uniform(ppc):
    u = copy.deepcopy(ppc)
    gc = np.zeros((len(ppc["gen"]), 6))
    gc[:, 0] = 2
    gc[:, 3] = 2
    gc[:, 4] = 1.0
    u["gencost"] = gc
    return u


def pf_reference(ppc):
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-12, PF_MAX_IT=30)
    r, ok = runpf(copy.deepcopy(ppc), opt)
    if not ok:
        return None
    return {
        "vm_pu": [float(x) for x in r["bus"][:, 7]],
        "va_deg": [float(x) for x in r["bus"][:, 8]],
        "pg_mw": [float(x) for x in r["gen"][:, 1]],
        "qg_mvar": [float(x) for x in r["gen"][:, 2]],
    }


def main(names):
    os.makedirs(OUT, exist_ok=True)
    for name in names:
        ppc = load_m(os.path.join(CASES, name + ".m"))
        doc = {"schema": "convexpath.fixture/1", "case": name}
        doc["start"] = setpoint(ppc, opf(uniform(ppc)))
        doc["reference"] = setpoint(ppc, opf(ppc))
        doc["file_dispatch_pf"] = pf_reference(ppc)
        with open(os.path.join(OUT, name + ".json"), "w") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")
        print(name, doc["start"]["cost"], doc["reference"]["cost"])


if __name__ == "__main__":
    main(sys.argv[1:] or [
        "pglib_opf_case3_lmbd", "pglib_opf_case5_pjm", "pglib_opf_case14_ieee",
        "pglib_opf_case24_ieee_rts", "pglib_opf_case30_ieee", "pglib_opf_case39_epri",
        "pglib_opf_case57_ieee", "pglib_opf_case118_ieee", "case9_fixedv",
    ])
