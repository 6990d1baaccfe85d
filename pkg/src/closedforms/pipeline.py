"""End-to-end runs producing deterministic reports.

Each ``run_*`` returns ``(report, exit_code)`` with exit codes
0 success, 1 negative verdict, 3 numerical failure (2 is reserved for input
errors, raised before these functions are reached).
"""
from __future__ import annotations

from collections import Counter
from fractions import Fraction

import numpy as np

from . import cohomology as coh
from .geomech import SystemDefinition, classify_system, involution_check, jacobi_residual, sample_box
from .mesh import Cochain, SimplicialComplex, independence_report, verify_closed
from .report import TOOL_VERSION, check_verdict, num
from .tischler import (TischlerError, build_fibration_map, covering_report, edge_compatibility,
                       pullback_periods, rationalize, verify_fibration)
from .torus import FlowError, LatticeSearch, fiber_verdict

OK, NEGATIVE, INPUT_ERROR, NUMERICAL = 0, 1, 2, 3


def _header(command, inputs):
    return {"tool": "closedforms", "version": TOOL_VERSION, "command": command,
            "inputs": dict(sorted(inputs.items()))}


def _matrix(rows):
    return [[num(x) for x in row] for row in rows]


def run_cohomology(K: SimplicialComplex, forms=(), inputs=None, tol: float = 1e-9):
    rep = _header("cohomology", inputs or {})
    basis = coh.h1_basis(K)
    rep["mesh"] = {"dimension": K.dimension, "vertices": K.n_vertices, "edges": K.count(1),
                   "top_simplices": len(K.top), "orientable": K.orientable}
    rep.update(coh.report(basis))
    if forms:
        try:
            dec = coh.decompose_all(forms, basis, tol)
        except coh.CohomologyError as exc:
            rep["verdict"] = check_verdict("not closed")
            rep["error"] = str(exc)
            return rep, NEGATIVE
        rep["periods"] = _matrix(dec.coefficients)
        rep["coefficients"] = _matrix(dec.coefficients)
        rep["residuals"] = [num(r) for r in dec.residuals]
    rep["verdict"] = check_verdict("pass")
    rep["summary"] = f"first Betti number {basis.betti}"
    return rep, OK


def run_fibrate(K: SimplicialComplex, forms: list[Cochain], eps: float = 1e-4, bins: int = 16,
                inputs=None, tol: float = 1e-9):
    rep = _header("fibrate", inputs or {})
    k, n = len(forms), K.dimension
    rep["k"], rep["n"] = k, n

    def negative(verdict, message):
        rep["verdict"] = check_verdict(verdict)
        rep["summary"] = message
        return rep, NEGATIVE

    for i, f in enumerate(forms):
        ok, res = verify_closed(f, tol)
        if not ok:
            return negative("not closed", f"form {i + 1} is not closed (residual {res:.3g})")
    basis = coh.h1_basis(K)
    rep["betti"] = basis.betti
    if k > basis.betti:
        return negative("k exceeds first Betti number",
                        f"{k} forms with independent classes need b1 >= {k}, mesh has b1 = {basis.betti}")
    ind = independence_report(forms, tol)
    rep["independence"] = {"passed": ind.passed, "min_singular": num(ind.min_singular),
                           "min_rank": min(ind.ranks) if ind.ranks else 0}
    if not ind.passed:
        return negative("independence failed", ind.reason or "forms are not pointwise independent")
    try:
        dec = coh.decompose_all(forms, basis, tol)
    except coh.CohomologyError as exc:
        rep["verdict"] = check_verdict("fail")
        rep["summary"] = str(exc)
        return rep, NUMERICAL
    rows = [tuple(Fraction(x) for x in row) for row in dec.coefficients]
    rep["distinct_classes"] = len(set(rows)) == len(rows)
    rep["coefficients"] = _matrix(dec.coefficients)
    try:
        tc = rationalize(dec, basis, None, eps, tol)
        H = [[N * float(F) for F in pot] for N, pot in zip(tc.N, dec.potentials)]
        theta = build_fibration_map(tc.k, basis, H)
        compatible, worst = edge_compatibility(theta)
        winding = pullback_periods(theta, basis.selected)
        cert = verify_fibration(theta, bins)
    except TischlerError as exc:
        rep["verdict"] = check_verdict("fail")
        rep["summary"] = str(exc)
        return rep, NUMERICAL
    rep["rational"] = _matrix(tc.q)
    rep["N"] = tc.N
    rep["integer_coefficients"] = tc.k
    rep["eps_used"] = num(tc.eps)
    rep["eps_threshold"] = num(tc.eps_threshold)
    rep["edge_compatibility"] = {"passed": compatible, "worst": num(worst)}
    rep["pullback_periods"] = winding
    rep["pullback_periods_match"] = winding == [list(map(int, r)) for r in tc.k]
    rep["certificate"] = {
        "min_rank": min(cert.ranks),
        "min_rank_margin": num(cert.min_singular),
        "offending_simplices": cert.offending,
        "coverage": num(cert.coverage),
        "bins": cert.bins,
        "regular_values": len(cert.regular_values),
        "rejected_values": cert.rejected_values,
        "fiber_counts": {str(c): m for c, m in sorted(Counter(cert.fiber_counts).items())},
    }
    verdict = cert.verdict
    if verdict == "covering":
        rep["covering"] = covering_report(cert)
        verdict = f"covering degree {cert.degree}" if cert.degree else "fail"
        rep["summary"] = rep["covering"]["statement"]
    elif verdict == "fibration":
        rep["summary"] = f"M fibers over T^{k}; fibers have {sorted(set(cert.fiber_counts))} components"
    else:
        rep["summary"] = cert.reason
    good = verdict != "fail" and compatible and rep["pullback_periods_match"]
    rep["verdict"] = check_verdict(verdict if good else "fail")
    return rep, OK if good else NEGATIVE


def run_check_system(sys: SystemDefinition, samples: int = 1000, seed: int = 0, inputs=None):
    rep = _header("check-system", inputs or {})
    cls = classify_system(sys, samples, seed)
    rep["system"] = {"name": sys.name, "dimension": sys.dimension, "kind": sys.kind,
                     "integrals": len(sys.integrals), "rank": sys.rank}
    rep["samples"], rep["seed"] = samples, seed
    rep["jacobi_residual"] = num(cls.jacobi_residual)
    rep["involution_residual"] = num(cls.involution_residual)
    rep["regular_fraction"] = num(cls.regular_fraction)
    rep["poisson_rank"] = cls.pi_rank
    rep["jacobian_rank"] = cls.jacobian_rank
    rep["verdict"] = check_verdict(cls.verdict)
    rep["summary"] = cls.verdict
    return rep, OK if cls.integrable else NEGATIVE


def run_detect_torus(sys: SystemDefinition, level, guesses, search: LatticeSearch | None = None,
                     samples: int = 1000, seed: int = 0, inputs=None):
    rep = _header("detect-torus", inputs or {})
    search = search or LatticeSearch()
    rep["system"] = sys.name
    rep["level"] = [num(c) for c in level]
    rep["search"] = {"t_max": num(search.t_max), "grid": search.grid, "return_tol": num(search.return_tol)}
    try:
        fv = fiber_verdict(sys, level, guesses, search, samples, seed)
    except FlowError as exc:
        rep["verdict"] = check_verdict("inconclusive: " + str(exc))
        rep["summary"] = str(exc)
        return rep, NUMERICAL
    cls = fv.classification
    rep["classification"] = {"verdict": cls.verdict, "regular_fraction": num(cls.regular_fraction),
                             "involution_residual": num(cls.involution_residual),
                             "jacobi_residual": num(cls.jacobi_residual), "poisson_rank": cls.pi_rank}
    if fv.anchor is not None:
        rep["anchor"] = [num(v) for v in fv.anchor]
        rep["anchor_residual"] = num(fv.anchor_residual)
    if fv.projection_error:
        rep["anchor_error"] = fv.projection_error
    if fv.coframe is not None:
        rep["coframe_pairing_residual"] = num(fv.coframe.pairing_residual)
        rep["commutation_residual"] = num(fv.commutation_residual)
        rep["conservation_residual"] = num(fv.conservation_residual)
    if fv.lattice is not None:
        L = fv.lattice
        rep["lattice"] = {"rank": L.rank, "basis": [[num(v) for v in b] for b in L.basis],
                          "basis_residuals": [num(r) for r in L.residuals],
                          "returns": len(L.returns), "coherence": num(L.coherence)}
    rep["verdict"] = check_verdict(fv.verdict)
    rep["summary"] = fv.verdict
    return rep, OK if fv.verdict.startswith("torus") else NEGATIVE
