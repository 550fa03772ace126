"""Problem ingestion (MPS, JSON), instance generators, and the specialized
reduced-system kernels for the LASSO / SVM cone programs.

Everything here produces standard-form data: min c'x s.t. Ax = b, x in a
product of cones.  Generators are pure functions of their seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .core import NONNEG, PSD, RSOC, SOC, Cone, ConicProblem

__all__ = [
    "MpsParseError", "MpsVarMap", "read_mps", "write_mps",
    "problem_to_json", "problem_from_json", "read_problem_file",
    "gen_random_lp", "pagerank_lp_from_edges", "gen_staircase_pagerank",
    "gen_lasso_socp", "gen_svm_socp", "gen_svm_instance", "qp_to_socp",
    "factor_psd", "lasso_reduced_solve", "lasso_kernel",
    "svm_reduced_solve", "svm_kernel",
]


# ===========================================================================
# MPS reading / writing
# ===========================================================================

class MpsParseError(ValueError):
    """Malformed MPS input; message carries the 1-based line number."""


@dataclass
class MpsVarMap:
    """Affine map from the standard-form solution back to the file's
    variables, plus the data needed to report the file's objective."""

    names: list
    ops: list                    # per original var, see recover()
    c_original: np.ndarray
    objective_constant: float
    maximize: bool
    row_names: list = field(default_factory=list)

    def recover(self, x_std: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.ops))
        for k, op in enumerate(self.ops):
            tag = op[0]
            if tag == "shift":        # x = lo + p
                out[k] = op[2] + x_std[op[1]]
            elif tag == "upper":      # x = up - p
                out[k] = op[2] - x_std[op[1]]
            elif tag == "split":      # x = p - q
                out[k] = x_std[op[1]] - x_std[op[2]]
            else:                     # fixed
                out[k] = op[1]
        return out

    def original_objective(self, x_std: np.ndarray) -> float:
        """Objective as written in the file (sense included) at the
        recovered point."""
        x = self.recover(x_std)
        return float(self.c_original @ x) + self.objective_constant


_BANNED_BOUNDS = {"BV", "LI", "UI", "SC"}


def _fail(lineno, msg):
    raise MpsParseError(f"line {lineno}: {msg}")


def read_mps(text: str):
    """Parse fixed- or free-format MPS (LP subset) into standard form.

    Returns (ConicProblem, MpsVarMap).  Inequality rows gain slack columns,
    ranged rows expand into an upper and a lower slacked row, bounded
    variables are shifted, free variables are split, and fixed variables are
    substituted out.  Integer markers and BV/LI/UI bounds are rejected.
    """
    section = None
    prob_name = "MPS"
    maximize = False
    obj_row = None
    row_type = {}                 # name -> E/L/G (constraint rows only)
    row_order = []
    col_entries = {}              # name -> {row_name: coef}
    col_order = []
    obj_coef = {}
    rhs = {}
    rng_val = {}
    lower = {}
    upper = {}
    obj_const = 0.0

    def touch_col(cname):
        if cname not in col_entries:
            col_entries[cname] = {}
            col_order.append(cname)

    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():  # section header
            kw = tok[0].upper()
            if kw == "NAME":
                prob_name = tok[1] if len(tok) > 1 else "MPS"
            elif kw == "OBJSENSE":
                section = "OBJSENSE"
                if len(tok) > 1:
                    maximize = tok[1].upper().startswith("MAX")
                    section = None
            elif kw in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                section = kw
            elif kw == "ENDATA":
                break
            else:
                _fail(lineno, f"unknown section {kw!r}")
            continue

        if section == "OBJSENSE":
            maximize = tok[0].upper().startswith("MAX")
            section = None
        elif section == "ROWS":
            if len(tok) < 2:
                _fail(lineno, "ROWS entry needs a type and a name")
            t, rname = tok[0].upper(), tok[1]
            if t == "N":
                if obj_row is None:
                    obj_row = rname
                row_type[rname] = "N"   # extra free rows are ignored
            elif t in ("E", "L", "G"):
                if rname in row_type:
                    _fail(lineno, f"duplicate row {rname!r}")
                row_type[rname] = t
                row_order.append(rname)
            else:
                _fail(lineno, f"unknown row type {t!r}")
        elif section == "COLUMNS":
            if any(p.upper() == "'MARKER'" for p in tok):
                if any(p.upper() == "'INTORG'" for p in tok):
                    _fail(lineno, "integer markers are not supported")
                continue  # INTEND or cosmetic marker
            cname = tok[0]
            pairs = tok[1:]
            if not pairs or len(pairs) % 2:
                _fail(lineno, "COLUMNS entries come in (row, value) pairs")
            touch_col(cname)
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                try:
                    v = float(val)
                except ValueError:
                    _fail(lineno, f"bad numeral {val!r}")
                if rname == obj_row:
                    obj_coef[cname] = obj_coef.get(cname, 0.0) + v
                elif row_type.get(rname) == "N":
                    pass
                elif rname in row_type:
                    d = col_entries[cname]
                    d[rname] = d.get(rname, 0.0) + v
                else:
                    _fail(lineno, f"unknown row {rname!r}")
        elif section in ("RHS", "RANGES"):
            pairs = tok[1:] if len(tok) % 2 else tok
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                try:
                    v = float(val)
                except ValueError:
                    _fail(lineno, f"bad numeral {val!r}")
                if rname == obj_row:
                    if section == "RHS":
                        obj_const = -v
                elif rname in row_type and row_type[rname] != "N":
                    (rhs if section == "RHS" else rng_val)[rname] = v
                elif row_type.get(rname) == "N":
                    pass
                else:
                    _fail(lineno, f"unknown row {rname!r}")
        elif section == "BOUNDS":
            btype = tok[0].upper()
            if btype in _BANNED_BOUNDS:
                _fail(lineno, f"bound type {btype!r} is not supported (LP only)")
            if btype in ("LO", "UP", "FX"):
                if len(tok) < 3:
                    _fail(lineno, "bound entry too short")
                cname, val = tok[-2], tok[-1]
                try:
                    v = float(val)
                except ValueError:
                    _fail(lineno, f"bad numeral {val!r}")
                if cname not in col_entries:
                    _fail(lineno, f"bound on unknown column {cname!r}")
                if btype in ("LO", "FX"):
                    lower[cname] = v
                if btype in ("UP", "FX"):
                    upper[cname] = v
            elif btype in ("FR", "MI", "PL"):
                cname = tok[-1]
                if cname not in col_entries:
                    _fail(lineno, f"bound on unknown column {cname!r}")
                if btype in ("FR", "MI"):
                    lower[cname] = -math.inf
                if btype == "FR":
                    upper[cname] = math.inf
            else:
                _fail(lineno, f"unknown bound type {btype!r}")
        elif section is None:
            _fail(lineno, "data before any section header")

    if obj_row is None:
        raise MpsParseError("no objective (N) row")

    # ---- expand rows: each file row becomes 1 or 2 standard rows ----------
    # std rows are triples (file_row_name, rhs_value, slack_sign or 0)
    std_rows = []
    row_map = {}                       # file row -> list of std row indices
    for rname in row_order:
        t = row_type[rname]
        h = rhs.get(rname, 0.0)
        r = rng_val.get(rname)
        if r is not None and not (t == "E" and r == 0.0):
            if t == "L":
                lo, hi = h - abs(r), h
            elif t == "G":
                lo, hi = h, h + abs(r)
            else:  # E
                lo, hi = (h, h + r) if r > 0 else (h + r, h)
            row_map[rname] = [len(std_rows), len(std_rows) + 1]
            std_rows.append([rname, hi, +1.0])
            std_rows.append([rname, lo, -1.0])
        else:
            row_map[rname] = [len(std_rows)]
            if t == "E":
                std_rows.append([rname, h, 0.0])
            elif t == "L":
                std_rows.append([rname, h, +1.0])
            else:
                std_rows.append([rname, h, -1.0])

    # ---- emit variable columns --------------------------------------------
    coo_i, coo_j, coo_v = [], [], []
    c_std = []
    sense = -1.0 if maximize else 1.0
    ops = []
    c_orig = np.array([obj_coef.get(cn, 0.0) for cn in col_order])
    b_std = np.array([sr[1] for sr in std_rows], dtype=float)
    ncols = 0
    bound_rows = []                    # (p_col, width) pending u-l rows

    def emit(cname, scale):
        nonlocal ncols
        j = ncols
        ncols += 1
        for rname, a in col_entries[cname].items():
            for i in row_map[rname]:
                coo_i.append(i)
                coo_j.append(j)
                coo_v.append(scale * a)
        c_std.append(scale * sense * obj_coef.get(cname, 0.0))
        return j

    def shift_rhs(cname, amount):
        if amount == 0.0:
            return
        for rname, a in col_entries[cname].items():
            for i in row_map[rname]:
                b_std[i] -= a * amount

    for cname in col_order:
        lo = lower.get(cname, 0.0)
        up = upper.get(cname, math.inf)
        if lo > up:
            raise MpsParseError(f"inconsistent bounds on column {cname!r}")
        if lo == up:                       # fixed: substitute the constant
            shift_rhs(cname, lo)
            ops.append(("fixed", lo))
        elif math.isfinite(lo) and math.isinf(up):
            shift_rhs(cname, lo)
            ops.append(("shift", emit(cname, 1.0), lo))
        elif math.isinf(lo) and math.isfinite(up):
            shift_rhs(cname, up)
            ops.append(("upper", emit(cname, -1.0), up))
        elif math.isinf(lo) and math.isinf(up):
            ops.append(("split", emit(cname, 1.0), emit(cname, -1.0)))
        else:                              # boxed: shift + extra row
            shift_rhs(cname, lo)
            j = emit(cname, 1.0)
            ops.append(("shift", j, lo))
            bound_rows.append((j, up - lo))

    # ---- slacks and bound rows --------------------------------------------
    for i, (_, _, sign) in enumerate(std_rows):
        if sign:
            coo_i.append(i)
            coo_j.append(ncols)
            coo_v.append(sign)
            c_std.append(0.0)
            ncols += 1
    nrows = len(std_rows)
    extra_b = []
    for p_col, width in bound_rows:
        coo_i.extend([nrows, nrows])
        coo_j.extend([p_col, ncols])
        coo_v.extend([1.0, 1.0])
        c_std.append(0.0)
        ncols += 1
        extra_b.append(width)
        nrows += 1
    b_full = np.concatenate([b_std, np.array(extra_b)]) if extra_b else b_std

    A = sp.coo_matrix((coo_v, (coo_i, coo_j)), shape=(nrows, ncols)).tocsc()
    problem = ConicProblem(A, b_full, np.array(c_std),
                           [Cone(NONNEG, ncols)], name=prob_name)
    varmap = MpsVarMap(names=list(col_order), ops=ops, c_original=c_orig,
                       objective_constant=obj_const, maximize=maximize,
                       row_names=[sr[0] for sr in std_rows])
    return problem, varmap


def write_mps(problem: ConicProblem, name: str | None = None) -> str:
    """Serialize an orthant-only, equality-form problem as free MPS.

    Columns keep their order on a read-back; floats are written with repr
    so the round trip is exact.
    """
    if not problem.is_orthant_only():
        raise ValueError("MPS output supports orthant-only problems")
    A = problem.A.tocsc()
    out = [f"NAME {name or problem.name or 'CONEIP'}", "ROWS", " N  OBJ"]
    out.extend(f" E  R{i}" for i in range(problem.m))
    out.append("COLUMNS")
    for j in range(problem.n):
        lo, hi = A.indptr[j], A.indptr[j + 1]
        for i, v in zip(A.indices[lo:hi], A.data[lo:hi]):
            out.append(f"    X{j}  R{i}  {float(v)!r}")
        # always write the objective entry so empty columns stay registered
        out.append(f"    X{j}  OBJ  {float(problem.c[j])!r}")
    out.append("RHS")
    for i, v in enumerate(problem.b):
        if v != 0.0:
            out.append(f"    RHS  R{i}  {float(v)!r}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


# ===========================================================================
# JSON problem format (versioned, "format": 1)
# ===========================================================================

def problem_to_json(problem: ConicProblem) -> str:
    A = problem.A
    doc = {
        "format": 1,
        "name": problem.name,
        "m": problem.m,
        "n": problem.n,
        "A": {
            "colptr": A.indptr.tolist(),
            "rowidx": A.indices.tolist(),
            "values": A.data.tolist(),
        },
        "b": problem.b.tolist(),
        "c": problem.c.tolist(),
        # for psd blocks "dim" is the matrix order, not the packed length
        "cones": [{"type": k.kind, "dim": k.size} for k in problem.cones],
    }
    return json.dumps(doc)


def problem_from_json(text: str) -> ConicProblem:
    doc = json.loads(text)
    if doc.get("format") != 1:
        raise ValueError(f"unsupported problem format {doc.get('format')!r}")
    m, n = int(doc["m"]), int(doc["n"])
    Ad = doc["A"]
    A = sp.csc_matrix(
        (np.asarray(Ad["values"], dtype=float),
         np.asarray(Ad["rowidx"], dtype=np.int64),
         np.asarray(Ad["colptr"], dtype=np.int64)),
        shape=(m, n))
    cones = [Cone(entry["type"], int(entry["dim"])) for entry in doc["cones"]]
    return ConicProblem(A, np.asarray(doc["b"], dtype=float),
                        np.asarray(doc["c"], dtype=float), cones,
                        name=doc.get("name", "json"))


def read_problem_file(path: str, fmt: str | None = None) -> ConicProblem:
    """Load a problem from disk; format from `fmt` or the file suffix."""
    if fmt is None:
        fmt = "mps" if str(path).lower().endswith(".mps") else "json"
    with open(path) as fh:
        text = fh.read()
    if fmt == "mps":
        return read_mps(text)[0]
    if fmt == "json":
        return problem_from_json(text)
    raise ValueError(f"unknown problem format {fmt!r}")


# ===========================================================================
# generators
# ===========================================================================

def gen_random_lp(m: int, n: int, density: float = 0.1,
                  seed: int = 0) -> ConicProblem:
    """Random strictly feasible LP: b = A x0 and c = A'y0 + s0 with x0, s0
    interior, so both sides admit strictly feasible points.  Every row and
    column is guaranteed at least one nonzero."""
    if not m < n:
        raise ValueError("need m < n for a generically feasible LP")
    rng = np.random.default_rng(seed)
    A = sp.random(m, n, density=density, random_state=rng,
                  data_rvs=rng.standard_normal, format="lil")
    # patch empty rows/columns so equilibration applies
    filled = A.tocsr()
    for i in np.flatnonzero(filled.getnnz(axis=1) == 0):
        A[i, rng.integers(n)] = rng.standard_normal() or 1.0
    filled = A.tocsc()
    for j in np.flatnonzero(filled.getnnz(axis=0) == 0):
        A[rng.integers(m), j] = rng.standard_normal() or 1.0
    A = A.tocsc()
    x0 = rng.uniform(0.5, 1.5, n)
    s0 = rng.uniform(0.5, 1.5, n)
    y0 = rng.standard_normal(m) / np.sqrt(m)
    b = A @ x0
    c = A.T @ y0 + s0
    # Normalize to ||b|| = ||c|| = 1 (equivalently: shrink x0 resp. (y0, s0)
    # by the same factor, so strict feasibility of both sides is untouched).
    # Optima and duals then stay O(1) regardless of size, and solutions at a
    # relative tolerance carry comparable absolute accuracy across sizes.
    b /= np.linalg.norm(b)
    c /= np.linalg.norm(c)
    return ConicProblem(A, b, c, [Cone(NONNEG, n)],
                        name=f"random-lp-{m}x{n}-seed{seed}")


def pagerank_lp_from_edges(edges, num_nodes: int,
                           damping: float = 0.99) -> ConicProblem:
    """Null-objective LP whose feasible set is the damped stationary
    distribution constraint {Sx <= x, 1'x = 1, x >= 0}.

    `edges` is a directed (src, dst) multiset; vertices with no out-edge
    get a self-loop before column scaling, so every column of S sums to
    the damping factor.
    """
    n = num_nodes
    outdeg = np.zeros(n, dtype=np.int64)
    for src, _ in edges:
        outdeg[src] += 1
    edges = list(edges) + [(j, j) for j in np.flatnonzero(outdeg == 0)]
    outdeg[outdeg == 0] = 1
    src = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
    dst = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
    S = sp.coo_matrix((damping / outdeg[src], (dst, src)), shape=(n, n)).tocsc()
    # rows: (S - I) x + t = 0, then the normalization row 1'x = 1
    top = sp.hstack([S - sp.identity(n, format="csc"),
                     sp.identity(n, format="csc")], format="csc")
    norm_row = sp.hstack([sp.csc_matrix(np.ones((1, n))),
                          sp.csc_matrix((1, n))], format="csc")
    A = sp.vstack([top, norm_row], format="csc")
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return ConicProblem(A, b, np.zeros(2 * n), [Cone(NONNEG, 2 * n)],
                        name=f"pagerank-{n}")


def gen_staircase_pagerank(num_nodes: int, damping: float = 0.99,
                           seed: int = 0) -> ConicProblem:
    """Seeded random graph with #edges == #nodes (spanning tree grown by
    preferential attachment, plus extra distinct edges), treated as
    undirected; every node therefore has out-degree >= 1 and the stacked
    constraint matrix keeps an exactly -1 diagonal block."""
    if num_nodes < 3:
        raise ValueError("need at least 3 nodes")
    rng = np.random.default_rng(seed)
    n = num_nodes
    undirected = set()
    endpoints = [0]                   # degree-weighted attachment pool
    for i in range(1, n):
        j = int(endpoints[rng.integers(len(endpoints))])
        undirected.add((min(i, j), max(i, j)))
        endpoints.extend((i, j))
    while len(undirected) < n:
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        if i != j:
            undirected.add((min(i, j), max(i, j)))
    directed = []
    for i, j in sorted(undirected):
        directed.append((i, j))
        directed.append((j, i))
    prob = pagerank_lp_from_edges(directed, n, damping)
    return ConicProblem(prob.A, prob.b, prob.c, prob.cones,
                        name=f"staircase-pagerank-{n}-seed{seed}")


def gen_lasso_socp(m: int, n: int, lambda_rule=None, seed: int = 0):
    """L1-regularized least squares as a cone program.

    min  |F w - g|^2 + lam*|w|_1   over dense F (m x n).

    Variables (head, square, resid, pos, neg): the head scalar is pinned to
    1 by the first row, (head, square, resid) lives in RSOC(2+m) so
    2*square >= |resid|^2, and w = pos - neg with pos, neg >= 0.  Returns
    (problem, F, g, lam); lam defaults to |F'g|_inf / 5.
    """
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((m, n))
    w_true = np.zeros(n)
    support = rng.choice(n, size=math.ceil(n / 10), replace=False)
    w_true[support] = rng.standard_normal(len(support))
    g = F @ w_true + 0.1 * rng.standard_normal(m)
    lam = (float(np.abs(F.T @ g).max()) / 5.0
           if lambda_rule is None else float(lambda_rule))

    # columns: head | square | resid (m) | pos (n) | neg (n)
    ntot = 2 + m + 2 * n
    head_row = sp.csc_matrix(([1.0], ([0], [0])), shape=(1, ntot))
    link = sp.hstack([
        sp.csc_matrix((m, 2)),
        -sp.identity(m, format="csc"),
        sp.csc_matrix(F),
        sp.csc_matrix(-F),
    ], format="csc")
    A = sp.vstack([head_row, link], format="csc")
    b = np.concatenate([[1.0], g])
    c = np.zeros(ntot)
    c[1] = 2.0
    c[2 + m:] = lam
    problem = ConicProblem(A, b, c, [Cone(RSOC, 2 + m), Cone(NONNEG, 2 * n)],
                           name=f"lasso-{m}x{n}-seed{seed}")
    return problem, F, g, lam


def gen_svm_instance(m: int, n: int, seed: int = 0):
    """Two noisy Gaussian clouds with +-1 labels, for the SVM generator."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(m) < 0.5, -1.0, 1.0)
    center = rng.standard_normal(n)
    center *= 1.5 / np.linalg.norm(center)
    X = rng.standard_normal((m, n)) + np.outer(y, center)
    return X, y


def gen_svm_socp(X, y, C: float = 1.0, lam: float = 1e-2) -> ConicProblem:
    """Soft-margin linear SVM, hinge loss, as a cone program.

    min  lam * square + C * sum(xi)
    s.t. head = 1;  margins diag(y)X w + y*bias + xi - t = 1;  w tracked by
    an RSOC block so 2*head*square >= |w|^2 (i.e. square >= |w|^2 / 2).

    Columns: head | square | w (n, RSOC tail) | wpos (n) | bpos | wneg (n)
    | bneg | xi (m) | t (m); cones RSOC(2+n) x Nonneg(2n + 2m + 2).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = X.shape
    if y.shape != (m,) or not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +-1, one per sample")
    margins = X * y[:, None]
    ntot = 3 * n + 2 * m + 4
    head_row = sp.csc_matrix(([1.0], ([0], [0])), shape=(1, ntot))
    ycol = sp.csc_matrix(y.reshape(m, 1))
    margin_rows = sp.hstack([
        sp.csc_matrix((m, 2 + n)),
        sp.csc_matrix(margins), ycol,
        sp.csc_matrix(-margins), -ycol,
        sp.identity(m, format="csc"),
        -sp.identity(m, format="csc"),
    ], format="csc")
    eye_n = sp.identity(n, format="csc")
    tie_rows = sp.hstack([
        sp.csc_matrix((n, 2)), eye_n,
        -eye_n, sp.csc_matrix((n, 1)),
        eye_n, sp.csc_matrix((n, 1)),
        sp.csc_matrix((n, 2 * m)),
    ], format="csc")
    A = sp.vstack([head_row, margin_rows, tie_rows], format="csc")
    b = np.concatenate([[1.0], np.ones(m), np.zeros(n)])
    c = np.zeros(ntot)
    c[1] = lam
    xi_start = 2 + 3 * n + 2
    c[xi_start:xi_start + m] = C
    return ConicProblem(A, b, c,
                        [Cone(RSOC, 2 + n), Cone(NONNEG, 2 * n + 2 * m + 2)],
                        name=f"svm-{m}x{n}")


def factor_psd(P, tol: float = 1e-12) -> np.ndarray:
    """Dense factor L (r x n) with L'L = P for symmetric PSD P, via an
    eigendecomposition; rows for eigenvalues below tol*max are dropped."""
    P = np.asarray(P, dtype=float)
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    top = max(float(w.max()), 1.0)
    if float(w.min()) < -1e-8 * top:
        raise ValueError("matrix is not positive semidefinite")
    keep = w > tol * top
    if not keep.any():          # zero quadratic: keep one null row
        return np.zeros((1, P.shape[0]))
    return (V[:, keep] * np.sqrt(w[keep])).T


def qp_to_socp(quad_factor, linear_cost, eq_mat, eq_rhs) -> ConicProblem:
    """Convex QP  min 0.5 z'Pz + q'z  s.t.  Az = b, z >= 0,  with P given
    by a factor L (r x n, P = L'L), rewritten over one rotated cone.

    Variables (head, square, v, z): head = 1, v = L z, A z = b; cones
    RSOC(2+r) x Nonneg(n); objective square + q'z.
    """
    L = np.atleast_2d(np.asarray(quad_factor, dtype=float))
    q = np.asarray(linear_cost, dtype=float)
    Am = sp.csc_matrix(eq_mat)
    bv = np.atleast_1d(np.asarray(eq_rhs, dtype=float))
    r, n = L.shape
    p = Am.shape[0]
    if q.shape != (n,) or Am.shape[1] != n or bv.shape != (p,):
        raise ValueError("inconsistent QP dimensions")
    ntot = 2 + r + n
    head_row = sp.csc_matrix(([1.0], ([0], [0])), shape=(1, ntot))
    tie = sp.hstack([sp.csc_matrix((r, 2)), sp.identity(r, format="csc"),
                     sp.csc_matrix(-L)], format="csc")
    eqs = sp.hstack([sp.csc_matrix((p, 2 + r)), Am], format="csc")
    A = sp.vstack([head_row, tie, eqs], format="csc")
    b = np.concatenate([[1.0], np.zeros(r), bv])
    c = np.zeros(ntot)
    c[1] = 1.0
    c[2 + r:] = q
    return ConicProblem(A, b, c, [Cone(RSOC, 2 + r), Cone(NONNEG, n)],
                        name="qp-socp")


# ===========================================================================
# reduced-system kernels (dense, cached factorizations)
# ===========================================================================

def lasso_kernel(features):
    """Cached solver for (I + 2 F F') z = rhs.

    Factorizes the smaller Gram form: the n x n matrix (0.5 I + F'F) with
    the Sherman-Morrison-Woodbury identity when n <= m, otherwise the m x m
    matrix directly.
    """
    F = np.asarray(features, dtype=float)
    m, n = F.shape
    if n <= m:
        chol = sla.cho_factor(0.5 * np.eye(n) + F.T @ F, lower=True)

        def apply(rhs):
            rhs = np.asarray(rhs, dtype=float)
            return rhs - F @ sla.cho_solve(chol, F.T @ rhs)
    else:
        chol = sla.cho_factor(np.eye(m) + 2.0 * (F @ F.T), lower=True)

        def apply(rhs):
            return sla.cho_solve(chol, np.asarray(rhs, dtype=float))
    return apply


def lasso_reduced_solve(features, rhs):
    """One-shot form of lasso_kernel(features)(rhs)."""
    return lasso_kernel(features)(rhs)


def svm_kernel(features, labels):
    """Cached solver for (3I + F F' + 2 y y') z = rhs, i.e. the Schur kernel
    3I + M H M' with M = [F, y] and H = diag(I_n, 2).

    Direct m x m factorization when m <= n+1, otherwise SMW through the
    (n+1) x (n+1) matrix H^-1 + M'M/3.
    """
    F = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    m, n = F.shape
    if y.shape != (m,):
        raise ValueError("labels length must match the sample count")
    M = np.hstack([F, y[:, None]])
    if m <= n + 1:
        G = 3.0 * np.eye(m) + F @ F.T + 2.0 * np.outer(y, y)
        chol = sla.cho_factor(G, lower=True)

        def apply(rhs):
            return sla.cho_solve(chol, np.asarray(rhs, dtype=float))
    else:
        Hinv = np.eye(n + 1)
        Hinv[n, n] = 0.5
        chol = sla.cho_factor(Hinv + (M.T @ M) / 3.0, lower=True)

        def apply(rhs):
            rhs = np.asarray(rhs, dtype=float)
            return rhs / 3.0 - M @ sla.cho_solve(chol, M.T @ rhs) / 9.0
    return apply


def svm_reduced_solve(features, labels, rhs):
    """One-shot form of svm_kernel(features, labels)(rhs)."""
    return svm_kernel(features, labels)(rhs)
