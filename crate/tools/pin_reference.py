#!/usr/bin/env python3
"""Solve dumped witness problems with an independent solver and freeze the
optima as regression constants.

Usage:
    cargo run --release -p mdiew --example dump_reference -- /tmp/mdiew_dumps
    python3 tools/pin_reference.py /tmp/mdiew_dumps \
        crates/mdiew/tests/data/pinned_reference.json

The dump format is the plain-text block format written by the library (see
the sdp module docs). Problems are rebuilt in cvxpy and solved with CLARABEL;
the frozen JSON maps λ to the independently computed witness value
W' = -(primal optimum).
"""

import json
import sys

import cvxpy as cp
import numpy as np


def parse_dump(path):
    blocks = []  # (name, dim, kind)
    objective = {}  # block -> matrix
    constraints = []  # (rhs, {block: matrix})
    with open(path) as f:
        lines = [ln.split() for ln in f if ln.strip()]
    assert lines[0] == ["mdiew-sdp", "v1"]
    name = lines[1][1]
    i = 2
    nblocks = int(lines[i][1]); i += 1
    for _ in range(nblocks):
        tok = lines[i]; i += 1
        assert tok[0] == "block"
        blocks.append((tok[1], int(tok[3]), tok[4]))
    nobj = int(lines[i][1]); i += 1
    for _ in range(nobj):
        tok = lines[i]; i += 1
        assert tok[0] == "obj"
        b, r, c = int(tok[1]), int(tok[2]), int(tok[3])
        v = complex(float(tok[4].replace("e", "E")), float(tok[5].replace("e", "E")))
        m = objective.setdefault(b, np.zeros((blocks[b][1],) * 2, dtype=complex))
        m[r, c] = v
        if r != c:
            m[c, r] = v.conjugate()
    ncons = int(lines[i][1]); i += 1
    for _ in range(ncons):
        tok = lines[i]; i += 1
        assert tok[0] == "constraint"
        rhs = float(tok[2].replace("e", "E"))
        nterms = int(tok[3])
        terms = {}
        for _ in range(nterms):
            t = lines[i]; i += 1
            assert t[0] == "term"
            b, r, c = int(t[1]), int(t[2]), int(t[3])
            v = complex(float(t[4].replace("e", "E")), float(t[5].replace("e", "E")))
            m = terms.setdefault(b, np.zeros((blocks[b][1],) * 2, dtype=complex))
            m[r, c] = v
            if r != c:
                m[c, r] = v.conjugate()
        constraints.append((rhs, terms))
    assert lines[i] == ["end"]
    return name, blocks, objective, constraints


def solve_dump(path):
    name, blocks, objective, constraints = parse_dump(path)
    xs = []
    for bname, dim, kind in blocks:
        if kind == "hermitian":
            xs.append(cp.Variable((dim, dim), hermitian=True, name=bname))
        else:
            xs.append(cp.Variable((dim, dim), symmetric=True, name=bname))
    cons = [x >> 0 for x in xs]
    for rhs, terms in constraints:
        expr = sum(cp.real(cp.trace(m @ xs[b])) for b, m in terms.items())
        cons.append(expr == rhs)
    obj = sum(cp.real(cp.trace(m @ xs[b])) for b, m in objective.items())
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return name, prob.status, prob.value


def main():
    dump_dir, out_path = sys.argv[1], sys.argv[2]
    import glob
    import os

    rows = []
    for path in sorted(glob.glob(os.path.join(dump_dir, "*.sdp"))):
        name, status, value = solve_dump(path)
        lam = float(name.split("_lambda_")[1])
        w_prime = -value
        rows.append({"lambda": lam, "w_prime": w_prime, "status": status})
        print(f"{name}: status={status} lambda={lam:.6f} w_prime={w_prime:.12f}")
    rows.sort(key=lambda r: r["lambda"])
    with open(out_path, "w") as f:
        json.dump(
            {
                "solver": f"cvxpy {cp.__version__} / CLARABEL",
                "description": "independent optima of the dumped witness "
                "problems for ideal Werner tables; w_prime = -(primal optimum)",
                "points": rows,
            },
            f,
            indent=2,
        )
        f.write("\n")
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
