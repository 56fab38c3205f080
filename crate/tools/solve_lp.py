#!/usr/bin/env python3
"""Solve an LP-format MILP with scipy's HiGHS backend.

Reads the LP subset produced by the `export-milp` command (sections
Minimize/Maximize, Subject To, Bounds, Binaries; wrapped lines are indented)
and writes a `name value` solution file compatible with `decode`.

Usage: solve_lp.py model.lp out.sol
Exit codes: 0 solved to optimality, 3 infeasible, 1 anything else.
"""

import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix


def unwrap_lines(lines):
    """Join continuation lines (exporter wraps with a 3-space indent)."""
    out = []
    for raw in lines:
        line = raw.rstrip("\n")
        if line.startswith("   ") and out:
            out[-1] += " " + line.strip()
        else:
            out.append(line)
    return out


def parse_terms(expr, variables):
    """Parse `c1 v1 + c2 v2 - c3 v3 ...` into {var: coeff}."""
    tokens = expr.split()
    terms = {}
    sign = 1.0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1.0
            i += 1
            continue
        if tok == "-":
            sign = -1.0
            i += 1
            continue
        coeff = sign * float(tok)
        name = tokens[i + 1]
        if name not in variables:
            variables[name] = len(variables)
        terms[name] = terms.get(name, 0.0) + coeff
        sign = 1.0
        i += 2
    return terms


def main():
    if len(sys.argv) != 3:
        print("usage: solve_lp.py model.lp out.sol", file=sys.stderr)
        return 1
    with open(sys.argv[1]) as f:
        lines = unwrap_lines(f.readlines())

    variables = {}
    sense = 1.0  # minimize
    objective = {}
    constraints = []  # (terms, sense, rhs)
    bounds = {}  # name -> (lo, hi)
    binaries = set()

    section = None
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("\\"):
            continue
        low = stripped.lower()
        if low in ("minimize", "maximize"):
            sense = 1.0 if low == "minimize" else -1.0
            section = "objective"
            continue
        if low == "subject to":
            section = "constraints"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binaries", "binary"):
            section = "binaries"
            continue
        if low == "end":
            break

        if section == "objective":
            expr = stripped.split(":", 1)[1] if ":" in stripped else stripped
            if expr.strip() != "0":
                objective = parse_terms(expr, variables)
        elif section == "constraints":
            name, expr = stripped.split(":", 1)
            for op in ("<=", ">=", "="):
                if f" {op} " in expr:
                    lhs, rhs = expr.rsplit(f" {op} ", 1)
                    terms = parse_terms(lhs, variables) if lhs.strip() != "0" else {}
                    constraints.append((name.strip(), terms, op, float(rhs)))
                    break
        elif section == "bounds":
            tokens = stripped.split()
            if len(tokens) == 3 and tokens[1] == "=":
                v = float(tokens[2])
                bounds[tokens[0]] = (v, v)
                if tokens[0] not in variables:
                    variables[tokens[0]] = len(variables)
            elif len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
                bounds[tokens[2]] = (float(tokens[0]), float(tokens[4]))
                if tokens[2] not in variables:
                    variables[tokens[2]] = len(variables)
        elif section == "binaries":
            for name in stripped.split():
                binaries.add(name)
                if name not in variables:
                    variables[name] = len(variables)

    n = len(variables)
    c = np.zeros(n)
    for name, coeff in objective.items():
        c[variables[name]] = sense * coeff

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    integrality = np.zeros(n)
    for name, idx in variables.items():
        if name in binaries:
            integrality[idx] = 1
            hi[idx] = 1.0
        if name in bounds:
            lo[idx], hi[idx] = bounds[name]

    rows, cols, data, cl, cu = [], [], [], [], []
    for ri, (_, terms, op, rhs) in enumerate(constraints):
        for name, coeff in terms.items():
            rows.append(ri)
            cols.append(variables[name])
            data.append(coeff)
        if op == "<=":
            cl.append(-np.inf)
            cu.append(rhs)
        elif op == ">=":
            cl.append(rhs)
            cu.append(np.inf)
        else:
            cl.append(rhs)
            cu.append(rhs)

    cons = []
    if constraints:
        a = csr_matrix((data, (rows, cols)), shape=(len(constraints), n))
        cons.append(LinearConstraint(a, np.array(cl), np.array(cu)))

    res = milp(c=c, constraints=cons, integrality=integrality, bounds=Bounds(lo, hi))
    if res.status == 2:
        print("infeasible", file=sys.stderr)
        return 3
    if not res.success:
        print(f"solver failed: {res.message}", file=sys.stderr)
        return 1

    objective_value = sense * res.fun
    with open(sys.argv[2], "w") as f:
        f.write(f"# Objective value = {objective_value:.12g}\n")
        for name, idx in sorted(variables.items(), key=lambda kv: kv[1]):
            f.write(f"{name} {res.x[idx]:.12g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
