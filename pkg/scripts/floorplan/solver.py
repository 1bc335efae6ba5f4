"""
Exact 0-1 integer programming by depth-first branch and bound.

Weights are converted to integers over a common denominator before search,
so objective comparisons are exact. The model splits into independent
blocks (no row or group links them) that are solved one by one; within a
block the first pass finds the optimum value with a value-guided dive and
the second pass walks assignments in lexicographic order and stops at the
first one reaching it. Unit propagation runs on every <= row (an equality
is two of them) using minimum activity.

A group declares structure the builder guarantees: when its head variable
is 1 exactly one variable of each of its sets is 1, when the head is 0 all
of them are 0. With every grouped variable in exactly two sets the bound
charges half of each variable's weight to each set, which is what keeps
wall-heavy models small.
"""
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import pulp

from config import config, log


class InfeasibleModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple           # ((var, int), ...)
    sense: str              # '<=' or '='
    rhs: int
    name: str = ""


@dataclass
class IPModel:
    names: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    groups: list = field(default_factory=list)      # (head, (set, set, ...))

    @property
    def size(self) -> int:
        return len(self.weights)

    def add_variable(self, name: str, weight: float) -> int:
        self.names.append(name)
        self.weights.append(float(weight))
        return len(self.weights) - 1

    def add(self, coeffs, sense: str, rhs: int, name: str = "") -> Constraint:
        if sense not in ('<=', '='):
            raise ValueError(f"unknown constraint sense {sense!r}")
        merged = {}
        for var, a in coeffs:
            if not isinstance(a, int) or isinstance(a, bool):
                raise TypeError(f"constraint coefficients must be int, got {a!r}")
            if not (0 <= var < self.size):
                raise IndexError(f"constraint references unknown variable {var}")
            merged[var] = merged.get(var, 0) + a
        if not isinstance(rhs, int):
            raise TypeError(f"constraint rhs must be int, got {rhs!r}")
        row = Constraint(tuple(sorted((v, a) for v, a in merged.items() if a)), sense, rhs, name)
        self.constraints.append(row)
        return row

    def add_group(self, head: int, sets):
        self.groups.append((head, tuple(tuple(s) for s in sets)))


@dataclass(frozen=True)
class IPSolution:
    assignment: tuple
    objective: float
    exact: Fraction
    certified: bool
    nodes: int
    blocks: int = 0

    def selected(self) -> list:
        return [i for i, x in enumerate(self.assignment) if x]


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.nodes = 0

    def spend(self) -> bool:
        self.nodes += 1
        return self.nodes <= self.limit


class _Overflow(Exception):
    pass


def _integer_weights(weights: list) -> tuple:
    fracs = [Fraction(w) for w in weights]
    denom = 1
    for f in fracs:
        denom = lcm(denom, f.denominator)
    scale = 2 * denom
    return [int(f * scale) for f in fracs], scale


def _rows(model: IPModel) -> list:
    out = []
    for c in model.constraints:
        out.append((c.coeffs, c.rhs))
        if c.sense == '=':
            out.append((tuple((v, -a) for v, a in c.coeffs), -c.rhs))
    return out


def _blocks(n: int, rows: list, groups: list) -> list:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(members):
        members = list(members)
        for m in members[1:]:
            ra, rb = find(members[0]), find(m)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    for coeffs, _ in rows:
        if coeffs:
            union(v for v, _ in coeffs)
    for head, sets in groups:
        union([head] + [v for s in sets for v in s])
    by_root = {}
    for i in range(n):
        by_root.setdefault(find(i), []).append(i)
    return [by_root[r] for r in sorted(by_root)]


class _Block:
    def __init__(self, variables: list, weights: list, rows: list, groups: list):
        self.vars = variables
        local = {v: k for k, v in enumerate(variables)}
        self.w = [weights[v] for v in variables]
        self.rows = []
        for coeffs, rhs in rows:
            if coeffs and coeffs[0][0] in local:
                self.rows.append((tuple((local[v], a) for v, a in coeffs), rhs))
        self.var_rows = [[] for _ in variables]
        for r, (coeffs, _) in enumerate(self.rows):
            for j, _ in coeffs:
                self.var_rows[j].append(r)

        groups = [(local[h], tuple(tuple(local[v] for v in s) for s in sets))
                  for h, sets in groups if h in local]
        counts = {}
        for _, sets in groups:
            for s in sets:
                for v in s:
                    counts[v] = counts.get(v, 0) + 1
        heads = {h for h, _ in groups}
        structured = (groups and all(c == 2 for c in counts.values())
                      and not heads & set(counts) and len(heads) == len(groups))
        self.groups = groups if structured else []
        grouped = (heads | set(counts)) if structured else set()
        self.free = [j for j in range(len(variables)) if j not in grouped]

    def propagate(self, vals: list, queue) -> list | None:
        queue = deque(queue)
        while queue:
            v = queue.popleft()
            for r in self.var_rows[v]:
                coeffs, rhs = self.rows[r]
                act = 0
                for j, a in coeffs:
                    x = vals[j]
                    act += min(a, 0) if x < 0 else a * x
                if act > rhs:
                    return None
                for j, a in coeffs:
                    if vals[j] >= 0:
                        continue
                    if a > 0 and act + a > rhs:
                        vals[j] = 0
                        queue.append(j)
                    elif a < 0 and act - a > rhs:
                        vals[j] = 1
                        queue.append(j)
        return vals

    def bound(self, vals: list) -> float:
        w = self.w
        total = 0
        for j in self.free:
            x = vals[j]
            if x == 1 or (x < 0 and w[j] > 0):
                total += w[j]
        for head, sets in self.groups:
            h = vals[head]
            if h == 0:
                continue
            gain = w[head]
            dead = False
            for s in sets:
                best = None
                for j in s:
                    if vals[j] != 0 and (best is None or w[j] > best):
                        best = w[j]
                if best is None:
                    dead = True
                    break
                gain += best // 2
            if dead:
                if h == 1:
                    return float('-inf')
                continue
            total += gain if h == 1 else max(0, gain)
        return total

    def value(self, vals: list) -> int:
        return sum(wj for wj, x in zip(self.w, vals) if x == 1)

    def dive(self) -> tuple | None:
        """Any feasible leaf, zero first, no backtracking."""
        n = len(self.vars)
        vals = self.propagate([-1] * n, range(n))
        for j in range(n):
            if vals is None:
                return None
            if vals[j] >= 0:
                continue
            for x in (0, 1):
                child = vals.copy()
                child[j] = x
                child = self.propagate(child, [j])
                if child is not None:
                    break
            vals = child
        return None if vals is None else (self.value(vals), vals)

    def search(self, budget: _Budget, target: int | None = None):
        """Without ``target``: best (value, vals). With it: the
        lexicographically first leaf reaching ``target``."""
        n = len(self.vars)
        root = self.propagate([-1] * n, range(n))
        if root is None:
            return None
        best = None
        stack = [root]
        while stack:
            vals = stack.pop()
            if not budget.spend():
                raise _Overflow(best)
            b = self.bound(vals)
            if target is None:
                if best is not None and b <= best[0]:
                    continue
            elif b < target:
                continue
            j = next((k for k in range(n) if vals[k] < 0), None)
            if j is None:
                v = self.value(vals)
                if target is None:
                    if best is None or v > best[0]:
                        best = (v, vals)
                elif v == target:
                    return v, vals
                continue
            if target is None:
                order = (1, 0) if self.w[j] > 0 else (0, 1)
            else:
                order = (0, 1)
            for x in reversed(order):
                child = vals.copy()
                child[j] = x
                child = self.propagate(child, [j])
                if child is not None:
                    stack.append(child)
        return best


def solve_ip(model: IPModel, node_limit: int | None = None) -> IPSolution:
    limit = node_limit or config.BNB_NODE_LIMIT
    n = model.size
    weights, scale = _integer_weights(model.weights)
    rows = _rows(model)
    for coeffs, rhs in rows:
        if not coeffs and rhs < 0:
            raise InfeasibleModelError("constraint 0 <= negative rhs")

    budget = _Budget(limit)
    assignment = [0] * n
    certified = True
    blocks = _blocks(n, rows, model.groups)
    for variables in blocks:
        block = _Block(variables, weights, rows, model.groups)
        try:
            found = block.search(budget)
        except _Overflow as e:
            found = e.args[0] or block.dive()
            certified = False
        if found is None:
            raise InfeasibleModelError(
                f"no feasible assignment for block of {len(variables)} variables "
                f"starting at {model.names[variables[0]] if model.names else variables[0]}")
        if certified:
            try:
                lex = block.search(budget, target=found[0])
                if lex is not None:
                    found = lex
            except _Overflow:
                pass
        for j, x in enumerate(found[1]):
            assignment[variables[j]] = 1 if x == 1 else 0
        if not certified:
            budget.limit = budget.nodes    # remaining blocks: root dive only

    exact = sum((Fraction(weights[i], scale) for i in range(n) if assignment[i]), Fraction(0))
    log("solve", f"vars={n} rows={len(model.constraints)} blocks={len(blocks)} "
                 f"nodes={budget.nodes} objective={float(exact):.4f} certified={certified}")
    return IPSolution(tuple(assignment), float(exact), exact, certified, budget.nodes, len(blocks))


# ── LP DUMP ──

def to_pulp(model: IPModel) -> pulp.LpProblem:
    prob = pulp.LpProblem("floorplan", pulp.LpMaximize)
    xs = [pulp.LpVariable(name or f"x_{i}", cat=pulp.LpBinary)
          for i, name in enumerate(model.names or [""] * model.size)]
    prob += pulp.lpSum(w * x for w, x in zip(model.weights, xs))
    for k, c in enumerate(model.constraints):
        expr = pulp.lpSum(a * xs[v] for v, a in c.coeffs)
        row = expr <= c.rhs if c.sense == '<=' else expr == c.rhs
        prob += row, f"{c.name or 'row'}_{k}"
    return prob


def write_lp(model: IPModel, path):
    to_pulp(model).writeLP(str(path))
