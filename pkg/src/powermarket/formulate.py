"""Translate a power system plus policy into a sparse, fully tagged LP.

Every row and column name encodes an entity tag ``family.entity.t<idx>`` so
that duals can be mapped back to nodal prices, capacity-factor shadow prices,
policy shadow prices, storage consistency duals and cycle duals.  The module
also writes/parses a free-form MPS interchange file and implements the
Lagrangian-relaxation substitution that turns a binding cap into an
equivalent objective shift.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .model import (
    SHEDDING_NAME,
    Co2Cap,
    Co2Tax,
    FixedFip,
    PolicyConfig,
    PowerSystem,
    SupportAvailable,
    SupportDispatched,
    validate,
)

__all__ = [
    "EntityTag",
    "Column",
    "Row",
    "LinearProgram",
    "FormulationError",
    "build_lp",
    "cycle_basis",
    "apply_equivalence_substitution",
    "write_mps",
    "parse_mps",
]

INF = float("inf")

ROW_FAMILIES = (
    "balance", "gen-upper", "gen-lower", "store-soc", "store-upper",
    "line-upper", "line-lower", "kvl-cycle", "vre-dispatched",
    "vre-available", "co2-cap", "potential",
)


class FormulationError(ValueError):
    pass


_SNAP_RE = re.compile(r"^t(\d+)$")


@dataclass(frozen=True)
class EntityTag:
    """Decoded row/column name: constraint family, entity id, snapshot index."""

    family: str
    entity: Optional[str] = None
    snapshot: Optional[int] = None

    def to_id(self) -> str:
        parts = [self.family]
        if self.entity is not None:
            parts.append(self.entity)
        if self.snapshot is not None:
            parts.append(f"t{self.snapshot}")
        return ".".join(parts)

    @classmethod
    def parse(cls, name: str) -> "EntityTag":
        parts = name.split(".")
        family = parts[0]
        entity = None
        snapshot = None
        rest = parts[1:]
        if rest:
            m = _SNAP_RE.match(rest[-1])
            if m:
                snapshot = int(m.group(1))
                rest = rest[:-1]
        if rest:
            entity = ".".join(rest)
        return cls(family, entity, snapshot)


def tag_id(family: str, entity: Optional[str] = None, snapshot: Optional[int] = None) -> str:
    return EntityTag(family, entity, snapshot).to_id()


@dataclass
class Column:
    id: str
    lower: float = 0.0
    upper: float = INF
    objective: float = 0.0


@dataclass
class Row:
    id: str
    sense: str  # one of "=", "<=", ">="
    rhs: float = 0.0


@dataclass
class LinearProgram:
    """Sparse minimization LP with entity-tagged rows and columns."""

    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    entries: list = field(default_factory=list)  # (row_idx, col_idx, value)
    name: str = "powermarket"

    def __post_init__(self):
        self._col_index = {c.id: i for i, c in enumerate(self.columns)}
        self._row_index = {r.id: i for i, r in enumerate(self.rows)}

    # -- construction helpers -------------------------------------------------

    def add_column(self, col_id: str, lower: float = 0.0, upper: float = INF,
                   objective: float = 0.0) -> int:
        if col_id in self._col_index:
            raise FormulationError(f"duplicate column '{col_id}'")
        self.columns.append(Column(col_id, lower, upper, objective))
        self._col_index[col_id] = len(self.columns) - 1
        return len(self.columns) - 1

    def add_row(self, row_id: str, sense: str, rhs: float = 0.0) -> int:
        if row_id in self._row_index:
            raise FormulationError(f"duplicate row '{row_id}'")
        if sense not in ("=", "<=", ">="):
            raise FormulationError(f"bad sense '{sense}'")
        self.rows.append(Row(row_id, sense, rhs))
        self._row_index[row_id] = len(self.rows) - 1
        return len(self.rows) - 1

    def add_entry(self, row_id: str, col_id: str, value: float) -> None:
        if value == 0.0:
            return
        self.entries.append((self._row_index[row_id], self._col_index[col_id], value))

    # -- queries ---------------------------------------------------------------

    def col_index(self, col_id: str) -> int:
        return self._col_index[col_id]

    def row_index(self, row_id: str) -> int:
        return self._row_index[row_id]

    def has_row(self, row_id: str) -> bool:
        return row_id in self._row_index

    def column(self, col_id: str) -> Column:
        return self.columns[self._col_index[col_id]]

    def row_ids(self, family: Optional[str] = None) -> list:
        if family is None:
            return [r.id for r in self.rows]
        prefix = family + "."
        return [r.id for r in self.rows if r.id == family or r.id.startswith(prefix)]

    def col_ids(self, family: Optional[str] = None) -> list:
        if family is None:
            return [c.id for c in self.columns]
        prefix = family + "."
        return [c.id for c in self.columns if c.id == family or c.id.startswith(prefix)]

    def row_coefficients(self, row_id: str) -> dict:
        ri = self._row_index[row_id]
        out: dict = {}
        for r, c, v in self.entries:
            if r == ri:
                out[self.columns[c].id] = out.get(self.columns[c].id, 0.0) + v
        return out

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            columns=[replace(c) for c in self.columns],
            rows=[replace(r) for r in self.rows],
            entries=list(self.entries),
            name=self.name,
        )

    def drop_row(self, row_id: str) -> None:
        ri = self._row_index.pop(row_id)
        del self.rows[ri]
        self.entries = [
            (r - (1 if r > ri else 0), c, v) for r, c, v in self.entries if r != ri
        ]
        for r in self.rows[ri:]:
            self._row_index[r.id] -= 1

    def validate_structure(self) -> None:
        for r, c, _ in self.entries:
            if not (0 <= r < len(self.rows) and 0 <= c < len(self.columns)):
                raise FormulationError("entry references missing row or column")
        for col in self.columns:
            if col.lower > col.upper:
                raise FormulationError(f"column '{col.id}' has lower > upper")
        if len(self._col_index) != len(self.columns) or len(self._row_index) != len(self.rows):
            raise FormulationError("duplicate row or column ids")


# -- entity key helpers --------------------------------------------------------


def tech_key(tech_name: str, node: str) -> str:
    return f"{tech_name}@{node}"


def gen_col(tech_name: str, node: str) -> str:
    return tag_id("G", tech_key(tech_name, node))


def disp_col(tech_name: str, node: str, t: int) -> str:
    return tag_id("g", tech_key(tech_name, node), t)


def store_cap_col(kind: str, name: str, node: str) -> str:
    return tag_id("G" + kind, tech_key(name, node))


def store_disp_col(kind: str, name: str, node: str, t: int) -> str:
    return tag_id("g" + kind, tech_key(name, node), t)


def flow_col(line_idx: int, t: int) -> str:
    return tag_id("f", f"L{line_idx}", t)


def line_cap_col(line_idx: int) -> str:
    return tag_id("F", f"L{line_idx}")


# -- cycle basis ----------------------------------------------------------------


def cycle_basis(lines) -> list:
    """Independent cycle basis of the line graph via a BFS spanning forest.

    Each cycle is a dict mapping line index to +1/-1 according to the
    traversal direction around the loop; parallel lines are handled.
    """
    lines = list(lines)
    adjacency: dict = {}
    for i, line in enumerate(lines):
        adjacency.setdefault(line.from_node, []).append((i, line.to_node, +1))
        adjacency.setdefault(line.to_node, []).append((i, line.from_node, -1))

    parent: dict = {}       # node -> (line index, sign to reach node from parent)
    visited: set = set()
    tree_lines: set = set()
    for root in adjacency:
        if root in visited:
            continue
        visited.add(root)
        parent[root] = None
        queue = [root]
        while queue:
            u = queue.pop(0)
            for li, v, sign in adjacency[u]:
                if v in visited or li in tree_lines:
                    continue
                visited.add(v)
                tree_lines.add(li)
                parent[v] = (li, sign, u)
                queue.append(v)

    def path_to_root(node):
        out = []
        while parent[node] is not None:
            li, sign, up = parent[node]
            out.append((li, sign, node, up))
            node = up
        return out

    cycles = []
    for i, line in enumerate(lines):
        if i in tree_lines:
            continue
        # cycle: line i forward, then tree path to_node -> from_node
        cyc = {i: +1}
        pa = path_to_root(line.from_node)
        pb = path_to_root(line.to_node)
        # strip common suffix up to the lowest common ancestor
        sa = {li for li, *_ in pa}
        sb = {li for li, *_ in pb}
        for li, sign, _, _ in pb:
            if li not in sa:
                # traversed against the stored direction when walking towards root
                cyc[li] = cyc.get(li, 0) - sign
        for li, sign, _, _ in pa:
            if li not in sb:
                cyc[li] = cyc.get(li, 0) + sign
        cycles.append({k: v for k, v in cyc.items() if v != 0})
    return cycles


# -- LP construction -------------------------------------------------------------


def build_lp(system: PowerSystem, policy: PolicyConfig, *,
             enforce_kvl: bool = False, cyclic_soc: bool = True) -> LinearProgram:
    """Build the cost-minimization LP whose optimum satisfies the market
    equilibrium KKT system for the given policy regime."""
    violations = validate(system, policy)
    if violations:
        msgs = "; ".join(f"{v.entity}: {v.rule} ({v.message})" for v in violations[:8])
        raise FormulationError(f"invalid system/policy: {msgs}")
    T = system.snapshots
    if T < 1:
        raise FormulationError("degenerate system: zero snapshots")

    lp = LinearProgram(name="powermarket")
    r = system.discount_rate
    support = policy.support
    co2 = policy.co2
    support_set = set(policy.support_set())
    tax_rate = co2.rate if isinstance(co2, Co2Tax) else 0.0
    fip = support if isinstance(support, FixedFip) else None

    # balance rows first: one equality per (node, snapshot)
    for n in system.nodes:
        for t in range(T):
            lp.add_row(tag_id("balance", n, t), "=", system.demand_at(n, t))

    # generators
    for node, spec in system.technologies:
        key = tech_key(spec.name, node)
        c_s = spec.annual_cost(r)
        o_eff = spec.marginal_cost + spec.emission_factor * tax_rate
        if fip is not None and spec.name in fip.technologies:
            o_eff -= fip.premium
        lp.add_column(gen_col(spec.name, node), 0.0, INF, c_s)
        for t in range(T):
            g = disp_col(spec.name, node, t)
            lp.add_column(g, 0.0, INF, o_eff)
            lp.add_entry(tag_id("balance", node, t), g, 1.0)
            lp.add_row(tag_id("gen-upper", key, t), "<=", 0.0)
            lp.add_entry(tag_id("gen-upper", key, t), g, 1.0)
            lp.add_entry(tag_id("gen-upper", key, t), gen_col(spec.name, node),
                         -spec.availability_at(t))
        if spec.max_potential is not None:
            lp.add_row(tag_id("potential", key), "<=", spec.max_potential)
            lp.add_entry(tag_id("potential", key), gen_col(spec.name, node), 1.0)

    # load shedding at VOLL: a dispatch-only pseudo-technology per node
    if system.voll is not None:
        for n in system.nodes:
            for t in range(T):
                col = disp_col(SHEDDING_NAME, n, t)
                lp.add_column(col, 0.0, INF, system.voll)
                lp.add_entry(tag_id("balance", n, t), col, 1.0)

    # storage
    for node, sto in system.storages:
        key = tech_key(sto.name, node)
        costs = sto.annual_costs(r)
        ratio = sto.fixed_energy_power_ratio
        c_dis = costs["dis"] + (ratio * costs["ene"] if ratio is not None else 0.0)
        lp.add_column(store_cap_col("dis", sto.name, node), 0.0, INF, c_dis)
        lp.add_column(store_cap_col("sto", sto.name, node), 0.0, INF, costs["sto"])
        if ratio is None:
            lp.add_column(store_cap_col("ene", sto.name, node), 0.0, INF, costs["ene"])
        for t in range(T):
            for kind in ("dis", "sto", "ene"):
                lp.add_column(store_disp_col(kind, sto.name, node, t))
            lp.add_entry(tag_id("balance", node, t),
                         store_disp_col("dis", sto.name, node, t), 1.0)
            lp.add_entry(tag_id("balance", node, t),
                         store_disp_col("sto", sto.name, node, t), -1.0)
        for t in range(T):
            # state-of-charge recursion with optional cyclic wrap
            soc = tag_id("store-soc", key, t)
            lp.add_row(soc, "=", 0.0)
            lp.add_entry(soc, store_disp_col("ene", sto.name, node, t), 1.0)
            prev = t - 1 if t > 0 else (T - 1 if cyclic_soc else None)
            if prev is not None:
                lp.add_entry(soc, store_disp_col("ene", sto.name, node, prev),
                             -sto.eta_standing)
            lp.add_entry(soc, store_disp_col("sto", sto.name, node, t), -sto.eta_charge)
            lp.add_entry(soc, store_disp_col("dis", sto.name, node, t),
                         1.0 / sto.eta_discharge)
            for kind in ("dis", "sto", "ene"):
                up = tag_id("store-upper", f"{key}+{kind}", t)
                lp.add_row(up, "<=", 0.0)
                lp.add_entry(up, store_disp_col(kind, sto.name, node, t), 1.0)
                if kind == "ene" and ratio is not None:
                    lp.add_entry(up, store_cap_col("dis", sto.name, node), -ratio)
                else:
                    lp.add_entry(up, store_cap_col(kind, sto.name, node), -1.0)

    # network
    for li, line in enumerate(system.lines):
        ent = f"L{li}"
        for t in range(T):
            f = flow_col(li, t)
            lp.add_column(f, -INF, INF, 0.0)
            lp.add_entry(tag_id("balance", line.from_node, t), f, -1.0)
            lp.add_entry(tag_id("balance", line.to_node, t), f, 1.0)
        if line.expandable:
            lp.add_column(line_cap_col(li), line.existing_capacity, INF,
                          line.annual_cost(r))
        for t in range(T):
            up = tag_id("line-upper", ent, t)
            lo = tag_id("line-lower", ent, t)
            if line.expandable:
                lp.add_row(up, "<=", 0.0)
                lp.add_entry(up, flow_col(li, t), 1.0)
                lp.add_entry(up, line_cap_col(li), -1.0)
                lp.add_row(lo, "<=", 0.0)
                lp.add_entry(lo, flow_col(li, t), -1.0)
                lp.add_entry(lo, line_cap_col(li), -1.0)
            else:
                lp.add_row(up, "<=", line.existing_capacity)
                lp.add_entry(up, flow_col(li, t), 1.0)
                lp.add_row(lo, "<=", line.reverse_capacity())
                lp.add_entry(lo, flow_col(li, t), -1.0)

    if enforce_kvl and system.lines:
        for line in system.lines:
            if line.reactance is None:
                raise FormulationError(
                    f"KVL requested but line {line.name} has no reactance")
        for ci, cyc in enumerate(cycle_basis(system.lines)):
            for t in range(T):
                rid = tag_id("kvl-cycle", f"c{ci}", t)
                lp.add_row(rid, "=", 0.0)
                for li, sign in sorted(cyc.items()):
                    lp.add_entry(rid, flow_col(li, t),
                                 sign * system.lines[li].reactance)

    # policy rows
    if isinstance(support, SupportDispatched):
        gamma = support.energy_target(system)
        lp.add_row("vre-dispatched", ">=", gamma)
        for node, spec in system.technologies:
            if spec.name in support_set:
                for t in range(T):
                    lp.add_entry("vre-dispatched", disp_col(spec.name, node, t), 1.0)
    elif isinstance(support, SupportAvailable):
        theta = support.energy_target(system)
        lp.add_row("vre-available", ">=", theta)
        for node, spec in system.technologies:
            if spec.name in support_set:
                avail_sum = sum(spec.availability_at(t) for t in range(T))
                lp.add_entry("vre-available", gen_col(spec.name, node), avail_sum)

    if isinstance(co2, Co2Cap):
        lp.add_row("co2-cap", "<=", co2.cap)
        for node, spec in system.technologies:
            if spec.emission_factor > 0.0:
                for t in range(T):
                    lp.add_entry("co2-cap", disp_col(spec.name, node, t),
                                 spec.emission_factor)

    lp.validate_structure()
    return lp


def apply_equivalence_substitution(lp: LinearProgram, row_id: str, mu: float) -> LinearProgram:
    """Lagrangian relaxation of one policy row at a fixed multiplier.

    Returns a copy with the row removed and the objective coefficients of the
    row's columns shifted by ``mu`` times the coefficient (sign chosen so a
    binding cap becomes a tax and a binding quota becomes a premium).  ``mu``
    is the non-negative policy shadow price.
    """
    if not lp.has_row(row_id):
        raise FormulationError(f"policy row '{row_id}' absent")
    out = lp.copy()
    row = out.rows[out.row_index(row_id)]
    sign = 1.0 if row.sense == "<=" else -1.0
    for col_id, a in out.row_coefficients(row_id).items():
        out.column(col_id).objective += sign * mu * a
    out.drop_row(row_id)
    return out


# -- MPS interchange --------------------------------------------------------------

_OBJ_ROW = "COST"
_SENSE_TO_MPS = {"=": "E", "<=": "L", ">=": "G"}
_MPS_TO_SENSE = {"E": "=", "L": "<=", "G": ">="}


def _fmt(v: float) -> str:
    return repr(float(v))


def write_mps(lp: LinearProgram, path) -> None:
    """Emit the LP in free-form MPS (ROWS, COLUMNS, RHS, RANGES, BOUNDS)."""
    lines = [f"NAME {lp.name}", "ROWS", f" N {_OBJ_ROW}"]
    for row in lp.rows:
        lines.append(f" {_SENSE_TO_MPS[row.sense]} {row.id}")
    lines.append("COLUMNS")
    by_col: dict = {i: [] for i in range(len(lp.columns))}
    for r, c, v in lp.entries:
        by_col[c].append((r, v))
    for ci, col in enumerate(lp.columns):
        if col.objective != 0.0:
            lines.append(f" {col.id} {_OBJ_ROW} {_fmt(col.objective)}")
        acc: dict = {}
        for r, v in by_col[ci]:
            acc[r] = acc.get(r, 0.0) + v
        for r in sorted(acc):
            lines.append(f" {col.id} {lp.rows[r].id} {_fmt(acc[r])}")
    lines.append("RHS")
    for row in lp.rows:
        if row.rhs != 0.0:
            lines.append(f" RHS {row.id} {_fmt(row.rhs)}")
    lines.append("RANGES")
    lines.append("BOUNDS")
    for col in lp.columns:
        if col.lower == 0.0 and col.upper == INF:
            continue
        if col.lower == -INF and col.upper == INF:
            lines.append(f" FR BND {col.id}")
            continue
        if col.lower != 0.0:
            if col.lower == -INF:
                lines.append(f" MI BND {col.id}")
            else:
                lines.append(f" LO BND {col.id} {_fmt(col.lower)}")
        if col.upper != INF:
            lines.append(f" UP BND {col.id} {_fmt(col.upper)}")
    lines.append("ENDATA")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_mps(path) -> LinearProgram:
    """Parse a free-form MPS file written by :func:`write_mps`."""
    lp = LinearProgram(name="powermarket")
    section = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("*"):
                continue
            tokens = line.split()
            if not line[0].isspace():
                head = tokens[0].upper()
                if head == "NAME":
                    lp.name = tokens[1] if len(tokens) > 1 else lp.name
                    section = None
                elif head in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                    section = head
                elif head == "ENDATA":
                    break
                else:
                    raise FormulationError(f"unknown MPS section '{head}'")
                continue
            if section == "ROWS":
                kind, rid = tokens[0].upper(), tokens[1]
                if kind == "N":
                    continue
                lp.add_row(rid, _MPS_TO_SENSE[kind], 0.0)
            elif section == "COLUMNS":
                cid = tokens[0]
                if cid not in lp._col_index:
                    lp.add_column(cid)
                for rid, val in zip(tokens[1::2], tokens[2::2]):
                    if rid == _OBJ_ROW:
                        lp.column(cid).objective = float(val)
                    else:
                        lp.add_entry(rid, cid, float(val))
            elif section == "RHS":
                for rid, val in zip(tokens[1::2], tokens[2::2]):
                    lp.rows[lp.row_index(rid)].rhs = float(val)
            elif section == "RANGES":
                raise FormulationError("RANGES section is not supported")
            elif section == "BOUNDS":
                btype = tokens[0].upper()
                cid = tokens[2]
                col = lp.column(cid)
                if btype == "LO":
                    col.lower = float(tokens[3])
                elif btype == "UP":
                    col.upper = float(tokens[3])
                elif btype == "MI":
                    col.lower = -INF
                elif btype == "PL":
                    col.upper = INF
                elif btype == "FR":
                    col.lower, col.upper = -INF, INF
                elif btype == "FX":
                    col.lower = col.upper = float(tokens[3])
                else:
                    raise FormulationError(f"unsupported bound type '{btype}'")
    lp.validate_structure()
    return lp
