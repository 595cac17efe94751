"""Plain-text readers and writers: topology files, trajectory CSVs, genome
snapshots.  CSV output is UTF-8 with LF line endings, '.' decimals and
nine significant digits; the first line is a versioned header comment."""

import numpy as np

from .errors import ConfigError
from .theory import Topology

CSV_VERSION = "v1"


def fmt(x):
    """Nine-significant-digit decimal; NaN and infinities spelled out."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def parse_topology(text, n_islands=None):
    """Parse a 0/1 matrix or an edge list.

    Lines starting with '#' are comments; ``# format: matrix`` or
    ``# format: edges`` forces a format, otherwise a square 0/1 block is
    read as a matrix (this also settles the ambiguous two-line case).
    Edge lists use zero-based ``src dst`` pairs; ``# islands: N`` sets the island
    count when the highest index is not the last island.
    """
    fmt_hint, size_hint = None, n_islands
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip().lower()
            if body.startswith("format:"):
                fmt_hint = body.split(":", 1)[1].strip()
            elif body.startswith("islands:"):
                size_hint = int(body.split(":", 1)[1])
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError:
            raise ConfigError("topology", f"non-integer entry in line {raw!r}") from None
    if not rows:
        raise ConfigError("topology", "topology file has no entries")
    if fmt_hint is None:
        binary = all(v in (0, 1) for r in rows for v in r)
        square = all(len(r) == len(rows) for r in rows)
        fmt_hint = "matrix" if square and binary else "edges"
    if fmt_hint == "matrix":
        if len({len(r) for r in rows}) != 1:
            raise ConfigError("topology", "matrix rows have different lengths")
        return Topology(np.array(rows))
    if fmt_hint != "edges":
        raise ConfigError("topology", f"unknown format {fmt_hint!r}")
    if any(len(r) != 2 for r in rows):
        raise ConfigError("topology", "edge lines must have exactly two entries")
    edges = np.array(rows)
    if edges.min() < 0:
        raise ConfigError("topology", "island indices must be >= 0")
    n = int(edges.max()) + 1 if size_hint is None else size_hint
    if edges.max() >= n:
        raise ConfigError("topology", f"edge index {edges.max()} exceeds island count {n}")
    a = np.zeros((n, n), dtype=int)
    a[edges[:, 0], edges[:, 1]] = 1
    return Topology(a)


def read_topology(path, n_islands=None):
    with open(path, encoding="utf-8") as fh:
        return parse_topology(fh.read(), n_islands)


def format_topology(topology):
    lines = ["# format: matrix"]
    lines += [" ".join(str(int(v)) for v in row) for row in topology.adjacency]
    return "\n".join(lines) + "\n"


def _header(kind, order, extra=()):
    cols = ["generation", "island"] + [f"k{i}" for i in range(1, order + 1)] + list(extra)
    return [f"# mpga-{kind} {CSV_VERSION}", ",".join(cols)]


def theory_csv(traj, pre=False):
    """Cumulants per generation and island with the migration flag; values
    are post-migration unless ``pre`` is set."""
    kap = traj.pre_migration if pre else traj.cumulants
    lines = _header("theory-pre" if pre else "theory", traj.order, ["migrated"])
    for n in range(kap.shape[0]):
        for l in range(traj.n_islands):
            vals = ",".join(fmt(v) for v in kap[n, l])
            lines.append(f"{n},{l},{vals},{int(traj.migrated[n])}")
    return "\n".join(lines) + "\n"


def empirical_csv(emp, pre=False):
    mean = emp.pre_mean if pre else emp.mean
    se = emp.pre_stderr if pre else emp.stderr
    order = mean.shape[2]
    extra = [f"k{i}_stderr" for i in range(1, order + 1)] + ["migrated"]
    lines = _header("empirical-pre" if pre else "empirical", order, extra)
    for n in range(mean.shape[0]):
        for l in range(mean.shape[1]):
            vals = ",".join(fmt(v) for v in mean[n, l])
            errs = ",".join(fmt(v) for v in se[n, l])
            lines.append(f"{n},{l},{vals},{errs},{int(emp.migrated[n])}")
    return "\n".join(lines) + "\n"


def read_cumulant_csv(path):
    """Read a theory or empirical CSV back into (cumulants, stderr or None,
    migrated flags).  Arrays have shape (N_g + 1, N_I, K)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if len(lines) < 2 or not lines[0].startswith("# mpga-"):
        raise ConfigError("input", f"{path}: missing mpga header line")
    cols = lines[1].split(",")
    kcols = [i for i, c in enumerate(cols) if c.startswith("k") and not c.endswith("_stderr")]
    scols = [i for i, c in enumerate(cols) if c.endswith("_stderr")]
    rows = [ln.split(",") for ln in lines[2:] if ln]
    gen = np.array([int(r[0]) for r in rows])
    isl = np.array([int(r[1]) for r in rows])
    ng, ni = gen.max() + 1, isl.max() + 1
    kap = np.full((ng, ni, len(kcols)), np.nan)
    se = np.full((ng, ni, len(scols)), np.nan) if scols else None
    flags = np.zeros(ng, dtype=bool)
    mig = cols.index("migrated") if "migrated" in cols else None
    for r, g, l in zip(rows, gen, isl):
        kap[g, l] = [float(r[i]) for i in kcols]
        if se is not None:
            se[g, l] = [float(r[i]) for i in scols]
        if mig is not None:
            flags[g] = r[mig] == "1"
    return kap, se, flags


def snapshot_text(genomes):
    """One genome per line written as '+' and '-' characters."""
    return "\n".join("".join("+" if s > 0 else "-" for s in g) for g in genomes) + "\n"


def parse_snapshot(text):
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return np.array([[1 if c == "+" else -1 for c in r] for r in rows], dtype=np.int8)
