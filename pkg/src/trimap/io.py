"""Text file formats for maps and sample sets.

Map files are line oriented::

    # optional comment lines
    TRIMAP 1
    dim 2
    direction direct
    hermite probabilists-unnormalized
    premap <shift_1 .. shift_n> <scale_1 .. scale_n>      (optional)
    component 1 polynomial
    indices 2
    0
    1
    coeffs 2
    0
    1
    ...

``polynomial`` components list ``indices m`` rows of ``k`` integers;
``intexp`` components list ``quad_order q``, ``a_indices`` and ``b_indices``;
``rbf`` components list ``centers m`` rows and ``scales m`` values. Reals are
written with 17 significant digits so that a save/load round trip is exact.

Sample files are whitespace-delimited rows preceded by ``#`` comments; the
comment lines ``# key: value`` carry dimension, provenance and seed.
"""

import io as _io
import shlex
import sys

import numpy as np

from .errors import FileFormatError
from .maps import (
    Direction,
    IntegratedExponentialComponent,
    PolynomialComponent,
    RBFComponent,
    TriangularMap,
)
from .quadrature import Provenance, SampleSet

__all__ = [
    "FORMAT_VERSION",
    "HERMITE_CONVENTION",
    "format_real",
    "header_lines",
    "dumps_map",
    "loads_map",
    "save_map",
    "load_map",
    "save_samples",
    "load_samples",
]

FORMAT_VERSION = 1
HERMITE_CONVENTION = "probabilists-unnormalized"


def format_real(x):
    return format(float(x), ".17g")


def _version():
    from . import __version__

    return __version__


def header_lines(seed=None, command=None, extra=None):
    """``#`` comment lines with tool version, command line and seed."""
    if command is None:
        command = " ".join(shlex.quote(a) for a in sys.argv)
    lines = [f"# trimap {_version()}", f"# command: {command}",
             f"# seed: {'none' if seed is None else int(seed)}"]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def _int_rows(a):
    return [" ".join(str(int(v)) for v in row) for row in np.atleast_2d(a)]


def _real_rows(a):
    return [" ".join(format_real(v) for v in row) for row in np.atleast_2d(a)]


def dumps_map(tmap, seed=None, command=None):
    lines = header_lines(seed, command)
    lines += [f"TRIMAP {FORMAT_VERSION}", f"dim {tmap.n}", f"direction {tmap.direction.value}",
              f"hermite {HERMITE_CONVENTION}"]
    if tmap.has_premap:
        lines.append("premap " + " ".join(format_real(v) for v in np.r_[tmap.shift, tmap.scale]))
    for c in tmap.components:
        lines.append(f"component {c.k} {c.kind}")
        if isinstance(c, PolynomialComponent):
            lines.append(f"indices {len(c.indices)}")
            lines += _int_rows(c.indices)
        elif isinstance(c, IntegratedExponentialComponent):
            lines.append(f"quad_order {c.quad_order}")
            lines.append(f"a_indices {len(c.a_indices)}")
            lines += _int_rows(c.a_indices)
            lines.append(f"b_indices {len(c.b_indices)}")
            lines += _int_rows(c.b_indices)
        elif isinstance(c, RBFComponent):
            lines.append(f"centers {len(c.centers)}")
            lines += _real_rows(c.centers)
            lines.append(f"scales {len(c.scales)}")
            lines += [format_real(v) for v in c.scales]
        else:
            raise TypeError(f"cannot serialize component of type {type(c).__name__}")
        lines.append(f"coeffs {c.ncoef}")
        lines += [format_real(v) for v in c.coeffs]
    return "\n".join(lines) + "\n"


class _Lines:
    def __init__(self, text, source):
        self.rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())
                     if ln.strip() and not ln.lstrip().startswith("#")]
        self.pos = 0
        self.source = source

    def fail(self, msg, lineno=None):
        where = f"{self.source}:{lineno}" if lineno else self.source
        raise FileFormatError(f"{where}: {msg}")

    def next(self):
        if self.pos >= len(self.rows):
            self.fail("unexpected end of file")
        row = self.rows[self.pos]
        self.pos += 1
        return row

    def peek(self):
        return self.rows[self.pos] if self.pos < len(self.rows) else (None, None)

    def keyword(self, key, nfields=None):
        lineno, line = self.next()
        parts = line.split()
        if parts[0] != key or (nfields is not None and len(parts) != nfields + 1):
            self.fail(f"expected '{key}' line, found {line!r}", lineno)
        return parts[1:], lineno

    def count(self, key):
        (m,), lineno = self.keyword(key, 1)
        try:
            return int(m)
        except ValueError:
            self.fail(f"bad count {m!r}", lineno)

    def block(self, m, dtype, width=None):
        out = []
        for _ in range(m):
            lineno, line = self.next()
            try:
                row = [dtype(v) for v in line.split()]
            except ValueError:
                self.fail(f"cannot parse {line!r}", lineno)
            if width is not None and len(row) != width:
                self.fail(f"expected {width} values, found {len(row)}", lineno)
            out.append(row)
        return out


def loads_map(text, source="<string>"):
    rd = _Lines(text, source)
    (ver,), lineno = rd.keyword("TRIMAP", 1)
    if ver != str(FORMAT_VERSION):
        rd.fail(f"unsupported map format version {ver!r}", lineno)
    n = rd.count("dim")
    (direction,), lineno = rd.keyword("direction", 1)
    if direction not in ("direct", "inverse"):
        rd.fail(f"unknown direction {direction!r}", lineno)
    (herm,), lineno = rd.keyword("hermite", 1)
    if herm != HERMITE_CONVENTION:
        rd.fail(f"unsupported Hermite convention {herm!r}", lineno)
    shift = scale = None
    _, line = rd.peek()
    if line is not None and line.split()[0] == "premap":
        vals, lineno = rd.keyword("premap", 2 * n)
        try:
            v = np.array([float(s) for s in vals])
        except ValueError:
            rd.fail("bad premap values", lineno)
        shift, scale = v[:n], v[n:]
    comps = []
    for k in range(1, n + 1):
        (kk, kind), lineno = rd.keyword("component", 2)
        if kk != str(k):
            rd.fail(f"expected component {k}, found {kk}", lineno)
        try:
            if kind == "polynomial":
                idx = np.array(rd.block(rd.count("indices"), int, k), dtype=int).reshape(-1, k)
                coeffs = np.array(rd.block(rd.count("coeffs"), float, 1)).ravel()
                comps.append(PolynomialComponent(k, idx, coeffs))
            elif kind == "intexp":
                (q,), _ = rd.keyword("quad_order", 1)
                a = np.array(rd.block(rd.count("a_indices"), int, k), dtype=int).reshape(-1, k)
                b = np.array(rd.block(rd.count("b_indices"), int, k), dtype=int).reshape(-1, k)
                coeffs = np.array(rd.block(rd.count("coeffs"), float, 1)).ravel()
                comps.append(IntegratedExponentialComponent(k, a, b, coeffs, quad_order=int(q)))
            elif kind == "rbf":
                centers = np.array(rd.block(rd.count("centers"), float, k)).reshape(-1, k)
                scales = np.array(rd.block(rd.count("scales"), float, 1)).ravel()
                coeffs = np.array(rd.block(rd.count("coeffs"), float, 1)).ravel()
                comps.append(RBFComponent(k, centers, scales, coeffs))
            else:
                rd.fail(f"unknown component kind {kind!r}", lineno)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, FileFormatError):
                raise
            rd.fail(f"component {k}: {exc}", lineno)
    lineno, line = rd.peek()
    if line is not None:
        rd.fail(f"trailing content {line!r}", lineno)
    return TriangularMap(comps, Direction(direction), shift=shift, scale=scale)


def save_map(path, tmap, seed=None, command=None):
    with open(path, "w") as fh:
        fh.write(dumps_map(tmap, seed, command))


def load_map(path):
    with open(path) as fh:
        return loads_map(fh.read(), str(path))


def save_samples(path, samples, seed=None, command=None, extra=None):
    """Write a :class:`SampleSet` (or array) as delimited text with a ``#`` header."""
    if not isinstance(samples, SampleSet):
        samples = SampleSet(samples, Provenance.TARGET, seed=seed)
    if seed is None:
        seed = samples.seed
    meta = {"dim": samples.dim, "provenance": samples.provenance.value}
    cols = samples.meta.get("columns") if samples.meta else None
    if cols:
        meta["columns"] = cols
    meta.update(extra or {})
    buf = _io.StringIO()
    buf.write("\n".join(header_lines(seed, command, meta)) + "\n")
    for row in samples.points:
        buf.write(" ".join(format_real(v) for v in row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_samples(path):
    """Read a sample file; header ``# key: value`` lines populate ``meta``."""
    meta = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, sep, value = s[1:].partition(":")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            try:
                rows.append([float(v) for v in s.replace(",", " ").split()])
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: cannot parse {s!r}") from None
    if not rows:
        raise FileFormatError(f"{path}: no sample rows")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise FileFormatError(f"{path}: rows have differing lengths {sorted(width)}")
    pts = np.array(rows)
    if "dim" in meta and int(meta["dim"]) != pts.shape[1]:
        raise FileFormatError(f"{path}: header dim {meta['dim']} but rows have {pts.shape[1]}")
    try:
        prov = Provenance(meta.get("provenance", "target"))
    except ValueError:
        raise FileFormatError(f"{path}: unknown provenance {meta['provenance']!r}") from None
    seed = meta.get("seed")
    seed = int(seed) if seed not in (None, "none") else None
    try:
        return SampleSet(pts, prov, seed=seed, meta=meta)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from None
