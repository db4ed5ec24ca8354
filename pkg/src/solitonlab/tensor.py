"""Dense tensor containers and index algebra.

Components are stored as an ``n x n x ... x n`` numpy array; flattening is
row-major (C order), so component ``T[i, j, k]`` sits at ``(i*n + j)*n + k``
in serialized form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricRequired, SlotError

CO = "co"
CONTRA = "contra"

_TAG = re.compile(r"^(sym|skew)\((\d+),(\d+)\)$")


@dataclass(frozen=True)
class DenseTensor:
    """Rank <= 4 tensor on a ``dim``-dimensional space.

    ``valence`` holds ``"co"`` or ``"contra"`` per slot; ``sym`` lists declared
    symmetry tags: ``"sym(i,j)"``, ``"skew(i,j)"`` or ``"riemann"``.
    """

    comp: np.ndarray
    valence: tuple = ()
    sym: tuple = field(default=())

    def __post_init__(self):
        comp = np.array(self.comp, dtype=float)
        object.__setattr__(self, "comp", comp)
        comp.setflags(write=False)
        rank = comp.ndim
        if rank > 4:
            raise ValueError("rank must be <= 4")
        if rank and len(set(comp.shape)) != 1:
            raise ValueError(f"components must be square, got shape {comp.shape}")
        valence = tuple(self.valence) if self.valence else (CO,) * rank
        if len(valence) != rank or any(v not in (CO, CONTRA) for v in valence):
            raise ValueError(f"bad valence {valence!r} for rank {rank}")
        object.__setattr__(self, "valence", valence)
        for tag in self.sym:
            _parse_tag(tag, rank)
        object.__setattr__(self, "sym", tuple(self.sym))

    @property
    def rank(self):
        return self.comp.ndim

    @property
    def dim(self):
        return self.comp.shape[0] if self.rank else 0

    def __getitem__(self, idx):
        return self.comp[idx]

    def norm(self, inverse_metric=None):
        """sqrt of the full contraction T.T, using ``inverse_metric`` on covariant
        slots (and its inverse on contravariant ones) when given."""
        return float(np.sqrt(max(norm_sq(self, inverse_metric), 0.0)))

    def to_json(self):
        d = {"dim": self.dim, "rank": self.rank, "valence": list(self.valence),
             "comp": self.comp.reshape(-1).tolist()}
        if self.sym:
            d["sym"] = list(self.sym)
        return d

    @classmethod
    def from_json(cls, d):
        dim, rank = int(d["dim"]), int(d["rank"])
        comp = np.asarray(d["comp"], dtype=float)
        if comp.size != dim**rank:
            raise ValueError(f"expected {dim**rank} components, got {comp.size}")
        return cls(comp.reshape((dim,) * rank), tuple(d.get("valence", ())), tuple(d.get("sym", ())))


def _parse_tag(tag, rank):
    if tag == "riemann":
        if rank != 4:
            raise ValueError("riemann tag needs rank 4")
        return ("riemann",)
    m = _TAG.match(tag.replace(" ", ""))
    if not m:
        raise ValueError(f"unknown symmetry tag {tag!r}")
    kind, i, j = m.group(1), int(m.group(2)), int(m.group(3))
    if i == j or max(i, j) >= rank:
        raise ValueError(f"bad slots in tag {tag!r}")
    return kind, i, j


def _matrix(metric):
    return metric.comp if isinstance(metric, DenseTensor) else np.asarray(metric, dtype=float)


def _inverse_from(metric, want):
    """Return the (want-valence) rank 2 metric array from either g or g^-1."""
    if isinstance(metric, DenseTensor):
        have = metric.valence[0]
        m = metric.comp
        return m if have == want else np.linalg.inv(m)
    return np.asarray(metric, dtype=float)


def contract(t: DenseTensor, slots, metric=None) -> DenseTensor:
    """Trace over two slots; rank drops by two.

    Two covariant slots need the inverse metric, two contravariant slots the
    metric. ``metric`` may be given as either g or g^-1 (a DenseTensor whose
    valence says which); a bare array is taken to be the one needed.
    """
    a, b = slots
    if a == b or not (0 <= a < t.rank and 0 <= b < t.rank):
        raise SlotError(f"invalid slots {slots} for rank {t.rank}")
    va, vb = t.valence[a], t.valence[b]
    if va != vb:
        comp = np.trace(t.comp, axis1=a, axis2=b)
    else:
        if metric is None:
            raise MetricRequired(f"contracting two {va}variant slots needs a metric")
        m = _inverse_from(metric, CONTRA if va == CO else CO)
        moved = np.moveaxis(t.comp, (a, b), (-2, -1))
        comp = np.einsum("...ij,ij->...", moved, m)
    keep = [s for s in range(t.rank) if s not in (a, b)]
    return DenseTensor(comp, tuple(t.valence[s] for s in keep), _remap_tags(t.sym, keep))


def _remap_tags(tags, keep):
    new = {old: k for k, old in enumerate(keep)}
    out = []
    for tag in tags:
        parsed = _parse_tag(tag, 4 if tag == "riemann" else 99)
        if parsed[0] == "riemann":
            continue
        kind, i, j = parsed
        if i in new and j in new:
            out.append(f"{kind}({new[i]},{new[j]})")
    return tuple(out)


def _tags_without(tags, slot):
    # component symmetries through a slot do not survive changing its valence
    out = []
    for tag in tags:
        parsed = _parse_tag(tag, 4 if tag == "riemann" else 99)
        if parsed[0] != "riemann" and slot not in parsed[1:]:
            out.append(tag)
    return tuple(out)


def raise_index(t: DenseTensor, slot: int, inverse_metric) -> DenseTensor:
    if not 0 <= slot < t.rank or t.valence[slot] != CO:
        raise SlotError(f"slot {slot} is not a covariant slot")
    ginv = _inverse_from(inverse_metric, CONTRA)
    comp = np.moveaxis(np.tensordot(ginv, t.comp, axes=([1], [slot])), 0, slot)
    val = list(t.valence)
    val[slot] = CONTRA
    return DenseTensor(comp, tuple(val), _tags_without(t.sym, slot))


def lower_index(t: DenseTensor, slot: int, metric) -> DenseTensor:
    if not 0 <= slot < t.rank or t.valence[slot] != CONTRA:
        raise SlotError(f"slot {slot} is not a contravariant slot")
    g = _inverse_from(metric, CO)
    comp = np.moveaxis(np.tensordot(g, t.comp, axes=([1], [slot])), 0, slot)
    val = list(t.valence)
    val[slot] = CO
    return DenseTensor(comp, tuple(val), _tags_without(t.sym, slot))


def norm_sq(t: DenseTensor, inverse_metric=None) -> float:
    """T_{i..} T_{j..} g^{ij} ... over all slots (Euclidean if no metric)."""
    c = t.comp
    if t.rank == 0:
        return float(c * c)
    if inverse_metric is None:
        return float(np.sum(c * c))
    ginv = _inverse_from(inverse_metric, CONTRA)
    g = None
    other = c
    for slot, v in enumerate(t.valence):
        if v == CO:
            m = ginv
        else:
            g = np.linalg.inv(ginv) if g is None else g
            m = g
        other = np.moveaxis(np.tensordot(m, other, axes=([1], [slot])), 0, slot)
    return float(np.sum(c * other))


def riemann_deviations(r: np.ndarray) -> dict:
    """Max deviation of each algebraic Riemann symmetry (last four axes)."""
    sw = lambda *p: np.transpose(r, tuple(range(r.ndim - 4)) + tuple(r.ndim - 4 + i for i in p))
    return {
        "skew(0,1)": float(np.max(np.abs(r + sw(1, 0, 2, 3)), initial=0.0)),
        "skew(2,3)": float(np.max(np.abs(r + sw(0, 1, 3, 2)), initial=0.0)),
        "pair": float(np.max(np.abs(r - sw(2, 3, 0, 1)), initial=0.0)),
        # R_ijkl + R_jkil + R_kijl
        "bianchi": float(np.max(np.abs(r + sw(1, 2, 0, 3) + sw(2, 0, 1, 3)), initial=0.0)),
    }


def check_symmetry(t: DenseTensor) -> dict:
    """Max absolute deviation per declared tag."""
    report = {}
    for tag in t.sym:
        parsed = _parse_tag(tag, t.rank)
        if parsed[0] == "riemann":
            report[tag] = max(riemann_deviations(t.comp).values())
            continue
        kind, i, j = parsed
        swapped = np.swapaxes(t.comp, i, j)
        dev = t.comp - swapped if kind == "sym" else t.comp + swapped
        report[tag] = float(np.max(np.abs(dev), initial=0.0))
    return report


def identity(dim: int) -> DenseTensor:
    """Kronecker delta as a (contra, co) tensor."""
    return DenseTensor(np.eye(dim), (CONTRA, CO))
