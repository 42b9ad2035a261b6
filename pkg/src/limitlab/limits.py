"""Limit-set point clouds, orbital counting and critical-exponent estimation.

A limit set is approximated by the fixed points of all loxodromic elements in
a bounded word-length ball, recorded as disc angles.  Orbit displacement
spectra feed a truncated Poincare series and a least-squares estimate of the
critical exponent; an independent box-counting estimator on the cloud gives
the cross-check that the two agree at the resolution the truncation supports.

All "limit set equality" style statements are finite-depth Hausdorff bounds,
never set equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud, InsufficientData
from .groups import (
    Ball,
    MarkedGroup,
    SubgroupSpec,
    enumerate_ball,
    member_mask,
)
from .hyperbolic import EPS_CLS, BASEPOINT, InteriorPoint

TWO_PI = 2.0 * math.pi

ANGLE_RESOLUTION = 1e-8

# Fit window for the critical-exponent slope, as fractions of the largest
# displacement: drops the small-R transients and the truncation-starved tail.
FIT_WINDOW = (0.4, 0.9)


@dataclass(frozen=True)
class LimitCloud:
    """Finite approximation of a limit set on the boundary circle.

    angles are sorted, deduplicated at ANGLE_RESOLUTION; word_lengths[i] is
    the length of the shortest witnessing loxodromic element.
    """

    angles: np.ndarray
    word_lengths: np.ndarray
    group_label: str
    depth: int

    def __len__(self) -> int:
        return len(self.angles)

    def max_gap(self) -> float:
        """Largest angular gap between consecutive cloud points."""
        if len(self.angles) == 0:
            raise EmptyCloud("no points")
        if len(self.angles) == 1:
            return TWO_PI
        gaps = np.diff(self.angles)
        wrap = self.angles[0] + TWO_PI - self.angles[-1]
        return float(max(gaps.max(), wrap))


@dataclass(frozen=True)
class OrbitCounts:
    """Sorted orbit displacement multiset with cumulative counts.

    radii[i] is the i-th smallest value of d(z0, g z0) over the enumerated
    subgroup members (the identity contributes radius 0); counts[i] is the
    number of enumerated elements within radii[i].

    complete_radius is the displacement up to which the truncated
    enumeration is believed complete (elements beyond the word-length cap
    all displace further than this); the exponent fit anchors its window
    here.  For counts not produced from a word ball it defaults to the
    largest radius.
    """

    radii: np.ndarray
    counts: np.ndarray
    basepoint: InteriorPoint
    group_label: str = ""
    depth: int = 0
    complete_radius: float = float("nan")

    def __post_init__(self):
        if len(self.radii) != len(self.counts):
            raise ValueError("radii and counts must align")
        if len(self.counts) and (np.diff(self.counts) < 0).any():
            raise ValueError("counts must be nondecreasing")
        if math.isnan(self.complete_radius):
            object.__setattr__(
                self, "complete_radius", float(self.radii[-1]) if len(self.radii) else 0.0
            )

    @staticmethod
    def from_radii(
        radii, basepoint=BASEPOINT, group_label="", depth=0, complete_radius=float("nan")
    ) -> "OrbitCounts":
        r = np.sort(np.asarray(radii, dtype=float))
        counts = np.searchsorted(r, r, side="right")
        return OrbitCounts(r, counts, basepoint, group_label, depth, complete_radius)


@dataclass(frozen=True)
class DeltaEstimate:
    """Least-squares slope of log N(R) over the fit window."""

    delta_hat: float
    residual: float
    window: tuple

    def __post_init__(self):
        if not -0.01 <= self.delta_hat <= 1.05:
            raise ValueError(
                f"delta_hat {self.delta_hat} outside [0, 1.05]: fit is not "
                "believable for a Fuchsian group"
            )


# ---------------------------------------------------------------------------
# Fixed points and disc angles, vectorized
# ---------------------------------------------------------------------------


def fixed_point_angles(flat: np.ndarray):
    """Disc angles of both fixed points of each loxodromic row of `flat`.

    Returns (angles1, angles2, loxodromic_mask).  Fixed points solve
    c x^2 + (d - a) x - b = 0.  Rows whose c is zero up to float noise
    (elements fixing infinity) take the branch {b/(d - a), infinity}: an
    exact-zero test would feed ~1e-15 noise into the division and return
    garbage.  The finite-c branch uses the sign-matched quadratic form so
    neither root suffers cancellation.  The disc angle of a boundary value
    x is atan2(-2x, x^2 - 1) mod 2pi, with infinity at angle 0.
    """
    a, b, c, d = flat[:, 0], flat[:, 1], flat[:, 2], flat[:, 3]
    tr = a + d
    loxo = np.abs(tr) > 2.0 + EPS_CLS
    disc = np.sqrt(np.maximum(tr * tr - 4.0, 0.0))
    scale = np.max(np.abs(flat), axis=1)
    c_zero = np.abs(c) <= 1e-12 * scale
    sgn = np.where(a - d >= 0.0, 1.0, -1.0)
    num = (a - d) + sgn * disc
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x1 = np.where(c_zero, b / (d - a), num / (2.0 * c))
        x2 = np.where(c_zero, np.inf, np.where(num != 0.0, -2.0 * b / num, 0.0))
    return _angle_of(x1), _angle_of(x2), loxo


def _angle_of(x: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore"):
        theta = np.arctan2(-2.0 * x, x * x - 1.0) % TWO_PI
    theta[~np.isfinite(x)] = 0.0
    return theta


def _dedup_angles(angles: np.ndarray, lengths: np.ndarray):
    """Sort and deduplicate angles at ANGLE_RESOLUTION, keeping the smallest
    witness length per bin."""
    bins = np.round(angles / ANGLE_RESOLUTION).astype(np.int64)
    order = np.lexsort((lengths, bins))
    bins_s = bins[order]
    first = np.empty(len(bins_s), dtype=bool)
    if len(bins_s):
        first[0] = True
        np.not_equal(bins_s[1:], bins_s[:-1], out=first[1:])
    keep = order[first]
    keep_sorted = keep[np.argsort(angles[keep], kind="stable")]
    return angles[keep_sorted], lengths[keep_sorted]


def cloud_from_ball(ball: Ball, mask: np.ndarray, label: str) -> LimitCloud:
    flat = ball.flat[mask]
    lengths = ball.lengths[mask]
    t1, t2, loxo = fixed_point_angles(flat)
    angles = np.concatenate([t1[loxo], t2[loxo]])
    wl = np.concatenate([lengths[loxo], lengths[loxo]]).astype(np.int16)
    angles, wl = _dedup_angles(angles, wl)
    return LimitCloud(angles, wl, label, ball.depth)


def approximate_limit_set(
    group: MarkedGroup,
    spec: SubgroupSpec,
    depth: int,
    ball: Ball | None = None,
) -> LimitCloud:
    """Both fixed points of every loxodromic spec-member of the depth ball.

    Pass a preenumerated ball to avoid recomputation.  For character-kernel
    specs at depths whose ball would not fit in memory, use
    stream_kernel_cloud instead.
    """
    if ball is None:
        ball = enumerate_ball(group, depth)
    mask = member_mask(group, spec, ball)
    label = f"{group.label}/{spec.kind}"
    return cloud_from_ball(ball, mask, label)


# ---------------------------------------------------------------------------
# Streaming cloud for character kernels at depths beyond ball enumeration
# ---------------------------------------------------------------------------


def stream_kernel_cloud(
    group: MarkedGroup,
    spec: SubgroupSpec,
    depth: int,
    split: int | None = None,
) -> LimitCloud:
    """Limit cloud of a character-kernel subgroup at large depth.

    Enumerates freely reduced words (not deduplicated elements) as products
    u * v with |u| = split, joining on character residues so only
    kernel-compatible pairs are ever multiplied.  Angle-space dedup at
    ANGLE_RESOLUTION subsumes element dedup: repeated words of one element
    land in the same bin, and the minimum witness length per bin agrees with
    the deduplicated-ball result.
    """
    if spec.kind not in ("character-kernel", "whole-group"):
        raise ValueError("streaming cloud needs a character-kernel or whole-group spec")
    if split is None:
        split = depth // 2

    prefix = _reduced_words_block(group, split)
    suffix = _reduced_words_block(group, depth - split)

    char_name = spec.character if spec.kind == "character-kernel" else None
    if char_name:
        pre_img = prefix["chars"][char_name]
        suf_img = suffix["chars"][char_name]

    angle_chunks = []
    length_chunks = []

    def _emit(flat, lengths):
        t1, t2, loxo = fixed_point_angles(flat)
        angle_chunks.append(np.concatenate([t1[loxo], t2[loxo]]))
        ln = lengths[loxo].astype(np.int16)
        length_chunks.append(np.concatenate([ln, ln]))

    # Words of length <= split, filtered directly.
    if char_name:
        short_ok = _lattice_rows(pre_img, spec.basis)
    else:
        short_ok = np.ones(len(prefix["mats"]), dtype=bool)
    _emit(prefix["mats"][short_ok], prefix["lengths"][short_ok])

    # Words u*v with |u| = split exactly, |v| >= 1, junction non-cancelling.
    u_sel = prefix["lengths"] == split
    u_mats = prefix["mats"][u_sel].reshape(-1, 2, 2)
    u_last = prefix["last"][u_sel]
    u_len = prefix["lengths"][u_sel]
    v_mats = suffix["mats"].reshape(-1, 2, 2)
    v_first = suffix["first"]
    v_len = suffix["lengths"]
    nonzero_v = v_len > 0

    if char_name:
        u_img = pre_img[u_sel]
        v_img = suf_img
        targets = _compatible_suffix_mask_builder(v_img, spec.basis)
    for i in range(len(u_mats)):
        if char_name:
            vm = targets(-u_img[i])
        else:
            vm = nonzero_v.copy()
        vm &= nonzero_v & (v_first != (u_last[i] ^ 1))
        if not vm.any():
            continue
        prods = np.einsum("ij,njk->nik", u_mats[i], v_mats[vm]).reshape(-1, 4)
        _emit(prods, (u_len[i] + v_len[vm]))

    angles = np.concatenate(angle_chunks) if angle_chunks else np.empty(0)
    lengths = np.concatenate(length_chunks) if length_chunks else np.empty(0, np.int16)
    angles, lengths = _dedup_angles(angles, lengths)
    label = f"{group.label}/{spec.kind}"
    return LimitCloud(angles, lengths, label, depth)


def _reduced_words_block(group: MarkedGroup, depth: int) -> dict:
    """All freely reduced words of length <= depth (no element dedup)."""
    k = 2 * group.rank
    letter_mats = group._letter_mats
    char_delta = {}
    for n in group.characters:
        images = np.array(group.characters[n], dtype=np.int64)
        delta = np.empty((k, images.shape[1]), np.int64)
        delta[0::2] = images
        delta[1::2] = -images
        char_delta[n] = delta

    mats = np.array([[1.0, 0.0, 0.0, 1.0]])
    first = np.full(1, -1, np.int16)
    last = np.full(1, -1, np.int16)
    lengths = np.zeros(1, np.int16)
    chars = {n: np.zeros((1, char_delta[n].shape[1]), np.int64) for n in group.characters}

    frontier = dict(mats=mats, first=first, last=last, chars=chars)
    out_m, out_f, out_l, out_len = [mats], [first], [last], [lengths]
    out_chars = {n: [chars[n]] for n in group.characters}

    for level in range(1, depth + 1):
        pm = frontier["mats"].reshape(-1, 2, 2)
        allowed = frontier["last"][:, None] != (np.arange(k)[None, :] ^ 1)
        cand = np.einsum("pij,ljk->plik", pm, letter_mats.reshape(k, 2, 2))
        letters = np.broadcast_to(np.arange(k, dtype=np.int16)[None, :], allowed.shape)[allowed]
        pidx = np.broadcast_to(np.arange(len(pm))[:, None], allowed.shape)[allowed]
        mats = cand[allowed].reshape(-1, 4)
        first = np.where(frontier["first"][pidx] < 0, letters, frontier["first"][pidx])
        chars = {n: frontier["chars"][n][pidx] + char_delta[n][letters] for n in char_delta}
        frontier = dict(mats=mats, first=first, last=letters, chars=chars)
        out_m.append(mats)
        out_f.append(first)
        out_l.append(letters)
        out_len.append(np.full(len(mats), level, np.int16))
        for n in out_chars:
            out_chars[n].append(chars[n])

    return dict(
        mats=np.concatenate(out_m),
        first=np.concatenate(out_f),
        last=np.concatenate(out_l),
        lengths=np.concatenate(out_len),
        chars={n: np.concatenate(out_chars[n]) for n in out_chars},
    )


def _lattice_rows(images: np.ndarray, basis: tuple) -> np.ndarray:
    if not basis:
        return ~images.any(axis=1)
    B = np.array(basis, dtype=np.int64).T
    coeff = np.rint(images @ np.linalg.pinv(B.astype(float)).T).astype(np.int64)
    return (coeff @ B.T == images).all(axis=1)


def _compatible_suffix_mask_builder(v_img: np.ndarray, basis: tuple):
    """Returns f(target_residue) -> mask of suffixes v with v_img in
    target + lattice, via a dict keyed on exact image vectors for the zero
    lattice and a residue reduction otherwise."""
    if not basis:
        index: dict = {}
        for i, row in enumerate(map(tuple, v_img.tolist())):
            index.setdefault(row, []).append(i)
        n = len(v_img)

        def lookup(target):
            mask = np.zeros(n, dtype=bool)
            hits = index.get(tuple(int(x) for x in target))
            if hits:
                mask[hits] = True
            return mask

        return lookup

    # General sublattice: compare lattice membership of v_img - target.
    def lookup(target):
        return _lattice_rows(v_img - np.asarray(target), basis)

    return lookup


# ---------------------------------------------------------------------------
# Orbit counting, Poincare series, exponents
# ---------------------------------------------------------------------------


def displacements(flat: np.ndarray, z0: InteriorPoint) -> np.ndarray:
    """d(z0, g z0) for each matrix row, via the closed distance formula."""
    a, b, c, d = flat[:, 0], flat[:, 1], flat[:, 2], flat[:, 3]
    cx_d = c * z0.x + d
    den = cx_d * cx_d + (c * z0.y) ** 2
    x1 = ((a * z0.x + b) * cx_d + a * c * z0.y * z0.y) / den
    y1 = z0.y / den
    arg = 1.0 + ((x1 - z0.x) ** 2 + (y1 - z0.y) ** 2) / (2.0 * y1 * z0.y)
    return np.arccosh(np.maximum(arg, 1.0))


def orbit_counts(
    group: MarkedGroup,
    spec: SubgroupSpec,
    depth: int,
    z0: InteriorPoint = BASEPOINT,
    ball: Ball | None = None,
) -> OrbitCounts:
    """Sorted displacement radii of all spec members in the depth ball.

    The completeness radius is the smallest displacement of the deepest
    word-length shell among the members: every group element that displaces
    z0 less than that is already inside the ball, so counts below it are
    exact while counts beyond it are truncation-starved.
    """
    if ball is None:
        ball = enumerate_ball(group, depth)
    mask = member_mask(group, spec, ball)
    radii = displacements(ball.flat[mask], z0)
    lengths = ball.lengths[mask]
    complete = float("nan")
    if len(lengths):
        deepest = lengths.max()
        if deepest > 0:
            complete = float(radii[lengths == deepest].min())
    return OrbitCounts.from_radii(
        radii, z0, f"{group.label}/{spec.kind}", depth, complete
    )


def poincare_partial_sum(counts: OrbitCounts, s: float) -> float:
    """Truncated Poincare series: sum over enumerated elements of
    exp(-s * d(z0, g z0))."""
    if s <= 0:
        raise ValueError("s must be positive")
    return float(np.exp(-s * counts.radii).sum())


def estimate_delta(counts: OrbitCounts) -> DeltaEstimate:
    """Critical exponent estimate: slope of log N(R) against R.

    Fits over [0.4, 0.9] of the counts' completeness radius on the unique
    radii; the residual is the RMS misfit of the line.  Requires at least
    50 nonzero radii.  Anchoring the window at the completeness radius
    rather than the raw maximum displacement is what actually drops the
    truncation-starved tail: for a cocompact group the ball only sees every
    element out to roughly (min shell displacement), about a third of the
    largest displacement, and fitting beyond that flattens the slope far
    below the true exponent.
    """
    if len(counts.radii) == 0:
        raise InsufficientData("empty counts")
    idx0 = int(np.searchsorted(counts.radii, 1e-12, side="right"))
    zero_represented = int(counts.counts[idx0 - 1]) if idx0 > 0 else 0
    nonzero_represented = int(counts.counts[-1]) - zero_represented
    if nonzero_represented < 50:
        raise InsufficientData(f"{nonzero_represented} nonzero orbit points < 50")
    rmax = counts.complete_radius
    lo, hi = FIT_WINDOW[0] * rmax, FIT_WINDOW[1] * rmax
    r_unique = np.unique(counts.radii)
    sel = (r_unique >= lo) & (r_unique <= hi)
    r = r_unique[sel]
    if len(r) < 2:
        raise InsufficientData("fewer than 2 distinct radii in the fit window")
    n_of_r = counts.counts[np.searchsorted(counts.radii, r, side="right") - 1]
    logn = np.log(n_of_r)
    slope, intercept = np.polyfit(r, logn, 1)
    resid = float(np.sqrt(np.mean((logn - (slope * r + intercept)) ** 2)))
    return DeltaEstimate(max(float(slope), 0.0), resid, (float(lo), float(hi)))


def box_dimension(cloud: LimitCloud, scales, min_points: int = 200) -> float:
    """Box-counting dimension of the cloud: least-squares slope of
    log(occupied arc bins) against log(1/scale).

    Needs >= 3 scales spanning >= 1.5 decades and >= min_points points
    (default 200; degenerate clouds can be measured by lowering it
    explicitly, e.g. a 2-point cloud reads dimension 0).
    """
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    if len(scales) < 3:
        raise InsufficientData("need at least 3 scales")
    if scales.max() / scales.min() < 10 ** 1.5 * (1 - 1e-9):
        raise InsufficientData("scales must span at least 1.5 decades")
    if len(cloud) < min_points:
        raise InsufficientData(f"cloud has {len(cloud)} < {min_points} points")
    occupied = np.array(
        [len(np.unique(np.floor(cloud.angles / s).astype(np.int64))) for s in scales]
    )
    slope, _ = np.polyfit(np.log(1.0 / scales), np.log(occupied), 1)
    return float(slope)


def cloud_hausdorff(c1: LimitCloud, c2: LimitCloud) -> float:
    """Symmetric Hausdorff distance between clouds in the disc-angle metric."""
    if len(c1) == 0 or len(c2) == 0:
        raise EmptyCloud("hausdorff distance of an empty cloud")
    return max(_directed_hausdorff(c1.angles, c2.angles),
               _directed_hausdorff(c2.angles, c1.angles))


def _directed_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """sup over a of the circular distance to the sorted array b."""
    idx = np.searchsorted(b, a)
    n = len(b)
    best = np.full(len(a), np.inf)
    for cand in (idx - 1, idx % n, (idx + 1) % n):
        cand = cand % n
        d = np.abs(a - b[cand]) % TWO_PI
        d = np.minimum(d, TWO_PI - d)
        best = np.minimum(best, d)
    return float(best.max()) if len(best) else 0.0
