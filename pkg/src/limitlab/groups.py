"""Finitely generated purely loxodromic Fuchsian groups as marked generator
systems.

A group is given by named loxodromic generator matrices, an optional relator
word, and integer characters (homomorphisms to Z^m described by per-generator
images).  Group elements are enumerated breadth-first over freely reduced
words with tolerance-based matrix deduplication; no symbolic rewriting is
attempted, so everything works uniformly at bounded depth for free and
one-relator groups alike.

Words are tuples of signed generator indices: +k is generator k-1, -k its
inverse, and words are kept freely reduced.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import hyperbolic as hyp
from .errors import (
    CirclesOverlap,
    ConstructionFailed,
    DepthExceeded,
    ToleranceCollision,
    UnknownCharacter,
)
from .hyperbolic import (
    AT_INFINITY,
    IDENTITY,
    InteriorPoint,
    Mobius,
    apply,
    classify_isometry,
    compose,
    interior_to_disc,
    rotate_about_i,
    standard_position,
)

EPS_REL = 1e-8
EPS_DUP = 1e-6
DEFAULT_MAX_DEPTH = 14
DEFAULT_MAX_ELEMENTS = 12_000_000

# Dedup cell size: same-element duplicates agree to ~1e-10 at the depths we
# enumerate, distinct elements stay >= 1e-4 apart (asserted by the margin
# checks), so ε_dup/4 cells with a final nearest-neighbor sweep are exact.
_CELL = EPS_DUP / 4.0

Word = tuple[int, ...]


def reduce_word(letters) -> Word:
    """Freely reduce a sequence of signed generator indices."""
    out: list[int] = []
    for s in letters:
        if out and out[-1] == -s:
            out.pop()
        else:
            out.append(int(s))
    return tuple(out)


def invert_word(w: Word) -> Word:
    return tuple(-s for s in reversed(w))


def concat_words(v: Word, w: Word) -> Word:
    return reduce_word(v + w)


def word_str(w: Word, names: list[str]) -> str:
    if not w:
        return "1"
    parts = []
    for s in w:
        parts.append(names[abs(s) - 1] + ("" if s > 0 else "^-1"))
    return "*".join(parts)


@dataclass(frozen=True)
class GroupElement:
    """A group element: reduced word, canonical matrix, character images."""

    word: Word
    matrix: Mobius
    character_images: dict

    @property
    def length(self) -> int:
        return len(self.word)

    @property
    def is_identity(self) -> bool:
        return self.matrix.distance_to(IDENTITY) < EPS_DUP

    def char(self, name: str) -> tuple[int, ...]:
        return self.character_images[name]


@dataclass(frozen=True)
class SubgroupSpec:
    """Subgroup membership rule.

    kinds:
      whole-group        -- everything belongs
      character-kernel   -- character image lies in the given integer
                            sublattice (empty basis = the zero lattice)
      cyclic             -- matrix matches element^k for some |k| <= max_power
      word-list          -- matrix matches one of an explicit element list
    """

    kind: str
    character: str = ""
    basis: tuple = ()
    element: GroupElement = None
    elements: tuple = ()
    max_power: int = 64

    def __post_init__(self):
        if self.kind == "character-kernel" and self.basis:
            B = np.array(self.basis, dtype=np.int64)
            if np.linalg.matrix_rank(B) < B.shape[0]:
                raise ValueError("sublattice basis vectors are dependent")

    @staticmethod
    def whole_group() -> "SubgroupSpec":
        return SubgroupSpec("whole-group")

    @staticmethod
    def character_kernel(character: str, basis=()) -> "SubgroupSpec":
        return SubgroupSpec(
            "character-kernel",
            character=character,
            basis=tuple(tuple(int(x) for x in row) for row in basis),
        )

    @staticmethod
    def cyclic(element: GroupElement, max_power: int = 64) -> "SubgroupSpec":
        return SubgroupSpec("cyclic", element=element, max_power=max_power)

    @staticmethod
    def word_list(elements) -> "SubgroupSpec":
        return SubgroupSpec("word-list", elements=tuple(elements))


class MarkedGroup:
    """Marked generator system with characters.

    generators: list of (name, Mobius), all loxodromic.
    relator: optional word evaluating to the identity within 1e-8.
    characters: name -> list of integer image vectors, one per generator;
    every character must kill the relator.
    """

    def __init__(self, generators, relator=None, characters=None, label=""):
        self.generators = [(str(n), m) for n, m in generators]
        self.relator: Word | None = tuple(relator) if relator else None
        self.characters = {
            str(name): tuple(tuple(int(x) for x in v) for v in images)
            for name, images in (characters or {}).items()
        }
        self.label = label or "group"
        for name, m in self.generators:
            cls = classify_isometry(m)
            if cls.tag != "loxodromic":
                raise ConstructionFailed(f"generator {name} classifies {cls.tag}")
        for name, images in self.characters.items():
            if len(images) != len(self.generators):
                raise ValueError(f"character {name}: one image per generator required")
        if self.relator is not None:
            defect = self.evaluate(self.relator).distance_to(IDENTITY)
            if defect > EPS_REL:
                raise ConstructionFailed(f"relator defect {defect:.3e} > {EPS_REL}")
            for name in self.characters:
                img = self.character_image(name, self.relator)
                if any(img):
                    raise ConstructionFailed(f"character {name} does not kill relator")
        # Letter tables: code 2i is generator i, code 2i+1 its inverse.
        k = len(self.generators)
        self._letter_mats = np.empty((2 * k, 2, 2))
        for i, (_, m) in enumerate(self.generators):
            inv = m.inverse()
            self._letter_mats[2 * i] = [[m.a, m.b], [m.c, m.d]]
            self._letter_mats[2 * i + 1] = [[inv.a, inv.b], [inv.c, inv.d]]
        self.min_translation = min(
            classify_isometry(m).translation_length for _, m in self.generators
        )

    # -- basic word evaluation ------------------------------------------------

    @property
    def rank(self) -> int:
        return len(self.generators)

    def generator_names(self) -> list[str]:
        return [n for n, _ in self.generators]

    def generator(self, name: str) -> Mobius:
        for n, m in self.generators:
            if n == name:
                return m
        raise KeyError(name)

    def generator_index(self, name: str) -> int:
        for i, (n, _) in enumerate(self.generators):
            if n == name:
                return i
        raise KeyError(name)

    def evaluate(self, w: Word) -> Mobius:
        m = IDENTITY
        for s in w:
            g = self.generators[abs(s) - 1][1]
            m = compose(m, g if s > 0 else g.inverse())
        return m

    def character_image(self, name: str, w: Word) -> tuple[int, ...]:
        """Sum of per-generator images weighted by exponents."""
        if name not in self.characters:
            raise UnknownCharacter(name)
        images = self.characters[name]
        dim = len(images[0]) if images else 0
        out = [0] * dim
        for s in w:
            img = images[abs(s) - 1]
            sign = 1 if s > 0 else -1
            for j in range(dim):
                out[j] += sign * img[j]
        return tuple(out)

    def element(self, w) -> GroupElement:
        w = reduce_word(w)
        return GroupElement(
            w,
            self.evaluate(w),
            {name: self.character_image(name, w) for name in self.characters},
        )

    def element_from_name(self, name: str) -> GroupElement:
        return self.element((self.generator_index(name) + 1,))

    def identity_element(self) -> GroupElement:
        return self.element(())

    def multiply(self, e1: GroupElement, e2: GroupElement) -> GroupElement:
        w = concat_words(e1.word, e2.word)
        return GroupElement(
            w,
            compose(e1.matrix, e2.matrix),
            {
                name: tuple(a + b for a, b in zip(e1.char(name), e2.char(name)))
                for name in self.characters
            },
        )

    def power(self, e: GroupElement, k: int) -> GroupElement:
        out = self.identity_element()
        step = e if k >= 0 else self.inverse_element(e)
        for _ in range(abs(k)):
            out = self.multiply(out, step)
        return out

    def inverse_element(self, e: GroupElement) -> GroupElement:
        return GroupElement(
            invert_word(e.word),
            e.matrix.inverse(),
            {name: tuple(-x for x in v) for name, v in e.character_images.items()},
        )

    # -- serialization --------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "1",
            "label": self.label,
            "generators": [
                {"name": n, "matrix": [m.a, m.b, m.c, m.d]} for n, m in self.generators
            ],
            "relator": list(self.relator) if self.relator else None,
            "characters": {
                name: [list(v) for v in images] for name, images in self.characters.items()
            },
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "MarkedGroup":
        return MarkedGroup(
            [(g["name"], Mobius(*g["matrix"])) for g in doc["generators"]],
            relator=doc.get("relator"),
            characters=doc.get("characters", {}),
            label=doc.get("label", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "MarkedGroup":
        return MarkedGroup.from_json_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _frame_toward(p: InteriorPoint, q: InteriorPoint) -> Mobius:
    """Mobius F with F(i) = p carrying the upward tangent to the direction
    of q; the workhorse for mapping geodesic segments onto each other."""
    U = standard_position(p, AT_INFINITY)
    w = interior_to_disc(apply(U, q))
    psi = math.atan2(w.imag, w.real) + math.pi / 2.0
    return compose(U.inverse(), rotate_about_i(psi - math.pi / 2.0))


def segment_map(p, q, p2, q2) -> Mobius:
    """The orientation-preserving isometry taking segment (p, q) to (p2, q2).

    Requires d(p, q) = d(p2, q2); endpoints map to endpoints in order.
    """
    return compose(_frame_toward(p2, q2), _frame_toward(p, q).inverse())


def _octagon_pairings_hp():
    """Octagon side-pairing matrices computed at 50 digits.

    Deep words conjugation-amplify any defect in the generator entries by
    the square of the word's matrix norm (~e^18 at depth 8), so the
    generators have to be exact to the last float64 bit: build them in
    mpmath and round once.  With float64-only construction the relator
    defect of ~1e-14 inflates duplicate-matrix discrepancies past the
    1e-6 dedup tolerance by depth 8.
    """
    import mpmath as mp

    with mp.workdps(50):
        rho = mp.mpf(2) ** mp.mpf("-0.25")
        verts = []
        for k in range(8):
            w = rho * mp.expjpi(mp.mpf(k) / 4)
            verts.append(1j * (1 + w) / (1 - w))

        def inv2(M):
            return mp.matrix([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])

        def mob(M, z):
            return (M[0, 0] * z + M[0, 1]) / (M[1, 0] * z + M[1, 1])

        def frame_toward(p, q):
            s = mp.sqrt(p.imag)
            U = mp.matrix([[1 / s, -p.real / s], [0, s]])
            uq = mob(U, q)
            w = (uq - 1j) / (uq + 1j)
            half = (mp.atan2(w.imag, w.real) + mp.pi / 2) / 2 - mp.pi / 4
            rot = mp.matrix([[mp.cos(half), mp.sin(half)], [-mp.sin(half), mp.cos(half)]])
            return inv2(U) * rot

        def seg_map(p, q, p2, q2):
            return frame_toward(p2, q2) * inv2(frame_toward(p, q))

        # letter carried by edge e_k: +g means generator g, -g its inverse.
        edge_letters = [1, -2, -1, 2, 3, -4, -3, 4]
        pairings = {}
        for g in (1, 2, 3, 4):
            i = edge_letters.index(g)
            j = edge_letters.index(-g)
            M = seg_map(verts[j], verts[(j + 1) % 8], verts[(i + 1) % 8], verts[i])
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            M = M / mp.sqrt(det)
            pairings[g] = Mobius(
                float(M[0, 0].real), float(M[0, 1].real),
                float(M[1, 0].real), float(M[1, 1].real),
            )
    return pairings


def build_genus2_group() -> MarkedGroup:
    """Genus-2 surface group from the regular hyperbolic octagon.

    The octagon is centered at the disc origin with all eight interior
    angles pi/4 (angle sum 2*pi, one vertex cycle), circumradius
    arccosh(3 + 2*sqrt(2)).  Each generator is the side pairing carrying its
    inverse-labeled edge onto its forward-labeled edge with reversed
    orientation; the edge labels are the ones whose single vertex cycle
    spells exactly [a1,b1][a2,b2] (walking the corners crosses edges
    e0, e3, e2, e1, e4, e7, e6, e5, visiting every vertex once with angle
    sum 2*pi, so the pairings generate a discrete cocompact group with the
    octagon as fundamental domain).

    Characters: "ab4" is the full abelianization to Z^4; "grid" sends
    a1 -> (1,0), a2 -> (0,1) and kills b1, b2.
    """
    pairings = _octagon_pairings_hp()
    names = ["a1", "b1", "a2", "b2"]
    gens = [(names[g - 1], pairings[g]) for g in (1, 2, 3, 4)]
    relator = (1, 2, -1, -2, 3, 4, -3, -4)
    return MarkedGroup(
        gens,
        relator=relator,
        characters={
            "ab4": [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)],
            "grid": [(1, 0), (0, 0), (0, 1), (0, 0)],
        },
        label="genus2",
    )


def disc_isometric_circle(m: Mobius):
    """(center, radius) of the isometric circle of m in the disc model.

    The disc-model matrix of [[a,b],[c,d]] is [[alpha, beta], [conj beta,
    conj alpha]] with alpha = ((a+d) + i(b-c))/2, beta = ((a-d) - i(b+c))/2;
    the isometric circle is |conj(beta) w + conj(alpha)| = 1.
    """
    alpha = complex(m.a + m.d, m.b - m.c) / 2.0
    beta = complex(m.a - m.d, -(m.b + m.c)) / 2.0
    if abs(beta) < 1e-15:
        return None
    return -alpha.conjugate() / beta.conjugate(), 1.0 / abs(beta)


def build_schottky_group(separation: float = 3.0) -> MarkedGroup:
    """Free rank-2 Schottky group with perpendicular axes.

    g1 = diag(L, 1/L) with L = separation (axis the half-plane geodesic
    (0, infinity)), g2 its conjugate with axis (-1, 1).  The four isometric
    circles in the disc model sit around the four fixed points +-1, +-i;
    they are pairwise disjoint exactly for separation > 1 + sqrt(2), and the
    builder refuses anything tighter.
    """
    lam = float(separation)
    if lam <= 1.0:
        raise CirclesOverlap(f"separation {lam} <= 1 gives no loxodromic")
    g1 = Mobius(lam, 0.0, 0.0, 1.0 / lam)
    # Conjugate of g1 by (z - 1)/(z + 1), written in closed form so the
    # entries are exact at float precision.
    cp = (lam + 1.0 / lam) / 2.0
    cm = (lam - 1.0 / lam) / 2.0
    g2 = Mobius(cp, cm, cm, cp)

    circles = []
    for m in (g1, g1.inverse(), g2, g2.inverse()):
        circ = disc_isometric_circle(m)
        if circ is None:
            raise CirclesOverlap("generator fixes the disc center")
        circles.append(circ)
    for i in range(4):
        for j in range(i + 1, 4):
            (c1, r1), (c2, r2) = circles[i], circles[j]
            if abs(c1 - c2) <= r1 + r2 + 1e-12:
                raise CirclesOverlap(
                    f"isometric circles {i} and {j} overlap at separation {lam}"
                )
    return MarkedGroup(
        [("g1", g1), ("g2", g2)],
        characters={"ab2": [(1, 0), (0, 1)]},
        label=f"schottky-{lam:g}",
    )


# ---------------------------------------------------------------------------
# Breadth-first enumeration with matrix deduplication
# ---------------------------------------------------------------------------


def _canonical_rows(flat: np.ndarray) -> np.ndarray:
    """Fix the PSL sign of rows of an (N, 4) matrix-entry array.

    Determinants are NOT renormalized here: products of det-1 matrices drift
    multiplicatively by ~1e-16 per factor, while the float evaluation of
    a*d - b*c is only accurate to ~|ad|*eps for big entries, so dividing by
    sqrt(det) would inject ~|M|^3*eps of noise (1e-5 at depth 8) and wreck
    the dedup tolerance.
    """
    sign = np.zeros(len(flat))
    for col in range(4):
        undecided = sign == 0.0
        if not undecided.any():
            break
        big = undecided & (np.abs(flat[:, col]) > 1e-12)
        sign[big] = np.sign(flat[big, col])
    sign[sign == 0.0] = 1.0
    return flat * sign[:, None]


def _keys_of(flat: np.ndarray) -> np.ndarray:
    # Rounded quotients kept as float64: integer-exact for entries up to
    # ~1e9 (cells of _CELL), still injective-per-ulp beyond, where an
    # absolute 1e-6 dedup tolerance has no meaning anyway.  int64 would
    # overflow for the very large entries of deep cyclic balls.
    return np.round(flat / _CELL)


def _lex_order(keys: np.ndarray) -> np.ndarray:
    return np.lexsort((keys[:, 3], keys[:, 2], keys[:, 1], keys[:, 0]))


class Ball:
    """All distinct group elements of word length <= depth.

    Behaves as an ordered sequence of GroupElement (sorted by word length,
    then lexicographically by word), but stores everything in flat numpy
    arrays so that million-element balls stay cheap; GroupElement objects
    are materialized on access.
    """

    def __init__(self, group: MarkedGroup, depth: int, words, lengths, flat, chars, margin):
        self.group = group
        self.depth = depth
        self.words = words          # (N, depth) int8 letter codes, -1 padding
        self.lengths = lengths      # (N,) int16
        self.flat = flat            # (N, 4) float64 canonical matrix entries
        self.chars = chars          # name -> (N, m) int64
        self.dedup_margin = margin  # min distance between distinct elements

    def __len__(self) -> int:
        return len(self.flat)

    def word_at(self, idx: int) -> Word:
        codes = self.words[idx, : self.lengths[idx]]
        return tuple(int(c // 2 + 1) if c % 2 == 0 else -int(c // 2 + 1) for c in codes)

    def matrix_at(self, idx: int) -> Mobius:
        a, b, c, d = self.flat[idx]
        return Mobius(a, b, c, d)

    def __getitem__(self, idx) -> GroupElement:
        if isinstance(idx, (int, np.integer)):
            if idx < 0:
                idx += len(self)
            return GroupElement(
                self.word_at(idx),
                self.matrix_at(idx),
                {name: tuple(int(x) for x in self.chars[name][idx]) for name in self.chars},
            )
        raise TypeError("Ball supports integer indexing only")

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def char(self, name: str) -> np.ndarray:
        if name not in self.chars:
            raise UnknownCharacter(name)
        return self.chars[name]

    def traces(self) -> np.ndarray:
        return self.flat[:, 0] + self.flat[:, 3]

    def mats(self) -> np.ndarray:
        return self.flat.reshape(-1, 2, 2)


def _max_depth_cap() -> int:
    env = os.environ.get("LIMITLAB_MAX_DEPTH")
    if env is not None:
        return int(env)
    return DEFAULT_MAX_DEPTH


def enumerate_ball(
    group: MarkedGroup,
    depth: int,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
    margin_check: bool = True,
) -> Ball:
    """Breadth-first ball of the group, deduplicated at EPS_DUP.

    Duplicate matrices (same element reached by different words) keep the
    shortest, lexicographically first word.  The result is ordered by word
    length then word.  A final nearest-neighbor sweep merges any duplicates
    split across dedup cells, records the dedup margin, and raises
    ToleranceCollision if two retained elements sit in [EPS_DUP, 10*EPS_DUP).

    Raises DepthExceeded beyond the configured depth cap (default 14,
    override with LIMITLAB_MAX_DEPTH) or when the ball would exceed
    max_elements.
    """
    cap = _max_depth_cap()
    if depth > cap:
        raise DepthExceeded(f"depth {depth} > configured max {cap}")
    if depth < 0:
        raise ValueError("depth must be >= 0")

    nletters = 2 * group.rank
    letter_mats = group._letter_mats
    char_names = list(group.characters)
    char_delta = {}
    for name in char_names:
        images = np.array(group.characters[name], dtype=np.int64)
        delta = np.empty((nletters, images.shape[1]), dtype=np.int64)
        delta[0::2] = images
        delta[1::2] = -images
        char_delta[name] = delta

    # Level 0: identity.
    level_words = [np.full((1, depth), -1, dtype=np.int8)]
    level_lengths = [np.zeros(1, dtype=np.int16)]
    level_flat = [np.array([[1.0, 0.0, 0.0, 1.0]])]
    level_chars = [{n: np.zeros((1, char_delta[n].shape[1]), dtype=np.int64) for n in char_names}]

    seen = _keys_of(level_flat[0])  # kept lexicographically sorted
    total = 1

    parent_words = level_words[0]
    parent_flat = level_flat[0]
    parent_chars = level_chars[0]
    parent_last = np.full(1, -1, dtype=np.int16)

    for level in range(1, depth + 1):
        npar = len(parent_flat)
        # Children in parent-major, letter-minor order = lexicographic order.
        cand_m = np.einsum("pij,ljk->plik", parent_flat.reshape(-1, 2, 2), letter_mats.reshape(-1, 2, 2))
        mask = parent_last[:, None] != (np.arange(nletters)[None, :] ^ 1)
        flat_children = _canonical_rows(cand_m[mask].reshape(-1, 4))
        child_parent = np.broadcast_to(np.arange(npar)[:, None], (npar, nletters))[mask]
        child_letter = np.broadcast_to(np.arange(nletters)[None, :], (npar, nletters))[mask]
        del cand_m

        if total + len(flat_children) > max_elements:
            raise DepthExceeded(
                f"ball would exceed max_elements={max_elements} at depth {level}"
            )

        keys = _keys_of(flat_children)
        combined = np.concatenate([seen, keys])
        order = _lex_order(combined)
        srt = combined[order]
        starts = np.empty(len(srt), dtype=bool)
        starts[0] = True
        np.not_equal(srt[1:], srt[:-1]).any(axis=1, out=starts[1:])
        first_idx = order[starts]
        new_child = np.sort(first_idx[first_idx >= len(seen)] - len(seen))
        seen = srt[starts]
        del combined, order, srt, starts, first_idx

        kept_parent = child_parent[new_child]
        kept_letter = child_letter[new_child]
        words = np.full((len(new_child), depth), -1, dtype=np.int8)
        if level > 1:
            words[:, : level - 1] = parent_words[kept_parent, : level - 1]
        words[:, level - 1] = kept_letter
        chars = {
            n: parent_chars[n][kept_parent] + char_delta[n][kept_letter]
            for n in char_names
        }
        flat_kept = flat_children[new_child]

        level_words.append(words)
        level_lengths.append(np.full(len(new_child), level, dtype=np.int16))
        level_flat.append(flat_kept)
        level_chars.append(chars)
        total += len(new_child)

        parent_words = words
        parent_flat = flat_kept
        parent_chars = chars
        parent_last = kept_letter.astype(np.int16)
        if len(new_child) == 0:
            break

    words = np.concatenate(level_words)
    lengths = np.concatenate(level_lengths)
    flat = np.concatenate(level_flat)
    chars = {
        n: np.concatenate([lc[n] for lc in level_chars]) for n in char_names
    }

    margin = math.inf
    if margin_check and len(flat) > 1:
        tree = cKDTree(flat)
        dist, nbr = tree.query(flat, k=2)
        d = dist[:, 1]
        dup = d < EPS_DUP
        if dup.any():
            # Straddled duplicates: drop the later (longer/lex-bigger) copy.
            ii = np.nonzero(dup)[0]
            jj = nbr[ii, 1]
            drop = np.zeros(len(flat), dtype=bool)
            drop[np.maximum(ii, jj)] = True
            keep = ~drop
            words, lengths, flat = words[keep], lengths[keep], flat[keep]
            chars = {n: chars[n][keep] for n in chars}
            d = d[keep]
        live = d >= EPS_DUP
        if live.any():
            margin = float(d[live].min())
            if margin < 10.0 * EPS_DUP:
                raise ToleranceCollision(
                    f"retained elements at distance {margin:.3e}: dedup margin unsafe"
                )

    return Ball(group, depth, words, lengths, flat, chars, margin)


# ---------------------------------------------------------------------------
# Subgroup membership
# ---------------------------------------------------------------------------


def _lattice_member_mask(images: np.ndarray, basis: tuple) -> np.ndarray:
    """Rows of `images` lying in the integer lattice spanned by `basis`."""
    if not basis:
        return ~images.any(axis=1)
    B = np.array(basis, dtype=np.int64).T  # (m, r)
    coeff = images @ np.linalg.pinv(B.astype(float)).T
    coeff = np.rint(coeff).astype(np.int64)
    return (coeff @ B.T == images).all(axis=1)


def _cyclic_power_flats(group: MarkedGroup, spec: SubgroupSpec) -> np.ndarray:
    mats = [IDENTITY]
    fwd = spec.element.matrix
    bwd = fwd.inverse()
    cur_f, cur_b = IDENTITY, IDENTITY
    for _ in range(spec.max_power):
        cur_f = compose(cur_f, fwd)
        cur_b = compose(cur_b, bwd)
        mats.append(cur_f)
        mats.append(cur_b)
    return np.array([m.entries() for m in mats])


def _match_any_mask(flat: np.ndarray, targets: np.ndarray, tol: float) -> np.ndarray:
    mask = np.zeros(len(flat), dtype=bool)
    for t in targets:
        hit = ~mask
        if not hit.any():
            break
        diff = flat[hit] - t
        mask[hit] = np.einsum("ij,ij->i", diff, diff) < tol * tol
    return mask


def member_mask(group: MarkedGroup, spec: SubgroupSpec, ball: Ball) -> np.ndarray:
    """Vectorized is_member over a whole ball."""
    if spec.kind == "whole-group":
        return np.ones(len(ball), dtype=bool)
    if spec.kind == "character-kernel":
        return _lattice_member_mask(ball.char(spec.character), spec.basis)
    if spec.kind == "cyclic":
        return _match_any_mask(ball.flat, _cyclic_power_flats(group, spec), EPS_DUP)
    if spec.kind == "word-list":
        targets = np.array([e.matrix.entries() for e in spec.elements])
        if len(targets) == 0:
            return np.zeros(len(ball), dtype=bool)
        return _match_any_mask(ball.flat, targets, EPS_DUP)
    raise ValueError(f"unknown spec kind {spec.kind}")


def is_member(group: MarkedGroup, spec: SubgroupSpec, e: GroupElement) -> bool:
    """Does the element belong to the subgroup described by spec?"""
    if spec.kind == "whole-group":
        return True
    if spec.kind == "character-kernel":
        if spec.character not in group.characters:
            raise UnknownCharacter(spec.character)
        img = np.array([e.char(spec.character)], dtype=np.int64)
        return bool(_lattice_member_mask(img, spec.basis)[0])
    if spec.kind == "cyclic":
        flats = _cyclic_power_flats(group, spec)
        diff = flats - np.array(e.matrix.entries())
        return bool((np.einsum("ij,ij->i", diff, diff) < EPS_DUP * EPS_DUP).any())
    if spec.kind == "word-list":
        return any(e.matrix.distance_to(t.matrix) < EPS_DUP for t in spec.elements)
    raise ValueError(f"unknown spec kind {spec.kind}")
