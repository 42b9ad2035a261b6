import itertools
import math

import numpy as np
import pytest

from limitlab.errors import (
    CirclesOverlap,
    ConstructionFailed,
    DepthExceeded,
    UnknownCharacter,
)
from limitlab.groups import (
    GroupElement,
    MarkedGroup,
    SubgroupSpec,
    build_genus2_group,
    build_schottky_group,
    concat_words,
    disc_isometric_circle,
    enumerate_ball,
    invert_word,
    is_member,
    member_mask,
    reduce_word,
)
from limitlab.hyperbolic import IDENTITY, Mobius, classify_isometry, compose


@pytest.fixture(scope="module")
def genus2():
    return build_genus2_group()


@pytest.fixture(scope="module")
def schottky():
    return build_schottky_group(3.0)


class TestWords:
    def test_reduce(self):
        assert reduce_word((1, -1)) == ()
        assert reduce_word((1, 2, -2, -1, 3)) == (3,)
        assert reduce_word((1, 1, -1, 2)) == (1, 2)

    def test_invert(self):
        assert invert_word((1, -2, 3)) == (-3, 2, -1)

    def test_concat_reduces(self):
        assert concat_words((1, 2), (-2, -1)) == ()


class TestGenus2Builder:
    def test_relator_defect(self, genus2):
        # oracle: direct multiplication of the eight side-pairing matrices
        m = IDENTITY
        for s in genus2.relator:
            g = genus2.generators[abs(s) - 1][1]
            m = compose(m, g if s > 0 else g.inverse())
        assert m.distance_to(IDENTITY) < 1e-8

    def test_generators_loxodromic(self, genus2):
        for name, m in genus2.generators:
            cls = classify_isometry(m)
            assert cls.tag == "loxodromic"
            assert abs(m.trace) > 2.0

    def test_equal_translation_lengths(self, genus2):
        # all octagon side pairings are conjugate translations
        lengths = [classify_isometry(m).translation_length for _, m in genus2.generators]
        assert max(lengths) - min(lengths) < 1e-9
        assert abs(lengths[0] - 2.0 * math.acosh((2.0 + math.sqrt(2.0)) / 2.0)) < 1e-9

    def test_grid_character_examples(self, genus2):
        assert genus2.character_image("grid", (1, 2, -1)) == (0, 0)
        assert genus2.character_image("grid", (1, 1, -3)) == (2, -1)
        assert genus2.character_image("grid", (1, 2, -1, -2)) == (0, 0)

    def test_ab4_kills_relator(self, genus2):
        assert genus2.character_image("ab4", genus2.relator) == (0, 0, 0, 0)

    def test_unknown_character(self, genus2):
        with pytest.raises(UnknownCharacter):
            genus2.character_image("nope", (1,))


class TestSchottkyBuilder:
    def test_circles_disjoint_oracle(self, schottky):
        # oracle: recompute the four isometric circles and check disjointness
        mats = []
        for _, m in schottky.generators:
            mats.extend([m, m.inverse()])
        circles = [disc_isometric_circle(m) for m in mats]
        assert all(c is not None for c in circles)
        for (c1, r1), (c2, r2) in itertools.combinations(circles, 2):
            assert abs(c1 - c2) > r1 + r2

    def test_too_small_separation(self):
        with pytest.raises(CirclesOverlap):
            build_schottky_group(2.0)
        # threshold is 1 + sqrt(2)
        with pytest.raises(CirclesOverlap):
            build_schottky_group(2.41)
        build_schottky_group(2.5)

    def test_ab2_character(self, schottky):
        assert schottky.character_image("ab2", (1, 2, -1)) == (0, 1)

    def test_generator_axes(self, schottky):
        from limitlab.hyperbolic import axis_of

        ax1 = axis_of(schottky.generator("g1"))
        assert ax1.start.value == 0.0 and ax1.end.is_infinity
        ax2 = axis_of(schottky.generator("g2"))
        assert abs(ax2.start.value + 1.0) < 1e-12 and abs(ax2.end.value - 1.0) < 1e-12


class TestValidation:
    def test_elliptic_generator_rejected(self):
        rot = Mobius(math.cos(0.3), math.sin(0.3), -math.sin(0.3), math.cos(0.3))
        with pytest.raises(ConstructionFailed):
            MarkedGroup([("r", rot)])

    def test_bad_relator_rejected(self, genus2):
        gens = [(n, m) for n, m in genus2.generators]
        with pytest.raises(ConstructionFailed):
            MarkedGroup(gens, relator=(1, 2))

    def test_character_must_kill_relator(self):
        # b is literally a^-1, so (1, 2) is a valid relator; a character
        # with image (1, 0) fails to kill it and must be rejected
        a = Mobius(2.0, 0.0, 0.0, 0.5)
        gens = [("a", a), ("b", a.inverse())]
        MarkedGroup(gens, relator=(1, 2), characters={"ok": [(1,), (-1,)]})
        with pytest.raises(ConstructionFailed):
            MarkedGroup(gens, relator=(1, 2), characters={"bad": [(1,), (0,)]})


class TestEnumerateBall:
    def test_depth_zero(self, schottky):
        ball = enumerate_ball(schottky, 0)
        assert len(ball) == 1
        assert ball[0].word == ()
        assert ball[0].matrix.distance_to(IDENTITY) == 0.0

    def test_schottky_free_counts(self, schottky):
        for d in range(1, 7):
            ball = enumerate_ball(schottky, d)
            assert len(ball) == 1 + sum(4 * 3 ** (k - 1) for k in range(1, d + 1))

    def test_genus2_depth2_matches_pairwise_oracle(self, genus2):
        # oracle: generate every freely reduced word of length <= 2 and
        # count distinct matrices by pairwise comparison
        letters = [1, -1, 2, -2, 3, -3, 4, -4]
        words = [()]
        words += [(l,) for l in letters]
        words += [
            (l1, l2) for l1 in letters for l2 in letters if l2 != -l1
        ]
        mats = [genus2.evaluate(w) for w in words]
        distinct = []
        for m in mats:
            if all(m.distance_to(o) > 1e-6 for o in distinct):
                distinct.append(m)
        assert len(distinct) == 65  # free count: relator bites only later
        ball = enumerate_ball(genus2, 2)
        assert len(ball) == len(distinct)

    def test_genus2_first_coincidences_at_depth4(self, genus2):
        # [a1,b1] = [b2,a2] forces exactly 8 merges among length-4 words
        assert len(enumerate_ball(genus2, 3)) == 457  # free: 1+8+56+392
        assert len(enumerate_ball(genus2, 4)) == 3193  # 3201 free - 8

    def test_ball_ordering(self, genus2):
        ball = enumerate_ball(genus2, 3)
        lengths = [ball.lengths[i] for i in range(len(ball))]
        assert lengths == sorted(lengths)
        # within a length class, words are lexicographic in letter codes
        for ln in (1, 2, 3):
            idx = [i for i in range(len(ball)) if ball.lengths[i] == ln]
            codes = [tuple(ball.words[i, :ln]) for i in idx]
            assert codes == sorted(codes)

    def test_monotone_nesting(self, schottky):
        b3 = enumerate_ball(schottky, 3)
        b4 = enumerate_ball(schottky, 4)
        keys3 = {tuple(np.round(r / 1e-6).astype(np.int64)) for r in b3.flat}
        keys4 = {tuple(np.round(r / 1e-6).astype(np.int64)) for r in b4.flat}
        assert keys3 <= keys4

    def test_element_matrix_matches_word(self, genus2):
        ball = enumerate_ball(genus2, 4)
        rng = np.random.default_rng(2)
        for idx in rng.integers(0, len(ball), 60):
            e = ball[int(idx)]
            recomputed = genus2.evaluate(e.word)
            scale = max(1.0, max(abs(v) for v in recomputed.entries()))
            assert e.matrix.distance_to(recomputed) < 1e-9 * max(1, len(e.word)) * scale

    def test_character_images_match_word(self, genus2):
        ball = enumerate_ball(genus2, 4)
        rng = np.random.default_rng(4)
        for idx in rng.integers(0, len(ball), 60):
            e = ball[int(idx)]
            for name in ("ab4", "grid"):
                assert e.char(name) == genus2.character_image(name, e.word)

    def test_depth_cap(self, schottky):
        with pytest.raises(DepthExceeded):
            enumerate_ball(schottky, 15)

    def test_max_elements_guard(self, schottky):
        with pytest.raises(DepthExceeded):
            enumerate_ball(schottky, 6, max_elements=100)

    def test_env_cap(self, schottky, monkeypatch):
        monkeypatch.setenv("LIMITLAB_MAX_DEPTH", "3")
        with pytest.raises(DepthExceeded):
            enumerate_ball(schottky, 4)
        monkeypatch.delenv("LIMITLAB_MAX_DEPTH")

    def test_dedup_margin_depth8(self, genus2, schottky):
        # the dedup safety floor: distinct elements stay far apart
        bs = enumerate_ball(schottky, 8)
        assert bs.dedup_margin > 100 * 1e-6
        # genus-2 at depth 6 here; depth 8 is covered by the acceptance suite
        bg = enumerate_ball(genus2, 6)
        assert bg.dedup_margin > 100 * 1e-6

    def test_purely_loxodromic_depth6(self, genus2):
        ball = enumerate_ball(genus2, 6)
        traces = np.abs(ball.traces())
        assert (traces[1:] > 2.0).all()  # every nonidentity element loxodromic


class TestCharacterLaw:
    def test_homomorphism_property(self, genus2):
        rng = np.random.default_rng(8)
        letters = [1, -1, 2, -2, 3, -3, 4, -4]
        for _ in range(1000):
            v = reduce_word(rng.choice(letters, size=rng.integers(0, 6)))
            w = reduce_word(rng.choice(letters, size=rng.integers(0, 6)))
            for name in ("ab4", "grid"):
                iv = genus2.character_image(name, v)
                iw = genus2.character_image(name, w)
                ivw = genus2.character_image(name, concat_words(v, w))
                assert ivw == tuple(a + b for a, b in zip(iv, iw))


class TestMembership:
    def test_commutator_in_ab4_kernel(self, genus2):
        e = genus2.element((1, 2, -1, -2))
        spec = SubgroupSpec.character_kernel("ab4")
        assert is_member(genus2, spec, e)
        assert not is_member(genus2, spec, genus2.element((1,)))

    def test_grid_sublattice(self, genus2):
        spec = SubgroupSpec.character_kernel("grid", basis=[(1, 0)])
        assert is_member(genus2, spec, genus2.element((1,)))  # h(a1) = (1,0)
        assert not is_member(genus2, spec, genus2.element((3,)))  # h(a2) = (0,1)

    def test_grid_3z_z(self, genus2):
        spec = SubgroupSpec.character_kernel("grid", basis=[(3, 0), (0, 1)])
        assert is_member(genus2, spec, genus2.element((1, 1, 1)))
        assert not is_member(genus2, spec, genus2.element((1,)))
        assert is_member(genus2, spec, genus2.element((3,)))

    def test_cyclic(self, genus2):
        a1 = genus2.element_from_name("a1")
        spec = SubgroupSpec.cyclic(a1)
        assert is_member(genus2, spec, genus2.element((1, 1, 1)))
        assert is_member(genus2, spec, genus2.identity_element())
        assert not is_member(genus2, spec, genus2.element((2,)))

    def test_word_list(self, genus2):
        spec = SubgroupSpec.word_list([genus2.element((1,)), genus2.element((2,))])
        assert is_member(genus2, spec, genus2.element((1,)))
        assert not is_member(genus2, spec, genus2.element((3,)))

    def test_whole_group(self, genus2):
        assert is_member(genus2, SubgroupSpec.whole_group(), genus2.element((1,)))

    def test_mask_matches_scalar(self, genus2):
        ball = enumerate_ball(genus2, 3)
        specs = [
            SubgroupSpec.character_kernel("ab4"),
            SubgroupSpec.character_kernel("grid", basis=[(3, 0), (0, 1)]),
            SubgroupSpec.cyclic(genus2.element_from_name("a1")),
        ]
        rng = np.random.default_rng(6)
        idxs = rng.integers(0, len(ball), 40)
        for spec in specs:
            mask = member_mask(genus2, spec, ball)
            for i in idxs:
                assert mask[int(i)] == is_member(genus2, spec, ball[int(i)])

    def test_dependent_basis_rejected(self):
        with pytest.raises(ValueError):
            SubgroupSpec.character_kernel("grid", basis=[(1, 0), (2, 0)])


class TestSerialization:
    def test_round_trip(self, genus2):
        doc = genus2.to_json()
        back = MarkedGroup.from_json(doc)
        assert back.relator == genus2.relator
        assert back.characters == genus2.characters
        for (n1, m1), (n2, m2) in zip(genus2.generators, back.generators):
            assert n1 == n2
            assert m1.entries() == m2.entries()  # bit-exact float round trip

    def test_round_trip_schottky(self, schottky):
        back = MarkedGroup.from_json(schottky.to_json())
        assert back.label == schottky.label
        for (_, m1), (_, m2) in zip(schottky.generators, back.generators):
            assert m1.entries() == m2.entries()
