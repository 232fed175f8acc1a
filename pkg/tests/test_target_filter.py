import itertools
import random

import pytest

from bystander.attributes import decode
from bystander.facegeom import EyePair, FaceRegion
from bystander.target_filter import (
    DetectedFace,
    FilterVerdict,
    filter_targets,
    rule_central,
    rule_size,
    rule_smiling,
)

ANY = decode("+" * 8 + "-" * 8)


def face(id, cx, side, smiling=False, cy=100.0):
    d = side / 2.4
    return DetectedFace.from_eyes(id, EyePair((cx - d / 2, cy), (cx + d / 2, cy)), ANY, smiling)


class TestRules:
    def test_smiling(self):
        assert rule_smiling(face("a", 10, 50, smiling=True))
        assert not rule_smiling(face("a", 10, 50))

    @pytest.mark.parametrize("side,expected", [(100, True), (92, True), (90, True), (89.9, False), (85, False)])
    def test_size_against_largest_100(self, side, expected):
        assert rule_size(face("a", 10, side), 100.0) is expected

    def test_size_needs_positive_largest(self):
        with pytest.raises(ValueError):
            rule_size(face("a", 10, 50), 0.0)

    def test_central_uses_eye_midpoint(self):
        assert rule_central(face("a", 150, 40), 300)
        assert not rule_central(face("a", 99, 40), 300)
        assert rule_central(face("a", 100, 40), 300)

    def test_region_must_match_eyes(self):
        eyes = EyePair((0, 0), (10, 0))
        with pytest.raises(ValueError):
            DetectedFace("x", FaceRegion((5.0, 0.0), 30.0), eyes, ANY)


class TestVerdicts:
    @pytest.mark.parametrize("s,z,c", list(itertools.product([False, True], repeat=3)))
    def test_truth_table(self, s, z, c):
        v = FilterVerdict("f", s, z, c)
        assert v.rules_met == s + z + c
        assert v.is_target is (s + z + c >= 2)

    @pytest.mark.parametrize("s,z,c", list(itertools.product([False, True], repeat=3)))
    def test_truth_table_through_geometry(self, s, z, c):
        # reference face is large, central-excluded, not smiling: a stranger on its own
        ref = face("ref", 20, 100)
        probe = face("p", 320 if c else 600, 100 if z else 50, smiling=s)
        verdicts = {v.face_id: v for v in filter_targets([ref, probe], 640)}
        assert (verdicts["p"].rule_smiling, verdicts["p"].rule_size, verdicts["p"].rule_central) == (s, z, c)
        assert verdicts["p"].is_target is (s + z + c >= 2)

    def test_smiling_central_small_face_among_larger(self):
        # the photographer's subject smiles in the middle, a bigger stranger stands off to the side
        faces = [face("subject", 320, 80, smiling=True), face("stranger", 580, 100)]
        out = {v.face_id: v.is_target for v in filter_targets(faces, 640)}
        assert out == {"subject": True, "stranger": False}

    def test_two_large_central_faces(self):
        faces = [face("a", 300, 100), face("b", 340, 95)]
        assert [v.is_target for v in filter_targets(faces, 640)] == [True, True]

    def test_lone_face_is_size_target(self):
        [v] = filter_targets([face("only", 10, 30)], 640)
        assert v.rule_size and not v.rule_central and not v.is_target

    def test_empty(self):
        assert filter_targets([], 640) == []

    def test_permutation_invariant(self):
        rng = random.Random(3)
        faces = [face(i, rng.uniform(0, 640), rng.uniform(20, 120), rng.random() < 0.5) for i in range(6)]
        base = {v.face_id: v for v in filter_targets(faces, 640)}
        for _ in range(10):
            rng.shuffle(faces)
            assert {v.face_id: v for v in filter_targets(faces, 640)} == base

    def test_adding_smile_never_demotes(self):
        rng = random.Random(8)
        for _ in range(50):
            faces = [face(i, rng.uniform(0, 640), rng.uniform(20, 120), rng.random() < 0.5) for i in range(4)]
            before = filter_targets(faces, 640)
            k = rng.randrange(4)
            f = faces[k]
            faces[k] = DetectedFace(f.id, f.region, f.eyes, f.predicted, True)
            after = filter_targets(faces, 640)
            assert not before[k].is_target or after[k].is_target
