"""End-to-end acceptance checks; a PASS/FAIL line per criterion is printed in the summary."""

import itertools
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from bystander.abcnn import (
    AdaptedWeights,
    ClassDistribution,
    LabeledDataset,
    MicroNetwork,
    TrainConfig,
    adapted_weights,
    average_accuracy,
    compute_distribution,
    exact_fraction_data,
    gradient_check_details,
    mean_accuracy,
    per_attribute_accuracy,
    train,
)
from bystander.attributes import (
    AttributeSchema,
    AttributeVector,
    attribute_diff,
    inner_product,
    matches,
)
from bystander.facegeom import EyePair, FaceRegion, Image, blur_region, blur_square_from_eyes
from bystander.harness import false_protection_rate, realize, run_scenario
from bystander.harness.builders import (
    DEFAULT_PREVALENCE,
    build_sweep_batch,
    distinct_profiles,
    random_profiles,
    three_person_scenario,
)
from bystander.harness.cli import main as cli_main
from bystander.harness.metrics import threshold_sweep
from bystander.harness.scenario import Seeds, scenario_to_dict
from bystander.protocol import Always, Never, WithProbability
from bystander.target_filter import DetectedFace, FilterVerdict, filter_targets

from test_attributes import WORKED_FIRST, WORKED_SECOND
from test_facegeom import direct_blur


def hamming(a, b):
    return sum(x != y for x, y in zip(a, b))


@pytest.mark.criterion(1, "attribute difference equals brute-force Hamming distance")
def test_diff_is_hamming():
    start = time.perf_counter()
    schema8 = AttributeSchema.generic(8)
    vecs = [AttributeVector(schema8, v) for v in itertools.product((-1, 1), repeat=8)]
    mismatches = 0
    evaluated = 0
    for a, b in itertools.product(vecs, vecs):
        # every ordered pair, with the function called in both argument orders
        expected = hamming(a.values, b.values)
        mismatches += (attribute_diff(a, b) != expected) + (attribute_diff(b, a) != expected)
        evaluated += 2
    assert evaluated == 2 * 4**8

    schema16 = AttributeSchema.generic(16)
    rng = np.random.default_rng(2024)
    draws = rng.choice([-1, 1], size=(10_000, 2, 16))
    for va, vb in draws:
        a = AttributeVector(schema16, tuple(va.tolist()))
        b = AttributeVector(schema16, tuple(vb.tolist()))
        mismatches += attribute_diff(a, b) != hamming(va, vb)
    assert mismatches == 0
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion(2, "worked pair of classified photos")
def test_worked_pair():
    assert inner_product(WORKED_FIRST, WORKED_SECOND) == 10
    assert attribute_diff(WORKED_FIRST, WORKED_SECOND) == 3
    assert not matches(WORKED_FIRST, WORKED_SECOND, 1)
    assert matches(WORKED_FIRST, WORKED_SECOND, 3)


@pytest.mark.criterion(3, "adapted weight identities")
def test_weight_identities():
    rng = np.random.default_rng(0)
    d = ClassDistribution.from_positive(rng.uniform(0.01, 0.99, 16))
    w = adapted_weights(d, d)
    assert np.all(w.w_pos == 1.0) and np.all(w.w_neg == 1.0)

    w = adapted_weights(ClassDistribution.from_positive([0.2]), ClassDistribution.from_positive([0.5]))
    assert abs(w.w_pos[0] - 10 / 7) < 1e-9 and abs(w.w_neg[0] - 10 / 13) < 1e-9
    assert abs(w.w_pos[0] - 1.428571) < 1e-6 and abs(w.w_neg[0] - 0.769231) < 1e-6

    w = adapted_weights(ClassDistribution.from_positive([0.9]), ClassDistribution.from_positive([0.5]))
    assert abs(w.w_pos[0] - 5 / 7) < 1e-9 and abs(w.w_neg[0] - 5 / 3) < 1e-9
    assert abs(w.w_pos[0] - 0.714286) < 1e-6 and abs(w.w_neg[0] - 1.666667) < 1e-6


@pytest.mark.criterion(4, "backpropagation matches central differences on 20 networks")
def test_gradient_check_twenty_networks():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 41))
        h1, h2 = (int(x) for x in rng.integers(2, 49, size=2))
        n = int(rng.integers(1, 18))
        net = MicroNetwork.initialize((d, h1, h2, n), seed=rng)
        for b in net.biases:
            b[:] = rng.uniform(-0.1, 0.1, b.shape)
        assert net.n_parameters <= 10_000
        sample = (rng.normal(size=d), rng.choice([-1, 1], size=n))
        weights = AdaptedWeights(rng.uniform(0.2, 1.8, n), rng.uniform(0.2, 1.8, n))
        res = gradient_check_details(net, sample, weights, step=1e-4)
        assert res.checked >= 0.9 * net.n_parameters
        worst = max(worst, res.max_relative_error)
    assert worst < 1e-4, worst
    assert time.perf_counter() - start < 30.0


@pytest.mark.criterion(5, "adapted weights beat unit weights on a balanced test set")
def test_balancing_property():
    start = time.perf_counter()
    adapted, unit = [], []
    for seed in range(10):
        trainset = exact_fraction_data(1000, [0.9, 0.9], separation=1.0, seed=seed)
        testset = exact_fraction_data(2000, [0.5, 0.5], separation=1.0, seed=1000 + seed)
        net = MicroNetwork.initialize((4, 8, 2), seed=seed)
        cfg = TrainConfig(batch_size=32, initial_lr=0.002, epochs=40, decay_every_epochs=10, rng_seed=seed)
        model_a, _ = train(net, trainset, ClassDistribution.balanced(2), cfg)
        # target = training distribution gives weight 1 everywhere
        model_u, _ = train(net, trainset, compute_distribution(trainset), cfg)
        adapted.append(average_accuracy(model_a, testset))
        unit.append(average_accuracy(model_u, testset))
    print(f"adapted {np.mean(adapted):.4f} vs unit {np.mean(unit):.4f}")
    assert np.mean(adapted) >= np.mean(unit)
    assert time.perf_counter() - start < 300.0


@pytest.mark.criterion(6, "average accuracy is the mean of per-attribute accuracies")
def test_accuracy_identities():
    rng = np.random.default_rng(6)
    data = LabeledDataset(rng.normal(size=(300, 5)), rng.choice([-1, 1], size=(300, 4)))
    net = MicroNetwork.initialize((5, 7, 4), seed=1)
    per = per_attribute_accuracy(net, data)
    assert average_accuracy(net, data) == float(np.mean(per)) == mean_accuracy(per)

    x = rng.normal(size=(100, 3))
    perfect = MicroNetwork((3, 3), [np.eye(3)], [np.zeros(3)])
    truth = LabeledDataset(x, np.where(x > 0, 1, -1))
    assert np.all(per_attribute_accuracy(perfect, truth) == 1.0)
    assert average_accuracy(perfect, truth) == 1.0


@pytest.mark.criterion(7, "blur square geometry and region-confined separable blur")
def test_blur_geometry():
    region = blur_square_from_eyes(EyePair((100, 100), (150, 100)))
    assert region.center == (125.0, 100.0)
    assert region.side == 120.0

    rng = np.random.default_rng(7)
    for _ in range(50):
        w, h = int(rng.integers(16, 120)), int(rng.integers(16, 120))
        img = Image(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
        eyes_x = rng.uniform(-10, w + 10)
        eyes_y = rng.uniform(-10, h + 10)
        d = rng.uniform(2, 25)
        sq = blur_square_from_eyes(EyePair((eyes_x, eyes_y), (eyes_x + d, eyes_y)))
        out = blur_region(img, sq)
        x0, y0, x1, y1 = sq.pixel_box(w, h)
        outside = np.ones((h, w), dtype=bool)
        outside[y0:y1, x0:x1] = False
        assert out.pixels[outside].tobytes() == img.pixels[outside].tobytes()

    for _ in range(10):
        w, h = int(rng.integers(10, 40)), int(rng.integers(10, 40))
        img = Image(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
        sq = FaceRegion((rng.uniform(0, w), rng.uniform(0, h)), rng.uniform(3, 20))
        sigma = rng.uniform(0.5, 3.0)
        ours = blur_region(img, sq, sigma).pixels.astype(int)
        oracle = direct_blur(img.pixels, sq.pixel_box(w, h), sigma).astype(int)
        assert np.abs(ours - oracle).max() <= 1


def _face(id, cx, side, smiling=False):
    d = side / 2.4
    return DetectedFace.from_eyes(id, EyePair((cx - d / 2, 200), (cx + d / 2, 200)), WORKED_FIRST, smiling)


@pytest.mark.criterion(8, "target filter needs two of three rules")
def test_target_filter_truth_table():
    for s, z, c in itertools.product([False, True], repeat=3):
        assert FilterVerdict("f", s, z, c).is_target == (s + z + c >= 2)

    # a large face at the edge, not smiling: only the size rule holds
    faces = [_face("edge", 40, 100), _face("middle", 320, 60, smiling=True)]
    verdicts = {v.face_id: v for v in filter_targets(faces, 640)}
    edge = verdicts["edge"]
    assert (edge.rule_smiling, edge.rule_size, edge.rule_central) == (False, True, False)
    assert not edge.is_target
    assert verdicts["middle"].is_target


@pytest.mark.criterion(9, "one requesting stranger is blurred, target and others untouched")
def test_protocol_end_to_end():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        target, s1, s2 = distinct_profiles(3, rng, 2)
        asker = int(rng.integers(2))
        policies = [Never(), Never()]
        policies[asker] = Always()
        scenario = three_person_scenario(
            target, [(s1, policies[0]), (s2, policies[1])], seeds=Seeds.single(seed),
            latency_ms=int(rng.integers(1, 200)),
        )
        setup, _, _ = realize(scenario)
        [(report, truth)] = run_scenario(scenario)
        expected = f"stranger{asker + 1}"
        assert report.blurred_faces == {expected}
        regions = {f.id: f.region for f in setup.faces}
        for face_id, region in regions.items():
            x0, y0, x1, y1 = region.pixel_box(setup.photo.width, setup.photo.height)
            changed = not np.array_equal(report.output.pixels[y0:y1, x0:x1], setup.photo.pixels[y0:y1, x0:x1])
            assert changed == (face_id == expected)

    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        target, s1, s2 = distinct_profiles(3, rng, 2)
        scenario = three_person_scenario(
            target, [(s1, WithProbability(0.0)), (s2, Never())], seeds=Seeds.single(seed)
        )
        [(report, _)] = run_scenario(scenario)
        assert report.plan == []
        assert report.output == realize(scenario)[0].photo


@pytest.mark.criterion(10, "false protection grows with the number of nearby requesters")
def test_false_protection_trend():
    counts = (1, 3, 5, 10)
    per_point = {k: ([], []) for k in counts}
    for s in range(200):
        rng = np.random.default_rng([10, s])
        target, s1, s2 = random_profiles(3, rng, DEFAULT_PREVALENCE)
        pool = random_profiles(max(counts), rng, DEFAULT_PREVALENCE)
        for k in counts:
            # the first k of one draw, so larger crowds contain the smaller ones
            scenario = three_person_scenario(
                target, [(s1, Never()), (s2, Never())], nearby=pool[:k], seeds=Seeds.single(s), name=f"fp{k}"
            )
            [(report, truth)] = run_scenario(scenario)
            per_point[k][0].append(report)
            per_point[k][1].append(truth)
    rates = [false_protection_rate(*per_point[k]) for k in counts]
    print("false protection:", ", ".join(f"{k}: {float(r):.3f}" for k, r in zip(counts, rates)))
    assert all(a <= b for a, b in zip(rates, rates[1:]))
    assert rates[-1] > rates[0]


@pytest.mark.criterion(11, "threshold sweep counts are nondecreasing")
def test_threshold_sweep_monotone():
    for seed in range(5):
        rows = threshold_sweep(build_sweep_batch(50, seed=seed), [0, 1, 2])
        assert all(r.same_trials == 50 and r.different_trials == 50 for r in rows)
        for lo, hi in zip(rows, rows[1:]):
            assert hi.true_positives >= lo.true_positives
            assert hi.false_positives >= lo.false_positives


@pytest.mark.criterion(12, "simulate is byte-for-byte reproducible")
def test_simulate_deterministic(tmp_path, capsys):
    rng = np.random.default_rng(12)
    target, s1, s2 = random_profiles(3, rng, 0.5)
    noisy = three_person_scenario(
        target, [(s1, WithProbability(0.5)), (s2, Always())], nearby=random_profiles(4, rng, DEFAULT_PREVALENCE),
        nearby_policy=WithProbability(0.5), flips=1, sessions=8, seeds=Seeds(3, 4, 5), name="noisy",
    )
    doc = scenario_to_dict(noisy)
    doc["network"] = {"latency_ms": [1, 700], "drop_probability": 0.2}
    generated = tmp_path / "noisy.yaml"
    generated.write_text(yaml.safe_dump(doc))

    examples = Path(__file__).resolve().parent.parent / "scenarios"
    for scenario in (examples / "demo.yaml", generated):
        outs = []
        for run in range(2):
            out = tmp_path / f"{scenario.stem}-{run}"
            assert cli_main(["simulate", "--scenario", str(scenario), "--out", str(out), "--seed", "42"]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outs[0] == outs[1]
        assert "report.json" in outs[0]
    capsys.readouterr()
