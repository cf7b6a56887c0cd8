"""Acceptance suite: one test per primary criterion, each printing a
pass/fail line (run with ``pytest -s tests/test_acceptance.py`` to see them).

The reference benchmark instance is dim 64, latent 8, separation 2.0, noise
0.05, 2000 samples per class, seed 7, split 80/20. Training uses the
default learning rate (2e-4) and batch size (256) with 50 alternation
rounds; the default 10-round schedule leaves the probe threshold
uncalibrated at this scale (ranking converges long before the 0.5
crossing), so the longer schedule is set through the public config.
"""

import contextlib
import io
import math
import time

import numpy as np
import pytest

from attribspace.acm import attribution_deviation
from attribspace.cli import main as cli_main
from attribspace.detector import TrainConfig, predict, train
from attribspace.errors import UndefinedMetricError
from attribspace.metrics import accuracy_suite, average_precision, separability
from attribspace.nn import Activation, Layer, Mlp
from attribspace.rng import Rng
from attribspace.store import (
    AttributionSource,
    Checkpoint,
    FeatureDataset,
    Selector,
    load_checkpoint,
    load_features,
    save_checkpoint,
    save_features,
    split,
)
from attribspace.synthbench import SynthSpec, generate

from gradcheck import (
    classification_loss_case,
    deviation_loss_case,
    max_relative_error,
    sample_clean_case,
)
from oracles import ap_oracle, separability_oracle, suite_oracle

REFERENCE_SPEC = SynthSpec(
    dim=64, latent_dim=8, n_per_class=2000, separation=2.0, noise_sigma=0.05, seed=7
)
SPLIT_FRACTION = 0.8
SPLIT_SEED = 7
ACCEPTANCE_ROUNDS = 50


def report(name: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


def reference_config(selector: Selector, seed: int = 7, **overrides) -> TrainConfig:
    kwargs = dict(source=AttributionSource(selector), seed=seed, rounds=ACCEPTANCE_ROUNDS)
    kwargs.update(overrides)
    return TrainConfig(**kwargs)


@pytest.fixture(scope="module")
def reference_split():
    dataset = generate(REFERENCE_SPEC)
    return split(dataset, SPLIT_FRACTION, SPLIT_SEED)


@pytest.fixture(scope="module")
def model_real(reference_split):
    train_pool, _ = reference_split
    start = time.time()
    result = train(train_pool, reference_config(Selector.REAL_ONLY))
    return result.model, time.time() - start


@pytest.fixture(scope="module")
def model_generated(reference_split):
    train_pool, _ = reference_split
    result = train(train_pool, reference_config(Selector.GENERATED_ONLY))
    return result.model


def test_gradient_correctness():
    """Analytic gradients of both training losses vs central differences."""
    start = time.time()
    rng = np.random.default_rng(20240717)
    worst = 0.0
    for _ in range(100):
        for make_case in (deviation_loss_case, classification_loss_case):
            loss_fn, analytic, layers = sample_clean_case(make_case, rng)
            worst = max(worst, max_relative_error(loss_fn, analytic, layers))
    elapsed = time.time() - start
    report(
        "gradient-correctness",
        worst < 1e-4 and elapsed < 60.0,
        f"100 networks x 2 losses, max relative error {worst:.3e} (tol 1e-4), "
        f"{elapsed:.1f}s (< 60s)",
    )


def _score_patterns(n: int):
    yield [round(0.9 - 0.8 * i / max(n - 1, 1), 6) for i in range(n)]  # descending
    yield [0.5] * n  # fully tied
    yield [0.8 if i % 2 == 0 else 0.3 for i in range(n)]  # two tie groups


def test_metric_oracle_equivalence():
    checked = 0
    for n in range(1, 9):  # exhaustive label patterns of size <= 8
        for bits in range(2**n):
            labels = [(bits >> i) & 1 for i in range(n)]
            for scores in _score_patterns(n):
                want = suite_oracle(scores, labels)
                got = accuracy_suite(scores, labels)
                assert got.acc == want["acc"] and got.f1 == want["f1"]
                assert got.real_acc == want["real_acc"] and got.fake_acc == want["fake_acc"]
                if sum(labels):
                    assert average_precision(scores, labels) == ap_oracle(scores, labels)
                else:
                    with pytest.raises(UndefinedMetricError):
                        average_precision(scores, labels)
                checked += 1

    rng = np.random.default_rng(7)
    grid = np.round(np.linspace(0.0, 1.0, 9), 3)
    sep_worst = 0.0
    for _ in range(1000):  # randomized cases for all three operations
        n = int(rng.integers(1, 50))
        scores = rng.choice(grid, size=n).tolist()
        labels = rng.integers(0, 2, size=n).tolist()
        want = suite_oracle(scores, labels)
        got = accuracy_suite(scores, labels)
        assert got.acc == want["acc"] and got.f1 == want["f1"]
        if sum(labels):
            assert average_precision(scores, labels) == ap_oracle(scores, labels)

        fr = rng.normal(size=(int(rng.integers(1, 7)), 4))
        fg = rng.normal(size=(int(rng.integers(2, 7)), 4)) + rng.normal()
        got_sep = separability(fr, fg)
        want_sep = separability_oracle(fr, fg)
        for a, b in (
            (got_sep.inter_class_distance, want_sep["inter_class_distance"]),
            (got_sep.intra_class_variance["real"], want_sep["intra_r"]),
            (got_sep.intra_class_variance["generated"], want_sep["intra_g"]),
            (got_sep.fisher_ratio, want_sep["fisher_ratio"]),
        ):
            sep_worst = max(sep_worst, abs(a - b) / max(1.0, abs(b)))
    report(
        "metric-oracle-equivalence",
        sep_worst <= 1e-12,
        f"{checked} exhaustive + 1000 randomized cases exact for AP/ACC/F1; "
        f"separability worst relative gap {sep_worst:.2e} (tol 1e-12)",
    )


def test_deviation_amplification(reference_split, model_real):
    model, train_seconds = model_real
    start = time.time()
    _, held_out = reference_split
    features = held_out.matrix()
    deviations = attribution_deviation(model.acm, features)
    mask_real = held_out.labels == 0

    same = deviations[mask_real].sum(axis=1).mean()
    opposite = deviations[~mask_real].sum(axis=1).mean()
    ratio = opposite / same

    raw_fisher = separability(features[mask_real], features[~mask_real]).fisher_ratio
    dev_fisher = separability(deviations[mask_real], deviations[~mask_real]).fisher_ratio
    amplification = dev_fisher / raw_fisher
    elapsed = train_seconds + (time.time() - start)
    report(
        "deviation-amplification",
        ratio >= 3.0 and amplification >= 2.0 and elapsed < 300.0,
        f"held-out deviation L1 opposite/same {ratio:.2f} (>= 3), Fisher ratio "
        f"amplification {amplification:.2f} (>= 2), {elapsed:.0f}s (< 300s)",
    )


def test_end_to_end_detection(reference_split, model_real, model_generated):
    _, held_out = reference_split
    features = held_out.matrix()
    outcomes = {}
    for name, model in (("real-only", model_real[0]), ("generated-only", model_generated)):
        rep = accuracy_suite(predict(model, features), held_out.labels)
        outcomes[name] = (rep.acc, rep.ap)
    ok = all(acc >= 0.95 and ap >= 0.98 for acc, ap in outcomes.values())
    detail = ", ".join(
        f"{name}: ACC {acc:.4f} (>= 0.95), AP {ap:.4f} (>= 0.98)"
        for name, (acc, ap) in outcomes.items()
    )
    report("end-to-end-detection", ok, detail)


def test_indistinguishability_control():
    spec = SynthSpec(
        dim=64, latent_dim=8, n_per_class=2000, separation=0.0, noise_sigma=0.05,
        seed=7, shared_embedding=True,
    )
    train_pool, held_out = split(generate(spec), SPLIT_FRACTION, SPLIT_SEED)
    result = train(train_pool, reference_config(Selector.REAL_ONLY))
    acc = accuracy_suite(predict(result.model, held_out.matrix()), held_out.labels).acc
    report(
        "indistinguishability-control",
        0.45 <= acc <= 0.55,
        f"held-out ACC {acc:.4f} on identical-class data (must sit in 0.5 +- 0.05)",
    )


def test_limited_data(reference_split, model_real):
    train_pool, held_out = reference_split
    acc_full = accuracy_suite(
        predict(model_real[0], held_out.matrix()), held_out.labels
    ).acc

    fraction = 0.1
    cell_train, _ = split(train_pool, fraction, 3)
    # Same equalization the sweep command applies: constant probe steps.
    batch = 256
    pool_batches = math.ceil(len(train_pool) / batch)
    cell_batches = math.ceil(len(cell_train) / batch)
    cls_epochs = max(5, round(5 * pool_batches / cell_batches))
    result = train(
        cell_train,
        reference_config(Selector.REAL_ONLY, cls_epochs_per_round=cls_epochs),
    )
    acc_small = accuracy_suite(
        predict(result.model, held_out.matrix()), held_out.labels
    ).acc
    gap = abs(acc_full - acc_small)
    report(
        "limited-data",
        gap <= 0.05,
        f"ACC {acc_full:.4f} at 100% vs {acc_small:.4f} at 10% "
        f"({len(cell_train)} records), gap {gap:.4f} (<= 0.05)",
    )


def test_determinism(tmp_path):
    data = tmp_path / "d.afv"
    synth = [
        "synth", "--dim", "32", "--latent", "4", "--n", "300", "--sep", "2.0",
        "--noise", "0.05", "--seed", "7", "--out", str(data),
    ]
    assert cli_main(synth) == 0

    ckpts, evals = [], []
    for run in ("one", "two"):
        ckpt = tmp_path / f"{run}.ckpt"
        out = tmp_path / f"{run}.json"
        with contextlib.redirect_stdout(io.StringIO()):
            assert cli_main([
                "train", "--data", str(data), "--source", "real", "--rounds", "3",
                "--seed", "7", "--out", str(ckpt),
            ]) == 0
            assert cli_main(["eval", "--ckpt", str(ckpt), "--data", str(data),
                             "--out", str(out)]) == 0
        ckpts.append(ckpt.read_bytes())
        evals.append(out.read_bytes())
    report(
        "determinism",
        ckpts[0] == ckpts[1] and evals[0] == evals[1],
        f"two identical runs: checkpoints identical={ckpts[0] == ckpts[1]} "
        f"({len(ckpts[0])} bytes), eval JSON identical={evals[0] == evals[1]}",
    )


def _random_dataset(n: int, dim: int, seed: int) -> FeatureDataset:
    rng = np.random.default_rng(seed)
    return FeatureDataset.build(
        rng.normal(size=(n, dim)).astype(np.float32),
        rng.integers(0, 2, size=n),
        [("real", "progan", "sd1.4")[i % 3] for i in range(n)],
    )


def _random_checkpoint(seed: int) -> Checkpoint:
    rng = Rng(seed)
    d, k = 16, 4

    def mlp(dims):
        layers = []
        for i in range(len(dims) - 1):
            act = Activation.RELU if i < len(dims) - 2 else Activation.IDENTITY
            layers.append(
                Layer(rng.normal_matrix(dims[i + 1], dims[i]), rng.normals(dims[i + 1]), act)
            )
        return Mlp(layers)

    return Checkpoint(
        feature_dim=d, bottleneck_dim=k,
        encoder=mlp([d, 12, k]), decoder=mlp([k, 12, d]), classifier=mlp([d, 1]),
        config={"seed": seed}, seed=seed, normalize=bool(seed % 2),
    )


def test_format_round_trips(tmp_path):
    cases = 0
    for n in (0, 1, 255, 1000):
        for dim in (1, 4, 768):
            ds = _random_dataset(n, dim, seed=n * 1000 + dim)
            path = tmp_path / f"d_{n}_{dim}.afv"
            save_features(ds, path)
            assert load_features(path) == ds
            save_features(ds, tmp_path / "again.afv")
            assert (tmp_path / "again.afv").read_bytes() == path.read_bytes()
            cases += 1
    for seed in range(5):
        ckpt = _random_checkpoint(seed)
        path = tmp_path / f"m_{seed}.ckpt"
        save_checkpoint(ckpt, path)
        assert load_checkpoint(path) == ckpt
        cases += 1
    report(
        "format-round-trips",
        True,
        f"{cases} randomized feature/checkpoint round trips bit-exact "
        f"(sizes 0/1/255/1000, dims 1/4/768)",
    )
