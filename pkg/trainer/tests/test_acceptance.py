"""Acceptance gate for the trainer: toy fine-tune and train/serve parity.

Run with ``pytest tests/test_acceptance.py -s`` for one line per criterion.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from crop_trainer import (
    TrainConfig,
    build_model,
    export_model,
    finetune,
    freeze_leading_convs,
    frozen_weights,
    make_toy_dataset,
    predict_probabilities,
    read_manifest,
)

TOY_BUDGET_S = 600.0


@contextmanager
def criterion(name, budget_s):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < budget_s, f"{name}: {elapsed:.1f}s exceeded the {budget_s}s budget"
    print(f"ACCEPTANCE PASS: {name} ({elapsed:.1f}s)")


def toy_config():
    # compact base keeps the 5-epoch toy run well inside the CPU budget;
    # both deviations are recorded in the exported manifest
    return TrainConfig(
        base="compact_cnn", pretrained=False,
        phase1_epochs=4, phase2_epochs=1, seed=123)


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy_run")
    manifest = make_toy_dataset(out / "data", count=200, seed=5)
    records = read_manifest(manifest)
    config = toy_config()

    import keras

    keras.utils.set_random_seed(config.seed)  # deterministic init for the prebuilt model
    model = build_model(config)
    freeze_leading_convs(model, config.frozen_layers)
    snapshot = [w.copy() for w in frozen_weights(model)]

    start = time.perf_counter()
    result = finetune(config, records, out_dir=out / "run", model=model)
    elapsed = time.perf_counter() - start
    return {
        "config": config,
        "result": result,
        "snapshot": snapshot,
        "elapsed": elapsed,
        "out": out,
    }


def test_toy_finetune(toy_run):
    with criterion("toy fine-tune: loss halves, frozen layers intact", TOY_BUDGET_S):
        result = toy_run["result"]
        history = result.history
        assert len(history["loss"]) == 5
        first, last = history["loss"][0], history["loss"][-1]
        assert last <= 0.5 * first, f"loss only fell {first:.4f} -> {last:.4f}"

        # the learning-rate drop really happened between the phases
        assert history["lr"][:4] == [pytest.approx(0.001)] * 4
        assert history["lr"][4] == pytest.approx(0.0001)

        # frozen parameters are bit-identical pre/post
        after = frozen_weights(result.model)
        before = toy_run["snapshot"]
        assert len(before) == len(after) and len(before) > 0
        for b, a in zip(before, after):
            assert np.array_equal(b, a)
        assert result.freezing_intact

        assert toy_run["elapsed"] < TOY_BUDGET_S
        print(f"  trained 200 images x 5 epochs in {toy_run['elapsed']:.1f}s, "
              f"loss {first:.4f} -> {last:.4f}")


def test_train_serve_parity(toy_run):
    with criterion("train/serve parity within 1e-3 on 10 probe crops", TOY_BUDGET_S):
        from crop_ensemble import ModelManifest, load_backend

        result = toy_run["result"]
        config = toy_run["config"]
        _, manifest_path = export_model(result.model, config, toy_run["out"] / "export")

        manifest = ModelManifest.from_json_file(manifest_path)
        assert manifest.input_size == 224
        assert tuple(manifest.class_order) == ("Man", "Woman")
        deviations = manifest.extras["trainer"]["deviations"]
        assert any(d.startswith("base=compact_cnn") for d in deviations)

        handle = load_backend(manifest)
        rng = np.random.default_rng(77)
        # half the probes sit near the toy decision boundary so the softmax
        # is not saturated and the comparison has real numerical content
        probes = np.empty((10, 224, 224, 3), dtype=np.uint8)
        probes[:5] = rng.integers(0, 256, (5, 224, 224, 3), dtype=np.uint8)
        for i, base in enumerate((105, 115, 125, 135, 145)):
            noise = rng.integers(-10, 11, (224, 224, 3))
            probes[5 + i] = np.clip(base + noise, 0, 255).astype(np.uint8)
        trainer_probs = predict_probabilities(result.model, probes)
        worst = 0.0
        for i in range(10):
            served = handle.classify(probes[i])
            diff = max(
                abs(served.p_man - trainer_probs[i, 0]),
                abs(served.p_woman - trainer_probs[i, 1]),
            )
            worst = max(worst, diff)
            assert diff <= 1e-3, f"probe {i}: per-class gap {diff:.2e}"
        print(f"  worst per-class gap {worst:.2e}")
