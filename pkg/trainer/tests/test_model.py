import numpy as np
import pytest

from crop_trainer import TrainConfig, build_model, conv_layers, freeze_leading_convs, frozen_weights


def compact_config(**overrides):
    defaults = dict(base="compact_cnn", pretrained=False)
    defaults.update(overrides)
    return TrainConfig(**defaults)


class TestCompactModel:
    def test_logit_head_shape(self):
        model = build_model(compact_config())
        out = model(np.zeros((2, 224, 224, 3), dtype=np.float32))
        assert tuple(out.shape) == (2, 2)

    def test_freeze_caps_at_available_convs(self):
        model = build_model(compact_config())
        convs = conv_layers(model)
        frozen = freeze_leading_convs(model, 10)
        assert frozen == len(convs) == 3
        assert all(not l.trainable for l in convs)

    def test_frozen_weights_collects_copies(self):
        model = build_model(compact_config())
        freeze_leading_convs(model, 2)
        snapshot = frozen_weights(model)
        assert len(snapshot) == 4  # kernel + bias for two conv layers
        snapshot[0][:] = 0  # mutating the copy must not touch the model
        assert not np.allclose(conv_layers(model)[0].get_weights()[0], 0)


class TestVgg16Model:
    def test_structure_and_freezing(self):
        model = build_model(TrainConfig(pretrained=False))
        convs = conv_layers(model)
        assert len(convs) == 13
        frozen = freeze_leading_convs(model, 10)
        assert frozen == 10
        assert [l.trainable for l in convs] == [False] * 10 + [True] * 3
        out = model(np.zeros((1, 224, 224, 3), dtype=np.float32))
        assert tuple(out.shape) == (1, 2)

    def test_pretrained_build_or_clear_offline_error(self):
        # with no weight cache and no network the failure must point at the fix
        try:
            model = build_model(TrainConfig())
        except RuntimeError as e:
            assert "pretrained=False" in str(e)
        else:
            assert len(conv_layers(model)) == 13
