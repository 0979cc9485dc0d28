import numpy as np
import pytest

from tgqm_learn.data import DataTooSmall, LearningSample, Splits
from tgqm_learn.models import MAX_PARAMS, GraspModel, train_classifier, \
    train_regressor


def synth_samples(n, seed=0, separable=True, size=16, constant_target=None):
    """Synthetic samples; when separable, positives see a near surface
    (depth ~0.3) and negatives a far one (~1.2)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = bool(i % 2)
        base = 0.3 if (label or not separable) else 1.2
        depth = np.full((size, size), np.inf, dtype=np.float32)
        depth[size // 4: -size // 4, size // 4: -size // 4] = \
            base + 0.05 * rng.random((size // 2, size // 2))
        target = None
        if label:
            target = constant_target if constant_target is not None \
                else float(rng.random())
        out.append(LearningSample(depth=depth,
                                  p0=rng.uniform(-1, 1, 6),
                                  d=rng.uniform(-1, 1, 2),
                                  label=label, target=target,
                                  object_id=f"o{i % 3}"))
    return out


def make_splits(n_train=200, n_test=60, **kw):
    return Splits(train=synth_samples(n_train, seed=1, **kw),
                  test=synth_samples(n_test, seed=2, **kw))


class TestArchitecture:

    @pytest.mark.parametrize("encoder", ["raster", "points"])
    @pytest.mark.parametrize("kind", ["classifier", "regressor"])
    def test_parameter_budget(self, encoder, kind):
        model = GraspModel(kind, encoder)
        n = sum(p.numel() for p in model.parameters())
        assert 0 < n <= MAX_PARAMS

    def test_unknown_kind_and_encoder(self):
        with pytest.raises(ValueError):
            GraspModel("oracle")
        with pytest.raises(ValueError):
            GraspModel("classifier", encoder="transformer")

    def test_regressor_output_in_unit_interval(self):
        model = GraspModel("regressor")
        preds = model.predict(synth_samples(8))
        assert np.all((preds >= 0.0) & (preds <= 1.0))


class TestTraining:

    def test_too_small(self):
        splits = make_splits(n_train=40)
        with pytest.raises(DataTooSmall):
            train_classifier(splits, epochs=1)

    def test_deterministic(self):
        splits = make_splits(n_train=120)
        m1 = train_classifier(splits, epochs=2, seed=7)
        m2 = train_classifier(splits, epochs=2, seed=7)
        assert m1.final_loss == m2.final_loss
        np.testing.assert_array_equal(m1.predict(splits.test),
                                      m2.predict(splits.test))

    def test_separable_classifier(self):
        splits = make_splits(n_train=240, n_test=80)
        model = train_classifier(splits, epochs=8, seed=0)
        scores = model.predict(splits.test)
        labels = np.array([s.label for s in splits.test])
        acc = np.mean((scores > 0.5) == labels)
        assert acc > 0.95

    def test_separable_point_classifier(self):
        splits = make_splits(n_train=240, n_test=80)
        model = train_classifier(splits, encoder="points", epochs=12,
                                 lr=3e-3, seed=0)
        scores = model.predict(splits.test)
        labels = np.array([s.label for s in splits.test])
        assert np.mean((scores > 0.5) == labels) > 0.95

    def test_constant_target_regressor(self):
        splits = make_splits(n_train=300, n_test=60, constant_target=0.37)
        model = train_regressor(splits, epochs=25, seed=0)
        preds = model.predict([s for s in splits.test
                               if s.target is not None])
        assert float(np.mean((preds - 0.37) ** 2)) < 1e-3

    def test_regressor_uses_only_targeted_samples(self):
        splits = make_splits(n_train=220)
        n_targeted = sum(s.target is not None for s in splits.train)
        assert n_targeted >= 100
        model = train_regressor(splits, epochs=1, seed=0)
        assert model.kind == "regressor"
