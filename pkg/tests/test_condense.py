"""Condensation: optimization behavior, invariances, and the analytic gradient."""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import make_two_gaussian
from dcpriv.condense import (
    CondenseConfig,
    IdentityEmbedding,
    RandomFeatureEmbedding,
    SyntheticSet,
    _class_means,
    _loss_gradient,
    _loss_value,
    _sorted_class_rows,
    condense,
    match_loss,
    write_synthetic_csv,
)
from dcpriv.errors import DomainError, UsageError
from dcpriv.rng import generator
from dcpriv.stats import Dataset, ingest_csv


def two_class_2d():
    """Four hand-picked rows with exactly representable class means."""
    values = np.array(
        [
            [0.5, -1.0],
            [1.5, -3.0],  # class a mean: (1.0, -2.0)
            [3.0, 1.0],
            [5.0, 3.0],  # class b mean: (4.0, 2.0)
        ]
    )
    return Dataset(
        ("x", "y"), values, (None, None), ("a", "a", "b", "b"), "cls"
    )


def random_instance(seed, n_per_class=10, dim=2, classes=("a", "b")):
    g = generator(seed, 7002)
    values = g.normal(0.0, 1.0, size=(n_per_class * len(classes), dim))
    labels = tuple(c for c in classes for _ in range(n_per_class))
    return Dataset(
        tuple(f"c{j}" for j in range(dim)),
        values,
        (None,) * dim,
        labels,
        "cls",
    )


class TestCondense:
    def test_constant_data_is_a_fixed_point(self):
        values = np.full((30, 2), 0.5)
        data = Dataset(
            ("u", "v"),
            values,
            ((0.0, 1.0), (0.0, 1.0)),
            ("a",) * 15 + ("b",) * 15,
            "cls",
        )
        synth, trace = condense(data, CondenseConfig(1, 5, seed=3))
        # The class mean of identical rows can differ from the row by an ulp
        # (sum then divide), so the fixed point holds to float precision, not
        # bit-exactly.
        assert synth.values == pytest.approx(0.5, abs=1e-12)
        assert trace[-1] <= 1e-20

    def test_identity_single_row_recovers_class_means(self):
        data = two_class_2d()
        synth, trace = condense(
            data, CondenseConfig(1, 10, seed=1), embedding=IdentityEmbedding()
        )
        # classes are laid out in sorted order: row 0 is a, row 1 is b
        assert synth.labels == ("a", "b")
        mean_a = [math.fsum([0.5, 1.5]) / 2, math.fsum([-1.0, -3.0]) / 2]
        mean_b = [math.fsum([3.0, 5.0]) / 2, math.fsum([1.0, 3.0]) / 2]
        assert synth.values[0] == pytest.approx(mean_a, abs=1e-6)
        assert synth.values[1] == pytest.approx(mean_b, abs=1e-6)
        assert trace[-1] <= 1e-12

    def test_displaced_point_loss_is_squared_distance(self):
        data = two_class_2d()
        rows = _sorted_class_rows(data)
        means = {c: r.mean(axis=0) for c, r in rows.items()}
        d = np.array([0.25, -0.5])
        synth = SyntheticSet(
            names=data.names,
            values=np.array([means["a"] + d, means["b"]]),
            bounds=(None, None),
            labels=("a", "b"),
            label_name="cls",
            m_per_class=1,
        )
        loss = match_loss(data, synth, IdentityEmbedding())
        assert loss.value == pytest.approx(float(d @ d), rel=1e-12)

    def test_exact_zero_loss_is_reachable(self):
        data = two_class_2d()
        synth, trace = condense(
            data, CondenseConfig(1, 10, seed=9), embedding=IdentityEmbedding()
        )
        assert trace[-1] == 0.0

    def test_rerun_is_bit_identical(self):
        data = make_two_gaussian(n_per_class=25, seed=77)
        cfg = CondenseConfig(2, 15, seed=5)
        s1, t1 = condense(data, cfg)
        s2, t2 = condense(data, cfg)
        assert np.array_equal(s1.values, s2.values)
        assert s1.labels == s2.labels
        assert t1 == t2

    def test_row_order_never_matters(self):
        data = make_two_gaussian(n_per_class=25, seed=78)
        perm = generator(1, 7003).permutation(data.n)
        shuffled = Dataset(
            data.names,
            data.values[perm],
            data.bounds,
            tuple(data.labels[i] for i in perm),
            data.label_name,
        )
        cfg = CondenseConfig(2, 12, seed=6)
        s1, t1 = condense(data, cfg)
        s2, t2 = condense(shuffled, cfg)
        assert np.array_equal(s1.values, s2.values)
        assert t1 == t2

    @pytest.mark.parametrize("seed", range(20))
    def test_loss_trace_never_increases(self, seed):
        data = random_instance(seed, n_per_class=8, dim=2)
        _, trace = condense(data, CondenseConfig(2, 12, seed=seed))
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_synthetic_rows_respect_a_tight_declared_box(self):
        # Bounds narrower than the data: every candidate is projected into it.
        data = Dataset(
            ("u",),
            np.linspace(0.0, 1.0, 20).reshape(-1, 1),
            ((0.4, 0.6),),
            ("a",) * 10 + ("b",) * 10,
            "cls",
        )
        synth, _ = condense(data, CondenseConfig(3, 10, seed=2))
        assert np.all(synth.values >= 0.4)
        assert np.all(synth.values <= 0.6)

    def test_per_class_allocation_is_exact(self):
        data = make_two_gaussian(n_per_class=10, seed=79)
        synth, _ = condense(data, CondenseConfig(3, 3, seed=1))
        assert synth.m == 6
        assert synth.labels == ("a",) * 3 + ("b",) * 3
        assert synth.m_per_class == 3

    def test_oversampling_a_small_class_is_allowed(self):
        values = np.array([[0.1], [0.2], [0.8], [0.9], [0.85]])
        data = Dataset(
            ("x",), values, ((0.0, 1.0),), ("a", "a", "b", "b", "b"), "cls"
        )
        synth, _ = condense(data, CondenseConfig(5, 3, seed=4))
        assert synth.labels.count("a") == 5
        assert synth.labels.count("b") == 5

    def test_unlabeled_data_is_rejected(self):
        data = Dataset(("x",), np.array([[0.1], [0.9]]), ((0.0, 1.0),))
        with pytest.raises(UsageError, match="label"):
            condense(data, CondenseConfig(1, 5, seed=0))

    def test_loss_tol_stops_early(self):
        data = make_two_gaussian(n_per_class=15, seed=80)
        _, trace = condense(data, CondenseConfig(1, 50, seed=1, loss_tol=1e9))
        assert len(trace) <= 2


class TestMatchLoss:
    def test_schema_mismatch_rejected(self, two_gaussian):
        synth, _ = condense(two_gaussian, CondenseConfig(1, 3, seed=0))
        other = Dataset(
            ("p", "q"),
            two_gaussian.values,
            two_gaussian.bounds,
            two_gaussian.labels,
            "cls",
        )
        with pytest.raises(UsageError, match="schema"):
            match_loss(other, synth, IdentityEmbedding())

    def test_class_mismatch_rejected(self, two_gaussian):
        synth, _ = condense(two_gaussian, CondenseConfig(1, 3, seed=0))
        relabeled = Dataset(
            two_gaussian.names,
            two_gaussian.values,
            two_gaussian.bounds,
            tuple("xy"[i % 2] for i in range(two_gaussian.n)),
            "cls",
        )
        with pytest.raises(UsageError, match="class"):
            match_loss(relabeled, synth, IdentityEmbedding())

    def test_negative_loss_is_impossible_to_construct(self):
        from dcpriv.condense import MatchLoss

        with pytest.raises(DomainError):
            MatchLoss(-1e-9)


class TestGradient:
    @staticmethod
    def _setup(seed, dim, embedding):
        data = random_instance(seed, n_per_class=6, dim=dim)
        class_rows = _sorted_class_rows(data)
        classes = sorted(class_rows)
        target = _class_means(class_rows, embedding)
        m = 2
        slices = [(c, slice(i * m, (i + 1) * m)) for i, c in enumerate(classes)]
        g = generator(seed, 7004)
        synth = g.normal(0.0, 1.0, size=(m * len(classes), dim))
        return synth, slices, target

    @staticmethod
    def _numeric_gradient(synth, slices, target, embedding, h=1e-5):
        num = np.zeros_like(synth)
        for i in range(synth.shape[0]):
            for j in range(synth.shape[1]):
                up = synth.copy()
                dn = synth.copy()
                up[i, j] += h
                dn[i, j] -= h
                num[i, j] = (
                    _loss_value(up, slices, target, embedding)
                    - _loss_value(dn, slices, target, embedding)
                ) / (2 * h)
        return num

    @pytest.mark.parametrize("seed", range(8))
    def test_analytic_matches_central_differences_random_features(self, seed):
        embedding = RandomFeatureEmbedding.from_seed(seed, 2, 8)
        synth, slices, target = self._setup(seed, 2, embedding)
        ana = _loss_gradient(synth, slices, target, embedding)
        num = self._numeric_gradient(synth, slices, target, embedding)
        scale = max(float(np.max(np.abs(num))), 1e-8)
        assert float(np.max(np.abs(ana - num))) <= 1e-4 * scale

    @pytest.mark.parametrize("seed", range(4))
    def test_analytic_matches_central_differences_identity(self, seed):
        embedding = IdentityEmbedding()
        synth, slices, target = self._setup(seed, 3, embedding)
        ana = _loss_gradient(synth, slices, target, embedding)
        num = self._numeric_gradient(synth, slices, target, embedding)
        scale = max(float(np.max(np.abs(num))), 1e-8)
        assert float(np.max(np.abs(ana - num))) <= 1e-4 * scale


class TestEmbeddingAndConfig:
    def test_from_seed_is_deterministic(self):
        a = RandomFeatureEmbedding.from_seed(5, 3, 16)
        b = RandomFeatureEmbedding.from_seed(5, 3, 16)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
        c = RandomFeatureEmbedding.from_seed(6, 3, 16)
        assert not np.array_equal(a.weights, c.weights)

    def test_features_shape_and_range(self):
        emb = RandomFeatureEmbedding.from_seed(1, 4, 9)
        x = generator(2, 7005).normal(size=(7, 4))
        phi = emb.features(x)
        assert phi.shape == (7, 9)
        assert np.all(np.abs(phi) < 1.0)

    def test_inconsistent_shapes_rejected(self):
        with pytest.raises(UsageError):
            RandomFeatureEmbedding(np.zeros((3, 4)), np.zeros(5))
        with pytest.raises(UsageError):
            RandomFeatureEmbedding.from_seed(0, 0, 4)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(m_per_class=0, iters=5, seed=0),
            dict(m_per_class=1, iters=0, seed=0),
            dict(m_per_class=1, iters=5, seed=-1),
            dict(m_per_class=1, iters=5, seed=0, step_size=0.0),
            dict(m_per_class=1, iters=5, seed=0, feature_dim=0),
            dict(m_per_class=1, iters=5, seed=0, loss_tol=-0.1),
        ],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(UsageError):
            CondenseConfig(**kwargs)

    def test_synthetic_set_count_invariant(self):
        with pytest.raises(DomainError, match="per-class"):
            SyntheticSet(
                ("x",),
                np.array([[0.1], [0.2], [0.3]]),
                ((0.0, 1.0),),
                ("a", "b", "b"),
                "cls",
                1,
            )


class TestSyntheticCsv:
    def test_round_trip(self, tmp_path, two_gaussian):
        synth, _ = condense(two_gaussian, CondenseConfig(2, 5, seed=8))
        path = str(tmp_path / "synth.csv")
        write_synthetic_csv(synth, path)
        back = ingest_csv(path, label_column=synth.label_name)
        assert back.values.tolist() == synth.values.tolist()
        assert back.labels == synth.labels
