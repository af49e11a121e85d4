import numpy as np
import pytest

from quadlink.ingest import ReturnSeries
from quadlink.signgen import (
    InvalidProbability,
    SignPath,
    accuracy_grid,
    gen_sign_path,
    realized_sign,
)


@pytest.fixture
def realized() -> np.ndarray:
    return np.where(np.random.default_rng(0).random(10000) < 0.5, -1, 1)


class TestAccuracyGrid:
    def test_default_grid(self):
        grid = accuracy_grid(20)

        assert len(grid) == 20
        assert grid[0] == 0.5
        assert grid[-1] == 1.0
        assert grid[1] - grid[0] == pytest.approx(0.5 / 19)

    def test_eleven_levels_hit_round_values(self):
        grid = accuracy_grid(11)

        assert grid[1] == pytest.approx(0.55)
        assert grid[5] == pytest.approx(0.75)

    def test_needs_two_levels(self):
        with pytest.raises(ValueError):
            accuracy_grid(1)


class TestGenSignPath:
    def test_perfect_accuracy_copies_signs(self, realized):
        path = gen_sign_path(realized, 1.0, np.random.default_rng(1))

        assert np.array_equal(path.dhat, realized)
        assert path.hit_rate == 1.0

    def test_coin_flip_accuracy(self, realized):
        path = gen_sign_path(realized, 0.5, np.random.default_rng(2))

        assert path.hit_rate == pytest.approx(0.5, abs=0.03)
        assert np.array_equal(path.correct == 1, path.dhat == realized)

    def test_one_draw_per_date(self, realized):
        rng = np.random.default_rng(3)
        reference = np.random.default_rng(3)

        gen_sign_path(realized, 0.8, rng)
        reference.random(len(realized))

        assert rng.random() == reference.random()

    def test_ignores_magnitudes(self, realized):
        first = gen_sign_path(realized, 0.7, np.random.default_rng(4))
        flipped = gen_sign_path(-realized, 0.7, np.random.default_rng(4))

        assert np.array_equal(first.correct, flipped.correct)

    def test_records_seed(self, realized):
        sequence = np.random.SeedSequence(entropy=42, spawn_key=(3, 7, 1))

        path = gen_sign_path(realized, 0.6, np.random.default_rng(sequence))

        assert path.seed == (42, (3, 7, 1))

    @pytest.mark.parametrize("p", [0.49, 1.01, -1.0])
    def test_probability_outside_range(self, realized, p):
        with pytest.raises(InvalidProbability):
            gen_sign_path(realized, p, np.random.default_rng(5))


class TestSigns:
    def test_zero_counts_as_positive(self):
        returns = ReturnSeries(
            dates=np.datetime64("2020-01-01") + np.arange(3),
            returns=np.array([-0.1, 0.0, 0.2]),
        )

        assert list(realized_sign(returns)) == [-1, 1, 1]

    def test_path_is_read_only(self):
        path = SignPath(dhat=[1, -1], correct=[1, 0], target_p=0.5)

        with pytest.raises(ValueError):
            path.dhat[0] = -1


class TestIndependence:
    @staticmethod
    def _permutation_pvalue(correct, magnitudes, rng, rounds=199):
        def gap(flags):
            return magnitudes[flags].mean() - magnitudes[~flags].mean()

        observed = abs(gap(correct))
        shuffled = [abs(gap(rng.permutation(correct))) for _ in range(rounds)]
        return (1 + sum(value >= observed for value in shuffled)) / (
            rounds + 1
        )

    def test_correctness_ignores_magnitudes(self, garch_returns):
        returns = np.asarray(garch_returns.returns)
        magnitudes = np.abs(returns)
        signs = realized_sign(garch_returns)
        shuffler = np.random.default_rng(100)
        replications = 200

        pvalues = []
        for seed in range(replications):
            path = gen_sign_path(signs, 0.7, np.random.default_rng(seed))
            correct = path.correct == 1
            pvalues.append(
                self._permutation_pvalue(correct, magnitudes, shuffler)
            )

        rejected = np.mean(np.array(pvalues) <= 0.05)
        # nominal rate plus three binomial standard errors
        slack = 3 * np.sqrt(0.05 * 0.95 / replications)
        assert rejected <= 0.05 + slack

    def test_hit_rate_concentrates(self, realized):
        p, replications = 0.8, 50
        rates = [
            gen_sign_path(realized, p, np.random.default_rng(seed)).hit_rate
            for seed in range(replications)
        ]

        error = np.sqrt(p * (1 - p) / (replications * len(realized)))
        assert abs(np.mean(rates) - p) <= 4 * error
