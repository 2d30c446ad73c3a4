import math

import numpy as np
import pytest

from kernelcast.errors import InvalidInputError, NormBoundError
from kernelcast.kernels import (
    KernelModel,
    NgrcKernelParams,
    PolyKernelParams,
    VolterraParams,
    fit_kernel_model,
    ngrc_gram,
    ngrc_kernel,
    poly_gram,
    poly_kernel,
    predict_kernel,
    volterra_gram,
    volterra_gram_extend,
    volterra_kernel_truncated,
)
from kernelcast.ngrc import build_exponent_table, delay_vectors, ngrc_features

LORENZ_VOLT = (0.3 * math.sqrt(1 - 0.09), 0.3)
MG_VOLT = (0.9 * math.sqrt(1 - 0.09), 0.3)
BEKK_VOLT = (0.72, 0.6)
TABLE_PARAMS = (LORENZ_VOLT, MG_VOLT, BEKK_VOLT)

# Recursion and series agree on exact values; computed values carry a few
# ulps of float64 noise on top of the analytic tail bound.
EPS_FLOOR = 1e-13


class TestPolyKernel:
    def test_zero_inputs(self):
        p = PolyKernelParams(p=2, tau=1)
        assert poly_kernel(np.zeros(2), np.zeros(2), p) == 1.0

    def test_hand_value(self):
        p = PolyKernelParams(p=2, tau=1)
        assert poly_kernel(np.array([1.0, 2.0]), np.array([3.0, 4.0]), p) == 144.0

    def test_example_expansion_scalar_two_lags(self):
        # (1 + z_i z_j + z_{i-1} z_{j-1})^2 expanded into monomials
        rng = np.random.default_rng(0)
        p = PolyKernelParams(p=2, tau=2)
        for _ in range(20):
            zi, zi1, zj, zj1 = rng.normal(size=4)
            u = np.array([zi1, zi])  # oldest lag first
            v = np.array([zj1, zj])
            expected = (1 + 2 * zi * zj + 2 * zi1 * zj1 + zi**2 * zj**2
                        + zi1**2 * zj1**2 + 2 * zi * zj * zi1 * zj1)
            assert poly_kernel(u, v, p) == pytest.approx(expected, rel=1e-12)

    def test_invalid_params(self):
        with pytest.raises(InvalidInputError):
            PolyKernelParams(p=0, tau=1)
        with pytest.raises(InvalidInputError):
            PolyKernelParams(p=2, tau=1, c=0.0)


class TestNgrcKernel:
    def test_zero_inputs_constant_survives(self):
        table = build_exponent_table(2, 1, 2)
        assert ngrc_kernel(np.zeros(2), np.zeros(2), table) == 1.0

    def test_example_expansion(self):
        rng = np.random.default_rng(1)
        table = build_exponent_table(2, 1, 2)
        for _ in range(20):
            zi, zi1, zj, zj1 = rng.normal(size=4)
            u = np.array([zi1, zi])
            v = np.array([zj1, zj])
            expected = (1 + zi * zj + zi1 * zj1 + zi**2 * zj**2
                        + zi1 * zj1 * zi * zj + zi1**2 * zj1**2)
            assert ngrc_kernel(u, v, table) == pytest.approx(expected,
                                                             rel=1e-12)

    def test_multinomial_weight_relation_to_poly(self):
        # (c + u'v)^p equals the weighted feature product with multinomial
        # coefficients sqrt(p! / (k0! k1! ...)) on each monomial.
        rng = np.random.default_rng(2)
        p_deg, width = 3, 3
        table = build_exponent_table(3, 1, p_deg)
        weights = np.empty(table.n_features)
        for k, row in enumerate(table.rows):
            k0 = p_deg - int(row.sum())
            denom = math.factorial(k0) * math.prod(
                math.factorial(int(e)) for e in row)
            weights[k] = math.sqrt(math.factorial(p_deg) / denom)
        poly = PolyKernelParams(p=p_deg, tau=3)
        for _ in range(10):
            u = rng.normal(size=width)
            v = rng.normal(size=width)
            lhs = poly_kernel(u, v, poly)
            rhs = float((weights * ngrc_features(u, table))
                        @ (weights * ngrc_features(v, table)))
            assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_poly_vs_ngrc_prediction_gap_is_reported_not_asserted(self):
        # same monomial span, different feature weights: the two dual fits
        # may disagree under ridge; we only record the observed gap.
        rng = np.random.default_rng(3)
        inputs = rng.uniform(-1, 1, size=(40, 1))
        targets = rng.uniform(-1, 1, size=(40, 1))
        lam = 1e-4
        poly = fit_kernel_model(inputs, targets,
                                PolyKernelParams(p=2, tau=2), lam)
        ngrc = fit_kernel_model(inputs, targets,
                                NgrcKernelParams(p=2, tau=2, d=1), lam)
        windows = delay_vectors(rng.uniform(-1, 1, size=(12, 1)), 2)
        gap = np.max(np.abs(predict_kernel(poly, windows)
                            - predict_kernel(ngrc, windows)))
        assert np.isfinite(gap)
        print(f"poly-vs-ngrc ridge prediction gap at lam={lam}: {gap:.3e}")


class TestVolterraParams:
    def test_constraints(self):
        with pytest.raises(InvalidInputError):
            VolterraParams(lam=0.5, theta=1.1, M=1.0)
        with pytest.raises(InvalidInputError):
            VolterraParams(lam=0.96, theta=0.3, M=1.0)  # lam too large
        with pytest.raises(InvalidInputError):
            VolterraParams(lam=0.0, theta=0.3)
        p = VolterraParams(lam=0.5, theta=0.5)
        assert p.border == pytest.approx(1.0 / 0.75)


class TestVolterraGram:
    def test_zero_inputs_chain(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        g = volterra_gram(np.zeros((6, 2)), p).values
        # zero inner products: K = 1 + lam^2 * K_prev, from border 1/(1-theta^2)
        expect = p.border
        for depth in range(1, 7):
            expect = 1.0 + 0.25 * expect
            np.testing.assert_allclose(np.diag(g, 0)[depth - 1], expect,
                                       rtol=1e-14)
        # fixed point of the chain is 1/(1-lam^2)
        assert abs(g[-1, -1] - 4.0 / 3.0) < 1e-3

    def test_single_input_hand_value(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        g = volterra_gram(np.array([[1.0]]), p).values
        assert g[0, 0] == pytest.approx(1 + 0.25 * (1 / 0.75) / 0.75, rel=1e-14)

    def test_constant_series_fixed_point(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        g = volterra_gram(np.ones((80, 1)), p).values
        assert g[-1, -1] == pytest.approx(1.5, rel=1e-12)

    def test_symmetry_and_entries_at_least_one(self):
        rng = np.random.default_rng(4)
        for lam, theta in TABLE_PARAMS:
            p = VolterraParams(lam, theta)
            Z = rng.normal(size=(30, 3))
            Z /= np.linalg.norm(Z, axis=1).max()
            g = volterra_gram(Z, p).values
            assert np.max(np.abs(g - g.T)) <= 1e-10 * np.max(np.abs(g))
            assert np.all(g >= 1.0)

    def test_numerically_psd(self):
        rng = np.random.default_rng(5)
        p = VolterraParams(*MG_VOLT)
        Z = rng.normal(size=(64, 2))
        Z /= np.linalg.norm(Z, axis=1).max()
        g = volterra_gram(Z, p).values
        evals = np.linalg.eigvalsh(g)
        assert evals.min() >= -1e-8 * np.trace(g)

    def test_norm_bound_violation(self):
        p = VolterraParams(lam=0.5, theta=0.5, M=1.0)
        with pytest.raises(NormBoundError) as err:
            volterra_gram(np.array([[0.5], [1.5]]), p)
        assert err.value.position == 1


class TestVolterraExtension:
    def test_zero_test_inputs_reproduce_zero_chain(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        Z = np.zeros((4, 1))
        g = volterra_gram(np.zeros((9, 1)), p).values
        ext = volterra_gram_extend(np.zeros((5, 1)), Z, p).values
        # the chain only depends on depth; column j of the extension matches
        # the corresponding diagonal entries of a longer zero-input Gram
        for j in range(4):
            np.testing.assert_allclose(ext[:, j], g[:5, 5 + j], rtol=1e-14)

    def test_single_step_hand_value(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        ext = volterra_gram_extend(np.array([[1.0]]), np.array([[0.0]]), p)
        assert ext.values[0, 0] == pytest.approx(1 + 0.25 * (1 / 0.75),
                                                 rel=1e-14)

    def test_matches_truncated_series(self):
        rng = np.random.default_rng(6)
        p = VolterraParams(*LORENZ_VOLT)
        Z = rng.normal(size=(8, 2))
        Z /= np.linalg.norm(Z, axis=1).max() / 0.9
        train, test = Z[:5], Z[5:]
        ext = volterra_gram_extend(train, test, p).values
        for i in range(1, 6):
            for j in range(1, 4):
                depth = min(i, 5 + j)
                a = Z[i - depth : i]
                b = Z[5 + j - depth : 5 + j]
                val, tail = volterra_kernel_truncated(a, b, p, depth)
                assert abs(ext[i - 1, j - 1] - val) <= tail + EPS_FLOOR


class TestTruncatedSeries:
    def test_zero_sequences_geometric(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        val, tail = volterra_kernel_truncated(np.zeros((3, 1)),
                                              np.zeros((3, 1)), p, 500)
        assert val == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert tail < 1e-100

    def test_constant_ones_geometric(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        val, _ = volterra_kernel_truncated(np.ones((400, 1)),
                                           np.ones((400, 1)), p, 400)
        assert val == pytest.approx(1.5, rel=1e-10)

    def test_recursion_within_tail_bound(self):
        rng = np.random.default_rng(7)
        for lam, theta in TABLE_PARAMS:
            p = VolterraParams(lam, theta)
            Z = rng.normal(size=(12, 3))
            Z /= np.linalg.norm(Z, axis=1).max() / 0.9
            g = volterra_gram(Z, p).values
            for i in range(1, 13):
                for j in range(i, 13):
                    depth = min(i, j)
                    val, tail = volterra_kernel_truncated(
                        Z[i - depth : i], Z[j - depth : j], p, depth)
                    assert abs(g[i - 1, j - 1] - val) <= tail + EPS_FLOOR

    def test_monotone_lag_decay(self):
        # successive truncations shrink by at most the per-lag weight bound
        rng = np.random.default_rng(8)
        p = VolterraParams(*BEKK_VOLT)
        a = rng.normal(size=(10, 2))
        a /= np.linalg.norm(a, axis=1).max()
        b = rng.normal(size=(10, 2))
        b /= np.linalg.norm(b, axis=1).max()
        rho = p.lam**2 / p.denominator_floor
        prev_val, _ = volterra_kernel_truncated(a, b, p, 10)
        bound = rho**11
        for tau_max in range(11, 18):
            val, _ = volterra_kernel_truncated(a, b, p, tau_max)
            assert abs(val - prev_val) <= bound * (1 + 1e-12) + EPS_FLOOR
            bound *= rho
            prev_val = val

    def test_shift_stationarity(self):
        # the series value depends only on the suffixes, so left zero
        # padding leaves the oracle untouched ...
        rng = np.random.default_rng(9)
        p = VolterraParams(*MG_VOLT)
        a = rng.normal(size=(6, 1))
        a /= np.abs(a).max() / 0.9
        b = rng.normal(size=(6, 1))
        b /= np.abs(b).max() / 0.9
        base, _ = volterra_kernel_truncated(a, b, p, 40)
        for shift in (1, 4, 9):
            za = np.vstack([np.zeros((shift, 1)), a])
            zb = np.vstack([np.zeros((shift, 1)), b])
            shifted, _ = volterra_kernel_truncated(za, zb, p, 40)
            assert abs(shifted - base) <= EPS_FLOOR

    def test_gram_shift_stationarity(self):
        # ... and the recursive Gram, whose border transient does depend on
        # depth, moves by less than the tail bound when the sequence is
        # shifted right by zero blocks
        rng = np.random.default_rng(19)
        for lam, theta in TABLE_PARAMS:
            p = VolterraParams(lam, theta)
            Z = rng.normal(size=(8, 2))
            Z /= np.linalg.norm(Z, axis=1).max() / 0.9
            g = volterra_gram(Z, p).values
            for shift in (1, 3, 7):
                padded = np.vstack([np.zeros((shift, 2)), Z])
                gs = volterra_gram(padded, p).values
                for i in range(1, 9):
                    for j in range(1, 9):
                        _, tail = volterra_kernel_truncated(
                            Z[i - min(i, j): i], Z[j - min(i, j): j], p,
                            min(i, j))
                        moved = abs(gs[i + shift - 1, j + shift - 1]
                                    - g[i - 1, j - 1])
                        assert moved <= tail + EPS_FLOOR

    def test_preconditions(self):
        p = VolterraParams(lam=0.5, theta=0.5)
        with pytest.raises(InvalidInputError):
            volterra_kernel_truncated(np.zeros((5, 1)), np.zeros((3, 1)), p, 4)


class TestKernelModels:
    def test_realizable_target_interpolates(self):
        rng = np.random.default_rng(10)
        inputs = rng.uniform(-1, 1, size=(50, 2))
        table = build_exponent_table(2, 2, 2)
        w = rng.normal(size=(table.n_features, 1))
        feats = ngrc_features(delay_vectors(inputs, 2), table)
        targets = np.vstack([np.zeros((1, 1)), feats @ w])
        model = fit_kernel_model(inputs, targets,
                                 NgrcKernelParams(p=2, tau=2, d=2), 1e-12)
        preds = predict_kernel(model, delay_vectors(inputs, 2))
        assert np.max(np.abs(preds - targets[1:])) <= 1e-8

    def test_predict_training_point_interpolation(self):
        rng = np.random.default_rng(11)
        inputs = rng.normal(size=(12, 2))
        inputs /= np.linalg.norm(inputs, axis=1).max()
        targets = rng.uniform(-1, 1, size=(12, 1))
        model = fit_kernel_model(inputs, targets, VolterraParams(0.6, 0.5),
                                 1e-12)
        # reproduce the kernel values of the last training point
        g = volterra_gram(inputs, VolterraParams(0.6, 0.5)).values
        pred = g[-1, :] @ model.alpha
        assert pred == pytest.approx(targets[-1, 0], abs=1e-6)

    def test_volterra_washout_trims_rows(self):
        rng = np.random.default_rng(12)
        inputs = rng.normal(size=(30, 1))
        inputs /= np.abs(inputs).max()
        targets = rng.normal(size=(30, 1))
        model = fit_kernel_model(inputs, targets, VolterraParams(0.5, 0.5),
                                 1e-6, washout=10)
        assert model.alpha.shape == (20, 1)
        preds = predict_kernel(model, rng.normal(size=(3, 1)) * 0.5)
        assert preds.shape == (3, 1)

    def test_washout_too_large(self):
        with pytest.raises(InvalidInputError):
            fit_kernel_model(np.zeros((5, 1)), np.zeros((5, 1)),
                             VolterraParams(0.5, 0.5), 1e-6, washout=5)

    def test_poly_model_round_trip(self):
        rng = np.random.default_rng(13)
        inputs = rng.uniform(-1, 1, size=(25, 1))
        targets = rng.uniform(-1, 1, size=(25, 2))
        model = fit_kernel_model(inputs, targets, PolyKernelParams(p=2, tau=3),
                                 1e-5)
        clone = KernelModel.from_json(model.to_json())
        windows = delay_vectors(rng.uniform(-1, 1, size=(8, 1)), 3)
        np.testing.assert_allclose(predict_kernel(clone, windows),
                                   predict_kernel(model, windows), rtol=1e-12)

    def test_volterra_model_round_trip(self):
        rng = np.random.default_rng(14)
        inputs = rng.normal(size=(20, 2))
        inputs /= np.linalg.norm(inputs, axis=1).max()
        targets = rng.normal(size=(20, 1))
        model = fit_kernel_model(inputs, targets, VolterraParams(0.5, 0.4),
                                 1e-6, washout=3)
        clone = KernelModel.from_json(model.to_json())
        new = rng.normal(size=(4, 2)) * 0.4
        np.testing.assert_allclose(predict_kernel(clone, new),
                                   predict_kernel(model, new), rtol=1e-12)

    def test_extension_positions_continue_sequence(self):
        p = VolterraParams(0.5, 0.5)
        inputs = np.zeros((6, 1))
        targets = np.zeros((6, 1))
        model = fit_kernel_model(inputs, targets, p, 1e-6)
        ext = model.extension()
        with pytest.raises(NormBoundError) as err:
            ext.step(np.array([2.0]))
        assert err.value.position == 6

    def test_gram_csv_export(self, tmp_path):
        p = VolterraParams(0.5, 0.5)
        g = volterra_gram(np.zeros((3, 1)), p)
        path = tmp_path / "gram.csv"
        g.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# kind=square-train")
        assert len(lines) == 2 + 3
        row = [float(x) for x in lines[2].split(",")]
        np.testing.assert_allclose(row, g.values[0], rtol=0)


def test_ngrc_gram_matches_pairwise_kernel():
    rng = np.random.default_rng(15)
    table = build_exponent_table(2, 1, 3)
    U = rng.normal(size=(7, 2))
    V = rng.normal(size=(5, 2))
    G = ngrc_gram(U, V, table)
    for i in range(7):
        for j in range(5):
            assert G[i, j] == pytest.approx(ngrc_kernel(U[i], V[j], table),
                                            rel=1e-12)


def test_poly_gram_matches_pairwise_kernel():
    rng = np.random.default_rng(16)
    params = PolyKernelParams(p=3, tau=1)
    U = rng.normal(size=(6, 4))
    G = poly_gram(U, U, params)
    for i in range(6):
        for j in range(6):
            assert G[i, j] == pytest.approx(poly_kernel(U[i], U[j], params),
                                            rel=1e-12)
