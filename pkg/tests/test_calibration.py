import math
import random

import numpy as np
import pytest

from mgpert.analytic import implied_vol_array
from mgpert.calibration import (
    PENALTY_RESIDUAL,
    Quote,
    QuoteSet,
    calibrate,
    ivrmse,
    pert_price_grid,
)
from mgpert.errors import EmptyQuoteSet, InvalidParams
from mgpert.params import OptionSpec

THETA = (1.5, 1.5, 1.0, 0.2865)  # (kappa, xi, alpha, sigma)
TAU = 30 / 365


def synthetic_quotes(theta, n=10, tau=TAU, variance=0.09, iv_shift=0.0):
    """Quotes priced exactly by the perturbative model, optionally IV-shifted."""
    kappa, xi, alpha, sigma = theta
    spot = 100.0
    strikes = np.linspace(90.0, 110.0, n)
    prices = pert_price_grid(spot, strikes, tau, variance, 0.0, kappa, xi, alpha, sigma)
    quotes = []
    for k, p in zip(strikes, prices):
        opt = OptionSpec(spot=spot, strike=float(k), tau_cal=tau, variance=variance)
        if iv_shift:
            iv = float(implied_vol_array(p, spot, k, tau, 0.0)) + iv_shift
            quotes.append(Quote(opt=opt, iv=iv))
        else:
            quotes.append(Quote(opt=opt, price=float(p)))
    return QuoteSet(quotes=quotes, r=0.0)


class TestQuoteSet:
    def test_empty_rejected(self):
        with pytest.raises(EmptyQuoteSet):
            QuoteSet(quotes=[], r=0.0)

    def test_quote_needs_price_or_iv(self):
        opt = OptionSpec(spot=100.0, strike=100.0, tau_cal=TAU, variance=0.09)
        with pytest.raises(InvalidParams):
            Quote(opt=opt)

    def test_uninvertible_quotes_dropped(self):
        opt = OptionSpec(spot=100.0, strike=100.0, tau_cal=TAU, variance=0.09)
        qs = QuoteSet(
            quotes=[
                Quote(opt=opt, price=3.0),
                Quote(opt=opt, price=150.0),  # above the no-arbitrage bound
            ],
            r=0.0,
        )
        spot, *_ = qs.arrays()
        assert spot.size == 1
        assert qs.n_dropped == 1


class TestIvrmse:
    def test_exact_model_gives_zero(self):
        qs = synthetic_quotes(THETA)
        assert ivrmse(qs, THETA) == pytest.approx(0.0, abs=1e-6)

    def test_constant_shift_is_the_rms(self):
        # shifting every observed IV by 0.01 must give IVRMSE = 0.01
        qs = synthetic_quotes(THETA, iv_shift=0.01)
        assert ivrmse(qs, THETA) == pytest.approx(0.01, abs=1e-6)

    def test_reorder_invariance(self):
        qs = synthetic_quotes(THETA, iv_shift=0.005)
        shuffled = list(qs.quotes)
        random.Random(3).shuffle(shuffled)
        qs2 = QuoteSet(quotes=shuffled, r=0.0)
        assert ivrmse(qs2, THETA) == pytest.approx(ivrmse(qs, THETA), abs=1e-12)

    def test_invalid_theta_rejected(self):
        qs = synthetic_quotes(THETA)
        with pytest.raises(InvalidParams):
            ivrmse(qs, (-1.0, 1.5, 1.0, 0.2))

    def test_penalty_residual_value(self):
        assert PENALTY_RESIDUAL == 0.5


class TestPertPriceGrid:
    def test_reduces_to_analytic_pricer(self, scn_mg, scn_pert):
        from mgpert.analytic import price_mg

        strikes = np.array([90.0, 100.0, 110.0])
        grid = pert_price_grid(
            100.0, strikes, TAU, 0.09, 0.0,
            scn_mg.kappa, scn_mg.xi, scn_mg.alpha, scn_pert.sigma,
        )
        for k, got in zip(strikes, grid):
            opt = OptionSpec(spot=100.0, strike=float(k), tau_cal=TAU, variance=0.09)
            assert got == pytest.approx(price_mg(opt, scn_mg, scn_pert).total, rel=1e-12)


class TestCalibrate:
    def test_sigma_recovery_zero_noise(self):
        # quotes generated at sigma = 0.2865; start the search away from it
        qs = synthetic_quotes(THETA)
        result = calibrate(qs, (1.5, 1.5, 1.0, 0.22), fix_structurals=True)
        assert result.theta_pert[3] == pytest.approx(0.2865, abs=1e-3)
        assert result.ivrmse < 1e-4
        assert result.theta_pert[:3] == (1.5, 1.5, 1.0)

    def test_full_vector_fit_reaches_low_error(self):
        qs = synthetic_quotes(THETA)
        result = calibrate(qs, (1.2, 1.2, 0.9, 0.25))
        assert result.ivrmse < 1e-4
        assert result.theta_pert[3] == pytest.approx(0.2865, abs=5e-3)

    def test_invalid_initial_rejected(self):
        qs = synthetic_quotes(THETA)
        with pytest.raises(InvalidParams):
            calibrate(qs, (0.0, 1.5, 1.0, 0.2))

    def test_result_fields(self):
        qs = synthetic_quotes(THETA)
        result = calibrate(qs, (1.5, 1.5, 1.0, 0.25), fix_structurals=True)
        assert result.n_quotes_used == 10
        assert result.iterations > 0
        assert result.residuals.shape == (10,)
        assert math.isfinite(result.ivrmse)

    def test_deterministic(self):
        a = calibrate(synthetic_quotes(THETA), (1.2, 1.2, 0.9, 0.25))
        b = calibrate(synthetic_quotes(THETA), (1.2, 1.2, 0.9, 0.25))
        assert a.theta_pert == b.theta_pert and a.ivrmse == b.ivrmse
