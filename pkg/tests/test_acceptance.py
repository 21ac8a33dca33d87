"""Acceptance gate: each criterion prints one PASS/FAIL line and asserts."""

import math

import numpy as np
import pytest

from matlaplace.bootstrap import bootstrap_pvalue, warp_speed_power
from matlaplace.experiments import run_df_sweep, run_percentile_table, validate_config
from matlaplace.ingest import SeriesTable, return_covariances
from matlaplace.laplace import NcwParams, ncw_laplace
from matlaplace.sample import MatrixSample
from matlaplace.samplers import CMT, CMU, IW, W, make_rng, ncw_means_for, sample_ncw
from matlaplace.spd import validate_spd
from matlaplace.statistic import statistic_fast, statistic_reference

from conftest import random_sample, random_spd

SEED = 20240611
N_POWER = 2000
W2 = W(2, 2.5)


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return emit


def power(spec_y, nu, seed_offset):
    p = NcwParams.isotropic(2, nu)
    return warp_speed_power(W2, spec_y, 20, 20, p, N_POWER, 0.05, SEED + seed_offset).rejection_rate


def binom_se(p, n):
    return math.sqrt(p * (1 - p) / n)


def test_criterion_1_null_size(report):
    rate = power(W2, 1.0, 1)
    report("criterion 1 null size", 0.02 <= rate <= 0.08, f"rate={rate:.4f}, band [0.02, 0.08]")


def test_criterion_2_strong_alternative(report):
    rate = power(CMU(2), 1.0, 2)
    report("criterion 2 strong alternative", rate >= 0.98, f"rate={rate:.4f}, need >= 0.98")


def test_criterion_3_moderate_alternative(report):
    r1 = power(IW(2, 2.5), 1.0, 3)
    r2 = power(IW(2, 2.5), 2.0, 4)
    ok = 0.15 <= r1 <= 0.30 and abs(r2 - 0.24) <= 0.08
    report("criterion 3 moderate alternative", ok, f"nu=1 rate={r1:.4f} in [0.15, 0.30]; nu=2 rate={r2:.4f} within 0.24 +- 0.08")


def test_criterion_4_parameter_ordering(report):
    alt = CMT(2, 5.0)
    r1, r5 = power(alt, 1.0, 5), power(alt, 5.0, 6)
    se = math.sqrt(binom_se(r1, N_POWER) ** 2 + binom_se(r5, N_POWER) ** 2)
    ok = r1 - r5 > 3 * se
    report("criterion 4 parameter ordering", ok, f"rate(nu=1)={r1:.4f}, rate(nu=5)={r5:.4f}, margin={r1 - r5:.4f} vs 3 SE={3 * se:.4f}")


def test_criterion_5_percentile_table(report):
    cfg = validate_config(
        {
            "kind": "percentile_table",
            "seed": SEED,
            "size_pairs": [[100, 100], [1000, 1000]],
            "params_grid": [{"nu": 1}, {"nu": 5}],
            "n_reps": 1000,
        }
    )
    t = run_percentile_table(cfg)
    (q100_1, q100_5), (q1000_1, q1000_5) = t.cells
    ok = (
        abs(q100_1 / 0.0495 - 1) <= 0.2
        and abs(q1000_1 / 0.0518 - 1) <= 0.2
        and q100_5 < q100_1
        and q1000_5 < q1000_1
    )
    detail = (
        f"n=100: {q100_1:.4f} vs 0.0495, n=1000: {q1000_1:.4f} vs 0.0518 (+-20%); "
        f"nu=5: {q100_5:.4f}, {q1000_5:.4f} below nu=1"
    )
    report("criterion 5 percentile table", ok, detail)


def test_criterion_6_df_sweep(report):
    n = 1000
    cfg = validate_config({"kind": "df_sweep", "seed": SEED, "df_grid": [1, 101, 251, 501], "n_reps": n})
    rates = [row[0] / 100 for row in run_df_sweep(cfg).cells]
    monotone = all(
        b <= a + 3 * binom_se((a + b) / 2, n) for a, b in zip(rates[:-1], rates[1:])
    )
    ok = rates[0] >= 0.90 and 0.02 <= rates[-1] <= 0.09 and monotone
    report("criterion 6 df sweep", ok, f"rates at df 1/101/251/501 = {[round(r, 4) for r in rates]}")


def test_criterion_7a_reference_equals_fast(report):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 4))
        x = MatrixSample(random_sample(rng, int(rng.integers(1, 7)), d))
        y = MatrixSample(random_sample(rng, int(rng.integers(1, 7)), d, rng.uniform(0.3, 2.0)))
        p = NcwParams.create(rng.uniform(0.5, 5.0), random_spd(rng, d, 0.5) / d, random_sample(rng, 1, d)[0])
        ref = statistic_reference(x, y, p).raw
        fast = statistic_fast(x, y, p).raw
        worst = max(worst, abs(ref - fast) / max(abs(ref), 1e-300))
    report("criterion 7a reference vs fast", worst <= 1e-10, f"max relative gap {worst:.2e} over 50 instances")


def test_criterion_7b_laplace_monte_carlo(report):
    rng = np.random.default_rng(SEED + 7)
    lines, ok = [], True
    for d, shape in [(1, 1), (1, 2), (2, 2), (2, 4)]:
        sigma = random_spd(rng, d, 0.5) / d
        omega = random_sample(rng, 1, d, 0.5)[0]
        s = random_sample(rng, 1, d, 0.3)[0]
        draws = sample_ncw(shape, sigma, ncw_means_for(omega, shape), make_rng(SEED, d, shape), size=500_000)
        v = np.exp(-np.einsum("ij,nji->n", s, draws))
        se = v.std(ddof=1) / math.sqrt(v.size)
        z = abs(ncw_laplace(s, NcwParams.create(shape, sigma, omega)) - v.mean()) / se
        ok &= z < 3
        lines.append(f"(d={d},shape={shape}) z={z:.2f}")
    report("criterion 7b transform vs Monte Carlo", ok, "; ".join(lines))


def test_criterion_7c_statistic_integral(report):
    rng = np.random.default_rng(SEED + 8)
    lines, ok = [], True
    for k, (d, shape) in enumerate([(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)]):
        p = NcwParams.create(shape, random_spd(rng, d, 0.5) / d, random_sample(rng, 1, d, 0.5)[0])
        x = MatrixSample(random_sample(rng, 3, d))
        y = MatrixSample(random_sample(rng, 4, d, 1.5))
        t = sample_ncw(shape, p.sigma.entries, ncw_means_for(p.omega.entries, shape), make_rng(SEED, 70, k), size=200_000)
        l1 = np.exp(-np.einsum("tij,nji->tn", t, x.data)).mean(axis=1)
        l2 = np.exp(-np.einsum("tij,nji->tn", t, y.data)).mean(axis=1)
        v = (l1 - l2) ** 2
        se = v.std(ddof=1) / math.sqrt(v.size)
        z = abs(statistic_fast(x, y, p).raw - v.mean()) / se
        ok &= z < 3
        lines.append(f"instance {k} z={z:.2f}")
    report("criterion 7c statistic vs measure integral", ok, "; ".join(lines))


def test_criterion_8_exact_trivia(report):
    rng = np.random.default_rng(SEED + 9)
    x = MatrixSample(random_sample(rng, 15, 2))
    p = NcwParams.create(1.3, random_spd(rng, 2), random_sample(rng, 1, 2)[0])
    stat = statistic_fast(x, x, p).raw
    at_zero = ncw_laplace(np.zeros((2, 2)), p)
    pval = bootstrap_pvalue(x, x, p, 999, SEED).p_value
    ok = abs(stat) <= 1e-12 and at_zero == 1.0 and pval == 1.0
    report("criterion 8 exact trivia", ok, f"L(X,X)={stat!r}, transform(0)={at_zero!r}, p(X,X)={pval!r}")


def test_criterion_9_ingest(report):
    rng = np.random.default_rng(SEED + 10)
    prices = 100 * np.exp(np.cumsum(0.001 * rng.standard_normal((2880, 2)), axis=0))
    out = return_covariances(SeriesTable(np.arange(2880), ("a", "b"), prices), 60)
    for m in out.data:
        validate_spd(m, "psd")
    report("criterion 9 ingest", len(out) == 48 and out.dim == 2, f"{len(out)} psd matrices of dim {out.dim}")
