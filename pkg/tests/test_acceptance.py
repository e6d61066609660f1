"""Acceptance suite: one verdict line per criterion, printed in the terminal summary."""

import time

import numpy as np
import pytest
from scipy.integrate import quad

from curves import cyclic_curve, random_curve, smooth_gauge, zero_diagonal_unitary
from offdiag_holonomy import (
    SigmaTable,
    TripodPath,
    apply_gauge,
    build_sigma_table,
    enumerate_strict_sequences,
    gamma_kernel_projector,
    gamma_kernel_transport,
    gamma_product,
    holonomy_of_order,
    nonzero_existence_check,
    numerical_rank,
    tripod_curve,
    tripod_oracle,
)
from offdiag_holonomy.cli import compare_with_oracle, default_oracle_paths
from offdiag_holonomy.holonomy import HOLONOMY_TOL, all_sequences
from offdiag_holonomy.interferometer import (
    ProtocolSpec,
    adiabatic_deviation,
    block_to_operator,
    extract_holonomy,
    nonadiabatic_u,
    run_protocol,
    schrodinger_curve,
)
from offdiag_holonomy.models import (
    nodal_path,
    rank_counterexample,
    tripod_frames,
    tripod_hamiltonian,
)
from offdiag_holonomy.numkernel import unitarity_defect

ACCEPTANCE_SEQUENCES = (
    ("+",), ("-",),
    ("+", "-"), ("-", "+"),
    ("+", "d"), ("-", "d"), ("d", "+"), ("d", "-"),
    ("+", "-", "d"), ("-", "+", "d"), ("+", "d", "-"), ("-", "d", "+"),
    ("d", "+", "-"), ("d", "-", "+"),
)
STRESS_PATHS = [
    TripodPath.linear(np.pi, 0.7),
    TripodPath.fourier([0.0, 0.6], [0.4, 0.3]),
    TripodPath.linear(np.pi / 2, 0.3),
    TripodPath.fourier([np.pi / 2, 0.2], [1.1, -0.2]),
    nodal_path([1.4, 0.3], [0.2]),
    nodal_path([2.2, -0.2], [0.5, 0.1], branch=1),
]


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# 1 ---------------------------------------------------------------------------


def test_criterion_1_tripod_closed_forms(criterion):
    paths = default_oracle_paths(seed=2024) + STRESS_PATHS
    t0 = time.perf_counter()
    report = compare_with_oracle(paths, ACCEPTANCE_SEQUENCES, grid=400, tolerance=1e-5)
    elapsed = time.perf_counter() - t0
    ok = report["ok"] and elapsed < 60.0
    criterion("1", ok, f"{len(paths)} paths, worst deviation {report['worst']:.2e} (< 1e-5), "
                       f"{len(report['status_mismatches'])} status mismatches, "
                       f"{len(report['errors'])} errors, {elapsed:.1f}s (< 60s)")
    assert not report["errors"]
    assert not report["status_mismatches"]
    assert report["worst"] < 1e-5
    assert elapsed < 60.0


def test_criterion_1_special_statuses():
    expect = {
        0: {("+", "d"): "undefined", ("d", "+"): "undefined", ("+",): "undefined"},
        1: {("+", "-"): "undefined", ("+", "d"): "undefined", ("-", "d", "+"): "undefined"},
        2: {("d",): "partial"},
        3: {("d",): "partial"},
        4: {("+", "d"): "undefined", ("-", "+", "d"): "undefined", ("d", "+"): "partial"},
        5: {("-", "d"): "undefined", ("+", "d", "-"): "undefined", ("d", "-", "+"): "partial"},
    }
    for i, cases in expect.items():
        p = STRESS_PATHS[i]
        t = build_sigma_table(tripod_curve(p, 400))
        oracle = tripod_oracle(p)
        for seq, status in cases.items():
            assert oracle[seq].status == status, (i, seq)
            assert holonomy_of_order(t, oracle.labels(seq)).status == status, (i, seq)


# 2 ---------------------------------------------------------------------------


def test_criterion_2_projector_vs_transport(criterion):
    # same declared fixture ensemble as criterion 1
    grids = [50, 100, 200, 400]
    paths = default_oracle_paths(seed=2024)
    slopes, at400, richardson = [], [], []
    for p in paths:
        curves = {M: tripod_curve(p, M) for M in grids}
        for l in (1, 2, 3):
            diffs = []
            for M, c in curves.items():
                ref = gamma_kernel_transport(c, l).operator
                k = gamma_kernel_projector(c, l, levels=2 if M == 400 else 0)
                diffs.append(np.linalg.norm(k.operator - ref, 2))
                if M == 400:
                    richardson.append(np.linalg.norm(k.extrapolated - ref, 2))
            slopes.append(loglog_slope(grids, diffs))
            at400.append(diffs[-1])
    slope_ok = all(-1.15 < s < -0.85 for s in slopes)
    within = sum(d < 5e-3 for d in at400)
    ok = slope_ok and max(at400) < 5e-3 and max(richardson) < 1e-6
    criterion("2", ok, f"{len(paths)} paths x 3 subspaces; slopes in [{min(slopes):.3f}, "
                       f"{max(slopes):.3f}] (first order); max diff at M=400 {max(at400):.2e} "
                       f"(< 5e-3; {within}/{len(at400)} within); Richardson "
                       f"{max(richardson):.2e} (< 1e-6)")
    assert slope_ok
    assert max(richardson) < 1e-6
    assert max(at400) < 5e-3


# 3 ---------------------------------------------------------------------------


def rank_sums_hold(t):
    for l in range(1, t.eta + 1):
        n_l = t.dims[l - 1]
        col = sum(numerical_rank(t.block(k, l), HOLONOMY_TOL) for k in range(1, t.eta + 1))
        row = sum(numerical_rank(t.block(l, k), HOLONOMY_TOL) for k in range(1, t.eta + 1))
        if col < n_l or row < n_l:
            return False
    return True


def trace_identity_error(t, max_power=4):
    worst = 0.0
    S_pow = np.eye(t.N, dtype=complex)
    for nu in range(1, max_power + 1):
        S_pow = S_pow @ t.S_tot
        rhs = sum(np.trace(gamma_product(t, seq)) for seq in all_sequences(t.eta, nu))
        worst = max(worst, abs(np.trace(S_pow) - rhs))
    return worst


def test_criterion_3_structure(criterion):
    rng = np.random.default_rng(3)
    tables = []
    for dims in [(1, 1, 2), (2, 2)]:
        for _ in range(100):
            tables.append(build_sigma_table(random_curve(rng, dims, grid=40)))
    for p in STRESS_PATHS:
        tables.append(build_sigma_table(tripod_curve(p, 200)))
    unit = max(t.unitarity_defect() for t in tables)
    bounds = all(rank_sums_hold(t) for t in tables) and rank_sums_hold(rank_counterexample())

    fixture = rank_counterexample()
    fixture_zero = fixture.unitarity_defect() < 1e-12 and all(
        np.all(gamma_product(fixture, seq) == 0)
        for kappa in (2, 3) for seq in enumerate_strict_sequences(3, kappa)
    )

    eta3 = [t for t in tables if t.eta == 3] + [fixture]
    trace_err = max(trace_identity_error(t) for t in eta3)

    dims_pool = [(1, 1, 2), (2, 2), (1, 1, 1), (2, 1, 1), (1, 2, 2, 1), (3, 2, 1)]
    hits = 0
    for trial in range(1000):
        dims = dims_pool[trial % len(dims_pool)]
        t = SigmaTable.from_matrix(zero_diagonal_unitary(rng, dims), dims)
        seq = nonzero_existence_check(t)
        hits += int(numerical_rank(gamma_product(t, seq), HOLONOMY_TOL) > 0)

    ok = unit < 1e-8 and bounds and fixture_zero and trace_err < 1e-8 and hits == 1000
    criterion("3", ok, f"(a) unitarity defect {unit:.1e} (< 1e-8); (b) rank sums hold: {bounds}; "
                       f"(c) counterexample strict gammas zero: {fixture_zero}; "
                       f"(d) trace identity error {trace_err:.1e} (< 1e-8); "
                       f"(e) reductio {hits}/1000")
    assert unit < 1e-8
    assert bounds
    assert fixture_zero
    assert trace_err < 1e-8
    assert hits == 1000


# 4 ---------------------------------------------------------------------------


def test_criterion_4_cyclic(criterion):
    rng = np.random.default_rng(4)
    worst_gamma, worst_unit = 0.0, 0.0
    for i in range(50):
        dims = [(1, 1, 2), (2, 2), (1, 2, 1)][i % 3]
        c = cyclic_curve(rng, dims, grid=60)
        assert c.is_cyclic(atol=1e-10)
        t = build_sigma_table(c)
        for kappa in range(2, t.eta + 1):
            for seq in enumerate_strict_sequences(t.eta, kappa):
                worst_gamma = max(worst_gamma, np.linalg.norm(gamma_product(t, seq), 2))
        for l in range(1, t.eta + 1):
            worst_unit = max(worst_unit, unitarity_defect(holonomy_of_order(t, (l,)).holonomy))
    ok = worst_gamma < 1e-8 and worst_unit < 1e-8
    criterion("4", ok, f"max strict gamma norm {worst_gamma:.1e} (< 1e-8), "
                       f"max first-order unitarity defect {worst_unit:.1e} (< 1e-8)")
    assert worst_gamma < 1e-8
    assert worst_unit < 1e-8


# 5 ---------------------------------------------------------------------------


def test_criterion_5_gauge_covariance(criterion):
    rng = np.random.default_rng(5)
    bases = [random_curve(rng, dims, grid=120).as_samples() for dims in [(1, 1, 2), (2, 2)]]
    tables = [build_sigma_table(c, method="overlap") for c in bases]
    worst_cov, worst_sv = 0.0, 0.0
    for trial in range(100):
        b = trial % 2
        c, t = bases[b], tables[b]
        g = smooth_gauge(rng, c.dims, c.grid)
        tg = build_sigma_table(apply_gauge(c, g), method="overlap")
        seqs = [(l,) for l in range(1, t.eta + 1)]
        for kappa in range(2, t.eta + 1):
            seqs += enumerate_strict_sequences(t.eta, kappa)
        for seq in seqs:
            U0 = g.blocks[seq[0] - 1][0]
            h, hg = holonomy_of_order(t, seq), holonomy_of_order(tg, seq)
            worst_cov = max(worst_cov,
                            np.max(np.abs(hg.gamma - U0.conj().T @ h.gamma @ U0)),
                            np.max(np.abs(hg.holonomy - U0.conj().T @ h.holonomy @ U0)))
            worst_sv = max(worst_sv, np.max(np.abs(hg.singular_values - h.singular_values)))
    ok = worst_cov < 1e-8 and worst_sv < 1e-10
    criterion("5", ok, f"100 gauges, covariance error {worst_cov:.1e} (< 1e-8), "
                       f"singular value drift {worst_sv:.1e} (< 1e-10)")
    assert worst_cov < 1e-8
    assert worst_sv < 1e-10


# 6 ---------------------------------------------------------------------------


def abelian_phase_factors(c):
    """``exp(int <dl|l> ds)`` per 1-d subspace, by adaptive quadrature.

    The integrand is purely imaginary for normalized frames.
    """
    out = []
    for l in range(c.eta):
        def a(s):
            return (c.derivative_fn(s)[l].conj().T @ c.frames_fn(s)[l])[0, 0].imag
        out.append(np.exp(1j * quad(a, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)[0]))
    return out


def test_criterion_6_abelian(criterion):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        c = random_curve(rng, (1, 1, 1), grid=400)
        t = build_sigma_table(c)
        f0 = [c.frames_fn(0.0)[l][:, 0] for l in range(3)]
        f1 = [c.frames_fn(1.0)[l][:, 0] for l in range(3)]
        phase = abelian_phase_factors(c)
        for kappa in (2, 3):
            for seq in enumerate_strict_sequences(3, kappa):
                prod = 1.0 + 0j
                for a, b in zip(seq, seq[1:] + seq[:1]):
                    z = np.vdot(f0[b - 1], f1[a - 1]) * phase[a - 1]
                    prod *= z / abs(z)
                U = holonomy_of_order(t, seq).holonomy[0, 0]
                worst = max(worst, abs(U - prod))
    ok = worst < 1e-10
    criterion("6", ok, f"50 curves, kappa in (2, 3), max |U - product of phases| {worst:.1e} (< 1e-10)")
    assert worst < 1e-10


# 7 ---------------------------------------------------------------------------

INTERFEROMETER_PATH = TripodPath.fourier([1.1, 0.2], [0.7, -0.1])


def test_criterion_7_interferometer(criterion):
    rng = np.random.default_rng(7)
    curve = tripod_curve(INTERFEROMETER_PATH, 200)
    seqs = [(3,), (1,), (3, 1), (1, 3), (2, 3), (1, 2, 3), (3, 1, 2), (2, 3, 1)]

    adiabatic_err = 0.0
    for seq in seqs:
        for _ in range(3):
            base = ProtocolSpec(seq, "adiabatic", curve)
            n = base.n1
            H = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            w, Q = np.linalg.eigh(H + H.conj().T)
            block = Q @ np.diag(np.exp(1j * w)) @ Q.conj().T
            res = run_protocol(ProtocolSpec(seq, "adiabatic", curve, V=block_to_operator(block, base)))
            adiabatic_err = max(adiabatic_err, abs(res.p - res.p_formula))

    grids = [50, 100, 200]
    filt = [abs(r.p - r.p_formula) for r in (
        run_protocol(ProtocolSpec((3, 1), "filtering", tripod_curve(INTERFEROMETER_PATH, 100),
                                  filter_grid=M)) for M in grids)]
    filt_slope = loglog_slope(grids, filt)

    H_of_s = lambda s: tripod_hamiltonian(INTERFEROMETER_PATH, s)  # noqa: E731
    sc = schrodinger_curve(H_of_s, tripod_frames(INTERFEROMETER_PATH, 0.0), 100)
    Ubar = nonadiabatic_u(H_of_s, sc)
    total = sum(gamma_kernel_transport(sc, l).operator for l in range(1, sc.eta + 1))
    nonad_err = float(np.linalg.norm(Ubar - total, 2))

    worst_gain, pmax_err = -np.inf, 0.0
    for seq in seqs:
        ext = extract_holonomy(ProtocolSpec(seq, "adiabatic", curve), n_trials=1000, seed=sum(seq))
        worst_gain = max(worst_gain, ext.flags["max_random_gain"])
        g = gamma_product(build_sigma_table(curve), seq)
        s = np.linalg.svd(g, compute_uv=False)
        n = g.shape[0]
        pmax_err = max(pmax_err, abs(ext.p_max - (0.25 + np.sum(s**2) / (4 * n) + np.sum(s) / (2 * n))),
                       abs(ext.p_max - ext.p_at_V_star))

    ok = (adiabatic_err < 1e-10 and -1.15 < filt_slope < -0.85 and nonad_err < 1e-6
          and worst_gain <= 1e-12 and pmax_err < 1e-9)
    criterion("7", ok, f"adiabatic |p - formula| {adiabatic_err:.1e} (< 1e-10); filtering slope "
                       f"{filt_slope:.3f} (first order); nonadiabatic {nonad_err:.1e} (< 1e-6); "
                       f"best random gain over V* {worst_gain:.1e} (<= 0); p_max error {pmax_err:.1e} "
                       f"(< 1e-9)")
    assert adiabatic_err < 1e-10
    assert -1.15 < filt_slope < -0.85
    assert nonad_err < 1e-6
    assert worst_gain <= 1e-12
    assert pmax_err < 1e-9


def test_criterion_7_tripod_point_five_eighths(criterion):
    # the dark-bright gamma is largest at theta_1 = pi/2, so this is the best tripod point
    c = tripod_curve(TripodPath.linear(np.pi / 2, 0.4), 400)
    ext = extract_holonomy(ProtocolSpec((3, 1), "adiabatic", c), n_trials=1000)
    dev = abs(ext.p_max - 5 / 8)
    criterion("7.tripod", dev < 1e-6,
              f"seq (d,+) p_max {ext.p_max:.6f} vs stated 5/8; |dev| {dev:.2e} (< 1e-6). "
              f"gamma has one singular value sin^2(theta_1)/2 <= 1/2, so p_max <= 13/32")
    assert dev < 1e-6


def test_tripod_point_attained_value():
    c = tripod_curve(TripodPath.linear(np.pi / 2, 0.4), 400)
    ext = extract_holonomy(ProtocolSpec((3, 1), "adiabatic", c), n_trials=1000)
    assert ext.p_max == pytest.approx(13 / 32, abs=1e-6)


# 8 ---------------------------------------------------------------------------


def test_criterion_8_adiabatic_limit(criterion):
    p = TripodPath.fourier([1.1, 0.2], [0.7, -0.1], omega=1.0)
    c = tripod_curve(p, 200)
    H = lambda s: tripod_hamiltonian(p, s)  # noqa: E731
    devs = [adiabatic_deviation(H, c, T / p.omega) for T in (10.0, 100.0, 1000.0)]
    ok = devs[0] > devs[1] > devs[2]
    criterion("8", ok, "deviation at T = 10, 100, 1000: " + ", ".join(f"{d:.2e}" for d in devs)
              + " (monotone decreasing)")
    assert ok
