"""Acceptance battery: one test per criterion, each printing a PASS/FAIL
line (run with `pytest -s` to see them inline).

Every tolerance is pinned here, not in helper code.  The reference inputs
are the exactly-known branched curves on the default grid and the synthetic
homogeneous maps; independent oracles (exhaustive matching enumeration,
closed-form excess, hand-computed logarithms) are built inline."""

import itertools
import math
import time

import numpy as np
import pytest

import qbranch as qb
from qbranch.cli import main as cli_main

CURVE_SET = [(2, 3), (2, 5), (3, 4), (3, 5), (4, 5)]
ALPHAS = [0.5, 1.0, 1.5, 2.0, 5 / 3]


def report(criterion, passed, detail):
    line = f"[criterion {criterion:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def curves(full_grid):
    return {(q, p): qb.make_multigraph(qb.CurveSpec(q, p), full_grid)
            for (q, p) in CURVE_SET}


def test_criterion_01_singularity_degree_ground_truth(curves):
    worst_err = worst_spread = worst_time = 0.0
    for (q, p), f in curves.items():
        t0 = time.time()
        est = qb.singularity_degree(f)
        elapsed = time.time() - t0
        ratio = p / q
        assert est.converged, (q, p)
        worst_err = max(worst_err, abs(est.value - ratio) / ratio)
        worst_spread = max(worst_spread, est.spread / ratio)
        worst_time = max(worst_time, elapsed)
    report(1, worst_err < 0.02 and worst_spread < 0.02 and worst_time < 60.0,
           f"degree err {worst_err:.2e}, spread {worst_spread:.2e}, "
           f"max {worst_time:.1f}s per spec")


def test_criterion_02_homogeneity_frequency(full_grid):
    radii = qb.default_profile_radii(full_grid, octaves=2.0)
    worst = 0.0
    for alpha in ALPHAS:
        f = qb.homogeneous_map(alpha, grid=full_grid)
        prof = qb.frequency_profile(f, radii=radii)
        recs = prof.valid_records()
        assert len(recs) == len(radii)
        worst = max(worst, max(abs(rec.I - alpha) for rec in recs))
    report(2, worst < 1e-3, f"max |I - alpha| = {worst:.2e} over two octaves")


def test_criterion_03_cutoff_independence(curves, full_grid):
    radii = qb.default_profile_radii(full_grid, octaves=2.0)
    worst = 0.0
    for (q, p), f in curves.items():
        lim_ramp = qb.frequency_limit(
            qb.frequency_profile(f, radii=radii, cutoff=qb.RAMP))
        lim_sharp = qb.frequency_limit(
            qb.frequency_profile(f, radii=radii, cutoff=qb.SHARP))
        worst = max(worst, abs(lim_sharp["estimate"] - lim_ramp["estimate"])
                    / lim_ramp["estimate"])
    report(3, worst < 0.01, f"max cutoff disagreement {worst:.2e}")


def test_criterion_04_monotonicity(curves, full_grid):
    radii = qb.default_profile_radii(full_grid, octaves=2.0)
    worst = np.inf
    for (q, p), f in curves.items():
        prof = qb.frequency_profile(f, radii=radii)
        I = [rec.I for rec in prof.valid_records()]
        for i in range(len(I)):
            for j in range(i + 1, len(I)):
                worst = min(worst, I[j] - I[i])  # r_j > r_i
    report(4, worst >= -1e-3, f"min I(r2) - I(r1) = {worst:.2e}")


def test_criterion_05_matching_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for q in range(1, 7):
        perms = np.array(list(itertools.permutations(range(q))))
        for _ in range(1000):
            a = rng.normal(size=(q, 2))
            b = rng.normal(size=(q, 2))
            # exhaustive enumeration with the same index-ordered summation
            diff = a[:, None, :] - b[None, :, :]
            cost = np.einsum("ijk,ijk->ij", diff, diff)
            all_costs = cost[np.arange(q)[None, :], perms].sum(axis=1)
            oracle = float(np.sqrt(all_costs.min()))
            got = qb.metric_g(qb.QPoint(a), qb.QPoint(b))
            worst = max(worst, abs(got - oracle))
    report(5, worst == 0.0, f"max |assignment - exhaustive| = {worst!r} "
           "over 1000 pairs for each Q <= 6")


def test_criterion_06_energy_decomposition(rng):
    from conftest import random_smooth_qfunction
    grid = qb.default_grid(r_min=2.0 ** -6, n_theta=64)
    worst = 0.0
    for i in range(100):
        q = 2 + i % 3
        f = random_smooth_qfunction(grid, q, rng)
        D_f = qb.dirichlet_energy(f, grid.r_max)
        D_v = qb.dirichlet_energy(qb.average_free_part(f), grid.r_max)
        D_eta = qb.dirichlet_energy(qb.eta_map(f), grid.r_max)
        worst = max(worst, abs(D_f - D_v - q * D_eta) / abs(D_f))
    report(6, worst <= 1e-10,
           f"max relative decomposition defect {worst:.2e} on 100 maps")


def test_criterion_07_variation_identities(curves, full_grid):
    worst = 0.0
    for (q, p), f in curves.items():
        for s in (1.0, 0.5, 0.25):
            res = qb.variation_residuals(f, r=s)
            worst = max(worst, res["residual_outer"], res["residual_inner"])
    bad = qb.homogeneous_map(
        1.0, boundary=qb.constant_profile([[1, 0], [-1, 0]]), grid=full_grid)
    power = qb.variation_residuals(bad, r=0.5)["residual_inner"]
    report(7, worst < 1e-3 and power > 1e-2,
           f"max minimizer residual {worst:.2e}, "
           f"non-minimizer inner residual {power:.2f}")


def test_criterion_08_hardt_simon(full_grid):
    rho = 2.0 ** -8
    worst_res = 0.0
    for alpha in (1.5, 5 / 3):
        f = qb.homogeneous_map(alpha, grid=full_grid)
        res = qb.hardt_simon_check(f, rho_inner=rho)
        worst_res = max(worst_res, res.polar_identity_residual)
    div = qb.hardt_simon_check(
        qb.homogeneous_map(0.8, grid=full_grid), rho_inner=rho)
    lin = qb.hardt_simon_check(
        qb.homogeneous_map(1.0,
                           boundary=qb.constant_profile([[1, 0], [-1, 0]]),
                           grid=full_grid),
        rho_inner=rho, alpha=1.0)
    report(8, worst_res < 0.01 and div.divergent
           and abs(lin.integral) <= 1e-10,
           f"polar residual {worst_res:.2e}, divergence flag "
           f"{div.divergent}, degree-1 integral {lin.integral:.1e}")


def test_criterion_09_excess_decay(curves):
    radii = [2.0 ** -k for k in range(9, 2, -1)]
    ok = True
    details = []
    for (q, p) in [(2, 3), (3, 4)]:
        fit = qb.excess_decay_fit(curves[(q, p)], radii)
        target = 2 * (p / q - 1)
        err = abs(fit["exponent"] - target) / target
        ok = ok and err < 0.10
        details.append(f"({q},{p}): exponent {fit['exponent']:.4f}")
        # two-sided bound below r0 = 1/4 with gamma = 2(p/Q - 1) + 0.1
        gamma = target + 0.1
        ex = {r: qb.spherical_excess(curves[(q, p)], r).excess
              for r in radii}
        below = [r for r in radii if r < 0.25]
        for i, r in enumerate(below):
            for s in below[i + 1:]:
                ok = ok and ex[r] >= (r / s) ** gamma * ex[s]
    report(9, ok, "; ".join(details))


def test_criterion_10_bv_tracker(curves, full_grid):
    # negative variation on the exact minimizers; the threshold 0.2 admits
    # at least one full interval for every spec (the (4,5) excess is
    # 5 sqrt(r), which does not reach 0.1 above the scan floor)
    worst_total = 0.0
    for (q, p), f in curves.items():
        iv = qb.intervals_of_flattening(f, eps3_sq=0.2)
        prof = qb.universal_frequency(f, iv)
        worst_total = max(worst_total,
                          qb.bv_negative_variation(prof)["total"])
    # injected synthetic dips recovered to rounding
    from qbranch.scaletrack import ProfileRecord, JumpRecord
    depth = 0.2
    records = [ProfileRecord(r=2.0 ** -k, j=0,
                             I=1.5 - (depth if k == 5 else 0.0))
               for k in range(9, 0, -1)]
    dip = qb.UniversalProfile(records=records, jumps=[], interval_m0=[0.1])
    got = qb.bv_negative_variation(dip)["total"]
    dip_err = abs(got - (math.log(2.5) - math.log(2.5 - depth)))
    # jump magnitudes against the interval parameter on the perturbed curve:
    # its excess decays quadratically, so the faithful pipeline yields a
    # single flattening interval and an empty jump table (the bound holds
    # vacuously); the accounting itself is exercised with synthetic jumps
    # whose sizes follow m0^gamma exactly
    pert = qb.make_multigraph(qb.CurveSpec(2, 5, (0, 0, 1)), full_grid)
    iv = qb.intervals_of_flattening(pert, eps3_sq=0.1)
    prof = qb.universal_frequency(pert, iv)
    jump_sizes = [abs(math.log(jp.I_right + 1) - math.log(jp.I_left + 1))
                  for jp in sorted(prof.jumps, key=lambda jp: -jp.t)]
    m0s = [jp.m0 for jp in sorted(prof.jumps, key=lambda jp: -jp.t)]
    monotone = all(a >= b for a, b in zip(jump_sizes, jump_sizes[1:]))
    budget_ok = all(sz <= 10.0 * m0 ** 0.25
                    for sz, m0 in zip(jump_sizes, m0s))
    gamma = 0.7
    synth_m0 = [0.08, 0.04, 0.02, 0.01]
    synth_records = []
    synth_jumps = []
    level = 1.5
    for k, m0 in enumerate(synth_m0):
        t = 2.0 ** -(k + 2)
        if k > 0:
            upper = level
            # drop of exactly m0^gamma in log(I + 1) going up in radius
            level = (upper + 1.0) * math.exp(m0 ** gamma) - 1.0
            synth_jumps.append(JumpRecord(t=t, I_left=level, I_right=upper,
                                          m0=m0))
        synth_records.append(ProfileRecord(r=t, j=k, I=level,
                                           jump_flag=k > 0))
    synth = qb.UniversalProfile(records=synth_records, jumps=synth_jumps,
                                interval_m0=synth_m0)
    out = qb.bv_negative_variation(synth)
    expected_jump = sum(m0 ** gamma for m0 in synth_m0[1:])
    synth_err = abs(out["jump_part"] - expected_jump)
    sizes = [abs(math.log(jp.I_right + 1) - math.log(jp.I_left + 1))
             for jp in sorted(synth_jumps, key=lambda jp: -jp.t)]
    synth_monotone = all(a >= b for a, b in zip(sizes, sizes[1:]))
    report(10, worst_total < 0.01 and dip_err < 1e-12 and monotone
           and budget_ok and synth_err < 1e-12 and synth_monotone,
           f"max negative variation {worst_total:.2e}, dip defect "
           f"{dip_err:.1e}, perturbed-curve jump table size "
           f"{len(jump_sizes)} (single flattening interval), synthetic "
           f"jump defect {synth_err:.1e}")


def test_criterion_11_selfcheck_determinism(tmp_path):
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"threads{threads}"
        code = cli_main(["selfcheck", "--threads", str(threads),
                         "--out", str(out)])
        assert code == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    identical = all((outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
                    for n in names)
    report(11, identical,
           f"{len(names)} selfcheck artifacts byte-identical for 1 vs 3 "
           "threads")
