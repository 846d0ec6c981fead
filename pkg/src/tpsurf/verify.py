"""Per-input verification battery: runs the quantitative-regularity
checks against one mesh and reports pass/fail per criterion.

Zero-energy (flat) inputs pass trivially: every bound is vacuous when
the repulsion vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, PreconditionError, UnsupportedCaseError
from .grassmann import Plane
from .linkdiag import SphereProbe, linking_mod2
from .regdiag import (
    GraphPatch,
    ahlfors_curve,
    beta_decay_fit,
    couple_kernel_floor,
    holder_fit,
    resolve_constants,
    stopping_distance,
)
from .simplicial import SimplicialSet, quadrature
from .tpe import energy, inv_rtp, pair_stats, scaling_check


@dataclass
class Criterion:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    note: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "measured": self.measured, "note": self.note}


@dataclass
class BatteryReport:
    criteria: list
    all_passed: bool
    energy_report: dict
    constants: dict

    def as_dict(self):
        return {
            "criteria": [c.as_dict() for c in self.criteria],
            "all_passed": self.all_passed,
            "energy": self.energy_report,
            "constants": self.constants,
        }


def _probe_indices(rng, size, count):
    count = min(count, size)
    return np.sort(rng.choice(size, size=count, replace=False))


def run_battery(
    sset: SimplicialSet,
    q: float,
    order: str = "centroid",
    probes: int = 8,
    radii=None,
    delta: float | None = None,
    eta: float | None = None,
    seed: int = 0,
    threads: int = 1,
    deterministic: bool = True,
) -> BatteryReport:
    rng = np.random.default_rng(seed)
    m = sset.intrinsic_dim
    cloud = quadrature(sset, order)
    fine_cloud = cloud
    if m in (1, 2):
        try:
            fine_cloud = quadrature(sset, "bary3")
        except Exception:
            fine_cloud = cloud
    erep = energy(cloud, q, threads=threads, deterministic=deterministic)
    consts = resolve_constants(cloud, q, delta=delta, eta=eta)
    criteria: list[Criterion] = []
    e_val = erep.total_energy

    # exact scaling of the discrete sum
    if e_val > 0:
        slope = scaling_check(cloud, q, [0.5, 1.0, 2.0], threads=threads)
        want = 2 * m - q
        criteria.append(
            Criterion(
                "scaling-slope-exact",
                abs(slope - want) <= 1e-9,
                {"slope": slope, "expected": float(want)},
            )
        )
    else:
        criteria.append(
            Criterion("scaling-slope-exact", True, {}, "flat input: zero energy, trivially scale-covariant")
        )

    diam = sset.diameter()
    if radii is None:
        radii = list(np.geomspace(0.025, 0.25, 6) * diam)
    probe_idx = _probe_indices(rng, cloud.size, probes)
    probe_pts = [cloud.points[i] for i in probe_idx]

    # density ratios vs the measured-energy radius R1
    curve = ahlfors_curve(sset, probe_pts, radii, consts, e_val)
    criteria.append(
        Criterion(
            "ahlfors-witness-consistency",
            len(curve.witnesses) == 0,
            {
                "r1": curve.r1,
                "min_ratio": min(e[2] for e in curve.entries),
                "witnesses": len(curve.witnesses),
            },
            "ratios below 1/2 may only occur above the energy radius R1",
        )
    )

    # beta decay
    if e_val > 0:
        try:
            bfit = beta_decay_fit(fine_cloud, probe_pts, radii, q, e_val, restarts=4)
            if bfit.flat_input:
                criteria.append(Criterion("beta-decay", True, {}, "flat input"))
            else:
                ok = bfit.slope >= consts.lemma.kappa - 0.1
                criteria.append(
                    Criterion(
                        "beta-decay",
                        ok,
                        {"slope": bfit.slope, "kappa": consts.lemma.kappa, "r_squared": bfit.r_squared,
                         "A2_hat": bfit.extras.get("A2_hat")},
                    )
                )
        except (InsufficientDataError, PreconditionError) as exc:
            criteria.append(Criterion("beta-decay", False, {}, f"not evaluable: {exc}"))
    else:
        criteria.append(Criterion("beta-decay", True, {}, "flat input: beta identically 0"))

    # tangent-gradient oscillation exponent
    if e_val > 0:
        try:
            patch_r = 0.2 * diam
            patches = [GraphPatch(int(i), patch_r) for i in probe_idx]
            hfit = holder_fit(fine_cloud, patches, q)
            if hfit.flat_input:
                criteria.append(Criterion("holder-exponent", True, {}, "flat input"))
            else:
                ok = hfit.slope >= consts.lemma.mu - 0.05
                criteria.append(
                    Criterion(
                        "holder-exponent",
                        ok,
                        {"mu_hat": hfit.slope, "mu": consts.lemma.mu,
                         "lipschitz_ratio": hfit.extras.get("lipschitz_ratio"),
                         "A3_hat": hfit.extras.get("A3_hat")},
                    )
                )
        except (InsufficientDataError, PreconditionError) as exc:
            criteria.append(Criterion("holder-exponent", False, {}, f"not evaluable: {exc}"))
    else:
        criteria.append(Criterion("holder-exponent", True, {}, "flat input: gradient oscillation 0"))

    # stopping distances and the good-couple kernel floor
    if e_val > 0:
        ds_values = []
        ratio_ok = True
        floor_violations = 0
        note = ""
        for i in probe_idx[: min(4, len(probe_idx))]:
            try:
                res = stopping_distance(cloud, int(i), consts)
            except (PreconditionError,) as exc:
                note = str(exc)
                continue
            ds_values.append(res.d_s)
            hist = res.radii_history
            ratio_ok = ratio_ok and all(b > 2.0 * a for a, b in zip(hist, hist[1:]))
            if res.couple is not None:
                floor = couple_kernel_floor(res.couple)
                wball = cloud.subset_in_ball(res.couple.y, res.couple.alpha**2 * res.couple.d)
                for zi in res.couple.member_points[:32]:
                    for wi in wball[:32]:
                        if np.array_equal(cloud.points[zi], cloud.points[wi]):
                            continue
                        v = inv_rtp(cloud.points[zi], Plane(cloud.frames[zi]), cloud.points[wi])
                        if v <= floor:
                            floor_violations += 1
        if ds_values:
            r1 = consts.r1(e_val)
            ok = min(ds_values) >= 0.95 * r1 and ratio_ok and floor_violations == 0
            criteria.append(
                Criterion(
                    "stopping-consistency",
                    ok,
                    {"min_d_s": min(ds_values), "r1": r1,
                     "radii_ratios_above_2": ratio_ok,
                     "kernel_floor_violations": floor_violations},
                )
            )
        else:
            criteria.append(Criterion("stopping-consistency", True, {}, note or "no probe produced a stopping distance"))
    else:
        criteria.append(Criterion("stopping-consistency", True, {}, "flat input"))

    # kernel boundedness
    kmax, dmin = pair_stats(cloud, threads=threads)
    criteria.append(
        Criterion(
            "inv-rtp-bounded",
            math.isfinite(kmax),
            {"max_inv_rtp": kmax, "min_separation": dmin},
        )
    )

    # linking spot check on the supported cases
    n = sset.ambient_dim
    if (m, n) in ((1, 3), (2, 3)) and e_val > 0:
        spacing = 2.0 * float(np.median(sset.simplex_diameters))
        center = np.mean(cloud.points, axis=0)
        interior = probe_idx[np.argsort([np.linalg.norm(cloud.points[i] - center) for i in probe_idx])]
        parities = []
        for i in interior[:3]:
            x = cloud.points[int(i)]
            normal = Plane(cloud.frames[int(i)]).orthogonal_complement()
            try:
                if m == 1:
                    probe = SphereProbe.circle(x, spacing, normal, 32)
                else:
                    probe = SphereProbe.point_pair(x, spacing, normal)
                parities.append(linking_mod2(sset, probe))
            except (PreconditionError, UnsupportedCaseError):
                continue
        if parities:
            criteria.append(
                Criterion("local-linking", all(p == 1 for p in parities), {"parities": parities})
            )

    all_passed = all(c.passed for c in criteria)
    return BatteryReport(
        criteria=criteria,
        all_passed=all_passed,
        energy_report=erep.as_dict(),
        constants=consts.as_dict(),
    )
