"""Monte Carlo phase estimation, dose accounting, and synthetic imaging.

The dose bookkeeping rests on two closed forms: a conventional scheme
needs about (2/dphi)^2 electrons to see a phase difference dphi, while
k-electron entangled groups need (1/k)(2/dphi)^2, reaching the
Heisenberg limit of about 2/dphi electrons when the whole budget fits
in one group.  The estimators here are exact maximum likelihood for the
corresponding one-parameter Bernoulli models, whose Fisher information
is 1 per electron (conventional) and k per electron (entangled), so the
closed-form scaling is also the achievable variance scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import detector as det_mod
from . import protocol
from .detector import DetectorModel
from .errors import AmbiguityError, BudgetError, DivergentDoseError
from .protocol import GroupPlan
from .streams import DOMAIN_ESTIMATE, DOMAIN_IMAGE, DOMAIN_SCALING, derive

MODES = ("conventional", "entangled")


# ---------------------------------------------------------------------------
# closed-form dose formulas


def required_electrons_conventional(delta_phi: float) -> int:
    """ceil((2 / delta_phi)^2), the conventional-scheme electron count."""
    if delta_phi == 0.0:
        raise DivergentDoseError("electron count diverges at delta_phi = 0")
    if not 0.0 < abs(delta_phi) < math.pi:
        raise ValueError(f"|delta_phi| must lie in (0, pi), got {delta_phi!r}")
    return math.ceil((2.0 / delta_phi) ** 2)


def required_electrons_entangled(delta_phi: float, k: int) -> int:
    """ceil((1/k)(2 / delta_phi)^2); equals the conventional count at k = 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if delta_phi == 0.0:
        raise DivergentDoseError("electron count diverges at delta_phi = 0")
    if not 0.0 < abs(delta_phi) < math.pi:
        raise ValueError(f"|delta_phi| must lie in (0, pi), got {delta_phi!r}")
    return math.ceil((2.0 / delta_phi) ** 2 / k)


def heisenberg_k(delta_phi: float) -> int:
    """Group size at which the whole budget is one group: k = ceil(2 / |delta_phi|)."""
    if delta_phi == 0.0:
        raise DivergentDoseError("Heisenberg group size diverges at delta_phi = 0")
    if not 0.0 < abs(delta_phi) < math.pi:
        raise ValueError(f"|delta_phi| must lie in (0, pi), got {delta_phi!r}")
    return math.ceil(2.0 / abs(delta_phi))


@dataclass(frozen=True)
class DoseReport:
    """Electron counts of both schemes for one (delta_phi, k) working point."""

    delta_phi: float
    k: int
    n_conventional: int
    n_entangled: int
    advantage: float

    @classmethod
    def from_closed_forms(cls, delta_phi: float, k: int) -> "DoseReport":
        # advantage uses the un-rounded formulas, so it is exactly k
        return cls(
            delta_phi=delta_phi,
            k=k,
            n_conventional=required_electrons_conventional(delta_phi),
            n_entangled=required_electrons_entangled(delta_phi, k),
            advantage=(2.0 / delta_phi) ** 2 / ((2.0 / delta_phi) ** 2 / k),
        )


# ---------------------------------------------------------------------------
# single-shot estimators


@dataclass(frozen=True)
class EstimationResult:
    """Outcome of one phase estimate plus its dose accounting."""

    estimate: float
    std_error: float
    trials: int
    electrons_used: int
    boundary_discards: int
    mode: str
    k: int = 1


def _invert_conventional(p_hat: float) -> float:
    return 2.0 * math.asin(min(1.0, math.sqrt(max(0.0, p_hat))))


def _invert_quadrature(p_hat: float, k: int) -> float:
    return math.asin(min(1.0, max(-1.0, 2.0 * p_hat - 1.0))) / k


def estimate_phase(
    mode: str,
    true_delta_phi: float,
    electron_budget: int,
    det: DetectorModel | None = None,
    rng: np.random.Generator | None = None,
    *,
    k: int = 1,
    group_size_mode: str = "fixed",
    coherence: float = 1.0,
) -> EstimationResult:
    """Estimate the specimen phase difference from a fixed electron budget.

    conventional: unentangled electrons measured in the symmetric /
    antisymmetric basis, P(anti) = sin^2(dphi/2), inverted by maximum
    likelihood (the arcsine inversion; sign is not resolved).

    entangled: k-electron groups run through the qubit protocol and read
    out in the sign-sensitive quadrature basis, P(+) = (1 + sin(k dphi))/2.
    Requires |k * dphi| < pi/2 so the inversion is unambiguous.  Group
    sizes are fixed at k, or Poisson with mean k when `group_size_mode`
    is "poisson" (beam-blanker statistics); boundary discards consume
    budget but carry no information.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if electron_budget < 1:
        raise BudgetError(f"electron budget must be >= 1, got {electron_budget}")
    if rng is None:
        raise ValueError("an explicit random generator is required")

    if mode == "conventional":
        outcomes = protocol.conventional_trials(true_delta_phi, electron_budget, rng)
        p_hat = float(outcomes.mean())
        return EstimationResult(
            estimate=_invert_conventional(p_hat),
            std_error=1.0 / math.sqrt(electron_budget),
            trials=electron_budget,
            electrons_used=electron_budget,
            boundary_discards=0,
            mode=mode,
        )

    if k < 1:
        raise ValueError("k must be >= 1")
    if abs(k * true_delta_phi) >= 0.5 * math.pi:
        raise AmbiguityError(
            f"|k * delta_phi| = {abs(k * true_delta_phi):.4f} >= pi/2; the quadrature inversion is ambiguous"
        )
    if electron_budget < k:
        raise BudgetError(f"budget {electron_budget} is smaller than one group of {k}")
    if det is None:
        det = det_mod.trivial()

    if group_size_mode == "fixed":
        plan = GroupPlan(k=k, delta_phi=true_delta_phi)
        batch = protocol.simulate_groups(
            plan, det, electron_budget // k, rng, basis="quadrature", coherence=coherence, budget=electron_budget
        )
        if batch.groups == 0:
            raise BudgetError("no group completed within the electron budget")
        p_hat = float(batch.outcomes.mean())
        return EstimationResult(
            estimate=_invert_quadrature(p_hat, k),
            std_error=1.0 / (k * math.sqrt(batch.groups)),
            trials=batch.groups,
            electrons_used=batch.electrons_used,
            boundary_discards=batch.boundary_discards,
            mode=mode,
            k=k,
        )
    if group_size_mode != "poisson":
        raise ValueError(f"unknown group size mode {group_size_mode!r}")
    return _estimate_poisson(true_delta_phi, electron_budget, det, rng, k, coherence)


def _estimate_poisson(delta_phi, budget, det, rng, k, coherence):
    """Poisson-mean-k groups with per-group maximum likelihood (Fisher scoring)."""
    sizes = []
    spent = 0
    while spent < budget:
        size = int(rng.poisson(k))
        if spent + size > budget:
            break
        sizes.append(size)
        spent += size
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.size == 0:
        raise BudgetError("no Poisson group fits within the electron budget")
    # pixel draws matter only for dose accounting: compensation removes
    # the detection kicks exactly, leaving phases of k_i * delta_phi
    pixels, used, discards = protocol.draw_good_pixels(det, int(sizes.sum()), rng, budget=budget)
    complete = int(np.searchsorted(np.cumsum(sizes), pixels.size, side="right"))
    sizes = sizes[:complete]
    if sizes.size == 0:
        raise BudgetError("no Poisson group completed within the electron budget")
    phases = sizes * delta_phi
    p1 = 0.5 * (1.0 + coherence * np.sin(phases))
    y = (rng.random(sizes.size) < p1).astype(float)

    info = float(np.sum(sizes.astype(float) ** 2)) * max(coherence, 1e-12) ** 2
    theta = 0.0
    bound = 0.5 * math.pi / max(k, 1)
    for _ in range(25):
        s = np.sin(sizes * theta)
        c = np.cos(sizes * theta)
        p = 0.5 * (1.0 + coherence * s)
        var = np.clip(p * (1.0 - p), 1e-12, None)
        score = float(np.sum((y - p) * (0.5 * coherence * sizes * c) / var))
        step = score / info
        theta = min(bound, max(-bound, theta + step))
        if abs(step) < 1e-12:
            break
    return EstimationResult(
        estimate=theta,
        std_error=1.0 / math.sqrt(info),
        trials=int(sizes.size),
        electrons_used=int(used),
        boundary_discards=int(discards),
        mode="entangled",
        k=k,
    )


def effective_specimen_phase(specimen_det: DetectorModel, calibration_det: DetectorModel) -> float:
    """Power-weighted mean detection kick left after calibration compensation.

    This is the phase per electron an end-to-end run accumulates when
    collapsing on the specimen-loaded detector but compensating with the
    specimen-free calibration angles; boundary pixels are excluded to
    match the discard policy.
    """
    delta = specimen_det.beta - calibration_det.beta
    delta -= 2.0 * math.pi * np.round(delta / (2.0 * math.pi))
    w = 0.5 * (specimen_det.power_a + specimen_det.power_b)
    ok = ~specimen_det.boundary_mask
    return float(np.sum(w[ok] * delta[ok]) / np.sum(w[ok]))


def estimate_phase_end_to_end(
    specimen_det: DetectorModel,
    calibration_beta: np.ndarray,
    k: int,
    electron_budget: int,
    rng: np.random.Generator,
) -> EstimationResult:
    """Wave-optics-coupled estimate: collapse on the specimen-loaded detector.

    Runs the exact sequential protocol (the specimen perturbs the branch
    moduli slightly, so the vectorized equal-weight kernel is not used),
    compensates with the separately calibrated angles, and inverts the
    quadrature law.  The recovered value converges to
    `effective_specimen_phase` of the two detectors.
    """
    if electron_budget < k:
        raise BudgetError(f"budget {electron_budget} is smaller than one group of {k}")
    calibration_beta = np.asarray(calibration_beta, dtype=float)
    plan = GroupPlan(k=k, delta_phi=0.0)
    outcomes = []
    used = 0
    discards = 0
    while used + k <= electron_budget:
        result = protocol.run_group(plan, specimen_det, rng)
        used += k + result.boundary_discards
        discards += result.boundary_discards
        if used > electron_budget:
            break
        comp = float(sum(calibration_beta[r.pixel_index] for r in result.records if not r.boundary))
        qubit = protocol.compensate(result.qubit, comp)
        outcomes.append(protocol.measure_qubit(qubit, "quadrature", rng))
    if not outcomes:
        raise BudgetError("no group completed within the electron budget")
    p_hat = float(np.mean(outcomes))
    return EstimationResult(
        estimate=_invert_quadrature(p_hat, k),
        std_error=1.0 / (k * math.sqrt(len(outcomes))),
        trials=len(outcomes),
        electrons_used=used,
        boundary_discards=discards,
        mode="entangled",
        k=k,
    )


# ---------------------------------------------------------------------------
# dose-scaling experiment


@dataclass
class ScalingRow:
    k: int
    electrons: int
    achieved_std: float
    probes: list[tuple[int, float]] = field(default_factory=list)


@dataclass
class DoseScalingResult:
    delta_phi: float
    target_std: float
    repetitions: int
    rows: list[ScalingRow]
    slope: float | None
    slope_stderr: float | None
    intercept: float | None


def _empirical_std(delta_phi, k, budget, repetitions, seed, det, mode):
    estimates = np.empty(repetitions)
    for rep in range(repetitions):
        rng = derive(seed, DOMAIN_SCALING, k, budget, rep)
        res = estimate_phase(mode, delta_phi, budget, det, rng, k=k)
        estimates[rep] = res.estimate
    return float(estimates.std(ddof=1))


def electrons_to_target_std(
    delta_phi: float,
    k: int,
    target_std: float,
    repetitions: int,
    seed: int,
    det: DetectorModel | None = None,
    mode: str = "entangled",
) -> ScalingRow:
    """Measure the electron budget at which the estimate spread hits target_std.

    Doubles the budget until the empirical standard deviation over
    `repetitions` independent estimates drops below target, then
    bisects in log space to about 3%.  The search never assumes the
    1/sqrt(k N) law it is used to test.
    """
    if target_std <= 0.0:
        raise ValueError("target_std must be positive")
    if repetitions < 2:
        raise ValueError("need at least two repetitions to measure a spread")
    probes: list[tuple[int, float]] = []

    budget = max(4 * k, 16)
    std = _empirical_std(delta_phi, k, budget, repetitions, seed, det, mode)
    probes.append((budget, std))
    while std > target_std:
        if budget > 10**9:
            raise BudgetError("target spread unreachable below 1e9 electrons")
        budget *= 2
        std = _empirical_std(delta_phi, k, budget, repetitions, seed, det, mode)
        probes.append((budget, std))

    lo, hi = budget // 2, budget
    achieved = std
    if probes[0][0] == hi:  # already below target at the starting budget
        lo = max(k, hi // 2)
    while hi > lo + 1 and hi / lo > 1.03:
        mid = int(round(math.sqrt(lo * hi)))
        std = _empirical_std(delta_phi, k, mid, repetitions, seed, det, mode)
        probes.append((mid, std))
        if std <= target_std:
            hi, achieved = mid, std
        else:
            lo = mid
    return ScalingRow(k=k, electrons=hi, achieved_std=achieved, probes=probes)


def dose_scaling_experiment(
    delta_phi: float,
    k_list: list[int],
    target_std: float,
    repetitions: int,
    seed: int,
    det: DetectorModel | None = None,
) -> DoseScalingResult:
    """Electrons-to-target-spread for each group size, plus a log-log fit.

    The entangled scheme predicts electrons proportional to 1/k, i.e. a
    fitted slope of -1 for log(electrons) against log(k).
    """
    if not k_list:
        raise ValueError("k_list must not be empty")
    for k in k_list:
        if abs(k * delta_phi) >= 0.5 * math.pi:
            raise AmbiguityError(f"k = {k} puts |k * delta_phi| >= pi/2; drop it from k_list")
    rows = [electrons_to_target_std(delta_phi, k, target_std, repetitions, seed, det) for k in k_list]
    slope = slope_stderr = intercept = None
    if len(rows) >= 2:
        x = np.log(np.array([r.k for r in rows], dtype=float))
        y = np.log(np.array([r.electrons for r in rows], dtype=float))
        if len(rows) >= 3:
            coeffs, cov = np.polyfit(x, y, 1, cov=True)
            slope, intercept = float(coeffs[0]), float(coeffs[1])
            slope_stderr = float(math.sqrt(cov[0, 0]))
        else:
            coeffs = np.polyfit(x, y, 1)
            slope, intercept = float(coeffs[0]), float(coeffs[1])
    return DoseScalingResult(
        delta_phi=delta_phi,
        target_std=target_std,
        repetitions=repetitions,
        rows=rows,
        slope=slope,
        slope_stderr=slope_stderr,
        intercept=intercept,
    )


# ---------------------------------------------------------------------------
# synthetic specimens and imaging


@dataclass
class SpecimenMap:
    """Ground-truth phase grid plus the (S0, S1) region pairs to compare."""

    phase: np.ndarray
    pairs: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=float)
        if self.phase.ndim != 2:
            raise ValueError("phase map must be 2-D")
        self.pairs = [
            (np.asarray(s0, dtype=np.int64).ravel(), np.asarray(s1, dtype=np.int64).ravel())
            for s0, s1 in self.pairs
        ]

    def validate(self) -> list[str]:
        """Raise on structural problems; return soft warnings."""
        warnings = []
        size = self.phase.size
        for i, (s0, s1) in enumerate(self.pairs):
            if s0.size == 0 or s1.size == 0:
                raise ValueError(f"pair {i} has an empty region")
            if np.intersect1d(s0, s1).size:
                raise ValueError(f"pair {i} regions overlap")
            if s0.max() >= size or s1.max() >= size or s0.min() < 0 or s1.min() < 0:
                raise ValueError(f"pair {i} indexes outside the phase map")
        if np.abs(self.phase).max() > 0.5:
            warnings.append("phase map exceeds 0.5 rad; weak-phase treatment is questionable")
        return warnings

    def pair_delta_phi(self, index: int) -> float:
        s0, s1 = self.pairs[index]
        flat = self.phase.ravel()
        return float(flat[s1].mean() - flat[s0].mean())


def make_checkerboard(shape: int = 32, tile: int = 8, delta_phi: float = 0.05) -> SpecimenMap:
    """Two-level checkerboard with one (S0, S1) pair per horizontally adjacent tile pair."""
    if shape % tile != 0 or (shape // tile) % 2 != 0:
        raise ValueError("shape must hold an even number of tiles per side")
    tiles = shape // tile
    phase = np.zeros((shape, shape))
    index = np.arange(shape * shape).reshape(shape, shape)
    pairs = []
    for tr in range(tiles):
        for tc in range(tiles):
            r0, c0 = tr * tile, tc * tile
            phase[r0 : r0 + tile, c0 : c0 + tile] = ((tr + tc) % 2) * delta_phi
    for tr in range(tiles):
        for tc in range(0, tiles, 2):
            left = index[tr * tile : (tr + 1) * tile, tc * tile : (tc + 1) * tile].ravel()
            right = index[tr * tile : (tr + 1) * tile, (tc + 1) * tile : (tc + 2) * tile].ravel()
            if (tr + tc) % 2 == 0:  # left tile is the low-phase side
                pairs.append((left, right))
            else:
                pairs.append((right, left))
    return SpecimenMap(phase=phase, pairs=pairs)


@dataclass
class ImageScanResult:
    """Per-pair estimates against ground truth, with dose bookkeeping."""

    estimates: np.ndarray
    std_errors: np.ndarray
    true_values: np.ndarray
    rmse: float
    total_dose: int
    boundary_discards: int
    incomplete: bool
    mode: str
    k: int
    shape: tuple[int, int]
    pairs: list[tuple[np.ndarray, np.ndarray]]

    def painted_map(self) -> np.ndarray:
        """Paint each estimated pair value over its two regions (NaN elsewhere)."""
        out = np.full(self.shape[0] * self.shape[1], np.nan)
        for i, (s0, s1) in enumerate(self.pairs):
            if math.isnan(self.estimates[i]):
                continue
            out[s0] = self.estimates[i]
            out[s1] = self.estimates[i]
        return out.reshape(self.shape)


def image_scan(
    spec: SpecimenMap,
    mode: str,
    per_pair_budget: int,
    det: DetectorModel | None,
    seed: int,
    *,
    k: int = 1,
    total_budget: int | None = None,
    scan_index: int = 0,
) -> ImageScanResult:
    """Estimate every pair's phase difference and compare to ground truth.

    Each pair gets `per_pair_budget` electrons (a `total_budget` cap can
    cut the scan short, leaving NaN estimates and an incomplete flag).
    RMSE is over the estimated pairs only.  `scan_index` separates the
    random streams of repeated scans under one seed.
    """
    if not spec.pairs:
        raise ValueError("specimen has no pairs to scan")
    if per_pair_budget < 1:
        raise BudgetError("per-pair budget must be >= 1")
    spec.validate()
    mode_id = MODES.index(mode) if mode in MODES else -1
    n = len(spec.pairs)
    estimates = np.full(n, np.nan)
    std_errors = np.full(n, np.nan)
    true_values = np.array([spec.pair_delta_phi(i) for i in range(n)])
    spent = 0
    discards = 0
    incomplete = False
    for i in range(n):
        if total_budget is not None and spent + per_pair_budget > total_budget:
            incomplete = True
            break
        rng = derive(seed, DOMAIN_IMAGE, mode_id, scan_index, i)
        res = estimate_phase(mode, true_values[i], per_pair_budget, det, rng, k=k)
        estimates[i] = res.estimate
        std_errors[i] = res.std_error
        spent += res.electrons_used
        discards += res.boundary_discards
    done = ~np.isnan(estimates)
    rmse = float(np.sqrt(np.mean((estimates[done] - true_values[done]) ** 2))) if done.any() else float("nan")
    return ImageScanResult(
        estimates=estimates,
        std_errors=std_errors,
        true_values=true_values,
        rmse=rmse,
        total_dose=spent,
        boundary_discards=discards,
        incomplete=incomplete,
        mode=mode,
        k=k,
        shape=spec.phase.shape,
        pairs=spec.pairs,
    )
