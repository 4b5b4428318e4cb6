"""State-vector simulation of the entanglement-assisted measurement cycle.

One cycle sends a probe electron through the column: the electron
entangles with a two-level flux qubit, picks up the specimen phase
difference on one branch, and is detected in the far field.  Detection
at pixel j kicks the qubit's relative phase by the known angle beta_j.
Repeating the cycle k times without resetting the qubit accumulates

    relative phase = sigma_0 + sum(beta_j) + k * delta_phi

exactly; the known sum(beta_j) is then cancelled classically and the
qubit is read out.  Everything here is a pure function of its inputs
plus an explicit random generator, so independent trials parallelize
trivially (see `streams`).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .detector import DetectorModel
from .errors import BoundaryEventError, InvalidStateError

TWO_PI = 2.0 * math.pi

Basis = Literal["symmetric_antisymmetric", "quadrature"]
BoundaryPolicy = Literal["discard", "abort"]

_BASES = ("symmetric_antisymmetric", "quadrature")

NORM_TOL = 1e-12


def wrap_angle(x):
    """Reduce an angle (scalar or array) to the representative in (-pi, pi]."""
    r = x - TWO_PI * np.round(np.asarray(x, dtype=float) / TWO_PI)
    r = np.where(r <= -math.pi, r + TWO_PI, r)
    return float(r) if np.ndim(x) == 0 else r


@dataclass(frozen=True)
class QubitState:
    """Normalized two-amplitude flux-qubit state.

    The observable content is the relative phase arg(amp1) - arg(amp0);
    `canonical()` fixes the global phase so amp0 is real and >= 0.
    """

    amp0: complex
    amp1: complex

    def __post_init__(self):
        object.__setattr__(self, "amp0", complex(self.amp0))
        object.__setattr__(self, "amp1", complex(self.amp1))

    def norm_sq(self) -> float:
        return abs(self.amp0) ** 2 + abs(self.amp1) ** 2

    def require_normalized(self, tol: float = NORM_TOL) -> None:
        if not math.isfinite(self.norm_sq()) or abs(self.norm_sq() - 1.0) > tol:
            raise InvalidStateError(f"qubit norm^2 = {self.norm_sq()!r} is not 1 within {tol}")

    @property
    def relative_phase(self) -> float:
        """arg(amp1) - arg(amp0), wrapped to (-pi, pi]."""
        return wrap_angle(cmath.phase(self.amp1) - cmath.phase(self.amp0))

    def canonical(self) -> "QubitState":
        """Remove the global phase: amp0 real >= 0 (amp1 real >= 0 if amp0 = 0)."""
        ref = self.amp0 if abs(self.amp0) > 0.0 else self.amp1
        if abs(ref) == 0.0:
            return self
        phase = ref / abs(ref)
        return QubitState(self.amp0 / phase, self.amp1 / phase)


@dataclass(frozen=True)
class JointState:
    """Electron (x) qubit amplitude table c[e][q] after entanglement."""

    c: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.c, dtype=complex)
        if arr.shape != (2, 2):
            raise InvalidStateError(f"joint state must be 2x2, got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.c) ** 2))

    def require_normalized(self, tol: float = NORM_TOL) -> None:
        if not math.isfinite(self.norm_sq()) or abs(self.norm_sq() - 1.0) > tol:
            raise InvalidStateError(f"joint norm^2 = {self.norm_sq()!r} is not 1 within {tol}")

    @property
    def relative_phase(self) -> float:
        """arg(c[1][1]) - arg(c[0][0]), wrapped to (-pi, pi]."""
        return wrap_angle(cmath.phase(self.c[1, 1]) - cmath.phase(self.c[0, 0]))


@dataclass(frozen=True)
class DetectionRecord:
    """One far-field detection: pixel index, its beta, and the posterior qubit."""

    pixel_index: int
    beta: float
    posterior: QubitState
    boundary: bool = False


@dataclass(frozen=True)
class GroupPlan:
    """Parameters of one k-electron group: size, specimen phase, initial sigma."""

    k: int
    delta_phi: float
    sigma0: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"group size k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if not (-math.pi < self.delta_phi <= math.pi):
            raise ValueError(f"delta_phi must lie in (-pi, pi], got {self.delta_phi!r}")
        if not math.isfinite(self.sigma0):
            raise ValueError("sigma0 must be finite")


@dataclass
class GroupResult:
    """Output of `run_group`: final qubit, accumulated beta, and the event log."""

    qubit: QubitState
    sum_beta: float
    records: list[DetectionRecord] = field(default_factory=list)
    boundary_discards: int = 0


def prepare_symmetric(sigma: float) -> QubitState:
    """Prepare (e^{-i sigma/2}|0> + e^{+i sigma/2}|1>)/sqrt(2)."""
    if not math.isfinite(sigma):
        raise ValueError(f"sigma must be finite, got {sigma!r}")
    inv = 1.0 / math.sqrt(2.0)
    return QubitState(cmath.exp(-0.5j * sigma) * inv, cmath.exp(0.5j * sigma) * inv)


def entangle(qubit: QubitState) -> JointState:
    """Copy the qubit branch index onto the electron: c[q][q] = amp_q."""
    qubit.require_normalized()
    c = np.zeros((2, 2), dtype=complex)
    c[0, 0] = qubit.amp0
    c[1, 1] = qubit.amp1
    return JointState(c)


def apply_specimen(joint: JointState, delta_phi: float) -> JointState:
    """Phase the electron branches by -delta_phi/2 (branch 0) and +delta_phi/2 (branch 1)."""
    joint.require_normalized()
    c = joint.c.copy()
    c[0, :] *= cmath.exp(-0.5j * delta_phi)
    c[1, :] *= cmath.exp(+0.5j * delta_phi)
    return JointState(c)


def detection_probabilities(joint: JointState, det: DetectorModel) -> np.ndarray:
    """Born-rule pixel distribution P(j) for detecting the electron at pixel j.

    P(j) = sum_q |a_j c[0][q] + b_j c[1][q]|^2, which reduces to the
    branch-wise form |c0|^2 |a_j|^2 + |c1|^2 |b_j|^2 for the diagonal
    joint states this protocol produces.
    """
    c = joint.c
    p = np.zeros(det.n_pixels)
    for q in (0, 1):
        amp = det.a * c[0, q] + det.b * c[1, q]
        p += np.abs(amp) ** 2
    total = p.sum()
    if total <= 0.0:
        raise InvalidStateError("detection distribution has zero total probability")
    return p / total


def posterior_after_detection(joint: JointState, det: DetectorModel, pixel: int) -> QubitState:
    """Normalized qubit state left behind after detection at `pixel`."""
    c = joint.c
    amp0 = det.a[pixel] * c[0, 0] + det.b[pixel] * c[1, 0]
    amp1 = det.a[pixel] * c[0, 1] + det.b[pixel] * c[1, 1]
    norm = math.hypot(abs(amp0), abs(amp1))
    if norm == 0.0:
        raise InvalidStateError(f"pixel {pixel} has zero detection amplitude")
    return QubitState(amp0 / norm, amp1 / norm)


def _sample_pixel(joint: JointState, det: DetectorModel, rng: np.random.Generator) -> int:
    w0 = float(np.sum(np.abs(joint.c[0, :]) ** 2))
    w1 = float(np.sum(np.abs(joint.c[1, :]) ** 2))
    if abs(w0 - w1) <= 1e-12:
        cum = det.equal_weight_cumulative
    else:
        p = w0 * det.power_a + w1 * det.power_b
        cum = np.cumsum(p)
        cum /= cum[-1]
        cum[-1] = 1.0
    u = rng.random()
    return int(np.searchsorted(cum, u, side="right"))


def collapse_on_detection(joint: JointState, det: DetectorModel, rng: np.random.Generator) -> DetectionRecord:
    """Sample a detector pixel and collapse the qubit accordingly.

    The posterior relative phase equals the prior one plus beta_j of the
    drawn pixel.  Drawing a boundary pixel (unequal branch moduli beyond
    the detector tolerance) raises BoundaryEventError; the caller decides
    whether to discard and resample or to abort.
    """
    joint.require_normalized()
    pixel = _sample_pixel(joint, det, rng)
    if det.boundary_mask[pixel]:
        raise BoundaryEventError(pixel)
    posterior = posterior_after_detection(joint, det, pixel)
    return DetectionRecord(pixel_index=pixel, beta=float(det.beta[pixel]), posterior=posterior)


def run_group(
    plan: GroupPlan,
    det: DetectorModel,
    rng: np.random.Generator,
    policy: BoundaryPolicy = "discard",
    max_discards: int = 100_000,
) -> GroupResult:
    """Send k electrons through entangle -> specimen -> far-field detection.

    The posterior qubit is reused between electrons, so the final
    relative phase is sigma0 + sum(beta_j) + k*delta_phi exactly (up to
    floating point).  Boundary draws follow `policy`: "discard" counts
    the electron and resamples, "abort" re-raises.
    """
    if policy not in ("discard", "abort"):
        raise ValueError(f"unknown boundary policy {policy!r}")
    if policy == "discard" and det.non_boundary_power_fraction() <= 0.0:
        raise InvalidStateError("detector has no non-boundary power; discard policy cannot terminate")
    qubit = prepare_symmetric(plan.sigma0)
    result = GroupResult(qubit=qubit, sum_beta=0.0)
    for _ in range(plan.k):
        while True:
            joint = apply_specimen(entangle(qubit), plan.delta_phi)
            try:
                record = collapse_on_detection(joint, det, rng)
            except BoundaryEventError as err:
                if policy == "abort":
                    raise
                result.boundary_discards += 1
                result.records.append(
                    DetectionRecord(err.pixel, float(det.beta[err.pixel]), qubit, boundary=True)
                )
                if result.boundary_discards > max_discards:
                    raise InvalidStateError(f"exceeded {max_discards} boundary discards in one group") from err
                continue
            qubit = record.posterior
            result.records.append(record)
            result.sum_beta += record.beta
            break
    result.qubit = qubit
    return result


def compensate(qubit: QubitState, sum_beta: float) -> QubitState:
    """Rotate the relative phase down by `sum_beta` (the known detection kicks)."""
    return QubitState(
        qubit.amp0 * cmath.exp(+0.5j * sum_beta),
        qubit.amp1 * cmath.exp(-0.5j * sum_beta),
    )


def phase_audit(result: GroupResult, plan: GroupPlan) -> float:
    """Absolute deviation of the final relative phase from the bookkeeping law."""
    predicted = plan.sigma0 + result.sum_beta + plan.k * plan.delta_phi
    return abs(wrap_angle(result.qubit.relative_phase - predicted))


def measurement_probabilities(qubit: QubitState, basis: Basis, coherence: float = 1.0) -> tuple[float, float]:
    """Outcome probabilities (P(0), P(1)) for the requested readout basis.

    Outcome 1 means `antisymmetric` in the symmetric_antisymmetric basis
    and `plus` in the quadrature basis {(|0> +- i|1>)/sqrt(2)}.  For the
    canonical equal-modulus states these evaluate to sin^2(sigma/2) and
    (1 + sin sigma)/2.  `coherence` < 1 damps the off-diagonal coherence
    (pure dephasing knob for sensitivity studies).
    """
    if basis not in _BASES:
        raise ValueError(f"unknown basis {basis!r}")
    if not 0.0 <= coherence <= 1.0:
        raise ValueError("coherence must lie in [0, 1]")
    qubit.require_normalized()
    rho01 = coherence * qubit.amp0 * qubit.amp1.conjugate()
    if basis == "symmetric_antisymmetric":
        p1 = 0.5 - rho01.real
    else:
        p1 = 0.5 - rho01.imag
    p1 = min(1.0, max(0.0, p1))
    return 1.0 - p1, p1


def measure_qubit(qubit: QubitState, basis: Basis, rng: np.random.Generator, coherence: float = 1.0) -> int:
    """Sample one readout outcome bit (see `measurement_probabilities`)."""
    _, p1 = measurement_probabilities(qubit, basis, coherence)
    return int(rng.random() < p1)


def conventional_probability(delta_phi: float) -> float:
    """P(antisymmetric) = sin^2(delta_phi / 2) for an unentangled electron."""
    return math.sin(0.5 * delta_phi) ** 2


def conventional_trial(delta_phi: float, rng: np.random.Generator) -> int:
    """One unentangled electron measured in the {symmetric, antisymmetric} basis."""
    return int(rng.random() < conventional_probability(delta_phi))


def conventional_trials(delta_phi: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized batch of `conventional_trial` outcomes (uint8 array)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return (rng.random(n) < conventional_probability(delta_phi)).astype(np.uint8)


def draw_good_pixels(
    det: DetectorModel,
    need: int,
    rng: np.random.Generator,
    budget: int | None = None,
) -> tuple[np.ndarray, int, int]:
    """Draw detector pixels until `need` non-boundary hits (or budget runs out).

    Samples the equal-branch-weight Born distribution; boundary hits are
    discarded and resampled.  Returns (good pixel indices in draw order,
    electrons drawn including discards, discard count).  Consumes exactly
    as many draws as a sequential collapse loop would.
    """
    if need < 0:
        raise ValueError("need must be non-negative")
    if det.non_boundary_power_fraction() <= 0.0:
        raise InvalidStateError("detector has no non-boundary power")
    cum = det.equal_weight_cumulative
    boundary = det.boundary_mask
    good_pixels = np.empty(need, dtype=np.int64)
    got = 0
    used = 0
    while got < need and (budget is None or used < budget):
        chunk = need - got if budget is None else min(need - got, budget - used)
        draws = np.searchsorted(cum, rng.random(chunk), side="right")
        good = ~boundary[draws]
        n_good = int(good.sum())
        if n_good > need - got:
            # trim to the draw that completed the last needed electron,
            # exactly where a sequential consumer would have stopped
            stop = int(np.searchsorted(np.cumsum(good), need - got)) + 1
            draws = draws[:stop]
            good = good[:stop]
            n_good = need - got
        good_pixels[got : got + n_good] = draws[good]
        got += n_good
        used += draws.size
    return good_pixels[:got], used, used - got


@dataclass
class GroupBatchResult:
    """Vectorized multi-group run: outcomes, per-group phases and dose accounting."""

    outcomes: np.ndarray
    phases: np.ndarray
    sum_beta: np.ndarray
    groups: int
    electrons_used: int
    boundary_discards: int


def simulate_groups(
    plan: GroupPlan,
    det: DetectorModel,
    n_groups: int,
    rng: np.random.Generator,
    *,
    basis: Basis = "quadrature",
    coherence: float = 1.0,
    compensation_beta: np.ndarray | None = None,
    budget: int | None = None,
) -> GroupBatchResult:
    """Vectorized equivalent of run_group + compensate + measure_qubit.

    Valid for the states this protocol produces (equal branch moduli
    throughout, which holds because every operation is phase-only on the
    two branches), so the pixel distribution is fixed and groups decouple
    into independent draws.  Statistically identical to looping the
    scalar path; random streams are consumed in a different order, so
    the two paths are not bit-identical for the same generator.

    `compensation_beta` overrides the angles subtracted after the group
    (default: the detector's own beta map); passing a separately
    calibrated map leaves any additional physical phase, e.g. a weak
    phase specimen folded into the detector amplitudes, in the readout.
    `budget` caps total electrons drawn including boundary discards;
    incomplete trailing groups are dropped from the statistics but their
    electrons stay spent.
    """
    if n_groups < 0:
        raise ValueError("n_groups must be non-negative")
    if basis not in _BASES:
        raise ValueError(f"unknown basis {basis!r}")
    comp = det.beta if compensation_beta is None else np.asarray(compensation_beta, dtype=float)
    if comp.size != det.n_pixels:
        raise ValueError("compensation_beta length must match the detector")

    good_pixels, used, discards = draw_good_pixels(det, n_groups * plan.k, rng, budget=budget)
    completed = good_pixels.size // plan.k
    pix = good_pixels[: completed * plan.k].reshape(completed, plan.k)
    sum_beta = det.beta[pix].sum(axis=1)
    sum_comp = comp[pix].sum(axis=1)
    phases = plan.sigma0 + sum_beta + plan.k * plan.delta_phi - sum_comp

    if not 0.0 <= coherence <= 1.0:
        raise ValueError("coherence must lie in [0, 1]")
    if basis == "quadrature":
        p1 = 0.5 * (1.0 + coherence * np.sin(phases))
    else:
        p1 = 0.5 * (1.0 - coherence * np.cos(phases))
    outcomes = (rng.random(completed) < p1).astype(np.uint8)
    return GroupBatchResult(
        outcomes=outcomes,
        phases=phases,
        sum_beta=sum_beta,
        groups=completed,
        electrons_used=used,
        boundary_discards=discards,
    )
