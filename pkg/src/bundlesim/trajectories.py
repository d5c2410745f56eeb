"""Quantum-jump (Monte Carlo wave function) unravelling and click statistics.

Each trajectory evolves under the non-Hermitian effective Hamiltonian
``H_eff = H - i/2 sum_c O_c† O_c`` between jumps.  ``H_eff`` is
diagonalized once, so between jumps the unnormalized state has the
closed form ``V exp(-i w t) V^-1 psi`` at any ``t``.  The squared norm
of that state is non-increasing in time, so the jump time (where the
norm crosses a uniform random threshold) is found by bisection over the
whole inter-jump interval.  No time stepping is involved anywhere: cost
scales with the number of clicks, not with the simulated duration, and
results carry no step-size error.

Randomness bookkeeping, which fixes reproducibility: one uniform draw
per no-jump segment (the norm threshold) and one per jump (the channel
choice), taken from a per-trajectory ``numpy`` generator.  Snapshot
evaluation consumes no randomness, so requesting snapshots never
changes the click sequence.  Ensembles hand each trajectory a child of
one master ``SeedSequence``, so results are bit-for-bit reproducible
and independent of how many workers the ensemble is spread over.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientStatistics,
    MissingSnapshot,
    SolverFailure,
    TruncationLeak,
)
from .model import JumpChannel, SystemParams, physical_rate
from .operators import QD_LABELS, HilbertConfig

BISECT_REL_TOL = 1e-10


@dataclass(frozen=True)
class Click:
    """One detected quantum jump."""

    t: float
    channel: str


@dataclass(frozen=True)
class Bundle:
    """A group of phonon clicks closer than the grouping gap."""

    t_first: float
    t_last: float
    size: int


@dataclass
class TrajectoryResult:
    index: int
    duration: float
    clicks: list[Click]
    snapshots: dict[float, np.ndarray] = field(default_factory=dict)
    leak_max: float = 0.0

    def click_times(self, channel: str = "phonon") -> np.ndarray:
        return np.array([c.t for c in self.clicks if c.channel == channel])


class _Propagator:
    """Closed-form no-jump propagation in the eigenbasis of H_eff."""

    def __init__(self, hamiltonian: np.ndarray, channels: list[JumpChannel]):
        heff = hamiltonian.astype(complex).copy()
        for ch in channels:
            heff -= 0.5j * (ch.op.conj().T @ ch.op)
        w, v = np.linalg.eig(heff)
        vinv = np.linalg.inv(v)
        residual = np.abs(v @ (w[:, None] * vinv) - heff).max()
        scale = max(np.abs(heff).max(), 1.0)
        if residual > 1e-9 * scale:
            raise SolverFailure(
                f"effective Hamiltonian eigendecomposition residual {residual:.2e} "
                f"too large (near-defective matrix?)"
            )
        self.w = w
        self.v = v
        self.vinv = vinv

    def coeffs(self, psi: np.ndarray) -> np.ndarray:
        return self.vinv @ psi

    def state(self, coeffs: np.ndarray, tau: float) -> np.ndarray:
        """Unnormalized state a time ``tau`` after the segment start."""
        return self.v @ (np.exp(-1j * self.w * tau) * coeffs)


def _leak(psi_normalized: np.ndarray, top: tuple[int, int]) -> float:
    return float(abs(psi_normalized[top[0]]) ** 2 + abs(psi_normalized[top[1]]) ** 2)


def run_trajectory(
    h: HilbertConfig,
    hamiltonian: np.ndarray,
    channels: list[JumpChannel],
    psi0: np.ndarray,
    duration: float,
    seed: int | np.random.SeedSequence,
    snapshot_times: tuple[float, ...] = (),
    leak_tol: float = 1e-6,
    index: int = 0,
) -> TrajectoryResult:
    """One quantum-jump trajectory of length ``duration``.

    Snapshots are the normalized conditional state at the requested
    times (pre-jump if a jump lands exactly there).  Truncation health
    is checked at segment boundaries, jumps, and snapshots.
    """
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    psi = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"psi0 must be normalized, got norm {norm}")
    prop = _Propagator(hamiltonian, channels)
    rng = np.random.default_rng(seed)
    top = (h.index(h.n_max, "v"), h.index(h.n_max, "c"))
    snap_times = sorted(float(t) for t in snapshot_times)
    if snap_times and (snap_times[0] < 0 or snap_times[-1] > duration):
        raise ValueError("snapshot times must lie within [0, duration]")
    snapshots: dict[float, np.ndarray] = {}
    clicks: list[Click] = []
    leak_max = _leak(psi, top)
    t = 0.0
    snap_i = 0
    while snap_i < len(snap_times) and snap_times[snap_i] <= 0.0:
        snapshots[snap_times[snap_i]] = psi.copy()
        snap_i += 1

    def take_snapshots(limit: float, coeffs: np.ndarray, t0: float) -> None:
        """Record snapshots with t0 < time <= limit from segment coefficients."""
        nonlocal snap_i, leak_max
        while snap_i < len(snap_times) and snap_times[snap_i] <= limit:
            ts = snap_times[snap_i]
            state = prop.state(coeffs, ts - t0)
            state = state / np.linalg.norm(state)
            snapshots[ts] = state
            leak_max = max(leak_max, _leak(state, top))
            snap_i += 1

    while t < duration:
        coeffs = prop.coeffs(psi)
        threshold = rng.random()
        t_rem = duration - t
        tail = prop.state(coeffs, t_rem)
        if np.vdot(tail, tail).real > threshold:
            # no jump before the end of the run
            take_snapshots(duration, coeffs, t)
            tail /= np.linalg.norm(tail)
            leak_max = max(leak_max, _leak(tail, top))
            psi = tail
            break
        lo, hi = 0.0, t_rem
        while hi - lo > BISECT_REL_TOL * max(1.0, t + hi):
            mid = 0.5 * (lo + hi)
            state = prop.state(coeffs, mid)
            if np.vdot(state, state).real > threshold:
                lo = mid
            else:
                hi = mid
        tau = hi
        take_snapshots(t + tau, coeffs, t)
        pre_jump = prop.state(coeffs, tau)
        pre_norm = np.linalg.norm(pre_jump)
        leak_max = max(leak_max, _leak(pre_jump / pre_norm, top))
        weights = np.array([np.linalg.norm(ch.op @ pre_jump) ** 2 for ch in channels])
        total = weights.sum()
        if total <= 0:
            raise SolverFailure(
                f"no channel has weight at a detected jump (t = {t + tau:.6g})"
            )
        pick = int(np.searchsorted(np.cumsum(weights / total), rng.random()))
        pick = min(pick, len(channels) - 1)
        psi = channels[pick].op @ pre_jump
        psi /= np.linalg.norm(psi)
        leak_max = max(leak_max, _leak(psi, top))
        t += tau
        clicks.append(Click(t=t, channel=channels[pick].label))
        if leak_max > leak_tol:
            raise TruncationLeak(
                f"top phonon level reached population {leak_max:.2e} > {leak_tol:.1e} "
                f"at t = {t:.6g}; raise n_max above {h.n_max}"
            )
    if leak_max > leak_tol:
        raise TruncationLeak(
            f"top phonon level reached population {leak_max:.2e} > {leak_tol:.1e}; "
            f"raise n_max above {h.n_max}"
        )
    return TrajectoryResult(
        index=index,
        duration=duration,
        clicks=clicks,
        snapshots=snapshots,
        leak_max=leak_max,
    )


def _run_indexed(
    args: tuple,
) -> TrajectoryResult:
    (h, hamiltonian, channels, psi0, duration, child_seed, snapshot_times, leak_tol, idx) = args
    return run_trajectory(
        h,
        hamiltonian,
        channels,
        psi0,
        duration,
        child_seed,
        snapshot_times=snapshot_times,
        leak_tol=leak_tol,
        index=idx,
    )


def run_ensemble(
    h: HilbertConfig,
    hamiltonian: np.ndarray,
    channels: list[JumpChannel],
    psi0: np.ndarray,
    duration: float,
    n_traj: int,
    seed: int,
    snapshot_times: tuple[float, ...] = (),
    leak_tol: float = 1e-6,
    workers: int | None = None,
) -> list[TrajectoryResult]:
    """Ensemble of independent trajectories from one master seed.

    Trajectory ``i`` always receives child ``i`` of
    ``SeedSequence(seed)``, so the ensemble is reproducible bit for bit
    whatever ``workers`` is.
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    children = np.random.SeedSequence(seed).spawn(n_traj)
    args = [
        (h, hamiltonian, channels, psi0, duration, children[i], tuple(snapshot_times), leak_tol, i)
        for i in range(n_traj)
    ]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_indexed, args, chunksize=max(1, n_traj // (4 * workers))))
    else:
        results = [_run_indexed(a) for a in args]
    return results


def group_bundles(clicks: list[Click], gap: float) -> list[Bundle]:
    """Group the phonon clicks of one trajectory into emission bundles.

    Consecutive phonon clicks separated by at most ``gap`` belong to the
    same bundle.  Photon and dephasing clicks are emitter-side events
    and never enter bundles.
    """
    if gap <= 0:
        raise ValueError(f"gap must be positive, got {gap}")
    times = sorted(c.t for c in clicks if c.channel == "phonon")
    bundles: list[Bundle] = []
    if not times:
        return bundles
    start = prev = times[0]
    size = 1
    for t in times[1:]:
        if t - prev < gap:
            size += 1
        else:
            bundles.append(Bundle(t_first=start, t_last=prev, size=size))
            start = t
            size = 1
        prev = t
    bundles.append(Bundle(t_first=start, t_last=prev, size=size))
    return bundles


@dataclass(frozen=True)
class BundleStatistics:
    """Bundle-size histogram and rates for an ensemble."""

    gap: float
    total_duration: float
    n_trajectories: int
    n_phonon_clicks: int
    counts: dict[int, int]
    rates_internal: dict[int, float]
    rates_physical: dict[int, float] | None
    click_rate_internal: float

    @property
    def n_bundles(self) -> int:
        return sum(self.counts.values())

    def fraction(self, size: int) -> float:
        total = self.n_bundles
        return self.counts.get(size, 0) / total if total else 0.0


def bundle_statistics(
    trajectories: list[TrajectoryResult],
    gap: float,
    p: SystemParams | None = None,
) -> BundleStatistics:
    """Aggregate bundle counts and rates over an ensemble.

    Rates are per unit of 1/omega_b; when ``p`` carries
    ``omega_b_physical`` they are also quoted per second.
    """
    counts: dict[int, int] = {}
    n_clicks = 0
    total_duration = 0.0
    for traj in trajectories:
        total_duration += traj.duration
        n_clicks += len(traj.click_times("phonon"))
        for bundle in group_bundles(traj.clicks, gap):
            counts[bundle.size] = counts.get(bundle.size, 0) + 1
    rates_internal = {size: c / total_duration for size, c in sorted(counts.items())}
    rates_physical = None
    if p is not None and p.omega_b_physical is not None:
        rates_physical = {
            size: physical_rate(p, rate) for size, rate in rates_internal.items()
        }
    return BundleStatistics(
        gap=gap,
        total_duration=total_duration,
        n_trajectories=len(trajectories),
        n_phonon_clicks=n_clicks,
        counts=dict(sorted(counts.items())),
        rates_internal=rates_internal,
        rates_physical=rates_physical,
        click_rate_internal=n_clicks / total_duration,
    )


@dataclass(frozen=True)
class PurityEstimate:
    """Window-sampled bundle purity.

    ``p_bar[k-1]`` is the fraction of non-empty windows holding exactly
    ``k`` phonon clicks (k = 1..n_target); the purity is
    ``p_bar[n-1] / sum(p_bar)``.  Windows with more than ``n_target``
    clicks count toward ``overflow_fraction`` and are excluded from the
    purity denominator.  The standard error comes from a bootstrap over
    trajectories, which respects the correlation between windows drawn
    from the same trajectory.
    """

    n_target: int
    window: float
    n_windows: int
    n_nonempty: int
    p_bar: np.ndarray
    purity: float
    stderr: float
    overflow_fraction: float


def estimate_purity(
    trajectories: list[TrajectoryResult],
    n_target: int,
    window: float,
    n_windows: int,
    seed: int,
    target_stderr: float = 0.01,
    min_windows: int = 10,
    n_bootstrap: int = 200,
) -> PurityEstimate:
    """Estimate the n-phonon purity by sampling random time windows.

    Windows start uniformly over the ensemble's total simulated time
    (weighted by trajectory duration).  Sampling proceeds in batches
    and stops as soon as the bootstrap standard error drops below
    ``target_stderr``; ``n_windows`` is the total budget.  If the
    budget runs out first, :class:`~bundlesim.errors.InsufficientStatistics`
    is raised with the partial estimate attached as ``estimate``.

    The standard error is a bootstrap over trajectories, which respects
    the correlation between windows drawn from the same trajectory; it
    therefore plateaus at the event-count limit of the ensemble rather
    than shrinking indefinitely with more windows.
    """
    if n_target < 1:
        raise ValueError(f"n_target must be >= 1, got {n_target}")
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if n_windows < 1:
        raise ValueError(f"n_windows must be >= 1, got {n_windows}")
    durations = np.array([t.duration for t in trajectories])
    if np.any(durations < window):
        raise ValueError("window longer than the shortest trajectory")
    rng = np.random.default_rng(seed)
    click_times = [t.click_times("phonon") for t in trajectories]
    n_traj = len(trajectories)
    weight = durations / durations.sum()

    def purity_from(hist_total: np.ndarray) -> tuple[float, np.ndarray, float, int]:
        nonempty = int(hist_total[1:].sum())
        if nonempty == 0:
            return np.nan, np.full(n_target, np.nan), np.nan, 0
        p_bar = hist_total[1 : n_target + 1] / nonempty
        denom = p_bar.sum()
        pur = p_bar[n_target - 1] / denom if denom > 0 else np.nan
        over = hist_total[n_target + 1] / nonempty
        return pur, p_bar, over, nonempty

    # window-count histogram per trajectory: columns are counts
    # 0..n_target plus one overflow bucket
    hist = np.zeros((n_traj, n_target + 2), dtype=np.int64)
    batch = max(1000, n_windows // 10)
    drawn = 0
    stderr = np.inf
    while drawn < n_windows:
        size = min(batch, n_windows - drawn)
        traj_pick = rng.choice(n_traj, size=size, p=weight)
        starts = rng.random(size) * (durations[traj_pick] - window)
        for i in np.unique(traj_pick):
            s = starts[traj_pick == i]
            counts = np.searchsorted(click_times[i], s + window) - np.searchsorted(
                click_times[i], s
            )
            counts = np.minimum(counts, n_target + 1)
            hist[i] += np.bincount(counts, minlength=n_target + 2)
        drawn += size
        purity, p_bar, overflow, nonempty = purity_from(hist.sum(axis=0))
        if nonempty >= min_windows:
            boots = []
            for _ in range(n_bootstrap):
                resample = rng.integers(0, n_traj, size=n_traj)
                pur_b, _, _, nonempty_b = purity_from(hist[resample].sum(axis=0))
                if nonempty_b > 0 and np.isfinite(pur_b):
                    boots.append(pur_b)
            if len(boots) >= n_bootstrap // 2:
                stderr = float(np.std(boots, ddof=1))
                if stderr <= target_stderr:
                    break

    purity, p_bar, overflow, nonempty = purity_from(hist.sum(axis=0))
    estimate = PurityEstimate(
        n_target=n_target,
        window=window,
        n_windows=drawn,
        n_nonempty=nonempty,
        p_bar=p_bar,
        purity=float(purity),
        stderr=float(stderr),
        overflow_fraction=float(overflow),
    )
    if nonempty < min_windows:
        raise InsufficientStatistics(
            f"only {nonempty} non-empty windows (< {min_windows}); extend the ensemble "
            f"or enlarge the windows",
            estimate=estimate,
        )
    if stderr > target_stderr:
        raise InsufficientStatistics(
            f"window budget {n_windows} exhausted at stderr {stderr:.4f} > "
            f"target {target_stderr:.4f}; extend n_traj or duration",
            estimate=estimate,
        )
    return estimate


def snapshot_density(
    trajectory: TrajectoryResult, times, atol: float = 1e-9
) -> list[np.ndarray]:
    """Pure-state projectors |psi(t)><psi(t)| from one trajectory.

    Every requested time must have been recorded as a snapshot when the
    trajectory ran (within ``atol``); otherwise
    :class:`~bundlesim.errors.MissingSnapshot` is raised.
    """
    out = []
    for time in np.atleast_1d(np.asarray(times, dtype=float)):
        found = None
        for ts, state in trajectory.snapshots.items():
            if abs(ts - time) <= atol * max(1.0, abs(time)):
                found = state
                break
        if found is None:
            raise MissingSnapshot(
                f"trajectory {trajectory.index} holds no snapshot at t = {time:.6g}"
            )
        out.append(np.outer(found, found.conj()))
    return out
